//! Plain-text checkpoints: one `key = value` per line, `#` starts a comment.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::dataset::{Scaler, N_SENSORS};
use crate::diffprob::{Guide, Prior, VariationalParameter};
use crate::features::{ColumnScaler, FeatureMode};
use crate::lifetimes::Family;

use super::{BetaPrior, LstmShape, SennConfig, SennError, SennModel};

const FORMAT_VERSION: &str = "1";

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl SennModel {
    pub fn to_checkpoint(&self) -> String {
        let c = &self.config;
        let mut out = String::from("# rulcast structured-effect network checkpoint\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("format", FORMAT_VERSION.into());
        kv("config.family", c.family.name().into());
        kv("config.linear_input", c.linear_input.name().into());
        kv("config.beta_prior", c.beta_prior.name().into());
        kv("config.hidden", c.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","));
        kv("config.window", c.window.to_string());
        kv("config.lags", c.lags.to_string());
        kv("config.steps", c.steps.to_string());
        kv("config.batch", c.batch.to_string());
        kv("config.seed", c.seed.to_string());
        kv("config.n_mc", c.n_mc.to_string());
        kv("config.estimator", match c.estimator {
            crate::diffprob::Estimator::Reparam => "reparam".into(),
            crate::diffprob::Estimator::Score => "score".into(),
        });
        kv("config.learning_rate", format!("{:?}", c.learning_rate));
        kv("config.init_scale", format!("{:?}", c.init_scale));
        kv("empirical.a", format!("{:?}", self.empirical.0));
        kv("empirical.b", format!("{:?}", self.empirical.1));
        kv("sensor_scaler.mean", join(&self.sensor_scaler.mean));
        kv("sensor_scaler.std", join(&self.sensor_scaler.std));
        kv("columns.names", self.column_scaler.names.join(","));
        kv("columns.mean", join(&self.column_scaler.mean));
        kv("columns.std", join(&self.column_scaler.std));
        kv("params", self.guide.len().to_string());
        for p in &self.guide.params {
            let prior = match p.prior {
                Prior::Gaussian { mean, sd } => format!("gaussian {mean:?} {sd:?}"),
                Prior::Laplace { loc, scale } => format!("laplace {loc:?} {scale:?}"),
            };
            kv(&format!("param.{}", p.name), format!("{:?} {:?} {prior} {}", p.mu, p.rho, u8::from(p.trainable)));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, SennError> {
        let mut map: HashMap<&str, (usize, &str)> = HashMap::new();
        let mut params = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| SennError::Checkpoint { line: i + 1, reason: "expected `key = value`".into() })?;
            if let Some(name) = k.strip_prefix("param.") {
                params.push(parse_param(name, v).map_err(|reason| SennError::Checkpoint { line: i + 1, reason })?);
            } else {
                map.insert(k, (i + 1, v));
            }
        }
        let get = |k: &str| map.get(k).copied().ok_or_else(|| SennError::Checkpoint { line: 0, reason: format!("missing key {k}") });
        let bad = |line: usize, what: &str| SennError::Checkpoint { line, reason: format!("invalid {what}") };
        fn num<T: std::str::FromStr>(v: &str, line: usize, what: &str) -> Result<T, SennError> {
            v.trim().parse().map_err(|_| SennError::Checkpoint { line, reason: format!("invalid {what}: {v:?}") })
        }
        fn floats(v: &str, line: usize, what: &str) -> Result<Vec<f64>, SennError> {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| num(x, line, what)).collect()
        }

        let (l, v) = get("format")?;
        if v != FORMAT_VERSION {
            return Err(SennError::Checkpoint { line: l, reason: format!("unsupported format {v}") });
        }
        let (l, v) = get("config.family")?;
        let family: Family = v.parse().map_err(|_| bad(l, "family"))?;
        let (l, v) = get("config.linear_input")?;
        let linear_input: FeatureMode = v.parse().map_err(|_| bad(l, "linear input"))?;
        let (l, v) = get("config.beta_prior")?;
        let beta_prior: BetaPrior = v.parse().map_err(|_| bad(l, "prior"))?;
        let (l, v) = get("config.hidden")?;
        let hidden: Vec<usize> = v.split(',').map(|x| num(x, l, "hidden sizes")).collect::<Result<_, _>>()?;
        let (l, v) = get("config.estimator")?;
        let estimator = v.parse().map_err(|_| bad(l, "estimator"))?;
        let field = |k: &str| -> Result<(usize, &str), SennError> { get(k) };
        let config = SennConfig {
            family,
            linear_input,
            beta_prior,
            hidden: hidden.clone(),
            window: { let (l, v) = field("config.window")?; num(v, l, "window")? },
            lags: { let (l, v) = field("config.lags")?; num(v, l, "lags")? },
            steps: { let (l, v) = field("config.steps")?; num(v, l, "steps")? },
            batch: { let (l, v) = field("config.batch")?; num(v, l, "batch")? },
            seed: { let (l, v) = field("config.seed")?; num(v, l, "seed")? },
            n_mc: { let (l, v) = field("config.n_mc")?; num(v, l, "n_mc")? },
            estimator,
            learning_rate: { let (l, v) = field("config.learning_rate")?; num(v, l, "learning rate")? },
            init_scale: { let (l, v) = field("config.init_scale")?; num(v, l, "init scale")? },
        };
        config.validate()?;
        let empirical = {
            let (la, a) = get("empirical.a")?;
            let (lb, b) = get("empirical.b")?;
            (num(a, la, "empirical a")?, num(b, lb, "empirical b")?)
        };
        let sensor = |k: &str| -> Result<[f64; N_SENSORS], SennError> {
            let (l, v) = get(k)?;
            floats(v, l, k)?.try_into().map_err(|_| bad(l, k))
        };
        let sensor_scaler = Scaler { mean: sensor("sensor_scaler.mean")?, std: sensor("sensor_scaler.std")? };
        let (l, v) = get("columns.names")?;
        let names: Vec<String> = if v.is_empty() { Vec::new() } else { v.split(',').map(str::to_string).collect() };
        let (lm, vm) = get("columns.mean")?;
        let (ls, vs) = get("columns.std")?;
        let column_scaler = ColumnScaler { names, mean: floats(vm, lm, "column means")?, std: floats(vs, ls, "column sds")? };
        if column_scaler.mean.len() != column_scaler.names.len() || column_scaler.std.len() != column_scaler.names.len() {
            return Err(bad(l, "column scaler lengths"));
        }
        let shape = LstmShape::new(N_SENSORS + 1, hidden)?;
        let (l, v) = get("params")?;
        let n_params: usize = num(v, l, "parameter count")?;
        let expected = 3 + column_scaler.names.len() + shape.n_params();
        if n_params != params.len() || n_params != expected {
            return Err(SennError::Checkpoint {
                line: l,
                reason: format!("expected {expected} parameters, header says {n_params}, found {}", params.len()),
            });
        }
        Ok(SennModel { config, empirical, sensor_scaler, column_scaler, shape, guide: Guide::new(params) })
    }
}

fn parse_param(name: &str, v: &str) -> Result<VariationalParameter, String> {
    let f: Vec<&str> = v.split_whitespace().collect();
    if f.len() != 6 {
        return Err(format!("parameter {name}: expected 6 fields, found {}", f.len()));
    }
    let n = |s: &str| s.parse::<f64>().map_err(|_| format!("parameter {name}: {s:?} is not a number"));
    let prior = match f[2] {
        "gaussian" => Prior::Gaussian { mean: n(f[3])?, sd: n(f[4])? },
        "laplace" => Prior::Laplace { loc: n(f[3])?, scale: n(f[4])? },
        other => return Err(format!("parameter {name}: unknown prior {other:?}")),
    };
    Ok(VariationalParameter {
        name: name.to_string(),
        mu: n(f[0])?,
        rho: n(f[1])?,
        prior,
        trainable: f[5] == "1",
    })
}
