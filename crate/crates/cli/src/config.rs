//! Run configuration: TOML file with sections, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use rulcast::diffprob::Estimator;
use rulcast::features::FeatureMode;
use rulcast::lifetimes::Family;
use rulcast::senn::{BetaPrior, SennConfig, DESK_TRAIN_ENGINES};

#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSettings {
    pub clamp_zero: bool,
    pub folds: usize,
    pub mc_samples: usize,
    pub lags: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SennSettings {
    pub desk_scale: bool,
    pub two_stage: bool,
    /// Training engines kept (first n by id); all when `None`.
    pub train_engines: Option<usize>,
    pub config: SennConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataPaths,
    pub out: PathBuf,
    pub baselines: BaselineSettings,
    pub senn: SennSettings,
}

/// Flag values that, when present, replace the corresponding config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub clamp_zero: bool,
    pub folds: Option<usize>,
    pub mc_samples: Option<usize>,
    pub desk_scale: bool,
    pub two_stage: bool,
    pub family: Option<String>,
    pub linear_input: Option<String>,
    pub prior: Option<String>,
    pub grad: Option<String>,
    pub hidden: Option<String>,
    pub steps: Option<usize>,
    pub batch: Option<usize>,
    pub window: Option<usize>,
    pub lags: Option<usize>,
    pub n_mc: Option<usize>,
    pub train_engines: Option<usize>,
}

fn section<'a>(table: &'a Table, name: &str) -> Result<Option<&'a Table>> {
    match table.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => bail!("config key `{name}` must be a section"),
    }
}

fn get_str(t: Option<&Table>, key: &str) -> Result<Option<String>> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(v) => bail!("config key `{key}` must be a string, got {v}"),
    }
}

fn get_uint(t: Option<&Table>, key: &str) -> Result<Option<u64>> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
        Some(v) => bail!("config key `{key}` must be a non-negative integer, got {v}"),
    }
}

fn get_float(t: Option<&Table>, key: &str) -> Result<Option<f64>> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(Value::Float(f)) => Ok(Some(*f)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(v) => bail!("config key `{key}` must be a number, got {v}"),
    }
}

fn get_bool(t: Option<&Table>, key: &str) -> Result<Option<bool>> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(Value::Boolean(b)) => Ok(Some(*b)),
        Some(v) => bail!("config key `{key}` must be true or false, got {v}"),
    }
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse::<usize>().with_context(|| format!("bad hidden size {x:?}"))).collect()
}

const KNOWN: &[(&str, &[&str])] = &[
    ("data", &["train", "test", "truth"]),
    ("output", &["dir"]),
    ("baselines", &["clamp_zero", "folds", "mc_samples", "lags"]),
    (
        "senn",
        &[
            "desk_scale", "two_stage", "train_engines", "family", "linear_input", "prior", "grad", "hidden", "window", "lags",
            "steps", "batch", "n_mc", "learning_rate", "init_scale",
        ],
    ),
];

fn check_keys(table: &Table) -> Result<()> {
    for (k, v) in table {
        if k == "seed" {
            continue;
        }
        let Some((_, keys)) = KNOWN.iter().find(|(s, _)| s == k) else { bail!("unknown config section `{k}`") };
        if let Value::Table(t) = v {
            for key in t.keys() {
                if !keys.contains(&key.as_str()) {
                    bail!("unknown config key `{k}.{key}`");
                }
            }
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let table: Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse().with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Table::new(),
        };
        check_keys(&table)?;
        let data = section(&table, "data")?;
        let output = section(&table, "output")?;
        let base = section(&table, "baselines")?;
        let senn = section(&table, "senn")?;

        let seed = match (o.seed, get_uint(Some(&table), "seed")?) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => bail!("a seed is required: pass --seed or set `seed` in the config"),
        };
        let path_of = |flag: &Option<PathBuf>, key| -> Result<Option<PathBuf>> {
            Ok(flag.clone().or(get_str(data, key)?.map(PathBuf::from)))
        };
        let data = DataPaths { train: path_of(&o.train, "train")?, test: path_of(&o.test, "test")?, truth: path_of(&o.truth, "truth")? };
        let out = o.out.clone().or(get_str(output, "dir")?.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));

        let baselines = BaselineSettings {
            clamp_zero: o.clamp_zero || get_bool(base, "clamp_zero")?.unwrap_or(false),
            folds: o.folds.or(get_uint(base, "folds")?.map(|v| v as usize)).unwrap_or(10),
            mc_samples: o.mc_samples.or(get_uint(base, "mc_samples")?.map(|v| v as usize)).unwrap_or(rulcast::lifetimes::DEFAULT_MC_SAMPLES),
            lags: get_uint(base, "lags")?.map_or(rulcast::features::DEFAULT_LAGS, |v| v as usize),
        };

        let desk_scale = o.desk_scale || get_bool(senn, "desk_scale")?.unwrap_or(false);
        let mut c = if desk_scale { SennConfig::desk() } else { SennConfig::default() };
        if let Some(v) = o.family.clone().or(get_str(senn, "family")?) {
            c.family = v.parse::<Family>().map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        if let Some(v) = o.linear_input.clone().or(get_str(senn, "linear_input")?) {
            c.linear_input = v.parse::<FeatureMode>()?;
        }
        if let Some(v) = o.prior.clone().or(get_str(senn, "prior")?) {
            c.beta_prior = v.parse::<BetaPrior>()?;
        }
        if let Some(v) = o.grad.clone().or(get_str(senn, "grad")?) {
            c.estimator = v.parse::<Estimator>()?;
        }
        if let Some(v) = o.hidden.clone().or(get_str(senn, "hidden")?) {
            c.hidden = parse_hidden(&v)?;
        }
        let uint = |flag: Option<usize>, key| -> Result<Option<usize>> { Ok(flag.or(get_uint(senn, key)?.map(|v| v as usize))) };
        if let Some(v) = uint(o.window, "window")? {
            c.window = v;
        }
        if let Some(v) = uint(o.lags, "lags")? {
            c.lags = v;
        }
        if let Some(v) = uint(o.steps, "steps")? {
            c.steps = v;
        }
        if let Some(v) = uint(o.batch, "batch")? {
            c.batch = v;
        }
        if let Some(v) = uint(o.n_mc, "n_mc")? {
            c.n_mc = v;
        }
        if let Some(v) = get_float(senn, "learning_rate")? {
            c.learning_rate = v;
        }
        if let Some(v) = get_float(senn, "init_scale")? {
            c.init_scale = v;
        }
        c.seed = module_seed(seed, "senn");
        c.validate()?;
        let train_engines = uint(o.train_engines, "train_engines")?.or(desk_scale.then_some(DESK_TRAIN_ENGINES));
        let senn = SennSettings { desk_scale, two_stage: o.two_stage || get_bool(senn, "two_stage")?.unwrap_or(false), train_engines, config: c };
        Ok(Self { seed, data, out, baselines, senn })
    }

    /// Sorted `key = value` lines of every resolved setting.
    pub fn canonical(&self) -> String {
        let p = |x: &Option<PathBuf>| x.as_ref().map_or(String::new(), |p| p.display().to_string());
        let c = &self.senn.config;
        let mut lines = vec![
            format!("seed = {}", self.seed),
            format!("data.train = {}", p(&self.data.train)),
            format!("data.test = {}", p(&self.data.test)),
            format!("data.truth = {}", p(&self.data.truth)),
            format!("baselines.clamp_zero = {}", self.baselines.clamp_zero),
            format!("baselines.folds = {}", self.baselines.folds),
            format!("baselines.mc_samples = {}", self.baselines.mc_samples),
            format!("baselines.lags = {}", self.baselines.lags),
            format!("senn.desk_scale = {}", self.senn.desk_scale),
            format!("senn.two_stage = {}", self.senn.two_stage),
            format!("senn.train_engines = {:?}", self.senn.train_engines),
            format!("senn.family = {}", c.family.name()),
            format!("senn.linear_input = {}", c.linear_input.name()),
            format!("senn.prior = {}", c.beta_prior.name()),
            format!("senn.grad = {:?}", c.estimator),
            format!("senn.hidden = {:?}", c.hidden),
            format!("senn.window = {}", c.window),
            format!("senn.lags = {}", c.lags),
            format!("senn.steps = {}", c.steps),
            format!("senn.batch = {}", c.batch),
            format!("senn.n_mc = {}", c.n_mc),
            format!("senn.learning_rate = {:?}", c.learning_rate),
            format!("senn.init_scale = {:?}", c.init_scale),
        ];
        lines.sort();
        lines.join("\n") + "\n"
    }

    /// Short hex digest of the canonical settings plus any extra inputs.
    pub fn hash(&self, extra: &[&[u8]]) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        for e in extra {
            h.update(e);
        }
        hex16(&h.finalize())
    }
}

fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable per-module seed from the master seed.
pub fn module_seed(master: u64, module: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(module.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
