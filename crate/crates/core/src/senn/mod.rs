//! Structured-effect network: RUL(t) = λ(t) + βᵀx_t + LSTM_Θ(window, t).
//!
//! λ(t) is the mean residual life of a Weibull or log-normal lifetime model,
//! β a Bayesian linear effect on standardized features and the LSTM a
//! black-box residual learner. Every latent scalar carries a mean-field
//! Gaussian guide trained on the ELBO.

pub mod checkpoint;
pub mod lstm;

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{DatasetError, LabeledDataset, Scaler, Trajectory, N_SENSORS};
use crate::diffprob::{
    fit_guide, mix_seed, DiffProbError, Estimator, FitOptions, Guide, Model, Prior, Tape, TraceRow, Var,
    VariationalParameter,
};
use crate::features::{build_feature_matrix, ColumnScaler, FeatureError, FeatureMatrix, FeatureMode, FeatureOptions};
use crate::lifetimes::{fit, residual_life_with_grad, Family, LifetimeError, LifetimeModel, LifetimeSample};

pub use lstm::{lstm_forward, lstm_forward_grad, lstm_forward_tape, lstm_node, LstmShape};

#[derive(Debug, Error)]
pub enum SennError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Lifetime(#[from] LifetimeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    DiffProb(#[from] DiffProbError),
    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String, last_finite: Box<SennModel> },
    #[error("malformed checkpoint at line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
}

/// Cycle count that maps the time channel of the recurrent input to ~[0, 1].
pub const TIME_SCALE: f64 = 300.0;
pub const DESK_TRAIN_ENGINES: usize = 20;
/// Smallest shape/σ used inside λ(t) when a sampled value strays below it.
const MIN_DIST_SPREAD: f64 = 1e-3;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

const IDX_A: usize = 0;
const IDX_B: usize = 1;
const IDX_LOG_SIGMA: usize = 2;
const BETA_START: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaPrior {
    /// N(0, 10²)
    Gaussian,
    /// Laplace(0, 1)
    Laplace,
}

impl BetaPrior {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Laplace => "laplace",
        }
    }

    fn prior(self) -> Prior {
        match self {
            Self::Gaussian => Prior::Gaussian { mean: 0.0, sd: 10.0 },
            Self::Laplace => Prior::Laplace { loc: 0.0, scale: 1.0 },
        }
    }
}

impl std::str::FromStr for BetaPrior {
    type Err = SennError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            other => Err(SennError::Config(format!("unknown prior {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SennConfig {
    pub family: Family,
    pub linear_input: FeatureMode,
    pub beta_prior: BetaPrior,
    pub hidden: Vec<usize>,
    pub window: usize,
    pub lags: usize,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub n_mc: usize,
    pub estimator: Estimator,
    pub learning_rate: f64,
    /// Initial guide standard deviation of every parameter.
    pub init_scale: f64,
}

impl Default for SennConfig {
    fn default() -> Self {
        Self {
            family: Family::LogNormal,
            linear_input: FeatureMode::Engineered,
            beta_prior: BetaPrior::Gaussian,
            hidden: vec![100, 50],
            window: 50,
            lags: crate::features::DEFAULT_LAGS,
            steps: 20_000,
            batch: 64,
            seed: 0,
            n_mc: 1,
            estimator: Estimator::Reparam,
            learning_rate: crate::diffprob::adam::DEFAULT_LEARNING_RATE,
            init_scale: 0.05,
        }
    }
}

impl SennConfig {
    /// Small network and short schedule for single-machine runs.
    pub fn desk() -> Self {
        Self { hidden: vec![32, 16], steps: 2000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SennError> {
        if self.window == 0 {
            return Err(SennError::Config("window must be at least 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(SennError::Config(format!("hidden sizes must be positive, got {:?}", self.hidden)));
        }
        if self.batch == 0 || self.n_mc == 0 {
            return Err(SennError::Config("batch and n_mc must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.init_scale > 0.0) {
            return Err(SennError::Config("learning rate and init scale must be positive".into()));
        }
        Ok(())
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions { lags: self.lags, ..FeatureOptions::new(self.linear_input) }
    }
}

/// Run-to-failure trajectories with a target per cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub trajectories: Vec<Trajectory>,
    pub targets: Vec<Vec<f64>>,
    pub lifetimes: Vec<f64>,
}

impl TrainingSet {
    pub fn from_dataset(data: &LabeledDataset) -> Result<Self, SennError> {
        let mut targets = Vec::with_capacity(data.trajectories.len());
        let mut lifetimes = Vec::with_capacity(data.trajectories.len());
        for t in &data.trajectories {
            targets.push(data.trajectory_labels(t)?);
            lifetimes.push((t.last_cycle() + data.end_rul(t.engine_id)?) as f64);
        }
        Ok(Self { trajectories: data.trajectories.clone(), targets, lifetimes })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub lambda: f64,
    pub linear: f64,
    pub recurrent: f64,
    pub total: f64,
}

impl Decomposition {
    pub fn new(lambda: f64, linear: f64, recurrent: f64) -> Self {
        Self { lambda, linear, recurrent, total: lambda + linear + recurrent }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorMode {
    Mean,
    Sample(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SennModel {
    pub config: SennConfig,
    /// Lifetime parameters fitted by maximum likelihood on training lifetimes.
    pub empirical: (f64, f64),
    pub sensor_scaler: Scaler,
    pub column_scaler: ColumnScaler,
    pub shape: LstmShape,
    pub guide: Guide,
}

/// Sensor readings plus the scaled cycle, for the steps ending at `pos`.
pub fn recurrent_window(scaled: &Trajectory, pos: usize, width: usize) -> Vec<Vec<f64>> {
    let start = (pos + 1).saturating_sub(width);
    (start..=pos)
        .map(|s| {
            let mut x = scaled.sensors[s].to_vec();
            x.push(scaled.cycles[s] as f64 / TIME_SCALE);
            x
        })
        .collect()
}

fn lambda_checked(family: Family, a: f64, b: f64, t: f64) -> Result<f64, SennError> {
    let model = LifetimeModel::new(family, a, b)?;
    let survival = model.survival(t);
    if survival <= 1e-12 {
        return Err(LifetimeError::TailUnderflow { t, survival }.into());
    }
    Ok(residual_life_with_grad(family, a, b, t).value)
}

impl SennModel {
    pub fn n_beta(&self) -> usize {
        self.column_scaler.names.len()
    }

    pub fn beta_range(&self) -> std::ops::Range<usize> {
        BETA_START..BETA_START + self.n_beta()
    }

    pub fn theta_range(&self) -> std::ops::Range<usize> {
        let start = BETA_START + self.n_beta();
        start..start + self.shape.n_params()
    }

    pub fn lifetime_model(&self) -> Result<LifetimeModel, SennError> {
        let p = &self.guide.params;
        Ok(LifetimeModel::new(self.config.family, p[IDX_A].mu, p[IDX_B].mu)?)
    }

    fn param_values(&self, mode: PosteriorMode) -> Vec<f64> {
        match mode {
            PosteriorMode::Mean => self.guide.means(),
            PosteriorMode::Sample(seed) => self.guide.sample(&mut ChaCha8Rng::seed_from_u64(seed)).0,
        }
    }

    /// Standardized linear-component inputs for every cycle of a raw trajectory.
    pub fn linear_inputs(&self, scaled: &Trajectory) -> Result<FeatureMatrix, SennError> {
        let ds = LabeledDataset::train(vec![scaled.clone()]);
        let raw = build_feature_matrix(&ds, &self.config.feature_options())?;
        Ok(self.column_scaler.transform(&raw)?)
    }

    /// Decomposed forecasts at every cycle of an unscaled trajectory.
    pub fn predict_trajectory(
        &self,
        traj: &Trajectory,
        mode: PosteriorMode,
    ) -> Result<Vec<(u32, Decomposition)>, SennError> {
        let scaled = self.sensor_scaler.apply(traj);
        let x = self.linear_inputs(&scaled)?;
        let values = self.param_values(mode);
        (0..traj.len()).map(|pos| Ok((traj.cycles[pos], self.decompose(&values, &scaled, x.row(pos), pos)?))).collect()
    }

    /// Forecast at the last observed cycle.
    pub fn predict_last(&self, traj: &Trajectory, mode: PosteriorMode) -> Result<Decomposition, SennError> {
        if traj.is_empty() {
            return Err(SennError::Argument(format!("engine {} has no cycles", traj.engine_id)));
        }
        let scaled = self.sensor_scaler.apply(traj);
        let x = self.linear_inputs(&scaled)?;
        let pos = traj.len() - 1;
        self.decompose(&self.param_values(mode), &scaled, x.row(pos), pos)
    }

    fn decompose(&self, values: &[f64], scaled: &Trajectory, x: &[f64], pos: usize) -> Result<Decomposition, SennError> {
        let t = scaled.cycles[pos] as f64;
        let lambda = lambda_checked(self.config.family, values[IDX_A], values[IDX_B], t)?;
        let linear: f64 = values[self.beta_range()].iter().zip(x).map(|(b, x)| b * x).sum();
        let window = recurrent_window(scaled, pos, self.config.window);
        let recurrent = lstm_forward(&self.shape, &values[self.theta_range()], &window)?;
        Ok(Decomposition::new(lambda, linear, recurrent))
    }

    /// Sets every β and Θ mean to zero, leaving the lifetime component.
    pub fn zero_structured_effects(&mut self) {
        for i in self.beta_range().chain(self.theta_range()) {
            self.guide.params[i].mu = 0.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

/// Mean and SD of the lifetime parameters, the noise scale and every β.
pub fn posterior_summary(model: &SennModel) -> Vec<PosteriorRow> {
    let end = model.beta_range().end;
    model.guide.params[..end]
        .iter()
        .map(|p| PosteriorRow { name: p.name.clone(), mean: p.mu, sd: p.scale() })
        .collect()
}

pub fn posterior_csv(rows: &[PosteriorRow]) -> String {
    let mut out = String::from("parameter,mean,sd\n");
    for r in rows {
        let _ = writeln!(out, "{},{:?},{:?}", r.name, r.mean, r.sd);
    }
    out
}

/// Everything the likelihood needs, derived once from the training set.
#[derive(Debug, Clone)]
pub struct PreparedData {
    scaled: Vec<Trajectory>,
    features: FeatureMatrix,
    rows: Vec<(usize, usize)>,
    targets: Vec<f64>,
}

impl PreparedData {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

/// Builds the untrained model and its training data. Scalers and the
/// lifetime MLE see only `train`.
pub fn init_model(train: &TrainingSet, config: &SennConfig) -> Result<(SennModel, PreparedData), SennError> {
    config.validate()?;
    if train.trajectories.is_empty() {
        return Err(SennError::Argument("empty training set".into()));
    }
    let as_dataset = LabeledDataset::train(train.trajectories.clone());
    let sensor_scaler = Scaler::fit(&as_dataset)?;
    let scaled_ds = sensor_scaler.apply_dataset(&as_dataset);
    let raw = build_feature_matrix(&scaled_ds, &config.feature_options())?;
    let column_scaler = ColumnScaler::fit(&raw);
    let features = column_scaler.transform(&raw)?;

    let mut rows = Vec::with_capacity(train.n_rows());
    let mut targets = Vec::with_capacity(train.n_rows());
    for (e, (traj, ys)) in train.trajectories.iter().zip(&train.targets).enumerate() {
        if ys.len() != traj.len() {
            return Err(SennError::Argument(format!("engine {}: {} targets for {} cycles", traj.engine_id, ys.len(), traj.len())));
        }
        for (pos, &y) in ys.iter().enumerate() {
            rows.push((e, pos));
            targets.push(y);
        }
    }

    let lifetime = fit(config.family, &LifetimeSample::new(train.lifetimes.clone())?)?;
    let (a_emp, b_emp) = lifetime.params();
    // residual spread of the lifetime-only model seeds the noise scale
    let mut lam_cache: HashMap<u32, f64> = HashMap::new();
    let mut sse = 0.0;
    for (&(e, pos), &y) in rows.iter().zip(&targets) {
        let c = train.trajectories[e].cycles[pos];
        let lam = *lam_cache.entry(c).or_insert_with(|| residual_life_with_grad(config.family, a_emp, b_emp, c as f64).value);
        sse += (y - lam).powi(2);
    }
    let log_sigma0 = (sse / rows.len() as f64).sqrt().max(1e-3).ln();

    let n_inputs = N_SENSORS + 1;
    let shape = LstmShape::new(n_inputs, config.hidden.clone())?;
    let s = config.init_scale;
    let mut params = vec![
        VariationalParameter::new("a", a_emp, s, Prior::Gaussian { mean: a_emp, sd: 1.0 }),
        VariationalParameter::new("b", b_emp, s, Prior::Gaussian { mean: b_emp, sd: 1.0 }),
        VariationalParameter::new("log_sigma", log_sigma0, s, Prior::Gaussian { mean: log_sigma0, sd: 1.0 }),
    ];
    for name in &column_scaler.names {
        params.push(VariationalParameter::new(format!("beta.{name}"), 0.0, s, config.beta_prior.prior()));
    }
    let theta0 = shape.init(&mut ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x1A57)));
    for (name, v) in shape.param_names().into_iter().zip(theta0) {
        params.push(VariationalParameter::new(name, v, s, Prior::Gaussian { mean: 0.0, sd: 1.0 }));
    }

    let model = SennModel {
        config: config.clone(),
        empirical: (a_emp, b_emp),
        sensor_scaler,
        column_scaler,
        shape,
        guide: Guide::new(params),
    };
    let prepared = PreparedData { scaled: scaled_ds.trajectories, features, rows, targets };
    Ok((model, prepared))
}

/// Likelihood of a minibatch under the structured model, restricted to a
/// subset of active parameters; the rest stay at fixed values.
struct Trainer<'a> {
    model: &'a SennModel,
    data: &'a PreparedData,
    /// Full-vector index → position in the active vector.
    active_pos: Vec<Option<usize>>,
    fixed: Vec<f64>,
    use_recurrent: bool,
    batch: Vec<usize>,
    batch_size: usize,
}

impl<'a> Trainer<'a> {
    fn new(model: &'a SennModel, data: &'a PreparedData, active: &[usize], use_recurrent: bool) -> Self {
        let mut active_pos = vec![None; model.guide.len()];
        for (k, &j) in active.iter().enumerate() {
            active_pos[j] = Some(k);
        }
        Self {
            model,
            data,
            active_pos,
            fixed: model.guide.means(),
            use_recurrent,
            batch: Vec::new(),
            batch_size: model.config.batch.min(data.n_rows()),
        }
    }

    fn get<'t>(&self, tape: &'t Tape, theta: &[Var<'t>], j: usize) -> Var<'t> {
        match self.active_pos[j] {
            Some(k) => theta[k],
            None => tape.constant(self.fixed[j]),
        }
    }
}

impl Model for Trainer<'_> {
    fn begin_step(&mut self, rng: &mut ChaCha8Rng) {
        self.batch = sample_indices(rng, self.data.n_rows(), self.batch_size).into_vec();
        self.batch.sort_unstable();
    }

    fn log_likelihood<'t>(&self, tape: &'t Tape, theta: &[Var<'t>]) -> Var<'t> {
        let m = self.model;
        let family = m.config.family;
        let a = self.get(tape, theta, IDX_A);
        let b_raw = self.get(tape, theta, IDX_B);
        let b = if b_raw.value() < MIN_DIST_SPREAD { tape.constant(MIN_DIST_SPREAD) } else { b_raw };
        let log_sigma = self.get(tape, theta, IDX_LOG_SIGMA);
        let inv_var = (log_sigma * -2.0).exp();

        let beta: Vec<Option<Var<'t>>> = m.beta_range().map(|j| self.active_pos[j].map(|k| theta[k])).collect();
        let beta_fixed: Vec<f64> = m.beta_range().map(|j| self.fixed[j]).collect();
        let theta_vars: Option<Vec<Var<'t>>> = if self.use_recurrent {
            Some(m.theta_range().map(|j| self.get(tape, theta, j)).collect())
        } else {
            None
        };

        let mut lambdas: HashMap<u32, Var<'t>> = HashMap::new();
        let mut terms = Vec::with_capacity(self.batch.len());
        for &r in &self.batch {
            let (e, pos) = self.data.rows[r];
            let traj = &self.data.scaled[e];
            let cycle = traj.cycles[pos];
            let lam = *lambdas.entry(cycle).or_insert_with(|| {
                let rl = residual_life_with_grad(family, a.value(), b.value(), cycle as f64);
                tape.custom(rl.value, &[a, b], &[rl.d_a, rl.d_b])
            });
            let x = self.data.features.row(r);
            let mut lin_value = 0.0;
            let mut pairs = Vec::new();
            for (j, (bv, &xj)) in beta.iter().zip(x).enumerate() {
                match bv {
                    Some(v) => {
                        lin_value += v.value() * xj;
                        pairs.push((*v, xj));
                    }
                    None => lin_value += beta_fixed[j] * xj,
                }
            }
            let mut total = lam + tape.custom_pairs(lin_value, pairs);
            if let Some(tv) = &theta_vars {
                let window = recurrent_window(traj, pos, m.config.window);
                let rec = lstm_node(tape, &m.shape, tv, &window).expect("window and shape validated at init");
                total = total + rec;
            }
            let resid = self.data.targets[r] - total;
            terms.push(resid.square() * inv_var * -0.5 - log_sigma);
        }
        let scale = self.data.n_rows() as f64 / self.batch.len() as f64;
        let n = terms.len() as f64;
        (tape.sum(&terms) - 0.5 * LN_2PI * n) * scale
    }
}

/// Trained model with one ELBO trace per optimization stage.
#[derive(Debug, Clone)]
pub struct TrainedSenn {
    pub model: SennModel,
    pub traces: Vec<Vec<TraceRow>>,
}

fn run_stage(
    model: &mut SennModel,
    data: &PreparedData,
    active: &[usize],
    use_recurrent: bool,
    steps: usize,
    seed: u64,
) -> Result<Vec<TraceRow>, SennError> {
    let mut sub = Guide::new(active.iter().map(|&j| model.guide.params[j].clone()).collect());
    let options = FitOptions {
        steps,
        n_mc: model.config.n_mc,
        learning_rate: model.config.learning_rate,
        estimator: model.config.estimator,
        seed,
        ..FitOptions::default()
    };
    let result = {
        let mut trainer = Trainer::new(model, data, active, use_recurrent);
        fit_guide(&mut trainer, &mut sub, &options, |_, _| {})
    };
    for (k, &j) in active.iter().enumerate() {
        model.guide.params[j] = sub.params[k].clone();
    }
    match result {
        Ok(trace) => Ok(trace),
        Err(DiffProbError::AtStep { step, source }) => {
            Err(SennError::Diverged { step, reason: source.to_string(), last_finite: Box::new(model.clone()) })
        }
        Err(e) => Err(e.into()),
    }
}

/// Optimizes all components simultaneously.
pub fn train_joint(train: &TrainingSet, config: &SennConfig) -> Result<TrainedSenn, SennError> {
    let (mut model, data) = init_model(train, config)?;
    let all: Vec<usize> = (0..model.guide.len()).collect();
    let trace = run_stage(&mut model, &data, &all, true, config.steps, mix_seed(config.seed, 1))?;
    Ok(TrainedSenn { model, traces: vec![trace] })
}

/// Stage 1 fits (a, b, β, σ) without the recurrent part; stage 2 holds those
/// at their posterior means and fits (Θ, σ) to the remaining residuals.
pub fn train_two_stage(
    train: &TrainingSet,
    config: &SennConfig,
    stage1_steps: usize,
    stage2_steps: usize,
) -> Result<TrainedSenn, SennError> {
    let (mut model, data) = init_model(train, config)?;
    let stage1: Vec<usize> = (0..model.beta_range().end).collect();
    let t1 = run_stage(&mut model, &data, &stage1, false, stage1_steps, mix_seed(config.seed, 1))?;
    let stage2: Vec<usize> = std::iter::once(IDX_LOG_SIGMA).chain(model.theta_range()).collect();
    let t2 = run_stage(&mut model, &data, &stage2, true, stage2_steps, mix_seed(config.seed, 2))?;
    Ok(TrainedSenn { model, traces: vec![t1, t2] })
}

/// Two-stage training at the same total step budget as joint training.
pub fn train_two_stage_matched(train: &TrainingSet, config: &SennConfig) -> Result<TrainedSenn, SennError> {
    let first = config.steps / 2;
    train_two_stage(train, config, first, config.steps - first)
}

/// Windowed median ELBO never falls more than `tolerance` (relative) below
/// its running maximum.
pub fn elbo_trend_ok(trace: &[TraceRow], width: usize, tolerance: f64) -> bool {
    if trace.len() < width || width == 0 {
        return true;
    }
    let mut best = f64::NEG_INFINITY;
    for end in width..=trace.len() {
        let mut w: Vec<f64> = trace[end - width..end].iter().map(|r| r.elbo).collect();
        w.sort_by(f64::total_cmp);
        let median = w[width / 2];
        best = best.max(median);
        if median < best - tolerance * best.abs() {
            return false;
        }
    }
    true
}

/// Mean-mode residual MSE of the model on its own training rows.
pub fn training_mse(model: &SennModel, train: &TrainingSet) -> Result<f64, SennError> {
    let mut sse = 0.0;
    let mut n = 0usize;
    for (traj, ys) in train.trajectories.iter().zip(&train.targets) {
        for ((_, d), y) in model.predict_trajectory(traj, PosteriorMode::Mean)?.iter().zip(ys) {
            sse += (y - d.total).powi(2);
            n += 1;
        }
    }
    Ok(sse / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub engine_id: u32,
    pub cycle: u32,
    pub parts: Decomposition,
    pub true_rul: f64,
}

pub fn decompose_engine(
    model: &SennModel,
    data: &LabeledDataset,
    engine_id: u32,
    mode: PosteriorMode,
) -> Result<Vec<DecompositionRow>, SennError> {
    let traj = data
        .trajectories
        .iter()
        .find(|t| t.engine_id == engine_id)
        .ok_or_else(|| SennError::Argument(format!("no engine {engine_id} in dataset")))?;
    let truth = data.trajectory_labels(traj)?;
    Ok(model
        .predict_trajectory(traj, mode)?
        .into_iter()
        .zip(truth)
        .map(|((cycle, parts), true_rul)| DecompositionRow { engine_id, cycle, parts, true_rul })
        .collect())
}

pub fn decomposition_csv(rows: &[DecompositionRow]) -> String {
    let mut out = String::from("engine,cycle,lambda,linear,recurrent,total,true_rul\n");
    for r in rows {
        let p = r.parts;
        let _ = writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?},{:?}",
            r.engine_id, r.cycle, p.lambda, p.linear, p.recurrent, p.total, r.true_rul
        );
    }
    out
}
