//! Aggregation features over sensor histories.
//!
//! Each sensor series X_1..X_t is condensed into 15 statistics. Rows of a
//! feature matrix are computed incrementally along each trajectory so that
//! building features for every (engine, cycle) stays linear in the history
//! length for the running statistics.

use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::dataset::{DatasetError, LabeledDataset, Trajectory, N_SENSORS, N_SETTINGS};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot aggregate an empty series")]
    EmptySeries,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid feature options: {0}")]
    Options(String),
}

pub const N_AGGREGATES: usize = 15;
pub const DEFAULT_LAGS: usize = 50;
const ENTROPY_BINS: usize = 10;
const PSD_REFERENCE: f64 = 1e-5;
/// Refinement rounds for the AR fit in batch aggregation.
const BATCH_REFINEMENTS: usize = 2;
/// Relative spread under which a series counts as constant.
const DEGENERATE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Max,
    Min,
    Mean,
    Range,
    Sum,
    Energy,
    Std,
    Skewness,
    Kurtosis,
    PeakToPeak,
    Rms,
    Entropy,
    PsdMean,
    LineIntegral,
    ArResidual,
}

impl Aggregate {
    pub const ALL: [Aggregate; N_AGGREGATES] = [
        Aggregate::Max,
        Aggregate::Min,
        Aggregate::Mean,
        Aggregate::Range,
        Aggregate::Sum,
        Aggregate::Energy,
        Aggregate::Std,
        Aggregate::Skewness,
        Aggregate::Kurtosis,
        Aggregate::PeakToPeak,
        Aggregate::Rms,
        Aggregate::Entropy,
        Aggregate::PsdMean,
        Aggregate::LineIntegral,
        Aggregate::ArResidual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Max => "max",
            Aggregate::Min => "min",
            Aggregate::Mean => "mean",
            Aggregate::Range => "range",
            Aggregate::Sum => "sum",
            Aggregate::Energy => "energy",
            Aggregate::Std => "std",
            Aggregate::Skewness => "skewness",
            Aggregate::Kurtosis => "kurtosis",
            Aggregate::PeakToPeak => "peak_to_peak",
            Aggregate::Rms => "rms",
            Aggregate::Entropy => "entropy",
            Aggregate::PsdMean => "psd_mean",
            Aggregate::LineIntegral => "line_integral",
            Aggregate::ArResidual => "ar_residual",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

pub type Aggregates = [f64; N_AGGREGATES];

/// Shannon entropy of a 10-bin histogram spanning the series' own range.
fn histogram_entropy(series: &[f64], min: f64, max: f64) -> f64 {
    let range = max - min;
    if !(range > DEGENERATE_REL * max.abs().max(min.abs()).max(1.0)) {
        return 0.0;
    }
    let mut counts = [0usize; ENTROPY_BINS];
    for &x in series {
        let bin = (((x - min) / range) * ENTROPY_BINS as f64).floor() as usize;
        counts[bin.min(ENTROPY_BINS - 1)] += 1;
    }
    let n = series.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn psd_mean(series: &[f64], fft: &dyn Fft<f64>) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft.process(&mut buf);
    let mean_mag = buf.iter().map(|c| c.norm()).sum::<f64>() / series.len() as f64;
    if mean_mag > 0.0 {
        20.0 * (mean_mag / PSD_REFERENCE).log10()
    } else {
        0.0
    }
}

/// Incrementally accumulated least-squares system for an AR(p) model with
/// intercept: x_i ~ b + Σ_k a_k x_{i-k}.
#[derive(Debug, Clone)]
struct ArAccumulator {
    lags: usize,
    /// Upper triangle of Σ f fᵀ, (p+1)×(p+1) row-major.
    gram: Vec<f64>,
    rhs: Vec<f64>,
    equations: usize,
}

impl ArAccumulator {
    fn new(lags: usize) -> Self {
        let d = lags + 1;
        Self { lags, gram: vec![0.0; d * d], rhs: vec![0.0; d], equations: 0 }
    }

    fn regressors(&self, history: &[f64], i: usize, out: &mut [f64]) {
        out[0] = 1.0;
        for k in 1..=self.lags {
            out[k] = history[i - k];
        }
    }

    /// Adds the equation whose target is `history[i]`, if enough lags exist.
    fn add_equation(&mut self, history: &[f64], i: usize, scratch: &mut [f64]) {
        if i < self.lags {
            return;
        }
        let d = self.lags + 1;
        self.regressors(history, i, scratch);
        let y = history[i];
        for r in 0..d {
            let fr = scratch[r];
            self.rhs[r] += fr * y;
            let row = &mut self.gram[r * d..(r + 1) * d];
            for c in r..d {
                row[c] += fr * scratch[c];
            }
        }
        self.equations += 1;
    }

    /// One-step residual at the last point of `history`; 0 while the system
    /// is underdetermined (fewer than 2p+1 points) or the series is constant.
    /// `refinements` rounds of iterative refinement against the original
    /// equations recover the accuracy lost by forming the Gram matrix.
    fn final_residual(&self, history: &[f64], constant: bool, refinements: usize, scratch: &mut [f64]) -> f64 {
        let d = self.lags + 1;
        if constant || self.equations < d {
            return 0.0;
        }
        let mut coef = match solve_spd(&self.gram, &self.rhs, d) {
            Some(c) => c,
            None => return 0.0,
        };
        for _ in 0..refinements {
            let mut g = vec![0.0; d];
            for i in self.lags..history.len() {
                self.regressors(history, i, scratch);
                let r = history[i] - coef.iter().zip(scratch.iter()).map(|(a, f)| a * f).sum::<f64>();
                for (gk, f) in g.iter_mut().zip(scratch.iter()) {
                    *gk += f * r;
                }
            }
            match solve_spd(&self.gram, &g, d) {
                Some(delta) => coef.iter_mut().zip(delta).for_each(|(c, dc)| *c += dc),
                None => break,
            }
        }
        self.regressors(history, history.len() - 1, scratch);
        let fitted: f64 = coef.iter().zip(scratch.iter()).map(|(a, f)| a * f).sum();
        history[history.len() - 1] - fitted
    }
}

/// Solves the symmetric positive (semi)definite system given by its upper
/// triangle. A small diagonal jitter is added when the plain factorization
/// breaks down.
fn solve_spd(upper: &[f64], rhs: &[f64], d: usize) -> Option<Vec<f64>> {
    let trace: f64 = (0..d).map(|i| upper[i * d + i]).sum();
    for jitter in [0.0, 1e-12, 1e-9] {
        if let Some(x) = cholesky_solve(upper, rhs, d, jitter * trace / d as f64) {
            return Some(x);
        }
    }
    None
}

fn cholesky_solve(upper: &[f64], rhs: &[f64], d: usize, jitter: f64) -> Option<Vec<f64>> {
    // Factor A = Lᵀ L with L stored upper-triangular (row r holds column r of Lᵀ).
    let mut l = vec![0.0; d * d];
    let scale = (0..d).map(|i| upper[i * d + i]).fold(0.0f64, f64::max);
    for i in 0..d {
        for j in i..d {
            let mut s = upper[i * d + j] + if i == j { jitter } else { 0.0 };
            for k in 0..i {
                s -= l[k * d + i] * l[k * d + j];
            }
            if i == j {
                if s <= 1e-13 * scale {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[i * d + i];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..d {
        let mut s = y[i];
        for k in 0..i {
            s -= l[k * d + i] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    Some(y)
}

/// Running aggregation over one growing series.
#[derive(Debug, Clone)]
pub struct SeriesAggregator {
    history: Vec<f64>,
    max: f64,
    min: f64,
    sum: f64,
    energy: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    line_integral: f64,
    local_max: (f64, usize),
    local_min: (f64, usize),
    ar: ArAccumulator,
    scratch: Vec<f64>,
}

impl SeriesAggregator {
    pub fn new(lags: usize) -> Self {
        Self {
            history: Vec::new(),
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            sum: 0.0,
            energy: 0.0,
            mean: 0.0,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
            line_integral: 0.0,
            local_max: (0.0, 0),
            local_min: (0.0, 0),
            ar: ArAccumulator::new(lags),
            scratch: vec![0.0; lags + 1],
        }
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn push(&mut self, x: f64) {
        let n0 = self.history.len() as f64;
        let n = n0 + 1.0;
        // Higher-order running central moments (Pébay's update).
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n0;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;

        self.max = self.max.max(x);
        self.min = self.min.min(x);
        self.sum += x;
        self.energy += x * x;
        if let Some(&prev) = self.history.last() {
            self.line_integral += (x - prev).abs();
        }
        let len = self.history.len();
        if len >= 2 {
            let (a, b) = (self.history[len - 2], self.history[len - 1]);
            if b > a && b > x {
                self.local_max.0 += b;
                self.local_max.1 += 1;
            } else if b < a && b < x {
                self.local_min.0 += b;
                self.local_min.1 += 1;
            }
        }
        self.history.push(x);
        let i = self.history.len() - 1;
        self.ar.add_equation(&self.history, i, &mut self.scratch);
    }

    /// All 15 aggregates of the history pushed so far.
    pub fn current(&mut self, fft: &dyn Fft<f64>) -> Aggregates {
        let n = self.history.len() as f64;
        let std = (self.m2 / n).max(0.0).sqrt();
        let constant = is_degenerate(std, self.mean);
        let (skew, kurt) = if constant {
            (0.0, 0.0)
        } else {
            ((self.m3 / n) / std.powi(3), (self.m4 / n) / std.powi(4))
        };
        let peak_to_peak = mean_or(self.local_max, self.max) + mean_or(self.local_min, self.min);
        let mut out = [0.0; N_AGGREGATES];
        out[Aggregate::Max.index()] = self.max;
        out[Aggregate::Min.index()] = self.min;
        out[Aggregate::Mean.index()] = self.mean;
        out[Aggregate::Range.index()] = self.max - self.min;
        out[Aggregate::Sum.index()] = self.sum;
        out[Aggregate::Energy.index()] = self.energy;
        out[Aggregate::Std.index()] = std;
        out[Aggregate::Skewness.index()] = skew;
        out[Aggregate::Kurtosis.index()] = kurt;
        out[Aggregate::PeakToPeak.index()] = peak_to_peak;
        out[Aggregate::Rms.index()] = (self.energy / n).sqrt();
        out[Aggregate::Entropy.index()] = histogram_entropy(&self.history, self.min, self.max);
        out[Aggregate::PsdMean.index()] = psd_mean(&self.history, fft);
        out[Aggregate::LineIntegral.index()] = self.line_integral;
        out[Aggregate::ArResidual.index()] =
            self.ar.final_residual(&self.history, self.max == self.min, 0, &mut self.scratch);
        out
    }
}

fn is_degenerate(std: f64, mean: f64) -> bool {
    std <= DEGENERATE_REL * mean.abs().max(1.0)
}

fn mean_or((sum, count): (f64, usize), fallback: f64) -> f64 {
    if count == 0 {
        fallback
    } else {
        sum / count as f64
    }
}

/// Caches FFT plans across series of varying length.
pub struct FftCache {
    planner: FftPlanner<f64>,
}

impl Default for FftCache {
    fn default() -> Self {
        Self { planner: FftPlanner::new() }
    }
}

impl FftCache {
    pub fn plan(&mut self, len: usize) -> Arc<dyn Fft<f64>> {
        self.planner.plan_fft_forward(len.max(1))
    }
}

/// Batch computation of the 15 aggregates of `series` with `lags` AR lags.
pub fn aggregate_series(series: &[f64], lags: usize) -> Result<Aggregates, FeatureError> {
    aggregate_series_with(series, lags, &mut FftCache::default())
}

pub fn aggregate_series_with(
    series: &[f64],
    lags: usize,
    ffts: &mut FftCache,
) -> Result<Aggregates, FeatureError> {
    if series.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    let t = series.len() as f64;
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum: f64 = series.iter().sum();
    let energy: f64 = series.iter().map(|x| x * x).sum();
    let mean = sum / t;
    let std = (series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t).sqrt();
    let (skew, kurt) = if is_degenerate(std, mean) {
        (0.0, 0.0)
    } else {
        (
            series.iter().map(|x| ((x - mean) / std).powi(3)).sum::<f64>() / t,
            series.iter().map(|x| ((x - mean) / std).powi(4)).sum::<f64>() / t,
        )
    };
    let (mut maxima, mut minima) = ((0.0, 0usize), (0.0, 0usize));
    for w in series.windows(3) {
        if w[1] > w[0] && w[1] > w[2] {
            maxima.0 += w[1];
            maxima.1 += 1;
        } else if w[1] < w[0] && w[1] < w[2] {
            minima.0 += w[1];
            minima.1 += 1;
        }
    }
    let line_integral: f64 = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum();

    let mut ar = ArAccumulator::new(lags);
    let mut scratch = vec![0.0; lags + 1];
    for i in 0..series.len() {
        ar.add_equation(series, i, &mut scratch);
    }
    let fft = ffts.plan(series.len());

    let mut out = [0.0; N_AGGREGATES];
    out[Aggregate::Max.index()] = max;
    out[Aggregate::Min.index()] = min;
    out[Aggregate::Mean.index()] = mean;
    out[Aggregate::Range.index()] = max - min;
    out[Aggregate::Sum.index()] = sum;
    out[Aggregate::Energy.index()] = energy;
    out[Aggregate::Std.index()] = std;
    out[Aggregate::Skewness.index()] = skew;
    out[Aggregate::Kurtosis.index()] = kurt;
    out[Aggregate::PeakToPeak.index()] = mean_or(maxima, max) + mean_or(minima, min);
    out[Aggregate::Rms.index()] = (energy / t).sqrt();
    out[Aggregate::Entropy.index()] = histogram_entropy(series, min, max);
    out[Aggregate::PsdMean.index()] = psd_mean(series, fft.as_ref());
    out[Aggregate::LineIntegral.index()] = line_integral;
    out[Aggregate::ArResidual.index()] = ar.final_residual(series, max == min, BATCH_REFINEMENTS, &mut scratch);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// Sensor readings at the current cycle.
    Current,
    /// Aggregates of each sensor's history.
    Engineered,
    /// Current readings followed by the aggregates.
    Both,
}

impl std::str::FromStr for FeatureMode {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "current" => Ok(Self::Current),
            "engineered" => Ok(Self::Engineered),
            "both" => Ok(Self::Both),
            other => Err(FeatureError::Options(format!("unknown feature mode {other:?}"))),
        }
    }
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Current => "current",
            Self::Engineered => "engineered",
            Self::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureOptions {
    pub mode: FeatureMode,
    pub lags: usize,
    /// Trailing window for the aggregates; full history when `None`.
    pub window: Option<usize>,
    /// Appends the three operational settings as extra columns.
    pub include_settings: bool,
}

impl FeatureOptions {
    pub fn new(mode: FeatureMode) -> Self {
        Self { mode, lags: DEFAULT_LAGS, window: None, include_settings: false }
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if matches!(self.mode, FeatureMode::Current | FeatureMode::Both) {
            names.extend((1..=N_SENSORS).map(|j| format!("s{j}")));
        }
        if matches!(self.mode, FeatureMode::Engineered | FeatureMode::Both) {
            for j in 1..=N_SENSORS {
                names.extend(Aggregate::ALL.iter().map(|a| format!("s{j}_{}", a.name())));
            }
        }
        if self.include_settings {
            names.extend((1..=N_SETTINGS).map(|k| format!("setting{k}")));
        }
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowKey {
    pub engine_id: u32,
    pub cycle: u32,
}

/// Dense row-major design matrix with per-row keys and RUL targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub data: Vec<f64>,
    pub keys: Vec<RowKey>,
    pub targets: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            names: self.names.clone(),
            data,
            keys: rows.iter().map(|&i| self.keys[i]).collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    /// Keeps the last observed cycle of every engine.
    pub fn last_cycles(&self) -> FeatureMatrix {
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&i| i + 1 == self.n_rows() || self.keys[i + 1].engine_id != self.keys[i].engine_id)
            .collect();
        self.select(&rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("engine_id,cycle");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",rul\n");
        for i in 0..self.n_rows() {
            let _ = write!(out, "{},{}", self.keys[i].engine_id, self.keys[i].cycle);
            for v in self.row(i) {
                let _ = write!(out, ",{v:?}");
            }
            let _ = writeln!(out, ",{}", self.targets[i]);
        }
        out
    }
}

/// Builds one row per (engine, cycle) of an already scaled dataset.
pub fn build_feature_matrix(
    dataset: &LabeledDataset,
    options: &FeatureOptions,
) -> Result<FeatureMatrix, FeatureError> {
    if options.window == Some(0) {
        return Err(FeatureError::Options("window must be at least 1".into()));
    }
    let names = options.column_names();
    let mut data = Vec::with_capacity(dataset.n_rows() * names.len());
    let mut keys = Vec::with_capacity(dataset.n_rows());
    let mut targets = Vec::with_capacity(dataset.n_rows());
    let mut ffts = FftCache::default();
    for traj in &dataset.trajectories {
        targets.extend(dataset.trajectory_labels(traj)?);
        keys.extend(traj.cycles.iter().map(|&c| RowKey { engine_id: traj.engine_id, cycle: c }));
        let engineered = match options.mode {
            FeatureMode::Current => None,
            _ => Some(trajectory_aggregates(traj, options, &mut ffts)?),
        };
        for i in 0..traj.len() {
            if matches!(options.mode, FeatureMode::Current | FeatureMode::Both) {
                data.extend_from_slice(&traj.sensors[i]);
            }
            if let Some(agg) = &engineered {
                for sensor_aggs in agg.iter() {
                    data.extend_from_slice(&sensor_aggs[i]);
                }
            }
            if options.include_settings {
                data.extend_from_slice(&traj.op_settings[i]);
            }
        }
    }
    Ok(FeatureMatrix { names, data, keys, targets })
}

/// Per sensor, the aggregates at every cycle of the trajectory.
pub fn trajectory_aggregates(
    traj: &Trajectory,
    options: &FeatureOptions,
    ffts: &mut FftCache,
) -> Result<Vec<Vec<Aggregates>>, FeatureError> {
    let mut out = Vec::with_capacity(N_SENSORS);
    for sensor in 0..N_SENSORS {
        let series = traj.sensor_series(sensor);
        let rows = match options.window {
            None => {
                let mut agg = SeriesAggregator::new(options.lags);
                let mut rows = Vec::with_capacity(series.len());
                for &x in &series {
                    agg.push(x);
                    let fft = ffts.plan(agg.len());
                    rows.push(agg.current(fft.as_ref()));
                }
                rows
            }
            Some(w) => (0..series.len())
                .map(|i| aggregate_series_with(&series[(i + 1).saturating_sub(w)..=i], options.lags, ffts))
                .collect::<Result<_, _>>()?,
        };
        out.push(rows);
    }
    Ok(out)
}

/// Column-wise z-scores fitted on training rows; constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaler {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let (n, d) = (x.n_rows(), x.n_cols());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for (j, v) in x.row(i).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let sd = (v / n.max(1) as f64).sqrt();
                if sd <= 1e-12 * (1.0 + m.abs()) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Self { names: x.names.clone(), mean, std }
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if x.names != self.names {
            return Err(FeatureError::Options("column names differ from the fitted scaler".into()));
        }
        let d = x.n_cols();
        let mut data = x.data.clone();
        for row in data.chunks_mut(d) {
            for j in 0..d {
                row[j] = if self.std[j] == 0.0 { 0.0 } else { (row[j] - self.mean[j]) / self.std[j] };
            }
        }
        Ok(FeatureMatrix { data, ..x.clone() })
    }
}
