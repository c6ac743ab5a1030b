//! End-to-end baseline runs under the last-cycle test protocol.

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{group_kfold, DatasetError, LabeledDataset, Scaler};
use crate::diffprob::mix_seed;
use crate::features::{build_feature_matrix, ColumnScaler, FeatureError, FeatureMode, FeatureOptions, DEFAULT_LAGS};
use crate::lifetimes::{
    clamp_rul, conditional_expected_rul, empirical_expected_rul, fit, Family, LifetimeError, LifetimeModel,
    LifetimeSample, DEFAULT_MC_SAMPLES,
};
use crate::linear::{cv_search, CvResult, LinearError, PenaltyKind, SolverOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Lifetime(#[from] LifetimeError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Linear(#[from] LinearError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions {
    pub clamp_zero: bool,
    pub mc_samples: usize,
    pub folds: usize,
    pub lags: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self { clamp_zero: false, mc_samples: DEFAULT_MC_SAMPLES, folds: 10, lags: DEFAULT_LAGS, seed: 0, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub name: String,
    /// One prediction per test engine, in dataset order.
    pub predictions: Vec<f64>,
    pub lifetime_model: Option<LifetimeModel>,
    pub cv: Option<CvResult>,
}

/// Engine ids and RUL at the last observed cycle of each test engine.
pub fn test_truths(test: &LabeledDataset) -> Result<(Vec<u32>, Vec<f64>), DatasetError> {
    let ids = test.engine_ids();
    let truths = ids.iter().map(|&id| test.end_rul(id).map(f64::from)).collect::<Result<_, _>>()?;
    Ok((ids, truths))
}

pub fn empirical_baseline(train: &LabeledDataset, test: &LabeledDataset, opts: &BaselineOptions) -> Result<BaselineRun, PipelineError> {
    let sample = LifetimeSample::from_cycles(&train.lifetimes())?;
    let predictions = test
        .trajectories
        .iter()
        .map(|t| clamp_rul(empirical_expected_rul(&sample, t.last_cycle() as f64), opts.clamp_zero))
        .collect();
    Ok(BaselineRun { name: "Empirical RUL".into(), predictions, lifetime_model: None, cv: None })
}

/// Conditional expected RUL at each test engine's last cycle, by Monte Carlo.
pub fn lifetime_baseline(
    train: &LabeledDataset,
    test: &LabeledDataset,
    family: Family,
    opts: &BaselineOptions,
) -> Result<BaselineRun, PipelineError> {
    let sample = LifetimeSample::from_cycles(&train.lifetimes())?;
    let model = fit(family, &sample)?;
    let predictions = test
        .trajectories
        .par_iter()
        .map(|t| {
            let seed = mix_seed(opts.seed, u64::from(t.engine_id));
            conditional_expected_rul(&model, t.last_cycle() as f64, opts.mc_samples, seed).map(|e| clamp_rul(e.value, opts.clamp_zero))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let name = match family {
        Family::Weibull => "Weibull",
        Family::LogNormal => "Log-normal",
    };
    Ok(BaselineRun { name: name.into(), predictions, lifetime_model: Some(model), cv: None })
}

pub fn linear_baseline_name(kind: PenaltyKind, mode: FeatureMode) -> String {
    let model = match kind {
        PenaltyKind::Ridge => "Ridge",
        PenaltyKind::Lasso => "Lasso",
        PenaltyKind::ElasticNet => "Elastic net",
    };
    match mode {
        FeatureMode::Current => format!("{model} (current sensors)"),
        FeatureMode::Engineered => format!("{model} (aggregates only)"),
        FeatureMode::Both => format!("{model} (feature engineering)"),
    }
}

/// Standardized design matrices for training rows and test last cycles.
pub struct LinearDesign {
    pub train: crate::features::FeatureMatrix,
    pub test_last: crate::features::FeatureMatrix,
}

pub fn linear_design(train: &LabeledDataset, test: &LabeledDataset, mode: FeatureMode, lags: usize) -> Result<LinearDesign, PipelineError> {
    let scaler = Scaler::fit(train)?;
    let options = FeatureOptions { lags, ..FeatureOptions::new(mode) };
    let x_train = build_feature_matrix(&scaler.apply_dataset(train), &options)?;
    let x_test = build_feature_matrix(&scaler.apply_dataset(test), &options)?.last_cycles();
    let columns = ColumnScaler::fit(&x_train);
    Ok(LinearDesign { train: columns.transform(&x_train)?, test_last: columns.transform(&x_test)? })
}

/// Grouped-CV penalty search, refit on all training rows, scored at the
/// last cycle of each test engine.
pub fn linear_baseline(design: &LinearDesign, kind: PenaltyKind, mode: FeatureMode, opts: &BaselineOptions) -> Result<BaselineRun, PipelineError> {
    let engines: Vec<u32> = {
        let mut ids: Vec<u32> = design.train.keys.iter().map(|k| k.engine_id).collect();
        ids.dedup();
        ids
    };
    let folds = group_kfold(&engines, opts.folds.min(engines.len()), mix_seed(opts.seed, 0xf01d))?;
    let cv = cv_search(&design.train, &design.train.targets, &kind.grid(), &folds, opts.solver)?;
    let predictions = cv.best.predict(&design.test_last)?.into_iter().map(|v| clamp_rul(v, opts.clamp_zero)).collect();
    Ok(BaselineRun { name: linear_baseline_name(kind, mode), predictions, lifetime_model: None, cv: Some(cv) })
}

/// The three lifetime baselines followed by ridge, lasso and elastic net on
/// current sensors and on engineered features.
pub fn all_baselines(train: &LabeledDataset, test: &LabeledDataset, opts: &BaselineOptions) -> Result<Vec<BaselineRun>, PipelineError> {
    let mut runs = vec![
        empirical_baseline(train, test, opts)?,
        lifetime_baseline(train, test, Family::Weibull, opts)?,
        lifetime_baseline(train, test, Family::LogNormal, opts)?,
    ];
    for mode in [FeatureMode::Current, FeatureMode::Both] {
        let design = linear_design(train, test, mode, opts.lags)?;
        for kind in [PenaltyKind::Ridge, PenaltyKind::Lasso, PenaltyKind::ElasticNet] {
            runs.push(linear_baseline(&design, kind, mode, opts)?);
        }
    }
    Ok(runs)
}
