use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use anyhow::anyhow;

use rulcast::dataset::{parse_cmapss, parse_rul_truth, DatasetSummary, LabeledDataset};
use rulcast::diffprob::trace_csv;
use rulcast::eval::{decomposition_svg, decomposition_variance, render_report, standardized_coefficients, EvaluationReport};
use rulcast::pipeline::{all_baselines, test_truths, BaselineOptions, BaselineRun};
use rulcast::senn::{
    decompose_engine, decomposition_csv, posterior_csv, posterior_summary, train_joint, train_two_stage_matched,
    DecompositionRow, PosteriorMode, SennError, SennModel, TrainingSet,
};

use crate::config::{module_seed, sha256_hex, RunConfig};

#[derive(Debug)]
pub enum CmdError {
    /// Bad arguments, missing or unreadable files.
    Usage(anyhow::Error),
    /// Failures inside the numerical pipeline.
    Compute(anyhow::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(e) | Self::Compute(e) => write!(f, "{e:#}"),
        }
    }
}

type Result<T> = std::result::Result<T, CmdError>;

fn compute<E: Into<anyhow::Error>>(e: E) -> CmdError {
    CmdError::Compute(e.into())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CmdError::Usage(anyhow!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CmdError::Usage(anyhow!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CmdError::Usage(anyhow!("{}: {e}", path.display())))
}

fn stamped(hash: &str, body: &str) -> String {
    format!("# config_hash={hash}\n{body}")
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| CmdError::Usage(anyhow!("missing --{flag} (or data.{flag} in the config)")))
}

fn parse_log(path: &Path) -> Result<Vec<rulcast::dataset::Trajectory>> {
    parse_cmapss(&read(path)?).map_err(|e| CmdError::Usage(anyhow!("{}: {e}", path.display())))
}

fn load_train(cfg: &RunConfig) -> Result<LabeledDataset> {
    let path = required(&cfg.data.train, "train")?;
    let data = LabeledDataset::train(parse_log(path)?);
    Ok(match cfg.senn.train_engines {
        Some(n) => data.truncated(n),
        None => data,
    })
}

fn load_full_train(cfg: &RunConfig) -> Result<LabeledDataset> {
    Ok(LabeledDataset::train(parse_log(required(&cfg.data.train, "train")?)?))
}

fn load_test(cfg: &RunConfig) -> Result<LabeledDataset> {
    let traj = parse_log(required(&cfg.data.test, "test")?)?;
    let truth_path = required(&cfg.data.truth, "truth")?;
    let truth = parse_rul_truth(&read(truth_path)?).map_err(|e| CmdError::Usage(anyhow!("{}: {e}", truth_path.display())))?;
    LabeledDataset::test(traj, &truth).map_err(|e| CmdError::Usage(anyhow!("{}: {e}", truth_path.display())))
}

fn load_checkpoint(path: &Path) -> Result<(SennModel, String)> {
    let text = read(path)?;
    let model = SennModel::from_checkpoint(&text).map_err(|e| CmdError::Usage(anyhow!("{}: {e}", path.display())))?;
    Ok((model, sha256_hex(text.as_bytes())))
}

fn baseline_options(cfg: &RunConfig) -> BaselineOptions {
    BaselineOptions {
        clamp_zero: cfg.baselines.clamp_zero,
        mc_samples: cfg.baselines.mc_samples,
        folds: cfg.baselines.folds,
        lags: cfg.baselines.lags,
        seed: module_seed(cfg.seed, "baselines"),
        ..BaselineOptions::default()
    }
}

fn slug(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    s.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

fn senn_name(model: &SennModel) -> String {
    format!("SENN {} + {}", model.config.family.name(), model.config.linear_input.name())
}

fn predictions_csv(engines: &[u32], truths: &[f64], runs: &[(String, Vec<f64>)]) -> String {
    let mut s = String::from("engine,true_rul");
    for (name, _) in runs {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (i, (id, y)) in engines.iter().zip(truths).enumerate() {
        let _ = write!(s, "{id},{y:?}");
        for (_, p) in runs {
            let _ = write!(s, ",{:?}", p[i]);
        }
        s.push('\n');
    }
    s
}

fn print_mae(report: &EvaluationReport) {
    for m in &report.models {
        println!("{:<40} {:>8.3}", m.name, m.mae);
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let train = load_full_train(cfg)?;
    let test = load_test(cfg)?;
    let hash = cfg.hash(&[b"ingest"]);
    let summary = DatasetSummary::compute(&train, &test).map_err(compute)?;
    write(&cfg.out.join("train.csv"), &stamped(&hash, &train.to_csv().map_err(compute)?))?;
    write(&cfg.out.join("test.csv"), &stamped(&hash, &test.to_csv().map_err(compute)?))?;
    let text = summary.render();
    write(&cfg.out.join("summary.txt"), &stamped(&hash, &text))?;
    print!("{text}");
    Ok(())
}

pub fn baselines(cfg: &RunConfig) -> Result<()> {
    let train = load_full_train(cfg)?;
    let test = load_test(cfg)?;
    let hash = cfg.hash(&[b"baselines"]);
    let runs = all_baselines(&train, &test, &baseline_options(cfg)).map_err(compute)?;
    let report = baseline_report(&hash, &test, &runs)?;
    let dir = cfg.out.join("baselines");
    write(&dir.join("mae.csv"), &report.mae_csv())?;
    write(&dir.join("ttests.csv"), &report.ttests_csv())?;
    let named: Vec<(String, Vec<f64>)> = runs.iter().map(|r| (r.name.clone(), r.predictions.clone())).collect();
    write(&dir.join("predictions.csv"), &stamped(&hash, &predictions_csv(&report.engines, &report.truths, &named)))?;
    for r in &runs {
        if let Some(cv) = &r.cv {
            write(&dir.join(format!("cv_{}.csv", slug(&r.name))), &stamped(&hash, &cv.table_csv()))?;
        }
        if let Some(m) = &r.lifetime_model {
            println!("{}: {m}", r.name);
        }
    }
    print_mae(&report);
    Ok(())
}

fn baseline_report(hash: &str, test: &LabeledDataset, runs: &[BaselineRun]) -> Result<EvaluationReport> {
    let (engines, truths) = test_truths(test).map_err(compute)?;
    let mut report = EvaluationReport::new(hash, engines, truths).map_err(compute)?;
    for r in runs {
        report.add_model(r.name.clone(), r.predictions.clone()).map_err(compute)?;
    }
    report.reference = report.models.iter().min_by(|a, b| a.mae.total_cmp(&b.mae)).map(|m| m.name.clone());
    Ok(report)
}

pub fn train_senn(cfg: &RunConfig) -> Result<()> {
    let train = load_train(cfg)?;
    let hash = cfg.hash(&[b"train-senn"]);
    let set = TrainingSet::from_dataset(&train).map_err(compute)?;
    let result = if cfg.senn.two_stage { train_two_stage_matched(&set, &cfg.senn.config) } else { train_joint(&set, &cfg.senn.config) };
    let trained = match result {
        Ok(t) => t,
        Err(SennError::Diverged { step, reason, last_finite }) => {
            let path = cfg.out.join("checkpoint.diverged.txt");
            write(&path, &stamped(&hash, &last_finite.to_checkpoint()))?;
            return Err(CmdError::Compute(anyhow!(
                "training diverged at step {step}: {reason}; last finite state saved to {}",
                path.display()
            )));
        }
        Err(e) => return Err(compute(e)),
    };
    write(&cfg.out.join("checkpoint.txt"), &stamped(&hash, &trained.model.to_checkpoint()))?;
    if trained.traces.len() == 1 {
        write(&cfg.out.join("trace.csv"), &stamped(&hash, &trace_csv(&trained.traces[0])))?;
    } else {
        for (k, t) in trained.traces.iter().enumerate() {
            write(&cfg.out.join(format!("trace_stage{}.csv", k + 1)), &stamped(&hash, &trace_csv(t)))?;
        }
    }
    let posterior = posterior_summary(&trained.model);
    write(&cfg.out.join("posterior.csv"), &stamped(&hash, &posterior_csv(&posterior)))?;
    let last = trained.traces.iter().rev().find_map(|t| t.last());
    println!(
        "trained {} on {} engines ({} rows); final ELBO estimate {}",
        senn_name(&trained.model),
        set.trajectories.len(),
        set.n_rows(),
        last.map_or("n/a".into(), |r| format!("{:.3}", r.elbo))
    );
    Ok(())
}

fn senn_last_cycle(model: &SennModel, test: &LabeledDataset) -> Result<Vec<DecompositionRow>> {
    test.trajectories
        .iter()
        .map(|t| {
            let parts = model.predict_last(t, PosteriorMode::Mean).map_err(compute)?;
            let true_rul = test.end_rul(t.engine_id).map_err(compute)? as f64;
            Ok(DecompositionRow { engine_id: t.engine_id, cycle: t.last_cycle(), parts, true_rul })
        })
        .collect()
}

pub fn evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let (model, digest) = load_checkpoint(checkpoint)?;
    let test = load_test(cfg)?;
    let hash = cfg.hash(&[b"evaluate", digest.as_bytes()]);
    let rows = senn_last_cycle(&model, &test)?;
    let (engines, truths) = test_truths(&test).map_err(compute)?;
    let mut report = EvaluationReport::new(hash.clone(), engines, truths).map_err(compute)?;
    report.add_model(senn_name(&model), rows.iter().map(|r| r.parts.total).collect()).map_err(compute)?;
    write(&cfg.out.join("evaluation.csv"), &stamped(&hash, &decomposition_csv(&rows)))?;
    write(&cfg.out.join("mae.csv"), &report.mae_csv())?;
    print_mae(&report);
    Ok(())
}

fn default_engines(data: &LabeledDataset, requested: &[u32], n: usize) -> Vec<u32> {
    if requested.is_empty() {
        data.engine_ids().into_iter().take(n).collect()
    } else {
        requested.to_vec()
    }
}

pub fn decompose(cfg: &RunConfig, checkpoint: &Path, engines: &[u32], on_train: bool) -> Result<()> {
    let (model, digest) = load_checkpoint(checkpoint)?;
    let data = if on_train { load_full_train(cfg)? } else { load_test(cfg)? };
    let hash = cfg.hash(&[b"decompose", digest.as_bytes()]);
    for id in default_engines(&data, engines, 1) {
        let rows = decompose_engine(&model, &data, id, PosteriorMode::Mean).map_err(|e| match e {
            SennError::Argument(msg) => CmdError::Usage(anyhow!(msg)),
            other => compute(other),
        })?;
        write(&cfg.out.join(format!("decomposition_engine_{id}.csv")), &stamped(&hash, &decomposition_csv(&rows)))?;
        write(&cfg.out.join(format!("decomposition_engine_{id}.svg")), &decomposition_svg(&rows, &hash))?;
        println!("engine {id}: {} cycles decomposed", rows.len());
    }
    Ok(())
}

pub fn report(cfg: &RunConfig, checkpoint: &Path, engines: &[u32]) -> Result<()> {
    let (model, digest) = load_checkpoint(checkpoint)?;
    let train = load_full_train(cfg)?;
    let test = load_test(cfg)?;
    let hash = cfg.hash(&[b"report", digest.as_bytes()]);
    let runs = all_baselines(&train, &test, &baseline_options(cfg)).map_err(compute)?;
    let mut report = baseline_report(&hash, &test, &runs)?;
    let name = senn_name(&model);
    let last = senn_last_cycle(&model, &test)?;
    report.add_model(name.clone(), last.iter().map(|r| r.parts.total).collect()).map_err(compute)?;
    report.reference = Some(name);

    let mut all_rows = Vec::new();
    for id in test.engine_ids() {
        all_rows.extend(decompose_engine(&model, &test, id, PosteriorMode::Mean).map_err(compute)?);
    }
    report.variance = decomposition_variance(&all_rows).map_err(compute)?;
    let mut outcome = Vec::new();
    for t in &train.trajectories {
        outcome.extend(train.trajectory_labels(t).map_err(compute)?);
    }
    report.coefficients = standardized_coefficients(&posterior_summary(&model), &outcome).map_err(compute)?;

    let plots: Vec<Vec<DecompositionRow>> = default_engines(&test, engines, 3)
        .into_iter()
        .map(|id| decompose_engine(&model, &test, id, PosteriorMode::Mean).map_err(compute))
        .collect::<Result<_>>()?;
    let dir = cfg.out.join("report");
    render_report(&report, &plots, &dir).map_err(|e| CmdError::Usage(e.into()))?;
    print_mae(&report);
    println!("report written to {}", dir.display());
    Ok(())
}
