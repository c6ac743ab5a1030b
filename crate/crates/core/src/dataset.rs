//! Run-to-failure sensor logs: parsing, RUL labelling, standardization and
//! engine-grouped cross-validation folds.
//!
//! The input format is the whitespace-delimited C-MAPSS layout: one row per
//! (engine, cycle) with 26 columns `engine_id cycle setting1..3 s1..s21`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const N_SETTINGS: usize = 3;
pub const N_SENSORS: usize = 21;
pub const N_COLUMNS: usize = 2 + N_SETTINGS + N_SENSORS;

pub type SensorRow = [f64; N_SENSORS];
pub type SettingRow = [f64; N_SETTINGS];

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: field {field} is not numeric: {value:?}")]
    NotNumeric { line: usize, field: usize, value: String },
    #[error("line {line}: engine id / cycle must be a positive integer, found {value:?}")]
    BadIndex { line: usize, value: String },
    #[error("engine {engine_id}: cycles are not contiguous from 1 (expected {expected}, found {found})")]
    NonContiguous { engine_id: u32, expected: u32, found: u32 },
    #[error("engine {0}: no remaining-useful-life truth available")]
    MissingTruth(u32),
    #[error("truth file has {truths} entries but the test set has {engines} engines")]
    TruthCount { truths: usize, engines: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// One engine's time-ordered record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub engine_id: u32,
    pub cycles: Vec<u32>,
    pub op_settings: Vec<SettingRow>,
    pub sensors: Vec<SensorRow>,
}

impl Trajectory {
    pub fn new(
        engine_id: u32,
        op_settings: Vec<SettingRow>,
        sensors: Vec<SensorRow>,
    ) -> Result<Self, DatasetError> {
        if op_settings.len() != sensors.len() {
            return Err(DatasetError::Argument(format!(
                "engine {engine_id}: {} setting rows vs {} sensor rows",
                op_settings.len(),
                sensors.len()
            )));
        }
        if sensors.is_empty() {
            return Err(DatasetError::Argument(format!("engine {engine_id}: no cycles")));
        }
        let cycles = (1..=sensors.len() as u32).collect();
        Ok(Self { engine_id, cycles, op_settings, sensors })
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn last_cycle(&self) -> u32 {
        *self.cycles.last().expect("trajectory has at least one cycle")
    }

    /// Values of one sensor over the whole history.
    pub fn sensor_series(&self, sensor: usize) -> Vec<f64> {
        self.sensors.iter().map(|row| row[sensor]).collect()
    }
}

/// Parses a whitespace-delimited C-MAPSS log into one trajectory per engine,
/// ordered by engine id.
pub fn parse_cmapss(text: &str) -> Result<Vec<Trajectory>, DatasetError> {
    let mut rows: BTreeMap<u32, Vec<(u32, SettingRow, SensorRow)>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != N_COLUMNS {
            return Err(DatasetError::FieldCount {
                line: line_no,
                expected: N_COLUMNS,
                found: fields.len(),
            });
        }
        let mut values = [0.0f64; N_COLUMNS];
        for (j, field) in fields.iter().enumerate() {
            values[j] = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                DatasetError::NotNumeric { line: line_no, field: j + 1, value: field.to_string() }
            })?;
        }
        let engine_id = parse_index(values[0], fields[0], line_no)?;
        let cycle = parse_index(values[1], fields[1], line_no)?;
        let mut settings = [0.0; N_SETTINGS];
        settings.copy_from_slice(&values[2..2 + N_SETTINGS]);
        let mut sensors = [0.0; N_SENSORS];
        sensors.copy_from_slice(&values[2 + N_SETTINGS..]);
        rows.entry(engine_id).or_default().push((cycle, settings, sensors));
    }

    rows.into_iter()
        .map(|(engine_id, mut engine_rows)| {
            engine_rows.sort_by_key(|r| r.0);
            for (i, row) in engine_rows.iter().enumerate() {
                let expected = i as u32 + 1;
                if row.0 != expected {
                    return Err(DatasetError::NonContiguous { engine_id, expected, found: row.0 });
                }
            }
            Ok(Trajectory {
                engine_id,
                cycles: engine_rows.iter().map(|r| r.0).collect(),
                op_settings: engine_rows.iter().map(|r| r.1).collect(),
                sensors: engine_rows.iter().map(|r| r.2).collect(),
            })
        })
        .collect()
}

fn parse_index(value: f64, raw: &str, line: usize) -> Result<u32, DatasetError> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as u32)
    } else {
        Err(DatasetError::BadIndex { line, value: raw.to_string() })
    }
}

/// Parses the ground-truth file: one integer RUL per line, line i for test
/// engine i.
pub fn parse_rul_truth(text: &str) -> Result<Vec<u32>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let raw = l.trim();
            raw.parse::<u32>().map_err(|_| DatasetError::NotNumeric {
                line: i + 1,
                field: 1,
                value: raw.to_string(),
            })
        })
        .collect()
}

/// Writes trajectories back into the whitespace-delimited input layout.
/// Floats use the shortest representation that round-trips exactly.
pub fn to_cmapss_text(trajectories: &[Trajectory]) -> String {
    let mut out = String::new();
    for traj in trajectories {
        for i in 0..traj.len() {
            let _ = write!(out, "{} {}", traj.engine_id, traj.cycles[i]);
            for v in traj.op_settings[i].iter().chain(traj.sensors[i].iter()) {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub trajectories: Vec<Trajectory>,
    /// RUL after the last observed cycle. Empty for training sets, where it
    /// is zero by construction.
    pub rul_at_end: BTreeMap<u32, u32>,
    pub role: Role,
}

impl LabeledDataset {
    pub fn train(trajectories: Vec<Trajectory>) -> Self {
        Self { trajectories, rul_at_end: BTreeMap::new(), role: Role::Train }
    }

    /// Pairs test trajectories with the truth file; truth line i belongs to
    /// the i-th engine in ascending id order.
    pub fn test(trajectories: Vec<Trajectory>, truth: &[u32]) -> Result<Self, DatasetError> {
        if truth.len() != trajectories.len() {
            return Err(DatasetError::TruthCount {
                truths: truth.len(),
                engines: trajectories.len(),
            });
        }
        let rul_at_end = trajectories.iter().zip(truth).map(|(t, &r)| (t.engine_id, r)).collect();
        Ok(Self { trajectories, rul_at_end, role: Role::Test })
    }

    /// RUL at the last observed cycle of an engine.
    pub fn end_rul(&self, engine_id: u32) -> Result<u32, DatasetError> {
        match self.role {
            Role::Train => Ok(0),
            Role::Test => {
                self.rul_at_end.get(&engine_id).copied().ok_or(DatasetError::MissingTruth(engine_id))
            }
        }
    }

    /// Per-cycle RUL targets of one trajectory (linear, uncapped).
    pub fn trajectory_labels(&self, traj: &Trajectory) -> Result<Vec<f64>, DatasetError> {
        let end = self.end_rul(traj.engine_id)? as f64;
        let last = traj.last_cycle() as f64;
        Ok(traj.cycles.iter().map(|&c| end + last - c as f64).collect())
    }

    pub fn derive_rul_labels(&self) -> Result<BTreeMap<(u32, u32), f64>, DatasetError> {
        let mut labels = BTreeMap::new();
        for traj in &self.trajectories {
            for (c, y) in traj.cycles.iter().zip(self.trajectory_labels(traj)?) {
                labels.insert((traj.engine_id, *c), y);
            }
        }
        Ok(labels)
    }

    /// Total lifetimes of training engines (their last cycle).
    pub fn lifetimes(&self) -> Vec<u32> {
        self.trajectories.iter().map(Trajectory::last_cycle).collect()
    }

    pub fn engine_ids(&self) -> Vec<u32> {
        self.trajectories.iter().map(|t| t.engine_id).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Keeps the first `n` engines.
    pub fn truncated(&self, n: usize) -> Self {
        let trajectories: Vec<Trajectory> = self.trajectories.iter().take(n).cloned().collect();
        let rul_at_end = trajectories
            .iter()
            .filter_map(|t| self.rul_at_end.get(&t.engine_id).map(|r| (t.engine_id, *r)))
            .collect();
        Self { trajectories, rul_at_end, role: self.role }
    }

    pub fn map_trajectories(&self, f: impl Fn(&Trajectory) -> Trajectory) -> Self {
        Self {
            trajectories: self.trajectories.iter().map(f).collect(),
            rul_at_end: self.rul_at_end.clone(),
            role: self.role,
        }
    }

    /// Canonical dump: `engine_id,cycle,setting1..3,s1..s21,rul`.
    pub fn to_csv(&self) -> Result<String, DatasetError> {
        let mut out = String::from("engine_id,cycle,setting1,setting2,setting3");
        for j in 1..=N_SENSORS {
            let _ = write!(out, ",s{j}");
        }
        out.push_str(",rul\n");
        for traj in &self.trajectories {
            let labels = self.trajectory_labels(traj)?;
            for i in 0..traj.len() {
                let _ = write!(out, "{},{}", traj.engine_id, traj.cycles[i]);
                for v in traj.op_settings[i].iter().chain(traj.sensors[i].iter()) {
                    let _ = write!(out, ",{v:?}");
                }
                let _ = writeln!(out, ",{}", labels[i]);
            }
        }
        Ok(out)
    }
}

/// Per-sensor z-score standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: SensorRow,
    pub std: SensorRow,
}

/// Relative spread below which a sensor is treated as constant.
const ZERO_VARIANCE_REL: f64 = 1e-12;

impl Scaler {
    pub fn fit(train: &LabeledDataset) -> Result<Self, DatasetError> {
        let n = train.n_rows();
        if n < 2 {
            return Err(DatasetError::Argument("scaler needs at least 2 training rows".into()));
        }
        let mut mean = [0.0; N_SENSORS];
        let rows = train.trajectories.iter().flat_map(|t| t.sensors.iter());
        for row in rows.clone() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = [0.0; N_SENSORS];
        for row in rows {
            for j in 0..N_SENSORS {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let mut std = [0.0; N_SENSORS];
        for j in 0..N_SENSORS {
            let sd = (var[j] / n as f64).sqrt();
            std[j] = if sd <= ZERO_VARIANCE_REL * (1.0 + mean[j].abs()) { 0.0 } else { sd };
        }
        Ok(Self { mean, std })
    }

    /// Sensors whose fitted spread is zero; these always scale to 0.
    pub fn constant_sensors(&self) -> Vec<usize> {
        (0..N_SENSORS).filter(|&j| self.std[j] == 0.0).collect()
    }

    pub fn scale_row(&self, row: &SensorRow) -> SensorRow {
        let mut out = [0.0; N_SENSORS];
        for j in 0..N_SENSORS {
            out[j] = if self.std[j] == 0.0 { 0.0 } else { (row[j] - self.mean[j]) / self.std[j] };
        }
        out
    }

    pub fn apply(&self, traj: &Trajectory) -> Trajectory {
        Trajectory {
            engine_id: traj.engine_id,
            cycles: traj.cycles.clone(),
            op_settings: traj.op_settings.clone(),
            sensors: traj.sensors.iter().map(|r| self.scale_row(r)).collect(),
        }
    }

    pub fn apply_dataset(&self, data: &LabeledDataset) -> LabeledDataset {
        data.map_trajectories(|t| self.apply(t))
    }
}

/// Assignment of engines to cross-validation folds.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<u32, usize>,
}

impl GroupFoldPlan {
    pub fn fold_of(&self, engine_id: u32) -> Option<usize> {
        self.assignment.get(&engine_id).copied()
    }

    pub fn engines_in(&self, fold: usize) -> Vec<u32> {
        self.assignment.iter().filter(|(_, &f)| f == fold).map(|(&e, _)| e).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles engines with a seeded generator and deals them round-robin into
/// `k` folds.
pub fn group_kfold(engine_ids: &[u32], k: usize, seed: u64) -> Result<GroupFoldPlan, DatasetError> {
    let mut ids: Vec<u32> = engine_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if k == 0 || k > ids.len() {
        return Err(DatasetError::Argument(format!(
            "fold count {k} must lie in 1..={} (number of engines)",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignment = ids.into_iter().enumerate().map(|(i, e)| (e, i % k)).collect();
    Ok(GroupFoldPlan { k, assignment })
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q75: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { count: n, mean, sd: var.sqrt(), median: quantile(values, 0.5), q75: quantile(values, 0.75) }
    }
}

/// Summary printed by the ingest command.
#[derive(Debug, Clone)]
pub struct DatasetSummary {
    pub train_engines: usize,
    pub train_rows: usize,
    pub test_engines: usize,
    pub test_rows: usize,
    pub train_lifetimes: Moments,
    /// RUL of test engines at their last observed cycle.
    pub test_end_rul: Moments,
    /// RUL over every observed test cycle.
    pub test_all_rul: Moments,
    pub constant_sensors: Vec<usize>,
}

impl DatasetSummary {
    pub fn compute(train: &LabeledDataset, test: &LabeledDataset) -> Result<Self, DatasetError> {
        let lifetimes: Vec<f64> = train.lifetimes().iter().map(|&z| z as f64).collect();
        let mut end = Vec::new();
        let mut all = Vec::new();
        for traj in &test.trajectories {
            let labels = test.trajectory_labels(traj)?;
            end.push(*labels.last().expect("non-empty"));
            all.extend(labels);
        }
        let scaler = Scaler::fit(train)?;
        Ok(Self {
            train_engines: train.trajectories.len(),
            train_rows: train.n_rows(),
            test_engines: test.trajectories.len(),
            test_rows: test.n_rows(),
            train_lifetimes: Moments::of(&lifetimes),
            test_end_rul: Moments::of(&end),
            test_all_rul: Moments::of(&all),
            constant_sensors: scaler.constant_sensors().iter().map(|j| j + 1).collect(),
        })
    }

    pub fn render(&self) -> String {
        let m = |name: &str, x: &Moments| {
            format!(
                "{name}: n={} mean={:.2} sd={:.2} median={:.1} q75={:.1}\n",
                x.count, x.mean, x.sd, x.median, x.q75
            )
        };
        let mut s = format!(
            "train engines: {} ({} rows)\ntest engines: {} ({} rows)\n",
            self.train_engines, self.train_rows, self.test_engines, self.test_rows
        );
        s += &m("train lifetimes", &self.train_lifetimes);
        s += &m("test RUL at last cycle", &self.test_end_rul);
        s += &m("test RUL over all cycles", &self.test_all_rul);
        let consts: Vec<String> = self.constant_sensors.iter().map(|j| format!("s{j}")).collect();
        s += &format!("constant sensors: {}\n", consts.join(" "));
        s
    }
}
