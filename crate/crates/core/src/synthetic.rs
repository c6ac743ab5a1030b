//! Seeded synthetic fleets in the C-MAPSS layout, for tests and for runs
//! without the real data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{DatasetError, LabeledDataset, SensorRow, SettingRow, Trajectory, N_SENSORS};
use crate::lifetimes::{Family, LifetimeError, LifetimeModel};
use crate::senn::TrainingSet;

/// Sensors (0-based) that never move, as in single-condition C-MAPSS subsets.
pub const CONSTANT_SENSORS: [usize; 7] = [0, 4, 5, 9, 15, 17, 18];

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub family: Family,
    pub a: f64,
    pub b: f64,
    pub min_life: u32,
    /// Multiplier on every sensor's measurement noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for FleetSpec {
    fn default() -> Self {
        Self { n_train: 20, n_test: 20, family: Family::LogNormal, a: 5.3, b: 0.25, min_life: 60, noise: 1.0, seed: 0 }
    }
}

fn draw_lifetime(model: &LifetimeModel, min_life: u32, rng: &mut ChaCha8Rng) -> u32 {
    loop {
        let z = model.sample(rng).round();
        if z >= min_life as f64 && z < 2000.0 {
            return z as u32;
        }
    }
}

/// Per-sensor (baseline, degradation amplitude, noise sd).
fn sensor_profile(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    (0..N_SENSORS)
        .map(|j| {
            if CONSTANT_SENSORS.contains(&j) {
                (rng.random_range(10.0..1000.0), 0.0, 0.0)
            } else {
                let base = rng.random_range(5.0..2500.0);
                let sd = base * rng.random_range(1e-4..1e-3);
                let amp = sd * rng.random_range(2.0..8.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (base, amp, sd)
            }
        })
        .collect()
}

fn engine(id: u32, life: u32, observed: u32, profile: &[(f64, f64, f64)], noise: f64, rng: &mut ChaCha8Rng) -> Trajectory {
    let wear0: f64 = rng.random_range(0.0..0.3);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let mut settings = Vec::with_capacity(observed as usize);
    let mut sensors = Vec::with_capacity(observed as usize);
    for c in 1..=observed {
        let health = wear0 + (c as f64 / life as f64).powi(3) * 2.0;
        let mut row: SensorRow = [0.0; N_SENSORS];
        for (j, &(base, amp, sd)) in profile.iter().enumerate() {
            row[j] = base + amp * health + noise * sd * std.sample(rng);
        }
        let s: SettingRow = [std.sample(rng) * 0.002, std.sample(rng) * 0.0003, 100.0];
        settings.push(s);
        sensors.push(row);
    }
    Trajectory::new(id, settings, sensors).expect("consistent synthetic trajectory")
}

/// Run-to-failure training engines and right-censored test engines with
/// their true RUL.
pub fn degradation_fleet(spec: &FleetSpec) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    let model = LifetimeModel::new(spec.family, spec.a, spec.b)
        .map_err(|e| DatasetError::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let profile = sensor_profile(&mut rng);
    let train = (1..=spec.n_train as u32)
        .map(|id| {
            let life = draw_lifetime(&model, spec.min_life, &mut rng);
            engine(id, life, life, &profile, spec.noise, &mut rng)
        })
        .collect();
    let mut truth = Vec::with_capacity(spec.n_test);
    let test = (1..=spec.n_test as u32)
        .map(|id| {
            let life = draw_lifetime(&model, spec.min_life, &mut rng);
            let cut = ((life as f64 * rng.random_range(0.3..0.95)).round() as u32).clamp(1, life - 1);
            truth.push(life - cut);
            engine(id, life, cut, &profile, spec.noise, &mut rng)
        })
        .collect();
    Ok((LabeledDataset::train(train), LabeledDataset::test(test, &truth)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSpec {
    pub n_engines: usize,
    pub family: Family,
    pub a: f64,
    pub b: f64,
    /// Effect of sensor 1 on the target, per raw sensor unit.
    pub effect: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for StructuredSpec {
    fn default() -> Self {
        Self { n_engines: 20, family: Family::LogNormal, a: 5.0, b: 0.3, effect: 3.0, noise_sd: 5.0, seed: 0 }
    }
}

/// Fleet whose targets are exactly λ(t) + effect·sensor₁ + N(0, noise_sd²),
/// with λ the true mean residual life and iid standard normal sensors.
pub fn structured_fleet(spec: &StructuredSpec) -> Result<TrainingSet, LifetimeError> {
    let model = LifetimeModel::new(spec.family, spec.a, spec.b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let mut trajectories = Vec::with_capacity(spec.n_engines);
    let mut targets = Vec::with_capacity(spec.n_engines);
    let mut lifetimes = Vec::with_capacity(spec.n_engines);
    for id in 1..=spec.n_engines as u32 {
        let life = draw_lifetime(&model, 20, &mut rng);
        let mut sensors = Vec::with_capacity(life as usize);
        let mut ys = Vec::with_capacity(life as usize);
        for c in 1..=life {
            let mut row: SensorRow = [0.0; N_SENSORS];
            row.iter_mut().for_each(|v| *v = std.sample(&mut rng));
            let lam = model.mean_residual_life(c as f64);
            ys.push(lam + spec.effect * row[0] + spec.noise_sd * std.sample(&mut rng));
            sensors.push(row);
        }
        let settings = vec![[0.0, 0.0, 100.0]; life as usize];
        trajectories.push(Trajectory::new(id, settings, sensors).expect("consistent trajectory"));
        targets.push(ys);
        lifetimes.push(life as f64);
    }
    Ok(TrainingSet { trajectories, targets, lifetimes })
}
