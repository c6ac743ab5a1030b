//! Ridge, lasso and elastic-net regression by cyclic coordinate descent.
//!
//! Objective: (1/2n)‖y − Xw − b‖² + l1‖w‖₁ + (l2/2)‖w‖², with the intercept
//! unpenalized. The solver works on centered covariance statistics, so a fold
//! of cross-validation costs O(d²) per sweep regardless of the row count.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::GroupFoldPlan;
use crate::features::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("column mismatch: model expects {expected} columns, got {found}{detail}")]
    Schema { expected: usize, found: usize, detail: String },
    #[error("malformed model file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub l1: f64,
    pub l2: f64,
}

impl Penalty {
    pub fn new(l1: f64, l2: f64) -> Self {
        Self { l1, l2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once one sweep lowers the objective by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub penalty: Penalty,
    pub sweeps: usize,
    pub converged: bool,
}

/// Sufficient statistics of a design restricted to some rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GramStats {
    pub n: usize,
    d: usize,
    sum_x: Vec<f64>,
    sum_y: f64,
    /// Σ x xᵀ, full d×d.
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: f64,
}

impl GramStats {
    pub fn zeros(d: usize) -> Self {
        Self { n: 0, d, sum_x: vec![0.0; d], sum_y: 0.0, xx: vec![0.0; d * d], xy: vec![0.0; d], yy: 0.0 }
    }

    pub fn from_rows<'a>(d: usize, rows: impl Iterator<Item = (&'a [f64], f64)>) -> Self {
        let mut s = Self::zeros(d);
        for (x, y) in rows {
            s.add(x, y);
        }
        s.symmetrize();
        s
    }

    fn add(&mut self, x: &[f64], y: f64) {
        let d = self.d;
        self.n += 1;
        self.sum_y += y;
        self.yy += y * y;
        for i in 0..d {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            self.sum_x[i] += xi;
            self.xy[i] += xi * y;
            let row = &mut self.xx[i * d..(i + 1) * d];
            for j in i..d {
                row[j] += xi * x[j];
            }
        }
    }

    fn symmetrize(&mut self) {
        let d = self.d;
        for i in 0..d {
            for j in 0..i {
                self.xx[i * d + j] = self.xx[j * d + i];
            }
        }
    }

    /// Statistics of the rows in `self` but not in `other`.
    pub fn minus(&self, other: &GramStats) -> GramStats {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        GramStats {
            n: self.n - other.n,
            d: self.d,
            sum_x: sub(&self.sum_x, &other.sum_x),
            sum_y: self.sum_y - other.sum_y,
            xx: sub(&self.xx, &other.xx),
            xy: sub(&self.xy, &other.xy),
            yy: self.yy - other.yy,
        }
    }

    /// Per-row centered covariance form (G, c, yy) plus the means.
    fn centered(&self) -> Centered {
        let (d, n) = (self.d, self.n as f64);
        let mx: Vec<f64> = self.sum_x.iter().map(|s| s / n).collect();
        let my = self.sum_y / n;
        let mut g = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                g[i * d + j] = self.xx[i * d + j] / n - mx[i] * mx[j];
            }
        }
        let c = (0..d).map(|i| self.xy[i] / n - mx[i] * my).collect();
        Centered { d, g, c, yy: self.yy / n - my * my, mean_x: mx, mean_y: my }
    }
}

struct Centered {
    d: usize,
    g: Vec<f64>,
    c: Vec<f64>,
    yy: f64,
    mean_x: Vec<f64>,
    mean_y: f64,
}

impl Centered {
    fn objective(&self, w: &[f64], gw: &[f64], p: Penalty) -> f64 {
        let cw: f64 = self.c.iter().zip(w).map(|(a, b)| a * b).sum();
        let wgw: f64 = w.iter().zip(gw).map(|(a, b)| a * b).sum();
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        let l2: f64 = w.iter().map(|v| v * v).sum();
        0.5 * (self.yy - 2.0 * cw + wgw) + p.l1 * l1 + 0.5 * p.l2 * l2
    }

    fn gw(&self, w: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d).map(|i| self.g[i * d..(i + 1) * d].iter().zip(w).map(|(a, b)| a * b).sum()).collect()
    }

    /// Closed-form ridge solution; `None` when the system is singular.
    fn ridge_solution(&self, l2: f64) -> Option<Vec<f64>> {
        let d = self.d;
        let active: Vec<usize> = (0..d).filter(|&j| self.g[j * d + j] > 0.0).collect();
        let m = active.len();
        let mut a = vec![0.0; m * m];
        for (r, &i) in active.iter().enumerate() {
            for (s, &j) in active.iter().enumerate() {
                a[r * m + s] = self.g[i * d + j] + if r == s { l2 } else { 0.0 };
            }
        }
        let b: Vec<f64> = active.iter().map(|&j| self.c[j]).collect();
        let x = cholesky_solve(&mut a, &b, m)?;
        let mut w = vec![0.0; d];
        for (r, &j) in active.iter().enumerate() {
            w[j] = x[r];
        }
        Some(w)
    }
}

fn cholesky_solve(a: &mut [f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let scale = (0..m).map(|i| a[i * m + i]).fold(0.0f64, f64::max);
    for j in 0..m {
        let mut s = a[j * m + j];
        for k in 0..j {
            s -= a[j * m + k] * a[j * m + k];
        }
        if s <= 1e-12 * scale {
            return None;
        }
        let ljj = s.sqrt();
        a[j * m + j] = ljj;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / ljj;
        }
    }
    let mut y = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            y[i] -= a[i * m + k] * y[k];
        }
        y[i] /= a[i * m + i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            y[i] -= a[k * m + i] * y[k];
        }
        y[i] /= a[i * m + i];
    }
    Some(y)
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn check_penalty(p: Penalty) -> Result<(), LinearError> {
    if !(p.l1 >= 0.0 && p.l2 >= 0.0 && p.l1.is_finite() && p.l2.is_finite()) {
        return Err(LinearError::Argument(format!("penalties must be finite and non-negative, got {p:?}")));
    }
    Ok(())
}

/// Coordinate descent on precomputed statistics, optionally warm-started.
pub fn fit_from_stats(
    stats: &GramStats,
    names: &[String],
    penalty: Penalty,
    options: SolverOptions,
    warm: Option<&[f64]>,
) -> Result<LinearModel, LinearError> {
    check_penalty(penalty)?;
    if stats.n == 0 {
        return Err(LinearError::Argument("no rows to fit".into()));
    }
    let cen = stats.centered();
    let d = cen.d;
    let mut w = match warm {
        Some(w0) if w0.len() == d => w0.to_vec(),
        _ if penalty.l1 == 0.0 => cen.ridge_solution(penalty.l2).unwrap_or_else(|| vec![0.0; d]),
        _ => vec![0.0; d],
    };
    let mut gw = cen.gw(&w);
    let mut obj = cen.objective(&w, &gw, penalty);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < options.max_iter {
        sweeps += 1;
        for j in 0..d {
            let gjj = cen.g[j * d + j];
            let denom = gjj + penalty.l2;
            let old = w[j];
            let new = if denom > 0.0 {
                let rho = cen.c[j] - gw[j] + gjj * old;
                soft_threshold(rho, penalty.l1) / denom
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                w[j] = new;
                let col = &cen.g[j * d..(j + 1) * d];
                for (q, g) in gw.iter_mut().zip(col) {
                    *q += delta * g;
                }
            }
        }
        let next = cen.objective(&w, &gw, penalty);
        let decrease = obj - next;
        obj = next;
        if decrease <= options.tol * obj.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let intercept = cen.mean_y - cen.mean_x.iter().zip(&w).map(|(m, v)| m * v).sum::<f64>();
    Ok(LinearModel { names: names.to_vec(), weights: w, intercept, penalty, sweeps, converged })
}

fn check_finite(x: &FeatureMatrix, y: &[f64]) -> Result<(), LinearError> {
    if x.n_rows() == 0 {
        return Err(LinearError::Argument("design matrix has no rows".into()));
    }
    if y.len() != x.n_rows() {
        return Err(LinearError::Argument(format!("{} targets for {} rows", y.len(), x.n_rows())));
    }
    if x.data.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(LinearError::Argument("non-finite value in design or target".into()));
    }
    Ok(())
}

pub fn fit_coordinate_descent(
    x: &FeatureMatrix,
    y: &[f64],
    penalty: Penalty,
    options: SolverOptions,
) -> Result<LinearModel, LinearError> {
    check_finite(x, y)?;
    let stats = GramStats::from_rows(x.n_cols(), (0..x.n_rows()).map(|i| (x.row(i), y[i])));
    fit_from_stats(&stats, &x.names, penalty, options, None)
}

impl LinearModel {
    pub fn n_nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LinearError> {
        if x.names != self.names {
            let detail = x
                .names
                .iter()
                .zip(&self.names)
                .position(|(a, b)| a != b)
                .map(|i| format!(" (first difference at column {i}: {:?} vs {:?})", x.names[i], self.names[i]))
                .unwrap_or_default();
            return Err(LinearError::Schema { expected: self.names.len(), found: x.n_cols(), detail });
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    /// Largest violation of the optimality conditions on the given data.
    pub fn kkt_violation(&self, x: &FeatureMatrix, y: &[f64]) -> f64 {
        let stats = GramStats::from_rows(x.n_cols(), (0..x.n_rows()).map(|i| (x.row(i), y[i])));
        let cen = stats.centered();
        let gw = cen.gw(&self.weights);
        let mut worst = 0.0f64;
        for j in 0..cen.d {
            if cen.g[j * cen.d + j] == 0.0 {
                continue;
            }
            let grad = cen.c[j] - gw[j] - self.penalty.l2 * self.weights[j];
            let v = if self.weights[j] != 0.0 {
                (grad - self.penalty.l1 * self.weights[j].signum()).abs()
            } else {
                (grad.abs() - self.penalty.l1).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective(&self, x: &FeatureMatrix, y: &[f64]) -> f64 {
        let n = x.n_rows() as f64;
        let sse: f64 = (0..x.n_rows()).map(|i| (y[i] - self.predict_row(x.row(i))).powi(2)).sum();
        let l1: f64 = self.weights.iter().map(|w| w.abs()).sum();
        let l2: f64 = self.weights.iter().map(|w| w * w).sum();
        sse / (2.0 * n) + self.penalty.l1 * l1 + 0.5 * self.penalty.l2 * l2
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("column,weight\n");
        let _ = writeln!(out, "(intercept),{:?}", self.intercept);
        let _ = writeln!(out, "(l1),{:?}", self.penalty.l1);
        let _ = writeln!(out, "(l2),{:?}", self.penalty.l2);
        for (n, w) in self.names.iter().zip(&self.weights) {
            let _ = writeln!(out, "{n},{w:?}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, LinearError> {
        let mut model = LinearModel {
            names: Vec::new(),
            weights: Vec::new(),
            intercept: 0.0,
            penalty: Penalty::new(0.0, 0.0),
            sweeps: 0,
            converged: true,
        };
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| LinearError::Parse { line: i + 1, reason: reason.into() };
            let (name, value) = line.rsplit_once(',').ok_or_else(|| bad("expected column,weight"))?;
            let v: f64 = value.trim().parse().map_err(|_| bad("weight is not a number"))?;
            match name {
                "(intercept)" => model.intercept = v,
                "(l1)" => model.penalty.l1 = v,
                "(l2)" => model.penalty.l2 = v,
                _ => {
                    model.names.push(name.to_string());
                    model.weights.push(v);
                }
            }
        }
        Ok(model)
    }
}

/// The l1/l2 values searched for each penalty kind.
pub const DEFAULT_GRID_VALUES: [f64; 6] = [0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    Ridge,
    Lasso,
    ElasticNet,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ridge => "ridge",
            Self::Lasso => "lasso",
            Self::ElasticNet => "elastic_net",
        }
    }

    pub fn grid(self) -> Vec<Penalty> {
        let v = DEFAULT_GRID_VALUES;
        match self {
            Self::Ridge => v.iter().map(|&l2| Penalty::new(0.0, l2)).collect(),
            Self::Lasso => v.iter().map(|&l1| Penalty::new(l1, 0.0)).collect(),
            Self::ElasticNet => v.iter().flat_map(|&l1| v.iter().map(move |&l2| Penalty::new(l1, l2))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub penalty: Penalty,
    pub fold_mae: Vec<f64>,
    pub mean_mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best: LinearModel,
    pub table: Vec<CvRow>,
}

impl CvResult {
    pub fn table_csv(&self) -> String {
        let k = self.table.first().map_or(0, |r| r.fold_mae.len());
        let mut out = String::from("l1,l2,mean_mae");
        for f in 0..k {
            let _ = write!(out, ",fold{f}_mae");
        }
        out.push('\n');
        for r in &self.table {
            let _ = write!(out, "{:?},{:?},{:?}", r.penalty.l1, r.penalty.l2, r.mean_mae);
            for m in &r.fold_mae {
                let _ = write!(out, ",{m:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Fits every grid point along a warm-started path: for each l2, l1 descends.
fn fit_path(
    stats: &GramStats,
    names: &[String],
    grid: &[Penalty],
    options: SolverOptions,
) -> Result<Vec<LinearModel>, LinearError> {
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| {
        grid[a].l2.total_cmp(&grid[b].l2).then(grid[b].l1.total_cmp(&grid[a].l1))
    });
    let mut out: Vec<Option<LinearModel>> = vec![None; grid.len()];
    let mut warm: Option<(f64, Vec<f64>)> = None;
    for i in order {
        let p = grid[i];
        let start = match &warm {
            Some((l2, w)) if *l2 == p.l2 && p.l1 > 0.0 => Some(w.as_slice()),
            _ => None,
        };
        let m = fit_from_stats(stats, names, p, options, start)?;
        warm = Some((p.l2, m.weights.clone()));
        out[i] = Some(m);
    }
    Ok(out.into_iter().map(|m| m.expect("every grid point fitted")).collect())
}

/// Grouped k-fold search over `grid`, refitting the MAE-minimizing point on
/// all rows. Ties go to the earlier grid point.
pub fn cv_search(
    x: &FeatureMatrix,
    y: &[f64],
    grid: &[Penalty],
    folds: &GroupFoldPlan,
    options: SolverOptions,
) -> Result<CvResult, LinearError> {
    if grid.is_empty() {
        return Err(LinearError::Argument("empty hyperparameter grid".into()));
    }
    for &p in grid {
        check_penalty(p)?;
    }
    check_finite(x, y)?;
    let d = x.n_cols();
    let fold_rows: Vec<Vec<usize>> = (0..folds.k)
        .map(|f| (0..x.n_rows()).filter(|&i| folds.fold_of(x.keys[i].engine_id) == Some(f)).collect())
        .collect();
    if fold_rows.iter().map(Vec::len).sum::<usize>() != x.n_rows() {
        return Err(LinearError::Argument("fold plan does not cover every engine".into()));
    }
    let fold_stats: Vec<GramStats> = fold_rows
        .par_iter()
        .map(|rows| GramStats::from_rows(d, rows.iter().map(|&i| (x.row(i), y[i]))))
        .collect();
    let mut total = GramStats::zeros(d);
    for s in &fold_stats {
        total.n += s.n;
        total.sum_y += s.sum_y;
        total.yy += s.yy;
        for (a, b) in total.sum_x.iter_mut().zip(&s.sum_x) {
            *a += b;
        }
        for (a, b) in total.xy.iter_mut().zip(&s.xy) {
            *a += b;
        }
        for (a, b) in total.xx.iter_mut().zip(&s.xx) {
            *a += b;
        }
    }

    let per_fold: Vec<Vec<f64>> = (0..folds.k)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>, LinearError> {
            if fold_rows[f].is_empty() {
                return Err(LinearError::Argument(format!("fold {f} is empty")));
            }
            let train = total.minus(&fold_stats[f]);
            let models = fit_path(&train, &x.names, grid, options)?;
            Ok(models
                .iter()
                .map(|m| {
                    fold_rows[f].iter().map(|&i| (m.predict_row(x.row(i)) - y[i]).abs()).sum::<f64>()
                        / fold_rows[f].len() as f64
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;

    let table: Vec<CvRow> = grid
        .iter()
        .enumerate()
        .map(|(g, &penalty)| {
            let fold_mae: Vec<f64> = per_fold.iter().map(|f| f[g]).collect();
            let mean_mae = fold_mae.iter().sum::<f64>() / fold_mae.len() as f64;
            CvRow { penalty, fold_mae, mean_mae }
        })
        .collect();
    let best_idx = (0..table.len())
        .min_by(|&a, &b| table[a].mean_mae.total_cmp(&table[b].mean_mae).then(a.cmp(&b)))
        .expect("non-empty grid");
    let best = fit_from_stats(&total, &x.names, grid[best_idx], options, None)?;
    Ok(CvResult { best, table })
}
