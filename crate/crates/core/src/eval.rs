//! Scoring, paired significance tests, variance explained, standardized
//! coefficients and report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::senn::{DecompositionRow, PosteriorRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn check_lengths(a: usize, b: usize, min: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::Argument(format!("length mismatch: {a} vs {b}")));
    }
    if a < min {
        return Err(EvalError::Argument(format!("need at least {min} values, got {a}")));
    }
    Ok(())
}

pub fn absolute_errors(predictions: &[f64], truths: &[f64]) -> Result<Vec<f64>, EvalError> {
    check_lengths(predictions.len(), truths.len(), 1)?;
    Ok(predictions.iter().zip(truths).map(|(p, y)| (p - y).abs()).collect())
}

pub fn mae(predictions: &[f64], truths: &[f64]) -> Result<f64, EvalError> {
    let e = absolute_errors(predictions, truths)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Two-sided P(|T| > |t|) for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// Two-sided paired t-test on the differences `a - b`.
pub fn paired_t_test(errors_a: &[f64], errors_b: &[f64]) -> Result<TTest, EvalError> {
    check_lengths(errors_a.len(), errors_b.len(), 3)?;
    let n = errors_a.len();
    let d: Vec<f64> = errors_a.iter().zip(errors_b).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TTest { t: 0.0, p: 1.0, df: n - 1 });
        }
        return Err(EvalError::Degenerate(format!("paired differences are all {mean}")));
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(TTest { t, p: student_t_two_sided(t, (n - 1) as f64), df: n - 1 })
}

/// 1 - Σ(y - ψ)² / Σ(y - ȳ)².
pub fn variance_explained(component: &[f64], reference: &[f64]) -> Result<f64, EvalError> {
    check_lengths(component.len(), reference.len(), 1)?;
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let total: f64 = reference.iter().map(|y| (y - mean).powi(2)).sum();
    if total == 0.0 {
        return Err(EvalError::Degenerate("reference series has zero variance".into()));
    }
    let resid: f64 = reference.iter().zip(component).map(|(y, c)| (y - c).powi(2)).sum();
    Ok(1.0 - resid / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceReference {
    /// Observed RUL.
    Actual,
    /// The model's own total prediction.
    Predicted,
}

impl VarianceReference {
    pub fn name(self) -> &'static str {
        match self {
            Self::Actual => "actual_rul",
            Self::Predicted => "predicted_rul",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub component: &'static str,
    pub reference: VarianceReference,
    pub value: f64,
}

/// Variance explained by λ, the linear part and the recurrent part, against
/// both references.
pub fn decomposition_variance(rows: &[DecompositionRow]) -> Result<Vec<VarianceRow>, EvalError> {
    let actual: Vec<f64> = rows.iter().map(|r| r.true_rul).collect();
    let predicted: Vec<f64> = rows.iter().map(|r| r.parts.total).collect();
    let parts: [(&'static str, Vec<f64>); 3] = [
        ("lambda", rows.iter().map(|r| r.parts.lambda).collect()),
        ("linear", rows.iter().map(|r| r.parts.linear).collect()),
        ("recurrent", rows.iter().map(|r| r.parts.recurrent).collect()),
    ];
    let mut out = Vec::new();
    for (name, series) in &parts {
        for (reference, ys) in [(VarianceReference::Actual, &actual), (VarianceReference::Predicted, &predicted)] {
            out.push(VarianceRow { component: name, reference, value: variance_explained(series, ys)? });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardized {
    /// β·var(β)/var(Y).
    pub by_variance: f64,
    /// β·sd(β)/var(Y), the default ranking key.
    pub by_sd: f64,
}

pub fn standardize(beta: f64, beta_sd: f64, outcome_var: f64) -> Standardized {
    Standardized { by_variance: beta * beta_sd * beta_sd / outcome_var, by_sd: beta * beta_sd / outcome_var }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub standardized: Standardized,
}

/// Ranks the `beta.*` rows of a posterior summary by |β·sd(β)/var(Y)|.
pub fn standardized_coefficients(posterior: &[PosteriorRow], outcome: &[f64]) -> Result<Vec<CoefficientRow>, EvalError> {
    if outcome.len() < 2 {
        return Err(EvalError::Argument("outcome series needs at least 2 values".into()));
    }
    let m = outcome.iter().sum::<f64>() / outcome.len() as f64;
    let var = outcome.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (outcome.len() - 1) as f64;
    if var == 0.0 {
        return Err(EvalError::Degenerate("outcome series has zero variance".into()));
    }
    let mut rows: Vec<CoefficientRow> = posterior
        .iter()
        .filter_map(|r| {
            let name = r.name.strip_prefix("beta.")?;
            Some(CoefficientRow { name: name.to_string(), mean: r.mean, sd: r.sd, standardized: standardize(r.mean, r.sd, var) })
        })
        .collect();
    rows.sort_by(|a, b| b.standardized.by_sd.abs().total_cmp(&a.standardized.by_sd.abs()).then_with(|| a.name.cmp(&b.name)));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    pub name: String,
    pub predictions: Vec<f64>,
    pub abs_errors: Vec<f64>,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub engines: Vec<u32>,
    pub truths: Vec<f64>,
    pub models: Vec<ModelResult>,
    /// Model the MAE table's t and p columns compare against.
    pub reference: Option<String>,
    pub variance: Vec<VarianceRow>,
    pub coefficients: Vec<CoefficientRow>,
}

impl EvaluationReport {
    pub fn new(config_hash: impl Into<String>, engines: Vec<u32>, truths: Vec<f64>) -> Result<Self, EvalError> {
        check_lengths(engines.len(), truths.len(), 0)?;
        Ok(Self {
            config_hash: config_hash.into(),
            engines,
            truths,
            models: Vec::new(),
            reference: None,
            variance: Vec::new(),
            coefficients: Vec::new(),
        })
    }

    pub fn add_model(&mut self, name: impl Into<String>, predictions: Vec<f64>) -> Result<&ModelResult, EvalError> {
        let name = name.into();
        if self.models.iter().any(|m| m.name == name) {
            return Err(EvalError::Argument(format!("duplicate model {name}")));
        }
        let abs_errors = absolute_errors(&predictions, &self.truths)?;
        let mae = abs_errors.iter().sum::<f64>() / abs_errors.len() as f64;
        self.models.push(ModelResult { name, predictions, abs_errors, mae });
        Ok(self.models.last().expect("just pushed"))
    }

    pub fn model(&self, name: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.name == name)
    }

    /// Every unordered pair in insertion order. Degenerate pairs carry no test.
    pub fn pairwise_tests(&self) -> Vec<PairRow> {
        let mut out = Vec::new();
        for (i, a) in self.models.iter().enumerate() {
            for b in &self.models[i + 1..] {
                out.push(PairRow { a: a.name.clone(), b: b.name.clone(), test: paired_t_test(&a.abs_errors, &b.abs_errors).ok() });
            }
        }
        out
    }

    pub fn mae_csv(&self) -> String {
        let mut s = self.header_comment("#");
        s.push_str("Method,MAE,t,p\n");
        let reference = self.reference.as_deref().and_then(|r| self.model(r));
        for m in &self.models {
            let test = reference.filter(|r| r.name != m.name).and_then(|r| paired_t_test(&m.abs_errors, &r.abs_errors).ok());
            match test {
                Some(t) => writeln!(s, "{},{:.3},{:.3},{:.3e}", m.name, m.mae, t.t, t.p),
                None => writeln!(s, "{},{:.3},,", m.name, m.mae),
            }
            .expect("write to string");
        }
        s
    }

    pub fn ttests_csv(&self) -> String {
        let mut s = self.header_comment("#");
        s.push_str("model_a,model_b,t,p,df\n");
        for row in self.pairwise_tests() {
            match row.test {
                Some(t) => writeln!(s, "{},{},{:?},{:?},{}", row.a, row.b, t.t, t.p, t.df),
                None => writeln!(s, "{},{},NA,NA,NA", row.a, row.b),
            }
            .expect("write to string");
        }
        s
    }

    pub fn variance_csv(&self) -> String {
        let mut s = self.header_comment("#");
        s.push_str("component,reference,variance_explained\n");
        for r in &self.variance {
            writeln!(s, "{},{},{:?}", r.component, r.reference.name(), r.value).expect("write to string");
        }
        s
    }

    pub fn coefficients_csv(&self) -> String {
        let mut s = self.header_comment("#");
        s.push_str("rank,sensor,mean,sd,standardized_sd,standardized_var\n");
        for (i, r) in self.coefficients.iter().enumerate() {
            writeln!(s, "{},{},{:?},{:?},{:?},{:?}", i + 1, r.name, r.mean, r.sd, r.standardized.by_sd, r.standardized.by_variance)
                .expect("write to string");
        }
        s
    }

    fn header_comment(&self, marker: &str) -> String {
        format!("{marker} config_hash={}\n", self.config_hash)
    }
}

const SVG_W: f64 = 720.0;
const SVG_H: f64 = 420.0;
const MARGIN: f64 = 50.0;

/// Line plot of λ, linear, recurrent, total and true RUL against cycle.
pub fn decomposition_svg(rows: &[DecompositionRow], config_hash: &str) -> String {
    let series: [(&str, &str, Vec<f64>); 5] = [
        ("lambda", "#1f77b4", rows.iter().map(|r| r.parts.lambda).collect()),
        ("linear", "#ff7f0e", rows.iter().map(|r| r.parts.linear).collect()),
        ("recurrent", "#2ca02c", rows.iter().map(|r| r.parts.recurrent).collect()),
        ("total", "#d62728", rows.iter().map(|r| r.parts.total).collect()),
        ("true_rul", "#000000", rows.iter().map(|r| r.true_rul).collect()),
    ];
    let xs: Vec<f64> = rows.iter().map(|r| r.cycle as f64).collect();
    let (x0, x1) = bounds(&xs);
    let all: Vec<f64> = series.iter().flat_map(|s| s.2.iter().copied()).collect();
    let (y0, y1) = bounds(&all);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (SVG_W - 2.0 * MARGIN);
    let py = |y: f64| SVG_H - MARGIN - (y - y0) / (y1 - y0) * (SVG_H - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#).unwrap();
    writeln!(s, "<!-- config_hash={config_hash} -->").unwrap();
    if let Some(r) = rows.first() {
        writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="14">engine {}</text>"#, r.engine_id).unwrap();
    }
    writeln!(
        s,
        r##"<polyline points="{m},{t} {m},{b} {r},{b}" fill="none" stroke="#888"/>"##,
        m = MARGIN,
        t = MARGIN,
        b = SVG_H - MARGIN,
        r = SVG_W - MARGIN
    )
    .unwrap();
    writeln!(s, r#"<text x="{MARGIN}" y="{:.1}" font-size="11">{x0}</text>"#, SVG_H - MARGIN + 15.0).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11">{x1}</text>"#, SVG_W - MARGIN, SVG_H - MARGIN + 15.0).unwrap();
    writeln!(s, r#"<text x="5" y="{:.1}" font-size="11">{y1:.1}</text>"#, MARGIN).unwrap();
    writeln!(s, r#"<text x="5" y="{:.1}" font-size="11">{y0:.1}</text>"#, SVG_H - MARGIN).unwrap();
    for (k, (name, colour, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = xs.iter().zip(ys).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(s, r#"<polyline data-series="{name}" points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, pts.join(" ")).unwrap();
        let ly = MARGIN + 14.0 * k as f64;
        writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" font-size="11" fill="{colour}">{name}</text>"#, SVG_W - MARGIN - 70.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    (lo, hi)
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, EvalError> {
    std::fs::write(&path, contents).map_err(|source| EvalError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes the CSV tables and one SVG per decomposed engine into `dir`.
pub fn render_report(report: &EvaluationReport, decompositions: &[Vec<DecompositionRow>], dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir).map_err(|source| EvalError::Io { path: dir.to_path_buf(), source })?;
    let mut written = vec![
        write_file(dir.join("mae.csv"), &report.mae_csv())?,
        write_file(dir.join("ttests.csv"), &report.ttests_csv())?,
        write_file(dir.join("variance_explained.csv"), &report.variance_csv())?,
        write_file(dir.join("coefficients.csv"), &report.coefficients_csv())?,
    ];
    for rows in decompositions {
        let Some(first) = rows.first() else { continue };
        let path = dir.join(format!("decomposition_engine_{}.svg", first.engine_id));
        written.push(write_file(path, &decomposition_svg(rows, &report.config_hash))?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::senn::Decomposition;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn t_test_identical_and_constructed() {
        let a = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));

        // differences with mean 1 and sample SD exactly 1, n = 100
        let n = 100;
        let d: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 + 0.99f64.sqrt() * 1.0 } else { 1.0 - 0.99f64.sqrt() }).collect();
        let zeros = vec![0.0; n];
        let r = paired_t_test(&d, &zeros).unwrap();
        assert!((r.t - 10.0).abs() < 1e-10, "{}", r.t);
        assert!(r.p < 1e-15);
    }

    #[test]
    fn t_test_antisymmetric_and_degenerate() {
        let a = [1.0, 2.5, 0.3, 4.0, 2.2];
        let b = [0.5, 2.0, 1.0, 3.0, 1.9];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
        let shifted: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert!(matches!(paired_t_test(&shifted, &a), Err(EvalError::Degenerate(_))));
        assert!(paired_t_test(&a[..2], &b[..2]).is_err());
    }

    #[test]
    fn p_value_matches_known_quantiles() {
        // t_{0.975, 10} = 2.228138851986...
        assert!((student_t_two_sided(2.228_138_851_986_274, 10.0) - 0.05).abs() < 1e-12);
        assert!((student_t_two_sided(0.0, 4.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn variance_explained_bounds() {
        let y = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(variance_explained(&y, &y).unwrap(), 1.0);
        let m = [3.75; 4];
        assert!(variance_explained(&m, &y).unwrap().abs() < 1e-15);
        assert!(variance_explained(&[0.0, 0.0, 0.0, 1.0], &y).unwrap() < 1.0);
        assert!(matches!(variance_explained(&y, &[2.0; 4]), Err(EvalError::Degenerate(_))));
    }

    #[test]
    fn standardized_readings_and_ranking() {
        let s = standardize(-33.169, 0.498, 1.0);
        assert!((s.by_sd - -16.518).abs() < 1e-3);
        assert!((s.by_variance - -8.226).abs() < 1e-3);
        assert_eq!(standardize(0.0, 2.0, 3.0).by_sd, 0.0);

        let post = vec![
            PosteriorRow { name: "a".into(), mean: 5.0, sd: 0.1 },
            PosteriorRow { name: "beta.s2".into(), mean: 1.0, sd: 0.5 },
            PosteriorRow { name: "beta.s3".into(), mean: -4.0, sd: 0.5 },
            PosteriorRow { name: "beta.s4".into(), mean: 2.0, sd: 2.0 },
        ];
        let y = [1.0, 2.0, 3.0];
        let ranked: Vec<String> = standardized_coefficients(&post, &y).unwrap().into_iter().map(|r| r.name).collect();
        assert_eq!(ranked, ["s4", "s3", "s2"]);
        let y10: Vec<f64> = y.iter().map(|v| v * 10.0).collect();
        let again: Vec<String> = standardized_coefficients(&post, &y10).unwrap().into_iter().map(|r| r.name).collect();
        assert_eq!(ranked, again);
    }

    fn flat_rows(id: u32, n: u32) -> Vec<DecompositionRow> {
        (1..=n)
            .map(|c| DecompositionRow { engine_id: id, cycle: c, parts: Decomposition::new(50.0, 2.0, -1.0), true_rul: 51.0 })
            .collect()
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = EvaluationReport::new("abc", vec![], vec![]).unwrap();
        let csv = r.mae_csv();
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(), ["Method,MAE,t,p"]);
    }

    #[test]
    fn mae_table_layout_and_determinism() {
        let mut r = EvaluationReport::new("h", vec![1, 2, 3, 4], vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        r.add_model("empirical", vec![30.0, 30.0, 30.0, 30.0]).unwrap();
        r.add_model("senn", vec![12.0, 19.0, 33.0, 38.0]).unwrap();
        r.reference = Some("senn".into());
        let csv = r.mae_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash=h");
        assert_eq!(lines[1], "Method,MAE,t,p");
        assert!(lines[2].starts_with("empirical,10.000,"));
        assert_eq!(lines[3], "senn,2.000,,");
        assert_eq!(csv, r.mae_csv());
        assert!(r.add_model("senn", vec![0.0; 4]).is_err());
        assert_eq!(r.pairwise_tests().len(), 1);
    }

    #[test]
    fn svg_flat_series() {
        let svg = decomposition_svg(&flat_rows(7, 5), "h");
        assert_eq!(svg.matches("<polyline data-series").count(), 5);
        assert!(svg.contains("engine 7"));
        assert_eq!(svg, decomposition_svg(&flat_rows(7, 5), "h"));
        // each constant series is drawn at a single height
        for line in svg.lines().filter(|l| l.contains("data-series")) {
            let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
            let ys: std::collections::BTreeSet<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
            assert_eq!(ys.len(), 1);
        }
    }

    #[test]
    fn render_writes_files() {
        let dir = std::env::temp_dir().join(format!("rulcast_eval_{}", std::process::id()));
        let mut r = EvaluationReport::new("h", vec![1, 2, 3], vec![1.0, 2.0, 3.0]).unwrap();
        r.add_model("m", vec![1.0, 2.0, 4.0]).unwrap();
        let files = render_report(&r, &[flat_rows(3, 4)], &dir).unwrap();
        assert_eq!(files.len(), 5);
        assert!(dir.join("decomposition_engine_3.svg").exists());
        let first = std::fs::read(dir.join("mae.csv")).unwrap();
        render_report(&r, &[flat_rows(3, 4)], &dir).unwrap();
        assert_eq!(first, std::fs::read(dir.join("mae.csv")).unwrap());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
