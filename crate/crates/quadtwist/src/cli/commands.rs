//! The six commands. Each returns an [`Outcome`]; nothing here touches files.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::characters::DirichletCharacter;
use crate::lvalues::{central_value, central_value_sq, l_value, TwistSpec};
use crate::moments::{empirical_moments, FamilySpec, MomentReport};
use crate::predictions::{
    first_moment_constant, first_moment_poly_trivial, nondiag_constant, second_moment_diag_poly, MainTerm,
    MainTermPolynomial, NamedValue, NondiagTerm,
};
use crate::special_functions::phi_default;
use crate::{Error, Result};

use super::config::{Command, RunConfig};
use super::suites::{self, Check, SuiteResult};

/// Rows for the CSV companion file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub results: Value,
    pub csv: CsvTable,
    /// Wall-clock seconds per stage; runtime metadata only.
    pub timings: Vec<(String, f64)>,
    /// One line per row for the terminal.
    pub summary: Vec<String>,
}

fn family(cfg: &RunConfig, psi: &DirichletCharacter, x: f64) -> Result<FamilySpec> {
    FamilySpec::new(psi.clone(), cfg.r, cfg.h, cfg.l, x, cfg.y.at(x), cfg.delta)
}

fn to_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn lvalue(cfg: &RunConfig) -> Result<Outcome> {
    let psi = cfg.character()?;
    let tol = cfg.tol("afe");
    let mut csv = CsvTable::new(&["d", "conductor", "afe_re", "afe_im", "hurwitz_re", "hurwitz_im", "rel_diff", "abs_sq"]);
    let mut rows = vec![];
    let mut summary = vec![];
    let mut passed = true;
    for &d in &cfg.d {
        let spec = TwistSpec::new(psi.clone(), d)?;
        let afe = central_value(&spec)?;
        let oracle = l_value(&spec.twist_table(), Complex64::new(0.5, 0.0))?;
        let sq = central_value_sq(&spec)?;
        let rel = (afe - oracle).norm() / oracle.norm();
        passed &= rel <= tol;
        csv.rows.push(vec![
            d.to_string(),
            spec.conductor().to_string(),
            afe.re.to_string(),
            afe.im.to_string(),
            oracle.re.to_string(),
            oracle.im.to_string(),
            rel.to_string(),
            sq.to_string(),
        ]);
        summary.push(format!("d = {d}: L(1/2) = {afe:.12} (Hurwitz rel. diff {rel:.2e}), |L|² = {sq:.12}"));
        rows.push(json!({
            "d": d,
            "conductor": spec.conductor(),
            "root_number": to_pair(spec.root_number()?),
            "afe": to_pair(afe),
            "hurwitz": to_pair(oracle),
            "relative_difference": rel,
            "abs_sq": sq,
        }));
    }
    Ok(Outcome { passed, results: json!({ "values": rows, "tolerance": tol }), csv, timings: vec![], summary })
}

/// Main terms of one family (they do not depend on X).
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyPrediction {
    pub first: Option<MainTerm>,
    pub second_diag: Option<MainTerm>,
    pub nondiag: Option<NondiagTerm>,
}

impl FamilyPrediction {
    pub fn first_polynomial(&self) -> Option<MainTermPolynomial> {
        self.first.as_ref().map(|m| m.polynomial.clone())
    }

    /// `𝒫(log X)`: the diagonal polynomial plus the non-diagonal constant.
    pub fn second_polynomial(&self) -> Option<MainTermPolynomial> {
        let diag = self.second_diag.as_ref()?;
        let nd = self.nondiag.as_ref()?;
        Some(diag.polynomial.add(&MainTermPolynomial::constant(Complex64::new(nd.value, 0.0))))
    }
}

/// `c0 + c1·log X`, dropping imaginary parts at rounding level.
fn show_poly(coeffs: &[Complex64]) -> String {
    let show = |z: &Complex64| {
        if z.im.abs() <= 1e-14 * z.re.abs().max(1e-300) {
            format!("{:.10e}", z.re)
        } else {
            format!("({:.10e} {:+.10e}i)", z.re, z.im)
        }
    };
    match coeffs {
        [c0] => show(c0),
        [c0, c1] => format!("{} + {}·log X", show(c0), show(c1)),
        _ => coeffs.iter().map(show).collect::<Vec<_>>().join(", "),
    }
}

pub fn predict_family(cfg: &RunConfig, spec: &FamilySpec, first: bool, second: bool) -> Result<FamilyPrediction> {
    let phi = phi_default();
    let quadratic = spec.psi.table().pow(2).is_principal();
    let first = if !first {
        None
    } else if spec.q() == 1 {
        Some(first_moment_poly_trivial(spec, &phi)?)
    } else if quadratic {
        return Err(Error::InvalidInput("the first-moment prediction needs q = 1 or non-quadratic ψ".into()));
    } else {
        Some(first_moment_constant(spec, &phi)?)
    };
    let (second_diag, nondiag) = if !second {
        (None, None)
    } else if quadratic {
        return Err(Error::InvalidInput("the second-moment prediction needs non-quadratic ψ".into()));
    } else {
        (
            Some(second_moment_diag_poly(spec, &phi, &cfg.conventions)?),
            Some(nondiag_constant(spec, &phi, &cfg.conventions, cfg.contour_c)?),
        )
    };
    Ok(FamilyPrediction { first, second_diag, nondiag })
}

fn poly_json(p: &MainTermPolynomial) -> Value {
    json!({ "degree": p.degree, "coefficients": p.coefficients.iter().map(|c| to_pair(*c)).collect::<Vec<_>>() })
}

fn components_csv(csv: &mut CsvTable, term: &str, comps: &[NamedValue]) {
    for c in comps {
        csv.rows.push(vec![
            term.to_string(),
            c.name.clone(),
            c.value[0].to_string(),
            c.value[1].to_string(),
            c.tail_estimate.map(|t| t.to_string()).unwrap_or_default(),
            c.cutoff.map(|t| t.to_string()).unwrap_or_default(),
        ]);
    }
}

pub fn predict(cfg: &RunConfig) -> Result<Outcome> {
    let psi = cfg.character()?;
    let spec = family(cfg, &psi, cfg.x_sweep[0])?;
    let t0 = std::time::Instant::now();
    let pred = predict_family(cfg, &spec, cfg.moment.first(), cfg.moment.second())?;
    let mut csv = CsvTable::new(&["term", "name", "re", "im", "tail_estimate", "cutoff"]);
    let mut results = serde_json::Map::new();
    let mut summary = vec![];
    if let Some(m) = &pred.first {
        results.insert("first_moment".into(), json!({ "polynomial": poly_json(&m.polynomial), "components": m.components }));
        components_csv(&mut csv, "first", &m.components);
        summary.push(format!("first moment: {}", show_poly(&m.polynomial.coefficients)));
    }
    if let (Some(d), Some(n)) = (&pred.second_diag, &pred.nondiag) {
        let total = pred.second_polynomial().expect("both parts present");
        results.insert(
            "second_moment".into(),
            json!({
                "polynomial": poly_json(&total),
                "diagonal": { "polynomial": poly_json(&d.polynomial), "components": d.components },
                "nondiagonal": {
                    "value": n.value,
                    "integral": to_pair(n.integral),
                    "quadrature_error": n.quadrature_error,
                    "components": n.components,
                },
            }),
        );
        components_csv(&mut csv, "second_diagonal", &d.components);
        components_csv(&mut csv, "nondiagonal", &n.components);
        summary.push(format!("second moment: diagonal {}, non-diagonal {:.10e}", show_poly(&d.polynomial.coefficients), n.value));
    }
    Ok(Outcome {
        passed: true,
        results: Value::Object(results),
        csv,
        timings: vec![("predict".into(), t0.elapsed().as_secs_f64())],
        summary,
    })
}

const MOMENT_HEADER: [&str; 17] = [
    "moment", "q", "psi", "r", "h", "l", "X", "Y", "in_regime", "family_size", "empirical_re", "empirical_im",
    "predicted_re", "predicted_im", "residual", "envelope", "residual_over_envelope",
];

fn moment_row(m: &MomentReport) -> Vec<String> {
    vec![
        m.moment.to_string(),
        m.q.to_string(),
        m.psi.clone(),
        m.r.to_string(),
        m.h.to_string(),
        m.l.to_string(),
        m.x.to_string(),
        m.y.to_string(),
        m.in_regime.to_string(),
        m.family_size.to_string(),
        m.empirical[0].to_string(),
        m.empirical[1].to_string(),
        m.predicted[0].to_string(),
        m.predicted[1].to_string(),
        m.residual.to_string(),
        m.envelope.to_string(),
        (m.residual / m.envelope).to_string(),
    ]
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Gating trend checks for one moment's sweep, plus non-gating diagnostics.
///
/// With a vanishing prediction the check is `max |empirical|/envelope` against
/// the allowed constant. Otherwise the residuals over the upper half of the
/// sweep must strictly decrease.
pub fn trend_checks(rows: &[MomentReport], envelope_constant: f64) -> (Vec<Check>, Vec<Check>) {
    let mut rows: Vec<&MomentReport> = rows.iter().collect();
    rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    let Some(first) = rows.first() else { return (vec![], vec![]) };
    let k = first.moment;
    let zero = rows.iter().all(|r| r.predicted_coefficients.iter().all(|c| c[0] == 0.0 && c[1] == 0.0));
    if zero {
        let fitted = rows.iter().map(|r| r.residual / r.envelope).fold(0.0, f64::max);
        let check = Check::at_most(&format!("moment {k}: predicted 0, max |empirical|/envelope"), fitted, envelope_constant);
        return (vec![check], vec![]);
    }
    let upper = &rows[rows.len() / 2..];
    let residuals: Vec<String> = upper.iter().map(|r| format!("{:.3e}", r.residual)).collect();
    let rises = upper.windows(2).filter(|w| !(w[1].residual < w[0].residual)).count();
    let gate = Check::at_most(&format!("moment {k}: residual rises in the upper half of the sweep"), rises as f64, 0.0)
        .with_detail(format!("residuals {}", residuals.join(", ")));
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.residual)).collect();
    let whole = log_slope(&pts);
    let diag = vec![
        Check::at_most(&format!("moment {k}: log-log slope of the residual over the sweep"), whole, 0.0),
        Check::at_most(
            &format!("moment {k}: max residual/envelope"),
            rows.iter().map(|r| r.residual / r.envelope).fold(0.0, f64::max),
            envelope_constant,
        ),
    ];
    (vec![gate], diag)
}

/// Empirical moments across the sweep against the predictions.
pub fn moments_sweep(cfg: &RunConfig, first: bool, second: bool) -> Result<(Vec<MomentReport>, FamilyPrediction, Vec<(String, f64)>)> {
    let psi = cfg.character()?;
    let phi = phi_default();
    let mut xs = cfg.x_sweep.clone();
    xs.sort_by(f64::total_cmp);
    let t0 = std::time::Instant::now();
    let pred = predict_family(cfg, &family(cfg, &psi, xs[0])?, first, second)?;
    let mut timings = vec![("predictions".to_string(), t0.elapsed().as_secs_f64())];
    let p1 = pred.first_polynomial();
    let p2 = pred.second_polynomial();
    let mut rows = vec![];
    for &x in &xs {
        let t0 = std::time::Instant::now();
        let spec = family(cfg, &psi, x)?;
        let m = empirical_moments(&spec, &phi)?;
        if let Some(p) = &p1 {
            rows.push(MomentReport::new(1, &spec, m.family_size, m.first, &p.coefficients));
        }
        if let Some(p) = &p2 {
            rows.push(MomentReport::new(2, &spec, m.family_size, Complex64::new(m.second, 0.0), &p.coefficients));
        }
        timings.push((format!("X = {x}"), t0.elapsed().as_secs_f64()));
    }
    Ok((rows, pred, timings))
}

fn moment_outcome(cfg: &RunConfig, first: bool, second: bool, gate: bool) -> Result<Outcome> {
    let (rows, _, timings) = moments_sweep(cfg, first, second)?;
    let mut csv = CsvTable::new(&MOMENT_HEADER);
    let mut summary = vec![];
    for r in &rows {
        csv.rows.push(moment_row(r));
        summary.push(format!(
            "M{} X = {} |F| = {}: empirical {:.6e}{:+.6e}i, predicted {:.6e}{:+.6e}i, residual {:.3e}",
            r.moment, r.x, r.family_size, r.empirical[0], r.empirical[1], r.predicted[0], r.predicted[1], r.residual
        ));
    }
    let mut checks = vec![];
    let mut diagnostics = vec![];
    if gate {
        for k in [1u8, 2] {
            let sel: Vec<MomentReport> = rows.iter().filter(|r| r.moment == k).cloned().collect();
            let (c, d) = trend_checks(&sel, cfg.envelope_constant);
            checks.extend(c);
            diagnostics.extend(d);
        }
        for c in checks.iter().chain(&diagnostics) {
            let tag = if checks.contains(c) { if c.passed { "PASS" } else { "FAIL" } } else { "info" };
            summary.push(format!("{tag} {}: {:.3e} (limit {:.1e}) {}", c.name, c.measured, c.tolerance, c.detail));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    let results = if gate {
        json!({ "rows": rows, "checks": checks, "diagnostics": diagnostics })
    } else {
        json!({ "rows": rows })
    };
    Ok(Outcome { passed, results, csv, timings, summary })
}

pub fn verify(cfg: &RunConfig) -> Outcome {
    let mut results: Vec<SuiteResult> = vec![];
    let mut timings = vec![];
    for name in &cfg.suites {
        let t0 = std::time::Instant::now();
        results.push(suites::run_suite(cfg, name));
        timings.push((name.clone(), t0.elapsed().as_secs_f64()));
    }
    let mut csv = CsvTable::new(&["suite", "check", "measured", "tolerance", "passed"]);
    let mut summary = vec![];
    for s in &results {
        for c in &s.checks {
            csv.rows.push(vec![
                s.suite.clone(),
                c.name.clone(),
                c.measured.to_string(),
                c.tolerance.to_string(),
                c.passed.to_string(),
            ]);
            summary.push(format!(
                "{} [{}] {}: {:.3e} (tolerance {:.1e}) {}",
                if c.passed { "PASS" } else { "FAIL" },
                s.suite,
                c.name,
                c.measured,
                c.tolerance,
                c.detail
            ));
        }
    }
    let first_failure = results.iter().find(|s| !s.passed).map(|s| s.suite.clone());
    let passed = first_failure.is_none();
    Outcome { passed, results: json!({ "suites": results, "first_failure": first_failure }), csv, timings, summary }
}

/// Dispatches on the configured command.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Lvalue => lvalue(cfg),
        Command::Moment1 => moment_outcome(cfg, true, false, false),
        Command::Moment2 => moment_outcome(cfg, false, true, false),
        Command::Predict => predict(cfg),
        Command::Compare => moment_outcome(cfg, cfg.moment.first(), cfg.moment.second(), true),
        Command::Verify => Ok(verify(cfg)),
    }
}

/// The hashed part of a report.
#[derive(Serialize)]
pub struct ReportBody<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub config: &'a RunConfig,
    pub passed: bool,
    pub results: &'a Value,
}

pub fn report_body<'a>(cfg: &'a RunConfig, outcome: &'a Outcome) -> ReportBody<'a> {
    ReportBody {
        tool: "quadtwist",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command,
        config: cfg,
        passed: outcome.passed,
        results: &outcome.results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(x: f64, residual: f64, zero: bool) -> MomentReport {
        MomentReport {
            moment: 1,
            q: 17,
            psi: "17:4".into(),
            r: 34,
            h: 1,
            l: 1,
            x,
            y: 2.0,
            in_regime: false,
            family_size: 10,
            empirical: [residual, 0.0],
            predicted_coefficients: vec![[if zero { 0.0 } else { 1.0 }, 0.0]],
            predicted: [0.0, 0.0],
            residual,
            envelope: 1.0,
        }
    }

    #[test]
    fn upper_half_monotonicity() {
        let good: Vec<_> = [(1.0, 9.0), (2.0, 1.0), (4.0, 3.0), (8.0, 2.0), (16.0, 1.0)].iter().map(|&(x, r)| row(x, r, false)).collect();
        let (c, d) = trend_checks(&good, 10.0);
        assert!(c[0].passed, "{c:?}");
        assert!(d[0].measured < 0.0);
        let bad: Vec<_> = [(1.0, 3.0), (2.0, 2.0), (4.0, 1.0), (8.0, 2.0)].iter().map(|&(x, r)| row(x, r, false)).collect();
        assert!(!trend_checks(&bad, 10.0).0[0].passed);
    }

    #[test]
    fn vanishing_prediction_uses_the_envelope() {
        let rows: Vec<_> = [(1.0, 0.5), (2.0, 3.0)].iter().map(|&(x, r)| row(x, r, true)).collect();
        let (c, _) = trend_checks(&rows, 10.0);
        assert!(c[0].passed && c[0].measured == 3.0);
        assert!(!trend_checks(&rows, 2.0).0[0].passed);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (2f64.powi(i), 2f64.powi(-i) * 3.0)).collect();
        assert!((log_slope(&pts) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn lvalue_command() {
        let mut cfg = RunConfig::default();
        cfg.command = Command::Lvalue;
        cfg.d = vec![3, 5];
        let o = execute(&cfg).unwrap();
        assert!(o.passed);
        assert_eq!(o.csv.rows.len(), 2);
        cfg.d = vec![9];
        assert!(execute(&cfg).is_err());
    }

    #[test]
    fn even_l_compare_uses_vanishing_branch() {
        let mut cfg = RunConfig::default();
        cfg.command = Command::Compare;
        cfg.l = 2;
        cfg.x_sweep = vec![1024.0, 2048.0];
        let o = execute(&cfg).unwrap();
        assert!(o.passed);
        let checks = o.results["checks"].as_array().unwrap();
        assert_eq!(checks.len(), 2);
        assert!(checks.iter().all(|c| c["measured"].as_f64() == Some(0.0)));
    }
}
