//! Oracle-equivalence suites run by `verify`.
//!
//! Every suite compares two independent evaluations of the same quantity and
//! reports the worst discrepancy against its tolerance.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::gcd;
use crate::characters::{enumerate_characters, even_primitive_of_order, psibar_chi_half, CharTable, DirichletCharacter};
use crate::gauss_sums::{g_brute, g_formula};
use crate::lvalues::{central_value, central_value_sq, functional_equation_residual, l_value, squarefree_coprime, TwistSpec};
use crate::moments::{empirical_moments, poisson_lhs, poisson_rhs, FamilySpec};
use crate::numerics::QuadratureSettings;
use crate::predictions::{
    eta_dirichlet_oracle, eta_product, h_star_double_sum, h_star_factor, j_symmetry_residual, nondiag_constant,
    nondiag_h_average, orthogonality_average, quartic_closed_form, script_d_series, script_g, script_g_l_factors,
    KCharacters, KEvaluator,
};
use crate::special_functions::{omega, omega1_closed, omega2_closed, omega_contour, phi_default};
use crate::Result;

use super::config::RunConfig;

pub const SUITES: [&str; 9] =
    ["gauss", "poisson", "afe", "funceq", "omega", "euler", "quartic", "orthogonality", "determinism"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Reported but not counted towards the suite verdict.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub informational: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes when `measured ≤ tolerance`; NaN fails.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured <= tolerance, informational: false, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    fn failed(name: &str, err: &crate::Error) -> Self {
        Self { name: name.into(), measured: f64::NAN, tolerance: 0.0, passed: false, informational: false, detail: err.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteResult {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        Self { suite: suite.into(), passed: checks.iter().all(|c| c.passed || c.informational), checks }
    }
}

fn quartic17() -> DirichletCharacter {
    even_primitive_of_order(17, 4).expect("mod 17 has an even quartic character")
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

/// G_formula against the brute-force sum for odd s ≤ `s_max`, |k| ≤ `k_max`.
/// Measured is `max |Δ|/s`.
pub fn gauss_suite(cfg: &RunConfig, s_max: u64, k_max: i64) -> SuiteResult {
    let corrupt = cfg.inject_fault.as_deref() == Some("gauss");
    let worst: Vec<(f64, u64, i64)> = (1..=s_max)
        .into_par_iter()
        .filter(|s| s % 2 == 1)
        .map(|s| {
            let mut w = (0.0, s, 0);
            for k in -k_max..=k_max {
                let mut f = g_formula(k, s);
                if corrupt && s == 3 && k == 1 {
                    f += 1.0;
                }
                let e = (Complex64::new(f, 0.0) - g_brute(k, s)).norm() / s as f64;
                if e > w.0 {
                    w = (e, s, k);
                }
            }
            w
        })
        .collect();
    let (e, s, k) = worst.into_iter().fold((0.0, 1, 0), |a, b| if b.0 > a.0 { b } else { a });
    let pairs = s_max.div_ceil(2) * (2 * k_max as u64 + 1);
    let check = Check::at_most("G_formula vs G_brute, max |diff|/s", e, cfg.tol("gauss"))
        .with_detail(format!("{pairs} pairs; worst at s = {s}, k = {k}"));
    SuiteResult::new("gauss", vec![check])
}

/// (s, r, h, X, Y). Squares and non-squares; even r always prunes α = 2 and
/// r = 10 with Y ≥ 5 also prunes α = 5.
pub const POISSON_TUPLES: [(u64, u64, u64, f64, f64); 12] = [
    (1, 2, 1, 60.0, 6.0),
    (3, 2, 1, 50.0, 7.0),
    (9, 2, 1, 80.0, 5.0),
    (15, 2, 1, 100.0, 4.0),
    (1, 10, 3, 120.0, 5.0),
    (3, 10, 1, 150.0, 6.0),
    (9, 10, 3, 120.0, 5.0),
    (7, 10, 7, 200.0, 5.0),
    (1, 34, 1, 300.0, 5.0),
    (15, 34, 3, 200.0, 3.0),
    (25, 34, 5, 300.0, 4.0),
    (9, 34, 9, 250.0, 4.0),
];

pub fn poisson_suite(cfg: &RunConfig) -> SuiteResult {
    let phi = phi_default();
    let set = QuadratureSettings::default();
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &(s, r, h, x, y) in &POISSON_TUPLES {
        let lhs = poisson_lhs(h, r, x, y, s, &phi);
        let rhs = match poisson_rhs(h, r, x, y, s, &phi, set) {
            Ok(v) => v,
            Err(e) => return SuiteResult::new("poisson", vec![Check::failed("Poisson LHS vs RHS", &e)]),
        };
        let e = (lhs - rhs).abs() / (1.0 + lhs.abs());
        if e > worst || at.is_empty() {
            worst = worst.max(e);
            at = format!("s = {s}, r = {r}, h = {h}, X = {x}, Y = {y}");
        }
    }
    let check = Check::at_most("Poisson |LHS − RHS|/(1+|LHS|)", worst, cfg.tol("poisson"))
        .with_detail(format!("{} tuples; worst at {at}", POISSON_TUPLES.len()));
    SuiteResult::new("poisson", vec![check])
}

/// The first `count` squarefree d ≤ 500 coprime to 2q.
pub fn afe_discriminants(q: u64, count: usize) -> Vec<u64> {
    (1..=500u64).filter(|&d| squarefree_coprime(d, q) && gcd(d, 2) == 1).take(count).collect()
}

pub fn afe_suite(cfg: &RunConfig) -> SuiteResult {
    let psi = quartic17();
    let ds = afe_discriminants(17, 50);
    let rows: Vec<Result<(f64, f64)>> = ds
        .par_iter()
        .map(|&d| {
            let spec = TwistSpec::new(psi.clone(), d)?;
            let afe = central_value(&spec)?;
            let oracle = l_value(&spec.twist_table(), Complex64::new(0.5, 0.0))?;
            let sq = central_value_sq(&spec)?;
            Ok((rel(afe, oracle), (sq - afe.norm_sqr()).abs() / sq))
        })
        .collect();
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    for row in rows {
        match row {
            Ok((x, y)) => {
                a = a.max(x);
                b = b.max(y);
            }
            Err(e) => return SuiteResult::new("afe", vec![Check::failed("AFE vs Hurwitz", &e)]),
        }
    }
    let detail = format!("{} squarefree d ≤ {}", ds.len(), ds.last().copied().unwrap_or(0));
    SuiteResult::new(
        "afe",
        vec![
            Check::at_most("AFE vs Hurwitz, relative", a, cfg.tol("afe")).with_detail(detail),
            Check::at_most("|L|² route vs |L|², relative", b, cfg.tol("afe_sq")),
        ],
    )
}

/// 20 primitive even characters of modulus ≤ 200, spread evenly over the list.
pub fn funceq_characters() -> Vec<DirichletCharacter> {
    let all: Vec<DirichletCharacter> = (3..=200u64)
        .flat_map(enumerate_characters)
        .filter(|c| {
            let k = c.classify();
            k.is_even && k.is_primitive && k.order > 1
        })
        .collect();
    (0..20).map(|i| all[i * all.len() / 20].clone()).collect()
}

pub const FUNCEQ_POINTS: [(f64, f64); 5] = [(0.3, 0.7), (0.5, 10.0), (0.8, -3.0), (2.0, 1.0), (-0.5, 2.0)];

pub fn funceq_suite(cfg: &RunConfig) -> SuiteResult {
    let chars = funceq_characters();
    let mut worst = 0.0f64;
    let mut at = String::new();
    for chi in &chars {
        let t = chi.table();
        for &(x, y) in &FUNCEQ_POINTS {
            match functional_equation_residual(&t, Complex64::new(x, y)) {
                Ok(e) => {
                    if e > worst || at.is_empty() {
                        worst = worst.max(e);
                        at = format!("{} at s = {x}{y:+}i", chi.label());
                    }
                }
                Err(e) => return SuiteResult::new("funceq", vec![Check::failed("functional equation", &e)]),
            }
        }
    }
    let check = Check::at_most("functional equation residual", worst, cfg.tol("funceq"))
        .with_detail(format!("{} characters × {} points; worst {at}", chars.len(), FUNCEQ_POINTS.len()));
    SuiteResult::new("funceq", vec![check])
}

pub fn omega_suite(cfg: &RunConfig) -> SuiteResult {
    let mut checks = vec![];
    for j in [1u32, 2] {
        let name = format!("|ω_{j}(1e-6) − 1|");
        let closed = if j == 1 { omega1_closed(1e-6) } else { omega2_closed(1e-6) };
        match omega(j, 1e-6) {
            Ok(v) => {
                // 1 − ω_j(ξ) ~ c_j ξ^{1/2}, so this target is out of reach at ξ = 1e-6
                checks.push(
                    Check::at_most(&name, (v.value - 1.0).norm(), cfg.tol("omega_small"))
                        .with_detail("1 − ω_j(ξ) decays like ξ^{1/2}".into())
                        .informational(),
                );
                checks.push(Check::at_most(
                    &format!("ω_{j}(1e-6) contour vs closed form"),
                    (v.value - closed).norm(),
                    cfg.tol("omega_closed"),
                ));
            }
            Err(e) => checks.push(Check::failed(&name, &e)),
        }
    }
    checks.push(match omega(1, 30.0) {
        Ok(v) => Check::at_most("|ω_1(30)|", v.value.norm(), cfg.tol("omega_large")),
        Err(e) => Check::failed("|ω_1(30)|", &e),
    });
    let set = QuadratureSettings::default();
    let mut worst = 0.0f64;
    for j in [1u32, 2] {
        for xi in [0.05, 0.5, 1.0, 3.0] {
            let pair = omega_contour(j, xi, 1.0, set).and_then(|a| Ok((a, omega_contour(j, xi, 2.0, set)?)));
            match pair {
                Ok((a, b)) => worst = worst.max((a.value - b.value).norm()),
                Err(e) => {
                    checks.push(Check::failed("contour shift c=1 vs c=2", &e));
                    return SuiteResult::new("omega", checks);
                }
            }
        }
    }
    checks.push(Check::at_most("contour shift c=1 vs c=2", worst, cfg.tol("omega_shift")));
    SuiteResult::new("omega", checks)
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// η, K, H* and 𝒢 against independent series.
pub fn euler_suite(cfg: &RunConfig) -> SuiteResult {
    let mut checks = vec![];
    let psi = quartic17();
    let t = psi.table();

    let eta = eta_product(&t, c(1.5), 1, 34)
        .and_then(|e| Ok((e.value, eta_dirichlet_oracle(&t, 1.5, 1, 34, 1_000_000)?)));
    checks.push(match eta {
        Ok((a, b)) => Check::at_most("η product vs Dirichlet series at s = 1.5", rel(a, b), cfg.tol("eta")),
        Err(e) => Check::failed("η", &e),
    });

    let k = KEvaluator::new(&t, 1, 34, crate::predictions::NondiagPhase::Derived).and_then(|k| {
        let closed = k.k_certified(c(0.25))?.value;
        let resummed = k.k_alpha_sum_resummed(c(0.25), 100_000)?;
        let plain = k.k_alpha_sum(c(0.25), 100_000)?;
        Ok((closed, resummed, plain))
    });
    checks.push(match k {
        Ok((closed, resummed, plain)) => {
            Check::at_most("K closed form vs α-sum at s = 0.25", rel(resummed, closed), cfg.tol("k_alpha"))
                .with_detail(format!("α ≤ 1e5 with Möbius resummation; unresummed sum differs by {:.2e}", rel(plain, closed)))
        }
        Err(e) => Check::failed("K", &e),
    });

    let kc = KCharacters::new(&t, crate::predictions::NondiagPhase::Derived);
    let mut worst = 0.0f64;
    for p in [3u64, 5, 7, 11, 13] {
        for s in [c(0.3), Complex64::new(0.25, 2.0)] {
            match h_star_factor(&kc, p, s, 1, 34, 1) {
                Ok(closed) => worst = worst.max((closed - h_star_double_sum(&kc, p, s, 0, 90, 60)).norm()),
                Err(e) => {
                    checks.push(Check::failed("H*", &e));
                    return SuiteResult::new("euler", checks);
                }
            }
        }
    }
    checks.push(
        Check::at_most("H* closed form vs double sum", worst, cfg.tol("h_star"))
            .with_detail("p ∈ {3, 5, 7, 11, 13}, s ∈ {0.3, 0.25+2i}, γ ≤ 90, β ≤ 60".into()),
    );

    let phi = match psibar_chi_half(&psi, 34) {
        Ok(b) => CharTable::principal(34).mul(&b.table()),
        Err(e) => {
            checks.push(Check::failed("𝒢", &e));
            return SuiteResult::new("euler", checks);
        }
    };
    let mut worst = 0.0f64;
    for (k, l, alpha) in [(3i64, 1u64, 1u64), (7, 3, 5)] {
        let s = c(1.6);
        let v = script_g(&t, &phi, s, k, l, 34, alpha).and_then(|g| {
            let lf = script_g_l_factors(&t, &phi, s, k, 34)?;
            Ok((g.value * lf, script_d_series(&t, &phi, 1.6, k, l, 34, alpha, 100_000)?))
        });
        match v {
            Ok((a, b)) => worst = worst.max(rel(a, b)),
            Err(e) => {
                checks.push(Check::failed("𝒢", &e));
                return SuiteResult::new("euler", checks);
            }
        }
    }
    checks.push(
        Check::at_most("𝒢·L·L vs Dirichlet series at s = 1.6", worst, cfg.tol("script_g"))
            .with_detail("(k, l, α) ∈ {(3, 1, 1), (7, 3, 5)}, n ≤ 1e5".into()),
    );
    SuiteResult::new("euler", checks)
}

fn quartic_spec() -> Result<FamilySpec> {
    FamilySpec::new(quartic17(), 34, 1, 1, 65536.0, 4.0, 0.01)
}

pub fn quartic_suite(cfg: &RunConfig) -> SuiteResult {
    let phi = phi_default();
    let mut checks = vec![];
    let v = quartic_spec().and_then(|spec| {
        let n = nondiag_constant(&spec, &phi, &cfg.conventions, cfg.contour_c)?;
        let closed = quartic_closed_form(&spec, &phi, &cfg.conventions)?;
        Ok((n, closed))
    });
    checks.push(match v {
        Ok((n, closed)) => Check::at_most(
            "𝒩 quadrature vs quartic residue form, relative",
            (n.value - closed.value).abs() / closed.value.abs(),
            cfg.tol("quartic"),
        )
        .with_detail(format!("𝒩 = {:.10e} vs {:.10e}", n.value, closed.value)),
        Err(e) => Check::failed("quartic cross-check", &e),
    });
    let t = quartic17().table();
    for s in [Complex64::new(0.1, 0.2), c(0.3)] {
        let name = format!("J symmetry at s = {}{:+}i", s.re, s.im);
        checks.push(match j_symmetry_residual(&t, 17, cfg.conventions.nondiag, s) {
            Ok(e) => Check::at_most(&name, e, cfg.tol("j_symmetry")),
            Err(e) => Check::failed(&name, &e),
        });
    }
    SuiteResult::new("quartic", checks)
}

pub fn orthogonality_suite(cfg: &RunConfig) -> SuiteResult {
    let psi = quartic17();
    let mut checks = vec![];
    for m in [1u64, 17] {
        let name = format!("Σ_h ψ̄χ_17(h)(h|{m}), r = 34");
        checks.push(match orthogonality_average(&psi, 34, m) {
            Ok(v) => Check::at_most(&name, v.norm(), cfg.tol("orthogonality")),
            Err(e) => Check::failed(&name, &e),
        });
    }
    let phi = phi_default();
    checks.push(match nondiag_h_average(&psi, 34, 1, &phi, &cfg.conventions, cfg.contour_c) {
        Ok((mean, values)) => {
            let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            Check::at_most("h-average of 𝒩", mean.abs(), cfg.tol("h_average"))
                .with_detail(format!("{} classes h, max |𝒩_h| = {scale:.3e}", values.len()))
        }
        Err(e) => Check::failed("h-average of 𝒩", &e),
    });
    SuiteResult::new("orthogonality", checks)
}

/// The same d-sums and L-values with one worker and with four; the results
/// must agree bit for bit. The counts are fixed so the report body does not
/// depend on the configured worker count.
pub fn determinism_suite(cfg: &RunConfig) -> SuiteResult {
    let run = |n: usize| -> Result<Vec<u64>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            let spec = FamilySpec::new(quartic17(), 34, 1, 1, 8192.0, 3.0, 0.01)?;
            let m = empirical_moments(&spec, &phi_default())?;
            let l = l_value(&TwistSpec::new(quartic17(), 101)?.twist_table(), c(0.5))?;
            Ok(vec![m.first.re.to_bits(), m.first.im.to_bits(), m.second.to_bits(), l.re.to_bits(), l.im.to_bits()])
        })
    };
    let check = match run(1).and_then(|a| Ok((a, run(4)?))) {
        Ok((a, b)) => {
            let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            Check::at_most("bitwise differences between worker counts", diff as f64, cfg.tol("determinism"))
                .with_detail("1 vs 4 workers".into())
        }
        Err(e) => Check::failed("determinism", &e),
    };
    SuiteResult::new("determinism", vec![check])
}

/// Runs one named suite.
pub fn run_suite(cfg: &RunConfig, name: &str) -> SuiteResult {
    let mut r = match name {
        "gauss" => gauss_suite(cfg, 1500, 60),
        "poisson" => poisson_suite(cfg),
        "afe" => afe_suite(cfg),
        "funceq" => funceq_suite(cfg),
        "omega" => omega_suite(cfg),
        "euler" => euler_suite(cfg),
        "quartic" => quartic_suite(cfg),
        "orthogonality" => orthogonality_suite(cfg),
        "determinism" => determinism_suite(cfg),
        _ => SuiteResult::new(name, vec![Check::failed(name, &crate::Error::Config(format!("unknown suite {name}")))]),
    };
    // the gauss hook corrupts an input case; elsewhere the first check is spoiled
    if name != "gauss" && cfg.inject_fault.as_deref() == Some(name) {
        if let Some(c) = r.checks.first_mut() {
            c.measured = f64::INFINITY;
            c.passed = false;
            c.detail = "fault injected".into();
        }
        r.passed = false;
    }
    r
}

/// All suites in order, with wall-clock seconds kept apart from the results.
pub fn run_all(cfg: &RunConfig) -> (Vec<SuiteResult>, Vec<(String, f64)>) {
    let mut results = vec![];
    let mut timings = vec![];
    for name in SUITES {
        let t0 = Instant::now();
        results.push(run_suite(cfg, name));
        timings.push((name.to_string(), t0.elapsed().as_secs_f64()));
    }
    (results, timings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_tuples_cover_the_required_shapes() {
        let squares = POISSON_TUPLES.iter().filter(|t| [1, 9, 25, 49].contains(&t.0)).count();
        assert!(squares >= 3 && POISSON_TUPLES.len() - squares >= 3);
        for r in [2, 10, 34] {
            assert!(POISSON_TUPLES.iter().any(|t| t.1 == r));
        }
        // α = 5 is pruned at r = 10 since (25, 10) = 5 ∤ h
        assert!(POISSON_TUPLES.iter().any(|t| t.1 == 10 && t.4 >= 5.0 && t.2 % 5 != 0));
    }

    #[test]
    fn discriminant_and_character_selection() {
        let ds = afe_discriminants(17, 50);
        assert_eq!(ds.len(), 50);
        assert!(ds.iter().all(|&d| d <= 500 && d % 2 == 1 && d % 17 != 0));
        let chars = funceq_characters();
        assert_eq!(chars.len(), 20);
        assert!(chars.iter().all(|c| c.group().modulus() <= 200));
    }

    #[test]
    fn small_gauss_suite_and_fault_hook() {
        let mut cfg = RunConfig::default();
        assert!(gauss_suite(&cfg, 31, 10).passed);
        cfg.inject_fault = Some("gauss".into());
        let r = gauss_suite(&cfg, 31, 10);
        assert!(!r.passed);
        assert!(r.checks[0].detail.contains("s = 3, k = 1"));
    }

    #[test]
    fn tolerance_override_is_honoured() {
        let mut cfg = RunConfig::default();
        cfg.set("tol.funceq", "0").unwrap();
        assert!(!funceq_suite(&cfg).passed);
    }

    #[test]
    fn unknown_suite_fails() {
        assert!(!run_suite(&RunConfig::default(), "nope").passed);
    }
}
