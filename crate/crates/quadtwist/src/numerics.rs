//! Summation, quadrature and differentiation helpers shared by the numeric modules.
//!
//! Parallel sums split the index range into fixed-size chunks and combine the
//! chunk totals serially in index order, so the result does not depend on how
//! many worker threads rayon uses.

use std::collections::HashMap;
use std::ops::{Add, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

/// Kahan-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Compensated<T> {
    sum: T,
    comp: T,
}

impl<T> Compensated<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum
    }
}

/// Chunk length used by every deterministic parallel sum.
pub const CHUNK: usize = 256;

/// Sum `f(i)` for `i in 0..n` with a reduction tree that is fixed by `n` alone.
pub fn det_sum<T, F>(n: usize, f: F) -> T
where
    T: Copy + Default + Send + Add<Output = T> + Sub<Output = T>,
    F: Fn(usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Compensated::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                acc.add(f(i));
            }
            acc.value()
        })
        .collect();
    let mut acc = Compensated::new();
    for p in partial {
        acc.add(p);
    }
    acc.value()
}

/// Serial compensated sum of an iterator.
pub fn kahan_sum<T, I>(it: I) -> T
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
    I: IntoIterator<Item = T>,
{
    let mut acc = Compensated::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

static RULES: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();

/// Cached rule of the given degree.
pub fn gl_rule(deg: usize) -> Arc<GlRule> {
    let map = RULES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("rule cache poisoned");
    guard
        .entry(deg)
        .or_insert_with(|| {
            let quad = GaussLegendre::new(deg).expect("degree >= 2");
            let (nodes, weights): (Vec<f64>, Vec<f64>) =
                quad.into_iter().map(|(x, w)| (x, w)).unzip();
            Arc::new(GlRule { nodes, weights })
        })
        .clone()
}

/// Composite Gauss–Legendre over `panels` equal panels of [a, b].
pub fn panel_integrate<T, F>(a: f64, b: f64, panels: usize, deg: usize, f: F) -> T
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(f64) -> T,
{
    let rule = gl_rule(deg);
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut acc = Compensated::new();
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc.add(f(mid + half * x) * (w * half));
        }
    }
    acc.value()
}

/// A quadrature value with the difference between two refinement levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
}

/// Tolerances shared by the vertical-line and transform integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSettings {
    pub tol_rel: f64,
    pub max_refinements: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { tol_rel: 1e-12, max_refinements: 20 }
    }
}

/// A vertical segment `c + it`, `|t| <= height`, cut into unit panels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub c: f64,
    pub height: f64,
    pub nodes_per_unit: usize,
}

/// `(1/2πi) ∫ f(s) ds` along the contour, refining the node count until two
/// levels agree. With `symmetric` the integrand is assumed to satisfy
/// `f(conj s) = conj f(s)` and only the upper half is sampled.
pub fn vertical_integral<F>(
    spec: ContourSpec,
    symmetric: bool,
    settings: QuadratureSettings,
    f: F,
) -> Result<QuadratureResult>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    vertical_integral_floor(spec, symmetric, settings, 1e-15, f)
}

/// As [`vertical_integral`], accepting once two levels differ by less than
/// `abs_floor`. Needed when the integrand is much larger than the integral.
pub fn vertical_integral_floor<F>(
    spec: ContourSpec,
    symmetric: bool,
    settings: QuadratureSettings,
    abs_floor: f64,
    f: F,
) -> Result<QuadratureResult>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let panels = spec.height.ceil().max(1.0) as usize;
    let eval = |deg: usize| -> Complex64 {
        let rule = gl_rule(deg);
        let per_panel = |p: usize, sign: f64| -> Complex64 {
            let mut acc = Compensated::new();
            let mid = p as f64 + 0.5;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let t = sign * (mid + 0.5 * x);
                acc.add(f(Complex64::new(spec.c, t)) * (0.5 * w));
            }
            acc.value()
        };
        let upper: Complex64 = det_sum(panels, |p| per_panel(p, 1.0));
        // ds = i dt, so (1/2πi) ∫ f ds = (1/2π) ∫ f dt
        if symmetric {
            Complex64::new(upper.re / std::f64::consts::PI, 0.0)
        } else {
            let lower: Complex64 = det_sum(panels, |p| per_panel(p, -1.0));
            (upper + lower) / (2.0 * std::f64::consts::PI)
        }
    };
    let mut deg = spec.nodes_per_unit.max(4);
    let mut prev = eval(deg);
    for _ in 0..settings.max_refinements {
        deg *= 2;
        let next = eval(deg);
        let err = (next - prev).norm();
        if err <= settings.tol_rel * next.norm().max(1e-300) || err < abs_floor {
            return Ok(QuadratureResult { value: next, error_estimate: err });
        }
        prev = next;
        if deg > 512 {
            break;
        }
    }
    Err(Error::Quadrature(format!(
        "vertical line Re s = {} did not settle at {} nodes per unit",
        spec.c, deg
    )))
}

/// Central-difference derivative at 0 with steps 1e-2 and 1e-3 and one
/// Richardson level. A second extrapolation from steps 5e-3 and 1e-3 serves as
/// the consistency check; the call fails when the two disagree by more than
/// `tol` relative to the scale of `f`.
pub fn richardson_derivative<F>(f: F, tol: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let d = |h: f64| -> Result<Complex64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let extrapolate = |hc: f64, dc: Complex64, hf: f64, df: Complex64| {
        let ratio = (hc / hf).powi(2);
        (df * ratio - dc) / (ratio - 1.0)
    };
    let fine = d(1e-3)?;
    let rich = extrapolate(1e-2, d(1e-2)?, 1e-3, fine);
    let check = extrapolate(5e-3, d(5e-3)?, 1e-3, fine);
    let scale = f(0.0)?.norm().max(rich.norm()).max(1.0);
    let gap = (rich - check).norm() / scale;
    if gap > tol {
        return Err(Error::FiniteDifference(gap));
    }
    Ok(rich)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let v: f64 = panel_integrate(0.0, 2.0, 3, 8, |x| x.powi(7));
        assert!((v - 32.0).abs() < 1e-12);
    }

    #[test]
    fn det_sum_is_order_fixed() {
        let f = |i: usize| 1.0 / (1.0 + i as f64).powf(1.3);
        let a: f64 = det_sum(100_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b: f64 = pool.install(|| det_sum(100_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn vertical_line_recovers_residue() {
        // (1/2πi)∫ e^{s²} x^{-s} ds/s on Re s = 1 for x = 1 equals 1/2 + small
        let r = vertical_integral(
            ContourSpec { c: 1.0, height: 12.0, nodes_per_unit: 8 },
            true,
            QuadratureSettings::default(),
            |s| (s * s).exp() / s,
        )
        .unwrap();
        // the integral equals 1/2 by symmetry of e^{s²}/s about the imaginary axis
        assert!((r.value.re - 0.5).abs() < 1e-12, "{:?}", r);
    }

    #[test]
    fn richardson_on_smooth_function() {
        let d = richardson_derivative(|x| Ok(Complex64::new((2.0 * x).sin(), x.exp())), 1e-7)
            .unwrap();
        assert!((d.re - 2.0).abs() < 1e-9 && (d.im - 1.0).abs() < 1e-9);
    }
}
