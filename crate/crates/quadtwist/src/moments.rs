//! Empirical first and second moments over the families F_{h,r}(ψ), and the
//! Poisson summation identity for sums over a progression.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{self, kronecker, mobius, mobius_truncated, mod_inverse, sieve_family};
use crate::characters::{tau, CharTable, Character, DirichletCharacter};
use crate::gauss_sums::g_formula;
use crate::lvalues::{afe1_length, central_value_with};
use crate::numerics::{det_sum, kahan_sum, Compensated, QuadratureSettings};
use crate::special_functions::{fourier_hat, fourier_hat_fast, TestFunction};
use crate::{Error, Result};

/// The data (ψ, r, h, l, X, Y, δ) defining one moment computation.
#[derive(Clone, Debug)]
pub struct FamilySpec {
    pub psi: DirichletCharacter,
    pub r: u64,
    pub h: u64,
    pub l: u64,
    pub x: f64,
    pub y: f64,
    pub delta: f64,
}

impl FamilySpec {
    pub fn new(psi: DirichletCharacter, r: u64, h: u64, l: u64, x: f64, y: f64, delta: f64) -> Result<Self> {
        let q = psi.modulus();
        if q % 2 == 0 {
            return Err(Error::InvalidInput(format!("q = {q} must be odd")));
        }
        if r == 0 || r % 2 != 0 || mobius(r) == 0 {
            return Err(Error::InvalidInput(format!("r = {r} must be even and squarefree")));
        }
        if r % q != 0 {
            return Err(Error::InvalidInput(format!("q = {q} must divide r = {r}")));
        }
        if h % 2 == 0 || arith::gcd(h, r) != 1 {
            return Err(Error::InvalidInput(format!("h = {h} must be odd and coprime to r = {r}")));
        }
        if l == 0 {
            return Err(Error::InvalidInput("l must be positive".into()));
        }
        if !(x > 1.0 && y >= 1.0) {
            return Err(Error::InvalidInput(format!("need X > 1 and Y ≥ 1, got X = {x}, Y = {y}")));
        }
        let kind = psi.classify();
        if !(kind.is_primitive && kind.is_even) {
            return Err(Error::InvalidInput(format!("ψ = {} must be even and primitive", psi.label())));
        }
        Ok(Self { psi, r, h: h % r, l, x, y, delta })
    }

    pub fn q(&self) -> u64 {
        self.psi.modulus()
    }

    /// Whether `l·r·Y² ≤ X^{1/2−δ}`.
    pub fn in_regime(&self) -> bool {
        self.l as f64 * self.r as f64 * self.y * self.y <= self.x.powf(0.5 - self.delta)
    }

    fn window(&self) -> (u64, u64) {
        (self.x.floor() as u64 + 1, (2.0 * self.x).ceil() as u64)
    }

    /// Squarefree d ≡ h (mod r) with X < d < 2X.
    pub fn members(&self) -> Vec<u64> {
        let (lo, hi) = self.window();
        sieve_family(lo, hi, self.r, self.h).squarefree().collect()
    }

    /// ε(h) = τ(ψ)/√q · ψ(8h) χ_{8h}(q).
    pub fn epsilon(&self) -> Complex64 {
        let q = self.q();
        let t = tau(&self.psi) / (q as f64).sqrt();
        t * self.psi.value(8 * self.h as i64) * f64::from(kronecker(8 * self.h as i64, q as i64))
    }
}

/// The two empirical moments of a family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalMoments {
    pub first: Complex64,
    pub second: f64,
    pub family_size: usize,
}

/// How each d is weighted in a moment sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weighting {
    /// μ²(d): the family itself.
    Squarefree,
    /// M_Y(d) over all d in the progression.
    Truncated(f64),
}

/// Both moments in one pass over the family, each L-value by the first AFE.
pub fn empirical_moments_weighted(
    spec: &FamilySpec,
    phi: &dyn TestFunction,
    weighting: Weighting,
) -> Result<EmpiricalMoments> {
    let q = spec.q();
    let psi = spec.psi.table();
    let eps = spec.epsilon();
    let t = tau(&spec.psi) / (q as f64).sqrt();
    let (lo, hi) = spec.window();
    let window = sieve_family(lo, hi, spec.r, spec.h);
    let ds: Vec<(u64, f64)> = match weighting {
        Weighting::Squarefree => window.squarefree().map(|d| (d, 1.0)).collect(),
        Weighting::Truncated(y) => window
            .members
            .iter()
            .map(|&(d, _)| (d, mobius_truncated(d, y).0 as f64))
            .filter(|&(_, w)| w != 0.0)
            .collect(),
    };
    // ε depends on d only through d mod r
    for &(d, _) in &ds {
        if arith::gcd(d, q) == 1 {
            let e = t * psi.at(8 * d) * f64::from(kronecker(8 * d as i64, q as i64));
            if (e - eps).norm() > 1e-12 {
                return Err(Error::InvalidInput(format!("ε(d) ≠ ε(h) at d = {d}")));
            }
        }
    }
    let terms = |d: u64| afe1_length(8 * d * q);
    let first: Complex64 = det_sum(ds.len(), |i| {
        let (d, w) = ds[i];
        let lk = kronecker(8 * d as i64, spec.l as i64);
        let f = phi.eval(d as f64 / spec.x);
        if lk == 0 || f == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        central_value_with(&psi, d, eps, terms(d)) * (w * f64::from(lk) * f)
    });
    let second: f64 = det_sum(ds.len(), |i| {
        let (d, w) = ds[i];
        let lk = kronecker(8 * d as i64, spec.l as i64);
        let f = phi.eval(d as f64 / spec.x);
        if lk == 0 || f == 0.0 {
            return 0.0;
        }
        central_value_with(&psi, d, eps, terms(d)).norm_sqr() * w * f64::from(lk) * f
    });
    Ok(EmpiricalMoments { first: first / spec.x, second: second / spec.x, family_size: ds.len() })
}

/// As [`empirical_moments_weighted`] with the squarefree weighting, evaluating
/// each central value once.
pub fn empirical_moments(spec: &FamilySpec, phi: &dyn TestFunction) -> Result<EmpiricalMoments> {
    let q = spec.q();
    let psi = spec.psi.table();
    let eps = spec.epsilon();
    let ds = spec.members();
    let t = tau(&spec.psi) / (q as f64).sqrt();
    for &d in &ds {
        let e = t * psi.at(8 * d) * f64::from(kronecker(8 * d as i64, q as i64));
        if (e - eps).norm() > 1e-12 {
            return Err(Error::InvalidInput(format!("ε(d) ≠ ε(h) at d = {d}")));
        }
    }
    let values: Vec<(Complex64, f64)> = {
        let mut v = vec![(Complex64::new(0.0, 0.0), 0.0); ds.len()];
        use rayon::prelude::*;
        v.par_iter_mut().enumerate().for_each(|(i, slot)| {
            let d = ds[i];
            let lk = kronecker(8 * d as i64, spec.l as i64);
            let f = phi.eval(d as f64 / spec.x);
            if lk != 0 && f != 0.0 {
                let l = central_value_with(&psi, d, eps, afe1_length(8 * d * q));
                let w = f64::from(lk) * f;
                *slot = (l * w, l.norm_sqr() * w);
            }
        });
        v
    };
    let first: Complex64 = det_sum(values.len(), |i| values[i].0);
    let second: f64 = det_sum(values.len(), |i| values[i].1);
    Ok(EmpiricalMoments { first: first / spec.x, second: second / spec.x, family_size: ds.len() })
}

pub fn empirical_first_moment(spec: &FamilySpec, phi: &dyn TestFunction) -> Result<Complex64> {
    Ok(empirical_moments(spec, phi)?.first)
}

pub fn empirical_second_moment(spec: &FamilySpec, phi: &dyn TestFunction) -> Result<f64> {
    Ok(empirical_moments(spec, phi)?.second)
}

/// The first-moment error shape `l^{3/2} r Y²/X^{1/2} + l^{1/2}/(r X^{1/4}) + Y^{−1/2}`
/// with unit constant and ε = 0.
pub fn first_moment_envelope(l: u64, r: u64, x: f64, y: f64) -> f64 {
    let (l, r) = (l as f64, r as f64);
    l.powf(1.5) * r * y * y / x.sqrt() + l.sqrt() / (r * x.powf(0.25)) + 1.0 / y.sqrt()
}

/// The second-moment error shape
/// `l^{−1/2}/(r X^{1/2}) + l r² Y/X^{3/8} + 1/Y + 1/(r² Y)` with unit constant and ε = 0.
pub fn second_moment_envelope(l: u64, r: u64, x: f64, y: f64) -> f64 {
    let (l, r) = (l as f64, r as f64);
    1.0 / (l.sqrt() * r * x.sqrt()) + l * r * r * y / x.powf(0.375) + 1.0 / y + 1.0 / (r * r * y)
}

/// One row of a moment comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub moment: u8,
    pub q: u64,
    pub psi: String,
    pub r: u64,
    pub h: u64,
    pub l: u64,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub in_regime: bool,
    pub family_size: usize,
    pub empirical: [f64; 2],
    /// Main-term coefficients in log X, constant first.
    pub predicted_coefficients: Vec<[f64; 2]>,
    pub predicted: [f64; 2],
    pub residual: f64,
    pub envelope: f64,
}

impl MomentReport {
    pub fn new(moment: u8, spec: &FamilySpec, family_size: usize, empirical: Complex64, coefficients: &[Complex64]) -> Self {
        let lx = spec.x.ln();
        let predicted = coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * lx + c);
        let envelope = match moment {
            1 => first_moment_envelope(spec.l, spec.r, spec.x, spec.y),
            _ => second_moment_envelope(spec.l, spec.r, spec.x, spec.y),
        };
        Self {
            moment,
            q: spec.q(),
            psi: spec.psi.label(),
            r: spec.r,
            h: spec.h,
            l: spec.l,
            x: spec.x,
            y: spec.y,
            in_regime: spec.in_regime(),
            family_size,
            empirical: [empirical.re, empirical.im],
            predicted_coefficients: coefficients.iter().map(|c| [c.re, c.im]).collect(),
            predicted: [predicted.re, predicted.im],
            residual: (empirical - predicted).norm(),
            envelope,
        }
    }
}

/// `Σ_{d ≡ h (r)} M_Y(d) (8d|s) F(d/X)` by direct summation over X < d < 2X.
pub fn poisson_lhs(h: u64, r: u64, x: f64, y: f64, s: u64, f: &dyn TestFunction) -> f64 {
    let (a, b) = f.support();
    let lo = (a * x).floor().max(0.0) as u64;
    let hi = (b * x).ceil() as u64 + 1;
    let mut acc = Compensated::new();
    let mut d = lo + (h % r + r - lo % r) % r;
    while d < hi {
        let fv = f.eval(d as f64 / x);
        if fv != 0.0 {
            let k = kronecker(8 * d as i64, s as i64);
            if k != 0 {
                let (my, _) = mobius_truncated(d, y);
                acc.add(my as f64 * f64::from(k) * fv);
            }
        }
        d += r;
    }
    acc.value()
}

/// Smallest x beyond which |F̂| stays below `tol` over three octaves of samples.
/// Targets under the quadrature roundoff floor are never reached and give an error.
pub fn fourier_decay_cutoff(f: &dyn TestFunction, tol: f64) -> Result<f64> {
    let below = |x: f64| (0..48).all(|i| fourier_hat_fast(f, x * 2f64.powf(i as f64 / 16.0)).norm() < tol);
    let mut x = 1.0;
    while !below(x) {
        x *= 1.25;
        if x > 1e4 {
            return Err(Error::Quadrature(format!("F̂ does not fall below {tol:e}")));
        }
    }
    Ok(x)
}

/// The right-hand side of the Poisson identity: a sum over α ≤ min(√(2X), Y)
/// with (α, s) = 1 and (α², r) | h, of Gauss sums G_k(s) against F̂.
pub fn poisson_rhs(
    h: u64,
    r: u64,
    x: f64,
    y: f64,
    s: u64,
    f: &dyn TestFunction,
    settings: QuadratureSettings,
) -> Result<f64> {
    if s % 2 == 0 || arith::gcd(s, r) != 1 {
        return Err(Error::InvalidInput(format!("s = {s} must be odd and coprime to r = {r}")));
    }
    let (a, b) = f.support();
    let mass = (b - a) * kahan_sum((0..64).map(|i| f.eval(a + (i as f64 + 0.5) / 64.0 * (b - a)).abs())) / 64.0;
    // each k contributes at most √2·X/r·|F̂|
    let tol = (1e-13 * r as f64 / x).min(1e-13).max(2e-14 * mass);
    let x_cut = fourier_decay_cutoff(f, tol)?;
    let alpha_max = (2.0 * x).sqrt().min(y).floor() as u64;
    let mut total = Compensated::new();
    for alpha in 1..=alpha_max {
        let mu = mobius(alpha);
        if mu == 0 || arith::gcd(alpha, s) != 1 {
            continue;
        }
        let a2 = alpha * alpha;
        let g = arith::gcd(a2, r);
        if h % g != 0 {
            continue;
        }
        let big_r = r / g;
        let inv_a = mod_inverse(((a2 / g) % big_r) as i64, big_r)?;
        let inv_s = mod_inverse((s % big_r) as i64, big_r)?;
        let hh = (inv_a as u128 * ((h / g) % big_r) as u128 % big_r.max(1) as u128) as u64;
        let shift = hh as u128 * inv_s as u128 % big_r.max(1) as u128;
        let c = g as f64 * x / (a2 as f64 * r as f64 * s as f64);
        let k_max = (x_cut / c).ceil() as i64;
        if k_max > 5_000_000 {
            return Err(Error::TailTooLarge { tail: f64::NAN, target: 1e-10, cutoff: k_max as u64 });
        }
        let mut inner = Compensated::new();
        for k in 0..=k_max {
            let hat = fourier_hat(f, k as f64 * c, settings)?.value;
            for kk in if k == 0 { vec![0] } else { vec![k, -k] } {
                let gk = g_formula(kk, s);
                if gk == 0.0 {
                    continue;
                }
                let fh = if kk >= 0 { hat } else { hat.conj() };
                let num = (kk.rem_euclid(big_r as i64) as u128 * shift) % big_r as u128;
                let (sn, cs) = (2.0 * PI * num as f64 / big_r as f64).sin_cos();
                let z = Complex64::new(1.0, 1.0) * fh * Complex64::new(cs, sn);
                inner.add(gk * z.re);
            }
        }
        let pref = x / (r as f64 * s as f64) * g as f64 * f64::from(mu) / a2 as f64
            * f64::from(kronecker(8 * big_r as i64, s as i64));
        total.add(pref * inner.value());
    }
    Ok(total.value())
}

/// `Σ_{h mod r, (h,r)=1} φ(h)·(h|m)` for a character table φ mod r.
pub fn character_average(phi: &CharTable, m: u64) -> Complex64 {
    let r = phi.modulus();
    kahan_sum((1..r).filter(|&h| arith::gcd(h, r) == 1).map(|h| phi.at(h) * f64::from(kronecker(h as i64, m as i64))))
}
