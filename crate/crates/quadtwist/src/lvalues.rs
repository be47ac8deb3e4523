//! Central values L(1/2, ψ⊗χ_{8d}) by the approximate functional equations, and
//! a Hurwitz-zeta evaluator for Dirichlet L-functions used as the oracle.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::arith::{self, factorize, kronecker};
use crate::characters::{epsilon_factor, CharTable, Character, DirichletCharacter};
use crate::numerics::{det_sum, Compensated};
use crate::special_functions::{gamma, omega_cutoff, omega_fast};
use crate::{Error, Result};

/// B_{2k}/(2k)! for k = 1..8.
const EM_COEFFS: [f64; 8] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
    -3617.0 / 510.0 / 20_922_789_888_000.0,
];

/// `(e^w − 1)/w`-safe `e^w − 1`.
fn expm1_c(w: Complex64) -> Complex64 {
    if w.norm() > 0.5 {
        return w.exp() - 1.0;
    }
    let mut term = w;
    let mut sum = w;
    for k in 2..30 {
        term *= w / k as f64;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

/// Euler–Maclaurin Hurwitz zeta with `m` direct terms and 8 corrections.
/// With `regularized` the a-independent pole part `1/(s−1)` is removed, which
/// is harmless whenever the weights sum to zero and makes s = 1 usable.
fn hurwitz(s: Complex64, a: f64, m: usize, regularized: bool) -> Complex64 {
    let mut acc = Compensated::new();
    for n in 0..m {
        acc.add((-s * (n as f64 + a).ln()).exp());
    }
    let x = m as f64 + a;
    let lx = x.ln();
    let one_minus = Complex64::new(1.0, 0.0) - s;
    let pole = if regularized {
        if (s - 1.0).norm() == 0.0 {
            Complex64::new(-lx, 0.0)
        } else {
            -expm1_c(one_minus * lx) / one_minus
        }
    } else {
        -(one_minus * lx).exp() / one_minus
    };
    acc.add(pole);
    let xs = (-s * lx).exp();
    acc.add(xs * 0.5);
    // rising factorial s(s+1)...(s+2k−2) times x^{−s−2k+1}
    let mut rising = s;
    let mut power = xs / x;
    for (k, &c) in EM_COEFFS.iter().enumerate() {
        acc.add(rising * power * c);
        let j = (2 * k) as f64 + 1.0;
        rising *= (s + j) * (s + j + 1.0);
        power /= x * x;
    }
    acc.value()
}

/// Direct-term count used by [`l_reference`] by default.
pub fn default_em_terms(s: Complex64) -> usize {
    20usize.max((2.0 * s.norm()).ceil() as usize)
}

/// `L(s, χ) = N^{−s} Σ_{a=1}^{N} χ(a) ζ(s, a/N)` with Euler–Maclaurin Hurwitz zeta.
pub fn l_reference(chi: &impl Character, s: Complex64, terms: usize) -> Result<Complex64> {
    let n = chi.modulus();
    let total = crate::numerics::kahan_sum((1..=n).map(|a| chi.value(a as i64)));
    let regularized = total.norm() < 1e-9;
    if !regularized && (s - 1.0).norm() < 1e-12 {
        return Err(Error::Pole("L(s, χ) at s = 1 for principal χ".into()));
    }
    let nf = n as f64;
    let sum: Complex64 = det_sum(n as usize, |i| {
        let a = i as u64 + 1;
        let v = chi.value(a as i64);
        if v.norm_sqr() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            v * hurwitz(s, a as f64 / nf, terms, regularized)
        }
    });
    if !sum.re.is_finite() || !sum.im.is_finite() {
        return Err(Error::Quadrature("Hurwitz evaluation overflowed".into()));
    }
    Ok((-s * nf.ln()).exp() * sum)
}

/// `L(s, χ)` with the default truncation.
pub fn l_value(chi: &impl Character, s: Complex64) -> Result<Complex64> {
    l_reference(chi, s, default_em_terms(s))
}

/// `L(1, χ) = −(1/N) Σ_a χ(a) ψ(a/N)` for non-principal χ, ψ the digamma function.
pub fn l_one_digamma(chi: &impl Character) -> Complex64 {
    let n = chi.modulus();
    let sum = crate::numerics::kahan_sum((1..n).map(|a| {
        chi.value(a as i64) * statrs::function::gamma::digamma(a as f64 / n as f64)
    }));
    -sum / n as f64
}

/// `ξ(s, χ) = (N/π)^{s/2} Γ(s/2) L(s, χ)` for an even character mod N.
pub fn completed_xi(chi: &impl Character, s: Complex64) -> Result<Complex64> {
    let n = chi.modulus() as f64;
    let l = l_value(chi, s)?;
    Ok((s * 0.5 * (n / PI).ln()).exp() * gamma(s * 0.5) * l)
}

/// `|ξ(1−s, χ̄) − (√N/τ(χ)) ξ(s, χ)| / |ξ(s, χ)|`.
pub fn functional_equation_residual(chi: &CharTable, s: Complex64) -> Result<f64> {
    let lhs = completed_xi(&chi.conj(), Complex64::new(1.0, 0.0) - s)?;
    let right = completed_xi(chi, s)?;
    let rhs = right * (chi.modulus() as f64).sqrt() / chi.tau();
    Ok((lhs - rhs).norm() / right.norm())
}

/// A twist ψ⊗χ_{8d}.
#[derive(Clone, Debug)]
pub struct TwistSpec {
    pub psi: DirichletCharacter,
    pub d: u64,
}

impl TwistSpec {
    pub fn new(psi: DirichletCharacter, d: u64) -> Result<Self> {
        let q = psi.modulus();
        if q % 2 == 0 {
            return Err(Error::InvalidInput(format!("q = {q} must be odd")));
        }
        if d == 0 || arith::gcd(d, 2 * q) != 1 {
            return Err(Error::InvalidInput(format!("d = {d} must be coprime to 2q = {}", 2 * q)));
        }
        if arith::mobius(d) == 0 {
            return Err(Error::InvalidInput(format!("d = {d} must be squarefree")));
        }
        let kind = psi.classify();
        if !(kind.is_primitive && kind.is_even) {
            return Err(Error::InvalidInput(format!("ψ = {} must be even and primitive", psi.label())));
        }
        Ok(Self { psi, d })
    }

    pub fn q(&self) -> u64 {
        self.psi.modulus()
    }

    /// `N = 8dq`.
    pub fn conductor(&self) -> u64 {
        8 * self.d * self.q()
    }

    /// ψχ_{8d} as a table mod 8dq.
    pub fn twist_table(&self) -> CharTable {
        let psi = self.psi.table();
        psi.mul(&CharTable::kronecker(8 * self.d as i64))
    }

    /// The root number ε = τ(ψ)/√q · ψ(8d) χ_{8d}(q).
    pub fn root_number(&self) -> Result<Complex64> {
        epsilon_factor(&self.psi, self.d as i64)
    }
}

/// Threshold below which AFE weights are dropped.
pub const AFE_CUTOFF: f64 = 1e-17;

/// Truncation point of the first AFE: the first n with ω₁(n√(π/8dq)) below
/// [`AFE_CUTOFF`], capped by √(8dq/π)(3 + 2 log 8dq).
pub fn afe1_length(conductor: u64) -> u64 {
    let n = conductor as f64;
    let scale = (n / PI).sqrt();
    let by_weight = omega_cutoff(1, AFE_CUTOFF) * scale;
    let by_formula = scale * (3.0 + 2.0 * n.ln());
    by_weight.min(by_formula).ceil() as u64 + 1
}

/// As [`afe1_length`] for the second AFE with argument nπ/8dq.
pub fn afe2_length(conductor: u64) -> u64 {
    let n = conductor as f64;
    let scale = n / PI;
    let by_weight = omega_cutoff(2, AFE_CUTOFF) * scale;
    let by_formula = scale * (3.0 + 2.0 * n.ln()).powi(2);
    by_weight.min(by_formula).ceil() as u64 + 1
}

/// First AFE summed up to `terms`, with ψ given as a table mod q.
pub fn central_value_with(psi: &CharTable, d: u64, eps: Complex64, terms: u64) -> Complex64 {
    let q = psi.modulus();
    let scale = (PI / (8 * d * q) as f64).sqrt();
    let d8 = 8 * d as i64;
    let mut acc = Compensated::new();
    // χ_{8d}(n) = 0 for even n
    let mut n = 1u64;
    while n <= terms {
        let k = kronecker(d8, n as i64);
        if k != 0 {
            let p = psi.at(n);
            if p.norm_sqr() != 0.0 {
                let w = omega_fast(1, n as f64 * scale) / (n as f64).sqrt() * f64::from(k);
                acc.add((p + eps * p.conj()) * w);
            }
        }
        n += 2;
    }
    acc.value()
}

/// `L(1/2, ψ⊗χ_{8d})` by the first approximate functional equation.
pub fn central_value(spec: &TwistSpec) -> Result<Complex64> {
    let eps = spec.root_number()?;
    Ok(central_value_with(&spec.psi.table(), spec.d, eps, afe1_length(spec.conductor())))
}

/// `d_ψ(n)` for n ≤ `limit` by a smallest-prime-factor sieve. Real because the
/// divisor sum pairs each term with its conjugate.
pub fn twisted_divisor_table(psi: &CharTable, limit: usize) -> Vec<f64> {
    let mut spf = vec![0u32; limit + 1];
    for p in 2..=limit {
        if spf[p] == 0 {
            let mut m = p;
            while m <= limit {
                if spf[m] == 0 {
                    spf[m] = p as u32;
                }
                m += p;
            }
        }
    }
    let mut out = vec![0.0; limit + 1];
    if limit >= 1 {
        out[1] = 1.0;
    }
    for n in 2..=limit {
        let p = spf[n] as usize;
        let mut m = n;
        let mut k = 0u32;
        while m % p == 0 {
            m /= p;
            k += 1;
        }
        let v = psi.at(p as u64);
        let local: f64 = (0..=k).map(|j| (v.powu(j) * v.conj().powu(k - j)).re).sum();
        out[n] = out[m] * local;
    }
    out
}

/// `|L(1/2, ψ⊗χ_{8d})|²` by the second approximate functional equation.
pub fn central_value_sq(spec: &TwistSpec) -> Result<f64> {
    let n = spec.conductor();
    let terms = afe2_length(n);
    let psi = spec.psi.table();
    let dpsi = twisted_divisor_table(&psi, terms as usize);
    let scale = PI / n as f64;
    let d8 = 8 * spec.d as i64;
    let mut acc = Compensated::new();
    for m in (1..=terms).step_by(2) {
        let k = kronecker(d8, m as i64);
        if k != 0 && dpsi[m as usize] != 0.0 {
            acc.add(dpsi[m as usize] * f64::from(k) / (m as f64).sqrt() * omega_fast(2, m as f64 * scale));
        }
    }
    Ok(2.0 * acc.value())
}

/// Whether d is squarefree and coprime to 2q.
pub fn squarefree_coprime(d: u64, q: u64) -> bool {
    arith::gcd(d, 2 * q) == 1 && factorize(d).map(|f| f.is_squarefree()).unwrap_or(false)
}
