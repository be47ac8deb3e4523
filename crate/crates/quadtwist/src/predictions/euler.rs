//! Truncated Euler products.
//!
//! A product `Π_p f(p)` is evaluated as `Π_j L(w_j, χ_j)^{e_j} · Π_{p≤P} R_p`
//! with `R_p = f(p) Π_j (1 − χ_j(p) p^{−w_j})^{e_j}`. The accelerators are
//! chosen so that `R_p = 1 + O(p^{−rate})`, and the truncation error is
//! bounded by the sampled constant times `Σ_{p>P} p^{−rate}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{primes_up_to, PRIME_TABLE_LIMIT};
use crate::characters::{CharTable, Character};
use crate::lvalues::l_value;
use crate::numerics::Compensated;
use crate::{Error, Result};

pub const DEFAULT_CUTOFF: u64 = 1_000_000;
/// Tail level the cutoff is raised towards.
pub const TAIL_GOAL: f64 = 1e-12;
/// Tail level above which a product is refused.
pub const TAIL_LIMIT: f64 = 1e-10;

/// One `L(w, χ)^e` factor split off a product.
#[derive(Clone, Debug)]
pub struct Accelerator {
    pub chi: CharTable,
    pub w: Complex64,
    pub exponent: i32,
}

impl Accelerator {
    pub fn new(chi: &CharTable, w: Complex64, exponent: i32) -> Self {
        Self { chi: chi.clone(), w, exponent }
    }
}

/// A truncated product with its tail bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EulerProduct {
    pub value: Complex64,
    pub cutoff: u64,
    pub tail_estimate: f64,
    /// Remainder factors are `1 + O(p^{−sigma_min})`.
    pub sigma_min: f64,
}

fn p_pow(p: u64, w: Complex64) -> Complex64 {
    (-w * (p as f64).ln()).exp()
}

/// `Σ_{p>P} p^{−rate}` by the prime number theorem, with a safety factor 2.
fn prime_tail(cutoff: u64, rate: f64) -> f64 {
    let p = cutoff as f64;
    2.0 * p.powf(1.0 - rate) / ((rate - 1.0) * p.ln())
}

/// Running estimate of the constant in `|R_p − 1| ≤ C p^{−rate}`. Primes below
/// 100 are pre-asymptotic and remainders at rounding level carry no signal.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TailSampler {
    rate: f64,
    worst: f64,
}

impl TailSampler {
    pub(crate) fn new(rate: f64) -> Self {
        Self { rate, worst: 0.0 }
    }

    #[inline]
    pub(crate) fn observe(&mut self, p: u64, r: Complex64) {
        let d = (r - 1.0).norm();
        if p >= 100 && d > 1e-13 {
            self.worst = self.worst.max(d * (p as f64).powf(self.rate));
        }
    }

    pub(crate) fn tail(&self, cutoff: u64) -> f64 {
        self.worst * prime_tail(cutoff, self.rate)
    }
}

/// The product at a fixed cutoff.
pub fn product_at<F>(local: F, accel: &[Accelerator], rate: f64, cutoff: u64) -> Result<EulerProduct>
where
    F: Fn(u64) -> Complex64,
{
    if rate <= 1.0 {
        return Err(Error::InvalidInput(format!("remainder rate {rate} does not converge")));
    }
    let ps = primes_up_to(cutoff);
    let mut log = Compensated::new();
    let mut sampler = TailSampler::new(rate);
    let mut zero = false;
    for &p in ps {
        let p = p as u64;
        let mut r = local(p);
        for a in accel {
            let c = a.chi.at(p);
            if c.norm_sqr() != 0.0 {
                r *= (Complex64::new(1.0, 0.0) - c * p_pow(p, a.w)).powi(a.exponent);
            }
        }
        if r.norm_sqr() == 0.0 {
            zero = true;
            break;
        }
        sampler.observe(p, r);
        log.add(r.ln());
    }
    let mut value = if zero { Complex64::new(0.0, 0.0) } else { log.value().exp() };
    for a in accel {
        let l = l_value(&a.chi, a.w)?;
        if a.exponent < 0 && l.norm() == 0.0 {
            return Err(Error::Pole(format!("L({}, χ mod {}) vanishes", a.w, a.chi.modulus())));
        }
        value *= l.powi(a.exponent);
    }
    let tail = if zero { 0.0 } else { sampler.tail(cutoff) };
    Ok(EulerProduct { value, cutoff, tail_estimate: tail, sigma_min: rate })
}

/// The product with the cutoff raised from `start` until the tail is below
/// [`TAIL_GOAL`]. Fails if even the largest cutoff leaves more than
/// [`TAIL_LIMIT`].
pub fn certified_product<F>(local: F, accel: &[Accelerator], rate: f64, start: u64) -> Result<EulerProduct>
where
    F: Fn(u64) -> Complex64,
{
    let mut cutoff = start;
    loop {
        let e = product_at(&local, accel, rate, cutoff)?;
        if e.tail_estimate <= TAIL_GOAL {
            return Ok(e);
        }
        if cutoff >= PRIME_TABLE_LIMIT {
            if e.tail_estimate <= TAIL_LIMIT {
                return Ok(e);
            }
            return Err(Error::TailTooLarge { tail: e.tail_estimate, target: TAIL_LIMIT, cutoff });
        }
        // the bound scales like P^{1−rate}; jump straight to a sufficient cutoff
        let factor = (e.tail_estimate / TAIL_GOAL).powf(1.0 / (rate - 1.0)).max(2.0);
        cutoff = ((cutoff as f64 * factor * 1.1) as u64).min(PRIME_TABLE_LIMIT);
    }
}

/// `A_ν(s, χ) = Π_{p|ν} (1 − χ(p) p^{−s})` with χ given on primes.
pub fn euler_a(nu: u64, s: Complex64, chi: impl Fn(u64) -> Complex64) -> Result<Complex64> {
    let f = crate::arith::factorize(nu)?;
    Ok(f.primes().fold(Complex64::new(1.0, 0.0), |acc, p| acc * (1.0 - chi(p) * p_pow(p, s))))
}

/// `B_ν(s, χ) = Π_{p∤ν} (1 − χ(p)/(p^s (p+1)))`, for Re s > 0.
pub fn euler_b(nu: u64, s: Complex64, chi: &CharTable) -> Result<EulerProduct> {
    if s.re <= 0.0 {
        return Err(Error::InvalidInput(format!("B_ν needs Re s > 0, got {s}")));
    }
    let local = |p: u64| {
        if nu % p == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            1.0 - chi.at(p) * p_pow(p, s) / (p as f64 + 1.0)
        }
    };
    // 1 − a/(p+1) = (1 − a/p)(1 + a/p²)(1 + O(p^{−3}))
    let accel = [
        Accelerator::new(chi, s + 1.0, -1),
        Accelerator::new(chi, s + 2.0, 1),
    ];
    certified_product(local, &accel, 3.0 + s.re.min(2.0 * s.re), DEFAULT_CUTOFF)
}

/// `C_{μ,ν}(s, χ) = Π_{p∤μ, p|ν} (1 + 1/p)(1 − χ(p)/(p^s (p+1)))`.
pub fn euler_c(mu: u64, nu: u64, s: Complex64, chi: &CharTable) -> Result<Complex64> {
    let f = crate::arith::factorize(nu)?;
    Ok(f.primes().filter(|&p| mu % p != 0).fold(Complex64::new(1.0, 0.0), |acc, p| {
        let pf = p as f64;
        acc * (1.0 + 1.0 / pf) * (1.0 - chi.at(p) * p_pow(p, s) / (pf + 1.0))
    }))
}

pub(crate) fn prime_power(p: u64, w: Complex64) -> Complex64 {
    p_pow(p, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn a_small_cases() {
        let one = |_: u64| c(1.0);
        assert_eq!(euler_a(1, c(1.0), one).unwrap(), c(1.0));
        assert!((euler_a(6, c(1.0), one).unwrap() - c(1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn c_empty_when_mu_equals_nu() {
        let chi = CharTable::principal(1);
        assert_eq!(euler_c(30, 30, c(1.0), &chi).unwrap(), c(1.0));
    }

    #[test]
    fn b_stable_in_cutoff() {
        let chi = CharTable::principal(1);
        let local = |p: u64| 1.0 - c(1.0) / (p as f64 * (p as f64 + 1.0));
        let accel = [Accelerator::new(&chi, c(2.0), -1), Accelerator::new(&chi, c(3.0), 1)];
        let a = product_at(local, &accel, 4.0, 100_000).unwrap();
        let b = product_at(local, &accel, 4.0, 1_000_000).unwrap();
        assert!((a.value - b.value).norm() < 1e-10);
        assert!(b.tail_estimate < 1e-12);
        let full = euler_b(1, c(1.0), &chi).unwrap();
        assert!((full.value - b.value).norm() < 1e-12);
        // plain truncation converges to the same limit, slowly
        let plain = product_at(local, &[], 2.0, 1_000_000).unwrap();
        assert!((plain.value - b.value).norm() < 1e-6);
    }

    #[test]
    fn b_with_all_small_primes_excluded_is_near_one() {
        let chi = CharTable::principal(1);
        let nu = 2 * 3 * 5 * 7 * 11 * 13 * 17 * 19 * 23;
        let b = euler_b(nu, c(1.0), &chi).unwrap();
        let bound: f64 = primes_up_to(100_000).iter().filter(|&&p| p > 23).map(|&p| 1.0 / (p as f64).powi(2)).sum();
        assert!((b.value - 1.0).norm() < 1.1 * bound);
    }
}
