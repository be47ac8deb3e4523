//! The non-diagonal constant 𝒩: the Euler products 𝒢, H*, K, the integral
//! over a vertical line, the quartic closed form, and the h-average.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::euler::{certified_product, prime_power, EulerProduct, DEFAULT_CUTOFF, TAIL_GOAL};
use super::{Conventions, MainTermPolynomial, NamedValue, NondiagPhase, EULER_GAMMA};
use crate::arith::{self, factorize, fundamental_disc_decompose, kronecker, mod_inverse, primes_up_to};
use crate::characters::{psibar_chi_half, tau, CharTable, Character, DirichletCharacter};
use crate::gauss_sums::g_prime_power;
use crate::lvalues::l_value;
use crate::moments::FamilySpec;
use crate::numerics::{gl_rule, richardson_derivative, Compensated, QuadratureSettings};
use crate::special_functions::{gamma, gamma1, gamma_quarter, mellin, TestFunction};
use crate::{Error, Result};

/// Prime cutoff for K inside the contour integral, where it is evaluated at
/// a few thousand nodes.
pub const CONTOUR_CUTOFF: u64 = 200_000;
/// Half-height of the contour; the integrand decays like `e^{−π|t|/2}`.
pub const CONTOUR_HEIGHT: f64 = 30.0;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn one() -> Complex64 {
    c(1.0)
}

fn p_adic_valuation(mut n: u64, p: u64) -> u32 {
    let mut v = 0;
    while n > 0 && n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// `G_{p^a}(p^n)` for a power of an odd prime (unit part 1).
fn g_pure_power(a: u32, p: u64, n: u32) -> f64 {
    let pf = p as f64;
    if n == 0 {
        1.0
    } else if n <= a {
        if n % 2 == 1 {
            0.0
        } else {
            pf.powi(n as i32) * (1.0 - 1.0 / pf)
        }
    } else if n == a + 1 {
        if n % 2 == 0 {
            -pf.powi(a as i32)
        } else {
            pf.powi(a as i32) * pf.sqrt()
        }
    } else {
        0.0
    }
}

/// Characters entering K for a given ψ and convention: χ = ψ̄², the
/// k-character κ and the α-character.
#[derive(Clone, Debug)]
pub struct KCharacters {
    pub chi: CharTable,
    pub kappa: CharTable,
    pub alpha_char: CharTable,
    /// κχ².
    pub kx2: CharTable,
    pub conv: NondiagPhase,
}

impl KCharacters {
    pub fn new(psi: &CharTable, conv: NondiagPhase) -> Self {
        let chi = psi.conj().pow(2);
        let (kappa, alpha_char) = match conv {
            NondiagPhase::Derived => (chi.conj(), chi.clone()),
            NondiagPhase::Conjugate => (chi.clone(), chi.conj()),
        };
        let kx2 = kappa.mul(&chi.pow(2));
        Self { chi, kappa, alpha_char, kx2, conv }
    }

    fn q(&self) -> u64 {
        self.chi.modulus()
    }
}

/// Which case of the H* table a prime falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HCase {
    DividesQ,
    Two,
    DividesRq,
    DividesAlpha,
    DividesL,
    Generic,
}

pub fn h_star_case(q: u64, p: u64, l: u64, r: u64, alpha: u64) -> HCase {
    if q % p == 0 {
        HCase::DividesQ
    } else if p == 2 {
        HCase::Two
    } else if r % p == 0 {
        HCase::DividesRq
    } else if alpha % p == 0 {
        HCase::DividesAlpha
    } else if l % p == 0 {
        HCase::DividesL
    } else {
        HCase::Generic
    }
}

/// `(1 − y)(1 − xy) Σ_β y^β (Σ_{j≤β} x^j) G_{p^{2γ}}(p^{β+δ}) p^{−β/2}`, the
/// local factor `𝒢_p(1; p^{2γ})` at `p ∤ αr` with `δ = v_p(l)`.
fn g_local_square(x: Complex64, p: u64, gamma_: u32, delta: u32, beta_max: u32) -> Complex64 {
    let y = 1.0 / p as f64;
    let mut s_beta = Complex64::new(0.0, 0.0);
    let mut xp = one();
    let mut acc = Complex64::new(0.0, 0.0);
    for beta in 0..=beta_max {
        s_beta += xp;
        xp *= x;
        let g = g_pure_power(2 * gamma_, p, beta + delta);
        if g != 0.0 {
            acc += s_beta * (y.powi(beta as i32) * g / (p as f64).powf(beta as f64 / 2.0));
        }
    }
    (1.0 - y) * (1.0 - x * y) * acc
}

/// `Σ_{γ≤γmax} κ(p)^γ p^{−2γs} 𝒢_p(1; p^{2γ})` summed literally.
pub fn h_star_double_sum(kc: &KCharacters, p: u64, s: Complex64, delta: u32, gamma_max: u32, beta_max: u32) -> Complex64 {
    let z = kc.kappa.at(p) * prime_power(p, 2.0 * s);
    let x = kc.chi.at(p);
    let mut zp = one();
    let mut acc = Compensated::new();
    for g in 0..=gamma_max {
        acc.add(zp * g_local_square(x, p, g, delta, beta_max));
        zp *= z;
    }
    acc.value()
}

/// The H* local factor.
pub fn h_star_factor(kc: &KCharacters, p: u64, s: Complex64, l: u64, r: u64, alpha: u64) -> Result<Complex64> {
    let kap = kc.kappa.at(p);
    let u = prime_power(p, 2.0 * s);
    let z = kap * u;
    let x = kc.chi.at(p);
    let y = 1.0 / p as f64;
    Ok(match h_star_case(kc.q(), p, l, r, alpha) {
        HCase::DividesQ => one(),
        HCase::Two => 1.0 / (1.0 - z),
        HCase::DividesRq => match kc.conv {
            // the k-sum only sees k coprime to r/2
            NondiagPhase::Derived => one(),
            NondiagPhase::Conjugate => 1.0 / (1.0 - z),
        },
        HCase::DividesAlpha => (1.0 - y) * (1.0 - x * y) / (1.0 - z),
        HCase::DividesL => {
            if s.re <= 0.02 {
                return Err(Error::InvalidInput(format!("H*_p for p | l needs Re s > 0, got {s}")));
            }
            let delta = p_adic_valuation(l, p);
            // |z|^γ below 1e-17
            let gmax = (40.0 / (2.0 * s.re * (p as f64).log10())).ceil() as u32 + 2;
            h_star_double_sum(kc, p, s, delta, gmax, 2 * gmax + 2)
        }
        HCase::Generic => {
            let x2y = x * x * y;
            let cc = (1.0 + x * y) / (1.0 - x2y);
            (1.0 - y) * (1.0 - x * y) * ((y + cc) / (1.0 - z) - cc * x2y / (1.0 - z * x2y))
        }
    })
}

/// `K*_p · (1 − κ(p)p^{−2s})(1 − κχ²(p)p^{−2s−1})`: the K* local factor (H*
/// minus the α = p term) with its two polar factors cleared, so that it stays
/// finite where `κ(p) p^{−2s} = 1`.
fn k_star_local_reduced(kc: &KCharacters, p: u64, s: Complex64, l: u64, r: u64) -> Result<Complex64> {
    let u = prime_power(p, 2.0 * s);
    let y = 1.0 / p as f64;
    let x = kc.chi.at(p);
    let z = kc.kappa.at(p) * u;
    let x2y = x * x * y;
    let clear = (1.0 - z) * (1.0 - z * x2y);
    Ok(match h_star_case(kc.q(), p, l, r, 1) {
        HCase::DividesQ => clear,
        HCase::Two => 1.0 - z * x2y,
        HCase::DividesRq => match kc.conv {
            NondiagPhase::Derived => clear,
            NondiagPhase::Conjugate => 1.0 - z * x2y,
        },
        HCase::DividesL | HCase::DividesAlpha => h_star_factor(kc, p, s, l, r, 1)? * clear,
        HCase::Generic => {
            let cc = (1.0 + x * y) / (1.0 - x2y);
            let a = kc.alpha_char.at(p);
            (1.0 - y) * (1.0 - x * y) * ((y + cc) * (1.0 - z * x2y) - cc * x2y * (1.0 - z) - a * y * y / u * (1.0 - z * x2y))
        }
    })
}

/// The K* local factor.
pub fn k_star_local(kc: &KCharacters, p: u64, s: Complex64, l: u64, r: u64) -> Result<Complex64> {
    let u = prime_power(p, 2.0 * s);
    let z = kc.kappa.at(p) * u;
    let x = kc.chi.at(p);
    Ok(k_star_local_reduced(kc, p, s, l, r)? / ((1.0 - z) * (1.0 - z * x * x / p as f64)))
}

/// Global L-values multiplied back onto the accelerated K* product.
struct KGlobal {
    fixed: Complex64,
}

impl KGlobal {
    fn new(kc: &KCharacters) -> Result<Self> {
        let zeta2 = l_value(&CharTable::principal(1), c(2.0))?;
        let l_chi = l_value(&kc.chi, c(2.0))?;
        let l_chi2 = l_value(&kc.chi.pow(2), c(2.0))?;
        Ok(Self { fixed: 1.0 / (zeta2 * l_chi * l_chi2) })
    }
}

/// Evaluates K(s; l, r) for one ψ, convention and (l, r).
pub struct KEvaluator {
    kc: KCharacters,
    l: u64,
    r: u64,
    global: KGlobal,
}

impl KEvaluator {
    pub fn new(psi: &CharTable, l: u64, r: u64, conv: NondiagPhase) -> Result<Self> {
        let kc = KCharacters::new(psi, conv);
        if kc.chi.is_principal() {
            return Err(Error::InvalidInput("K needs ψ² non-principal".into()));
        }
        if arith::gcd(l, r) != 1 {
            return Err(Error::InvalidInput("K needs gcd(l, r) = 1".into()));
        }
        let global = KGlobal::new(&kc)?;
        Ok(Self { kc, l, r, global })
    }

    pub fn characters(&self) -> &KCharacters {
        &self.kc
    }

    /// `K*(s) = Π_p K*_p` with a fixed prime cutoff.
    pub fn k_star_at(&self, s: Complex64, cutoff: u64) -> Result<EulerProduct> {
        let kc = &self.kc;
        let sigma = s.re;
        if sigma.abs() >= 0.5 {
            return Err(Error::InvalidInput(format!("K needs |Re s| < 1/2, got {s}")));
        }
        let rate = 3.0 - 2.0 * sigma.abs();
        let mut prod = one();
        let mut sampler = super::euler::TailSampler::new(rate);
        for &p in primes_up_to(cutoff) {
            let p = p as u64;
            let reduced = k_star_local_reduced(kc, p, s, self.l, self.r)?;
            let u = prime_power(p, 2.0 * s);
            let y = 1.0 / p as f64;
            let y2 = y * y;
            let x = kc.chi.at(p);
            let kx2 = kc.kx2.at(p);
            let a = kc.alpha_char.at(p);
            let den = (1.0 - y2) * (1.0 - x * y2) * (1.0 - x * x * y2) * (1.0 - kx2 * y2 * u) * (1.0 - a * y2 / u);
            let rp = reduced / den;
            sampler.observe(p, rp);
            prod *= rp;
        }
        let l_kappa = l_value(&kc.kappa, 2.0 * s)?;
        let l_kx2 = l_value(&kc.kx2, 2.0 * s + 1.0)?;
        let l_kx2_b = l_value(&kc.kx2, 2.0 * s + 2.0)?;
        let l_a = l_value(&kc.alpha_char, 2.0 - 2.0 * s)?;
        let value = prod * l_kappa * l_kx2 * self.global.fixed / (l_kx2_b * l_a);
        let tail = sampler.tail(cutoff);
        Ok(EulerProduct { value, cutoff, tail_estimate: tail, sigma_min: rate })
    }

    /// `(κ(2) 2^{1−2s} − 1)`.
    fn two_factor(&self, s: Complex64) -> Complex64 {
        self.kc.kappa.at(2) * (((1.0 - 2.0 * s) * 2f64.ln()).exp()) - 1.0
    }

    /// `K(s; l, r)` at a fixed cutoff.
    pub fn k_at(&self, s: Complex64, cutoff: u64) -> Result<EulerProduct> {
        let mut e = self.k_star_at(s, cutoff)?;
        e.value *= self.two_factor(s);
        Ok(e)
    }

    /// `K(s; l, r)` with the cutoff raised until the tail is certified.
    pub fn k_certified(&self, s: Complex64) -> Result<EulerProduct> {
        let mut cutoff = DEFAULT_CUTOFF;
        loop {
            let e = self.k_at(s, cutoff)?;
            if e.tail_estimate <= TAIL_GOAL || cutoff >= arith::PRIME_TABLE_LIMIT {
                if e.tail_estimate > super::euler::TAIL_LIMIT {
                    return Err(Error::TailTooLarge { tail: e.tail_estimate, target: super::euler::TAIL_LIMIT, cutoff });
                }
                return Ok(e);
            }
            cutoff = arith::PRIME_TABLE_LIMIT;
        }
    }

    /// `H*(s; l, r, 1)` as an accelerated product.
    fn h_star_one(&self, s: Complex64) -> Result<EulerProduct> {
        use super::euler::Accelerator;
        let kc = &self.kc;
        let one_t = CharTable::principal(1);
        let accel = [
            Accelerator::new(&kc.kappa, 2.0 * s, 1),
            Accelerator::new(&kc.kx2, 2.0 * s + 1.0, 1),
            Accelerator::new(&one_t, c(2.0), -1),
            Accelerator::new(&kc.chi, c(2.0), -1),
            Accelerator::new(&kc.chi.pow(2), c(2.0), -1),
            Accelerator::new(&kc.kx2, 2.0 * s + 2.0, -1),
        ];
        let rate = 3.0 - 2.0 * s.re.abs();
        certified_product(|p| h_star_factor(kc, p, s, self.l, self.r, 1).unwrap_or(c(f64::NAN)), &accel, rate, DEFAULT_CUTOFF)
    }

    /// `(κ(2)2^{1−2s} − 1) Σ_{α≤N, (α,lr)=1} μ(α) a(α) α^{2s−2} H*(s; l, r, α)`.
    pub fn k_alpha_sum(&self, s: Complex64, alpha_max: u64) -> Result<Complex64> {
        let kc = &self.kc;
        let h1 = self.h_star_one(s)?.value;
        let lr = self.l * self.r;
        let mut acc = Compensated::new();
        for alpha in 1..=alpha_max {
            if arith::gcd(alpha, lr) != 1 {
                continue;
            }
            let mu = arith::mobius(alpha);
            if mu == 0 {
                continue;
            }
            let a = kc.alpha_char.at(alpha);
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let mut ratio = one();
            for p in factorize(alpha)?.primes() {
                ratio *= h_star_factor(kc, p, s, self.l, self.r, alpha)? / h_star_factor(kc, p, s, self.l, self.r, 1)?;
            }
            let w = ((2.0 * s - 2.0) * (alpha as f64).ln()).exp();
            acc.add(a * f64::from(mu) * w * ratio);
        }
        Ok(self.two_factor(s) * h1 * acc.value())
    }
}

impl KEvaluator {
    /// The α-sum with its slowly converging parts resummed. The Möbius part
    /// gives `Σ_α μ(α)a(α)α^{2s−2}ρ(α) = T(s)/L^{(lr)}(2−2s, a)` with
    /// `T = Σ_n b(n) n^{2s−2}`, `b(p^k) = a(p)^k (1 − ρ(p))` and
    /// `ρ(p) = H*(s;p)/H*(s;1)` at p. Since `b(p^k) = a(p)^k (1 + χ(p))/p + O(p^{−2})`,
    /// T is further divided by `L^{(lr)}(w+1, a) L^{(lr)}(w+1, aχ)` and
    /// `L^{(lr)}(2w+1, a²) L^{(lr)}(2w+1, a²χ)` with `w = 2 − 2s`, and the
    /// quotient is summed over `n ≤ n_max`.
    pub fn k_alpha_sum_resummed(&self, s: Complex64, n_max: u64) -> Result<Complex64> {
        let kc = &self.kc;
        let h1 = self.h_star_one(s)?.value;
        let lr = self.l * self.r;
        let n = n_max as usize;
        let w = 2.0 - 2.0 * s;
        let mut b = vec![Complex64::new(0.0, 0.0); n + 1];
        for m in 1..=n {
            if arith::gcd(m as u64, lr) != 1 {
                continue;
            }
            let mut v = one();
            for &(p, k) in &factorize(m as u64)?.factors {
                let rho = h_star_factor(kc, p, s, self.l, self.r, p)? / h_star_factor(kc, p, s, self.l, self.r, 1)?;
                v *= kc.alpha_char.at(p).powu(k) * (1.0 - rho);
            }
            b[m] = v;
        }
        let a_chi = kc.alpha_char.mul(&kc.chi);
        let a2 = kc.alpha_char.pow(2);
        let a2_chi = a2.mul(&kc.chi);
        let factors: [(&CharTable, usize); 4] = [(&kc.alpha_char, 1), (&a_chi, 1), (&a2, 2), (&a2_chi, 2)];
        // divide by L(jw+1, ψ) in the n^{−w} variable: convolve with μ(d)ψ(d)/d at n = d^j
        for &(psi_t, j) in &factors {
            let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
            for d in 1..=n {
                let dj = d.pow(j as u32);
                if dj > n {
                    break;
                }
                let mu = arith::mobius(d as u64);
                if mu == 0 || arith::gcd(d as u64, lr) != 1 {
                    continue;
                }
                let coef = psi_t.at(d as u64) * (f64::from(mu) / d as f64);
                if coef.norm_sqr() == 0.0 {
                    continue;
                }
                for k in 1..=n / dj {
                    out[dj * k] += coef * b[k];
                }
            }
            b = out;
        }
        let mut acc = Compensated::new();
        for (m, v) in b.iter().enumerate().skip(1) {
            if v.norm_sqr() != 0.0 {
                acc.add(v * (-w * (m as f64).ln()).exp());
            }
        }
        let partial_l = |t: &CharTable, x: Complex64| -> Result<Complex64> {
            let mut v = l_value(t, x)?;
            for p in factorize(lr)?.primes() {
                v *= 1.0 - t.at(p) * prime_power(p, x);
            }
            Ok(v)
        };
        let l_main = partial_l(&kc.alpha_char, w)?;
        let mut l_next = one();
        for &(psi_t, j) in &factors {
            l_next *= partial_l(psi_t, w * j as f64 + 1.0)?;
        }
        Ok(self.two_factor(s) * h1 * acc.value() * l_next / l_main)
    }
}

/// `𝒢_{ψ,φ}(s; k, l, r, α)` for Re s > 1/2, with φ a character mod r.
pub fn script_g(psi: &CharTable, phi: &CharTable, s: Complex64, k: i64, l: u64, r: u64, alpha: u64) -> Result<EulerProduct> {
    if s.re <= 0.55 {
        return Err(Error::InvalidInput(format!("𝒢 needs Re s > 1/2, got {s}")));
    }
    let (k1, _) = fundamental_disc_decompose(4 * k)?;
    let half = (r / 2) as i64;
    let four_k = 4 * k;
    let local = |p: u64| -> Complex64 {
        let xi = f64::from(kronecker(k1 * half, p as i64));
        let ps = prime_power(p, s);
        let a = psi.at(p);
        let f = phi.at(p);
        let lf = (1.0 - a * f * xi * ps) * (1.0 - a.conj() * f * xi * ps);
        if (alpha * r) % p == 0 {
            return lf;
        }
        let delta = p_adic_valuation(l, p);
        let vk = p_adic_valuation(four_k.unsigned_abs(), p);
        let leg = f64::from(kronecker(half, p as i64));
        let mut sum = Complex64::new(0.0, 0.0);
        let mut d = one();
        let mut pb = one();
        for beta in 0..=(vk + 1).saturating_sub(delta) {
            if beta > 0 {
                // d_ψ(p^β) by the recursion d(p^β) = (a + ā) d(p^{β−1}) − d(p^{β−2})
                d = twisted_divisor_pp(a, beta);
                pb *= leg * f * ps;
            }
            let n = beta + delta;
            let g = if n == 0 { 1.0 } else { g_prime_power(four_k, p, n) };
            if g != 0.0 {
                sum += d * pb * (g / (p as f64).powf(beta as f64 / 2.0));
            }
        }
        lf * sum
    };
    certified_product(local, &[], 2.0 * s.re, 100_000)
}

fn twisted_divisor_pp(a: Complex64, beta: u32) -> Complex64 {
    let b = a.conj();
    (0..=beta).map(|j| a.powu(j) * b.powu(beta - j)).sum()
}

/// `Σ_{n≤N, (n,αr)=1} (r/2|n) d_ψ(n) φ(n) n^{−s} G_{4k}(ln)/√n`.
pub fn script_d_series(psi: &CharTable, phi: &CharTable, s: f64, k: i64, l: u64, r: u64, alpha: u64, n_max: u64) -> Result<Complex64> {
    let half = (r / 2) as i64;
    let mut acc = Compensated::new();
    for n in 1..=n_max {
        if arith::gcd(n, alpha * r) != 1 {
            continue;
        }
        let f = phi.at(n);
        if f.norm_sqr() == 0.0 {
            continue;
        }
        let g = crate::gauss_sums::g_formula(4 * k, l * n);
        if g == 0.0 {
            continue;
        }
        let d = crate::characters::twisted_divisor(psi, n);
        let leg = f64::from(kronecker(half, n as i64));
        acc.add(d * f * (leg * g / (n as f64).sqrt() * (n as f64).powf(-s)));
    }
    Ok(acc.value())
}

/// The two L-functions `L(s, ψφξ) L(s, ψ̄φξ)` with `ξ = (k₁ r/2 | ·)`.
pub fn script_g_l_factors(psi: &CharTable, phi: &CharTable, s: Complex64, k: i64, r: u64) -> Result<Complex64> {
    let (k1, _) = fundamental_disc_decompose(4 * k)?;
    let top = k1 * (r / 2) as i64;
    let m = num_integer::lcm(num_integer::lcm(psi.modulus(), phi.modulus()), 4 * top.unsigned_abs());
    let build = |w: &CharTable| {
        CharTable::from_values(
            m,
            (0..m).map(|n| w.at(n) * phi.at(n) * f64::from(kronecker(top, n as i64))).collect(),
        )
    };
    Ok(l_value(&build(psi), s)? * l_value(&build(&psi.conj()), s)?)
}

/// `J(s) = Γ²(s/2+1/4) Γ₁(s) K(s) (8lqr/π)^s / (Γ²(1/4) A A)`.
pub struct NondiagIntegrand {
    k: KEvaluator,
    psi: CharTable,
    l: u64,
    r: u64,
    h: u64,
    cutoff: u64,
}

impl NondiagIntegrand {
    pub fn new(psi: &CharTable, l: u64, r: u64, h: u64, conv: NondiagPhase, cutoff: u64) -> Result<Self> {
        Ok(Self { k: KEvaluator::new(psi, l, r, conv)?, psi: psi.clone(), l, r, h, cutoff })
    }

    pub fn k(&self) -> &KEvaluator {
        &self.k
    }

    fn a_factor(&self, s: Complex64) -> Result<Complex64> {
        let q = self.psi.modulus();
        let w = s + 0.5;
        let chi8h = |p: u64| f64::from(kronecker(8 * self.h as i64, p as i64));
        let a1 = super::euler::euler_a(self.r / q, w, |p| self.psi.at(p) * chi8h(p))?;
        let a2 = super::euler::euler_a(self.r / q, w, |p| self.psi.at(p).conj() * chi8h(p))?;
        Ok(a1 * a2)
    }

    /// Everything in J except K.
    pub fn archimedean(&self, s: Complex64) -> Result<Complex64> {
        let q = self.psi.modulus();
        let g = gamma(s * 0.5 + 0.25) / gamma_quarter();
        let scale = (s * (8.0 * (self.l * q * self.r) as f64 / PI).ln()).exp();
        Ok(g * g * gamma1(s)? * scale / self.a_factor(s)?)
    }

    pub fn j(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.archimedean(s)? * self.k.k_at(s, self.cutoff)?.value)
    }

    /// `(1/2πi) ∫_{(c)} J(s) ds/s` with Gauss–Legendre panels of width c
    /// near the real axis and width 1 beyond. Returns (value, error estimate).
    pub fn integral(&self, c_line: f64) -> Result<(Complex64, f64)> {
        if !(c_line > 0.0 && c_line < 0.5) {
            return Err(Error::InvalidInput(format!("contour Re s = {c_line} outside (0, 1/2)")));
        }
        let mut edges = vec![0.0];
        let near = 2.0;
        let mut t = 0.0;
        while t < near - 1e-12 {
            t = (t + c_line).min(near);
            edges.push(t);
        }
        while t < CONTOUR_HEIGHT - 1e-12 {
            t = (t + 1.0).min(CONTOUR_HEIGHT);
            edges.push(t);
        }
        let run = |deg: usize| -> Result<Complex64> {
            let rule = gl_rule(deg);
            let mut pts = Vec::new();
            for w in edges.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
                for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                    for sign in [1.0, -1.0] {
                        pts.push((sign * (mid + half * x), wt * half));
                    }
                }
            }
            let vals: Vec<Result<Complex64>> = {
                use rayon::prelude::*;
                pts.par_iter()
                    .map(|&(t, _)| {
                        let s = Complex64::new(c_line, t);
                        Ok(self.j(s)? / s)
                    })
                    .collect()
            };
            let mut acc = Compensated::new();
            for (v, &(_, w)) in vals.into_iter().zip(&pts) {
                acc.add(v? * w);
            }
            // ds = i dt
            Ok(acc.value() / (2.0 * PI))
        };
        let coarse = run(12)?;
        let fine = run(20)?;
        Ok((fine, (fine - coarse).norm()))
    }
}

/// The h- and l-dependent factor in front of the integral:
/// `4 Φ̂(0) φ₀(l) L(1, φ₀ψ̄²) τ(ψ̄χ_{r/2}) · phase / (l r²)`.
pub fn nondiag_prefactor(psi: &DirichletCharacter, r: u64, h: u64, l: u64, phi_hat0: f64, conv: NondiagPhase) -> Result<(Complex64, Vec<NamedValue>)> {
    let base = psibar_chi_half(psi, r)?;
    let half = r / 2;
    let t = tau(&base);
    let hbar = mod_inverse(h as i64, r)?;
    let phase = match conv {
        NondiagPhase::Derived => base.value(((2 * hbar % half) * (l % half) % half) as i64),
        NondiagPhase::Conjugate => {
            let two_bar = mod_inverse(2, half)?;
            base.conj().value(((two_bar * hbar % half) * (l % half) % half) as i64)
        }
    };
    let chi = CharTable::principal(r).mul(&psi.table().conj().pow(2));
    let l1 = l_value(&chi, c(1.0))?;
    let pref = 4.0 * phi_hat0 / (l as f64 * (r * r) as f64) * l1 * t * phase;
    Ok((
        pref,
        vec![
            NamedValue::new("tau(psibar chi_{r/2})", t),
            NamedValue::new("phase", phase),
            NamedValue::new("L(1,phi0 psibar^2)", l1),
        ],
    ))
}

/// The result of a non-diagonal evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct NondiagTerm {
    pub value: f64,
    pub integral: Complex64,
    pub quadrature_error: f64,
    pub components: Vec<NamedValue>,
}

fn check_nondiag(spec: &FamilySpec) -> Result<()> {
    if spec.psi.table().pow(2).is_principal() {
        return Err(Error::InvalidInput("𝒩 needs non-quadratic ψ".into()));
    }
    Ok(())
}

/// `𝒩_{h,l,r,ψ,Φ}` by quadrature on `Re s = c_line`. Zero when gcd(l, r) > 1.
pub fn nondiag_constant(spec: &FamilySpec, phi: &dyn TestFunction, conv: &Conventions, c_line: f64) -> Result<NondiagTerm> {
    check_nondiag(spec)?;
    if arith::gcd(spec.l, spec.r) > 1 {
        return Ok(NondiagTerm { value: 0.0, integral: c(0.0), quadrature_error: 0.0, components: vec![NamedValue::note("gcd(l, r) > 1")] });
    }
    let phi_hat0 = mellin(phi, c(0.0), QuadratureSettings::default())?.value.re;
    let psi = spec.psi.table();
    let integrand = NondiagIntegrand::new(&psi, spec.l, spec.r, spec.h, conv.nondiag, CONTOUR_CUTOFF)?;
    let (integral, err) = integrand.integral(c_line)?;
    let (pref, mut comps) = nondiag_prefactor(&spec.psi, spec.r, spec.h, spec.l, phi_hat0, conv.nondiag)?;
    let total = pref * integral;
    comps.push(NamedValue::new("integral", integral));
    comps.push(NamedValue::new("prefactor", pref));
    Ok(NondiagTerm { value: total.re, integral, quadrature_error: err * pref.norm(), components: comps })
}

/// The quartic closed form: `I = Res/(1 + c′)` with `J(−s) = c′ J(s)`,
/// `c′ = q/τ²(ψ̄²)`, and the residue `K′(0) + (ψ(1/4) − γ + log(4lqr/π²) + π/2) K(0)`.
pub fn quartic_closed_form(spec: &FamilySpec, phi: &dyn TestFunction, conv: &Conventions) -> Result<NondiagTerm> {
    check_nondiag(spec)?;
    let q = spec.q();
    if spec.l != 1 || spec.r != 2 * q {
        return Err(Error::InvalidInput("quartic closed form needs l = 1 and r = 2q".into()));
    }
    if !spec.psi.pow(4).is_principal() {
        return Err(Error::InvalidInput("quartic closed form needs ψ⁴ = 1".into()));
    }
    let psi = spec.psi.table();
    let k = KEvaluator::new(&psi, 1, spec.r, conv.nondiag)?;
    let k0 = k.k_at(c(0.0), CONTOUR_CUTOFF)?.value;
    let dk = richardson_derivative(|h| Ok(k.k_at(c(h), CONTOUR_CUTOFF)?.value), super::main_terms::DERIVATIVE_TOL)?;
    let digamma_quarter = statrs::function::gamma::digamma(0.25);
    let lqr = (spec.l * q * spec.r) as f64;
    let residue = dk + k0 * (digamma_quarter - EULER_GAMMA + (4.0 * lqr / (PI * PI)).ln() + PI / 2.0);
    let t2 = tau(&spec.psi.conj().pow(2)).powi(2);
    let cprime = q as f64 / t2;
    let integral = residue / (1.0 + cprime);
    let phi_hat0 = mellin(phi, c(0.0), QuadratureSettings::default())?.value.re;
    let (pref, mut comps) = nondiag_prefactor(&spec.psi, spec.r, spec.h, spec.l, phi_hat0, conv.nondiag)?;
    comps.extend([
        NamedValue::new("K(0)", k0),
        NamedValue::new("K'(0)", dk),
        NamedValue::new("tau^2(psibar^2)", t2),
        NamedValue::new("residue", residue),
    ]);
    Ok(NondiagTerm { value: (pref * integral).re, integral, quadrature_error: 0.0, components: comps })
}

/// `|J(s) − (τ²(χ)/q) J(−s)| / |J(s)|` for the quartic case.
pub fn j_symmetry_residual(psi: &CharTable, q: u64, conv: NondiagPhase, s: Complex64) -> Result<f64> {
    let integrand = NondiagIntegrand::new(psi, 1, 2 * q, 1, conv, CONTOUR_CUTOFF)?;
    let chi = psi.conj().pow(2);
    let t2 = chi.tau().powi(2);
    let a = integrand.j(s)?;
    let b = integrand.j(-s)?;
    Ok((a - t2 / q as f64 * b).norm() / a.norm())
}

/// `Σ_{h mod r, (h,r)=1} ψ̄χ_{r/2}(h)·(h|m)` with exact phase bookkeeping: the
/// signed count of each root of unity is formed first.
pub fn orthogonality_average(psi: &DirichletCharacter, r: u64, m: u64) -> Result<Complex64> {
    if m % 2 == 0 || !factorize(m)?.primes().all(|p| r % p == 0) {
        return Err(Error::InvalidInput(format!("m = {m} must be odd with all primes dividing r = {r}")));
    }
    let base = psibar_chi_half(psi, r)?;
    let order = base.phase_order();
    let mut counts: BTreeMap<u64, i64> = BTreeMap::new();
    for h in 1..r {
        if arith::gcd(h, r) != 1 {
            continue;
        }
        let sign = i64::from(kronecker(h as i64, m as i64));
        if let Some(ph) = base.phase(h as i64) {
            *counts.entry(ph).or_insert(0) += sign;
        }
    }
    // subtract the common multiplicity: Σ_k ζ^k = 0 over all k
    let full = (0..order).map(|k| counts.get(&k).copied().unwrap_or(0)).min().unwrap_or(0);
    let mut acc = Compensated::new();
    for (&k, &n) in &counts {
        let n = n - full;
        if n != 0 {
            let (s, co) = (2.0 * PI * k as f64 / order as f64).sin_cos();
            acc.add(Complex64::new(co, s) * n as f64);
        }
    }
    Ok(acc.value())
}

/// `(1/φ(r)) Σ_h 𝒩_{h,l,r,ψ,Φ}`. The integral depends on h only through
/// `χ_{8h}(p)` for odd `p | r/q` and is shared between h with equal signs.
pub fn nondiag_h_average(psi: &DirichletCharacter, r: u64, l: u64, phi: &dyn TestFunction, conv: &Conventions, c_line: f64) -> Result<(f64, Vec<f64>)> {
    let q = psi.modulus();
    let table = psi.table();
    let phi_hat0 = mellin(phi, c(0.0), QuadratureSettings::default())?.value.re;
    let odd_rq: Vec<u64> = factorize(r / q)?.primes().filter(|&p| p != 2).collect();
    let mut cache: BTreeMap<Vec<i8>, Complex64> = BTreeMap::new();
    let mut values = Vec::new();
    for h in (1..r).step_by(2) {
        if arith::gcd(h, r) != 1 {
            continue;
        }
        let key: Vec<i8> = odd_rq.iter().map(|&p| kronecker(8 * h as i64, p as i64)).collect();
        let integral = match cache.get(&key) {
            Some(&v) => v,
            None => {
                let v = NondiagIntegrand::new(&table, l, r, h, conv.nondiag, CONTOUR_CUTOFF)?.integral(c_line)?.0;
                cache.insert(key, v);
                v
            }
        };
        let (pref, _) = nondiag_prefactor(psi, r, h, l, phi_hat0, conv.nondiag)?;
        values.push((pref * integral).re);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok((mean, values))
}

/// `𝒩` as a degree-0 main term.
pub fn nondiag_polynomial(term: &NondiagTerm) -> MainTermPolynomial {
    MainTermPolynomial::constant(c(term.value))
}
