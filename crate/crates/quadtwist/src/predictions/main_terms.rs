//! Diagonal main terms: the first-moment constant, the ψ = 1 first-moment
//! polynomial, and the diagonal part of the second-moment polynomial.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::euler::{certified_product, euler_a, euler_b, euler_c, prime_power, Accelerator, EulerProduct, DEFAULT_CUTOFF};
use super::{Conventions, DiagConvention, MainTermPolynomial, NamedValue, EULER_GAMMA};
use crate::arith::{self, kronecker, squarefree_decompose};
use crate::characters::{twisted_divisor, CharTable, Character};
use crate::lvalues::l_value;
use crate::moments::FamilySpec;
use crate::numerics::{richardson_derivative, QuadratureSettings};
use crate::special_functions::{gamma, gamma_quarter, mellin, TestFunction};
use crate::Result;

/// Richardson tolerance for the residue derivatives.
pub const DERIVATIVE_TOL: f64 = 1e-7;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `p ↦ χ_{8h}(p) ψ(p)`.
fn chi8h_psi(h: u64, psi: &CharTable) -> impl Fn(u64) -> Complex64 + '_ {
    move |p| psi.at(p) * f64::from(kronecker(8 * h as i64, p as i64))
}

/// `L(2, φ₀)` for the principal character mod r.
fn l2_principal(r: u64) -> Result<Complex64> {
    l_value(&CharTable::principal(r), c(2.0))
}

/// A main term together with the values it was assembled from.
#[derive(Clone, Debug, PartialEq)]
pub struct MainTerm {
    pub polynomial: MainTermPolynomial,
    pub components: Vec<NamedValue>,
}

impl MainTerm {
    fn zero(degree: u8, why: &str) -> Self {
        Self {
            polynomial: MainTermPolynomial::zero(degree),
            components: vec![NamedValue::note(why)],
        }
    }
}

/// The first-moment constant `D + ε(h)·conj(D)` for non-quadratic ψ.
pub fn first_moment_constant(spec: &FamilySpec, phi: &dyn TestFunction) -> Result<MainTerm> {
    let (l, r, h, q) = (spec.l, spec.r, spec.h, spec.q());
    if arith::gcd(l, r) > 1 {
        return Ok(MainTerm::zero(0, "gcd(l, r) > 1"));
    }
    let psi = spec.psi.table();
    let psi2 = psi.pow(2);
    if psi2.is_principal() {
        return Err(crate::Error::InvalidInput("first_moment_constant needs non-quadratic ψ".into()));
    }
    let (l1, _) = squarefree_decompose(l);
    let settings = QuadratureSettings::default();
    let phi_hat0 = mellin(phi, c(0.0), settings)?.value;
    let l2 = l2_principal(r)?;
    let a_r = euler_a(r, c(1.0), |p| psi2.at(p))?;
    let b_r = euler_b(r, c(1.0), &psi2)?;
    let l1_psi2 = l_value(&psi2, c(1.0))?;
    let a_rq = euler_a(r / q, c(0.5), chi8h_psi(h, &psi))?;
    let c_rl = euler_c(r, l, c(1.0), &psi2)?;
    let residue = phi_hat0 * a_r * b_r.value * l1_psi2 / (a_rq * c_rl);
    let d = psi.at(l1) / (l2 * (l1 as f64).sqrt() * r as f64) * residue;
    let eps = spec.epsilon();
    let constant = d + eps * d.conj();
    Ok(MainTerm {
        polynomial: MainTermPolynomial::constant(constant),
        components: vec![
            NamedValue::new("Phi_hat(0)", phi_hat0),
            NamedValue::new("L(2,phi0)", l2),
            NamedValue::new("A_r(1,psi^2)", a_r),
            NamedValue::euler("B_r(1,psi^2)", &b_r),
            NamedValue::new("L(1,psi^2)", l1_psi2),
            NamedValue::new("A_{r/q}(1/2,chi_8h psi)", a_rq),
            NamedValue::new("C_{r,l}(1,psi^2)", c_rl),
            NamedValue::new("D", d),
            NamedValue::new("epsilon(h)", eps),
        ],
    })
}

/// The degree-1 first-moment polynomial for trivial ψ. The two AFE halves
/// coincide (ε = 1), so the residue is counted twice.
pub fn first_moment_poly_trivial(spec: &FamilySpec, phi: &dyn TestFunction) -> Result<MainTerm> {
    let (l, r, h, q) = (spec.l, spec.r, spec.h, spec.q());
    if q != 1 {
        return Err(crate::Error::InvalidInput("first_moment_poly_trivial needs q = 1".into()));
    }
    if arith::gcd(l, r) > 1 {
        return Ok(MainTerm::zero(1, "gcd(l, r) > 1"));
    }
    let (l1, _) = squarefree_decompose(l);
    let one = CharTable::principal(1);
    let settings = QuadratureSettings::default();
    let cofactor = |s: f64| -> Result<Complex64> {
        let w = c(2.0 * s + 1.0);
        let a_r = euler_a(r, w, |_| c(1.0))?;
        let b_r = euler_b(r, w, &one)?.value;
        let a_rq = euler_a(r / q, c(s + 0.5), |p| c(f64::from(kronecker(8 * h as i64, p as i64))))?;
        let c_rl = euler_c(r, l, w, &one)?;
        let mel = mellin(phi, c(s / 2.0), settings)?.value;
        let g = gamma(c(s / 2.0 + 0.25)) / gamma_quarter();
        let scale = (s / 2.0 * (8.0 * q as f64 / PI).ln() - s * (l1 as f64).ln()).exp();
        Ok(a_r * b_r * g * mel * scale / (a_rq * c_rl))
    };
    let g0 = cofactor(0.0)?;
    let dg = richardson_derivative(cofactor, DERIVATIVE_TOL)?;
    let pref = 2.0 / (l2_principal(r)? * (l1 as f64).sqrt() * r as f64);
    let c1 = pref * g0 / 4.0;
    let c0 = pref * (g0 * EULER_GAMMA + dg / 2.0);
    Ok(MainTerm {
        polynomial: MainTermPolynomial::linear(c0, c1),
        components: vec![
            NamedValue::new("G(0)", g0),
            NamedValue::new("G'(0)", dg),
            NamedValue::new("prefactor", pref),
        ],
    })
}

/// The η local factor as tabulated in closed form, five cases.
pub fn eta_factor(psi: &CharTable, p: u64, s: Complex64, l: u64, r: u64) -> Complex64 {
    let q = psi.modulus();
    let (l1, _) = squarefree_decompose(l);
    let x = prime_power(p, s);
    let pf = p as f64;
    if q % p == 0 {
        1.0 - x
    } else if r % p == 0 {
        let a = psi.at(p);
        (1.0 - x) * (1.0 - a * a * x) * (1.0 - a.conj() * a.conj() * x)
    } else if l1 % p == 0 {
        (1.0 - x) / (1.0 + 1.0 / pf)
    } else if l % p == 0 {
        (1.0 - x * x) / (1.0 + 1.0 / pf)
    } else {
        let d = psi.at(p) + psi.at(p).conj();
        1.0 - d * d * x / (pf + 1.0) * (1.0 - x) + x / (pf + 1.0) - x * x - x * x / (pf + 1.0)
    }
}

/// The η local factor from the generating function of `d_ψ(p^{2j})`. Agrees
/// with [`eta_factor`] except in the generic case `p ∤ lr`, where the two
/// differ by `p^{−2s}(1 − p^{−s})/(p+1)`; the Dirichlet-series oracle picks
/// this one.
pub fn eta_local(psi: &CharTable, p: u64, s: Complex64, l: u64, r: u64) -> Complex64 {
    if (psi.modulus() * r * l) % p == 0 {
        return eta_factor(psi, p, s, l, r);
    }
    let x = prime_power(p, s);
    let a2 = psi.at(p) * psi.at(p);
    let b2 = a2.conj();
    let pf = p as f64;
    ((1.0 - x) * (1.0 - a2 * x) * (1.0 - b2 * x) + pf * (1.0 - x * x)) / (pf + 1.0)
}

/// `η_ψ(s; l, r)` for Re s > 1/2.
pub fn eta_product(psi: &CharTable, s: Complex64, l: u64, r: u64) -> Result<EulerProduct> {
    let one = CharTable::principal(1);
    let psi2 = psi.pow(2);
    let accel = [
        Accelerator::new(&one, s + 1.0, -1),
        Accelerator::new(&psi2, s + 1.0, -1),
        Accelerator::new(&psi2.conj(), s + 1.0, -1),
        Accelerator::new(&one, 2.0 * s, -1),
    ];
    let sg = s.re;
    let rate = (2.0 + sg).min(1.0 + 2.0 * sg).min(3.0 * sg);
    certified_product(|p| eta_local(psi, p, s, l, r), &accel, rate, DEFAULT_CUTOFF)
}

/// Direct evaluation of `𝓛_ψ(s; l, r) / (d_ψ(l₁) ζ(s) L(s, ψ²) L(s, ψ̄²))`
/// from the coefficients of 𝓛 convolved with the three Möbius inverses,
/// truncated at `n ≤ n_max`. Requires `d_ψ(l₁) ≠ 0`.
pub fn eta_dirichlet_oracle(psi: &CharTable, s: f64, l: u64, r: u64, n_max: usize) -> Result<Complex64> {
    let (l1, _) = squarefree_decompose(l);
    let dl1 = twisted_divisor(psi, l1);
    if dl1.norm() < 1e-12 {
        return Err(crate::Error::InvalidInput(format!("d_ψ({l1}) = 0")));
    }
    let mut a = vec![c(0.0); n_max + 1];
    for n in 1..=n_max {
        if arith::gcd(n as u64, r) != 1 {
            continue;
        }
        let f = arith::factorize(n as u64 * l)?;
        let damp: f64 = f.primes().map(|p| 1.0 / (1.0 + 1.0 / p as f64)).product();
        a[n] = d_psi_l1_n2(psi, n as u64, l1)? / dl1 * damp;
    }
    let mu: Vec<i8> = (0..=n_max).map(|n| if n == 0 { 0 } else { arith::mobius(n as u64) }).collect();
    let psi2 = psi.pow(2);
    for chi in [CharTable::principal(1), psi2.clone(), psi2.conj()] {
        let mut out = vec![c(0.0); n_max + 1];
        for d in 1..=n_max {
            if mu[d] == 0 {
                continue;
            }
            let w = chi.at(d as u64) * f64::from(mu[d]);
            if w.norm_sqr() == 0.0 {
                continue;
            }
            for k in 1..=n_max / d {
                out[d * k] += w * a[k];
            }
        }
        a = out;
    }
    Ok(crate::numerics::kahan_sum((1..=n_max).map(|n| a[n] * (n as f64).powf(-s))))
}

/// `d_ψ(l₁ n²)` from the factorizations of n and l₁.
fn d_psi_l1_n2(psi: &CharTable, n: u64, l1: u64) -> Result<Complex64> {
    let fl = arith::factorize(l1)?;
    let fnn = arith::factorize(n)?;
    let mut exps: Vec<(u64, u32)> = fnn.factors.iter().map(|&(p, e)| (p, 2 * e)).collect();
    for p in fl.primes() {
        match exps.iter_mut().find(|(q, _)| *q == p) {
            Some(slot) => slot.1 += 1,
            None => exps.push((p, 1)),
        }
    }
    let mut out = c(1.0);
    for (p, k) in exps {
        let a = psi.at(p);
        let b = a.conj();
        out *= (0..=k).map(|j| a.powu(j) * b.powu(k - j)).sum::<Complex64>();
    }
    Ok(out)
}

/// The diagonal second-moment polynomial. `DiagConvention::Derived` keeps
/// the factor 2 from the two halves of the approximate functional equation.
pub fn second_moment_diag_poly(spec: &FamilySpec, phi: &dyn TestFunction, conv: &Conventions) -> Result<MainTerm> {
    let (l, r, h, q) = (spec.l, spec.r, spec.h, spec.q());
    if arith::gcd(l, r) > 1 {
        return Ok(MainTerm::zero(1, "gcd(l, r) > 1"));
    }
    let psi = spec.psi.table();
    let psi2 = psi.pow(2);
    if psi2.is_principal() {
        return Err(crate::Error::InvalidInput("second_moment_diag_poly needs non-quadratic ψ".into()));
    }
    let psib2 = psi2.conj();
    let (l1, _) = squarefree_decompose(l);
    let settings = QuadratureSettings::default();
    let psib = psi.conj();
    let cofactor = |s: f64| -> Result<Complex64> {
        let w = c(2.0 * s + 1.0);
        let g = gamma(c(s / 2.0 + 0.25)) / gamma_quarter();
        let mel = mellin(phi, c(s), settings)?.value;
        let ls = l_value(&psi2, w)? * l_value(&psib2, w)?;
        let eta = eta_product(&psi, w, l, r)?.value;
        let aa = euler_a(r / q, c(s + 0.5), chi8h_psi(h, &psi))? * euler_a(r / q, c(s + 0.5), chi8h_psi(h, &psib))?;
        let scale = (s * (8.0 * q as f64 / (PI * l1 as f64)).ln()).exp();
        Ok(g * g * mel * ls * eta * scale / aa)
    };
    let g0 = cofactor(0.0)?;
    let dg = richardson_derivative(cofactor, DERIVATIVE_TOL)?;
    let factor = match conv.diag {
        DiagConvention::Derived => 2.0,
        DiagConvention::Halved => 1.0,
    };
    let pref = factor * twisted_divisor(&psi, l1) / (l2_principal(r)? * (l1 as f64).sqrt() * r as f64);
    let c1 = pref * g0 / 2.0;
    let c0 = pref * (g0 * EULER_GAMMA + dg / 2.0);
    let eta1 = eta_product(&psi, c(1.0), l, r)?;
    Ok(MainTerm {
        polynomial: MainTermPolynomial::linear(c0, c1),
        components: vec![
            NamedValue::euler("eta(1;l,r)", &eta1),
            NamedValue::new("G(0)", g0),
            NamedValue::new("G'(0)", dg),
            NamedValue::new("prefactor", pref),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{even_primitive_of_order, DirichletCharacter};
    use crate::special_functions::phi_default;
    use proptest::prelude::*;

    fn quartic17() -> DirichletCharacter {
        even_primitive_of_order(17, 4).unwrap()
    }

    fn spec(h: u64, l: u64) -> FamilySpec {
        FamilySpec::new(quartic17(), 34, h, l, 65536.0, 4.0, 0.01).unwrap()
    }

    #[test]
    fn eta_local_differs_from_table_by_one_term() {
        let t = quartic17().table();
        for p in [3u64, 5, 101] {
            for s in [c(1.0), Complex64::new(0.7, 3.0)] {
                let x = prime_power(p, s);
                let gap = eta_local(&t, p, s, 1, 34) - eta_factor(&t, p, s, 1, 34);
                assert!((gap - x * x * (1.0 - x) / (p as f64 + 1.0)).norm() < 1e-15);
            }
        }
        // the remaining cases coincide
        for (p, l) in [(17u64, 1u64), (2, 1), (3, 3), (3, 9)] {
            assert_eq!(eta_local(&t, p, c(1.0), l, 34), eta_factor(&t, p, c(1.0), l, 34));
        }
    }

    #[test]
    fn eta_matches_dirichlet_series() {
        let t = quartic17().table();
        let e = eta_product(&t, c(1.5), 1, 34).unwrap();
        let o = eta_dirichlet_oracle(&t, 1.5, 1, 34, 200_000).unwrap();
        // the truncated series converges slowly; 2e5 terms give about six digits
        assert!((e.value - o).norm() < 2e-6 * o.norm(), "{} {o}", e.value);
        assert!((e.value.re - 0.270_146_334).abs() < 1e-8);
        // the tabulated generic factor misses by about 2.4e-3
        let table = super::super::euler::product_at(|p| eta_factor(&t, p, c(1.5), 1, 34), &[], 3.0, 100_000).unwrap();
        assert!((table.value - o).norm() > 1e-3);
    }

    #[test]
    fn eta_oracle_rejects_vanishing_d_psi() {
        // 3 is a primitive root mod 17, so ψ(3) = ±i and d_ψ(3) = 0
        assert!(eta_dirichlet_oracle(&quartic17().table(), 1.5, 3, 34, 100).is_err());
    }

    #[test]
    fn first_moment_constant_fixture() {
        let phi = phi_default();
        let m = first_moment_constant(&spec(1, 1), &phi).unwrap();
        let want = Complex64::new(3.757_383_104_805_382e-5, -7.700_685_950_839_31e-5);
        assert!((m.polynomial.coefficients[0] - want).norm() < 1e-10 * want.norm());
        let zero = first_moment_constant(&spec(1, 2), &phi).unwrap();
        assert!(zero.polynomial.is_zero());
        let quadratic = even_primitive_of_order(17, 2).unwrap();
        let s = FamilySpec::new(quadratic, 34, 1, 1, 1e4, 3.0, 0.01).unwrap();
        assert!(first_moment_constant(&s, &phi).is_err());
    }

    #[test]
    fn diag_polynomial_fixture_and_conventions() {
        let phi = phi_default();
        let derived = second_moment_diag_poly(&spec(1, 1), &phi, &Conventions::default()).unwrap().polynomial;
        let want = [1.490_856_622_674_353_4e-4, 1.862_198_327_419_396_6e-5];
        for (got, w) in derived.coefficients.iter().zip(want) {
            assert!((got.re - w).abs() < 1e-9 * w && got.im.abs() < 1e-15);
        }
        let halved = Conventions { diag: DiagConvention::Halved, ..Default::default() };
        let half = second_moment_diag_poly(&spec(1, 1), &phi, &halved).unwrap().polynomial;
        assert!((half.coefficients[1] * 2.0 - derived.coefficients[1]).norm() < 1e-18);
        // d_ψ(3) = 0 removes the diagonal at l = 3
        let l3 = second_moment_diag_poly(&spec(1, 3), &phi, &Conventions::default()).unwrap().polynomial;
        assert!(l3.coefficients.iter().all(|c| c.norm() < 1e-18));
    }

    #[test]
    fn trivial_psi_polynomial_is_positive() {
        let one = DirichletCharacter::principal(1);
        let s = FamilySpec::new(one, 2, 1, 1, 1e4, 3.0, 0.01).unwrap();
        let m = first_moment_poly_trivial(&s, &phi_default()).unwrap();
        let [c0, c1] = [m.polynomial.coefficients[0], m.polynomial.coefficients[1]];
        assert!(c1.re > 0.0 && c1.im.abs() < 1e-15 && c0.re.is_finite());
        assert!(first_moment_poly_trivial(&spec(1, 1), &phi_default()).is_err());
    }

    proptest! {
        #[test]
        fn eta_local_is_one_at_infinity(pi in 0usize..200) {
            // η_p → 1 as Re s → ∞
            let p = crate::arith::primes()[pi] as u64;
            let t = quartic17().table();
            let v = eta_local(&t, p, c(60.0), 1, 34);
            prop_assert!((v - 1.0).norm() < 1e-15);
        }
    }
}
