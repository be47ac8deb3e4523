//! The shifted quadratic Gauss sums τ_k(s) and G_k(s) for odd s, by definition
//! and by the prime-power table.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::arith::{factorize, kronecker};
use crate::numerics::Compensated;

fn roots_of_unity(s: u64) -> Vec<Complex64> {
    (0..s)
        .map(|j| {
            let (sn, cs) = (2.0 * PI * j as f64 / s as f64).sin_cos();
            Complex64::new(cs, sn)
        })
        .collect()
}

/// `τ_k(s) = Σ_{b mod s} (b|s) e(bk/s)` by direct summation.
pub fn tau_k_brute(k: i64, s: u64) -> Complex64 {
    assert!(s % 2 == 1, "s must be odd");
    let roots = roots_of_unity(s);
    let kr = k.rem_euclid(s as i64) as u64;
    let mut acc = Compensated::new();
    for b in 0..s {
        let leg = kronecker(b as i64, s as i64);
        if leg != 0 {
            acc.add(roots[(b * kr % s) as usize] * f64::from(leg));
        }
    }
    acc.value()
}

/// `((1−i)/2 + (−1|s)(1+i)/2)`: 1 for s ≡ 1 (mod 4), −i for s ≡ 3.
pub fn g_prefactor(s: u64) -> Complex64 {
    if s % 4 == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, -1.0)
    }
}

/// `G_k(s)` from the definition.
pub fn g_brute(k: i64, s: u64) -> Complex64 {
    g_prefactor(s) * tau_k_brute(k, s)
}

/// `G_k(p^β)` from the prime-power table.
pub fn g_prime_power(k: i64, p: u64, beta: u32) -> f64 {
    let alpha = if k == 0 {
        u32::MAX
    } else {
        let mut a = 0;
        let mut m = k.unsigned_abs();
        while m % p == 0 {
            m /= p;
            a += 1;
        }
        a
    };
    if beta <= alpha {
        if beta % 2 == 1 {
            0.0
        } else {
            (p.pow(beta) - p.pow(beta - 1)) as f64
        }
    } else if beta == alpha + 1 {
        let pa = p.pow(alpha) as f64;
        if beta % 2 == 0 {
            -pa
        } else {
            let unit = k / p.pow(alpha) as i64;
            f64::from(kronecker(unit, p as i64)) * pa * (p as f64).sqrt()
        }
    } else {
        0.0
    }
}

/// `G_k(s)` as a product of prime-power values. Always real.
pub fn g_formula(k: i64, s: u64) -> f64 {
    assert!(s % 2 == 1, "s must be odd");
    let f = factorize(s).expect("g_formula: factorization range");
    let mut out = 1.0;
    for &(p, beta) in &f.factors {
        out *= g_prime_power(k, p, beta);
        if out == 0.0 {
            break;
        }
    }
    out
}
