//! Exact integer number theory on 64-bit integers.

use std::sync::OnceLock;

use num_integer::{Integer, Roots};

use crate::{Error, Result};

/// Largest prime used for trial division.
pub const TRIAL_LIMIT: u64 = 1_000_000;
/// Euler products may extend their cutoff up to this bound.
pub const PRIME_TABLE_LIMIT: u64 = 10_000_000;

static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();

/// All primes up to [`PRIME_TABLE_LIMIT`], ascending.
pub fn primes() -> &'static [u32] {
    PRIMES.get_or_init(|| {
        let n = PRIME_TABLE_LIMIT as usize;
        let mut composite = vec![false; n + 1];
        let mut out = Vec::with_capacity(700_000);
        for i in 2..=n {
            if !composite[i] {
                out.push(i as u32);
                let mut j = i * i;
                while j <= n {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        out
    })
}

/// Primes `<= limit` (capped at the table size).
pub fn primes_up_to(limit: u64) -> &'static [u32] {
    let ps = primes();
    let end = ps.partition_point(|&p| (p as u64) <= limit);
    &ps[..end]
}

/// Kronecker symbol (a | n), extended to all integer n.
pub fn kronecker(a: i64, n: i64) -> i8 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut result: i8 = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    let tz = n.trailing_zeros();
    if tz > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if tz % 2 == 1 {
            let r = a.rem_euclid(8);
            if r == 3 || r == 5 {
                result = -result;
            }
        }
        n >>= tz;
    }
    // n odd and positive: Jacobi symbol
    result * jacobi(a.rem_euclid(n), n)
}

/// Jacobi symbol (a | n) for odd positive n and 0 <= a < n.
fn jacobi(mut a: i64, mut n: i64) -> i8 {
    let mut t: i8 = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let r = n % 8;
            if r == 3 || r == 5 {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// A positive integer with its prime factorization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactoredInteger {
    pub n: u64,
    pub factors: Vec<(u64, u32)>,
}

impl FactoredInteger {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors.iter().find(|&&(q, _)| q == p).map_or(0, |&(_, e)| e)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }
}

/// Trial division against the prime table.
pub fn factorize(n: u64) -> Result<FactoredInteger> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot factor 0".into()));
    }
    let mut m = n;
    let mut factors = Vec::new();
    for &p in primes_up_to(TRIAL_LIMIT) {
        let p = p as u64;
        if p * p > m {
            break;
        }
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
    }
    if m > 1 {
        // no prime factor below the table limit divides m twice, so m is prime
        // exactly when m < TRIAL_LIMIT²
        if m / TRIAL_LIMIT >= TRIAL_LIMIT {
            return Err(Error::Overflow(n));
        }
        factors.push((m, 1));
    }
    Ok(FactoredInteger { n, factors })
}

/// Möbius function.
pub fn mobius(n: u64) -> i8 {
    match factorize(n) {
        Ok(f) if f.is_squarefree() => {
            if f.factors.len() % 2 == 0 {
                1
            } else {
                -1
            }
        }
        Ok(_) => 0,
        Err(_) => panic!("mobius: {n} outside the factorization range"),
    }
}

/// Euler's totient.
pub fn euler_phi(n: u64) -> u64 {
    let f = factorize(n).expect("euler_phi: factorization range");
    f.factors
        .iter()
        .fold(1, |acc, &(p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// Inverse of `a` modulo `m` in `[0, m)`. Modulus 1 gives 0.
pub fn mod_inverse(a: i64, m: u64) -> Result<u64> {
    if m == 0 {
        return Err(Error::InvalidInput("modulus 0".into()));
    }
    if m == 1 {
        return Ok(0);
    }
    let m_i = m as i128;
    let a_red = (a as i128).rem_euclid(m_i);
    let eg = a_red.extended_gcd(&m_i);
    if eg.gcd != 1 {
        return Err(Error::NotInvertible { a, m });
    }
    Ok(eg.x.rem_euclid(m_i) as u64)
}

/// `l = l1 * l2²` with `l1` squarefree.
pub fn squarefree_decompose(l: u64) -> (u64, u64) {
    let f = factorize(l).expect("squarefree_decompose: factorization range");
    let mut l1 = 1;
    let mut l2 = 1;
    for &(p, e) in &f.factors {
        if e % 2 == 1 {
            l1 *= p;
        }
        l2 *= p.pow(e / 2);
    }
    (l1, l2)
}

/// `fourk = k1 * k2²` with `k1` a fundamental discriminant (1 counts as one).
pub fn fundamental_disc_decompose(fourk: i64) -> Result<(i64, u64)> {
    if fourk == 0 {
        return Err(Error::InvalidInput("fundamental discriminant of 0".into()));
    }
    let sign = fourk.signum();
    let (core, root) = squarefree_decompose(fourk.unsigned_abs());
    let core = sign * core as i64;
    if core.rem_euclid(4) == 1 {
        Ok((core, root))
    } else {
        // core ≡ 2, 3 (mod 4) and fourk is a multiple of 4, so root is even
        if root % 2 != 0 {
            return Err(Error::InvalidInput(format!("{fourk} is not of the form 4k")));
        }
        Ok((4 * core, root / 2))
    }
}

/// `(M_Y(d), μ²(d) − M_Y(d))` with `M_Y(d) = Σ_{k²|d, k≤Y} μ(k)`.
pub fn mobius_truncated(d: u64, y: f64) -> (i64, i64) {
    let f = factorize(d).expect("mobius_truncated: factorization range");
    // only squarefree k built from primes with p² | d contribute
    let ps: Vec<u64> = f.factors.iter().filter(|&&(_, e)| e >= 2).map(|&(p, _)| p).collect();
    let mut my = 0i64;
    for mask in 0u32..(1 << ps.len()) {
        let mut k = 1u64;
        let mut over = false;
        for (i, &p) in ps.iter().enumerate() {
            if mask >> i & 1 == 1 {
                k = k.saturating_mul(p);
                if k as f64 > y {
                    over = true;
                    break;
                }
            }
        }
        if !over && k as f64 <= y {
            my += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    let mu2 = i64::from(f.is_squarefree());
    (my, mu2 - my)
}

/// Members of a progression window with their Möbius values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquarefreeSieveWindow {
    pub lo: u64,
    pub hi: u64,
    pub r: u64,
    pub h: u64,
    /// `(d, μ(d))` for every `d ≡ h (mod r)` in `[lo, hi)`, ascending.
    pub members: Vec<(u64, i8)>,
}

impl SquarefreeSieveWindow {
    pub fn squarefree(&self) -> impl Iterator<Item = u64> + '_ {
        self.members.iter().filter(|&&(_, mu)| mu != 0).map(|&(d, _)| d)
    }
}

const WINDOW: u64 = 1 << 16;

/// Segmented sieve over `[lo, hi)` recording μ for the progression `h mod r`.
pub fn sieve_family(lo: u64, hi: u64, r: u64, h: u64) -> SquarefreeSieveWindow {
    let r = r.max(1);
    let h = h % r;
    let mut members = Vec::new();
    let root = hi.sqrt() + 1;
    let small = primes_up_to(root);
    let mut start = lo.max(1);
    while start < hi {
        let end = (start + WINDOW).min(hi);
        let len = (end - start) as usize;
        let mut rem: Vec<u64> = (start..end).collect();
        let mut mu: Vec<i8> = vec![1; len];
        for &p in small {
            let p = p as u64;
            let first = start.div_ceil(p) * p;
            let mut m = first;
            while m < end {
                let i = (m - start) as usize;
                mu[i] = -mu[i];
                rem[i] /= p;
                if rem[i] % p == 0 {
                    mu[i] = 0;
                }
                m += p;
            }
        }
        for i in 0..len {
            let d = start + i as u64;
            if d % r != h {
                continue;
            }
            let mut m = mu[i];
            if m != 0 && rem[i] > 1 {
                m = -m;
            }
            members.push((d, m));
        }
        start = end;
    }
    SquarefreeSieveWindow { lo, hi, r, h, members }
}

/// Greatest common divisor, re-exported for convenience.
pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Distinct prime divisors of `n`.
pub fn prime_divisors(n: u64) -> Vec<u64> {
    factorize(n).map(|f| f.primes().collect()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn legendre_brute(a: i64, p: i64) -> i8 {
        let a = a.rem_euclid(p);
        if a == 0 {
            return 0;
        }
        if (1..p).any(|x| (x * x) % p == a) {
            1
        } else {
            -1
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(1, 7), 1);
        assert_eq!(kronecker(2, 15), legendre_brute(2, 3) * legendre_brute(2, 5));
        assert_eq!(kronecker(2, 15), 1);
        assert_eq!(kronecker(8, 3), -1);
        assert_eq!(kronecker(5, 0), 0);
        assert_eq!(kronecker(-1, 0), 1);
        assert_eq!(kronecker(3, -1), 1);
        assert_eq!(kronecker(-3, -1), -1);
        assert_eq!(kronecker(5, 2), -1);
        assert_eq!(kronecker(7, 2), 1);
    }

    #[test]
    fn kronecker_matches_euler_criterion() {
        for p in primes_up_to(200).iter().skip(1) {
            let p = *p as i64;
            for a in -3 * p..3 * p {
                if a % p == 0 {
                    continue;
                }
                let mut pow = 1i64;
                let base = a.rem_euclid(p);
                for _ in 0..(p - 1) / 2 {
                    pow = pow * base % p;
                }
                let expect = if pow == 1 { 1 } else { -1 };
                assert_eq!(kronecker(a, p), expect, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn multiplicative_examples() {
        assert_eq!(mobius(1), 1);
        assert_eq!(mobius(12), 0);
        assert_eq!(mobius(30), -1);
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(9), 6);
        assert_eq!(euler_phi(34), 16);
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().factors.is_empty());
        assert_eq!(factorize(12).unwrap().factors, vec![(2, 2), (3, 1)]);
        assert_eq!(factorize(9973).unwrap().factors, vec![(9973, 1)]);
        let big = 1_000_003u64 * 1_000_033;
        assert_eq!(factorize(big), Err(Error::Overflow(big)));
        assert_eq!(factorize(999_983 * 999_979).unwrap().factors.len(), 2);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(3, 7).unwrap(), 5);
        assert_eq!(mod_inverse(1, 1).unwrap(), 0);
        assert_eq!(mod_inverse(5, 34).unwrap(), 7);
        assert_eq!(mod_inverse(-3, 7).unwrap(), 2);
        assert!(mod_inverse(2, 34).is_err());
    }

    #[test]
    fn decompositions() {
        assert_eq!(squarefree_decompose(1), (1, 1));
        assert_eq!(squarefree_decompose(12), (3, 2));
        assert_eq!(squarefree_decompose(360), (10, 6));
        assert_eq!(fundamental_disc_decompose(4).unwrap(), (1, 2));
        assert_eq!(fundamental_disc_decompose(8).unwrap(), (8, 1));
        assert_eq!(fundamental_disc_decompose(36).unwrap(), (1, 6));
        assert_eq!(fundamental_disc_decompose(12).unwrap(), (12, 1));
        assert_eq!(fundamental_disc_decompose(-4).unwrap(), (-4, 1));
        assert_eq!(fundamental_disc_decompose(-12).unwrap(), (-3, 2));
        assert!(fundamental_disc_decompose(0).is_err());
    }

    #[test]
    fn squarefree_recompose_up_to_a_million() {
        for l in 1..=1_000_000u64 {
            let (l1, l2) = squarefree_decompose(l);
            assert_eq!(l1 * l2 * l2, l);
        }
    }

    #[test]
    fn truncated_mobius_examples() {
        assert_eq!(mobius_truncated(4, 2.0), (0, 0));
        assert_eq!(mobius_truncated(4, 1.0), (1, -1));
        assert_eq!(mobius_truncated(6, 1.0), (1, 0));
        assert_eq!(mobius_truncated(36, 6.0), (0, 0));
        assert_eq!(mobius_truncated(36, 5.0), (-1, 1));
    }

    #[test]
    fn truncated_mobius_partition() {
        for d in 1..=100_000u64 {
            let mu2 = i64::from(mobius(d) != 0);
            for y in [1.0, 2.0, 5.0, (d as f64).sqrt()] {
                let (m, r) = mobius_truncated(d, y);
                assert_eq!(m + r, mu2);
            }
            assert_eq!(mobius_truncated(d, (d as f64).sqrt()).1, 0);
        }
    }

    #[test]
    fn sieve_examples() {
        let w = sieve_family(1, 20, 34, 1);
        assert_eq!(w.squarefree().collect::<Vec<_>>(), vec![1]);
        let w = sieve_family(1, 100, 34, 3);
        assert_eq!(w.squarefree().collect::<Vec<_>>(), vec![3, 37, 71]);
        let w = sieve_family(4, 5, 1, 0);
        assert_eq!(w.squarefree().count(), 0);
    }

    proptest! {
        #[test]
        fn kronecker_completely_multiplicative(a in -500i64..500, b in -500i64..500, n in 0i64..400) {
            let n = 2 * n + 1;
            prop_assert_eq!(kronecker(a, n) * kronecker(b, n), kronecker(a * b, n));
        }

        #[test]
        fn sieve_matches_trial_division(lo in 1u64..2_000_000, r in 1u64..60, h in 0u64..60) {
            let w = sieve_family(lo, lo + 10_000, r, h);
            let expect: Vec<(u64, i8)> = (lo..lo + 10_000)
                .filter(|d| d % r == h % r)
                .map(|d| (d, mobius(d)))
                .collect();
            prop_assert_eq!(w.members, expect);
        }

        #[test]
        fn inverse_is_inverse(a in -10_000i64..10_000, m in 2u64..5000) {
            match mod_inverse(a, m) {
                Ok(b) => prop_assert_eq!(((a as i128).rem_euclid(m as i128) * b as i128) % m as i128, 1),
                Err(_) => prop_assert!(gcd(a.unsigned_abs(), m) > 1),
            }
        }
    }
}
