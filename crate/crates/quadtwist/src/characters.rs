//! Dirichlet characters via the CRT decomposition of the unit group.
//!
//! Values are exact exponents into a table of roots of unity of order equal to
//! the exponent of the group; floating point enters only when a value is
//! embedded in the complex plane.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use num_integer::Integer;

use crate::arith::{self, factorize, kronecker};
use crate::{Error, Result};

/// Anything that can be evaluated as a periodic multiplicative function.
pub trait Character: Sync {
    fn modulus(&self) -> u64;
    fn value(&self, n: i64) -> Complex64;
}

#[derive(Debug)]
struct Component {
    p: u64,
    e: u32,
    q: u64,
    /// local generators with their orders
    gens: Vec<(u64, u64)>,
    /// exponent vector of each residue mod q (empty for non-units)
    dlog: Vec<Option<[u64; 2]>>,
}

impl Component {
    fn new(p: u64, e: u32) -> Self {
        let q = p.pow(e);
        let mut dlog = vec![None; q as usize];
        let gens = if p == 2 {
            match e {
                1 => {
                    dlog[1] = Some([0, 0]);
                    vec![]
                }
                2 => {
                    dlog[1] = Some([0, 0]);
                    dlog[3] = Some([1, 0]);
                    vec![(3, 2)]
                }
                _ => {
                    let half = q / 4;
                    let mut five = 1u64;
                    for b in 0..half {
                        dlog[five as usize] = Some([0, b]);
                        dlog[(q - five) as usize] = Some([1, b]);
                        five = five * 5 % q;
                    }
                    vec![(q - 1, 2), (5, half)]
                }
            }
        } else {
            let phi = q / p * (p - 1);
            let g = least_primitive_root(p, q, phi);
            let mut x = 1u64;
            for k in 0..phi {
                dlog[x as usize] = Some([k, 0]);
                x = x * g % q;
            }
            vec![(g, phi)]
        };
        Self { p, e, q, gens, dlog }
    }
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    r
}

fn least_primitive_root(p: u64, q: u64, phi: u64) -> u64 {
    let qs = arith::prime_divisors(phi);
    (2..q)
        .find(|&g| g % p != 0 && qs.iter().all(|&f| pow_mod(g, phi / f, q) != 1))
        .expect("odd prime powers are cyclic")
}

/// The unit group mod N with its generators and discrete-log tables.
#[derive(Debug)]
pub struct CharacterGroup {
    modulus: u64,
    components: Vec<Component>,
    /// `(component index, slot)` for each global generator
    slots: Vec<(usize, usize)>,
    /// global generators lifted by CRT, with their orders
    generators: Vec<(u64, u64)>,
    /// exponent of the group
    exponent: u64,
    roots: Vec<Complex64>,
}

static GROUPS: OnceLock<Mutex<HashMap<u64, Arc<CharacterGroup>>>> = OnceLock::new();

impl CharacterGroup {
    /// Shared group for modulus `n`.
    pub fn new(n: u64) -> Arc<Self> {
        assert!(n >= 1, "modulus must be positive");
        let map = GROUPS.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(g) = map.lock().expect("group cache").get(&n) {
            return g.clone();
        }
        let g = Arc::new(Self::build(n));
        map.lock().expect("group cache").entry(n).or_insert(g).clone()
    }

    fn build(n: u64) -> Self {
        let f = factorize(n).expect("character modulus must be factorable");
        let components: Vec<Component> =
            f.factors.iter().map(|&(p, e)| Component::new(p, e)).collect();
        let mut slots = Vec::new();
        let mut generators = Vec::new();
        for (ci, c) in components.iter().enumerate() {
            let rest = n / c.q;
            for (si, &(g, m)) in c.gens.iter().enumerate() {
                // x ≡ g (mod q), x ≡ 1 (mod rest)
                let lift = if rest == 1 {
                    g
                } else {
                    let inv = arith::mod_inverse(rest as i64, c.q).expect("coprime");
                    let t = ((g + c.q - 1) % c.q) as u128 * inv as u128 % c.q as u128;
                    ((1 + t * rest as u128) % n as u128) as u64
                };
                slots.push((ci, si));
                generators.push((lift, m));
            }
        }
        let exponent = generators.iter().fold(1u64, |acc, &(_, m)| acc.lcm(&m));
        let roots = root_table(exponent);
        Self { modulus: n, components, slots, generators, exponent, roots }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn generators(&self) -> &[(u64, u64)] {
        &self.generators
    }

    pub fn order(&self) -> u64 {
        self.generators.iter().map(|&(_, m)| m).product()
    }

    /// Exponent vector of `n` on the generators, or `None` for non-units.
    pub fn dlog(&self, n: i64) -> Option<Vec<u64>> {
        let r = n.rem_euclid(self.modulus as i64) as u64;
        let mut local = Vec::with_capacity(self.components.len());
        for c in &self.components {
            local.push(c.dlog[(r % c.q) as usize]?);
        }
        Some(self.slots.iter().map(|&(ci, si)| local[ci][si]).collect())
    }

    /// Whether `n` is a unit mod N.
    pub fn is_unit(&self, n: u64) -> bool {
        arith::gcd(n, self.modulus) == 1
    }
}

fn root_table(m: u64) -> Vec<Complex64> {
    (0..m)
        .map(|k| {
            let (s, c) = (2.0 * PI * k as f64 / m as f64).sin_cos();
            Complex64::new(c, s)
        })
        .collect()
}

/// A character mod N given by exponents on the group generators.
#[derive(Clone, Debug)]
pub struct DirichletCharacter {
    group: Arc<CharacterGroup>,
    exponents: Vec<u64>,
}

impl PartialEq for DirichletCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.group.modulus == other.group.modulus && self.exponents == other.exponents
    }
}

/// Parity, order and conductor of a character.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub is_even: bool,
    pub order: u64,
    pub is_primitive: bool,
    pub conductor: u64,
}

impl DirichletCharacter {
    pub fn new(group: Arc<CharacterGroup>, exponents: Vec<u64>) -> Result<Self> {
        if exponents.len() != group.generators.len() {
            return Err(Error::InvalidInput(format!(
                "modulus {} needs {} exponents, got {}",
                group.modulus,
                group.generators.len(),
                exponents.len()
            )));
        }
        let exponents =
            exponents.iter().zip(&group.generators).map(|(&e, &(_, m))| e % m).collect();
        Ok(Self { group, exponents })
    }

    pub fn principal(n: u64) -> Self {
        let group = CharacterGroup::new(n);
        let exponents = vec![0; group.generators.len()];
        Self { group, exponents }
    }

    /// Recover a character from its values; fails if `f` is not a character mod n.
    pub fn from_fn(n: u64, f: impl Fn(i64) -> Complex64) -> Result<Self> {
        let group = CharacterGroup::new(n);
        let mut exponents = Vec::new();
        for &(g, m) in &group.generators {
            let v = f(g as i64);
            let turns = v.arg() / (2.0 * PI) * m as f64;
            exponents.push((turns.round() as i64).rem_euclid(m as i64) as u64);
        }
        let chi = Self { group, exponents };
        for a in 0..n as i64 {
            if (chi.value(a) - f(a)).norm() > 1e-9 {
                return Err(Error::InvalidInput(format!("values are not a character mod {n}")));
            }
        }
        Ok(chi)
    }

    pub fn group(&self) -> &Arc<CharacterGroup> {
        &self.group
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    /// Canonical label `N:e1,e2,...`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.exponents.iter().map(|e| e.to_string()).collect();
        format!("{}:{}", self.group.modulus, parts.join(","))
    }

    /// Phase index into the exponent-order roots of unity, `None` off the units.
    pub fn phase(&self, n: i64) -> Option<u64> {
        let g = &self.group;
        let logs = g.dlog(n)?;
        let l = g.exponent;
        let mut acc = 0u64;
        for ((x, e), &(_, m)) in logs.iter().zip(&self.exponents).zip(&g.generators) {
            acc = (acc + (x * e % m) * (l / m)) % l;
        }
        Some(acc)
    }

    pub fn phase_order(&self) -> u64 {
        self.group.exponent
    }

    pub fn conj(&self) -> Self {
        let exponents = self
            .exponents
            .iter()
            .zip(&self.group.generators)
            .map(|(&e, &(_, m))| (m - e) % m)
            .collect();
        Self { group: self.group.clone(), exponents }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.group.modulus, other.group.modulus, "same modulus required");
        let exponents = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .zip(&self.group.generators)
            .map(|((&a, &b), &(_, m))| (a + b) % m)
            .collect();
        Self { group: self.group.clone(), exponents }
    }

    pub fn pow(&self, k: u64) -> Self {
        let exponents = self
            .exponents
            .iter()
            .zip(&self.group.generators)
            .map(|(&e, &(_, m))| e * (k % m) % m)
            .collect();
        Self { group: self.group.clone(), exponents }
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    pub fn classify(&self) -> Classification {
        let is_even = self.phase(-1).is_none_or(|p| p == 0);
        let order = self
            .exponents
            .iter()
            .zip(&self.group.generators)
            .fold(1u64, |acc, (&e, &(_, m))| acc.lcm(&(m / e.gcd(&m))));
        let conductor = self.conductor();
        Classification { is_even, order, is_primitive: conductor == self.group.modulus, conductor }
    }

    fn conductor(&self) -> u64 {
        let g = &self.group;
        let n = g.modulus;
        let mut cond = 1u64;
        for c in &g.components {
            // smallest f with the character trivial on units ≡ 1 (mod p^f) of this component
            let rest = n / c.q;
            let mut f_found = c.e;
            for f in 0..=c.e {
                let pf = c.p.pow(f);
                let trivial = (0..c.q / pf).all(|t| {
                    let u = 1 + t * pf;
                    if u % c.p == 0 {
                        return true;
                    }
                    // embed u into Z/N as ≡ u mod q, ≡ 1 elsewhere
                    let lifted = crt_pair(u % c.q, c.q, 1, rest);
                    self.phase(lifted as i64) == Some(0)
                });
                if trivial {
                    f_found = f;
                    break;
                }
            }
            cond *= c.p.pow(f_found);
        }
        cond
    }

    /// The primitive character mod the conductor that induces this one.
    pub fn induce_primitive(&self) -> Self {
        let n = self.group.modulus;
        let m = self.conductor();
        let target = CharacterGroup::new(m);
        let mut exponents = Vec::new();
        for &(g, order) in &target.generators {
            let mut a = g;
            while arith::gcd(a, n) != 1 {
                a += m;
            }
            let x = self.phase(a as i64).expect("lifted generator is a unit");
            let l = self.group.exponent;
            assert_eq!(x * order % l, 0, "induced value must have the generator's order");
            exponents.push(x * order / l);
        }
        Self { group: target, exponents }
    }

    /// Lift to a multiple modulus `m` (values at non-units mod m become 0).
    pub fn lift(&self, m: u64) -> Result<Self> {
        if m % self.group.modulus != 0 {
            return Err(Error::InvalidInput(format!(
                "{m} is not a multiple of {}",
                self.group.modulus
            )));
        }
        Self::from_fn(m, |a| {
            if arith::gcd(a.rem_euclid(m as i64) as u64, m) == 1 {
                self.value(a)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Table of values on 0..N.
    pub fn table(&self) -> CharTable {
        CharTable::from_character(self)
    }
}

impl Character for DirichletCharacter {
    fn modulus(&self) -> u64 {
        self.group.modulus
    }

    fn value(&self, n: i64) -> Complex64 {
        match self.phase(n) {
            Some(k) => self.group.roots[k as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }
}

fn crt_pair(a: u64, m: u64, b: u64, n: u64) -> u64 {
    if n == 1 {
        return a % m;
    }
    // x = a + m t with a + m t ≡ b (mod n)
    let inv = arith::mod_inverse(m as i64, n).expect("coprime moduli");
    let diff = (b as i128 - a as i128).rem_euclid(n as i128) as u128;
    let t = diff * inv as u128 % n as u128;
    (a as u128 + m as u128 * t) as u64
}

/// All characters mod N, in lexicographic order of exponent vectors.
pub fn enumerate_characters(n: u64) -> Vec<DirichletCharacter> {
    let group = CharacterGroup::new(n);
    let orders: Vec<u64> = group.generators.iter().map(|&(_, m)| m).collect();
    let total: u64 = orders.iter().product();
    let mut out = Vec::with_capacity(total as usize);
    let mut exps = vec![0u64; orders.len()];
    for _ in 0..total {
        out.push(DirichletCharacter { group: group.clone(), exponents: exps.clone() });
        for i in (0..exps.len()).rev() {
            exps[i] += 1;
            if exps[i] < orders[i] {
                break;
            }
            exps[i] = 0;
        }
    }
    out
}

/// The smallest-label even primitive character mod n of the given order.
pub fn even_primitive_of_order(n: u64, order: u64) -> Option<DirichletCharacter> {
    enumerate_characters(n).into_iter().find(|c| {
        let k = c.classify();
        k.is_even && k.is_primitive && k.order == order
    })
}

/// Gauss sum with exact phase arithmetic.
pub fn tau(chi: &DirichletCharacter) -> Complex64 {
    let n = chi.group.modulus;
    let l = chi.group.exponent;
    let denom = l as u128 * n as u128;
    let mut acc = crate::numerics::Compensated::new();
    for a in 0..n {
        if let Some(x) = chi.phase(a as i64) {
            let num = (x as u128 * n as u128 + a as u128 * l as u128) % denom;
            let (s, c) = (2.0 * PI * (num as f64 / denom as f64)).sin_cos();
            acc.add(Complex64::new(c, s));
        }
    }
    acc.value()
}

/// `d_ψ(n) = Σ_{d|n} ψ(d) ψ̄(n/d)`.
pub fn twisted_divisor(psi: &impl Character, n: u64) -> Complex64 {
    let f = factorize(n).expect("twisted_divisor: factorization range");
    let mut out = Complex64::new(1.0, 0.0);
    for &(p, k) in &f.factors {
        let v = psi.value(p as i64);
        let w = v.conj();
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..=k {
            s += v.powu(j) * w.powu(k - j);
        }
        out *= s;
    }
    out
}

/// `ε(h) = τ(ψ)/√q · ψ(8h) · χ_{8h}(q)`.
pub fn epsilon_factor(psi: &DirichletCharacter, h: i64) -> Result<Complex64> {
    let q = psi.modulus();
    if arith::gcd((8 * h).unsigned_abs(), q) != 1 {
        return Err(Error::InvalidInput(format!("gcd(8·{h}, {q}) > 1")));
    }
    let t = tau(psi) / (q as f64).sqrt();
    Ok(t * psi.value(8 * h) * f64::from(kronecker(8 * h, q as i64)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrigKind {
    Cos,
    Sin,
}

/// `⟨f(2πk·/r), φ̄⟩ = Σ_{a mod r} f(2πka/r) φ(a)`.
pub fn trig_expansion_coefficient(
    kind: TrigKind,
    k: i64,
    r: u64,
    phi: &DirichletCharacter,
) -> Result<Complex64> {
    if phi.modulus() != r {
        return Err(Error::InvalidInput("character modulus must equal r".into()));
    }
    let mut acc = crate::numerics::Compensated::new();
    for a in 0..r {
        let frac = (k.rem_euclid(r as i64) as u64 * a % r) as f64 / r as f64;
        let (s, c) = (2.0 * PI * frac).sin_cos();
        let f = match kind {
            TrigKind::Cos => c,
            TrigKind::Sin => s,
        };
        acc.add(phi.value(a as i64) * f);
    }
    Ok(acc.value())
}

/// The Jacobi symbol `(· | m)` as a character mod `m` (odd m).
pub fn jacobi_character(m: u64) -> Result<DirichletCharacter> {
    if m % 2 == 0 {
        return Err(Error::InvalidInput(format!("Jacobi modulus {m} must be odd")));
    }
    DirichletCharacter::from_fn(m, |a| Complex64::new(f64::from(kronecker(a, m as i64)), 0.0))
}

/// `ψ̄ χ_{r/2}` as a character mod r/2, where χ_{r/2} is the Jacobi symbol.
pub fn psibar_chi_half(psi: &DirichletCharacter, r: u64) -> Result<DirichletCharacter> {
    if r % 2 != 0 || r % psi.modulus() != 0 {
        return Err(Error::InvalidInput(format!("r = {r} must be even and divisible by q")));
    }
    let half = r / 2;
    let chi = jacobi_character(half)?;
    Ok(psi.conj().lift(half)?.mul(&chi))
}

/// `Σ_{a mod r} e(sign·k²a/r) φ₀ψ̄χ_{r/2}(a)` by direct summation.
pub fn exp_inner_product_direct(k: i64, r: u64, psi: &DirichletCharacter, sign: i64) -> Result<Complex64> {
    let base = psibar_chi_half(psi, r)?;
    let k2 = (k.rem_euclid(r as i64) as u128 * k.rem_euclid(r as i64) as u128 % r as u128) as u64;
    let mut acc = crate::numerics::Compensated::new();
    for a in 0..r {
        if a % 2 == 0 {
            continue;
        }
        let frac = (k2 * a % r) as f64 / r as f64;
        let (s, c) = (2.0 * PI * sign as f64 * frac).sin_cos();
        acc.add(base.value(a as i64) * Complex64::new(c, s));
    }
    Ok(acc.value())
}

/// Closed form `(−1)^k · ψ̄χ_{r/2}(2) · ψχ_{r/2}(k²) · τ(ψ̄χ_{r/2})`.
///
/// Requires `ψ̄χ_{r/2}` primitive mod r/2. For quartic ψ this coincides with
/// `(−1)^k ψ̄χ_{r/2}(2k²) τ(ψ̄χ_{r/2})`.
pub fn exp_inner_product_closed_form(k: i64, r: u64, psi: &DirichletCharacter) -> Result<Complex64> {
    let base = psibar_chi_half(psi, r)?;
    if r == 2 {
        return Ok(Complex64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
    }
    if !base.classify().is_primitive {
        return Err(Error::InvalidInput("ψ̄χ_{r/2} must be primitive".into()));
    }
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let k2 = (k as i128 * k as i128).rem_euclid(r as i128 / 2) as i64;
    Ok(base.value(2) * base.conj().value(k2) * tau(&base) * sign)
}

/// Dense table of character values on `0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharTable {
    modulus: u64,
    values: Vec<Complex64>,
}

impl CharTable {
    pub fn from_character(chi: &impl Character) -> Self {
        let n = chi.modulus();
        Self { modulus: n, values: (0..n).map(|a| chi.value(a as i64)).collect() }
    }

    pub fn from_values(modulus: u64, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len() as u64, modulus);
        Self { modulus, values }
    }

    pub fn principal(n: u64) -> Self {
        Self::from_values(
            n,
            (0..n)
                .map(|a| Complex64::new(if arith::gcd(a, n) == 1 { 1.0 } else { 0.0 }, 0.0))
                .collect(),
        )
    }

    /// `χ_D = (D | ·)` with period |D| (D a fundamental discriminant).
    pub fn kronecker(d: i64) -> Self {
        let n = d.unsigned_abs();
        Self::from_values(
            n,
            (0..n).map(|a| Complex64::new(f64::from(kronecker(d, a as i64)), 0.0)).collect(),
        )
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, n: u64) -> Complex64 {
        self.values[(n % self.modulus) as usize]
    }

    pub fn conj(&self) -> Self {
        Self::from_values(self.modulus, self.values.iter().map(|v| v.conj()).collect())
    }

    pub fn mul(&self, other: &CharTable) -> Self {
        let m = self.modulus.lcm(&other.modulus);
        Self::from_values(m, (0..m).map(|a| self.at(a) * other.at(a)).collect())
    }

    pub fn pow(&self, k: u32) -> Self {
        Self::from_values(self.modulus, self.values.iter().map(|v| v.powu(k)).collect())
    }

    /// Gauss sum with floating phases.
    pub fn tau(&self) -> Complex64 {
        let n = self.modulus;
        crate::numerics::kahan_sum((0..n).map(|a| {
            let (s, c) = (2.0 * PI * a as f64 / n as f64).sin_cos();
            self.values[a as usize] * Complex64::new(c, s)
        }))
    }

    pub fn is_principal(&self) -> bool {
        (0..self.modulus).all(|a| {
            let v = self.values[a as usize];
            if arith::gcd(a, self.modulus) == 1 {
                (v - 1.0).norm() < 1e-12
            } else {
                v.norm() < 1e-12
            }
        })
    }
}

impl Character for CharTable {
    fn modulus(&self) -> u64 {
        self.modulus
    }

    fn value(&self, n: i64) -> Complex64 {
        self.values[n.rem_euclid(self.modulus as i64) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn group_sizes() {
        for n in 1..=300u64 {
            let g = CharacterGroup::new(n);
            assert_eq!(g.order(), arith::euler_phi(n), "n={n}");
            let mut seen = std::collections::HashSet::new();
            for a in 0..n {
                if let Some(v) = g.dlog(a as i64) {
                    assert!(seen.insert(v));
                }
            }
            assert_eq!(seen.len() as u64, arith::euler_phi(n));
        }
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(enumerate_characters(1).len(), 1);
        let five = enumerate_characters(5);
        let mut orders: Vec<u64> = five.iter().map(|c| c.classify().order).collect();
        orders.sort();
        assert_eq!(orders, vec![1, 2, 4, 4]);
        assert_eq!(enumerate_characters(34).len(), 16);
    }

    #[test]
    fn evaluate_examples() {
        let p5 = DirichletCharacter::principal(5);
        assert!(close(p5.value(7), Complex64::new(1.0, 0.0), 0.0));
        let g = CharacterGroup::new(5);
        assert_eq!(g.generators()[0].0, 2);
        let chi = DirichletCharacter::new(g, vec![1]).unwrap();
        assert!(close(chi.value(2), Complex64::i(), 1e-15));
        assert!(close(chi.value(4), Complex64::new(-1.0, 0.0), 1e-15));
        for c in enumerate_characters(34) {
            assert_eq!(c.value(17), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn classify_examples() {
        let k = DirichletCharacter::principal(5).classify();
        assert_eq!(k, Classification { is_even: true, order: 1, is_primitive: false, conductor: 1 });
        let g17 = CharacterGroup::new(17);
        assert_eq!(g17.generators()[0].0, 3);
        let quartic = DirichletCharacter::new(g17, vec![4]).unwrap();
        assert!(close(quartic.value(3), Complex64::i(), 1e-15));
        let k = quartic.classify();
        assert!(k.is_even && k.order == 4 && k.is_primitive && k.conductor == 17);
        let leg = jacobi_character(5).unwrap();
        assert_eq!(leg.classify(), Classification { is_even: true, order: 2, is_primitive: true, conductor: 5 });
        assert_eq!(DirichletCharacter::principal(1).classify().conductor, 1);
    }

    #[test]
    fn conductors_match_brute_force() {
        for n in 1..=120u64 {
            for chi in enumerate_characters(n) {
                let brute = (1..=n)
                    .filter(|m| n % m == 0)
                    .find(|&m| {
                        (0..n).all(|a| {
                            if arith::gcd(a, n) != 1 || a % m != 1 % m {
                                return true;
                            }
                            close(chi.value(a as i64), Complex64::new(1.0, 0.0), 1e-12)
                        })
                    })
                    .unwrap();
                assert_eq!(chi.classify().conductor, brute, "{}", chi.label());
            }
        }
    }

    #[test]
    fn induce_primitive_examples() {
        let p = DirichletCharacter::principal(34).induce_primitive();
        assert_eq!(p.modulus(), 1);
        let psi = even_primitive_of_order(17, 4).unwrap();
        let lifted = psibar_chi_half(&psi, 34).unwrap().lift(34).unwrap();
        let prim = lifted.induce_primitive();
        assert_eq!(prim.modulus(), 17);
        for a in 0..34 {
            if a % 2 == 1 {
                assert!(close(prim.value(a), lifted.value(a), 1e-12));
            }
        }
        assert_eq!(psi.induce_primitive(), psi);
        for n in [12u64, 40, 45, 63, 100] {
            for chi in enumerate_characters(n) {
                let prim = chi.induce_primitive();
                assert!(prim.classify().is_primitive);
                for a in 0..n as i64 {
                    if arith::gcd(a as u64, n) == 1 {
                        assert!(close(prim.value(a), chi.value(a), 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_sum_examples() {
        assert!(close(tau(&DirichletCharacter::principal(1)), Complex64::new(1.0, 0.0), 1e-15));
        let leg = jacobi_character(5).unwrap();
        assert!(close(tau(&leg), Complex64::new(5f64.sqrt(), 0.0), 1e-13));
        for n in 1..=50u64 {
            for chi in enumerate_characters(n) {
                if chi.classify().is_primitive {
                    assert!((tau(&chi).norm() - (n as f64).sqrt()).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn orthogonality_and_multiplicativity() {
        for n in 1..=100u64 {
            for chi in enumerate_characters(n) {
                let s: Complex64 = (0..n).map(|a| chi.value(a as i64)).sum();
                if chi.is_principal() {
                    assert!((s.re - arith::euler_phi(n) as f64).abs() < 1e-9);
                } else {
                    assert!(s.norm() < 1e-12, "n={n} {}", chi.label());
                    let exact: u64 = (0..n).filter_map(|a| chi.phase(a as i64)).count() as u64;
                    assert_eq!(exact, arith::euler_phi(n));
                }
            }
        }
    }

    #[test]
    fn gauss_sum_of_product() {
        for n1 in 2..=20u64 {
            for n2 in 2..=(200 / n1) {
                if arith::gcd(n1, n2) != 1 {
                    continue;
                }
                let p1: Vec<_> = enumerate_characters(n1).into_iter().filter(|c| c.classify().is_primitive).collect();
                let p2: Vec<_> = enumerate_characters(n2).into_iter().filter(|c| c.classify().is_primitive).collect();
                for c1 in p1.iter().take(3) {
                    for c2 in p2.iter().take(3) {
                        let prod = DirichletCharacter::from_fn(n1 * n2, |a| c1.value(a) * c2.value(a)).unwrap();
                        let lhs = tau(&prod);
                        let rhs = tau(c1) * tau(c2) * c1.value(n2 as i64) * c2.value(n1 as i64);
                        assert!(close(lhs, rhs, 1e-10), "{} {}", c1.label(), c2.label());
                    }
                }
            }
        }
    }

    #[test]
    fn twisted_divisor_examples() {
        let psi = even_primitive_of_order(17, 4).unwrap();
        assert!(close(twisted_divisor(&psi, 1), Complex64::new(1.0, 0.0), 0.0));
        let v = psi.value(3);
        assert!(close(twisted_divisor(&psi, 3), Complex64::new(2.0 * v.re, 0.0), 1e-14));
        let v9 = psi.value(9);
        assert!(close(twisted_divisor(&psi, 9), v9 + 1.0 + v9.conj(), 1e-14));
        for n in 1..300u64 {
            let brute: Complex64 = (1..=n)
                .filter(|d| n % d == 0)
                .map(|d| psi.value(d as i64) * psi.value((n / d) as i64).conj())
                .sum();
            assert!(close(twisted_divisor(&psi, n), brute, 1e-12));
            assert!(twisted_divisor(&psi, n).im.abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_examples() {
        let triv = DirichletCharacter::principal(1);
        assert!(close(epsilon_factor(&triv, 5).unwrap(), Complex64::new(1.0, 0.0), 1e-15));
        let psi = even_primitive_of_order(17, 4).unwrap();
        for h in [1i64, 3, 5, 7, 9] {
            assert!((epsilon_factor(&psi, h).unwrap().norm() - 1.0).abs() < 1e-13);
        }
        let direct = tau(&psi) / 17f64.sqrt() * psi.value(8) * f64::from(kronecker(8, 17));
        assert!(close(epsilon_factor(&psi, 1).unwrap(), direct, 1e-15));
        assert!(epsilon_factor(&psi, 17).is_err());
        // depends on h only modulo r when q | r
        assert!(close(epsilon_factor(&psi, 3).unwrap(), epsilon_factor(&psi, 37).unwrap(), 1e-13));
    }

    #[test]
    fn trig_coefficients() {
        let p = DirichletCharacter::principal(10);
        assert!(close(trig_expansion_coefficient(TrigKind::Cos, 0, 10, &p).unwrap(), Complex64::new(4.0, 0.0), 1e-13));
        for c in enumerate_characters(10) {
            assert!(trig_expansion_coefficient(TrigKind::Sin, 0, 10, &c).unwrap().norm() < 1e-15);
        }
        for r in [2u64, 10, 34] {
            let chars = enumerate_characters(r);
            let phi_r = arith::euler_phi(r) as f64;
            for k in 0..7i64 {
                for kind in [TrigKind::Cos, TrigKind::Sin] {
                    let coeffs: Vec<Complex64> = chars
                        .iter()
                        .map(|c| trig_expansion_coefficient(kind, k, r, c).unwrap())
                        .collect();
                    for a in 1..r as i64 {
                        if arith::gcd(a as u64, r) != 1 {
                            continue;
                        }
                        let t = 2.0 * PI * (k * a) as f64 / r as f64;
                        let direct = match kind {
                            TrigKind::Cos => t.cos(),
                            TrigKind::Sin => t.sin(),
                        };
                        let rec: Complex64 = chars
                            .iter()
                            .zip(&coeffs)
                            .map(|(c, &w)| w * c.value(a).conj())
                            .sum::<Complex64>()
                            / phi_r;
                        assert!(close(rec, Complex64::new(direct, 0.0), 1e-12));
                        // the form used in the expansion: Σ coeff·φ(h̄x) gives f(2πk h x̄ / r)
                        let abar = arith::mod_inverse(a, r).unwrap() as i64;
                        let t2 = 2.0 * PI * (k * abar) as f64 / r as f64;
                        let d2 = match kind {
                            TrigKind::Cos => t2.cos(),
                            TrigKind::Sin => t2.sin(),
                        };
                        let rec2: Complex64 =
                            chars.iter().zip(&coeffs).map(|(c, &w)| w * c.value(a)).sum::<Complex64>() / phi_r;
                        assert!(close(rec2, Complex64::new(d2, 0.0), 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn exp_inner_product_examples() {
        let triv = DirichletCharacter::principal(1);
        for k in -4..5i64 {
            let d = exp_inner_product_direct(k, 2, &triv, 1).unwrap();
            let expect = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!(close(d, Complex64::new(expect, 0.0), 1e-14));
            assert!(close(exp_inner_product_closed_form(k, 2, &triv).unwrap(), d, 1e-14));
        }
        let psi = even_primitive_of_order(17, 4).unwrap();
        let base = psibar_chi_half(&psi, 34).unwrap();
        let k1 = exp_inner_product_closed_form(1, 34, &psi).unwrap();
        assert!(close(k1, -base.value(2) * tau(&base), 1e-12));
        for k in -20..=20i64 {
            for sign in [1, -1] {
                let d = exp_inner_product_direct(k, 34, &psi, sign).unwrap();
                let c = exp_inner_product_closed_form(k, 34, &psi).unwrap();
                assert!(close(d, c, 1e-12), "k={k}");
                // the quartic case also matches (−1)^k ψ̄χ(2k²)τ
                let alt = base.value(2 * k * k) * tau(&base) * if k % 2 == 0 { 1.0 } else { -1.0 };
                assert!(close(d, alt, 1e-12), "k={k}");
            }
        }
    }

    #[test]
    fn exp_inner_product_general_order() {
        // order-8 ψ mod 17: the closed form needs ψχ(k²) rather than ψ̄χ(k²)
        let psi = even_primitive_of_order(17, 8).unwrap();
        let base = psibar_chi_half(&psi, 34).unwrap();
        let mut literal_fails = false;
        for k in 1..=16i64 {
            let d = exp_inner_product_direct(k, 34, &psi, 1).unwrap();
            assert!(close(d, exp_inner_product_closed_form(k, 34, &psi).unwrap(), 1e-12));
            let literal = base.value(2 * k * k) * tau(&base) * if k % 2 == 0 { 1.0 } else { -1.0 };
            literal_fails |= !close(d, literal, 1e-6);
        }
        assert!(literal_fails);
    }

    proptest! {
        #[test]
        fn evaluation_is_multiplicative(n in 2u64..100, pick in 0usize..1000, a in 0i64..10_000, b in 0i64..10_000) {
            let chars = enumerate_characters(n);
            let chi = &chars[pick % chars.len()];
            prop_assert!(close(chi.value(a) * chi.value(b), chi.value((a * b) % n as i64), 1e-12));
        }

        #[test]
        fn twisted_divisor_multiplicative(m in 1u64..400, n in 1u64..400) {
            prop_assume!(arith::gcd(m, n) == 1);
            let psi = even_primitive_of_order(17, 4).unwrap();
            prop_assert!(close(twisted_divisor(&psi, m * n), twisted_divisor(&psi, m) * twisted_divisor(&psi, n), 1e-11));
        }
    }
}
