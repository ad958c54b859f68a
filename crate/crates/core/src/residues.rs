//! The multiplicative group of units mod k, its Dirichlet characters, and
//! square-root counts `N_k(l)`.
//!
//! Characters take values in the roots of unity and are stored exactly as
//! fractions of a full turn. Floating point only appears when a value is
//! projected to a complex number for analytic work.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Modular inverse of `a` mod `m`, assuming `gcd(a, m) == 1`.
fn inv_mod(a: u64, m: u64) -> u64 {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    old_s.rem_euclid(m as i128) as u64
}

/// Prime factorisation by trial division, as `(p, a)` pairs in ascending `p`.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut a = 0;
            while n % p == 0 {
                n /= p;
                a += 1;
            }
            out.push((p, a));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn multiplicative_order(g: u64, m: u64) -> u64 {
    let mut x = g % m;
    let mut ord = 1;
    while x != 1 {
        x = mul_mod(x, g, m);
        ord += 1;
    }
    ord
}

/// An exact root of unity `e^{2πi num/den}` with `0 <= num < den`, reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    num: u64,
    den: u64,
}

impl Turn {
    pub const ZERO: Turn = Turn { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "turn denominator must be positive");
        let num = num % den;
        let g = gcd(num, den);
        Turn {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    /// Product of the two roots of unity (sum of turns mod 1).
    pub fn add(self, other: Turn) -> Turn {
        let den = lcm(self.den, other.den);
        Turn::new(
            self.num * (den / self.den) + other.num * (den / other.den),
            den,
        )
    }

    /// Complex conjugate (negated turn).
    pub fn conj(self) -> Turn {
        Turn::new(self.den - self.num, self.den)
    }

    /// Projection to a complex float. The values ±1 and ±i are exact.
    pub fn to_complex(self) -> Complex64 {
        match (self.num, self.den) {
            (0, _) => Complex64::new(1.0, 0.0),
            (1, 2) => Complex64::new(-1.0, 0.0),
            (1, 4) => Complex64::new(0.0, 1.0),
            (3, 4) => Complex64::new(0.0, -1.0),
            (n, d) => {
                let angle = TAU * n as f64 / d as f64;
                Complex64::new(angle.cos(), angle.sin())
            }
        }
    }

    pub fn is_one(self) -> bool {
        self.num == 0
    }

    pub fn is_real(self) -> bool {
        self.den <= 2
    }
}

/// One cyclic factor of the unit group: a generator residue and its order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicFactor {
    pub generator: u64,
    pub order: u64,
    /// The prime power this factor comes from in the CRT decomposition.
    pub prime_power: u64,
}

/// The reduced residue group mod k together with a canonical cyclic
/// decomposition and the discrete-log table for it.
#[derive(Clone, Debug)]
pub struct Modulus {
    k: u64,
    phi: u64,
    generators: Vec<CyclicFactor>,
    units: Vec<u64>,
    unit_index: Vec<u32>,
    /// `dlog[i * generators.len() + j]` is the exponent of generator `j` in unit `i`.
    dlog: Vec<u32>,
    exponent: u64,
}

const NOT_A_UNIT: u32 = u32::MAX;

impl Modulus {
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn phi(&self) -> u64 {
        self.phi
    }

    pub fn generators(&self) -> &[CyclicFactor] {
        &self.generators
    }

    /// Reduced residues in ascending order.
    pub fn units(&self) -> &[u64] {
        &self.units
    }

    /// Exponent of the group (lcm of the factor orders).
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_unit(&self, n: u64) -> bool {
        self.unit_index[(n % self.k) as usize] != NOT_A_UNIT
    }

    /// Position of `n mod k` in [`Modulus::units`], if it is a unit.
    pub fn unit_index(&self, n: u64) -> Option<usize> {
        match self.unit_index[(n % self.k) as usize] {
            NOT_A_UNIT => None,
            i => Some(i as usize),
        }
    }

    /// Exponent vector of a unit with respect to the canonical generators.
    pub fn discrete_log(&self, n: u64) -> Option<&[u32]> {
        let r = self.generators.len();
        self.unit_index(n).map(|i| &self.dlog[i * r..(i + 1) * r])
    }

    /// Checks that `l` is a reduced residue in `[0, k)`.
    pub fn check_residue(&self, l: u64) -> Result<()> {
        if l >= self.k {
            return Err(Error::InvalidResidue {
                modulus: self.k,
                residue: l,
                reason: "not reduced into [0, k)",
            });
        }
        if !self.is_unit(l) {
            return Err(Error::InvalidResidue {
                modulus: self.k,
                residue: l,
                reason: "not coprime to the modulus",
            });
        }
        Ok(())
    }

    /// Primes dividing k.
    pub fn prime_divisors(&self) -> Vec<u64> {
        factorize(self.k).into_iter().map(|(p, _)| p).collect()
    }
}

fn smallest_primitive_root(q: u64, phi_q: u64) -> u64 {
    (2..q)
        .find(|&g| gcd(g, q) == 1 && multiplicative_order(g, q) == phi_q)
        .expect("odd prime powers always have a primitive root")
}

/// Builds the unit group mod `k` with its canonical generators.
///
/// Generators come from the CRT decomposition over prime powers of `k`,
/// ordered by ascending prime power. Odd prime powers use their smallest
/// primitive root; `4` uses `3`; `2^a` for `a >= 3` uses `2^a - 1` followed
/// by `3`. Each local generator is lifted to be `1` modulo the cofactor.
pub fn build_modulus(k: u64) -> Result<Modulus> {
    if k < 3 {
        return Err(Error::InvalidModulus(k));
    }
    if k > u32::MAX as u64 / 2 {
        return Err(Error::Unsupported(format!("modulus {k} is too large for a unit table")));
    }

    let mut local: Vec<(u64, u64, u64)> = Vec::new(); // (prime power, generator mod q, order)
    for (p, a) in factorize(k) {
        let q = p.pow(a);
        if p == 2 {
            match a {
                1 => {}
                2 => local.push((q, 3, 2)),
                _ => {
                    local.push((q, q - 1, 2));
                    local.push((q, 3, q / 4));
                }
            }
        } else {
            let phi_q = q / p * (p - 1);
            local.push((q, smallest_primitive_root(q, phi_q), phi_q));
        }
    }
    // Stable sort keeps the (-1, 3) order inside the 2-power block.
    local.sort_by_key(|&(q, _, _)| q);

    let generators: Vec<CyclicFactor> = local
        .iter()
        .map(|&(q, g, order)| {
            let cof = k / q;
            let lifted = if cof == 1 {
                g
            } else {
                // g' = 1 + cof * t with g' ≡ g (mod q)
                let t = mul_mod((g + q - 1) % q, inv_mod(cof % q, q), q);
                (1 + cof * t) % k
            };
            CyclicFactor {
                generator: lifted,
                order,
                prime_power: q,
            }
        })
        .collect();

    let units: Vec<u64> = (1..k).filter(|&n| gcd(n, k) == 1).collect();
    let phi = units.len() as u64;
    let mut unit_index = vec![NOT_A_UNIT; k as usize];
    for (i, &u) in units.iter().enumerate() {
        unit_index[u as usize] = i as u32;
    }

    let r = generators.len();
    let mut dlog = vec![0u32; units.len() * r];
    let mut seen = vec![false; units.len()];
    let mut exps = vec![0u32; r];
    for code in 0..phi {
        // decode `code` in mixed radix, last factor fastest
        let mut rest = code;
        let mut n = 1 % k;
        for j in (0..r).rev() {
            let f = &generators[j];
            let e = rest % f.order;
            rest /= f.order;
            exps[j] = e as u32;
            n = mul_mod(n, pow_mod(f.generator, e, k), k);
        }
        let i = unit_index[n as usize] as usize;
        assert!(!seen[i], "generators do not decompose the unit group mod {k}");
        seen[i] = true;
        dlog[i * r..(i + 1) * r].copy_from_slice(&exps);
    }

    let exponent = generators.iter().fold(1, |acc, f| lcm(acc, f.order));
    Ok(Modulus {
        k,
        phi,
        generators,
        units,
        unit_index,
        dlog,
        exponent,
    })
}

/// A Dirichlet character mod k, stored exactly.
#[derive(Clone, Debug)]
pub struct Character {
    modulus: Arc<Modulus>,
    index: Vec<u32>,
    values: Vec<Turn>,
    is_principal: bool,
    is_real: bool,
    conductor: u64,
}

impl Character {
    fn from_index(modulus: Arc<Modulus>, index: Vec<u32>) -> Self {
        let lambda = modulus.exponent;
        let r = modulus.generators.len();
        let values: Vec<Turn> = (0..modulus.units.len())
            .map(|i| {
                let num = (0..r).fold(0u64, |acc, j| {
                    let f = &modulus.generators[j];
                    let step = lambda / f.order;
                    (acc + index[j] as u64 * modulus.dlog[i * r + j] as u64 % f.order * step) % lambda
                });
                Turn::new(num, lambda)
            })
            .collect();
        let is_principal = values.iter().all(|v| v.is_one());
        let is_real = values.iter().all(|v| v.is_real());
        let mut chi = Character {
            modulus,
            index,
            values,
            is_principal,
            is_real,
            conductor: 0,
        };
        chi.conductor = chi.compute_conductor();
        chi
    }

    fn compute_conductor(&self) -> u64 {
        let k = self.modulus.k;
        (1..=k)
            .filter(|d| k % d == 0)
            .find(|&d| {
                self.modulus
                    .units
                    .iter()
                    .zip(&self.values)
                    .all(|(&u, v)| u % d != 1 % d || v.is_one())
            })
            .unwrap_or(k)
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn modulus_arc(&self) -> &Arc<Modulus> {
        &self.modulus
    }

    /// Exponent vector, one entry per cyclic factor.
    pub fn index(&self) -> &[u32] {
        &self.index
    }

    pub fn is_principal(&self) -> bool {
        self.is_principal
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.modulus.k
    }

    /// `χ(-1) = -1`.
    pub fn is_odd(&self) -> bool {
        !self.value(self.modulus.k - 1).expect("k-1 is a unit").is_one()
    }

    /// Value at `n`, or `None` when `gcd(n, k) > 1`.
    pub fn value(&self, n: u64) -> Option<Turn> {
        self.modulus.unit_index(n).map(|i| self.values[i])
    }

    /// Values aligned with [`Modulus::units`].
    pub fn values(&self) -> &[Turn] {
        &self.values
    }

    /// Complex value at `n`, zero off the units.
    pub fn eval(&self, n: u64) -> Complex64 {
        self.value(n).map_or(Complex64::new(0.0, 0.0), Turn::to_complex)
    }

    /// Conjugate value `conj χ(n)`.
    pub fn conj_eval(&self, n: u64) -> Complex64 {
        self.eval(n).conj()
    }

    /// Index vector of the conjugate character.
    pub fn conj_index(&self) -> Vec<u32> {
        self.index
            .iter()
            .zip(&self.modulus.generators)
            .map(|(&e, f)| ((f.order - e as u64) % f.order) as u32)
            .collect()
    }

    /// Label `k:e1.e2...`.
    pub fn label(&self) -> String {
        format_label(self.modulus.k, &self.index)
    }
}

impl PartialEq for Character {
    fn eq(&self, other: &Self) -> bool {
        self.modulus.k == other.modulus.k && self.index == other.index
    }
}

impl Eq for Character {}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn format_label(k: u64, index: &[u32]) -> String {
    let parts: Vec<String> = index.iter().map(|e| e.to_string()).collect();
    format!("{k}:{}", parts.join("."))
}

/// Parses a `k:e1.e2...` label into `(k, exponent vector)`.
pub fn parse_label(label: &str) -> Option<(u64, Vec<u32>)> {
    let (k, rest) = label.split_once(':')?;
    let k = k.parse().ok()?;
    let index = rest
        .split('.')
        .map(|e| e.parse().ok())
        .collect::<Option<Vec<u32>>>()?;
    Some((k, index))
}

/// All characters mod k in lexicographic order of their exponent vectors
/// (so the principal character comes first).
pub fn characters(m: &Modulus) -> Vec<Character> {
    let modulus = Arc::new(m.clone());
    let orders: Vec<u64> = m.generators.iter().map(|f| f.order).collect();
    let mut out = Vec::with_capacity(m.phi as usize);
    let mut idx = vec![0u32; orders.len()];
    loop {
        out.push(Character::from_index(Arc::clone(&modulus), idx.clone()));
        let mut j = orders.len();
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            idx[j] += 1;
            if (idx[j] as u64) < orders[j] {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// Character mod k with the given exponent vector.
pub fn character(m: &Modulus, index: &[u32]) -> Result<Character> {
    if index.len() != m.generators.len()
        || index.iter().zip(&m.generators).any(|(&e, f)| e as u64 >= f.order)
    {
        return Err(Error::Domain(format!(
            "exponent vector {index:?} does not index a character mod {}",
            m.k
        )));
    }
    Ok(Character::from_index(Arc::new(m.clone()), index.to_vec()))
}

/// Compares exponent vectors lexicographically.
pub fn index_order(a: &[u32], b: &[u32]) -> Ordering {
    a.cmp(b)
}

/// `N_k(l)`: number of `u` in `[1, k]`, coprime to k, with `u² ≡ l (mod k)`.
#[derive(Clone, Debug, Serialize)]
pub struct SquareRootCount {
    pub k: u64,
    counts: Vec<(u64, u32)>,
}

impl SquareRootCount {
    /// `N_k(l)`; zero for `l` that is not a unit.
    pub fn get(&self, l: u64) -> u32 {
        let l = l % self.k;
        self.counts
            .binary_search_by_key(&l, |&(r, _)| r)
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.counts.iter().copied()
    }

    pub fn is_quadratic_residue(&self, l: u64) -> bool {
        self.get(l) > 0
    }
}

pub fn square_root_counts(m: &Modulus) -> SquareRootCount {
    let mut counts: Vec<(u64, u32)> = m.units.iter().map(|&u| (u, 0)).collect();
    for &u in &m.units {
        let sq = mul_mod(u, u, m.k);
        let i = m.unit_index(sq).expect("square of a unit is a unit");
        counts[i].1 += 1;
    }
    SquareRootCount { k: m.k, counts }
}

/// Maximum deviation from the character orthogonality relations,
/// `max |Σ_l χ(l) conj χ'(l) − φ(k)[χ = χ']|` over all pairs.
pub fn character_orthogonality_defect(m: &Modulus) -> f64 {
    let chars = characters(m);
    let vals: Vec<Vec<Complex64>> = chars
        .iter()
        .map(|c| c.values().iter().map(|t| t.to_complex()).collect())
        .collect();
    let phi = m.phi as f64;
    let mut worst: f64 = 0.0;
    for (i, a) in vals.iter().enumerate() {
        for (j, b) in vals.iter().enumerate() {
            let s: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            let target = if i == j { phi } else { 0.0 };
            worst = worst.max((s - target).norm());
        }
    }
    worst
}
