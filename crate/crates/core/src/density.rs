//! Logarithmic densities of race orderings: exact step-function integration
//! over sieve data, and Monte Carlo over the limiting distribution of the
//! normalized error vector under linear independence of zero ordinates.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{par_map, KahanSum};
use crate::race::RaceHistory;
use crate::residues::{build_modulus, characters, square_root_counts, Modulus};
use crate::zeros::ZeroSet;

/// Samples per RNG stream.
pub const BLOCK_SIZE: usize = 1 << 12;

/// Smallest sample count accepted by [`gsh_density`].
pub const MIN_DENSITY_SAMPLES: u64 = 10_000;

/// Recorded with every Monte Carlo estimate.
pub const BIAS_CONVENTION: &str =
    "convention: calibrated to k=4 bias; mean of E_l is 1 - N_k(l) (N_k = number of square roots)";

const PHASE_BITS: u32 = 14;

/// Fraction of `log X` covered by the trailing window for the min/max proxies.
const TRAILING_WINDOW: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    EmpiricalLogmeasure,
    GshMonteCarlo,
}

/// `E_j = (log x / √x)(φ(k) π(x,k,l_j) − π(x))`, one entry per tracked residue.
/// Monte Carlo draws carry no `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EVector {
    pub x: Option<f64>,
    pub components: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub k: u64,
    pub residues: Vec<u64>,
    pub ordering: Vec<u64>,
    pub method: DensityMethod,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(rename = "X", skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub n_samples: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub delta_hat: f64,
    pub stderr: f64,
    /// Trailing-window minimum of the running density (empirical only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie_measure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fejer: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

fn slots(residues: &[u64], ordering: &[u64]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(ordering.len());
    for &l in ordering {
        let j = residues
            .iter()
            .position(|&v| v == l)
            .ok_or(Error::UntrackedResidue(l))?;
        if out.contains(&j) {
            return Err(Error::InvalidConfig(format!("residue {l} repeated in ordering")));
        }
        out.push(j);
    }
    Ok(out)
}

fn strictly_ordered<T: PartialOrd>(v: &[T], order: &[usize]) -> bool {
    order.windows(2).all(|w| v[w[0]] > v[w[1]])
}

fn has_tie<T: PartialEq>(v: &[T], order: &[usize]) -> bool {
    order
        .iter()
        .enumerate()
        .any(|(a, &i)| order[a + 1..].iter().any(|&j| v[i] == v[j]))
}

/// The E-vector from sieve data at `x`.
pub fn e_vector(history: &RaceHistory, x: f64) -> Result<EVector> {
    if x < 2.0 {
        return Err(Error::Domain(format!("E-vector needs x >= 2, got {x}")));
    }
    let phi = build_modulus(history.k())?.phi() as f64;
    let total = history.pi_total(x)? as f64;
    let scale = x.ln() / x.sqrt();
    let components = history
        .residues()
        .iter()
        .map(|&l| Ok(scale * (phi * history.pi(x, l)? as f64 - total)))
        .collect::<Result<_>>()?;
    Ok(EVector { x: Some(x), components })
}

/// `(1/log X) ∫ dt/t` over `t ≤ X` where `π(t,k,o₁) > π(t,k,o₂) > …`.
///
/// The step function is integrated exactly. On `[1, 2)` every count is zero,
/// so that stretch belongs to the tie set and ordering, reverse and ties
/// partition `[1, X]`.
pub fn empirical_log_density(
    history: &RaceHistory,
    ordering: &[u64],
    x_max: f64,
) -> Result<DensityEstimate> {
    if x_max < 2.0 {
        return Err(Error::Domain(format!("log density needs X >= 2, got {x_max}")));
    }
    if x_max > history.limit() as f64 {
        return Err(Error::InsufficientData {
            requested: x_max,
            available: history.limit() as f64,
        });
    }
    let order = slots(history.residues(), ordering)?;
    let xs = history.jumps();
    let log_x = x_max.ln();
    let window_start = log_x * (1.0 - TRAILING_WINDOW);

    let mut held = KahanSum::new();
    let mut tied = KahanSum::new();
    if order.len() > 1 {
        tied.add(2f64.ln());
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut probe = |h: f64, at: f64| {
        if at >= window_start && at > 0.0 {
            let d = h / at;
            lo = lo.min(d);
            hi = hi.max(d);
        }
    };

    let mut intervals = 0u64;
    for (i, &a) in xs.iter().enumerate() {
        let a = a as f64;
        if a > x_max {
            break;
        }
        let b = xs.get(i + 1).map_or(x_max, |&n| (n as f64).min(x_max));
        let (la, lb) = (a.ln(), b.ln());
        let row = history.pi_row(i);
        let holds = strictly_ordered(row, &order);
        if order.len() == 1 && i == 0 {
            held.add(la);
        }
        // running density is monotone between jumps, so its extremes on the
        // window sit at jump points or at the window start
        if la < window_start && lb > window_start {
            probe(held.value() + if holds { window_start - la } else { 0.0 }, window_start);
        }
        probe(held.value(), la);
        let len = (b / a).ln();
        if holds {
            held.add(len);
        } else if has_tie(row, &order) {
            tied.add(len);
        }
        intervals += 1;
        probe(held.value(), lb);
    }
    if xs.first().is_none_or(|&n| n as f64 > x_max) {
        // nothing sieved below X: everything is ties except the trivial ordering
        if order.len() == 1 {
            held.add(log_x);
        } else {
            tied.add(log_x - 2f64.ln());
        }
        probe(held.value(), log_x);
    }
    let delta = if order.len() == 1 { 1.0 } else { (held.value() / log_x).min(1.0) };
    if order.len() == 1 {
        (lo, hi) = (1.0, 1.0);
    }
    Ok(DensityEstimate {
        k: history.k(),
        residues: history.residues().to_vec(),
        ordering: ordering.to_vec(),
        method: DensityMethod::EmpiricalLogmeasure,
        t: None,
        x: Some(x_max),
        n_samples: intervals,
        seed: None,
        delta_hat: delta,
        stderr: 0.0,
        lower: Some(lo.min(delta)),
        upper: Some(hi.min(1.0).max(delta)),
        tie_measure: Some(tied.value() / log_x),
        fejer: None,
        convention: None,
    })
}

/// Options for the Monte Carlo sampler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GshOptions {
    /// Truncation height; zeros with `γ > t` are ignored.
    pub t: f64,
    /// Weight zeros by `1 − γ/T`.
    pub fejer: bool,
    pub threads: usize,
}

impl GshOptions {
    pub fn new(t: f64) -> Self {
        GshOptions { t, fejer: true, threads: 1 }
    }
}

/// Limiting distribution of the E-vector under GSH: every zero ordinate
/// `γ > 0` of every nonprincipal character gets its own uniform phase.
///
/// `E_j = (1 − N_k(l_j)) − 2 Re Σ_χ Σ_γ w(γ) m(γ) conj χ(l_j) e^{iθ_γ} / (½ + iγ)`.
#[derive(Clone, Debug)]
pub struct GshSampler {
    modulus: Arc<Modulus>,
    residues: Vec<u64>,
    options: GshOptions,
    bias: Vec<f64>,
    /// `terms × r`, row-major: the coefficients `a` with contribution `−Re(a e^{iθ})`.
    re: Vec<f64>,
    im: Vec<f64>,
    table: Vec<(f64, f64)>,
}

impl GshSampler {
    pub fn new(zs: &ZeroSet, residues: &[u64], options: GshOptions) -> Result<Self> {
        let m = Arc::new(build_modulus(zs.modulus())?);
        if residues.is_empty() {
            return Err(Error::InvalidConfig("no residues given".into()));
        }
        for (i, &l) in residues.iter().enumerate() {
            m.check_residue(l)?;
            if residues[..i].contains(&l) {
                return Err(Error::InvalidConfig(format!("residue {l} listed twice")));
            }
        }
        if !(options.t > 0.0) {
            return Err(Error::InvalidConfig(format!("truncation height must be positive, got {}", options.t)));
        }
        zs.require_height(options.t)?;
        zs.require_critical_line()?;

        let roots = square_root_counts(&m);
        let mut bias: Vec<f64> = residues.iter().map(|&l| 1.0 - roots.get(l) as f64).collect();
        let (mut re, mut im) = (Vec::new(), Vec::new());
        for chi in characters(&m).iter().filter(|c| !c.is_principal()) {
            let conj: Vec<Complex64> = residues.iter().map(|&l| chi.conj_eval(l)).collect();
            for z in zs.zeros(chi.index()).iter().filter(|z| z.gamma <= options.t) {
                let w = if options.fejer { 1.0 - z.gamma / options.t } else { 1.0 };
                let base = Complex64::new(0.5, z.gamma).inv() * (w * z.multiplicity as f64);
                if z.gamma == 0.0 {
                    // a real zero has no partner: its term is fixed
                    for (b, c) in bias.iter_mut().zip(&conj) {
                        *b -= (c * base).re;
                    }
                    continue;
                }
                for c in &conj {
                    let a = c * base * 2.0;
                    re.push(a.re);
                    im.push(a.im);
                }
            }
        }
        let n = 1usize << PHASE_BITS;
        let table = (0..n)
            .map(|i| {
                let (s, c) = (TAU * i as f64 / n as f64).sin_cos();
                (c, s)
            })
            .collect();
        Ok(GshSampler {
            modulus: m,
            residues: residues.to_vec(),
            options,
            bias,
            re,
            im,
            table,
        })
    }

    pub fn k(&self) -> u64 {
        self.modulus.k()
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn options(&self) -> GshOptions {
        self.options
    }

    /// Number of random phases per draw.
    pub fn term_count(&self) -> usize {
        self.re.len() / self.residues.len()
    }

    /// Exact mean of each component.
    pub fn mean(&self) -> &[f64] {
        &self.bias
    }

    /// Exact variance of each component: `Σ |a|² / 2`.
    pub fn variance(&self) -> Vec<f64> {
        let r = self.residues.len();
        (0..r)
            .map(|j| {
                self.re
                    .iter()
                    .skip(j)
                    .step_by(r)
                    .zip(self.im.iter().skip(j).step_by(r))
                    .map(|(a, b)| 0.5 * (a * a + b * b))
                    .sum()
            })
            .collect()
    }

    /// One draw into `out` (length r).
    pub fn sample_into<R: RngCore>(&self, rng: &mut R, out: &mut [f64]) {
        let r = self.residues.len();
        out.copy_from_slice(&self.bias);
        let shift = 32 - PHASE_BITS;
        let mut pending: Option<u32> = None;
        for (re, im) in self.re.chunks_exact(r).zip(self.im.chunks_exact(r)) {
            let bits = match pending.take() {
                Some(b) => b,
                None => {
                    let w = rng.next_u64();
                    pending = Some((w >> 32) as u32);
                    w as u32
                }
            };
            let (c, s) = self.table[(bits >> shift) as usize];
            for j in 0..r {
                out[j] -= re[j] * c - im[j] * s;
            }
        }
    }

    /// Runs `f` once per block of [`BLOCK_SIZE`] draws. Block `b` uses the
    /// ChaCha8 stream `b` under `seed`, so results do not depend on threads.
    pub fn run_blocks<T, F>(&self, n: u64, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut dyn FnMut() -> Vec<f64>, usize) -> T + Sync + Send,
    {
        let blocks: Vec<(u64, usize)> = (0..n.div_ceil(BLOCK_SIZE as u64))
            .map(|b| {
                let count = (n - b * BLOCK_SIZE as u64).min(BLOCK_SIZE as u64) as usize;
                (b, count)
            })
            .collect();
        par_map(&blocks, self.options.threads, |&(b, count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut buf = vec![0.0; self.residues.len()];
            let mut draw = || {
                self.sample_into(&mut rng, &mut buf);
                buf.clone()
            };
            f(&mut draw, count)
        })
    }

    /// `n` draws as E-vectors.
    pub fn samples(&self, n: u64, seed: u64) -> Vec<EVector> {
        self.run_blocks(n, seed, |draw, count| {
            (0..count)
                .map(|_| EVector { x: None, components: draw() })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }

    /// Count of draws realizing each strict ordering of all tracked residues.
    /// Draws with a tie are counted under the empty key.
    pub fn ordering_counts(&self, n: u64, seed: u64) -> BTreeMap<Vec<u64>, u64> {
        let parts = self.run_blocks(n, seed, |draw, count| {
            let mut tally: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
            for _ in 0..count {
                let e = draw();
                let mut idx: Vec<usize> = (0..e.len()).collect();
                idx.sort_by(|&a, &b| e[b].total_cmp(&e[a]));
                let key = if idx.windows(2).any(|w| e[w[0]] == e[w[1]]) {
                    Vec::new()
                } else {
                    idx.iter().map(|&i| self.residues[i]).collect()
                };
                *tally.entry(key).or_default() += 1;
            }
            tally
        });
        let mut total = BTreeMap::new();
        for part in parts {
            for (key, c) in part {
                *total.entry(key).or_default() += c;
            }
        }
        total
    }

    fn estimate(&self, ordering: &[u64], n: u64, seed: u64, hits: u64) -> DensityEstimate {
        let p = hits as f64 / n as f64;
        DensityEstimate {
            k: self.k(),
            residues: self.residues.clone(),
            ordering: ordering.to_vec(),
            method: DensityMethod::GshMonteCarlo,
            t: Some(self.options.t),
            x: None,
            n_samples: n,
            seed: Some(seed),
            delta_hat: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            lower: None,
            upper: None,
            tie_measure: None,
            fejer: Some(self.options.fejer),
            convention: Some(BIAS_CONVENTION.to_string()),
        }
    }

    /// Fraction of `n` draws with `E_{o₁} > E_{o₂} > …` strictly.
    pub fn density(&self, ordering: &[u64], n: u64, seed: u64) -> Result<DensityEstimate> {
        if n < MIN_DENSITY_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "density needs at least {MIN_DENSITY_SAMPLES} samples, got {n}"
            )));
        }
        let order = slots(&self.residues, ordering)?;
        let hits: u64 = self
            .run_blocks(n, seed, |draw, count| {
                (0..count).filter(|_| strictly_ordered(&draw(), &order)).count() as u64
            })
            .into_iter()
            .sum();
        Ok(self.estimate(ordering, n, seed, hits))
    }
}

/// One draw of the limiting E-vector.
pub fn gsh_sample(zs: &ZeroSet, residues: &[u64], options: GshOptions, seed: u64) -> Result<EVector> {
    let s = GshSampler::new(zs, residues, options)?;
    Ok(s.samples(1, seed).remove(0))
}

/// Monte Carlo estimate of the logarithmic density of `ordering`.
pub fn gsh_density(
    zs: &ZeroSet,
    residues: &[u64],
    ordering: &[u64],
    options: GshOptions,
    n: u64,
    seed: u64,
) -> Result<DensityEstimate> {
    GshSampler::new(zs, residues, options)?.density(ordering, n, seed)
}

/// Fraction of draws with Euclidean norm `|E| > R`, for each `R` in `grid`.
pub fn tail_probe(sampler: &GshSampler, grid: &[f64], n: u64, seed: u64) -> Vec<(f64, f64)> {
    let norms: Vec<f64> = sampler
        .run_blocks(n, seed, |draw, count| {
            (0..count)
                .map(|_| draw().iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
    grid.iter()
        .map(|&r| {
            let above = norms.iter().filter(|&&v| v > r).count();
            (r, if n == 0 { 0.0 } else { above as f64 / n as f64 })
        })
        .collect()
}

/// Whether every ordering of `residues` has density `1/r!` under GSH:
/// two residues with equally many square roots, or three residues
/// `l, lg, lg²` with `g³ ≡ 1 (mod k)`.
pub fn unbiased_predicate(k: u64, residues: &[u64]) -> Result<bool> {
    let m = build_modulus(k)?;
    for &l in residues {
        m.check_residue(l)?;
    }
    Ok(match residues {
        [a, b] => {
            let roots = square_root_counts(&m);
            roots.get(*a) == roots.get(*b)
        }
        [a, b, c] => m.units().iter().any(|&g| {
            let g = g as u128;
            let k = k as u128;
            g * g % k * g % k == 1 % k
                && (*a as u128) * g % k == *b as u128
                && (*a as u128) * g % k * g % k == *c as u128
        }),
        _ => false,
    })
}

/// CSV with one row per E-vector: `x,E_<l>...`.
pub fn write_evectors_csv<W: Write>(residues: &[u64], rows: &[EVector], mut out: W) -> std::io::Result<()> {
    write!(out, "x")?;
    for l in residues {
        write!(out, ",E_{l}")?;
    }
    writeln!(out)?;
    for row in rows {
        match row.x {
            Some(x) => write!(out, "{x}")?,
            None => write!(out, "")?,
        }
        for v in &row.components {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_examples() {
        assert!(unbiased_predicate(5, &[2, 3]).unwrap());
        assert!(!unbiased_predicate(4, &[3, 1]).unwrap());
        assert!(unbiased_predicate(7, &[1, 2, 4]).unwrap());
        assert!(!unbiased_predicate(7, &[1, 2, 3]).unwrap());
        assert!(!unbiased_predicate(5, &[1, 2, 3, 4]).unwrap());
    }

    #[test]
    fn zero_free_sample_is_the_bias() {
        let zs = ZeroSet::new(5, 100.0, "synthetic").unwrap();
        let e = gsh_sample(&zs, &[1, 2, 4], GshOptions::new(50.0), 3).unwrap();
        assert_eq!(e.components, vec![-1.0, 1.0, -1.0]);
    }

    #[test]
    fn ordering_helpers() {
        assert!(strictly_ordered(&[3, 1, 2], &[0, 2, 1]));
        assert!(!strictly_ordered(&[3, 1, 1], &[0, 2, 1]));
        assert!(has_tie(&[3, 1, 1], &[0, 2, 1]));
        assert!(!has_tie(&[3, 1, 1], &[0, 1]));
    }
}
