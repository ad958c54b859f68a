//! Hypothetical systems of zeros off the critical line ("barriers") and the
//! orderings of π(x,k,l) they forbid, using the leading term of each zero's
//! contribution plus an explicit error envelope.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_space;
use crate::residues::{build_modulus, character, parse_label, Character, Modulus};
use crate::zeros::parse_table;

/// Default for both envelope constants.
pub const DEFAULT_ENVELOPE: f64 = 10.0;

/// Smallest sample count accepted by [`verify_exclusion`].
pub const MIN_EXCLUSION_SAMPLES: usize = 1000;

/// Upper end of the scan behind [`ExclusionVerdict::projected_threshold`].
const PROJECTION_LOG10_MAX: f64 = 300.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierZero {
    pub rho: Complex64,
    pub multiplicity: u32,
}

/// Error envelope `C x^σ/(t² log x) + C′ x^{β₁} log² x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c: f64,
    pub c_prime: f64,
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope { c: DEFAULT_ENVELOPE, c_prime: DEFAULT_ENVELOPE }
    }
}

#[derive(Clone, Debug)]
pub struct BarrierSpec {
    modulus: Arc<Modulus>,
    residues: Vec<u64>,
    zeros: Vec<(Character, Vec<BarrierZero>)>,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub envelope: Envelope,
}

impl BarrierSpec {
    /// `zeros` holds upper half-plane zeros per nonprincipal character;
    /// `beta2`/`beta3` default to the smallest/largest listed real part.
    pub fn new(
        k: u64,
        residues: &[u64],
        zeros: Vec<(Vec<u32>, Vec<BarrierZero>)>,
        beta1: f64,
        beta23: Option<(f64, f64)>,
        envelope: Envelope,
    ) -> Result<Self> {
        let m = Arc::new(build_modulus(k)?);
        if residues.len() < 2 {
            return Err(Error::InvalidConfig("a barrier needs at least two residues".into()));
        }
        for (i, &l) in residues.iter().enumerate() {
            m.check_residue(l)?;
            if residues[..i].contains(&l) {
                return Err(Error::InvalidConfig(format!("residue {l} listed twice")));
            }
        }
        let mut chars: Vec<(Character, Vec<BarrierZero>)> = Vec::new();
        for (index, list) in zeros {
            let chi = character(&m, &index)?;
            if chi.is_principal() {
                return Err(Error::InvalidConfig("barrier zeros must belong to nonprincipal characters".into()));
            }
            for z in &list {
                if !(z.rho.re > 0.5 && z.rho.re < 1.0) || !(z.rho.im > 0.0) || !z.rho.im.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "barrier zero {} must satisfy 1/2 < Re < 1 and Im > 0",
                        z.rho
                    )));
                }
                if z.multiplicity == 0 {
                    return Err(Error::InvalidConfig("multiplicity must be at least 1".into()));
                }
            }
            match chars.iter_mut().find(|(c, _)| c.index() == chi.index()) {
                Some((_, v)) => v.extend(list),
                None => chars.push((chi, list)),
            }
        }
        let res = chars.iter().flat_map(|(_, v)| v.iter().map(|z| z.rho.re));
        let (lo, hi) = res.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        let (beta2, beta3) = match beta23 {
            Some(b) => b,
            None if lo.is_finite() => (lo, hi),
            None => (1.0, 1.0),
        };
        let ok = 0.5 <= beta1 && beta1 < beta2 && beta2 <= beta3 && beta3 <= 1.0;
        if !ok || (lo.is_finite() && !(beta2 <= lo && hi <= beta3)) {
            return Err(Error::InvalidConfig(format!(
                "need 1/2 <= beta1 < beta2 <= Re rho <= beta3 <= 1 (beta1={beta1}, beta2={beta2}, beta3={beta3})"
            )));
        }
        if !(envelope.c >= 0.0 && envelope.c_prime >= 0.0) {
            return Err(Error::InvalidConfig("envelope constants must be nonnegative".into()));
        }
        Ok(BarrierSpec {
            modulus: m,
            residues: residues.to_vec(),
            zeros: chars,
            beta1,
            beta2,
            beta3,
            envelope,
        })
    }

    /// One zero `0.75 + 10⁶ i` of L(s, χ) with χ(2) = i mod 5, background β₁ = ½.
    pub fn builtin_k5() -> Self {
        let z = BarrierZero { rho: Complex64::new(0.75, 1e6), multiplicity: 1 };
        BarrierSpec::new(5, &[1, 2, 3, 4], vec![(vec![1], vec![z])], 0.5, None, Envelope::default())
            .expect("built-in spec is valid")
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "k5" => Ok(Self::builtin_k5()),
            _ => Err(Error::InvalidConfig(format!("unknown built-in barrier '{name}'"))),
        }
    }

    /// Reads the `#barrier` text format: zero-file rows `label beta gamma mult`
    /// plus `#residues`, `#beta1` and optional `#beta2`, `#beta3`, `#C`, `#Cprime`.
    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_table(text)?;
        if !raw.headers.contains_key("barrier") {
            return Err(Error::parse(1, "missing #barrier header"));
        }
        let header = |key: &str| raw.headers.get(key);
        let num = |key: &str| -> Result<Option<f64>> {
            header(key)
                .map(|(line, v)| {
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(*line, format!("bad #{key} value '{v}'")))
                })
                .transpose()
        };
        let (res_line, res_text) = header("residues").ok_or_else(|| Error::parse(1, "missing #residues header"))?;
        let residues = res_text
            .split(',')
            .map(|s| s.trim().parse::<u64>().map_err(|_| Error::parse(*res_line, format!("bad residue '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        let beta1 = num("beta1")?.ok_or_else(|| Error::parse(1, "missing #beta1 header"))?;
        let beta23 = match (num("beta2")?, num("beta3")?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::parse(1, "#beta2 and #beta3 must be given together")),
        };
        let envelope = Envelope {
            c: num("C")?.unwrap_or(DEFAULT_ENVELOPE),
            c_prime: num("Cprime")?.unwrap_or(DEFAULT_ENVELOPE),
        };
        let mut k_seen = num("modulus")?.map(|v| v as u64);
        let mut zeros: Vec<(Vec<u32>, Vec<BarrierZero>)> = Vec::new();
        for (line, label, beta, gamma, mult) in raw.rows {
            let (k, index) = parse_label(&label).ok_or_else(|| Error::parse(line, format!("bad label '{label}'")))?;
            if *k_seen.get_or_insert(k) != k {
                return Err(Error::parse(line, format!("label '{label}' has a different modulus")));
            }
            let z = BarrierZero { rho: Complex64::new(beta, gamma), multiplicity: mult };
            match zeros.iter_mut().find(|(i, _)| *i == index) {
                Some((_, v)) => v.push(z),
                None => zeros.push((index, vec![z])),
            }
        }
        let k = k_seen.ok_or_else(|| Error::parse(1, "no #modulus header and no zero rows"))?;
        BarrierSpec::new(k, &residues, zeros, beta1, beta23, envelope)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("#barrier\n");
        let _ = writeln!(s, "#modulus {}", self.k());
        let res: Vec<String> = self.residues.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "#residues {}", res.join(","));
        let _ = writeln!(s, "#beta1 {}", self.beta1);
        let _ = writeln!(s, "#beta2 {}", self.beta2);
        let _ = writeln!(s, "#beta3 {}", self.beta3);
        let _ = writeln!(s, "#C {}", self.envelope.c);
        let _ = writeln!(s, "#Cprime {}", self.envelope.c_prime);
        for (chi, list) in &self.zeros {
            for z in list {
                let _ = writeln!(s, "{} {} {} {}", chi.label(), z.rho.re, z.rho.im, z.multiplicity);
            }
        }
        s
    }

    pub fn k(&self) -> u64 {
        self.modulus.k()
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn zeros(&self) -> impl Iterator<Item = (&Character, &[BarrierZero])> {
        self.zeros.iter().map(|(c, v)| (c, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.iter().all(|(_, v)| v.is_empty())
    }

    /// Multiplies every multiplicity by `factor`.
    pub fn scaled(&self, factor: u32) -> Self {
        let mut out = self.clone();
        for (_, list) in &mut out.zeros {
            for z in list {
                z.multiplicity *= factor;
            }
        }
        out
    }

    /// `x^σ / (t log x)` for the largest listed real part and smallest ordinate.
    pub fn scale(&self, log_x: f64) -> f64 {
        let all = self.zeros.iter().flat_map(|(_, v)| v.iter());
        let sigma = all.clone().map(|z| z.rho.re).fold(f64::NEG_INFINITY, f64::max);
        let t = all.map(|z| z.rho.im).fold(f64::INFINITY, f64::min);
        if !sigma.is_finite() {
            return 0.0;
        }
        (sigma * log_x - t.ln() - log_x.ln()).exp()
    }

    /// `(C x^σ/(t² log x) summed over zeros with multiplicity, C′ x^{β₁} log² x)`.
    fn envelope_at(&self, log_x: f64) -> f64 {
        let near: f64 = self
            .zeros
            .iter()
            .flat_map(|(_, v)| v.iter())
            .map(|z| z.multiplicity as f64 * (z.rho.re * log_x - 2.0 * z.rho.im.ln() - log_x.ln()).exp())
            .sum();
        self.envelope.c * near + self.envelope.c_prime * (self.beta1 * log_x).exp() * log_x * log_x
    }

    /// Per-residue main terms `M_l = −2 Re Σ_χ conj χ(l) Σ_ρ n f(ρ) / φ(k)`,
    /// with `f(ρ) = −i x^σ e^{it log x} / (t log x)`.
    fn main_terms(&self, log_x: f64) -> Vec<f64> {
        let phi = self.modulus.phi() as f64;
        let mut inner: Vec<(Character, Complex64)> = Vec::with_capacity(self.zeros.len());
        for (chi, list) in &self.zeros {
            let mut s = Complex64::new(0.0, 0.0);
            for z in list {
                let (sigma, t) = (z.rho.re, z.rho.im);
                let mag = (sigma * log_x - t.ln() - log_x.ln()).exp();
                let phase = Complex64::from_polar(1.0, (t * log_x).rem_euclid(std::f64::consts::TAU));
                s += -Complex64::i() * phase * (mag * z.multiplicity as f64);
            }
            inner.push((chi.clone(), s));
        }
        self.residues
            .iter()
            .map(|&l| -2.0 * inner.iter().map(|(chi, s)| (chi.conj_eval(l) * s).re).sum::<f64>() / phi)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub main: f64,
    pub error: f64,
}

/// Leading-order `π(x,k,l₁) − π(x,k,l₂)` for every ordered pair of tracked
/// residues, with the error envelope.
pub fn dominant_deltas(x: f64, spec: &BarrierSpec) -> Result<BTreeMap<(u64, u64), PairTerm>> {
    if !(x >= 10.0) {
        return Err(Error::Domain(format!("barrier terms need x >= 10, got {x}")));
    }
    Ok(deltas_at_log(x.ln(), spec))
}

fn deltas_at_log(log_x: f64, spec: &BarrierSpec) -> BTreeMap<(u64, u64), PairTerm> {
    let m = spec.main_terms(log_x);
    let error = spec.envelope_at(log_x);
    let mut out = BTreeMap::new();
    for (i, &a) in spec.residues.iter().enumerate() {
        for (j, &b) in spec.residues.iter().enumerate() {
            if i != j {
                out.insert((a, b), PairTerm { main: m[i] - m[j], error });
            }
        }
    }
    out
}

/// Grid check of `max_θ min(−sin θ, (sin θ − cos θ)/2, cos θ) ≤ −√0.1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCertificate {
    pub step: f64,
    pub grid_max: f64,
    pub worst_theta: f64,
    pub slack: f64,
    pub bound: f64,
    pub certified: bool,
}

/// The three normalized k=5 main terms at phase θ = t log x.
pub fn k5_phase_min(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (-s).min(0.5 * (s - c)).min(c)
}

pub fn k5_phase_inequality(step: f64) -> Result<PhaseCertificate> {
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::InvalidConfig(format!("grid step must be in (0, 1e-3], got {step}")));
    }
    let n = (std::f64::consts::TAU / step).ceil() as usize;
    let (mut grid_max, mut worst_theta) = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let theta = i as f64 * step;
        let v = k5_phase_min(theta);
        if v > grid_max {
            grid_max = v;
            worst_theta = theta;
        }
    }
    // each branch is 1-Lipschitz and a grid point lies within step/2
    let slack = std::f64::consts::SQRT_2 * step;
    let bound = -0.1f64.sqrt();
    Ok(PhaseCertificate {
        step,
        grid_max,
        worst_theta,
        slack,
        bound,
        certified: grid_max <= bound + slack,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Passed,
    NotPassed,
    /// The envelope swamps every main term at every sampled x.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecileMargin {
    pub x_from: f64,
    pub x_to: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionVerdict {
    pub excluded_ordering: Vec<u64>,
    /// `(x_min, x_max, sample count)`.
    pub x_range_tested: (f64, f64, usize),
    /// Minimum over x of the best `(−main − envelope)/scale` among the pairs
    /// the ordering needs positive.
    pub margin: f64,
    pub passed: bool,
    pub status: VerdictStatus,
    /// Smallest sampled x from which every later sample is excluded.
    pub x_threshold: Option<f64>,
    /// Same, scanning `log₁₀ x` in steps of 0.01 up to 300.
    pub projected_threshold: Option<f64>,
    pub envelope: Envelope,
    pub deciles: Vec<DecileMargin>,
}

fn ordering_slots(spec: &BarrierSpec, ordering: &[u64]) -> Result<Vec<usize>> {
    if ordering.len() != spec.residues.len() {
        return Err(Error::InvalidConfig(format!(
            "ordering has {} residues, spec tracks {}",
            ordering.len(),
            spec.residues.len()
        )));
    }
    let mut out = Vec::new();
    for &l in ordering {
        let j = spec.residues.iter().position(|&v| v == l).ok_or(Error::UntrackedResidue(l))?;
        if out.contains(&j) {
            return Err(Error::InvalidConfig(format!("residue {l} repeated in ordering")));
        }
        out.push(j);
    }
    Ok(out)
}

/// `(best normalized violation, whether any main term beats the envelope)`.
fn score(spec: &BarrierSpec, order: &[usize], log_x: f64) -> (f64, bool) {
    let m = spec.main_terms(log_x);
    let err = spec.envelope_at(log_x);
    let scale = spec.scale(log_x);
    let mut best = f64::NEG_INFINITY;
    for w in order.windows(2) {
        let main = m[w[0]] - m[w[1]];
        best = best.max((-main - err) / scale);
    }
    let visible = m.iter().enumerate().any(|(i, a)| m[i + 1..].iter().any(|b| (a - b).abs() > err));
    (best, visible)
}

/// Checks that at every sample some adjacent difference the ordering needs
/// positive is negative beyond the envelope.
pub fn verify_exclusion(spec: &BarrierSpec, ordering: &[u64], xs: &[f64]) -> Result<ExclusionVerdict> {
    let order = ordering_slots(spec, ordering)?;
    if xs.len() < MIN_EXCLUSION_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "need at least {MIN_EXCLUSION_SAMPLES} x samples, got {}",
            xs.len()
        )));
    }
    if let Some(&x) = xs.iter().find(|&&x| !(x >= 10.0)) {
        return Err(Error::Domain(format!("barrier terms need x >= 10, got {x}")));
    }
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);

    let empty = spec.is_empty();
    let mut scores = Vec::with_capacity(sorted.len());
    let mut any_visible = false;
    for &x in &sorted {
        let (s, visible) = if empty { (f64::NEG_INFINITY, false) } else { score(spec, &order, x.ln()) };
        any_visible |= visible;
        scores.push(s);
    }
    let margin = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let first_tail = scores.iter().rposition(|&s| !(s > 0.0)).map_or(0, |i| i + 1);
    let x_threshold = sorted.get(first_tail).copied();
    let passed = !empty && scores.iter().all(|&s| s > 0.0);
    let status = if passed {
        VerdictStatus::Passed
    } else if !any_visible {
        VerdictStatus::Inconclusive
    } else {
        VerdictStatus::NotPassed
    };

    let projected_threshold = if empty {
        None
    } else {
        let start = (x_min.log10() * 100.0).floor() as i64;
        let end = (PROJECTION_LOG10_MAX * 100.0) as i64;
        let mut threshold = None;
        for i in start..=end {
            let log_x = i as f64 / 100.0 * std::f64::consts::LN_10;
            if score(spec, &order, log_x).0 > 0.0 {
                threshold.get_or_insert(i as f64 / 100.0);
            } else {
                threshold = None;
            }
        }
        threshold.map(|l| 10f64.powf(l))
    };

    let n = sorted.len();
    let deciles = (0..10)
        .filter_map(|d| {
            let (a, b) = (d * n / 10, (d + 1) * n / 10);
            (a < b).then(|| DecileMargin {
                x_from: sorted[a],
                x_to: sorted[b - 1],
                margin: scores[a..b].iter().copied().fold(f64::INFINITY, f64::min),
            })
        })
        .collect();

    Ok(ExclusionVerdict {
        excluded_ordering: ordering.to_vec(),
        x_range_tested: (x_min, x_max, n),
        margin,
        passed,
        status,
        x_threshold,
        projected_threshold,
        envelope: spec.envelope,
        deciles,
    })
}

/// The default exclusion grid: 10³ log-spaced points over `[10¹⁰, 10³⁰]`.
pub fn default_x_samples() -> Vec<f64> {
    log_space(1e10, 1e30, MIN_EXCLUSION_SAMPLES)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderingCensus {
    /// Residues listed from largest to smallest main term.
    pub counts: BTreeMap<Vec<u64>, u64>,
    /// Samples where two main terms were equal (broken by residue order).
    pub ties: u64,
}

/// Tallies the ordering of the main-term model at each sample.
pub fn orderings_census(spec: &BarrierSpec, xs: &[f64]) -> Result<OrderingCensus> {
    let mut out = OrderingCensus::default();
    for &x in xs {
        if !(x >= 10.0) {
            return Err(Error::Domain(format!("barrier terms need x >= 10, got {x}")));
        }
        let m = spec.main_terms(x.ln());
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&a, &b| m[b].total_cmp(&m[a]));
        if idx.windows(2).any(|w| m[w[0]] == m[w[1]]) {
            out.ties += 1;
        }
        *out.counts.entry(idx.iter().map(|&i| spec.residues[i]).collect()).or_default() += 1;
    }
    Ok(out)
}
