//! Truncated explicit formulas over tabulated zeros: ψ(x, χ), the race
//! difference φ(k)Δ(x), Ingham/Diamond oscillation data, and Kaczorowski's
//! boundary functions.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, pairwise_sum};
use crate::race::RaceHistory;
use crate::residues::{character, characters, format_label, square_root_counts, Character, Modulus};
use crate::zeros::ZeroSet;

/// Ordinates closer than this are treated as one when collecting residues.
pub const MERGE_TOLERANCE: f64 = 1e-8;

/// Above this value of `|ρ| log 2` the integral in `f(ρ)` uses its
/// endpoint expansion instead of quadrature.
const SERIES_THRESHOLD: f64 = 40.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegralMode {
    /// Adaptive quadrature (endpoint series where it is exact to rounding).
    #[default]
    Quadrature,
    /// Leading term `x^ρ / (ρ log x)` only.
    Asymptotic,
}

impl std::str::FromStr for IntegralMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(IntegralMode::Quadrature),
            "asymptotic" => Ok(IntegralMode::Asymptotic),
            _ => Err(Error::InvalidConfig(format!("unknown integral mode '{s}'"))),
        }
    }
}

/// Character combination for the pair `(l1, l2)`.
#[derive(Clone, Debug)]
pub struct ResidueWeights {
    pub modulus: Arc<Modulus>,
    pub l1: u64,
    pub l2: u64,
    /// `(χ, conj χ(l1) − conj χ(l2))` for every nonprincipal χ.
    pub coefficients: Vec<(Character, Complex64)>,
    /// `N_k(l1) − N_k(l2)`.
    pub bias_term: i64,
}

impl ResidueWeights {
    pub fn new(modulus: Arc<Modulus>, l1: u64, l2: u64) -> Result<Self> {
        modulus.check_residue(l1)?;
        modulus.check_residue(l2)?;
        let n = square_root_counts(&modulus);
        let coefficients = characters(&modulus)
            .into_iter()
            .filter(|c| !c.is_principal())
            .map(|c| {
                let w = c.conj_eval(l1) - c.conj_eval(l2);
                (c, w)
            })
            .collect();
        Ok(ResidueWeights {
            bias_term: n.get(l1) as i64 - n.get(l2) as i64,
            modulus,
            l1,
            l2,
            coefficients,
        })
    }
}

fn x_pow_over(rho: Complex64, log_x: f64) -> Complex64 {
    (rho * log_x).exp() / rho
}

fn check_truncation(zs: &ZeroSet, m: &Modulus, t: f64) -> Result<()> {
    if zs.modulus() != m.k() {
        return Err(Error::InvalidConfig(format!(
            "zero table is for modulus {}, not {}",
            zs.modulus(),
            m.k()
        )));
    }
    zs.require_height(t)
}

/// `−Σ_{|γ| ≤ T} x^ρ/ρ` over the zeros of `L(s, χ)`.
///
/// Zeros below the real axis are the conjugates of the zeros listed for
/// `conj χ` (for real χ, of χ itself). Entries with `γ = 0` are counted once.
pub fn psi_chi_truncated(x: f64, chi: &Character, zs: &ZeroSet, t: f64) -> Result<Complex64> {
    if chi.is_principal() {
        return Err(Error::Unsupported(
            "the principal character has a pole term; use a nonprincipal character".into(),
        ));
    }
    if !(x >= 2.0) {
        return Err(Error::Domain(format!("x must be at least 2, got {x}")));
    }
    check_truncation(zs, chi.modulus(), t)?;
    let lx = x.ln();
    let upper = zs.zeros(chi.index());
    let conj_index = chi.conj_index();
    let lower = zs.zeros(&conj_index);
    if !chi.is_real() && !upper.is_empty() && lower.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "zero table lists {} but not its conjugate {}",
            chi.label(),
            format_label(chi.modulus().k(), &conj_index)
        )));
    }
    let mut terms = Vec::with_capacity(upper.len() + lower.len());
    for r in upper.iter().filter(|r| r.gamma <= t) {
        let rho = Complex64::new(r.beta, r.gamma);
        terms.push(-(r.multiplicity as f64) * x_pow_over(rho, lx));
    }
    for r in lower.iter().filter(|r| r.gamma > 0.0 && r.gamma <= t) {
        let rho = Complex64::new(r.beta, -r.gamma);
        terms.push(-(r.multiplicity as f64) * x_pow_over(rho, lx));
    }
    let v = pairwise_sum(&terms);
    Ok(if chi.is_real() { Complex64::new(v.re, 0.0) } else { v })
}

/// `∫_{log 2}^{log x} e^{ρv} / v² dv`.
///
/// Quadrature covers `v < 40/|ρ|`; beyond that the endpoint series is exact
/// to rounding.
pub fn log_integral_term(rho: Complex64, log_x: f64) -> Complex64 {
    let a = std::f64::consts::LN_2;
    let split = SERIES_THRESHOLD / rho.norm();
    let tol = 1e-10;
    if split <= a {
        endpoint_series(rho, log_x) - endpoint_series(rho, a)
    } else if split >= log_x {
        adaptive_simpson(|v| (rho * v).exp() / (v * v), a, log_x, tol)
    } else {
        adaptive_simpson(|v| (rho * v).exp() / (v * v), a, split, tol)
            + endpoint_series(rho, log_x)
            - endpoint_series(rho, split)
    }
}

/// `e^{ρv} Σ_{n≥0} (n+1)! / (ρ^{n+1} v^{n+2})`, an antiderivative of
/// `e^{ρv}/v²` to rounding once `|ρ| v ≥ 40`.
fn endpoint_series(rho: Complex64, v: f64) -> Complex64 {
    let inv = (rho * v).inv();
    let mut term = inv / v;
    let mut sum = term;
    for n in 1..80 {
        term *= (n + 1) as f64 * inv;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    (rho * v).exp() * sum
}

/// `f(ρ) = x^ρ/(ρ log x) + (1/ρ) ∫_2^x t^ρ/(t log² t) dt`.
pub fn f_rho(rho: Complex64, x: f64, mode: IntegralMode) -> Complex64 {
    let lx = x.ln();
    let lead = (rho * lx).exp() / (rho * lx);
    match mode {
        IntegralMode::Asymptotic => lead,
        IntegralMode::Quadrature => lead + log_integral_term(rho, lx) / rho,
    }
}

/// Approximation to `φ(k) Δ(x, k, l1, l2)` from zeros with `0 < γ ≤ T`.
pub fn delta_reconstruct(
    x: f64,
    w: &ResidueWeights,
    zs: &ZeroSet,
    t: f64,
    mode: IntegralMode,
) -> Result<f64> {
    if !(x >= 10.0) {
        return Err(Error::Domain(format!("x must be at least 10, got {x}")));
    }
    check_truncation(zs, &w.modulus, t)?;
    let mut terms = Vec::new();
    for (chi, c) in &w.coefficients {
        if c.norm() == 0.0 {
            continue;
        }
        for r in zs.zeros(chi.index()).iter().filter(|r| r.gamma > 0.0 && r.gamma <= t) {
            let rho = Complex64::new(r.beta, r.gamma);
            terms.push(c * r.multiplicity as f64 * f_rho(rho, x, mode));
        }
    }
    let oscillation = -2.0 * pairwise_sum(&terms).re;
    Ok(oscillation - w.bias_term as f64 * x.sqrt() / x.ln())
}

/// `(γ_j, a_j)` with `A(u) ≈ a₀ + 2 Re Σ a_j e^{iγ_j u}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillationTerm {
    pub gamma: f64,
    #[serde(serialize_with = "ser_complex")]
    pub a: Complex64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

/// Residues `a_j = −Σ_χ c_χ m(ρ,χ)/(½ + iγ_j)` of the zero-sum transform,
/// sorted by ordinate, with coincident ordinates merged.
pub fn residue_magnitudes(w: &ResidueWeights, zs: &ZeroSet) -> Result<Vec<OscillationTerm>> {
    if zs.modulus() != w.modulus.k() {
        return Err(Error::InvalidConfig("zero table modulus mismatch".into()));
    }
    let mut terms = Vec::new();
    for (chi, c) in &w.coefficients {
        for r in zs.zeros(chi.index()) {
            if r.beta != 0.5 {
                return Err(Error::OffLineZero {
                    label: chi.label(),
                    beta: r.beta,
                    gamma: r.gamma,
                });
            }
            if r.gamma <= 0.0 || c.norm() == 0.0 {
                continue;
            }
            let a = -c * r.multiplicity as f64 / Complex64::new(0.5, r.gamma);
            terms.push(OscillationTerm { gamma: r.gamma, a });
        }
    }
    terms.sort_by(|p, q| p.gamma.total_cmp(&q.gamma));
    let mut merged: Vec<OscillationTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match merged.last_mut() {
            Some(last) if (t.gamma - last.gamma).abs() <= MERGE_TOLERANCE => last.a += t.a,
            _ => merged.push(t),
        }
    }
    merged.retain(|t| t.a.norm() > 0.0);
    Ok(merged)
}

/// Fejér mean `a₀ + 2 Re Σ_{0<γ_j<T} (1 − γ_j/T) a_j e^{iγ_j u}`.
pub fn a_star(u: f64, terms: &[OscillationTerm], t: f64, a0: f64) -> f64 {
    let parts: Vec<Complex64> = terms
        .iter()
        .filter(|p| p.gamma > 0.0 && p.gamma < t)
        .map(|p| (1.0 - p.gamma / t) * p.a * Complex64::from_polar(1.0, p.gamma * u))
        .collect();
    a0 + 2.0 * pairwise_sum(&parts).re
}

/// `A(u) = φ(k) e^{−u/2} (ψ(e^u,k,l1) − ψ(e^u,k,l2))` from sieved data.
pub fn a_empirical(u: f64, history: &RaceHistory, l1: u64, l2: u64) -> Result<f64> {
    let x = u.exp();
    let phi = crate::residues::build_modulus(history.k())?.phi() as f64;
    let d = history.psi(x, l1)? - history.psi(x, l2)?;
    Ok(phi * (-u / 2.0).exp() * d)
}

/// `a₀ ± (2N/(N+1)) Σ|a_j|` over the `m` largest `|a_j|`.
pub fn diamond_bounds(terms: &[OscillationTerm], n: u32, m: usize, a0: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    let mut mags: Vec<f64> = terms.iter().map(|t| t.a.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let s: f64 = mags.iter().take(m).sum();
    let factor = 2.0 * n as f64 / (n as f64 + 1.0);
    Ok((a0 - factor * s, a0 + factor * s))
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationReport {
    pub a0: f64,
    pub terms: Vec<OscillationTerm>,
    pub diamond_bounds: (f64, f64),
    pub samples: Vec<(f64, f64)>,
}

/// Residues, Diamond bounds for the `m` largest terms, and `A*_T` on `us`.
pub fn oscillation_report(
    w: &ResidueWeights,
    zs: &ZeroSet,
    t: f64,
    n: u32,
    m: usize,
    us: &[f64],
) -> Result<OscillationReport> {
    zs.require_height(t)?;
    let terms: Vec<OscillationTerm> = residue_magnitudes(w, zs)?
        .into_iter()
        .filter(|p| p.gamma < t)
        .collect();
    let a0 = 0.0;
    let diamond_bounds = diamond_bounds(&terms, n, m, a0)?;
    let samples = us.iter().map(|&u| (u, a_star(u, &terms, t, a0))).collect();
    Ok(OscillationReport {
        a0,
        terms,
        diamond_bounds,
        samples,
    })
}

/// Truncated k-function values at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KFunctionValue {
    pub z: Complex64,
    pub k_val: Complex64,
    pub big_k_val: Complex64,
    pub truncation_height: f64,
    /// Size of the last included term of `K`, a crude tail indicator.
    pub tail_estimate: f64,
}

/// `k(z,χ) = Σ e^{ρz}` and `K(z,χ) = Σ e^{ρz}/ρ` over `0 < γ ≤ T`, for
/// the zeros of the primitive L-function inducing χ.
pub fn k_functions(z: Complex64, chi: &Character, zs: &ZeroSet, t: f64) -> Result<KFunctionValue> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("need Im z > 0, got {z}")));
    }
    check_truncation(zs, chi.modulus(), t)?;
    let mut ks = Vec::new();
    let mut big = Vec::new();
    for r in zs.zeros(chi.index()).iter().filter(|r| r.gamma > 0.0 && r.gamma <= t) {
        let rho = Complex64::new(r.beta, r.gamma);
        let e = (rho * z).exp() * r.multiplicity as f64;
        ks.push(e);
        big.push(e / rho);
    }
    let tail_estimate = big.last().map_or(0.0, |v| v.norm());
    Ok(KFunctionValue {
        z,
        k_val: pairwise_sum(&ks),
        big_k_val: pairwise_sum(&big),
        truncation_height: t,
        tail_estimate,
    })
}

/// Multiplicity of the zero at `s = ½` recorded as a `γ = 0, β = ½` row.
pub fn central_multiplicity(chi: &Character, zs: &ZeroSet) -> u32 {
    zs.zeros(chi.index())
        .iter()
        .filter(|r| r.gamma == 0.0 && r.beta == 0.5)
        .map(|r| r.multiplicity)
        .sum()
}

/// `F(z,k,l) = −(2/φ(k)) e^{−z/2} Σ_χ conj χ(l) K(z,χ′) − (2/φ(k)) Σ_χ conj χ(l) m(½,χ)`,
/// summed over all characters mod k including the principal one.
pub fn f_function(z: Complex64, m: &Arc<Modulus>, l: u64, zs: &ZeroSet, t: f64) -> Result<Complex64> {
    m.check_residue(l)?;
    let phi = m.phi() as f64;
    let mut sum_k = Complex64::new(0.0, 0.0);
    let mut sum_m = Complex64::new(0.0, 0.0);
    for chi in characters(m) {
        let w = chi.conj_eval(l);
        sum_k += w * k_functions(z, &chi, zs, t)?.big_k_val;
        sum_m += w * central_multiplicity(&chi, zs) as f64;
    }
    Ok(-2.0 / phi * (-z / 2.0).exp() * sum_k - 2.0 / phi * sum_m)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryEstimate {
    pub x: f64,
    pub value: f64,
    /// RMS deviation of the samples from the fitted line.
    pub residual: f64,
    pub samples: Vec<(f64, f64)>,
    /// A prime power `p^m` with `|x| − log p^m` smaller than the largest `y`.
    pub near_singularity: Option<u64>,
}

/// `y = 2^{−n}` for `n = 4..=12`.
pub fn default_y_sequence() -> Vec<f64> {
    (4..=12).map(|n| 2f64.powi(-n)).collect()
}

/// `P(x,k,l) = lim_{y→0+} Re F(x + iy, k, l)`, by a least-squares line in
/// `y` through the samples.
pub fn p_boundary(
    x: f64,
    m: &Arc<Modulus>,
    l: u64,
    zs: &ZeroSet,
    t: f64,
    ys: &[f64],
) -> Result<BoundaryEstimate> {
    if ys.len() < 2 || ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::InvalidConfig("need at least two positive y values".into()));
    }
    let samples: Vec<(f64, f64)> = ys
        .iter()
        .map(|&y| Ok((y, f_function(Complex64::new(x, y), m, l, zs, t)?.re)))
        .collect::<Result<_>>()?;
    let n = samples.len() as f64;
    let my = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mv = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - my) * (s.1 - mv)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let value = mv - slope * my;
    let residual = (samples
        .iter()
        .map(|s| (s.1 - (value + slope * s.0)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let ymax = ys.iter().copied().fold(0.0, f64::max);
    Ok(BoundaryEstimate {
        x,
        value,
        residual,
        samples,
        near_singularity: nearest_prime_power_log(x.abs(), ymax),
    })
}

fn nearest_prime_power_log(x: f64, radius: f64) -> Option<u64> {
    let lo = (x - radius).exp().floor().max(2.0) as u64;
    let hi = (x + radius).exp().ceil() as u64;
    if hi.saturating_sub(lo) > 10_000_000 {
        return None;
    }
    let mut best: Option<(f64, u64)> = None;
    for n in lo..=hi {
        if is_prime_power(n) {
            let d = ((n as f64).ln() - x).abs();
            if d < radius && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, n));
            }
        }
    }
    best.map(|b| b.1)
}

fn is_prime_power(n: u64) -> bool {
    crate::residues::factorize(n).len() == 1
}

/// `ψ(x, χ) = Σ_{n≤x} Λ(n) χ(n)` from the per-residue ψ values.
pub fn psi_chi_sieved(chi: &Character, history: &RaceHistory, x: f64) -> Result<Complex64> {
    history
        .residues()
        .iter()
        .try_fold(Complex64::new(0.0, 0.0), |acc, &l| Ok(acc + chi.eval(l) * history.psi(x, l)?))
}

/// Nonprincipal character by label within `m`.
pub fn character_by_label(m: &Arc<Modulus>, label: &str) -> Result<Character> {
    let (k, index) = crate::residues::parse_label(label)
        .ok_or_else(|| Error::InvalidConfig(format!("bad character label '{label}'")))?;
    if k != m.k() {
        return Err(Error::InvalidConfig(format!("'{label}' is not a character mod {}", m.k())));
    }
    character(m, &index)
}
