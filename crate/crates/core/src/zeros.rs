//! Tables of nontrivial zeros of Dirichlet L-functions: parsing, canonical
//! output, and simple interrogations (Haselgrove's condition, Diamond's
//! N-independence, zero counts).
//!
//! Only zeros with `γ ≥ 0` are stored. For a real character the zeros below
//! the axis are the conjugates of those listed; for a complex character they
//! are the conjugates of the zeros listed under the conjugate character.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::residues::{build_modulus, format_label, parse_label, Modulus};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroRecord {
    pub gamma: f64,
    pub beta: f64,
    pub multiplicity: u32,
}

impl ZeroRecord {
    pub fn on_line(gamma: f64) -> Self {
        ZeroRecord {
            gamma,
            beta: 0.5,
            multiplicity: 1,
        }
    }
}

/// Zeros of the L-functions mod `k`, complete up to `height_limit`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSet {
    modulus: u64,
    height_limit: f64,
    source: String,
    /// Keyed by character index vector; records sorted by `(γ, β)`.
    zeros: BTreeMap<Vec<u32>, Vec<ZeroRecord>>,
    warnings: Vec<String>,
}

/// Header keys and data rows of a zero-style text file.
#[derive(Clone, Debug, Default)]
pub struct RawTable {
    pub headers: BTreeMap<String, (usize, String)>,
    /// `(line number, label, beta, gamma, multiplicity)`.
    pub rows: Vec<(usize, String, f64, f64, u32)>,
}

/// Splits a zero-style file into `#key value` headers and data rows.
/// Blank lines and lines starting with `##` are ignored.
pub fn parse_table(text: &str) -> Result<RawTable> {
    let mut t = RawTable::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with("##") {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            if key.is_empty() {
                continue;
            }
            t.headers
                .insert(key.to_string(), (line_no, value.trim().to_string()));
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields (label beta gamma multiplicity), found {}", fields.len()),
            ));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad {what} '{s}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("{what} is not finite")));
            }
            Ok(v)
        };
        let beta = num(fields[1], "beta")?;
        let gamma = num(fields[2], "gamma")?;
        let mult: u32 = fields[3]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad multiplicity '{}'", fields[3])))?;
        t.rows.push((line_no, fields[0].to_string(), beta, gamma, mult));
    }
    Ok(t)
}

impl ZeroSet {
    pub fn new(modulus: u64, height_limit: f64, source: impl Into<String>) -> Result<Self> {
        build_modulus(modulus)?;
        if !(height_limit >= 0.0) || !height_limit.is_finite() {
            return Err(Error::InvalidConfig(format!("bad height limit {height_limit}")));
        }
        Ok(ZeroSet {
            modulus,
            height_limit,
            source: source.into(),
            zeros: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn height_limit(&self) -> f64 {
        self.height_limit
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Non-fatal issues found while loading (e.g. unsorted input).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.values().all(Vec::is_empty)
    }

    /// Adds zeros for a character, then re-sorts and merges duplicates.
    pub fn insert(&mut self, index: &[u32], records: &[ZeroRecord]) -> Result<()> {
        let m = build_modulus(self.modulus)?;
        check_index(&m, index)?;
        for r in records {
            check_record(r).map_err(|msg| Error::InvalidConfig(msg.to_string()))?;
        }
        let list = self.zeros.entry(index.to_vec()).or_default();
        list.extend_from_slice(records);
        normalize(list);
        Ok(())
    }

    /// Zeros for the character with exponent vector `index` (empty if none).
    pub fn zeros(&self, index: &[u32]) -> &[ZeroRecord] {
        self.zeros.get(index).map_or(&[], Vec::as_slice)
    }

    pub fn zeros_by_label(&self, label: &str) -> Result<&[ZeroRecord]> {
        let (k, index) = parse_label(label)
            .ok_or_else(|| Error::InvalidConfig(format!("bad character label '{label}'")))?;
        if k != self.modulus {
            return Err(Error::InvalidConfig(format!(
                "label '{label}' is not a character mod {}",
                self.modulus
            )));
        }
        Ok(self.zeros(&index))
    }

    /// `(index, zeros)` for every character with at least one listed zero.
    pub fn iter(&self) -> impl Iterator<Item = (&[u32], &[ZeroRecord])> {
        self.zeros.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    pub fn max_gamma(&self) -> f64 {
        self.zeros
            .values()
            .flat_map(|v| v.last())
            .map(|r| r.gamma)
            .fold(0.0, f64::max)
    }

    /// `G`: the sorted set of distinct positive ordinates of nonprincipal
    /// characters.
    pub fn ordinates(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self
            .zeros
            .iter()
            .filter(|(idx, _)| idx.iter().any(|&e| e != 0))
            .flat_map(|(_, v)| v.iter().map(|r| r.gamma))
            .filter(|&g| g > 0.0)
            .collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// Fails with [`Error::InsufficientData`] when `t` exceeds the
    /// completeness bound.
    pub fn require_height(&self, t: f64) -> Result<()> {
        if t > self.height_limit {
            return Err(Error::InsufficientData {
                requested: t,
                available: self.height_limit,
            });
        }
        Ok(())
    }

    /// Rejects zeros off the critical line.
    pub fn require_critical_line(&self) -> Result<()> {
        for (idx, v) in &self.zeros {
            if let Some(r) = v.iter().find(|r| r.beta != 0.5) {
                return Err(Error::OffLineZero {
                    label: format_label(self.modulus, idx),
                    beta: r.beta,
                    gamma: r.gamma,
                });
            }
        }
        Ok(())
    }

    /// Parses the text zero-file format.
    pub fn parse(text: &str) -> Result<Self> {
        let table = parse_table(text)?;
        let header = |key: &str| table.headers.get(key);
        let (tmax_line, tmax) = header("tmax")
            .ok_or_else(|| Error::parse(0, "missing completeness declaration '#tmax'"))?;
        let height_limit: f64 = tmax
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite() && *t >= 0.0)
            .ok_or_else(|| Error::parse(*tmax_line, format!("bad #tmax '{tmax}'")))?;
        let modulus = match header("modulus") {
            Some((line, v)) => v
                .parse::<u64>()
                .ok()
                .filter(|&k| k >= 3)
                .ok_or_else(|| Error::parse(*line, format!("bad #modulus '{v}'")))?,
            None => {
                let (line, label, ..) = table
                    .rows
                    .first()
                    .ok_or_else(|| Error::parse(0, "missing '#modulus' in a file without zeros"))?;
                parse_label(label)
                    .ok_or_else(|| Error::parse(*line, format!("bad character label '{label}'")))?
                    .0
            }
        };
        let source = header("source").map(|(_, s)| s.clone()).unwrap_or_default();
        let m = build_modulus(modulus).map_err(|e| Error::parse(0, e.to_string()))?;
        let mut zs = ZeroSet {
            modulus,
            height_limit,
            source,
            zeros: BTreeMap::new(),
            warnings: Vec::new(),
        };
        let mut last: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        let mut unsorted = false;
        for (line, label, beta, gamma, mult) in table.rows {
            let (k, index) = parse_label(&label)
                .ok_or_else(|| Error::parse(line, format!("bad character label '{label}'")))?;
            if k != modulus {
                return Err(Error::parse(
                    line,
                    format!("label '{label}' does not belong to modulus {modulus}"),
                ));
            }
            check_index(&m, &index).map_err(|e| Error::parse(line, e.to_string()))?;
            let rec = ZeroRecord {
                gamma,
                beta,
                multiplicity: mult,
            };
            check_record(&rec).map_err(|msg| Error::parse(line, msg))?;
            let prev = last.entry(index.clone()).or_insert(f64::NEG_INFINITY);
            if gamma < *prev {
                unsorted = true;
            }
            *prev = gamma;
            zs.zeros.entry(index).or_default().push(rec);
        }
        if unsorted {
            zs.warnings
                .push("ordinates were not sorted per character; sorted on load".into());
        }
        let before: u64 = zs.total_multiplicity();
        let count_before: usize = zs.zeros.values().map(Vec::len).sum();
        for v in zs.zeros.values_mut() {
            normalize(v);
        }
        let count_after: usize = zs.zeros.values().map(Vec::len).sum();
        if count_after < count_before {
            zs.warnings.push(format!(
                "merged {} duplicate ordinates into multiplicities",
                count_before - count_after
            ));
        }
        debug_assert_eq!(before, zs.total_multiplicity());
        Ok(zs)
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.zeros
            .values()
            .flat_map(|v| v.iter())
            .map(|r| r.multiplicity as u64)
            .sum()
    }

    /// Canonical text form: headers, then rows by character index and γ.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#modulus {}", self.modulus);
        let _ = writeln!(out, "#tmax {}", self.height_limit);
        let _ = writeln!(out, "#source {}", self.source);
        for (idx, v) in &self.zeros {
            let label = format_label(self.modulus, idx);
            for r in v {
                let _ = writeln!(out, "{label} {} {} {}", r.beta, r.gamma, r.multiplicity);
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn load_zeros(path: &Path) -> Result<ZeroSet> {
    ZeroSet::parse(&std::fs::read_to_string(path)?)
}

fn check_index(m: &Modulus, index: &[u32]) -> Result<()> {
    let gens = m.generators();
    if index.len() != gens.len() || index.iter().zip(gens).any(|(&e, g)| e as u64 >= g.order) {
        return Err(Error::InvalidConfig(format!(
            "'{}' is not a character index mod {}",
            format_label(m.k(), index),
            m.k()
        )));
    }
    Ok(())
}

fn check_record(r: &ZeroRecord) -> std::result::Result<(), &'static str> {
    if !(r.gamma >= 0.0) || !r.gamma.is_finite() {
        return Err("ordinate must be a finite nonnegative number");
    }
    if !(r.beta > 0.0 && r.beta < 1.0) {
        return Err("real part must lie strictly between 0 and 1");
    }
    if r.multiplicity == 0 {
        return Err("multiplicity must be positive");
    }
    Ok(())
}

/// Sorts by `(γ, β)` and merges exact duplicates by summing multiplicities.
fn normalize(v: &mut Vec<ZeroRecord>) {
    v.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.beta.total_cmp(&b.beta)));
    v.dedup_by(|later, kept| {
        if later.gamma == kept.gamma && later.beta == kept.beta {
            kept.multiplicity += later.multiplicity;
            true
        } else {
            false
        }
    });
}

/// True unless some nonprincipal character has a zero on the real segment
/// (a `γ = 0` entry). Requires the table to be complete up to `a`.
pub fn haselgrove_check(zs: &ZeroSet, a: f64) -> Result<bool> {
    zs.require_height(a)?;
    Ok(!zs
        .iter()
        .filter(|(idx, _)| idx.iter().any(|&e| e != 0))
        .any(|(_, v)| v.iter().any(|r| r.gamma == 0.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub coefficients: Vec<i64>,
    pub sum: f64,
    pub nearest: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceVerdict {
    /// Indices into the ordinate set `G` (0-based).
    pub subset: Vec<usize>,
    pub ordinates: Vec<f64>,
    #[serde(rename = "N")]
    pub n: u32,
    /// `(2N+1)^m − 1 − 2m`: vectors with `Σ|n_r| ≥ 2`.
    pub vectors_enumerated: u64,
    pub sums_in_range: u64,
    pub violations: Vec<Violation>,
    pub passed: bool,
    pub tolerance: f64,
}

/// Default tolerance: `1e−9 · max γ`.
pub fn default_tolerance(zs: &ZeroSet) -> f64 {
    1e-9 * zs.max_gamma().max(1.0)
}

/// Diamond's N-independence test for the ordinates `G[subset]` of `zs`.
pub fn n_independence(zs: &ZeroSet, subset: &[usize], n: u32, tol: f64) -> Result<IndependenceVerdict> {
    let g = zs.ordinates();
    for &i in subset {
        if i >= g.len() {
            return Err(Error::InvalidConfig(format!(
                "ordinate index {i} out of range (G has {} elements)",
                g.len()
            )));
        }
    }
    let chosen: Vec<f64> = subset.iter().map(|&i| g[i]).collect();
    let mut v = n_independence_values(&g, &chosen, zs.height_limit(), n, tol)?;
    v.subset = subset.to_vec();
    Ok(v)
}

/// N-independence of `chosen` against the sorted set `g`, looking only at
/// sums in `[0, t_max]`.
pub fn n_independence_values(
    g: &[f64],
    chosen: &[f64],
    t_max: f64,
    n: u32,
    tol: f64,
) -> Result<IndependenceVerdict> {
    let m = chosen.len();
    if m == 0 {
        return Err(Error::InvalidConfig("subset must be nonempty".into()));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let base = 2 * n as u64 + 1;
    let total = (base as f64).powi(m as i32);
    if total > 1e9 {
        return Err(Error::TooExpensive { vectors: total });
    }
    let total = base.pow(m as u32);
    debug_assert!(g.windows(2).all(|w| w[0] <= w[1]));

    // split on the leading coefficient so blocks can run independently
    let blocks: Vec<i64> = (-(n as i64)..=n as i64).collect();
    let run_block = |lead: i64| -> (u64, Vec<Violation>) {
        let mut coeffs = vec![-(n as i64); m];
        coeffs[0] = lead;
        let inner = total / base;
        let mut in_range = 0u64;
        let mut found = Vec::new();
        for _ in 0..inner {
            let weight: i64 = coeffs.iter().map(|c| c.abs()).sum();
            if weight >= 2 {
                let sum: f64 = coeffs.iter().zip(chosen).map(|(&c, &x)| c as f64 * x).sum();
                if sum >= -tol && sum <= t_max + tol {
                    in_range += 1;
                    if let Some((nearest, d)) = nearest(g, sum) {
                        if d <= tol {
                            found.push(Violation {
                                coefficients: coeffs.clone(),
                                sum,
                                nearest,
                                distance: d,
                            });
                        }
                    }
                }
            }
            // odometer over coefficients 1..m
            for c in coeffs.iter_mut().skip(1) {
                if *c < n as i64 {
                    *c += 1;
                    break;
                }
                *c = -(n as i64);
            }
        }
        (in_range, found)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<(u64, Vec<Violation>)> = {
        use rayon::prelude::*;
        blocks.par_iter().map(|&b| run_block(b)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(u64, Vec<Violation>)> = blocks.iter().map(|&b| run_block(b)).collect();

    let mut sums_in_range = 0;
    let mut violations = Vec::new();
    for (c, v) in results {
        sums_in_range += c;
        violations.extend(v);
    }
    violations.sort_by(|a, b| a.coefficients.cmp(&b.coefficients));
    Ok(IndependenceVerdict {
        subset: (0..m).collect(),
        ordinates: chosen.to_vec(),
        n,
        vectors_enumerated: total - 1 - 2 * m as u64,
        sums_in_range,
        passed: violations.is_empty(),
        violations,
        tolerance: tol,
    })
}

fn nearest(g: &[f64], x: f64) -> Option<(f64, f64)> {
    let i = g.partition_point(|&v| v < x);
    let mut best: Option<(f64, f64)> = None;
    for j in [i.wrapping_sub(1), i] {
        if let Some(&v) = g.get(j) {
            let d = (v - x).abs();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((v, d));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityRow {
    pub label: String,
    pub count: u64,
    /// `count / (T log T)`; absent when `T ≤ 1`.
    pub ratio_to_t_log_t: Option<f64>,
}

/// Zeros with `0 < γ ≤ t` per character (with multiplicity).
pub fn zero_density_profile(zs: &ZeroSet, t: f64) -> Result<Vec<DensityRow>> {
    zs.require_height(t)?;
    let denom = t * t.ln();
    Ok(zs
        .iter()
        .map(|(idx, v)| {
            let count = v
                .iter()
                .filter(|r| r.gamma > 0.0 && r.gamma <= t)
                .map(|r| r.multiplicity as u64)
                .sum();
            DensityRow {
                label: format_label(zs.modulus(), idx),
                count,
                ratio_to_t_log_t: (t > 1.0).then(|| count as f64 / denom),
            }
        })
        .collect())
}
