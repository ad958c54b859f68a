//! Segmented odd-only sieve of Eratosthenes that streams primes and prime
//! powers, with their von Mangoldt weights, in ascending order.
//!
//! Segments may be sieved in parallel, but delivery to the sink is strictly
//! ordered, so the event sequence is identical for every thread count.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest allowed segment, in bytes of odd-number bitmap.
pub const MIN_SEGMENT_BYTES: usize = 1 << 14;
/// Default segment: 2^18 odd slots.
pub const DEFAULT_SEGMENT_BYTES: usize = 1 << 15;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wheel {
    None,
    #[default]
    Mod30,
    Mod210,
}

impl Wheel {
    /// Odd primes removed by the pre-sieve pattern.
    fn primes(self) -> &'static [u64] {
        match self {
            Wheel::None => &[],
            Wheel::Mod30 => &[3, 5],
            Wheel::Mod210 => &[3, 5, 7],
        }
    }
}

impl std::str::FromStr for Wheel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Wheel::None),
            "mod30" => Ok(Wheel::Mod30),
            "mod210" => Ok(Wheel::Mod210),
            other => Err(Error::InvalidConfig(format!("unknown wheel '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveConfig {
    pub limit: u64,
    /// Bytes of odd-number bitmap per segment.
    pub segment_size: usize,
    pub wheel: Wheel,
    pub thread_count: usize,
    /// When set, every event carries `n mod residue_modulus`.
    pub residue_modulus: Option<u64>,
}

impl SieveConfig {
    pub fn new(limit: u64) -> Self {
        SieveConfig {
            limit,
            segment_size: DEFAULT_SEGMENT_BYTES,
            wheel: Wheel::default(),
            thread_count: 1,
            residue_modulus: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.thread_count = threads;
        self
    }

    pub fn with_wheel(mut self, wheel: Wheel) -> Self {
        self.wheel = wheel;
        self
    }

    pub fn with_segment_size(mut self, bytes: usize) -> Self {
        self.segment_size = bytes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.limit < 2 {
            return Err(Error::InvalidConfig(format!("limit {} < 2", self.limit)));
        }
        if self.segment_size < MIN_SEGMENT_BYTES || self.segment_size % 8 != 0 {
            return Err(Error::InvalidConfig(format!(
                "segment_size {} must be a multiple of 8 and at least {MIN_SEGMENT_BYTES}",
                self.segment_size
            )));
        }
        if self.thread_count == 0 {
            return Err(Error::InvalidConfig("thread_count must be positive".into()));
        }
        if self.residue_modulus == Some(0) {
            return Err(Error::InvalidConfig("residue modulus must be positive".into()));
        }
        Ok(())
    }

    fn slots(&self) -> u64 {
        self.segment_size as u64 * 8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Prime,
    PrimePower,
}

/// A prime or prime power `n = p^m` with `Λ(n) = log p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrimeEvent {
    pub n: u64,
    pub kind: EventKind,
    /// `m` in `n = p^m`.
    pub exponent: u32,
    pub lambda_weight: f64,
    pub residue: Option<u64>,
}

/// Consumer of the ordered event stream.
pub trait EventSink {
    type Error: fmt::Display;

    fn on_event(&mut self, event: &PrimeEvent) -> Result<(), Self::Error>;

    /// Called after every event with `n <= hi` has been delivered.
    fn on_segment_end(&mut self, _hi: u64) -> Result<(), Self::Error> {
        Ok(())
    }
}

/// Adapts a closure into an infallible sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(&PrimeEvent)> EventSink for FnSink<F> {
    type Error = std::convert::Infallible;

    #[inline]
    fn on_event(&mut self, event: &PrimeEvent) -> Result<(), Self::Error> {
        (self.0)(event);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StreamSummary {
    pub prime_count: u64,
    pub max_n: u64,
}

/// Primes up to `n` by a plain sieve.
pub fn small_primes(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All `p^m <= limit` with `m >= 2`, sorted ascending, as `(n, p, m)`.
fn prime_powers(base: &[u64], limit: u64) -> Vec<(u64, u64, u32)> {
    let mut out = Vec::new();
    for &p in base {
        let mut n = p;
        let mut m = 1;
        while let Some(next) = n.checked_mul(p) {
            if next > limit {
                break;
            }
            n = next;
            m += 1;
            out.push((n, p, m));
        }
    }
    out.sort_unstable_by_key(|e| e.0);
    out
}

/// Pre-sieve pattern for the wheel, one word per 64 odd numbers; the
/// pattern repeats every `pattern.len()` words.
fn wheel_pattern(wheel: Wheel) -> Vec<u64> {
    let period: u64 = wheel.primes().iter().product();
    let words = period.max(1) as usize;
    let mut pat = vec![!0u64; words];
    for &p in wheel.primes() {
        // odd n = 2j+1 divisible by p  <=>  j ≡ (p-1)/2 (mod p)
        let mut j = (p - 1) / 2;
        while j < 64 * words as u64 {
            pat[(j / 64) as usize] &= !(1u64 << (j % 64));
            j += p;
        }
    }
    pat
}

struct Sieve<'a> {
    cfg: &'a SieveConfig,
    base: Vec<u64>,
    /// Base primes actually crossed off (those not handled by the wheel).
    crossing: Vec<u64>,
    pattern: Vec<u64>,
}

impl<'a> Sieve<'a> {
    fn new(cfg: &'a SieveConfig, hi: u64) -> Self {
        let base = small_primes(isqrt(hi));
        let skip = cfg.wheel.primes();
        let crossing = base
            .iter()
            .copied()
            .filter(|&p| p != 2 && !skip.contains(&p))
            .collect();
        Sieve {
            cfg,
            base,
            crossing,
            pattern: wheel_pattern(cfg.wheel),
        }
    }

    /// Odd primes `n` with `lo <= n <= hi` inside segment `seg`.
    fn sieve_segment(&self, seg: u64, lo: u64, hi: u64) -> (Vec<u64>, Vec<f64>) {
        let slots = self.cfg.slots();
        let words = (slots / 64) as usize;
        let j0 = seg * slots;
        let mut bits = Vec::with_capacity(words);
        let w0 = (j0 / 64) as usize;
        let plen = self.pattern.len();
        for w in 0..words {
            bits.push(self.pattern[(w0 + w) % plen]);
        }
        let seg_last_j = j0 + slots - 1;
        for &p in &self.crossing {
            let p2 = p * p;
            if p2 > 2 * seg_last_j + 1 {
                break;
            }
            // first odd multiple of p that is >= max(p², 2*j0+1)
            let start_n = 2 * j0 + 1;
            let mut m = if p2 >= start_n {
                p2
            } else {
                let r = start_n % p;
                let mut m = if r == 0 { start_n } else { start_n + (p - r) };
                if m % 2 == 0 {
                    m += p;
                }
                m
            };
            if m % 2 == 0 {
                m += p;
            }
            let mut j = ((m - 1) / 2 - j0) as usize;
            let step = p as usize;
            let limit = slots as usize;
            while j < limit {
                bits[j >> 6] &= !(1u64 << (j & 63));
                j += step;
            }
        }
        // the wheel pattern also removed the wheel primes themselves
        let mut primes = Vec::new();
        for &p in self.cfg.wheel.primes() {
            let j = (p - 1) / 2;
            if (j0..=seg_last_j).contains(&j) {
                primes.push(p);
            }
        }
        for (w, &word) in bits.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let b = word.trailing_zeros() as u64;
                word &= word - 1;
                let n = 2 * (j0 + w as u64 * 64 + b) + 1;
                if n == 1 || n < lo {
                    continue;
                }
                if n > hi {
                    break;
                }
                primes.push(n);
            }
        }
        primes.sort_unstable();
        primes.retain(|&n| n >= lo && n <= hi);
        let weights = primes.iter().map(|&n| (n as f64).ln()).collect();
        (primes, weights)
    }
}

fn map_segments<F>(segs: &[u64], threads: usize, f: F) -> Vec<(Vec<u64>, Vec<f64>)>
where
    F: Fn(u64) -> (Vec<u64>, Vec<f64>) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            if let Ok(pool) = pool {
                return pool.install(|| segs.par_iter().map(|&s| f(s)).collect());
            }
        }
    }
    let _ = threads;
    segs.iter().map(|&s| f(s)).collect()
}

/// Streams every prime and prime power in `[2, cfg.limit]`.
pub fn stream_events<S: EventSink>(cfg: &SieveConfig, sink: &mut S) -> Result<StreamSummary> {
    stream_range(cfg, 2, cfg.limit, sink)
}

/// Streams every prime and prime power `n` with `lo <= n <= hi`.
///
/// Segment-end callbacks report the largest `n` covered so far; on sink
/// failure the error carries the last boundary that was fully delivered.
pub fn stream_range<S: EventSink>(
    cfg: &SieveConfig,
    lo: u64,
    hi: u64,
    sink: &mut S,
) -> Result<StreamSummary> {
    cfg.validate()?;
    let lo = lo.max(2);
    let mut summary = StreamSummary {
        prime_count: 0,
        max_n: 0,
    };
    if hi < lo {
        return Ok(summary);
    }
    let sieve = Sieve::new(cfg, hi);
    let powers = prime_powers(&sieve.base, hi);
    let mut pw = powers.partition_point(|e| e.0 < lo);
    let residue = |n: u64| cfg.residue_modulus.map(|k| n % k);
    let abort = |last: u64, e: &dyn fmt::Display| Error::SinkAborted {
        last_completed: last,
        message: e.to_string(),
    };
    let mut last_completed = lo - 1;

    if lo <= 2 {
        let ev = PrimeEvent {
            n: 2,
            kind: EventKind::Prime,
            exponent: 1,
            lambda_weight: std::f64::consts::LN_2,
            residue: residue(2),
        };
        sink.on_event(&ev).map_err(|e| abort(last_completed, &e))?;
        summary.prime_count += 1;
        summary.max_n = 2;
    }

    let slots = cfg.slots();
    let first_seg = ((lo.max(3) - 1) / 2) / slots;
    let last_seg = ((hi.max(3) - 1) / 2) / slots;
    let batch = (cfg.thread_count * 4).max(1) as u64;
    let mut seg = first_seg;
    while seg <= last_seg {
        let end = (seg + batch).min(last_seg + 1);
        let segs: Vec<u64> = (seg..end).collect();
        let outputs = map_segments(&segs, cfg.thread_count, |s| sieve.sieve_segment(s, lo, hi));
        for (&s, (primes, weights)) in segs.iter().zip(outputs) {
            let seg_hi = (2 * ((s + 1) * slots - 1) + 1).min(hi);
            for (&n, &w) in primes.iter().zip(&weights) {
                while pw < powers.len() && powers[pw].0 < n {
                    emit_power(&powers[pw], residue(powers[pw].0), sink)
                        .map_err(|e| abort(last_completed, &e))?;
                    summary.max_n = powers[pw].0;
                    pw += 1;
                }
                let ev = PrimeEvent {
                    n,
                    kind: EventKind::Prime,
                    exponent: 1,
                    lambda_weight: w,
                    residue: residue(n),
                };
                sink.on_event(&ev).map_err(|e| abort(last_completed, &e))?;
                summary.prime_count += 1;
                summary.max_n = n;
            }
            while pw < powers.len() && powers[pw].0 <= seg_hi {
                emit_power(&powers[pw], residue(powers[pw].0), sink)
                    .map_err(|e| abort(last_completed, &e))?;
                summary.max_n = powers[pw].0;
                pw += 1;
            }
            sink.on_segment_end(seg_hi)
                .map_err(|e| abort(last_completed, &e))?;
            last_completed = seg_hi;
        }
        seg = end;
    }
    Ok(summary)
}

fn emit_power<S: EventSink>(
    &(n, p, m): &(u64, u64, u32),
    residue: Option<u64>,
    sink: &mut S,
) -> Result<(), S::Error> {
    sink.on_event(&PrimeEvent {
        n,
        kind: EventKind::PrimePower,
        exponent: m,
        lambda_weight: (p as f64).ln(),
        residue,
    })
}

/// `π(x)` via the streaming sieve.
pub fn pi_of(x: u64) -> u64 {
    if x < 2 {
        return 0;
    }
    let mut count = 0u64;
    let mut sink = FnSink(|ev: &PrimeEvent| {
        if ev.kind == EventKind::Prime {
            count += 1;
        }
    });
    stream_events(&SieveConfig::new(x), &mut sink).expect("infallible sink");
    count
}

/// All primes in `[lo, hi]` via the segmented sieve.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if hi < 2 {
        return out;
    }
    let mut sink = FnSink(|ev: &PrimeEvent| {
        if ev.kind == EventKind::Prime {
            out.push(ev.n);
        }
    });
    stream_range(&SieveConfig::new(hi), lo, hi, &mut sink).expect("infallible sink");
    out
}
