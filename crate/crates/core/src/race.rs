//! Prime races: per-residue counters for π, θ, ψ and Π fed by the sieve
//! stream, plus detectors for sign changes, lead changes and orderings.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{self, Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::residues::{build_modulus, square_root_counts, Modulus};
use crate::sieve::{stream_events, stream_range, EventKind, EventSink, FnSink, PrimeEvent, SieveConfig};

pub const DEFAULT_RING_CAPACITY: usize = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Counters {
    pub pi: u64,
    pub theta: f64,
    pub psi: f64,
    #[serde(rename = "Pi")]
    pub big_pi: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct RawCounters {
    pi: u64,
    theta: KahanSum,
    psi: KahanSum,
    big_pi: KahanSum,
}

impl RawCounters {
    fn snapshot(&self) -> Counters {
        Counters {
            pi: self.pi,
            theta: self.theta.value(),
            psi: self.psi.value(),
            big_pi: self.big_pi.value(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceEventKind {
    SignChange,
    LeadChange,
    NewOrdering,
    FirstNegative,
}

impl RaceEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RaceEventKind::SignChange => "sign_change",
            RaceEventKind::LeadChange => "lead_change",
            RaceEventKind::NewOrdering => "new_ordering",
            RaceEventKind::FirstNegative => "first_negative",
        }
    }
}

impl fmt::Display for RaceEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One detector hit. `payload` is the pair `(l1, l2)` for pair events, the
/// pair `(new leader, old leader)` for lead changes, and the full
/// permutation (leader first) for orderings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceEvent {
    pub x: u64,
    pub kind: RaceEventKind,
    pub payload: Vec<u64>,
    pub delta_value: i64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct PairState {
    delta: i64,
    last_sign: i8,
    seen_negative: bool,
    sign_changes: u64,
    first_negative: Option<u64>,
    /// `#{n < since : Δ(n) ≤ 0}`; Δ has been constant on `[since, x]`.
    nonpositive: u64,
    /// `#{n < since : Δ(n) < 0}`.
    negative: u64,
    since: u64,
}

/// Detector state that is not derivable from the counters alone.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct Detectors {
    pairs: Vec<PairState>,
    leader: Option<usize>,
    order: Vec<usize>,
    orderings_seen: BTreeSet<Vec<u64>>,
    total_events: u64,
}

pub struct RaceState {
    modulus: Arc<Modulus>,
    tracked: Vec<u64>,
    /// Unit index of each tracked residue.
    tracked_units: Vec<usize>,
    /// For each unit index, its position in `tracked` (or `usize::MAX`).
    slot_of_unit: Vec<usize>,
    counters: Vec<RawCounters>,
    divisor_primes: u64,
    total_primes: u64,
    x_current: u64,
    det: Detectors,
    ring: VecDeque<RaceEvent>,
    ring_capacity: usize,
    spill: Option<Box<dyn Write + Send>>,
}

impl fmt::Debug for RaceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RaceState")
            .field("k", &self.modulus.k())
            .field("tracked", &self.tracked)
            .field("x_current", &self.x_current)
            .field("events", &self.det.total_events)
            .finish()
    }
}

fn sign(v: i64) -> i8 {
    v.signum() as i8
}

impl RaceState {
    pub fn new(k: u64, residues: &[u64]) -> Result<Self> {
        let modulus = Arc::new(build_modulus(k)?);
        Self::with_modulus(modulus, residues)
    }

    pub fn with_modulus(modulus: Arc<Modulus>, residues: &[u64]) -> Result<Self> {
        if residues.is_empty() {
            return Err(Error::InvalidConfig("at least one residue must be tracked".into()));
        }
        let mut tracked_units = Vec::with_capacity(residues.len());
        let mut slot_of_unit = vec![usize::MAX; modulus.phi() as usize];
        for (slot, &l) in residues.iter().enumerate() {
            modulus.check_residue(l)?;
            let u = modulus.unit_index(l).expect("checked");
            if slot_of_unit[u] != usize::MAX {
                return Err(Error::InvalidResidue {
                    modulus: modulus.k(),
                    residue: l,
                    reason: "listed more than once",
                });
            }
            slot_of_unit[u] = slot;
            tracked_units.push(u);
        }
        let r = residues.len();
        let pairs = (0..r * (r - 1) / 2)
            .map(|_| PairState {
                since: 1,
                ..PairState::default()
            })
            .collect();
        Ok(RaceState {
            counters: vec![RawCounters::default(); modulus.phi() as usize],
            modulus,
            tracked: residues.to_vec(),
            tracked_units,
            slot_of_unit,
            divisor_primes: 0,
            total_primes: 0,
            x_current: 1,
            det: Detectors {
                pairs,
                leader: None,
                order: (0..r).collect(),
                orderings_seen: BTreeSet::new(),
                total_events: 0,
            },
            ring: VecDeque::new(),
            ring_capacity: DEFAULT_RING_CAPACITY,
            spill: None,
        })
    }

    /// Bounds the in-memory event log; older events are dropped once full.
    pub fn set_ring_capacity(&mut self, capacity: usize) {
        self.ring_capacity = capacity.max(1);
        while self.ring.len() > self.ring_capacity {
            self.ring.pop_front();
        }
    }

    /// Writes every subsequent event as a CSV row; the header is written now.
    pub fn set_spill(&mut self, mut out: Box<dyn Write + Send>) -> Result<()> {
        writeln!(out, "x,kind,l1,l2,delta")?;
        self.spill = Some(out);
        Ok(())
    }

    pub fn flush_spill(&mut self) -> Result<()> {
        if let Some(out) = self.spill.as_mut() {
            out.flush()?;
        }
        Ok(())
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn modulus_arc(&self) -> &Arc<Modulus> {
        &self.modulus
    }

    pub fn tracked(&self) -> &[u64] {
        &self.tracked
    }

    pub fn x_current(&self) -> u64 {
        self.x_current
    }

    /// Events still held in the ring buffer, oldest first.
    pub fn event_log(&self) -> impl Iterator<Item = &RaceEvent> {
        self.ring.iter()
    }

    pub fn total_events(&self) -> u64 {
        self.det.total_events
    }

    pub fn orderings_seen(&self) -> &BTreeSet<Vec<u64>> {
        &self.det.orderings_seen
    }

    pub fn counters(&self, l: u64) -> Result<Counters> {
        let u = self.modulus.unit_index(l).filter(|_| l < self.modulus.k());
        u.map(|u| self.counters[u].snapshot())
            .ok_or(Error::UntrackedResidue(l))
    }

    /// Counters for every reduced residue, ascending.
    pub fn all_counters(&self) -> Vec<(u64, Counters)> {
        self.modulus
            .units()
            .iter()
            .zip(&self.counters)
            .map(|(&l, c)| (l, c.snapshot()))
            .collect()
    }

    pub fn total_primes(&self) -> u64 {
        self.total_primes
    }

    /// `π(x) − Σ_l π(x,k,l) − #{p | k, p ≤ x}`; always zero.
    pub fn partition_defect(&self) -> i64 {
        let sum: u64 = self.counters.iter().map(|c| c.pi).sum();
        self.total_primes as i64 - sum as i64 - self.divisor_primes as i64
    }

    fn slot(&self, l: u64) -> Result<usize> {
        if l >= self.modulus.k() {
            return Err(Error::UntrackedResidue(l));
        }
        self.modulus
            .unit_index(l)
            .map(|u| self.slot_of_unit[u])
            .filter(|&s| s != usize::MAX)
            .ok_or(Error::UntrackedResidue(l))
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let r = self.tracked.len();
        i * (2 * r - i - 1) / 2 + (j - i - 1)
    }

    /// `(pair index, orientation)` so that Δ(l1,l2) = orientation · stored Δ.
    fn pair_of(&self, l1: u64, l2: u64) -> Result<Option<(usize, i64)>> {
        let (a, b) = (self.slot(l1)?, self.slot(l2)?);
        Ok(match a.cmp(&b) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some((self.pair_index(a, b), 1)),
            std::cmp::Ordering::Greater => Some((self.pair_index(b, a), -1)),
        })
    }

    /// `Δ(x, k, l1, l2) = π(x,k,l1) − π(x,k,l2)`.
    pub fn delta(&self, l1: u64, l2: u64) -> Result<i64> {
        Ok(match self.pair_of(l1, l2)? {
            None => 0,
            Some((p, o)) => o * self.det.pairs[p].delta,
        })
    }

    /// Sign changes recorded for the ordered pair `(l1, l2)`.
    pub fn sign_changes(&self, l1: u64, l2: u64) -> Result<u64> {
        Ok(self.pair_of(l1, l2)?.map_or(0, |(p, _)| self.det.pairs[p].sign_changes))
    }

    /// First `x` with `Δ(x, k, l1, l2) < 0`, if seen. Only defined for a
    /// pair in tracking order (`l1` listed before `l2`).
    pub fn first_negative(&self, l1: u64, l2: u64) -> Result<Option<u64>> {
        match self.pair_of(l1, l2)? {
            Some((p, 1)) => Ok(self.det.pairs[p].first_negative),
            Some(_) => Err(Error::InvalidConfig(format!(
                "first_negative is tracked for ({l2},{l1}), not ({l1},{l2})"
            ))),
            None => Ok(None),
        }
    }

    /// `φ(k) x^{−1/2} (ψ(x,k,l1) − ψ(x,k,l2)) − N_k(l1) + N_k(l2)`.
    pub fn h_value(&self, l1: u64, l2: u64) -> Result<f64> {
        self.slot(l1)?;
        self.slot(l2)?;
        if self.x_current < 2 {
            return Err(Error::Domain("h(x) needs x >= 2".into()));
        }
        if l1 == l2 {
            return Ok(0.0);
        }
        let n = square_root_counts(&self.modulus);
        let d = self.counters(l1)?.psi - self.counters(l2)?.psi;
        Ok(self.modulus.phi() as f64 * d / (self.x_current as f64).sqrt() - n.get(l1) as f64
            + n.get(l2) as f64)
    }

    /// `π(x; A) − (|A|/|B|) π(x; B)` over disjoint residue sets.
    pub fn union_delta(&self, a: &[u64], b: &[u64]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidPartition("residue sets must be nonempty".into()));
        }
        let sa: BTreeSet<u64> = a.iter().copied().collect();
        let sb: BTreeSet<u64> = b.iter().copied().collect();
        if sa.len() != a.len() || sb.len() != b.len() {
            return Err(Error::InvalidPartition("repeated residue".into()));
        }
        if let Some(l) = sa.intersection(&sb).next() {
            return Err(Error::InvalidPartition(format!("residue {l} is in both sets")));
        }
        let count = |s: &BTreeSet<u64>| -> Result<u64> {
            s.iter().try_fold(0u64, |acc, &l| {
                self.modulus.check_residue(l)?;
                Ok(acc + self.counters(l)?.pi)
            })
        };
        let (pa, pb) = (count(&sa)?, count(&sb)?);
        Ok(pa as f64 - a.len() as f64 / b.len() as f64 * pb as f64)
    }

    /// `#{n ≤ x : Δ(n, k, l1, l2) ≤ 0} / x`.
    pub fn preponderance_density(&self, l1: u64, l2: u64) -> Result<f64> {
        let x = self.x_current;
        if x < 1 {
            return Err(Error::Domain("empty range".into()));
        }
        let count = match self.pair_of(l1, l2)? {
            None => x,
            Some((p, o)) => {
                let ps = &self.det.pairs[p];
                if o == 1 {
                    ps.nonpositive + if ps.delta <= 0 { x - ps.since + 1 } else { 0 }
                } else {
                    // Δ(l2,l1) ≤ 0 ⇔ Δ(l1,l2) ≥ 0
                    let before = (ps.since - 1) - ps.negative;
                    before + if ps.delta >= 0 { x - ps.since + 1 } else { 0 }
                }
            }
        };
        Ok(count as f64 / x as f64)
    }

    fn push_event(&mut self, ev: RaceEvent) -> Result<()> {
        if let Some(out) = self.spill.as_mut() {
            let (l1, l2) = match ev.payload.as_slice() {
                [] => (0, 0),
                [a] => (*a, *a),
                [a, .., b] => (*a, *b),
            };
            writeln!(out, "{},{},{},{},{}", ev.x, ev.kind, l1, l2, ev.delta_value)?;
        }
        self.det.total_events += 1;
        if self.ring.len() == self.ring_capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(ev);
        Ok(())
    }

    /// Feeds one sieve event. Events must arrive in ascending order.
    pub fn observe(&mut self, ev: &PrimeEvent) -> Result<()> {
        let n = ev.n;
        let k = self.modulus.k();
        self.x_current = self.x_current.max(n);
        let unit = self.modulus.unit_index(n);
        if ev.kind == EventKind::Prime {
            self.total_primes += 1;
            if unit.is_none() {
                self.divisor_primes += 1;
            }
        }
        let Some(u) = unit else { return Ok(()) };
        let c = &mut self.counters[u];
        c.psi.add(ev.lambda_weight);
        c.big_pi.add(1.0 / ev.exponent as f64);
        if ev.kind != EventKind::Prime {
            return Ok(());
        }
        c.pi += 1;
        c.theta.add(ev.lambda_weight);
        let slot = self.slot_of_unit[u];
        if slot == usize::MAX {
            return Ok(());
        }
        debug_assert_eq!(self.tracked[slot], n % k);
        self.update_pairs(slot, n)?;
        self.update_leader(slot, n)?;
        self.update_ordering(slot, n)?;
        Ok(())
    }

    fn update_pairs(&mut self, slot: usize, n: u64) -> Result<()> {
        let r = self.tracked.len();
        for other in 0..r {
            if other == slot {
                continue;
            }
            let (i, j, step) = if slot < other { (slot, other, 1) } else { (other, slot, -1) };
            let p = self.pair_index(i, j);
            let ps = &mut self.det.pairs[p];
            if ps.delta <= 0 {
                ps.nonpositive += n - ps.since;
            }
            if ps.delta < 0 {
                ps.negative += n - ps.since;
            }
            ps.since = n;
            ps.delta += step;
            let s = sign(ps.delta);
            let mut events = Vec::new();
            if s != 0 {
                if ps.last_sign != 0 && s != ps.last_sign {
                    ps.sign_changes += 1;
                    events.push(RaceEventKind::SignChange);
                }
                ps.last_sign = s;
            }
            if s < 0 && !ps.seen_negative {
                ps.seen_negative = true;
                ps.first_negative = Some(n);
                events.push(RaceEventKind::FirstNegative);
            }
            let delta = ps.delta;
            for kind in events {
                self.push_event(RaceEvent {
                    x: n,
                    kind,
                    payload: vec![self.tracked[i], self.tracked[j]],
                    delta_value: delta,
                })?;
            }
        }
        Ok(())
    }

    fn pi_slot(&self, slot: usize) -> u64 {
        self.counters[self.tracked_units[slot]].pi
    }

    fn update_leader(&mut self, slot: usize, n: u64) -> Result<()> {
        if self.tracked.len() < 2 {
            return Ok(());
        }
        // only the class that just moved can become a new unique leader
        let mine = self.pi_slot(slot);
        let unique = (0..self.tracked.len()).all(|s| s == slot || self.pi_slot(s) < mine);
        if !unique {
            return Ok(());
        }
        match self.det.leader {
            Some(old) if old != slot => {
                let delta = mine as i64 - self.pi_slot(old) as i64;
                self.det.leader = Some(slot);
                self.push_event(RaceEvent {
                    x: n,
                    kind: RaceEventKind::LeadChange,
                    payload: vec![self.tracked[slot], self.tracked[old]],
                    delta_value: delta,
                })?;
            }
            _ => self.det.leader = Some(slot),
        }
        Ok(())
    }

    fn update_ordering(&mut self, slot: usize, n: u64) -> Result<()> {
        if self.tracked.len() < 2 {
            return Ok(());
        }
        let mut pos = self.det.order.iter().position(|&s| s == slot).expect("slot present");
        let mine = self.pi_slot(slot);
        while pos > 0 {
            let prev = self.det.order[pos - 1];
            let theirs = self.pi_slot(prev);
            if theirs < mine || (theirs == mine && prev > slot) {
                self.det.order.swap(pos - 1, pos);
                pos -= 1;
            } else {
                break;
            }
        }
        let strict = self
            .det
            .order
            .windows(2)
            .all(|w| self.pi_slot(w[0]) > self.pi_slot(w[1]));
        if !strict {
            return Ok(());
        }
        let perm: Vec<u64> = self.det.order.iter().map(|&s| self.tracked[s]).collect();
        if self.det.orderings_seen.contains(&perm) {
            return Ok(());
        }
        self.det.orderings_seen.insert(perm.clone());
        let first = *self.det.order.first().expect("nonempty");
        let last = *self.det.order.last().expect("nonempty");
        let delta = self.pi_slot(first) as i64 - self.pi_slot(last) as i64;
        self.push_event(RaceEvent {
            x: n,
            kind: RaceEventKind::NewOrdering,
            payload: perm,
            delta_value: delta,
        })
    }

    /// Marks every integer up to `x` as processed.
    pub fn advance_to(&mut self, x: u64) {
        self.x_current = self.x_current.max(x);
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            modulus: self.modulus.k(),
            x: self.x_current,
            counters: self
                .all_counters()
                .into_iter()
                .map(|(l, c)| {
                    (
                        l.to_string(),
                        Counters {
                            pi: c.pi,
                            theta: round_sig(c.theta, 15),
                            psi: round_sig(c.psi, 15),
                            big_pi: round_sig(c.big_pi, 15),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits - 1, v).parse().unwrap_or(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub modulus: u64,
    pub x: u64,
    pub counters: BTreeMap<String, Counters>,
}

impl EventSink for RaceState {
    type Error = Error;

    fn on_event(&mut self, event: &PrimeEvent) -> Result<()> {
        self.observe(event)
    }

    fn on_segment_end(&mut self, hi: u64) -> Result<()> {
        self.advance_to(hi);
        debug_assert_eq!(self.partition_defect(), 0);
        Ok(())
    }
}

/// Runs a race mod `k` over `[2, limit]` for the listed residues.
pub fn run_race(k: u64, residues: &[u64], limit: u64, cfg: &SieveConfig) -> Result<RaceState> {
    let mut state = RaceState::new(k, residues)?;
    drive(&mut state, limit, cfg)?;
    Ok(state)
}

/// Continues `state` from its current position up to `limit`.
pub fn drive(state: &mut RaceState, limit: u64, cfg: &SieveConfig) -> Result<()> {
    if limit < 2 {
        return Err(Error::InvalidConfig(format!("limit {limit} < 2")));
    }
    let mut cfg = cfg.clone();
    cfg.limit = limit;
    let start = state.x_current + 1;
    if start <= limit {
        let result = if start <= 2 {
            stream_events(&cfg, state)
        } else {
            stream_range(&cfg, start, limit, state)
        };
        result?;
    }
    state.advance_to(limit);
    state.flush_spill()
}

// ---- checkpoints ----

const MAGIC: &[u8; 5] = b"PRSV1";

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl RaceState {
    /// Serializes counters and detector state. Layout (little-endian):
    /// magic `PRSV1`, limit, last completed boundary, k, tracked count and
    /// residues, then for each reduced residue `l, π, θ, θc, ψ, ψc, Π, Πc`
    /// (sum and compensation), then the byte length and JSON of the detectors.
    pub fn write_checkpoint<W: Write>(&self, limit: u64, out: &mut W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u64(&mut buf, limit);
        put_u64(&mut buf, self.x_current);
        put_u64(&mut buf, self.modulus.k());
        put_u64(&mut buf, self.tracked.len() as u64);
        for &l in &self.tracked {
            put_u64(&mut buf, l);
        }
        put_u64(&mut buf, self.divisor_primes);
        put_u64(&mut buf, self.total_primes);
        for (&l, c) in self.modulus.units().iter().zip(&self.counters) {
            put_u64(&mut buf, l);
            put_u64(&mut buf, c.pi);
            for s in [c.theta, c.psi, c.big_pi] {
                let (a, b) = s.parts();
                put_f64(&mut buf, a);
                put_f64(&mut buf, b);
            }
        }
        let det = serde_json::to_vec(&self.det)?;
        put_u64(&mut buf, det.len() as u64);
        buf.extend_from_slice(&det);
        out.write_all(&buf)?;
        Ok(())
    }

    /// Restores a state written by [`RaceState::write_checkpoint`]; returns
    /// it with the recorded limit. The ring buffer starts empty.
    pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<(RaceState, u64)> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cur = Cursor(&bytes);
        if cur.take(5)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let limit = cur.u64()?;
        let x = cur.u64()?;
        let k = cur.u64()?;
        let r = cur.u64()? as usize;
        if r > 1 << 20 {
            return Err(Error::Checkpoint("implausible residue count".into()));
        }
        let tracked = (0..r).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
        let mut state = RaceState::new(k, &tracked)?;
        state.divisor_primes = cur.u64()?;
        state.total_primes = cur.u64()?;
        for (i, &unit) in state.modulus.units().iter().enumerate() {
            if cur.u64()? != unit {
                return Err(Error::Checkpoint("residue table mismatch".into()));
            }
            let pi = cur.u64()?;
            let mut sums = [KahanSum::new(); 3];
            for s in &mut sums {
                *s = KahanSum::from_parts(cur.f64()?, cur.f64()?);
            }
            state.counters[i] = RawCounters {
                pi,
                theta: sums[0],
                psi: sums[1],
                big_pi: sums[2],
            };
        }
        let len = cur.u64()? as usize;
        let det: Detectors = serde_json::from_slice(cur.take(len)?)?;
        if det.pairs.len() != state.det.pairs.len() || det.order.len() != r {
            return Err(Error::Checkpoint("detector state does not match residues".into()));
        }
        state.det = det;
        state.x_current = x;
        if !cur.0.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok((state, limit))
    }
}

// ---- free-standing detectors ----

/// `Σ_{2 < p ≤ limit} (−1)^{(p−1)/2} e^{−p/x}`.
pub fn chebyshev_weighted_sum(x: f64, limit: u64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    if (limit as f64) < 41.0 * x {
        return Err(Error::TailNotNegligible { x, limit });
    }
    let mut sum = KahanSum::new();
    let mut sink = FnSink(|ev: &PrimeEvent| {
        if ev.kind == EventKind::Prime && ev.n > 2 {
            let w = (-(ev.n as f64) / x).exp();
            sum.add(if ev.n % 4 == 1 { w } else { -w });
        }
    });
    if limit >= 3 {
        stream_events(&SieveConfig::new(limit), &mut sink)?;
    }
    Ok(sum.value())
}

/// Checks `π(x,8,1) ≤ max_{a∈{3,5,7}} π(x,8,a)` for every integer `x ≤ limit`;
/// returns the first violation.
pub fn shanks_first_violation(limit: u64, cfg: &SieveConfig) -> Result<Option<u64>> {
    if limit < 2 {
        return Err(Error::InvalidConfig(format!("limit {limit} < 2")));
    }
    let mut counts = [0u64; 8];
    let mut first = None;
    let mut sink = FnSink(|ev: &PrimeEvent| {
        if first.is_none() && ev.kind == EventKind::Prime && ev.n % 2 == 1 {
            let r = (ev.n % 8) as usize;
            counts[r] += 1;
            // only an increment of class 1 can create a violation
            if r == 1 && counts[1] > counts[3].max(counts[5]).max(counts[7]) {
                first = Some(ev.n);
            }
        }
    });
    let mut cfg = cfg.clone();
    cfg.limit = limit;
    stream_events(&cfg, &mut sink)?;
    Ok(first)
}

pub fn shanks_check(limit: u64) -> Result<bool> {
    Ok(shanks_first_violation(limit, &SieveConfig::new(limit.max(2)))?.is_none())
}

/// `Π(x,k,l) − π(x,k,l) − ½ Σ_{u² ≡ l} π(√x,k,u)` for every reduced `l`.
pub fn prime_power_residuals(k: u64, x: u64) -> Result<Vec<(u64, f64)>> {
    let all: Vec<u64> = build_modulus(k)?.units().to_vec();
    let big = run_race(k, &all, x, &SieveConfig::new(x))?;
    let r = crate::sieve::isqrt(x).max(2);
    let small = run_race(k, &all, r, &SieveConfig::new(r))?;
    let m = big.modulus();
    let mut out = Vec::with_capacity(all.len());
    for &l in &all {
        let c = big.counters(l)?;
        let mut roots = 0u64;
        for &u in &all {
            if u * u % k == l {
                roots += small.counters(u)?.pi;
            }
        }
        out.push((l, c.big_pi - c.pi as f64 - roots as f64 / 2.0));
    }
    debug_assert_eq!(m.k(), k);
    Ok(out)
}

/// Step functions of the race counters: one row per prime or prime power
/// up to `limit`, holding the values just after that jump.
#[derive(Clone, Debug)]
pub struct RaceHistory {
    k: u64,
    residues: Vec<u64>,
    limit: u64,
    xs: Vec<u64>,
    pi_total: Vec<u64>,
    /// Row-major, `residues.len()` entries per row.
    pi: Vec<u64>,
    psi: Vec<f64>,
}

impl RaceHistory {
    pub fn collect(k: u64, residues: &[u64], limit: u64, cfg: &SieveConfig) -> Result<Self> {
        let probe = RaceState::new(k, residues)?;
        let m = probe.modulus_arc().clone();
        let r = residues.len();
        let slot_of: Vec<Option<usize>> = (0..k)
            .map(|n| residues.iter().position(|&l| l == n))
            .collect();
        let mut h = RaceHistory {
            k,
            residues: residues.to_vec(),
            limit,
            xs: Vec::new(),
            pi_total: Vec::new(),
            pi: Vec::new(),
            psi: Vec::new(),
        };
        let mut pi = vec![0u64; r];
        let mut psi = vec![KahanSum::new(); r];
        let mut total = 0u64;
        let mut sink = FnSink(|ev: &PrimeEvent| {
            let prime = ev.kind == EventKind::Prime;
            total += u64::from(prime);
            if let Some(j) = slot_of[(ev.n % k) as usize] {
                psi[j].add(ev.lambda_weight);
                pi[j] += u64::from(prime);
            }
            h.xs.push(ev.n);
            h.pi_total.push(total);
            h.pi.extend_from_slice(&pi);
            h.psi.extend(psi.iter().map(KahanSum::value));
        });
        let mut cfg = cfg.clone();
        cfg.limit = limit;
        stream_events(&cfg, &mut sink)?;
        debug_assert_eq!(m.k(), k);
        Ok(h)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Jump points in ascending order.
    pub fn jumps(&self) -> &[u64] {
        &self.xs
    }

    /// Row index in force at real `x`, or `None` before the first jump.
    pub fn row_at(&self, x: f64) -> Option<usize> {
        self.xs.partition_point(|&n| n as f64 <= x).checked_sub(1)
    }

    fn slot(&self, l: u64) -> Result<usize> {
        self.residues
            .iter()
            .position(|&v| v == l)
            .ok_or(Error::UntrackedResidue(l))
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if x > self.limit as f64 {
            return Err(Error::InsufficientData {
                requested: x,
                available: self.limit as f64,
            });
        }
        Ok(())
    }

    pub fn pi(&self, x: f64, l: u64) -> Result<u64> {
        let j = self.slot(l)?;
        self.check_x(x)?;
        Ok(self.row_at(x).map_or(0, |i| self.pi[i * self.residues.len() + j]))
    }

    pub fn psi(&self, x: f64, l: u64) -> Result<f64> {
        let j = self.slot(l)?;
        self.check_x(x)?;
        Ok(self.row_at(x).map_or(0.0, |i| self.psi[i * self.residues.len() + j]))
    }

    pub fn pi_total(&self, x: f64) -> Result<u64> {
        self.check_x(x)?;
        Ok(self.row_at(x).map_or(0, |i| self.pi_total[i]))
    }

    /// π values of every tracked residue in row `i`.
    pub fn pi_row(&self, i: usize) -> &[u64] {
        let r = self.residues.len();
        &self.pi[i * r..(i + 1) * r]
    }

    pub fn pi_total_row(&self, i: usize) -> u64 {
        self.pi_total[i]
    }
}

/// Writes events as CSV rows with the spill format.
pub fn write_events_csv<'a, W: Write>(
    events: impl IntoIterator<Item = &'a RaceEvent>,
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "x,kind,l1,l2,delta")?;
    for ev in events {
        let (l1, l2) = match ev.payload.as_slice() {
            [] => (0, 0),
            [a] => (*a, *a),
            [a, .., b] => (*a, *b),
        };
        writeln!(out, "{},{},{},{},{}", ev.x, ev.kind, l1, l2, ev.delta_value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn race(k: u64, res: &[u64], x: u64) -> RaceState {
        run_race(k, res, x, &SieveConfig::new(x)).unwrap()
    }

    #[test]
    fn small_delta_values() {
        assert_eq!(race(3, &[2, 1], 10).delta(2, 1).unwrap(), 1);
        let s = race(4, &[3, 1], 100);
        assert_eq!(s.delta(3, 1).unwrap(), 2);
        assert_eq!(s.delta(1, 3).unwrap(), -2);
        assert_eq!(s.delta(3, 3).unwrap(), 0);
        assert_eq!(s.counters(3).unwrap().pi, 13);
        assert_eq!(s.counters(1).unwrap().pi, 11);
        assert!(matches!(s.delta(3, 5), Err(Error::UntrackedResidue(5))));
    }

    #[test]
    fn rejects_bad_residues() {
        assert!(RaceState::new(4, &[2]).is_err());
        assert!(RaceState::new(4, &[3, 3]).is_err());
        assert!(RaceState::new(4, &[7]).is_err());
    }

    #[test]
    fn h_value_at_two() {
        let s = race(4, &[3, 1], 2);
        assert_eq!(s.h_value(3, 1).unwrap(), 2.0);
        assert_eq!(s.h_value(1, 1).unwrap(), 0.0);
    }

    #[test]
    fn preponderance_at_two() {
        let s = race(4, &[3, 1], 2);
        assert_eq!(s.preponderance_density(3, 1).unwrap(), 1.0);
    }

    #[test]
    fn union_delta_mod5() {
        let s = race(5, &[1, 2, 3, 4], 100);
        assert_eq!(s.union_delta(&[2, 3], &[1, 4]).unwrap(), 4.0);
        assert!(s.union_delta(&[2, 3], &[3, 4]).is_err());
        assert!(s.union_delta(&[], &[1]).is_err());
    }

    #[test]
    fn round_sig_digits() {
        assert_eq!(round_sig(1.23456789012345678, 15), 1.23456789012346);
        assert_eq!(round_sig(0.0, 15), 0.0);
    }

    #[test]
    fn shanks_small() {
        assert!(shanks_check(10).unwrap());
    }
}
