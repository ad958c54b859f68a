use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use primerace::barrier::{
    k5_phase_inequality, orderings_census, verify_exclusion, BarrierSpec, VerdictStatus,
};
use primerace::density::{
    e_vector, empirical_log_density, tail_probe, unbiased_predicate, write_evectors_csv,
    DensityEstimate, GshOptions, GshSampler,
};
use primerace::explicit::{
    a_empirical, character_by_label, delta_reconstruct, oscillation_report, psi_chi_sieved,
    psi_chi_truncated, IntegralMode, ResidueWeights,
};
use primerace::numeric::log_space;
use primerace::race::{chebyshev_weighted_sum, shanks_first_violation, RaceHistory, RaceState};
use primerace::report::{svg_line_plot, write_curves_csv, Curve, PlotOptions};
use primerace::residues::build_modulus;
use primerace::sieve::{stream_range, EventSink, PrimeEvent, SieveConfig, Wheel};
use primerace::zeros::{default_tolerance, haselgrove_check, load_zeros, n_independence, ZeroSet};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BarrierArgs, ChebyshevArgs, Command, DensityArgs, ExplicitArgs, IndependenceArgs, RaceArgs,
    ShanksArgs,
};
use crate::{CliError, CliResult, Outcome, Outputs};

pub(crate) fn dispatch(cmd: &Command, threads: usize, out: &mut Outputs) -> CliResult<Outcome> {
    match cmd {
        Command::Race(a) => race(a, threads, out),
        Command::Density(a) => density(a, threads, out),
        Command::Explicit(a) => explicit(a, threads, out),
        Command::Independence(a) => independence(a, out),
        Command::Barrier(a) => barrier(a, out),
        Command::Chebyshev(a) => chebyshev(a, out),
        Command::Shanks(a) => shanks(a, threads, out),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn zeros_for(path: &Path, k: u64, out: &mut Outputs) -> CliResult<ZeroSet> {
    out.input(path)?;
    let zs = load_zeros(path)?;
    for w in zs.warnings() {
        eprintln!("warning: {w}");
    }
    if zs.modulus() != k {
        return Err(CliError::Validation(format!(
            "{} holds zeros mod {}, not mod {k}",
            path.display(),
            zs.modulus()
        )));
    }
    Ok(zs)
}

fn plot(out: &mut Outputs, name: &str, curves: &[Curve], opts: PlotOptions) -> CliResult<()> {
    if out.plot() {
        out.write(name, svg_line_plot(curves, &opts).as_bytes())?;
    }
    Ok(())
}

// ---- race ----

/// Records the first tracked pair's difference at grid points while
/// forwarding events to the race state.
struct Sampled<'a> {
    state: &'a mut RaceState,
    grid: &'a [u64],
    next: usize,
    pair: Option<(u64, u64)>,
    points: Vec<(f64, f64)>,
}

impl Sampled<'_> {
    fn record_through(&mut self, bound: u64) -> primerace::Result<()> {
        let Some((a, b)) = self.pair else { return Ok(()) };
        while self.next < self.grid.len() && self.grid[self.next] <= bound {
            let d = self.state.delta(a, b)?;
            self.points.push((self.grid[self.next] as f64, d as f64));
            self.next += 1;
        }
        Ok(())
    }
}

impl EventSink for Sampled<'_> {
    type Error = primerace::Error;

    fn on_event(&mut self, event: &PrimeEvent) -> primerace::Result<()> {
        self.record_through(event.n - 1)?;
        self.state.on_event(event)
    }

    fn on_segment_end(&mut self, hi: u64) -> primerace::Result<()> {
        self.state.on_segment_end(hi)?;
        self.record_through(hi)
    }
}

fn race(a: &RaceArgs, threads: usize, out: &mut Outputs) -> CliResult<Outcome> {
    if a.limit < 2 {
        return Err(usage(format!("limit must be at least 2, got {}", a.limit)));
    }
    let wheel: Wheel = a.wheel.parse()?;
    let mut cfg = SieveConfig::new(a.limit).with_threads(threads).with_wheel(wheel);
    if let Some(s) = a.segment_size {
        cfg = cfg.with_segment_size(s);
    }
    cfg.validate()?;

    let mut state = match &a.resume {
        Some(p) => {
            out.input(p)?;
            let f = File::open(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let (s, _) = RaceState::read_checkpoint(&mut BufReader::new(f))?;
            if s.modulus().k() != a.modulus || s.tracked() != a.residues.as_slice() {
                return Err(usage("checkpoint was written for a different modulus or residue list"));
            }
            if s.x_current() > a.limit {
                return Err(usage(format!("checkpoint is already at x = {}", s.x_current())));
            }
            s
        }
        None => RaceState::new(a.modulus, &a.residues)?,
    };
    state.set_ring_capacity(a.ring_capacity);
    let events = out.create("events.csv")?;
    state.set_spill(Box::new(BufWriter::new(events)))?;

    let pair = (a.residues.len() >= 2).then(|| (a.residues[0], a.residues[1]));
    let grid: Vec<u64> = if out.plot() && pair.is_some() {
        let lo = state.x_current().max(2);
        let n = 2000u64.min(a.limit - lo + 1);
        (0..n).map(|i| lo + i * (a.limit - lo) / (n - 1).max(1)).collect()
    } else {
        Vec::new()
    };
    let mut sampled = Sampled { state: &mut state, grid: &grid, next: 0, pair, points: Vec::new() };

    loop {
        let x = sampled.state.x_current();
        if x >= a.limit {
            break;
        }
        let target = match a.checkpoint_every {
            Some(step) if step > 0 => ((x / step + 1) * step).min(a.limit),
            _ => a.limit,
        };
        let start = x + 1;
        if start <= target {
            let mut c = cfg.clone();
            c.limit = target;
            stream_range(&c, start.max(2), target, &mut sampled)?;
        }
        sampled.state.advance_to(target);
        sampled.record_through(target)?;
        if target < a.limit {
            if let Some(p) = &a.checkpoint {
                write_checkpoint(sampled.state, a.limit, p, out)?;
            }
        }
    }
    let points = std::mem::take(&mut sampled.points);
    state.flush_spill()?;
    if let Some(p) = &a.checkpoint {
        write_checkpoint(&state, a.limit, p, out)?;
    }

    let mut pairs = Vec::new();
    for (i, &l1) in a.residues.iter().enumerate() {
        for &l2 in &a.residues[i + 1..] {
            let first = state.first_negative(l1, l2)?;
            let changes = state.sign_changes(l1, l2)?;
            match first {
                Some(x) => println!("first_negative({l1},{l2}) = {x}"),
                None => println!("first_negative({l1},{l2}) = none up to {}", a.limit),
            }
            println!("sign_changes({l1},{l2}) = {changes}");
            pairs.push(json!({
                "l1": l1,
                "l2": l2,
                "delta": state.delta(l1, l2)?,
                "sign_changes": changes,
                "first_negative": first,
                "preponderance_density": state.preponderance_density(l1, l2)?,
                "h": state.h_value(l1, l2)?,
            }));
        }
    }
    out.write_json("snapshot.json", &state.snapshot())?;
    out.write_json(
        "race.json",
        &json!({
            "k": a.modulus,
            "residues": a.residues,
            "limit": a.limit,
            "total_primes": state.total_primes(),
            "total_events": state.total_events(),
            "orderings_seen": state.orderings_seen().len(),
            "pairs": pairs,
        }),
    )?;
    if let Some((l1, l2)) = pair {
        let curve = Curve::new(format!("pi(x;{},{l1}) - pi(x;{},{l2})", a.modulus, a.modulus), None, points);
        let opts = PlotOptions {
            title: format!("Race mod {} up to {}", a.modulus, a.limit),
            y_label: "difference".into(),
            ..PlotOptions::default()
        };
        plot(out, "race.svg", &[curve], opts)?;
    }
    Ok(Outcome::Done)
}

fn write_checkpoint(state: &RaceState, limit: u64, path: &Path, out: &mut Outputs) -> CliResult<()> {
    let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    out.track(path.to_path_buf());
    let mut w = BufWriter::new(f);
    state.write_checkpoint(limit, &mut w)?;
    Ok(())
}

// ---- density ----

#[derive(Serialize)]
struct OrderingCount {
    ordering: Vec<u64>,
    count: u64,
    fraction: f64,
}

#[derive(Serialize)]
struct DensityReport {
    #[serde(flatten)]
    estimate: DensityEstimate,
    unbiased_predicate: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    orderings: Vec<OrderingCount>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tail: Vec<(f64, f64)>,
}

fn permutations(items: &[u64]) -> Vec<Vec<u64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

fn density(a: &DensityArgs, threads: usize, out: &mut Outputs) -> CliResult<Outcome> {
    let ordering = if a.ordering.is_empty() { a.residues.clone() } else { a.ordering.clone() };
    let unbiased = unbiased_predicate(a.modulus, &a.residues)?;
    let mut orderings = Vec::new();
    let mut tail = Vec::new();

    let estimate = if a.gsh {
        let path = a.zeros.as_ref().ok_or_else(|| usage("--gsh needs --zeros"))?;
        let zs = zeros_for(path, a.modulus, out)?;
        let opts = GshOptions {
            t: a.tmax.unwrap_or(zs.height_limit()),
            fejer: !a.no_fejer,
            threads,
        };
        out.seed(a.seed);
        let sampler = GshSampler::new(&zs, &a.residues, opts)?;
        let est = sampler.density(&ordering, a.samples, a.seed)?;
        if a.all_orderings {
            for (ord, count) in sampler.ordering_counts(a.samples, a.seed) {
                let fraction = count as f64 / a.samples as f64;
                orderings.push(OrderingCount { ordering: ord, count, fraction });
            }
        }
        if !a.tail_grid.is_empty() {
            tail = tail_probe(&sampler, &a.tail_grid, a.samples, a.seed);
        }
        if let Some(n) = a.evectors {
            let rows = sampler.samples(n, a.seed);
            let f = out.create("evectors.csv")?;
            write_evectors_csv(&a.residues, &rows, BufWriter::new(f))?;
        }
        est
    } else {
        let x = a.x_max.ok_or_else(|| usage("--empirical needs -X"))?;
        if !a.tail_grid.is_empty() {
            return Err(usage("--tail-grid needs --gsh"));
        }
        let cfg = SieveConfig::new(x.max(2)).with_threads(threads);
        let history = RaceHistory::collect(a.modulus, &a.residues, x.max(2), &cfg)?;
        let est = empirical_log_density(&history, &ordering, x as f64)?;
        if a.all_orderings {
            for ord in permutations(&a.residues) {
                let e = empirical_log_density(&history, &ord, x as f64)?;
                orderings.push(OrderingCount { ordering: ord, count: e.n_samples, fraction: e.delta_hat });
            }
        }
        if let Some(n) = a.evectors {
            let rows = log_space(2.0, x as f64, n as usize)
                .into_iter()
                .map(|x| e_vector(&history, x))
                .collect::<primerace::Result<Vec<_>>>()?;
            let f = out.create("evectors.csv")?;
            write_evectors_csv(&a.residues, &rows, BufWriter::new(f))?;
        }
        est
    };

    let scale = match (estimate.t, estimate.x) {
        (Some(t), _) => format!("T={t}"),
        (_, Some(x)) => format!("X={x}"),
        _ => String::new(),
    };
    println!(
        "delta_hat = {} stderr = {} ({}, {scale}, n={})",
        estimate.delta_hat,
        estimate.stderr,
        if a.gsh { "gsh_monte_carlo" } else { "empirical_logmeasure" },
        estimate.n_samples
    );
    out.write_json("density.json", &DensityReport { estimate, unbiased_predicate: unbiased, orderings, tail })?;
    Ok(Outcome::Done)
}

// ---- explicit ----

#[derive(Serialize)]
struct TruncationSummary {
    #[serde(rename = "T")]
    t: f64,
    mean_abs_error: f64,
    sign_agreement: usize,
    points: usize,
}

fn explicit(a: &ExplicitArgs, threads: usize, out: &mut Outputs) -> CliResult<Outcome> {
    let mode: IntegralMode = a.mode.parse()?;
    let zs = zeros_for(&a.zeros, a.modulus, out)?;
    let m = Arc::new(build_modulus(a.modulus)?);
    if !(a.x_min >= 10.0 && a.x_max >= a.x_min) || a.points < 2 {
        return Err(usage("need 10 <= x-min <= x-max and at least 2 points"));
    }
    for &t in &a.tmax {
        zs.require_height(t)?;
    }
    let limit = a.x_max.ceil() as u64;
    let cfg = SieveConfig::new(limit).with_threads(threads);
    let xs = log_space(a.x_min, a.x_max, a.points);
    let mut curves = Vec::new();
    let mut summaries = Vec::new();

    let pair = match a.residues.as_slice() {
        [l1, l2] => Some((*l1, *l2)),
        [] if a.character.is_some() => None,
        _ => return Err(usage("--residues takes exactly two residues l1,l2")),
    };

    let (title, history) = if let Some(label) = &a.character {
        let chi = character_by_label(&m, label)?;
        let history = RaceHistory::collect(a.modulus, m.units(), limit, &cfg)?;
        let sieve: Vec<f64> = xs
            .iter()
            .map(|&x| Ok(psi_chi_sieved(&chi, &history, x)?.re))
            .collect::<primerace::Result<_>>()?;
        curves.push(Curve::new("sieve", None, xs.iter().copied().zip(sieve.iter().copied()).collect()));
        for &t in &a.tmax {
            let vals: Vec<f64> = xs
                .iter()
                .map(|&x| Ok(psi_chi_truncated(x, &chi, &zs, t)?.re))
                .collect::<primerace::Result<_>>()?;
            summaries.push(summary(t, &sieve, &vals));
            curves.push(Curve::new(format!("zeros T={t}"), Some(t), xs.iter().copied().zip(vals).collect()));
        }
        (format!("Re psi(x, {label}) - main term"), history)
    } else {
        let (l1, l2) = pair.expect("checked above");
        let w = ResidueWeights::new(m.clone(), l1, l2)?;
        let history = RaceHistory::collect(a.modulus, &[l1, l2], limit, &cfg)?;
        let phi = m.phi() as f64;
        let sieve: Vec<f64> = xs
            .iter()
            .map(|&x| Ok(phi * (history.pi(x, l1)? as f64 - history.pi(x, l2)? as f64)))
            .collect::<primerace::Result<_>>()?;
        curves.push(Curve::new("sieve", None, xs.iter().copied().zip(sieve.iter().copied()).collect()));
        for &t in &a.tmax {
            let vals: Vec<f64> = xs
                .iter()
                .map(|&x| delta_reconstruct(x, &w, &zs, t, mode))
                .collect::<primerace::Result<_>>()?;
            summaries.push(summary(t, &sieve, &vals));
            curves.push(Curve::new(format!("zeros T={t}"), Some(t), xs.iter().copied().zip(vals).collect()));
        }
        (format!("phi(k) (pi(x;{0},{l1}) - pi(x;{0},{l2}))", a.modulus), history)
    };

    for s in &summaries {
        println!(
            "T={}: mean |sieve - zeros| = {:.4}, sign agreement {}/{}",
            s.t, s.mean_abs_error, s.sign_agreement, s.points
        );
    }
    let f = out.create("curves.csv")?;
    write_curves_csv("x", &curves, BufWriter::new(f))?;
    out.write_json(
        "explicit.json",
        &json!({
            "k": a.modulus,
            "residues": a.residues,
            "character": a.character,
            "mode": mode,
            "x_min": a.x_min,
            "x_max": a.x_max,
            "points": a.points,
            "truncations": summaries,
        }),
    )?;
    let opts = PlotOptions { title, log_x: true, ..PlotOptions::default() };
    plot(out, "explicit.svg", &curves, opts)?;

    if a.oscillation {
        let (l1, l2) = pair.ok_or_else(|| usage("--oscillation needs --residues l1,l2"))?;
        let w = ResidueWeights::new(m.clone(), l1, l2)?;
        let t = a.tmax.iter().copied().fold(0.0, f64::max);
        let (u0, u1) = (a.x_min.ln(), a.x_max.ln());
        let us: Vec<f64> = (0..a.points).map(|i| u0 + (u1 - u0) * i as f64 / (a.points - 1) as f64).collect();
        let rep = oscillation_report(&w, &zs, t, a.diamond_n, 1, &us)?;
        let emp: Vec<f64> = us
            .iter()
            .map(|&u| a_empirical(u, &history, l1, l2))
            .collect::<primerace::Result<_>>()?;
        let star: Vec<f64> = rep.samples.iter().map(|s| s.1).collect();
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let eps = 0.2;
        let mut top = rep.terms.clone();
        top.sort_by(|x, y| y.a.norm().total_cmp(&x.a.norm()));
        top.truncate(50);
        out.write_json(
            "oscillation.json",
            &json!({
                "T": t,
                "a0": rep.a0,
                "diamond_n": a.diamond_n,
                "diamond_bounds": rep.diamond_bounds,
                "term_count": rep.terms.len(),
                "largest_terms": top,
                "sandwich": {
                    "epsilon": eps,
                    "a_min": lo(&emp), "a_max": hi(&emp),
                    "a_star_min": lo(&star), "a_star_max": hi(&star),
                    "lower_ok": lo(&emp) <= lo(&star) + eps,
                    "upper_ok": hi(&star) <= hi(&emp) + eps,
                },
            }),
        )?;
        let osc = [
            Curve::new("A(u)", None, us.iter().copied().zip(emp).collect()),
            Curve::new(format!("A*_T(u), T={t}"), Some(t), rep.samples.clone()),
        ];
        let f = out.create("oscillation.csv")?;
        write_curves_csv("u", &osc, BufWriter::new(f))?;
        let opts = PlotOptions { title: "A(u) and A*_T(u)".into(), x_label: "u".into(), ..PlotOptions::default() };
        plot(out, "oscillation.svg", &osc, opts)?;
    }
    Ok(Outcome::Done)
}

fn summary(t: f64, sieve: &[f64], vals: &[f64]) -> TruncationSummary {
    let n = sieve.len();
    let err: f64 = sieve.iter().zip(vals).map(|(s, v)| (s - v).abs()).sum::<f64>() / n as f64;
    let agree = sieve.iter().zip(vals).filter(|(s, v)| s.signum() == v.signum()).count();
    TruncationSummary { t, mean_abs_error: err, sign_agreement: agree, points: n }
}

// ---- independence ----

fn independence(a: &IndependenceArgs, out: &mut Outputs) -> CliResult<Outcome> {
    out.input(&a.zeros)?;
    let zs = load_zeros(&a.zeros)?;
    let subset = a
        .subset
        .iter()
        .map(|&i| i.checked_sub(1).ok_or_else(|| usage("--subset indices start at 1")))
        .collect::<CliResult<Vec<_>>>()?;
    let tol = a.tolerance.unwrap_or_else(|| default_tolerance(&zs));
    let verdict = n_independence(&zs, &subset, a.n, tol)?;
    let haselgrove = a.haselgrove.map(|h| haselgrove_check(&zs, h)).transpose()?;
    println!(
        "passed={} vectors={} violations={}",
        verdict.passed,
        verdict.vectors_enumerated,
        verdict.violations.len()
    );
    out.write_json("independence.json", &json!({ "verdict": verdict, "haselgrove": haselgrove }))?;
    Ok(Outcome::Done)
}

// ---- barrier ----

fn barrier(a: &BarrierArgs, out: &mut Outputs) -> CliResult<Outcome> {
    let mut spec = match (&a.builtin, &a.spec) {
        (Some(name), _) => BarrierSpec::builtin(name)?,
        (None, Some(path)) => {
            out.input(path)?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            BarrierSpec::parse(&text)?
        }
        (None, None) => return Err(usage("give --builtin or --spec")),
    };
    for (slot, v) in [(&mut spec.envelope.c, a.c), (&mut spec.envelope.c_prime, a.c_prime)] {
        if let Some(v) = v {
            if !(v >= 0.0) {
                return Err(usage("envelope constants must be nonnegative"));
            }
            *slot = v;
        }
    }
    if !(a.x_min >= 10.0 && a.x_max >= a.x_min) {
        return Err(usage("need 10 <= x-min <= x-max"));
    }
    let xs = log_space(a.x_min, a.x_max, a.points);
    let cert = (spec.k() == 5).then(|| k5_phase_inequality(a.phase_step)).transpose()?;
    let verdict = verify_exclusion(&spec, &a.check_ordering, &xs)?;
    let census = a.census.then(|| orderings_census(&spec, &xs)).transpose()?;
    let status = match verdict.status {
        VerdictStatus::Passed => "passed",
        VerdictStatus::NotPassed => "not_passed",
        VerdictStatus::Inconclusive => "inconclusive",
    };
    println!(
        "passed={} status={status} margin={:.6} projected_threshold={}",
        verdict.passed,
        verdict.margin,
        verdict.projected_threshold.map_or("none".into(), |x| format!("{x:e}"))
    );
    if let Some(c) = &cert {
        println!("phase max on grid = {:.8} (bound {:.8}, slack {:.1e}, certified={})", c.grid_max, c.bound, c.slack, c.certified);
    }
    let census_json = census.map(|c| {
        json!({
            "ties": c.ties,
            "counts": c.counts.iter().map(|(k, v)| json!({"ordering": k, "count": v})).collect::<Vec<_>>(),
        })
    });
    out.write_json(
        "verdict.json",
        &json!({
            "spec": spec.to_text(),
            "phase_certificate": cert,
            "verdict": verdict,
            "census": census_json,
        }),
    )?;
    Ok(if verdict.status == VerdictStatus::Inconclusive { Outcome::Inconclusive } else { Outcome::Done })
}

// ---- chebyshev / shanks ----

fn chebyshev(a: &ChebyshevArgs, out: &mut Outputs) -> CliResult<Outcome> {
    if !(a.x > 0.0) {
        return Err(usage("x must be positive"));
    }
    let limit = a.limit.unwrap_or_else(|| ((41.0 * a.x).ceil() as u64).max(100));
    let value = chebyshev_weighted_sum(a.x, limit)?;
    println!("{value}");
    out.write_json("chebyshev.json", &json!({ "x": a.x, "limit": limit, "value": value }))?;
    Ok(Outcome::Done)
}

fn shanks(a: &ShanksArgs, threads: usize, out: &mut Outputs) -> CliResult<Outcome> {
    if a.limit < 2 {
        return Err(usage("limit must be at least 2"));
    }
    let cfg = SieveConfig::new(a.limit).with_threads(threads);
    let first = shanks_first_violation(a.limit, &cfg)?;
    match first {
        None => println!("holds up to {}", a.limit),
        Some(x) => println!("first violation at x = {x}"),
    }
    out.write_json(
        "shanks.json",
        &json!({ "limit": a.limit, "holds": first.is_none(), "first_violation": first }),
    )?;
    Ok(Outcome::Done)
}
