use primerace::sieve::{
    pi_of, primes_in, stream_events, stream_range, EventKind, FnSink, PrimeEvent, SieveConfig,
    Wheel, MIN_SEGMENT_BYTES,
};

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// `Some((p, m))` when `n = p^m`.
fn as_prime_power(n: u64) -> Option<(u64, u32)> {
    let mut p = 2;
    while p * p <= n && n % p != 0 {
        p += 1;
    }
    if p * p > n {
        return (n >= 2).then_some((n, 1));
    }
    let (mut r, mut m) = (n, 0);
    while r % p == 0 {
        r /= p;
        m += 1;
    }
    (r == 1).then_some((p, m))
}

fn collect(cfg: &SieveConfig) -> Vec<PrimeEvent> {
    let mut evs = Vec::new();
    stream_events(cfg, &mut FnSink(|e: &PrimeEvent| evs.push(*e))).unwrap();
    evs
}

#[test]
fn matches_trial_division_to_1e5() {
    let limit = 100_000;
    let evs = collect(&SieveConfig::new(limit).with_segment_size(MIN_SEGMENT_BYTES));
    let mut expected = Vec::new();
    for n in 2..=limit {
        if let Some((p, m)) = as_prime_power(n) {
            expected.push((n, m, (p as f64).ln()));
        }
    }
    assert_eq!(evs.len(), expected.len());
    for (ev, (n, m, w)) in evs.iter().zip(expected) {
        assert_eq!(ev.n, n);
        assert_eq!(ev.exponent, m);
        assert_eq!(ev.kind == EventKind::Prime, m == 1);
        assert_eq!(ev.kind == EventKind::Prime, is_prime(n));
        assert!((ev.lambda_weight - w).abs() < 1e-12);
    }
}

#[test]
fn pi_one_million() {
    assert_eq!(pi_of(1_000_000), 78_498);
}

#[test]
fn deterministic_across_threads_wheels_and_segments() {
    let base = collect(&SieveConfig::new(2_000_000));
    for threads in [1, 2, 4] {
        for wheel in [Wheel::None, Wheel::Mod30, Wheel::Mod210] {
            for seg in [MIN_SEGMENT_BYTES, 1 << 16] {
                let cfg = SieveConfig::new(2_000_000)
                    .with_threads(threads)
                    .with_wheel(wheel)
                    .with_segment_size(seg);
                assert_eq!(collect(&cfg), base, "threads={threads} wheel={wheel:?} seg={seg}");
            }
        }
    }
}

#[test]
fn split_ranges_concatenate() {
    let cfg = SieveConfig::new(1_500_000);
    let whole = collect(&cfg);
    let mut parts = Vec::new();
    for (lo, hi) in [(2, 262_143), (262_144, 999_999), (1_000_000, 1_500_000)] {
        stream_range(&cfg, lo, hi, &mut FnSink(|e: &PrimeEvent| parts.push(*e))).unwrap();
    }
    assert_eq!(parts, whole);
}

#[test]
fn primes_in_window() {
    let got = primes_in(1_000_000, 1_000_100);
    let want: Vec<u64> = (1_000_000..=1_000_100).filter(|&n| is_prime(n)).collect();
    assert_eq!(got, want);
}
