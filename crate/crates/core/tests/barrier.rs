use std::sync::Arc;

use num_complex::Complex64;
use primerace::barrier::{
    default_x_samples, dominant_deltas, k5_phase_inequality, orderings_census, verify_exclusion,
    BarrierSpec, BarrierZero, Envelope, VerdictStatus,
};
use primerace::numeric::log_space;
use primerace::residues::{build_modulus, character};

fn k5_with(envelope: Envelope) -> BarrierSpec {
    BarrierSpec::parse(&BarrierSpec::builtin_k5().to_text().replace("#C 10\n#Cprime 10\n", &format!(
        "#C {}\n#Cprime {}\n",
        envelope.c, envelope.c_prime
    )))
    .unwrap()
}

#[test]
fn builtin_character_sends_2_to_i() {
    let m = Arc::new(build_modulus(5).unwrap());
    let chi = character(&m, &[1]).unwrap();
    assert!((chi.eval(2) - Complex64::i()).norm() < 1e-15);
}

#[test]
fn main_terms_follow_the_closed_forms() {
    let spec = BarrierSpec::builtin_k5();
    for x in [1e10, 3.7e14, 1e21, 1e30] {
        let d = dominant_deltas(x, &spec).unwrap();
        let (sigma, t) = (0.75f64, 1e6f64);
        let a = x.powf(sigma) / (t * x.ln());
        let xit = Complex64::from_polar(1.0, t * x.ln());
        let cases = [
            ((1, 4), (xit * Complex64::i()).re),
            ((4, 2), (xit * Complex64::new(-0.5, -0.5)).re),
            ((2, 3), xit.re),
        ];
        for (pair, want) in cases {
            let got = d[&pair].main / a;
            assert!((got - want).abs() < 1e-6, "x={x} {pair:?}: {got} vs {want}");
        }
    }
    assert!(dominant_deltas(5.0, &spec).is_err());
}

#[test]
fn cycle_sums_vanish_and_terms_are_linear() {
    let spec = BarrierSpec::builtin_k5();
    let doubled = spec.scaled(2);
    for x in log_space(1e10, 1e30, 50) {
        let d = dominant_deltas(x, &spec).unwrap();
        let scale = spec.scale(x.ln());
        for (a, b, c) in [(1, 2, 3), (1, 4, 2), (2, 3, 4)] {
            let s = d[&(a, b)].main + d[&(b, c)].main + d[&(c, a)].main;
            assert!(s.abs() <= 1e-12 * scale, "{s}");
        }
        let dd = dominant_deltas(x, &doubled).unwrap();
        for (pair, term) in &d {
            assert_eq!(dd[pair].main, 2.0 * term.main);
        }
    }
}

#[test]
fn phase_inequality_certified() {
    let cert = k5_phase_inequality(1e-4).unwrap();
    assert!(cert.certified);
    assert!((cert.bound + 0.31622776601683794).abs() < 1e-15);
    assert!(cert.grid_max <= cert.bound + cert.slack);
    assert!(cert.grid_max >= cert.bound - cert.slack);
    // the maximum sits where −sin θ = (sin θ − cos θ)/2, i.e. tan θ = 1/3
    let (s, c) = cert.worst_theta.sin_cos();
    assert!((s / c - 1.0 / 3.0).abs() < 1e-3 && c > 0.0);
    assert!(k5_phase_inequality(1e-2).is_err());
}

/// With the default envelope the background term dominates far past 10³⁰.
#[test]
fn default_envelope_is_inconclusive_on_the_standard_grid() {
    let v = verify_exclusion(&BarrierSpec::builtin_k5(), &[1, 4, 2, 3], &default_x_samples()).unwrap();
    assert_eq!(v.status, VerdictStatus::Inconclusive);
    assert!(!v.passed);
    assert_eq!(v.x_threshold, None);
    let p = v.projected_threshold.unwrap();
    assert!((1e54..1e56).contains(&p), "{p:e}");
    assert_eq!(v.deciles.len(), 10);
    assert_eq!(v.x_range_tested.2, 1000);
}

#[test]
fn exclusion_under_main_term_model() {
    let spec = k5_with(Envelope { c: 10.0, c_prime: 0.0 });
    let xs = default_x_samples();
    let v = verify_exclusion(&spec, &[1, 4, 2, 3], &xs).unwrap();
    assert!(v.passed, "{v:?}");
    assert!(v.margin > 0.3);
    assert_eq!(v.x_threshold, Some(1e10));

    // the reversed ordering needs −cos, (cos − sin)/2, sin > 0: same bound
    let rev = verify_exclusion(&spec, &[3, 2, 4, 1], &xs).unwrap();
    assert!(rev.passed);
    let other = verify_exclusion(&spec, &[2, 4, 1, 3], &xs).unwrap();
    assert_eq!(other.status, VerdictStatus::NotPassed);

    // passing on a range implies passing on any sub-range
    let sub = verify_exclusion(&spec, &[1, 4, 2, 3], &log_space(1e15, 1e20, 1000)).unwrap();
    assert!(sub.passed, "{sub:?}");

    assert!(verify_exclusion(&spec, &[1, 4, 2, 3], &log_space(1e10, 1e30, 10)).is_err());
    assert!(verify_exclusion(&spec, &[1, 4, 2], &xs).is_err());
}

#[test]
fn empty_spec_is_inconclusive() {
    let spec = BarrierSpec::new(5, &[1, 2, 3, 4], vec![], 0.5, None, Envelope::default()).unwrap();
    let v = verify_exclusion(&spec, &[1, 4, 2, 3], &default_x_samples()).unwrap();
    assert_eq!(v.status, VerdictStatus::Inconclusive);
    let census = orderings_census(&spec, &[1e12]).unwrap();
    assert_eq!(census.counts.values().sum::<u64>(), 1);
    assert_eq!(census.ties, 1);
    assert_eq!(census.counts[&vec![1, 2, 3, 4]], 1);
}

#[test]
fn census_contrasts_barrier_and_independent_phases() {
    let xs = log_space(1e10, 1e30, 20_000);
    let spec = BarrierSpec::builtin_k5();
    let census = orderings_census(&spec, &xs).unwrap();
    assert!(!census.counts.contains_key(&vec![1, 4, 2, 3]));
    assert!(!census.counts.contains_key(&vec![3, 2, 4, 1]));
    assert!(census.counts.contains_key(&vec![2, 4, 1, 3]));

    let z = |t: f64| vec![BarrierZero { rho: Complex64::new(0.75, t), multiplicity: 1 }];
    let free = BarrierSpec::new(
        5,
        &[1, 2, 3, 4],
        vec![(vec![1], z(1.0)), (vec![2], z(2f64.sqrt())), (vec![3], z(3f64.sqrt()))],
        0.5,
        None,
        Envelope::default(),
    )
    .unwrap();
    let few = orderings_census(&free, &log_space(1e10, 1e11, 5)).unwrap().counts.len();
    let many = orderings_census(&free, &xs).unwrap().counts.len();
    assert!(few <= 5 && many == 24, "{few} -> {many}");
    assert!(census.counts.len() < many);
    assert_eq!(orderings_census(&free, &[1e20]).unwrap().counts.len(), 1);
}

#[test]
fn spec_file_format() {
    let text = "#barrier\n## two zeros for the quartic character\n#residues 1,4,2,3\n#beta1 0.55\n\
                #Cprime 2.5\n5:1 0.8 2000 1\n5:1 0.7 5000 2\n";
    let spec = BarrierSpec::parse(text).unwrap();
    assert_eq!(spec.k(), 5);
    assert_eq!(spec.residues(), &[1, 4, 2, 3]);
    assert_eq!((spec.beta2, spec.beta3), (0.7, 0.8));
    assert_eq!(spec.envelope, Envelope { c: 10.0, c_prime: 2.5 });
    assert_eq!(BarrierSpec::parse(&spec.to_text()).unwrap().to_text(), spec.to_text());
    assert!(BarrierSpec::parse("#barrier\n#residues 1,2\n#beta1 0.5\n5:1 0.4 10 1\n").is_err());
    assert!(BarrierSpec::parse("#barrier\n#residues 1,2\n#beta1 0.5\n5:1 0.7 10\n").is_err());
}
