use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use primerace::explicit::{
    a_empirical, a_star, delta_reconstruct, default_y_sequence, diamond_bounds, f_rho,
    oscillation_report, p_boundary, psi_chi_sieved, psi_chi_truncated, residue_magnitudes,
    IntegralMode, ResidueWeights,
};
use primerace::numeric::log_space;
use primerace::race::{run_race, RaceHistory};
use primerace::residues::{build_modulus, character, characters};
use primerace::sieve::SieveConfig;
use primerace::zeros::{load_zeros, ZeroSet};

fn table(name: &str) -> ZeroSet {
    load_zeros(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)).unwrap()
}

fn history(limit: u64) -> RaceHistory {
    RaceHistory::collect(4, &[1, 3], limit, &SieveConfig::new(limit)).unwrap()
}

#[test]
fn truncated_psi_captures_oscillation_at_1e4() {
    let zs = table("zeros_mod4.txt");
    let m = Arc::new(build_modulus(4).unwrap());
    let chi = character(&m, &[1]).unwrap();
    let sieved = psi_chi_sieved(&chi, &history(10_000), 1e4).unwrap().re;
    let trunc = psi_chi_truncated(1e4, &chi, &zs, 50.0).unwrap();
    assert_eq!(trunc.im, 0.0);
    assert!((sieved - trunc.re).abs() < sieved.abs(), "{sieved} vs {}", trunc.re);
}

#[test]
fn higher_truncation_is_closer_and_signs_agree() {
    let zs = table("zeros_mod4.txt");
    let m = Arc::new(build_modulus(4).unwrap());
    let chi = character(&m, &[1]).unwrap();
    let h = history(1_000_000);
    let w = ResidueWeights::new(m, 3, 1).unwrap();
    let (mut err_hi, mut err_lo, mut agree) = (0.0, 0.0, 0);
    let xs = log_space(1e3, 1e6, 100);
    for &x in &xs {
        let s = psi_chi_sieved(&chi, &h, x).unwrap().re;
        err_hi += (s - psi_chi_truncated(x, &chi, &zs, 1e4).unwrap().re).abs();
        err_lo += (s - psi_chi_truncated(x, &chi, &zs, 1e2).unwrap().re).abs();
        let r = delta_reconstruct(x, &w, &zs, 1e4, IntegralMode::Quadrature).unwrap();
        let d = h.pi(x, 3).unwrap() as f64 - h.pi(x, 1).unwrap() as f64;
        agree += usize::from(r.signum() == d.signum());
    }
    assert!(err_hi < err_lo, "{err_hi} vs {err_lo}");
    assert!(agree >= 90, "{agree}/100");
}

#[test]
fn reconstruction_sign_at_1e6() {
    let zs = table("zeros_mod4.txt");
    let w = ResidueWeights::new(Arc::new(build_modulus(4).unwrap()), 3, 1).unwrap();
    let r = delta_reconstruct(1e6, &w, &zs, 1e4, IntegralMode::Quadrature).unwrap();
    let s = run_race(4, &[3, 1], 1_000_000, &SieveConfig::new(1_000_000)).unwrap();
    assert_eq!(r.signum(), (s.delta(3, 1).unwrap() as f64).signum());
}

#[test]
fn reconstruction_dips_negative_near_26861() {
    let zs = table("zeros_mod4.txt");
    let w = ResidueWeights::new(Arc::new(build_modulus(4).unwrap()), 3, 1).unwrap();
    let dips = (0..=250)
        .map(|i| 25_000.0 + 20.0 * i as f64)
        .filter(|&x| delta_reconstruct(x, &w, &zs, 1e4, IntegralMode::Quadrature).unwrap() < 0.0)
        .count();
    assert!(dips > 0);
}

#[test]
fn asymptotic_mode_tracks_quadrature() {
    let zs = table("zeros_mod4.txt");
    let w = ResidueWeights::new(Arc::new(build_modulus(4).unwrap()), 3, 1).unwrap();
    for x in [1e5, 1e6] {
        let q = delta_reconstruct(x, &w, &zs, 1e3, IntegralMode::Quadrature).unwrap();
        let a = delta_reconstruct(x, &w, &zs, 1e3, IntegralMode::Asymptotic).unwrap();
        // the correction is O(1/log x) relative to the oscillating part
        assert!((q - a).abs() < 0.5 * (x.sqrt() / x.ln()), "{q} vs {a}");
    }
}

/// Summing both half-planes explicitly must give a real total.
#[test]
fn conjugate_pairs_cancel_imaginary_parts() {
    let zs = table("zeros_mod5.txt");
    let m = Arc::new(build_modulus(5).unwrap());
    let x = 5e4;
    for (l1, l2) in [(1, 2), (2, 3), (1, 4)] {
        let w = ResidueWeights::new(m.clone(), l1, l2).unwrap();
        let mut total = Complex64::new(0.0, 0.0);
        for (chi, c) in &w.coefficients {
            for r in zs.zeros(chi.index()).iter().filter(|r| r.gamma <= 500.0) {
                total += c * f_rho(Complex64::new(r.beta, r.gamma), x, IntegralMode::Quadrature);
            }
            let conj_c = chi.conj_index();
            for r in zs.zeros(&conj_c).iter().filter(|r| r.gamma <= 500.0) {
                total += c * f_rho(Complex64::new(r.beta, -r.gamma), x, IntegralMode::Quadrature);
            }
        }
        assert!(total.im.abs() < 1e-9 * total.norm().max(1.0), "({l1},{l2}): {total}");
        let bias = w.bias_term as f64 * x.sqrt() / x.ln();
        let r = delta_reconstruct(x, &w, &zs, 500.0, IntegralMode::Quadrature).unwrap();
        assert!((r - (-total.re - bias)).abs() < 1e-9 * r.abs().max(1.0));
    }
}

#[test]
fn empirical_a_matches_lambda_sums() {
    let h = history(1000);
    let u = 100f64.ln();
    let a = a_empirical(u, &h, 3, 1).unwrap();
    // ψ(100,4,3) − ψ(100,4,1) = 0.1125648875540417 by direct Λ sums
    assert!((a - 0.02251297751080834).abs() < 1e-14, "{a}");
    assert_eq!(a_empirical(2f64.ln(), &h, 3, 1).unwrap(), 0.0);
    assert!(a_empirical(7.0, &h, 3, 1).is_err());

    let s = run_race(4, &[3, 1], 100, &SieveConfig::new(100)).unwrap();
    let h_val = s.h_value(3, 1).unwrap();
    assert!((a - (h_val + 0.0 - 2.0)).abs() < 1e-12);
}

#[test]
fn ingham_sandwich_report() {
    let zs = table("zeros_mod4.txt");
    let w = ResidueWeights::new(Arc::new(build_modulus(4).unwrap()), 3, 1).unwrap();
    let us: Vec<f64> = (0..400).map(|i| 7.0 + i as f64 * (13.8 - 7.0) / 399.0).collect();
    let rep = oscillation_report(&w, &zs, 1e3, 1, 1, &us).unwrap();
    let h = history(1_000_000);
    let emp: Vec<f64> = us.iter().map(|&u| a_empirical(u, &h, 3, 1).unwrap()).collect();
    let star: Vec<f64> = rep.samples.iter().map(|s| s.1).collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 0.2;
    let lower_ok = min(&emp) <= min(&star) + eps;
    let upper_ok = max(&star) <= max(&emp) + eps;
    // a finite-range proxy: reported, not asserted
    eprintln!(
        "ingham sandwich: A in [{:.3}, {:.3}], A*_T in [{:.3}, {:.3}], lower {lower_ok}, upper {upper_ok}",
        min(&emp),
        max(&emp),
        min(&star),
        max(&star)
    );
    let (lo, hi) = rep.diamond_bounds;
    let biggest = rep.terms.iter().map(|t| t.a.norm()).fold(0.0, f64::max);
    assert_eq!((lo, hi), (-biggest, biggest));
}

#[test]
fn residues_decay_like_inverse_gamma() {
    let zs = table("zeros_mod4.txt");
    let w = ResidueWeights::new(Arc::new(build_modulus(4).unwrap()), 3, 1).unwrap();
    let terms = residue_magnitudes(&w, &zs).unwrap();
    assert_eq!(terms.len(), zs.zeros(&[1]).len());
    for t in terms.iter().take(50) {
        // |c| = 2 for χ₋₄ at (3,1)
        assert!((t.a.norm() * Complex64::new(0.5, t.gamma).norm() - 2.0).abs() < 1e-12);
    }
    let (lo, hi) = diamond_bounds(&terms, 1, 1, 0.0).unwrap();
    assert_eq!(-lo, hi);
    assert_eq!(a_star(0.3, &[], 10.0, 0.0), 0.0);
}

/// Fitted over x ∈ [3, 10] in steps of 1/4 for l ∈ {1, 3} with T = 10⁴:
/// the largest `|P − e^{−x/2}(ψ(e^x,4,l) − e^x/2)| / (x e^{−x/2})` was 2.28
/// (x = 10, l = 3). Most of E comes from the powers of 2, which the
/// principal character mod 4 omits but the zeta zeros account for.
const P_BOUNDARY_C: f64 = 3.0;

#[test]
fn p_boundary_matches_sieve() {
    let zs = table("zeros_mod4.txt");
    let m = Arc::new(build_modulus(4).unwrap());
    let h = history(1000);
    let x = 5.0f64;
    let p = p_boundary(x, &m, 3, &zs, 1e4, &default_y_sequence()).unwrap();
    let target = (-x / 2.0).exp() * (h.psi(x.exp(), 3).unwrap() - x.exp() / 2.0);
    assert!((p.value - target).abs() <= P_BOUNDARY_C * x * (-x / 2.0).exp());
    assert_eq!(p.near_singularity, Some(149));
}

#[test]
fn mod5_characters_have_zeros() {
    let zs = table("zeros_mod5.txt");
    let m = build_modulus(5).unwrap();
    for chi in characters(&m) {
        assert!(zs.zeros(chi.index()).len() > 1000, "{}", chi.label());
    }
}
