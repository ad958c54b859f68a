use primerace::zeros::{n_independence_values, ZeroRecord, ZeroSet};
use proptest::prelude::*;

fn zero_set(gammas: &[(u32, f64, u32)]) -> ZeroSet {
    let mut zs = ZeroSet::new(5, 500.0, "synthetic").unwrap();
    for &(chi, g, m) in gammas {
        zs.insert(&[chi], &[ZeroRecord { gamma: g, beta: 0.5, multiplicity: m }]).unwrap();
    }
    zs
}

proptest! {
    #[test]
    fn canonical_round_trip(rows in prop::collection::vec((0u32..4, 0.0f64..500.0, 1u32..4), 0..40)) {
        let zs = zero_set(&rows);
        let text = zs.to_text();
        let back = ZeroSet::parse(&text).unwrap();
        prop_assert_eq!(&back, &zs);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn merging_preserves_multiplicity(rows in prop::collection::vec((0u32..4, 0u32..20, 1u32..4), 1..40)) {
        let rows: Vec<(u32, f64, u32)> = rows.into_iter().map(|(c, g, m)| (c, g as f64, m)).collect();
        let want: u64 = rows.iter().map(|r| r.2 as u64).sum();
        prop_assert_eq!(zero_set(&rows).total_multiplicity(), want);
    }

    /// Dyadic rationals make every floating sum exact, so the float
    /// enumeration must agree with integer arithmetic on scaled values.
    #[test]
    fn matches_integer_oracle(
        chosen in prop::collection::vec(1i64..200, 1..4),
        extra in prop::collection::vec(1i64..600, 0..12),
        n in 1u32..3,
    ) {
        const D: f64 = 64.0;
        let t_max_int = 600i64;
        let mut g_int: Vec<i64> = chosen.iter().chain(&extra).copied().collect();
        g_int.sort_unstable();
        g_int.dedup();
        let g: Vec<f64> = g_int.iter().map(|&v| v as f64 / D).collect();
        let c: Vec<f64> = chosen.iter().map(|&v| v as f64 / D).collect();
        let verdict = n_independence_values(&g, &c, t_max_int as f64 / D, n, 1e-12).unwrap();

        let m = chosen.len();
        let base = 2 * n as i64 + 1;
        let mut expected = Vec::new();
        for code in 0..base.pow(m as u32) {
            let mut rest = code;
            let mut coeffs = vec![0i64; m];
            for slot in coeffs.iter_mut().rev() {
                *slot = rest % base - n as i64;
                rest /= base;
            }
            if coeffs.iter().map(|c| c.abs()).sum::<i64>() < 2 {
                continue;
            }
            let s: i64 = coeffs.iter().zip(&chosen).map(|(a, b)| a * b).sum();
            if (0..=t_max_int).contains(&s) && g_int.binary_search(&s).is_ok() {
                expected.push(coeffs);
            }
        }
        expected.sort();
        let got: Vec<Vec<i64>> = verdict.violations.iter().map(|v| v.coefficients.clone()).collect();
        prop_assert_eq!(got, expected);
    }
}
