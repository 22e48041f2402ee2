use bopnn::evalstats::{standardize_minmax, standardize_student, wilcoxon_signed_rank};
use bopnn::rng::SplitMix64;
use ndarray::Array2;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// Non-zero differences with their mid-ranks, computed by direct counting.
fn ranked(d: &[f64]) -> Vec<(f64, f64)> {
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    nz.iter()
        .map(|&v| {
            let below = nz.iter().filter(|w| w.abs() < v.abs()).count() as f64;
            let equal = nz.iter().filter(|w| w.abs() == v.abs()).count() as f64;
            (v, below + (equal + 1.0) / 2.0)
        })
        .collect()
}

/// Two-sided p by listing all 2^n sign patterns.
fn enumerated_p(d: &[f64]) -> (f64, f64) {
    let r = ranked(d);
    let w: f64 = r.iter().filter(|(v, _)| *v > 0.0).map(|(_, rk)| rk).sum();
    let n = r.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| r[i].1).sum();
        if s <= w + 1e-9 {
            le += 1;
        }
        if s >= w - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (w, (2.0 * le.min(ge) as f64 / total).min(1.0))
}

fn normal_p(d: &[f64]) -> f64 {
    let r = ranked(d);
    let n = r.len() as f64;
    let w: f64 = r.iter().filter(|(v, _)| *v > 0.0).map(|(_, rk)| rk).sum();
    let mean = n * (n + 1.0) / 4.0;
    let var = r.iter().map(|(_, rk)| rk * rk).sum::<f64>() / 4.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * (1.0 - Normal::standard().cdf(z))).min(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_p_matches_enumeration(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = SplitMix64::new(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.below(9) as f64 / 8.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.below(9) as f64 / 8.0).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let got = wilcoxon_signed_rank(&a, &b).unwrap();
        let (w, p) = enumerated_p(&d);
        prop_assert!((got.w_plus - w).abs() < 1e-12);
        prop_assert!((got.p_two_sided - p).abs() < 1e-12, "{} vs {}", got.p_two_sided, p);
    }

    #[test]
    fn exact_and_normal_agree_at_twenty(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let a: Vec<f64> = (0..20).map(|_| rng.next_f64() + 0.2).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.next_f64()).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let got = wilcoxon_signed_rank(&a, &b).unwrap();
        prop_assert!(got.exact);
        prop_assert!((got.p_two_sided - normal_p(&d)).abs() <= 0.02);
    }

    #[test]
    fn large_samples_use_the_normal_approximation(seed in any::<u64>(), n in 21usize..60) {
        let mut rng = SplitMix64::new(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.below(10) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.below(10) as f64).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let got = wilcoxon_signed_rank(&a, &b).unwrap();
        if got.n > 20 {
            prop_assert!(!got.exact);
            prop_assert!((got.p_two_sided - normal_p(&d)).abs() <= 1e-12);
        }
    }

    #[test]
    fn wilcoxon_ignores_pair_order(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = SplitMix64::new(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        prop_assert_eq!(wilcoxon_signed_rank(&a, &b).unwrap(), wilcoxon_signed_rank(&pa, &pb).unwrap());
    }

    #[test]
    fn standardizations_commute_with_method_reordering(seed in any::<u64>(), m in 2usize..7, s in 1usize..10) {
        let mut rng = SplitMix64::new(seed);
        let a = Array2::from_shape_fn((m, s), |_| rng.below(5) as f64 / 4.0);
        let mut perm: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut perm);
        let pa = Array2::from_shape_fn((m, s), |(i, j)| a[[perm[i], j]]);
        for f in [standardize_minmax, standardize_student] {
            let x = f(&a).unwrap();
            let y = f(&pa).unwrap();
            for i in 0..m {
                for j in 0..s {
                    prop_assert!((y[[i, j]] - x[[perm[i], j]]).abs() <= 1e-12);
                }
            }
        }
    }
}
