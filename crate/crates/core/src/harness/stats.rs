//! Seed splitting and the small statistics the experiments report.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent seed for `(cell, trial)` under `master`: word 0 of the ChaCha8
/// stream `(cell << 32) | trial`. Counter based, so any worker can derive
/// any trial's seed without coordination.
pub fn trial_seed(master: u64, cell: u32, trial: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((cell as u64) << 32) | trial as u64);
    rng.next_u64()
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    // the closed form hits the bounds exactly at k = 0 and k = n; rounding does not
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Normal quantile for a two-sided 95 % interval.
pub const Z_95: f64 = 1.959963984540054;

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` when either input has no spread.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(7, 1, 2), trial_seed(7, 1, 2));
        let mut all: Vec<u64> = (0..4).flat_map(|c| (0..50).map(move |t| trial_seed(7, c, t))).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 200);
        assert_ne!(trial_seed(7, 0, 0), trial_seed(8, 0, 0));
    }

    #[test]
    fn z95_matches_normal_quantile() {
        let q = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
        assert!((q - Z_95).abs() < 1e-9);
    }

    #[test]
    fn wilson_known_values() {
        // Oracle: closed form evaluated by hand for 10/100 at z = 1.96.
        let (lo, hi) = wilson_interval(10, 100, 1.96);
        assert!((lo - 0.05522).abs() < 1e-4, "{lo}");
        assert!((hi - 0.17437).abs() < 1e-4, "{hi}");
        let (lo, hi) = wilson_interval(0, 1000, Z_95);
        assert_eq!(lo, 0.0);
        assert_eq!(wilson_interval(7, 7, Z_95).1, 1.0);
        assert!(hi > 0.0 && hi < 0.005);
    }

    #[test]
    fn spearman_cases() {
        let x = [0.0, 5.0, 10.0, 15.0];
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&x, &[1.0, 8.0, 27.0, 64.0]), Some(1.0));
        assert_eq!(spearman(&x, &[1.0, 1.0, 1.0, 1.0]), None);
        // one adjacent swap among 7 points: 1 - 6·2/(7·48)
        let y = [7.0, 6.0, 4.0, 5.0, 3.0, 2.0, 1.0];
        let r = spearman(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &y).unwrap();
        assert!((r + (1.0 - 12.0 / 336.0)).abs() < 1e-12);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    proptest! {
        #[test]
        fn wilson_contains_point_estimate(k in 0u64..500, extra in 0u64..500) {
            let n = k + extra + 1;
            let (lo, hi) = wilson_interval(k, n, Z_95);
            let p = k as f64 / n as f64;
            prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
            prop_assert!(0.0 <= lo && hi <= 1.0);
        }

        #[test]
        fn spearman_is_bounded(v in proptest::collection::vec(-1e3f64..1e3, 3..20)) {
            let x: Vec<f64> = (0..v.len()).map(|i| i as f64).collect();
            if let Some(r) = spearman(&x, &v) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            }
        }
    }
}
