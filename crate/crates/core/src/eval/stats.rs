//! Small statistical helpers for the test harnesses.

use std::collections::BTreeMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample chi-square homogeneity test on categorical counts. Categories
/// with expected count below `min_expected` in either sample are pooled
/// into one bin. Returns (statistic, degrees of freedom, p-value).
pub fn chi_square_two_sample<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>, min_expected: f64) -> (f64, usize, f64) {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let total = (na + nb) as f64;
    if na == 0 || nb == 0 {
        return (0.0, 0, 1.0);
    }
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in keys {
        let (ca, cb) = (*a.get(k).unwrap_or(&0) as f64, *b.get(k).unwrap_or(&0) as f64);
        let row = ca + cb;
        if row * (na.min(nb) as f64) / total < min_expected {
            pooled.0 += ca;
            pooled.1 += cb;
        } else {
            bins.push((ca, cb));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        bins.push(pooled);
    }
    if bins.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let mut stat = 0.0;
    for (ca, cb) in &bins {
        let row = ca + cb;
        let ea = row * na as f64 / total;
        let eb = row * nb as f64 / total;
        stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    let df = bins.len() - 1;
    let p = 1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(stat);
    (stat, df, p)
}

pub fn counts<K: Ord, I: IntoIterator<Item = K>>(items: I) -> BTreeMap<K, u64> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Total-variation distance between an exact distribution and counts.
pub fn tv_distance<K: Ord + Hash>(exact: &BTreeMap<K, f64>, observed: &BTreeMap<K, u64>) -> f64 {
    let n: u64 = observed.values().sum();
    let mut tv = 0.0;
    for (k, p) in exact {
        let q = *observed.get(k).unwrap_or(&0) as f64 / n.max(1) as f64;
        tv += (p - q).abs();
    }
    tv += observed
        .iter()
        .filter(|(k, _)| !exact.contains_key(k))
        .map(|(_, &c)| c as f64 / n.max(1) as f64)
        .sum::<f64>();
    0.5 * tv
}

/// Total-variation distance between two empirical distributions.
pub fn tv_distance_counts<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na = a.values().sum::<u64>().max(1) as f64;
    let nb = b.values().sum::<u64>().max(1) as f64;
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (*a.get(k).unwrap_or(&0) as f64 / na - *b.get(k).unwrap_or(&0) as f64 / nb).abs())
        .sum::<f64>()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean of an autocorrelated series from
/// non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> f64 {
    let b = xs.len() / n_batches;
    assert!(b >= 1 && n_batches >= 2, "need at least two non-empty batches");
    let means: Vec<f64> = xs.chunks_exact(b).take(n_batches).map(mean).collect();
    (variance(&means) / n_batches as f64).sqrt()
}

/// Empirical quantile with linear interpolation, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn chi_square_textbook() {
        // 2x2 table [[10, 20], [30, 40]]: X² = 0.7937.
        let a = BTreeMap::from([(0, 10), (1, 30)]);
        let b = BTreeMap::from([(0, 20), (1, 40)]);
        let (s, df, p) = chi_square_two_sample(&a, &b, 0.0);
        assert!((s - 0.793_650_793_650_8).abs() < 1e-9, "{s}");
        assert_eq!(df, 1);
        assert!((p - 0.373).abs() < 1e-3);
    }

    #[test]
    fn chi_square_p_values_are_roughly_uniform() {
        let mut rng = RngStream::new(1, 0);
        let mut low = 0;
        for _ in 0..400 {
            let draw = |rng: &mut RngStream| counts((0..500).map(|_| (rng.random::<f64>() * 5.0).floor() as u8));
            let (a, b) = (draw(&mut rng), draw(&mut rng));
            if chi_square_two_sample(&a, &b, 5.0).2 < 0.05 {
                low += 1;
            }
        }
        assert!((5..=40).contains(&low), "{low}");
    }

    #[test]
    fn tv_and_quantiles() {
        let exact = BTreeMap::from([("a", 0.5), ("b", 0.5)]);
        assert_eq!(tv_distance(&exact, &BTreeMap::from([("a", 3), ("c", 1)])), 0.5);
        assert_eq!(tv_distance_counts(&BTreeMap::from([(1, 2)]), &BTreeMap::from([(1, 5)])), 0.0);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn batch_means_on_iid() {
        let mut rng = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>()).collect();
        let se = batch_means_se(&xs, 40);
        let want = (1.0 / 12.0 / 40_000.0f64).sqrt();
        assert!((se / want - 1.0).abs() < 0.4, "{se} vs {want}");
    }
}
