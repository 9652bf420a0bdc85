use std::collections::HashMap;

use crate::error::{NspError, Result};
use crate::partition::Partition;

fn check(z: &[usize], z_ref: &[usize]) -> Result<()> {
    if z.len() != z_ref.len() {
        return Err(NspError::Contract(format!(
            "label vectors differ in length ({} vs {})",
            z.len(),
            z_ref.len()
        )));
    }
    if z.is_empty() {
        return Err(NspError::Contract("co-occupancy needs at least one point".into()));
    }
    Ok(())
}

fn sum_sq<K: std::hash::Hash + Eq>(it: impl Iterator<Item = K>) -> f64 {
    let mut counts: HashMap<K, u64> = HashMap::new();
    for k in it {
        *counts.entry(k).or_default() += 1;
    }
    counts.values().map(|&c| (c * c) as f64).sum()
}

/// Fraction of ordered pairs (n, m) on which two labelings agree about
/// "same cluster". Computed from contingency counts.
pub fn co_occupancy_accuracy(z: &[usize], z_ref: &[usize]) -> Result<f64> {
    check(z, z_ref)?;
    let n2 = (z.len() * z.len()) as f64;
    let a = sum_sq(z.iter());
    let b = sum_sq(z_ref.iter());
    let both = sum_sq(z.iter().zip(z_ref));
    Ok((2.0 * both + n2 - a - b) / n2)
}

/// Pairwise O(N²) version of [`co_occupancy_accuracy`].
pub fn co_occupancy_accuracy_reference(z: &[usize], z_ref: &[usize]) -> Result<f64> {
    check(z, z_ref)?;
    let mut agree = 0u64;
    for i in 0..z.len() {
        for j in 0..z.len() {
            agree += u64::from((z[i] == z[j]) == (z_ref[i] == z_ref[j]));
        }
    }
    Ok(agree as f64 / (z.len() * z.len()) as f64)
}

/// Mean accuracy over posterior samples. Background points share label 0,
/// i.e. the background counts as one more group.
pub fn posterior_co_occupancy<'a>(samples: impl IntoIterator<Item = &'a Partition>, truth: &Partition) -> Result<f64> {
    let t = truth.labels();
    let (mut sum, mut n) = (0.0, 0usize);
    for s in samples {
        sum += co_occupancy_accuracy(&s.labels(), &t)?;
        n += 1;
    }
    if n == 0 {
        return Err(NspError::Contract("no samples".into()));
    }
    Ok(sum / n as f64)
}
