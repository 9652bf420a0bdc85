use super::{Partition, VCoefficientTable};
use crate::error::{NspError, Result};
use crate::math::{ln_factorial, ln_gamma, xlny};

/// log p(N, C) from the cluster sizes alone.
pub fn log_eppf_sizes(sizes: &[usize], table: &VCoefficientTable) -> f64 {
    let n: usize = sizes.iter().sum();
    let a = table.alpha();
    let lg_a = ln_gamma(a);
    table.log_v_unchecked(n as u64, sizes.len() as u64) + sizes.iter().map(|&s| ln_gamma(s as f64 + a) - lg_a).sum::<f64>()
}

/// log p(N, C) for a partition without background points.
pub fn log_eppf(partition: &Partition, table: &VCoefficientTable) -> Result<f64> {
    if partition.n_background() > 0 {
        return Err(NspError::Contract(
            "log_eppf needs an empty background; use log_eppf_with_background".into(),
        ));
    }
    Ok(log_eppf_sizes(&partition.sizes(), table))
}

/// log p(N, C0, C) with a homogeneous background of integrated intensity `w0`.
pub fn log_eppf_with_background(partition: &Partition, table: &VCoefficientTable, w0: f64) -> f64 {
    let n = partition.n_total() as u64;
    let c0 = partition.n_background() as u64;
    ln_factorial(n - c0) - ln_factorial(n) - w0 + xlny(c0 as f64, w0) + log_eppf_sizes(&partition.sizes(), table)
}
