//! Gaussian-kernel MMD two-sample permutation test.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Decision;
use crate::par::{map_indexed, Execution};
use crate::rng::{stream, Domain};
use crate::sample::{ensure_same_dim, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub mmd2_unbiased: f64,
    pub bandwidth: f64,
    pub permutations: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub decision: Decision,
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Unbiased (U-statistic) estimate of MMD^2 with the kernel
/// `k(a, b) = exp(-|a - b|^2 / (2 h^2))`. May be negative.
pub fn mmd2_unbiased(x: &Sample, y: &Sample, bandwidth: f64) -> Result<f64> {
    ensure_same_dim(x, y)?;
    check_sizes(x, y)?;
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::Input(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let pooled = x.stack(y)?;
    let kernel = kernel_matrix(&pooled, bandwidth);
    let labels: Vec<bool> = (0..x.n())
        .map(|_| false)
        .chain((0..y.n()).map(|_| true))
        .collect();
    Ok(mmd2_from_kernel(&kernel, &labels, x.n(), y.n()))
}

fn check_sizes(x: &Sample, y: &Sample) -> Result<()> {
    if x.n() < 2 || y.n() < 2 {
        return Err(Error::Input(format!(
            "MMD needs at least two points per sample, got {} and {}",
            x.n(),
            y.n()
        )));
    }
    Ok(())
}

fn kernel_matrix(pooled: &Array2<f64>, bandwidth: f64) -> Array2<f64> {
    let total = pooled.nrows();
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut k = Array2::zeros((total, total));
    for i in 0..total {
        k[[i, i]] = 1.0;
        for j in (i + 1)..total {
            let v = (-gamma * sq_dist(pooled.row(i), pooled.row(j))).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

// `labels[i]` is true when pooled row i belongs to the second sample.
fn mmd2_from_kernel(k: &Array2<f64>, labels: &[bool], n: usize, m: usize) -> f64 {
    let (mut kxx, mut kyy, mut kxy) = (0.0, 0.0, 0.0);
    let total = labels.len();
    for i in 0..total {
        for j in (i + 1)..total {
            let v = k[[i, j]];
            match (labels[i], labels[j]) {
                (false, false) => kxx += v,
                (true, true) => kyy += v,
                _ => kxy += v,
            }
        }
    }
    let (n, m) = (n as f64, m as f64);
    2.0 * kxx / (n * (n - 1.0)) + 2.0 * kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m)
}

/// Median of all pairwise Euclidean distances in the pooled sample.
pub fn median_heuristic(x: &Sample, y: &Sample) -> Result<f64> {
    let pooled = x.stack(y)?;
    let total = pooled.nrows();
    let mut dists = Vec::with_capacity(total * (total - 1) / 2);
    for i in 0..total {
        for j in (i + 1)..total {
            dists.push(sq_dist(pooled.row(i), pooled.row(j)).sqrt());
        }
    }
    if dists.is_empty() {
        return Err(Error::Input("need at least two pooled points".into()));
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    if median > 0.0 {
        Ok(median)
    } else {
        Err(Error::Input(
            "median pairwise distance is zero; pass a bandwidth".into(),
        ))
    }
}

/// Permutation test on the pooled labels. The bandwidth defaults to the
/// median heuristic; `p = (1 + #{permuted >= observed}) / (1 + P)` and the
/// test rejects when `p <= alpha`.
pub fn mmd_permutation_test(
    x: &Sample,
    y: &Sample,
    alpha: f64,
    permutations: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> Result<MmdReport> {
    ensure_same_dim(x, y)?;
    check_sizes(x, y)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("alpha {alpha} not in (0, 1)")));
    }
    if permutations < 50 {
        return Err(Error::Input(format!(
            "need at least 50 permutations, got {permutations}"
        )));
    }
    let bandwidth = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => return Err(Error::Input(format!("bandwidth must be positive, got {h}"))),
        None => median_heuristic(x, y)?,
    };
    let (n, m) = (x.n(), y.n());
    let pooled = x.stack(y)?;
    let kernel = kernel_matrix(&pooled, bandwidth);
    let labels: Vec<bool> = (0..n).map(|_| false).chain((0..m).map(|_| true)).collect();
    let observed = mmd2_from_kernel(&kernel, &labels, n, m);

    let permuted = map_indexed(permutations, Execution::Parallel, |p| {
        let mut rng = stream(seed, Domain::Permutation, p as u64);
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut rng);
        mmd2_from_kernel(&kernel, &shuffled, n, m)
    });
    let exceed = permuted.iter().filter(|v| **v >= observed).count();
    let p_value = (1 + exceed) as f64 / (1 + permutations) as f64;
    Ok(MmdReport {
        mmd2_unbiased: observed,
        bandwidth,
        permutations,
        p_value,
        alpha,
        decision: if p_value <= alpha {
            Decision::Reject
        } else {
            Decision::Accept
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_pairs_closed_form() {
        let a = [0.2, 0.3];
        let b = [0.7, 0.1];
        let x = Sample::from_rows(&[a, a]).unwrap();
        let y = Sample::from_rows(&[b, b]).unwrap();
        let h = 0.4;
        assert!(mmd2_unbiased(&x, &x, h).unwrap().abs() < 1e-15);
        let d2 = 0.5f64.powi(2) + 0.2f64.powi(2);
        let expected = 2.0 * (1.0 - (-d2 / (2.0 * h * h)).exp());
        assert!((mmd2_unbiased(&x, &y, h).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn input_errors() {
        let one = Sample::from_rows(&[[0.0, 0.0]]).unwrap();
        let two = Sample::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(mmd2_unbiased(&one, &two, 1.0).is_err());
        assert!(mmd2_unbiased(&two, &two, 0.0).is_err());
        assert!(mmd_permutation_test(&two, &two, 0.05, 49, 0, None).is_err());
        assert!(mmd_permutation_test(&two, &two, 1.5, 100, 0, None).is_err());
    }

    #[test]
    fn p_value_bounds_and_reproducibility() {
        let x = Sample::from_rows(&[[0.1, 0.2], [0.3, 0.1], [0.5, 0.5], [0.2, 0.9]]).unwrap();
        let y = Sample::from_rows(&[[0.6, 0.7], [0.8, 0.9], [0.7, 0.4]]).unwrap();
        let a = mmd_permutation_test(&x, &y, 0.05, 50, 3, None).unwrap();
        let b = mmd_permutation_test(&x, &y, 0.05, 50, 3, None).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value >= 1.0 / 51.0 && a.p_value <= 1.0);
        assert_eq!(a.decision == Decision::Reject, a.p_value <= 0.05);
    }
}
