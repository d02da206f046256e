//! Spectral normalization by power iteration.
//!
//! Each layer keeps an estimate `v` of its top right singular vector. One
//! iteration maps `v -> W^T W v` (normalized) and reads the singular value
//! off `||W^T u||` with `u = W v / ||W v||`. The estimate never exceeds the
//! true spectral norm.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::CriticNet;

/// Relative tolerance on successive estimates for certificates.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Slack allowed on top of 1 for a normalized net.
pub const LIPSCHITZ_SLACK: f64 = 1e-6;

const CERTIFY_TOL: f64 = 1e-13;
const MAX_CONVERGED_ITERS: usize = 5_000;

/// Runs `iters` power iterations from `v` (updated in place) and returns the
/// singular value estimate. Returns 0 when `W v` vanishes.
pub fn power_iteration(weight: &Array2<f64>, v: &mut Array1<f64>, iters: usize) -> f64 {
    let mut sigma = 0.0;
    for _ in 0..iters.max(1) {
        match step(weight, v) {
            Some(s) => sigma = s,
            None => return 0.0,
        }
    }
    sigma
}

/// Power iteration until successive estimates agree to `tol` (relative).
pub fn power_iteration_converged(
    weight: &Array2<f64>,
    v: &mut Array1<f64>,
    tol: f64,
    max_iters: usize,
) -> f64 {
    let mut prev = match step(weight, v) {
        Some(s) => s,
        None => return 0.0,
    };
    for _ in 1..max_iters {
        let Some(sigma) = step(weight, v) else {
            return 0.0;
        };
        if (sigma - prev).abs() <= tol * sigma {
            return sigma;
        }
        prev = sigma;
    }
    prev
}

fn step(weight: &Array2<f64>, v: &mut Array1<f64>) -> Option<f64> {
    let mut u = weight.dot(&*v);
    let un = u.dot(&u).sqrt();
    if !un.is_finite() || un <= 0.0 {
        return None;
    }
    u /= un;
    let mut next = weight.t().dot(&u);
    let sigma = next.dot(&next).sqrt();
    if sigma.is_nan() || sigma <= 0.0 {
        return None;
    }
    next /= sigma;
    *v = next;
    Some(sigma)
}

fn random_unit<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_simple_fn(len, || StandardNormal.sample(rng));
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

impl CriticNet {
    /// Divides every weight matrix by `max(sigma_hat, 1)` where `sigma_hat`
    /// comes from `power_iterations` warm-started power iterations. Biases
    /// are left alone. A layer whose singular vector estimate has collapsed
    /// (for example after weights passed through zero) gets a fresh random
    /// start from `rng`.
    pub fn spectral_normalize<R: Rng + ?Sized>(&mut self, power_iterations: usize, rng: &mut R) {
        for (layer, v) in self.layers.iter_mut().zip(self.power_vectors.iter_mut()) {
            let mut sigma = power_iteration(&layer.weight, v, power_iterations);
            if sigma == 0.0 && layer.weight.iter().any(|w| *w != 0.0) {
                *v = random_unit(v.len(), rng);
                sigma = power_iteration(&layer.weight, v, power_iterations);
            }
            if sigma > 1.0 {
                layer.weight /= sigma;
            }
        }
    }

    /// Normalizes with converged power iteration so that
    /// [`Self::lipschitz_upper_bound`] is at most `1 + LIPSCHITZ_SLACK`.
    pub fn certify(&mut self) {
        for (layer, v) in self.layers.iter_mut().zip(self.power_vectors.iter_mut()) {
            let sigma =
                power_iteration_converged(&layer.weight, v, CERTIFY_TOL, MAX_CONVERGED_ITERS);
            if sigma > 1.0 {
                layer.weight /= sigma;
            }
        }
    }

    /// Product of per-layer spectral norm estimates. ReLU is 1-Lipschitz, so
    /// this bounds the Lipschitz constant of the network.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        self.layer_spectral_norms().iter().product()
    }

    /// Converged spectral norm estimate of every layer.
    pub fn layer_spectral_norms(&self) -> Vec<f64> {
        self.layers
            .iter()
            .zip(&self.power_vectors)
            .map(|(layer, v)| {
                let mut v = v.clone();
                if v.iter().all(|x| *x == 0.0) {
                    let start = 1.0 / (v.len() as f64).sqrt();
                    v.fill(start);
                }
                power_iteration_converged(
                    &layer.weight,
                    &mut v,
                    CERTIFICATE_TOL,
                    MAX_CONVERGED_ITERS,
                )
            })
            .collect()
    }
}
