//! Dual-form Wasserstein estimates.
//!
//! The distance between `mu_1` (sample `x`) and `mu_2` (sample `y`) is
//! estimated by maximizing `mean f(y) - mean f(x)` over spectrally
//! normalized critics. Every candidate critic is 1-Lipschitz, so the estimate
//! is a lower bound of the exact transport cost.

use ndarray::{Array1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{init_critic, BatchSize, CriticNet, OptimizerState, TrainConfig};
use crate::rng::{stream, Domain};
use crate::sample::{ensure_same_dim, Sample};

/// Outcome of [`maximize_weighted`].
#[derive(Debug, Clone)]
pub struct Maximized {
    /// Certified critic; `-f` is returned instead of `f` when that scores higher.
    pub net: CriticNet,
    /// `sum_i w_i net(x_i)` for the returned critic; never negative.
    pub objective: f64,
    /// Objective after each epoch's update and normalization.
    pub trace: Vec<f64>,
}

/// Maximizes the linear functional `f -> sum_i w_i f(x_i)` over 1-Lipschitz
/// critics by projected gradient ascent.
///
/// Each epoch takes one ascent step per batch and spectrally normalizes the
/// critic after every step. The best critic seen (initial one included) is
/// kept, re-normalized with converged power iteration, and finally compared
/// against its negation.
pub fn maximize_weighted<R: Rng + ?Sized>(
    points: ArrayView2<'_, f64>,
    weights: &[f64],
    cfg: &TrainConfig,
    rng: &mut R,
    warm_start: Option<&CriticNet>,
) -> Result<Maximized> {
    cfg.validate()?;
    if weights.len() != points.nrows() {
        return Err(Error::Shape(format!(
            "{} weights for {} points",
            weights.len(),
            points.nrows()
        )));
    }
    let weights = Array1::from(weights.to_vec());
    let mut net = match warm_start {
        Some(net) => net.clone(),
        None => init_critic(points.ncols(), cfg, rng)?,
    };
    let mut state = OptimizerState::new(cfg.optimizer, &net);

    let mut cache = net.forward_cached(points)?;
    let mut best = cache.output().dot(&weights);
    if !best.is_finite() {
        return Err(Error::NonFiniteObjective { epoch: 0 });
    }
    let mut best_net = net.clone();
    let mut trace = Vec::with_capacity(cfg.epochs);

    let rows = points.nrows();
    let mut order: Vec<usize> = (0..rows).collect();
    for epoch in 1..=cfg.epochs {
        match cfg.batch_size {
            BatchSize::Rows(b) if b < rows => {
                order.shuffle(rng);
                let scale = rows as f64 / b as f64;
                for chunk in order.chunks(b) {
                    let sub = points.select(Axis(0), chunk);
                    let w: Array1<f64> = chunk.iter().map(|&i| weights[i] * scale).collect();
                    let sub_cache = net.forward_cached(sub.view())?;
                    let grads = net.backward(&sub_cache, w.view())?;
                    state.step(&mut net, &grads, cfg.learning_rate)?;
                    net.spectral_normalize(cfg.power_iterations, rng);
                }
            }
            _ => {
                let grads = net.backward(&cache, weights.view())?;
                state.step(&mut net, &grads, cfg.learning_rate)?;
                net.spectral_normalize(cfg.power_iterations, rng);
            }
        }
        cache = net.forward_cached(points)?;
        let objective = cache.output().dot(&weights);
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective { epoch });
        }
        trace.push(objective);
        if objective > best {
            best = objective;
            best_net = net.clone();
        }
    }

    best_net.certify();
    let mut objective = best_net.forward_batch(points)?.dot(&weights);
    if objective < 0.0 {
        best_net = best_net.negated();
        objective = -objective;
    }
    Ok(Maximized {
        net: best_net,
        objective,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct DualEstimate {
    /// `mean f(y) - mean f(x)` for the returned critic.
    pub value: f64,
    pub net: CriticNet,
    pub objective_trace: Vec<f64>,
    pub lipschitz_certificate: f64,
}

/// Trains a critic separating `x` (mass `-1/n` each) from `y` (mass `+1/m`)
/// and reports the achieved mean difference. Randomness comes from `cfg.seed`.
pub fn train_dual_critic(x: &Sample, y: &Sample, cfg: &TrainConfig) -> Result<DualEstimate> {
    train_dual_critic_from(x, y, cfg, None)
}

/// [`train_dual_critic`] starting from a given critic instead of a fresh one.
pub fn train_dual_critic_from(
    x: &Sample,
    y: &Sample,
    cfg: &TrainConfig,
    warm_start: Option<&CriticNet>,
) -> Result<DualEstimate> {
    ensure_same_dim(x, y)?;
    let pooled = x.stack(y)?;
    let (n, m) = (x.n() as f64, y.n() as f64);
    let weights: Vec<f64> = (0..x.n())
        .map(|_| -1.0 / n)
        .chain((0..y.n()).map(|_| 1.0 / m))
        .collect();
    let mut rng = stream(cfg.seed, Domain::Dual, 0);
    let fit = maximize_weighted(pooled.view(), &weights, cfg, &mut rng, warm_start)?;
    let value = evaluate_dual(&fit.net, x, y)?;
    Ok(DualEstimate {
        value,
        lipschitz_certificate: fit.net.lipschitz_upper_bound(),
        net: fit.net,
        objective_trace: fit.trace,
    })
}

/// `mean f(y) - mean f(x)`.
pub fn evaluate_dual(net: &CriticNet, x: &Sample, y: &Sample) -> Result<f64> {
    ensure_same_dim(x, y)?;
    let fx = net.forward_batch(x.data())?;
    let fy = net.forward_batch(y.data())?;
    Ok(fy.mean().unwrap_or(0.0) - fx.mean().unwrap_or(0.0))
}
