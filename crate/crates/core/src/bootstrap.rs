//! Gaussian multiplier bootstrap for the scaled empirical Wasserstein distance.
//!
//! One draw fixes the data, samples multipliers `xi_1..xi_n ~ N(0,1)` and
//! computes
//!
//! ```text
//! Z = sup_f sqrt(1/(n S)) * sum_i xi_i (f(X_i) - mean_j f(X_j))
//! ```
//!
//! over the normalized critic class with `S` parameters. Centering `f` is the
//! same as centering the multipliers, so the supremum is found by
//! [`maximize_weighted`] with weights proportional to `xi_i - mean(xi)`.
//! Draws are independent given the data, so [`run_bootstrap`] maps them over
//! the worker pool, each with its own seed-derived stream.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dual::maximize_weighted;
use crate::error::{Error, Result};
use crate::nn::{CriticNet, TrainConfig};
use crate::par::{map_indexed, Execution};
use crate::rng::{stream, Domain};
use crate::sample::Sample;

/// Sorted bootstrap draws together with the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    draws: Vec<f64>,
    pub n: usize,
    pub s: usize,
    pub seed: u64,
}

impl BootstrapDraws {
    /// Sorts `draws`; requires at least one finite value.
    pub fn new(mut draws: Vec<f64>, n: usize, s: usize, seed: u64) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Input("bootstrap needs at least one draw".into()));
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("bootstrap draws must be finite".into()));
        }
        draws.sort_by(f64::total_cmp);
        Ok(Self { draws, n, s, seed })
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Conservative empirical quantile; see [`empirical_quantile`].
    pub fn quantile(&self, level: f64) -> Result<f64> {
        empirical_quantile(&self.draws, level)
    }

    /// Fraction of draws at or above `statistic`.
    pub fn exceedance(&self, statistic: f64) -> f64 {
        let below = self.draws.partition_point(|v| *v < statistic);
        (self.draws.len() - below) as f64 / self.draws.len() as f64
    }
}

/// The `ceil(level * T)`-th smallest of `T` sorted draws (1-indexed).
///
/// `level * T` is rounded down to the nearest integer first when it is within
/// `1e-9` of it, so 0.95 * 200 selects the 190th draw despite floating point.
pub fn empirical_quantile(sorted_draws: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!(
            "quantile level {level} not in (0, 1)"
        )));
    }
    let t = sorted_draws.len();
    if t == 0 {
        return Err(Error::Input("no draws".into()));
    }
    let k = ((level * t as f64) - 1e-9).ceil().clamp(1.0, t as f64) as usize;
    Ok(sorted_draws[k - 1])
}

/// Per-draw detail, exposed for bookkeeping checks.
#[derive(Debug, Clone)]
pub struct DrawOutcome {
    /// `sqrt(1/(n S))` times the maximized sum.
    pub value: f64,
    /// `sum_i (xi_i - mean xi) f(X_i)` at the returned critic.
    pub unscaled: f64,
    pub s: usize,
    pub critic: Option<CriticNet>,
}

/// One bootstrap draw with multipliers sampled from `rng`.
pub fn bootstrap_draw<R: Rng + ?Sized>(x: &Sample, cfg: &TrainConfig, rng: &mut R) -> Result<f64> {
    let xi: Vec<f64> = (0..x.n()).map(|_| StandardNormal.sample(rng)).collect();
    Ok(bootstrap_draw_with_multipliers(x, &xi, cfg, rng, None)?.value)
}

/// One bootstrap draw for given multipliers. `rng` only seeds the critic
/// (and batch order); `warm_start` replaces the fresh critic.
pub fn bootstrap_draw_with_multipliers<R: Rng + ?Sized>(
    x: &Sample,
    multipliers: &[f64],
    cfg: &TrainConfig,
    rng: &mut R,
    warm_start: Option<&CriticNet>,
) -> Result<DrawOutcome> {
    cfg.validate()?;
    let n = x.n();
    if multipliers.len() != n {
        return Err(Error::Shape(format!(
            "{} multipliers for {n} rows",
            multipliers.len()
        )));
    }
    let s = cfg.param_count(x.d());
    let mean = multipliers.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = multipliers.iter().map(|v| v - mean).collect();
    if n < 2 || centered.iter().all(|v| *v == 0.0) {
        return Ok(DrawOutcome {
            value: 0.0,
            unscaled: 0.0,
            s,
            critic: None,
        });
    }
    // Train on (xi - mean)/n to keep the objective O(1); rescale afterwards.
    let weights: Vec<f64> = centered.iter().map(|v| v / n as f64).collect();
    let fit = maximize_weighted(x.data(), &weights, cfg, rng, warm_start)?;
    let fx = fit.net.forward_batch(x.data())?;
    let unscaled: f64 = centered.iter().zip(fx.iter()).map(|(c, f)| c * f).sum();
    let unscaled = unscaled.max(0.0);
    Ok(DrawOutcome {
        value: unscaled / ((n * s) as f64).sqrt(),
        unscaled,
        s,
        critic: Some(fit.net),
    })
}

/// Knobs for [`run_bootstrap_with`].
#[derive(Debug, Clone, Default)]
pub struct BootstrapOptions {
    pub execution: Execution,
    /// Start every draw from this critic instead of a fresh initialization.
    pub warm_start: Option<CriticNet>,
    pub domain: Option<Domain>,
}

/// `T` independent draws on the global worker pool.
pub fn run_bootstrap(x: &Sample, t: usize, cfg: &TrainConfig, seed: u64) -> Result<BootstrapDraws> {
    run_bootstrap_with(x, t, cfg, seed, &BootstrapOptions::default())
}

/// Draw `k` uses stream `k` of the bootstrap domain under `seed`, so the
/// result does not depend on how draws are scheduled.
pub fn run_bootstrap_with(
    x: &Sample,
    t: usize,
    cfg: &TrainConfig,
    seed: u64,
    opts: &BootstrapOptions,
) -> Result<BootstrapDraws> {
    if t == 0 {
        return Err(Error::Input("T must be >= 1".into()));
    }
    cfg.validate()?;
    let domain = opts.domain.unwrap_or(Domain::BootstrapX);
    let results = map_indexed(t, opts.execution, |k| {
        let mut rng = stream(seed, domain, k as u64);
        let xi: Vec<f64> = (0..x.n())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        bootstrap_draw_with_multipliers(x, &xi, cfg, &mut rng, opts.warm_start.as_ref())
            .map(|o| o.value)
            .map_err(|e| Error::Draw {
                index: k,
                source: Box::new(e),
            })
    });
    let draws = results.into_iter().collect::<Result<Vec<_>>>()?;
    BootstrapDraws::new(draws, x.n(), cfg.param_count(x.d()), seed)
}
