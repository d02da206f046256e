//! Bootstrap tests built on the dual estimate.
//!
//! One-sample: reject `mu = mu_0` when `sqrt(n/S) W(mu_n, mu_0) >= q(1 - alpha)`
//! with `q` the bootstrap quantile. Two-sample: reject `mu = nu` when
//! `sqrt(rho/(S_n min S_m)) W(mu_n, nu_m) >= q_breve(1 - alpha)`, where
//! `q_breve` splits `alpha` between the two samples' bootstraps and takes the
//! smallest sum over a grid of splits.
//!
//! Data must already be on the unit box; nothing here rescales.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_bootstrap_with, BootstrapDraws, BootstrapOptions};
use crate::datagen::{generate_with_rng, DistSpec};
use crate::dual::train_dual_critic;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::par::Execution;
use crate::rng::{stream, Domain};
use crate::sample::{ensure_same_dim, Sample};
use crate::transport::{
    wasserstein1_1d_exact, wasserstein1_lp_exact_with_budget, DEFAULT_LP_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Reject,
    Accept,
}

impl Decision {
    /// `Reject` exactly when `statistic >= critical`.
    pub fn from_rule(statistic: f64, critical: f64) -> Self {
        if statistic >= critical {
            Decision::Reject
        } else {
            Decision::Accept
        }
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Reject => "Reject",
            Decision::Accept => "Accept",
        })
    }
}

/// Outcome of one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestReport {
    pub statistic: f64,
    pub raw_distance: f64,
    pub scaling: f64,
    pub quantile: f64,
    pub alpha: f64,
    pub decision: Decision,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "S")]
    pub s: Vec<usize>,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub config_digest: String,
}

/// The two-sample critical value and its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleQuantile {
    pub r_grid: Vec<f64>,
    pub per_r_values: Vec<f64>,
    pub q_breve: f64,
    pub lambda: f64,
    pub rho: f64,
}

/// `{0.05, 0.10, ..., 0.95}`.
pub fn default_r_grid() -> Vec<f64> {
    (1..20).map(|k| k as f64 * 0.05).collect()
}

/// `(lambda, rho) = (m/(n+m), nm/(n+m))`.
pub fn two_sample_weights(n: usize, m: usize) -> Result<(f64, f64)> {
    if n == 0 || m == 0 {
        return Err(Error::Input("sample sizes must be positive".into()));
    }
    let (nf, mf) = (n as f64, m as f64);
    let lambda = mf / (nf + mf);
    let rho = nf * mf / (nf + mf);
    debug_assert!((rho * (1.0 / nf + 1.0 / mf) - 1.0).abs() < 1e-12);
    debug_assert!((rho - lambda * nf).abs() <= 1e-9 * rho);
    Ok((lambda, rho))
}

impl TwoSampleQuantile {
    /// `q_breve = min_r sqrt(lambda) q_X(1 - r alpha) + sqrt(1 - lambda) q_Y(1 - (1 - r) alpha)`.
    pub fn compute(
        draws_x: &BootstrapDraws,
        draws_y: &BootstrapDraws,
        n: usize,
        m: usize,
        alpha: f64,
        r_grid: &[f64],
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::Input(
                "r grid must be a non-empty subset of (0, 1)".into(),
            ));
        }
        let (lambda, rho) = two_sample_weights(n, m)?;
        let (wx, wy) = (lambda.sqrt(), (1.0 - lambda).sqrt());
        let per_r_values = r_grid
            .iter()
            .map(|&r| {
                let qx = draws_x.quantile(1.0 - r * alpha)?;
                let qy = draws_y.quantile(1.0 - (1.0 - r) * alpha)?;
                Ok(wx * qx + wy * qy)
            })
            .collect::<Result<Vec<_>>>()?;
        let q_breve = per_r_values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            r_grid: r_grid.to_vec(),
            per_r_values,
            q_breve,
            lambda,
            rho,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("alpha {alpha} not in (0, 1)")))
    }
}

fn check_unit_box(x: &Sample, what: &str) -> Result<()> {
    if x.is_unit_box() {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "{what} must be mapped to the unit box first (values in [0, 1])"
        )))
    }
}

/// Shared knobs of the test procedures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSettings {
    pub alpha: f64,
    /// Number of bootstrap draws `T`.
    pub t: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl TestSettings {
    pub fn new(alpha: f64, t: usize, seed: u64) -> Self {
        Self {
            alpha,
            t,
            seed,
            execution: Execution::Parallel,
        }
    }

    fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.t == 0 {
            return Err(Error::Input("T must be >= 1".into()));
        }
        Ok(())
    }
}

/// One-sample test result with diagnostics that are not part of the report.
#[derive(Debug, Clone)]
pub struct OneSampleOutcome {
    pub report: TestReport,
    /// Fraction of draws at or above the statistic. Diagnostic only.
    pub p_value: f64,
    pub lipschitz_certificate: f64,
    pub draws: BootstrapDraws,
}

/// Tests `mu = mu_0` where `mu_0` is represented by the sample `reference`
/// (ideally much larger than `x`).
pub fn one_sample_test(
    x: &Sample,
    reference: &Sample,
    cfg: &TrainConfig,
    settings: &TestSettings,
) -> Result<OneSampleOutcome> {
    ensure_same_dim(x, reference)?;
    settings.validate()?;
    check_unit_box(x, "data")?;
    let cfg = cfg.with_seed(settings.seed);
    let n = x.n();
    let s = cfg.param_count(x.d());
    let estimate = train_dual_critic(x, reference, &cfg)?;
    let raw = estimate.value;
    let scaling = (n as f64 / s as f64).sqrt();
    let draws = run_bootstrap_with(
        x,
        settings.t,
        &cfg,
        settings.seed,
        &opts(settings, Domain::BootstrapX),
    )?;
    let quantile = draws.quantile(1.0 - settings.alpha)?;
    let statistic = scaling * raw;
    Ok(OneSampleOutcome {
        report: TestReport {
            statistic,
            raw_distance: raw,
            scaling,
            quantile,
            alpha: settings.alpha,
            decision: Decision::from_rule(statistic, quantile),
            n,
            m: reference.n(),
            s: vec![s],
            t: settings.t,
            seed: settings.seed,
            config_digest: cfg.digest(),
        },
        p_value: draws.exceedance(statistic),
        lipschitz_certificate: estimate.lipschitz_certificate,
        draws,
    })
}

fn opts(settings: &TestSettings, domain: Domain) -> BootstrapOptions {
    BootstrapOptions {
        execution: settings.execution,
        warm_start: None,
        domain: Some(domain),
    }
}

/// Interval for `W(mu, mu_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
    pub n: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub config_digest: String,
}

/// `[sqrt(S/n) q(alpha/2), sqrt(S/n) q(1 - alpha/2)]`, sorted, lower end
/// clamped at 0. Only `x` enters the bootstrap; `reference` is checked for
/// compatibility so the call mirrors [`one_sample_test`].
pub fn confidence_interval(
    x: &Sample,
    reference: &Sample,
    cfg: &TrainConfig,
    settings: &TestSettings,
) -> Result<ConfidenceInterval> {
    ensure_same_dim(x, reference)?;
    settings.validate()?;
    check_unit_box(x, "data")?;
    let cfg = cfg.with_seed(settings.seed);
    let draws = run_bootstrap_with(
        x,
        settings.t,
        &cfg,
        settings.seed,
        &opts(settings, Domain::BootstrapX),
    )?;
    interval_from_draws(&draws, settings.alpha, &cfg, settings)
}

/// The interval computed from existing draws.
pub fn interval_from_draws(
    draws: &BootstrapDraws,
    alpha: f64,
    cfg: &TrainConfig,
    settings: &TestSettings,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let factor = (draws.s as f64 / draws.n as f64).sqrt();
    let a = factor * draws.quantile(alpha / 2.0)?;
    let b = factor * draws.quantile(1.0 - alpha / 2.0)?;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Ok(ConfidenceInterval {
        lo: lo.max(0.0),
        hi: hi.max(0.0),
        alpha,
        n: draws.n,
        s: draws.s,
        t: draws.len(),
        seed: settings.seed,
        config_digest: cfg.digest(),
    })
}

#[derive(Debug, Clone)]
pub struct TwoSampleOutcome {
    pub report: TestReport,
    pub quantile: TwoSampleQuantile,
    pub lipschitz_certificate: f64,
}

/// Tests `mu = nu` from samples `x ~ mu` and `y ~ nu`. The distance critic
/// uses whichever of the two configurations has fewer parameters; each
/// sample is bootstrapped with its own configuration.
pub fn two_sample_test(
    x: &Sample,
    y: &Sample,
    cfg_x: &TrainConfig,
    cfg_y: &TrainConfig,
    settings: &TestSettings,
    r_grid: &[f64],
) -> Result<TwoSampleOutcome> {
    ensure_same_dim(x, y)?;
    settings.validate()?;
    check_unit_box(x, "x")?;
    check_unit_box(y, "y")?;
    let cfg_x = cfg_x.with_seed(settings.seed);
    let cfg_y = cfg_y.with_seed(settings.seed);
    let (n, m, d) = (x.n(), y.n(), x.d());
    let (s_x, s_y) = (cfg_x.param_count(d), cfg_y.param_count(d));
    let critic_cfg = if s_x <= s_y { &cfg_x } else { &cfg_y };
    let estimate = train_dual_critic(x, y, critic_cfg)?;
    let raw = estimate.value;
    let (_, rho) = two_sample_weights(n, m)?;
    let scaling = (rho / s_x.min(s_y) as f64).sqrt();
    let draws_x = run_bootstrap_with(
        x,
        settings.t,
        &cfg_x,
        settings.seed,
        &opts(settings, Domain::BootstrapX),
    )?;
    let draws_y = run_bootstrap_with(
        y,
        settings.t,
        &cfg_y,
        settings.seed,
        &opts(settings, Domain::BootstrapY),
    )?;
    let quantile = TwoSampleQuantile::compute(&draws_x, &draws_y, n, m, settings.alpha, r_grid)?;
    let statistic = scaling * raw;
    Ok(TwoSampleOutcome {
        report: TestReport {
            statistic,
            raw_distance: raw,
            scaling,
            quantile: quantile.q_breve,
            alpha: settings.alpha,
            decision: Decision::from_rule(statistic, quantile.q_breve),
            n,
            m,
            s: vec![s_x, s_y],
            t: settings.t,
            seed: settings.seed,
            config_digest: crate::nn::digest_pair(&cfg_x, &cfg_y),
        },
        quantile,
        lipschitz_certificate: estimate.lipschitz_certificate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub admissible: bool,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "S")]
    pub s: usize,
}

/// Compares `S` with the window `n^{2d/(3+2d)} (ln n)^{1/3} < S < n/(ln n)^6`
/// (unit constants). Advisory: the window is empty for all practical `n`.
pub fn check_parameter_budget(n: usize, d: usize, s: usize) -> Result<BudgetReport> {
    if n < 3 {
        return Err(Error::Input(format!("n must be >= 3, got {n}")));
    }
    if d == 0 {
        return Err(Error::Input("d must be >= 1".into()));
    }
    let nf = n as f64;
    let ln = nf.ln();
    let exponent = 2.0 * d as f64 / (3.0 + 2.0 * d as f64);
    let lower = nf.powf(exponent) * ln.cbrt();
    let upper = nf / ln.powi(6);
    let sf = s as f64;
    Ok(BudgetReport {
        admissible: s > 0 && lower < sf && sf < upper,
        lower,
        upper,
        n,
        d,
        s,
    })
}

/// Exact `W_1`: the quantile formula in one dimension, the transport LP
/// otherwise (subject to `budget` cost entries).
pub fn exact_distance(x: &Sample, y: &Sample, budget: usize) -> Result<f64> {
    if x.d() == 1 && y.d() == 1 {
        wasserstein1_1d_exact(x, y)
    } else {
        wasserstein1_lp_exact_with_budget(x, y, budget)
    }
}

/// One row of the anti-concentration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntiConcentrationRow {
    pub delta: f64,
    pub r: f64,
    /// Fraction of draws in `[r, r + delta]`, divided by `delta`.
    pub c_r: f64,
}

/// Draws of `W(mu_n, mu_{m_ref})` with both samples fresh per repetition,
/// on the family's raw scale, computed exactly.
pub fn sample_exact_distances(
    spec: &DistSpec,
    n: usize,
    m_ref: usize,
    reps: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let results = crate::par::map_indexed(reps, execution, |k| {
        let mut rx = stream(seed, Domain::DataX, k as u64);
        let mut ry = stream(seed, Domain::Reference, k as u64);
        let x = Sample::new(spec.sample_raw(n, &mut rx)?)?;
        let y = Sample::new(spec.sample_raw(m_ref, &mut ry)?)?;
        exact_distance(&x, &y, DEFAULT_LP_BUDGET)
    });
    results.into_iter().collect()
}

/// Estimates `C_r = P(r <= W(mu_n, mu) <= r + delta) / delta` for every
/// `delta` in `deltas` and `r` on the grid `min W, min W + delta, ...` up to
/// the largest observed draw. `mu` is approximated by a fresh sample of size
/// `m_ref` in every repetition.
pub fn anti_concentration_diagnostic(
    spec: &DistSpec,
    n: usize,
    reps: usize,
    m_ref: usize,
    deltas: &[f64],
    seed: u64,
) -> Result<Vec<AntiConcentrationRow>> {
    if reps < 50 {
        return Err(Error::Input(format!("reps must be >= 50, got {reps}")));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::Input(
            "deltas must be a non-empty subset of (0, 1)".into(),
        ));
    }
    let mut w = sample_exact_distances(spec, n, m_ref, reps, seed, Execution::Parallel)?;
    w.sort_by(f64::total_cmp);
    Ok(anti_concentration_table(&w, deltas))
}

/// The `C_r` table for already sorted draws.
pub fn anti_concentration_table(sorted: &[f64], deltas: &[f64]) -> Vec<AntiConcentrationRow> {
    let mut rows = Vec::new();
    let (Some(&lo), Some(&hi)) = (sorted.first(), sorted.last()) else {
        return rows;
    };
    let total = sorted.len() as f64;
    for &delta in deltas {
        let mut k = 0usize;
        loop {
            let r = lo + k as f64 * delta;
            if r > hi {
                break;
            }
            let start = sorted.partition_point(|v| *v < r);
            let end = sorted.partition_point(|v| *v <= r + delta);
            rows.push(AntiConcentrationRow {
                delta,
                r,
                c_r: (end - start) as f64 / total / delta,
            });
            k += 1;
        }
    }
    rows
}

/// Reference draws of `sqrt(n/S) W(mu_n, mu_m)` on the unit box, for Q-Q
/// comparison with bootstrap draws. The exact solver is used when `n * m`
/// cost entries fit the default budget, the dual estimator otherwise.
pub fn qq_reference(
    spec: &DistSpec,
    n: usize,
    m: usize,
    reps: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps < 2 {
        return Err(Error::Input(format!("reps must be >= 2, got {reps}")));
    }
    spec.validate()?;
    let s = cfg.param_count(spec.d);
    let scaling = (n as f64 / s as f64).sqrt();
    let exact = spec.d == 1 || n.saturating_mul(m) <= DEFAULT_LP_BUDGET;
    let results = crate::par::map_indexed(reps, Execution::Parallel, |k| {
        let x = generate_with_rng(spec, n, &mut stream(seed, Domain::DataX, k as u64))?;
        let y = generate_with_rng(spec, m, &mut stream(seed, Domain::Reference, k as u64))?;
        let w = if exact {
            exact_distance(&x, &y, DEFAULT_LP_BUDGET)?
        } else {
            train_dual_critic(&x, &y, &cfg.with_seed(seed ^ k as u64))?.value
        };
        Ok(scaling * w)
    });
    results.into_iter().collect()
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_t |F_a(t) - F_b(t)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_examples() {
        let r = check_parameter_budget(1_000_000, 2, 10_000).unwrap();
        assert!(!r.admissible);
        assert!((r.upper - 0.1438).abs() < 1e-3);
        let expected_lower = 1e6f64.powf(4.0 / 7.0) * (1e6f64).ln().cbrt();
        assert!((r.lower - expected_lower).abs() < 1e-9 * expected_lower);
        assert!(!check_parameter_budget(100, 1, 0).unwrap().admissible);
        assert!(check_parameter_budget(2, 1, 5).is_err());
        let lows: Vec<f64> = (1..6)
            .map(|d| check_parameter_budget(500, d, 1).unwrap().lower)
            .collect();
        assert!(lows.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn weights_identities() {
        for (n, m) in [(1, 1), (3, 7), (1024, 1024), (50, 2000)] {
            let (lambda, rho) = two_sample_weights(n, m).unwrap();
            assert!(lambda > 0.0 && lambda < 1.0);
            assert!((rho * (1.0 / n as f64 + 1.0 / m as f64) - 1.0).abs() < 1e-12);
            let (other, _) = two_sample_weights(m, n).unwrap();
            assert!((lambda + other - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn q_breve_is_grid_minimum() {
        let dx = BootstrapDraws::new((1..=100).map(f64::from).collect(), 10, 5, 0).unwrap();
        let dy =
            BootstrapDraws::new((1..=100).map(|v| 2.0 * v as f64).collect(), 30, 5, 0).unwrap();
        let q = TwoSampleQuantile::compute(&dx, &dy, 10, 30, 0.1, &default_r_grid()).unwrap();
        assert_eq!(q.per_r_values.len(), 19);
        assert!(q.per_r_values.iter().all(|v| q.q_breve <= *v));
        assert!(q.per_r_values.contains(&q.q_breve));
        assert!((q.lambda - 0.75).abs() < 1e-15);
        assert!((q.rho - 7.5).abs() < 1e-12);
        assert!(TwoSampleQuantile::compute(&dx, &dy, 10, 30, 0.1, &[]).is_err());
        assert!(TwoSampleQuantile::compute(&dx, &dy, 10, 30, 0.1, &[1.0]).is_err());
    }

    #[test]
    fn anti_concentration_table_properties() {
        let zeros = vec![0.0; 60];
        let rows = anti_concentration_table(&zeros, &[0.05]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].c_r * 0.05 - 1.0).abs() < 1e-12);

        let w = [0.1, 0.12, 0.2, 0.31];
        let rows = anti_concentration_table(&w, &[0.5]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].c_r * 0.5 - 1.0).abs() < 1e-12);
        let rows = anti_concentration_table(&w, &[0.05]);
        assert!(rows.iter().all(|r| r.c_r.is_finite() && r.c_r >= 0.0));
        assert!(rows.iter().all(|r| r.c_r * 0.05 <= 1.0 + 1e-12));
    }

    #[test]
    fn ks_cases() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[2.5, 3.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decision_rule_boundary() {
        assert_eq!(Decision::from_rule(1.0, 1.0), Decision::Reject);
        assert_eq!(Decision::from_rule(0.999, 1.0), Decision::Accept);
    }

    #[test]
    fn report_json_field_names() {
        let r = TestReport {
            statistic: 0.0,
            raw_distance: 0.0,
            scaling: 1.0,
            quantile: 0.5,
            alpha: 0.05,
            decision: Decision::Accept,
            n: 3,
            m: 3,
            s: vec![7],
            t: 10,
            seed: 1,
            config_digest: "ab".into(),
        };
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "S",
                "T",
                "alpha",
                "config_digest",
                "decision",
                "m",
                "n",
                "quantile",
                "raw_distance",
                "scaling",
                "seed",
                "statistic"
            ]
        );
        assert_eq!(v["decision"], "Accept");
    }
}
