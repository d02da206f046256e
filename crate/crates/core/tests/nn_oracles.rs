use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use wtest_core::dual::train_dual_critic;
use wtest_core::nn::spectral::{power_iteration, power_iteration_converged, LIPSCHITZ_SLACK};
use wtest_core::nn::{init_critic, CriticNet, TrainConfig};
use wtest_core::Sample;

fn small_cfg(widths: Vec<usize>) -> TrainConfig {
    TrainConfig {
        hidden_widths: widths,
        learning_rate: 0.01,
        epochs: 40,
        ..TrainConfig::default()
    }
}

// Perturbs every parameter so biases are non-zero and ReLU kinks sit away
// from the sampled inputs with high probability.
fn random_net(d: usize, widths: Vec<usize>, seed: u64) -> CriticNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = init_critic(d, &small_cfg(widths), &mut rng).unwrap();
    let flat: Vec<f64> = net
        .flat_params()
        .iter()
        .map(|p| p + 0.3 * rng.random_range(-1.0..1.0))
        .collect();
    net.set_flat_params(&flat).unwrap();
    net
}

fn random_points(n: usize, d: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0))
}

fn objective(net: &CriticNet, w: &[f64], x: &Array2<f64>) -> f64 {
    let out = net.forward_batch(x.view()).unwrap();
    out.iter().zip(w).map(|(f, w)| f * w).sum()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|u| u * u)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[test]
fn parameter_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = random_net(3, vec![5, 4], 3);
    let x = random_points(4, 3, &mut rng);
    let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let analytic = net.batch_gradient(&w, x.view()).unwrap().flatten();

    let h = 1e-6;
    let base = net.flat_params();
    let mut numeric = Vec::with_capacity(base.len());
    for j in 0..base.len() {
        let mut plus = base.clone();
        plus[j] += h;
        let mut minus = base.clone();
        minus[j] -= h;
        let mut np = net.clone();
        np.set_flat_params(&plus).unwrap();
        let mut nm = net.clone();
        nm.set_flat_params(&minus).unwrap();
        numeric.push((objective(&np, &w, &x) - objective(&nm, &w, &x)) / (2.0 * h));
    }
    let err = relative_error(&analytic, &numeric);
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn input_gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..10 {
        let net = random_net(4, vec![6, 6], seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        let g = net.input_gradient(&x).unwrap();
        for j in 0..4 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fd = (net.forward(&xp).unwrap() - net.forward(&xm).unwrap()) / (2.0 * h);
            assert!(
                (fd - g[j]).abs() <= 1e-5,
                "seed {seed} coord {j}: {fd} vs {}",
                g[j]
            );
        }
    }
}

// One-sided Jacobi: orthogonalize column pairs by plane rotations until all
// pairs are orthogonal; the column norms are then the singular values.
fn jacobi_singular_values(a: &Array2<f64>) -> Vec<f64> {
    let mut u = a.clone();
    let cols = u.ncols();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha: f64 = u.column(p).dot(&u.column(p));
                let beta: f64 = u.column(q).dot(&u.column(q));
                let gamma: f64 = u.column(p).dot(&u.column(q));
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u.nrows() {
                    let (up, uq) = (u[[i, p]], u[[i, q]]);
                    u[[i, p]] = c * up - s * uq;
                    u[[i, q]] = s * up + c * uq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| u.column(j).dot(&u.column(j)).sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

#[test]
fn jacobi_oracle_on_known_matrix() {
    // diag(3, 2) rotated on both sides keeps singular values {3, 2}.
    let (c, s) = (0.6, 0.8);
    let r = ndarray::arr2(&[[c, -s], [s, c]]);
    let a = r.dot(&ndarray::arr2(&[[3.0, 0.0], [0.0, 2.0]])).dot(&r.t());
    let sv = jacobi_singular_values(&a);
    assert!(
        (sv[0] - 3.0).abs() < 1e-12 && (sv[1] - 2.0).abs() < 1e-12,
        "{sv:?}"
    );
}

// Entries uniform on [0, 1): the top singular value is well separated, so
// thirty warm iterations from the flat vector reach 1e-4.
#[test]
fn power_iteration_matches_jacobi_svd() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((50, 50), |_| rng.random_range(0.0..1.0));
        let sigma = jacobi_singular_values(&a)[0];
        let mut v = Array1::from_elem(50, 1.0 / 50f64.sqrt());
        let est = power_iteration(&a, &mut v, 30);
        let rel = (est - sigma).abs() / sigma;
        assert!(est <= sigma * (1.0 + 1e-12));
        assert!(rel <= 1e-4, "seed {seed}: {est} vs {sigma} ({rel:e})");
    }
}

// Gaussian entries leave sigma_2 / sigma_1 near 0.95, too close for thirty
// iterations; the converged routine still matches the oracle.
#[test]
fn converged_power_iteration_matches_jacobi_on_gaussian_matrices() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((50, 50), |_| StandardNormal.sample(&mut rng));
        let sigma = jacobi_singular_values(&a)[0];
        let mut v = Array1::from_elem(50, 1.0 / 50f64.sqrt());
        let est = power_iteration_converged(&a, &mut v, 1e-14, 100_000);
        let rel = (est - sigma).abs() / sigma;
        assert!(rel <= 1e-8, "seed {seed}: {est} vs {sigma} ({rel:e})");
    }
}

#[test]
fn trained_critics_are_lipschitz_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, d) in [1usize, 2, 3].into_iter().enumerate() {
        let x = Sample::new(random_points(40, d, &mut rng)).unwrap();
        let y = Sample::new(random_points(40, d, &mut rng).mapv(|v| v * 0.5 + 0.4)).unwrap();
        let est = train_dual_critic(&x, &y, &small_cfg(vec![16, 16]).with_seed(k as u64)).unwrap();
        assert!(est.lipschitz_certificate <= 1.0 + LIPSCHITZ_SLACK);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..1.5)).collect();
            let b: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..1.5)).collect();
            let gap = (est.net.forward(&a).unwrap() - est.net.forward(&b).unwrap()).abs();
            let dist = a
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(gap <= 1.000001 * dist, "{gap} > {dist}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certified_nets_are_lipschitz(
        seed in 0u64..10_000,
        d in 1usize..4,
        scale in 0.5f64..20.0,
        a in prop::collection::vec(-2.0f64..2.0, 3),
        b in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let mut net = random_net(d, vec![7, 5], seed);
        let blown: Vec<f64> = net.flat_params().iter().map(|p| p * scale).collect();
        net.set_flat_params(&blown).unwrap();
        net.certify();
        prop_assert!(net.lipschitz_upper_bound() <= 1.0 + LIPSCHITZ_SLACK);
        let gap = (net.forward(&a[..d]).unwrap() - net.forward(&b[..d]).unwrap()).abs();
        let dist = a[..d].iter().zip(&b[..d]).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(gap <= (1.0 + LIPSCHITZ_SLACK) * dist + 1e-12);
    }

    #[test]
    fn negated_net_flips_sign(seed in 0u64..10_000, x in prop::collection::vec(0.0f64..1.0, 2)) {
        let net = random_net(2, vec![4], seed);
        let f = net.forward(&x).unwrap();
        let g = net.negated().forward(&x).unwrap();
        prop_assert!((f + g).abs() <= 1e-12 * (1.0 + f.abs()));
    }
}
