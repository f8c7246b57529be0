//! Oracle checks for the loss stack: finite-difference gradients and a
//! Monte-Carlo estimate of the Dirichlet KL term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use flexrec_core::loss::{
    dirichlet_params, edl_loss, kl_uniform_dirichlet, loss_gradient, mask_alpha, reg_loss,
    total_loss, LossWeights,
};
use flexrec_core::opinion::PlausibilityVector;
use flexrec_core::special::ln_gamma;

/// The loss with the regularizer's ignorance estimate pinned to the base
/// point, which is what the analytic gradient differentiates.
fn frozen_loss(
    values: &[f64],
    label: usize,
    ignorance_estimate: f64,
    weights: &LossWeights,
    epoch_fraction: f64,
) -> f64 {
    let pl = PlausibilityVector::new(values.to_vec()).unwrap();
    let beliefs = pl.singleton_beliefs();
    let uncertainty = 1.0 - beliefs.iter().sum::<f64>();
    let params = dirichlet_params(&beliefs, uncertainty).unwrap();
    let edl = edl_loss(&params, label).unwrap();
    let reg = reg_loss(&pl, label, ignorance_estimate).unwrap();
    let kl = kl_uniform_dirichlet(&mask_alpha(&params, label).unwrap());
    edl + weights.lambda_reg * reg + weights.lambda_kl_at(epoch_fraction) * kl
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    let h = 1e-4;
    for &k in &[2usize, 3, 5] {
        for case in 0..100 {
            let values: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
            let label = rng.random_range(0..k);
            let epoch_fraction = rng.random_range(0.0..=1.0);
            let weights = LossWeights {
                lambda_reg: rng.random_range(0.0..=2.0),
                lambda_kl_max: rng.random_range(0.0..=0.2),
                kl_warmup_fraction: rng.random_range(0.2..=1.0),
            };
            let pl = PlausibilityVector::new(values.clone()).unwrap();
            let ignorance = pl.ignorance();
            let analytic = loss_gradient(&pl, label, &weights, epoch_fraction).unwrap();

            let mut numeric = vec![0.0; k];
            for i in 0..k {
                let mut up = values.clone();
                let mut down = values.clone();
                up[i] += h;
                down[i] -= h;
                numeric[i] = (frozen_loss(&up, label, ignorance, &weights, epoch_fraction)
                    - frozen_loss(&down, label, ignorance, &weights, epoch_fraction))
                    / (2.0 * h);
            }

            let max_diff = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, n)| (a - n).abs())
                .fold(0.0, f64::max);
            let scale = analytic
                .iter()
                .chain(&numeric)
                .map(|v| v.abs())
                .fold(1e-12, f64::max);
            assert!(
                max_diff / scale < 1e-3,
                "K={k} case {case}: rel error {} (analytic {analytic:?}, numeric {numeric:?})",
                max_diff / scale
            );
        }
    }
}

/// KL(Dir(alpha) || Dir(1)) by sampling: draw from Dir(alpha) via gamma
/// variates and average the log density ratio.
fn kl_monte_carlo(alpha: &[f64], samples: usize, seed: u64) -> f64 {
    let k = alpha.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|a| Gamma::new(*a, 1.0).unwrap())
        .collect();
    let strength: f64 = alpha.iter().sum();
    // Constant part: ln Gamma(S) - sum ln Gamma(alpha_i) - ln Gamma(K).
    let log_norm = ln_gamma(strength)
        - alpha.iter().map(|a| ln_gamma(*a)).sum::<f64>()
        - ln_gamma(k as f64);
    let mut acc = 0.0;
    for _ in 0..samples {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        for (a, x) in alpha.iter().zip(&draws) {
            if *a != 1.0 {
                acc += (a - 1.0) * (x / total).ln();
            }
        }
    }
    log_norm + acc / samples as f64
}

#[test]
fn kl_closed_form_matches_monte_carlo() {
    // Masked concentrations always keep alpha_i >= 1, so these cover the
    // reachable range at K in {2, 3}.
    let cases: Vec<Vec<f64>> = vec![
        vec![2.0, 1.0],
        vec![1.0, 3.5],
        vec![1.6, 1.2],
        vec![1.0, 1.75, 1.0],
        vec![1.0, 2.5, 4.0],
        vec![3.0, 1.1, 1.9],
    ];
    for (i, alpha) in cases.iter().enumerate() {
        // Invert the Dirichlet map: with U = K/S, alpha_i = K b_i / U + 1
        // means b_i = (alpha_i - 1) / S.
        let strength: f64 = alpha.iter().sum();
        let beliefs: Vec<f64> = alpha.iter().map(|a| (a - 1.0) / strength).collect();
        let params = dirichlet_params(&beliefs, alpha.len() as f64 / strength).unwrap();
        for (a, b) in alpha.iter().zip(params.alpha()) {
            assert!((a - b).abs() < 1e-12, "alpha reconstruction");
        }
        let closed = kl_uniform_dirichlet(&params);
        let mc = kl_monte_carlo(alpha, 400_000, 1000 + i as u64);
        let denom = closed.max(0.01);
        assert!(
            (closed - mc).abs() / denom < 0.02,
            "alpha {alpha:?}: closed {closed} vs mc {mc}"
        );
    }

    // Uniform parameters have exactly zero divergence.
    let uniform = dirichlet_params(&[0.0, 0.0, 0.0], 1.0).unwrap();
    assert_eq!(kl_uniform_dirichlet(&uniform), 0.0);
    let mc = kl_monte_carlo(&[1.0, 1.0, 1.0], 200_000, 77);
    assert!(mc.abs() < 3e-3, "uniform mc {mc}");
}

#[test]
fn edl_reference_value_is_reproduced() {
    let params = dirichlet_params(&[0.5, 0.1, 0.0], 0.4).unwrap();
    let loss = edl_loss(&params, 0).unwrap();
    let expect = 7.5f64.ln() - 4.75f64.ln();
    assert!((loss - expect).abs() < 1e-10, "{loss} vs {expect}");
    assert!((expect - 0.4568).abs() < 1e-4);
}

#[test]
fn total_loss_matches_frozen_loss_at_the_base_point() {
    // total_loss evaluates the same function the gradient oracle freezes,
    // when the estimate equals the base-point ignorance.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let values: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..0.95)).collect();
        let pl = PlausibilityVector::new(values.clone()).unwrap();
        let label = rng.random_range(0..4);
        let frac = rng.random_range(0.0..=1.0);
        let weights = LossWeights::default();
        let breakdown = total_loss(&pl, label, &weights, frac).unwrap();
        let frozen = frozen_loss(&values, label, pl.ignorance(), &weights, frac);
        assert!((breakdown.total - frozen).abs() < 1e-12);
    }
}
