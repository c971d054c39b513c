use rcs_core::basis::make_chebyshev_basis;
use rcs_core::christoffel::{cap_estimate, gram_dense, gram_quadrature};
use rcs_core::domain::Domain;
use rcs_core::io::{batch_from_csv, batch_to_csv, fit_from_csv, fit_to_csv, stack_from_json, stack_to_json};
use rcs_core::linalg::max_abs;
use rcs_core::lsq::{fit, l2_error};
use rcs_core::rcs::{run_rcs, stack_digest, RcsConfig};
use rcs_core::sampler::{make_batch, sample_mu_u, ChainConfig, WeightRule};

#[test]
fn importance_weights_integrate_an_indicator() {
    let domain = Domain::interval(-1.0, 1.0);
    let u = |x: &[f64]| x[0] + 1.5;
    let cfg = ChainConfig {
        thinning: Some(5),
        ..ChainConfig::with_seed(7)
    };
    let points = sample_mu_u(&u, &domain, 10_000, &cfg).unwrap();
    let batch = make_batch(points, &u, 1.5, WeightRule::Normalized).unwrap();
    let m = batch.len() as f64;
    let terms: Vec<f64> = batch
        .points
        .iter()
        .map(|x| if x[0] < 0.0 { 1.5 / u(x) } else { 0.0 })
        .collect();
    let mean = terms.iter().sum::<f64>() / m;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let sigma = (var / m).sqrt();
    assert!((mean - 0.5).abs() <= 3.0 * sigma, "mean {mean}, sigma {sigma}");
    // The weights themselves carry the same estimate.
    let weighted: f64 = batch
        .points
        .iter()
        .zip(&batch.weights)
        .filter(|(x, _)| x[0] < 0.0)
        .map(|(_, w)| w)
        .sum();
    assert!((weighted - mean).abs() < 1e-12);
}

#[test]
fn sampled_gram_converges_to_quadrature() {
    let basis = make_chebyshev_basis(6, -1.0, 1.0).unwrap();
    let exact = gram_quadrature(&basis).unwrap();
    let errors: Vec<f64> = [1_000, 10_000]
        .iter()
        .map(|&m| {
            let rho = |_: &[f64]| 1.0;
            let pts = sample_mu_u(&rho, basis.domain(), m, &ChainConfig::with_seed(3)).unwrap();
            let batch = make_batch(pts, &rho, 1.0, WeightRule::Normalized).unwrap();
            max_abs(&(batch.weighted_gram(&basis).entries() - exact.entries()))
        })
        .collect();
    assert!(errors[0] < 0.25, "{errors:?}");
    assert!(errors[1] < 0.08, "{errors:?}");
}

#[test]
fn dense_grid_gram_matches_quadrature() {
    let basis = make_chebyshev_basis(6, -1.0, 1.0).unwrap();
    let dense = gram_dense(&basis, 20_000, 1).unwrap();
    let exact = gram_quadrature(&basis).unwrap();
    assert!(max_abs(&(dense.entries() - exact.entries())) < 0.05);
}

fn small_config(seed: u64) -> (rcs_core::BasisSet, RcsConfig) {
    let basis = make_chebyshev_basis(8, -1.0, 1.0).unwrap();
    let gram = gram_quadrature(&basis).unwrap();
    let cap = cap_estimate(&basis, &gram, 1e-8, 2_000).unwrap();
    (basis, RcsConfig::practical(1e-8, cap, 8.0, seed))
}

#[test]
fn runs_are_deterministic_given_a_seed() {
    let (basis, cfg) = small_config(11);
    let a = run_rcs(&basis, &cfg).unwrap();
    let b = run_rcs(&basis, &cfg).unwrap();
    assert_eq!(a.final_batch, b.final_batch);
    assert_eq!(stack_digest(&a.final_stack), stack_digest(&b.final_stack));
    let (_, other) = small_config(12);
    let c = run_rcs(&basis, &other).unwrap();
    assert_ne!(a.final_batch.points, c.final_batch.points);
}

#[test]
fn sample_fit_roundtrip() {
    let (basis, cfg) = small_config(5);
    let report = run_rcs(&basis, &cfg).unwrap();
    report.final_batch.validate(basis.domain()).unwrap();

    let batch = batch_from_csv(&batch_to_csv(&report.final_batch)).unwrap();
    assert_eq!(batch, report.final_batch);
    let stack = stack_from_json(&stack_to_json(&report.final_stack)).unwrap();
    assert_eq!(stack_digest(&stack), stack_digest(&report.final_stack));

    let target = |x: &[f64]| (2.0 * x[0]).exp();
    let fitted = fit(&basis, target, &batch, cfg.eps).unwrap();
    let restored = fit_from_csv(&fit_to_csv(&fitted)).unwrap();
    assert_eq!(restored, fitted);
    // Degree-7 truncation of exp(2x) is accurate to roughly 1e-4.
    let err = l2_error(&basis, &restored.coefficients, target).unwrap();
    assert!(err < 1e-3, "fit error {err}");
}
