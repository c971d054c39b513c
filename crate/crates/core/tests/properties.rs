//! Property tests for the linear-algebra invariants behind the sampler.

use proptest::prelude::*;
use rcs_core::basis::{make_chebyshev_basis, make_weighted_poly_basis, BasisSet, Field};
use rcs_core::christoffel::{
    gram_quadrature, k_eps_phi, numerical_dimension, stack_init, GramMatrix, GramSource,
    InverseChristoffel, PruneMode,
};
use rcs_core::leverage::{
    matrix_numerical_dimension, ridge_leverage_scores, scale_rows, whack_a_mole,
    whack_a_mole_from,
};
use rcs_core::linalg::{hermitian_eigenvalues, CMatrix, C64};
use rcs_core::lsq::{discrete_objective, fit};
use rcs_core::rcs::{build_a, RcsMode};
use rcs_core::sampler::{make_batch_from_values, WeightRule};

fn matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| C64::new(entries[i * cols + j], 0.0))
}

fn tall_matrix() -> impl Strategy<Value = CMatrix> {
    (2usize..12, 1usize..6).prop_flat_map(|(m, n)| {
        prop::collection::vec(-2.0f64..2.0, m * n).prop_map(move |e| matrix(m, n, &e))
    })
}

fn points(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec((-1.0f64..1.0).prop_map(|x| vec![x]), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pushing_never_raises_u(
        a in prop::collection::vec(-1.0f64..1.0, 3 * 8),
        b in prop::collection::vec(-1.0f64..1.0, 5 * 8),
        eps in 1e-3f64..1.0,
        xs in points(20),
    ) {
        let basis = make_chebyshev_basis(8, -1.0, 1.0).unwrap();
        let s0 = stack_init(1e6, 0.5, PruneMode::KeepAll).unwrap();
        let s1 = s0.push(&matrix(3, 8, &a), eps).unwrap();
        let s2 = s1.push(&matrix(5, 8, &b), eps).unwrap();
        for x in &xs {
            let (u0, u1, u2) = (
                s0.u_eval(&basis, x).unwrap(),
                s1.u_eval(&basis, x).unwrap(),
                s2.u_eval(&basis, x).unwrap(),
            );
            prop_assert!(u1 <= u0 && u2 <= u1);
        }
    }

    #[test]
    fn single_exact_factor_reproduces_k_eps(n in 2usize..9, eps in 1e-6f64..0.5, xs in points(10)) {
        let basis = make_chebyshev_basis(n, -1.0, 1.0).unwrap();
        let gram = gram_quadrature(&basis).unwrap();
        let root = gram.root().unwrap().clone();
        let stack = stack_init(f64::MAX, 0.0, PruneMode::KeepAll).unwrap().push(&root, eps).unwrap();
        let k = InverseChristoffel::new(&basis, &gram, eps).unwrap();
        for x in &xs {
            let (u, kx) = (stack.u_eval(&basis, x).unwrap(), k.eval(x).unwrap());
            prop_assert!((u - kx).abs() <= 1e-9 * kx, "{u} vs {kx}");
        }
    }

    #[test]
    fn pruned_stack_dominates_full_stack(
        blocks in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2 * 4), 1..6),
        xs in points(10),
    ) {
        let basis = make_chebyshev_basis(4, -1.0, 1.0).unwrap();
        let mut full = stack_init(1e3, 0.5, PruneMode::KeepAll).unwrap();
        let mut pruned = stack_init(1e3, 0.5, PruneMode::FirstPlusLastTwo).unwrap();
        for b in &blocks {
            full.push_mut(&matrix(2, 4, b), 0.1).unwrap();
            pruned.push_mut(&matrix(2, 4, b), 0.1).unwrap();
        }
        prop_assert!(pruned.factors().len() <= 3);
        for x in &xs {
            prop_assert!(pruned.u_eval(&basis, x).unwrap() >= full.u_eval(&basis, x).unwrap());
        }
    }

    #[test]
    fn weighting_never_raises_numerical_dimension(
        levels in prop::collection::vec(0.0f64..1.0, 4),
        eps in 1e-8f64..1e-2,
    ) {
        let base = make_weighted_poly_basis(4, 4, |x| (x + 1.0).sqrt()).unwrap();
        let inner = base.clone();
        let steps = levels.clone();
        let weighted = BasisSet::from_fn(8, Field::Real, base.domain().clone(), "weighted", move |x, out| {
            inner.eval_into(x, out);
            let piece = (((x[0] + 1.0) * 2.0).floor() as usize).min(3);
            out.iter_mut().for_each(|o| *o *= steps[piece]);
        });
        let full = numerical_dimension(&gram_quadrature(&base).unwrap(), eps).unwrap();
        let reduced = numerical_dimension(&gram_quadrature(&weighted).unwrap(), eps).unwrap();
        prop_assert!(reduced <= full + 1e-8);
    }

    #[test]
    fn scaling_lemma(
        b in prop::collection::vec(-1.0f64..1.0, 5 * 3),
        beta in 1.0f64..20.0,
        eps in 1e-3f64..1.0,
        phi in prop::collection::vec(-2.0f64..2.0, 5),
    ) {
        let b = matrix(5, 3, &b);
        let m = &b * b.adjoint();
        let phi: Vec<C64> = phi.iter().map(|v| C64::new(*v, 0.0)).collect();
        let g = GramMatrix::from_entries(m.clone(), GramSource::Supplied).unwrap();
        let gb = GramMatrix::from_entries(&m * C64::new(beta, 0.0), GramSource::Supplied).unwrap();
        let lhs = k_eps_phi(&phi, &g, eps).unwrap();
        let rhs = beta * k_eps_phi(&phi, &gb, eps).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn sandwich_bounds(mix in prop::collection::vec(-0.3f64..0.3, 16), eps in 0.01f64..0.5, xs in points(20)) {
        let cheb = make_chebyshev_basis(4, -1.0, 1.0).unwrap();
        let m = CMatrix::identity(4, 4) + matrix(4, 4, &mix);
        let inner = cheb.clone();
        let basis = BasisSet::from_fn(4, Field::Real, cheb.domain().clone(), "mixed", move |x, out| {
            let mut t = vec![C64::new(0.0, 0.0); 4];
            inner.eval_into(x, &mut t);
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..4).map(|j| m[(i, j)] * t[j]).sum();
            }
        });
        let gram = gram_quadrature(&basis).unwrap();
        let lambda_min = hermitian_eigenvalues(gram.entries())[0];
        let shrink = 1.0 / (1.0 + eps * eps / lambda_min);
        let k_eps = InverseChristoffel::new(&basis, &gram, eps).unwrap();
        let k_tiny = InverseChristoffel::new(&basis, &gram, 1e-12).unwrap();
        for x in &xs {
            let (ke, kn) = (k_eps.eval(x).unwrap(), k_tiny.eval(x).unwrap());
            prop_assert!(shrink * kn <= ke * (1.0 + 1e-9) && ke <= kn * (1.0 + 1e-9));
        }
        let ne = numerical_dimension(&gram, eps).unwrap();
        prop_assert!(shrink * 4.0 <= ne + 1e-10 && ne <= 4.0);
    }

    #[test]
    fn leverage_scores_are_below_one_and_sum_to_n_eps(a in tall_matrix(), eps in 0.01f64..2.0) {
        let p = ridge_leverage_scores(&a, eps).unwrap();
        prop_assert!(p.scores.iter().all(|s| *s >= 0.0 && *s < 1.0 - 1e-12));
        let total: f64 = p.scores.iter().sum();
        prop_assert!((total - p.n_eps_matrix).abs() <= 1e-10 * (1.0 + total));
    }

    #[test]
    fn shrinking_weights_shrinks_numerical_dimension(
        a in tall_matrix(),
        seeds in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 12),
    ) {
        let m = a.nrows();
        let w: Vec<f64> = seeds[..m].iter().map(|(p, _)| *p).collect();
        let w2: Vec<f64> = seeds[..m].iter().map(|(p, q)| p * q).collect();
        let hi = matrix_numerical_dimension(&scale_rows(&a, &w), 0.3);
        let lo = matrix_numerical_dimension(&scale_rows(&a, &w2), 0.3);
        prop_assert!(lo <= hi + 1e-12);
    }

    #[test]
    fn whack_a_mole_is_idempotent(a in tall_matrix(), u in prop::collection::vec(0.05f64..1.2, 12)) {
        let u = &u[..a.nrows()];
        let first = whack_a_mole(&a, u, 0.5, 1e-10, 500).unwrap();
        let again = whack_a_mole_from(&a, u, 0.5, 1e-10, 500, first.diag_weights.clone()).unwrap();
        for (x, y) in first.diag_weights.iter().zip(&again.diag_weights) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn fit_minimizes_the_discrete_objective(
        xs in points(30),
        direction in prop::collection::vec(-1.0f64..1.0, 6),
        eps in prop_oneof![Just(0.0), 1e-6f64..1e-1],
    ) {
        let basis = make_chebyshev_basis(6, -1.0, 1.0).unwrap();
        let m = xs.len();
        let batch = make_batch_from_values(xs, vec![1.0; m], 1.0, WeightRule::Normalized, String::new()).unwrap();
        let f = |x: &[f64]| (3.0 * x[0]).sin() + x[0].abs();
        let fitted = fit(&basis, f, &batch, eps).unwrap();
        let best = discrete_objective(&basis, f, &batch, &fitted.coefficients, eps);
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let perturbed: Vec<C64> = fitted
            .coefficients
            .iter()
            .zip(&direction)
            .map(|(c, d)| c + C64::new(1e-3 * d / norm, 0.0))
            .collect();
        let other = discrete_objective(&basis, f, &batch, &perturbed, eps);
        prop_assert!(other >= best - 1e-12 * (1.0 + best));
    }

    #[test]
    fn evaluation_matrix_reproduces_weighted_gram(xs in points(15), us in prop::collection::vec(0.1f64..10.0, 15)) {
        let basis = make_chebyshev_basis(5, -1.0, 1.0).unwrap();
        for mode in [RcsMode::Practical, RcsMode::Faithful] {
            let a = build_a(&basis, &xs, &us, 5.0, 20.0, mode).unwrap();
            let log = if mode == RcsMode::Faithful { 20f64.ln() } else { 1.0 };
            let mut direct = CMatrix::zeros(5, 5);
            for (x, u) in xs.iter().zip(&us) {
                let phi = nalgebra::DVector::from_vec(basis.eval(x).unwrap());
                direct += &phi * phi.adjoint() * C64::new(1.0 / (5.0 * u * log), 0.0);
            }
            let diff = (a.adjoint() * &a - direct).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-12);
        }
    }
}
