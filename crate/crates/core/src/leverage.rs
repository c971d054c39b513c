//! Ridge leverage scores of tall matrices and the whack-a-mole reweighting.
//!
//! For a matrix `A` with rows `a_k` the ridge leverage score is
//! `τ_k = a_k (A*A + ε²I)⁻¹ a_k*`. Whack-a-mole shrinks row weights `W_kk`
//! until every score of `WA` sits below a prescribed target `u_k`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

const BISECTION_STEPS: usize = 60;
/// Rows probed by the monotonicity spot check.
const SPOT_CHECK_ROWS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageProfile {
    pub scores: Vec<f64>,
    pub n_eps_matrix: f64,
    pub matrix_digest: String,
}

pub fn matrix_digest(a: &CMatrix) -> String {
    let mut h = Sha256::new();
    h.update((a.nrows() as u64).to_le_bytes());
    h.update((a.ncols() as u64).to_le_bytes());
    for z in a.iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("eps must be positive, got {eps}")))
    }
}

/// `n^ε(A) = Σ σ_i² / (σ_i² + ε²)`.
pub fn matrix_numerical_dimension(a: &CMatrix, eps: f64) -> f64 {
    let e2 = eps * eps;
    linalg::singular_values(a)
        .iter()
        .map(|s| s * s / (s * s + e2))
        .sum()
}

/// Scores from one factorization `R*R = A*A + ε²I` and `m` forward solves.
pub fn ridge_leverage_scores(a: &CMatrix, eps: f64) -> Result<LeverageProfile> {
    check_eps(eps)?;
    let n = a.ncols();
    let mut stacked = CMatrix::zeros(a.nrows() + n, n);
    stacked.rows_mut(0, a.nrows()).copy_from(a);
    for i in 0..n {
        stacked[(a.nrows() + i, i)] = C64::new(eps, 0.0);
    }
    let r = linalg::triangular_factor(stacked, n);
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut work = vec![C64::new(0.0, 0.0); n];
    let scores = a
        .row_iter()
        .map(|row| {
            for (vi, ai) in v.iter_mut().zip(row.iter()) {
                *vi = ai.conj();
            }
            linalg::rstar_solve_norm_sqr(&r, &v, &mut work)
        })
        .collect();
    Ok(LeverageProfile {
        scores,
        n_eps_matrix: matrix_numerical_dimension(a, eps),
        matrix_digest: matrix_digest(a),
    })
}

/// `diag(w) A`.
pub fn scale_rows(a: &CMatrix, weights: &[f64]) -> CMatrix {
    let mut out = a.clone();
    for (k, &w) in weights.iter().enumerate() {
        out.row_mut(k).scale_mut(w);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrixResult {
    pub diag_weights: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// `M = (WA)*(WA) + ε²I` maintained under rank-one weight changes.
struct Moment {
    rows: Vec<DVector<C64>>,
    m: CMatrix,
}

impl Moment {
    fn new(a: &CMatrix, weights: &[f64], eps: f64) -> Self {
        let n = a.ncols();
        let rows: Vec<DVector<C64>> = a.row_iter().map(|r| r.adjoint()).collect();
        let mut m = CMatrix::from_diagonal_element(n, n, C64::new(eps * eps, 0.0));
        for (v, &w) in rows.iter().zip(weights) {
            m += v * v.adjoint() * C64::new(w * w, 0.0);
        }
        Moment { rows, m }
    }

    fn update(&mut self, k: usize, old: f64, new: f64) {
        let v = &self.rows[k];
        self.m += v * v.adjoint() * C64::new(new * new - old * old, 0.0);
    }

    /// `s_k = v_k* B⁻¹ v_k` with row `k` removed from `M`.
    fn leave_one_out(&self, k: usize, w: f64) -> Result<f64> {
        let v = &self.rows[k];
        let b = &self.m - v * v.adjoint() * C64::new(w * w, 0.0);
        let chol = b
            .cholesky()
            .ok_or_else(|| Error::Numerical("leave-one-out moment is not positive definite".into()))?;
        let y = chol.solve(v);
        Ok(v.dotc(&y).re.max(0.0))
    }
}

/// Score of row `k` as a function of its own weight, others fixed.
fn score_at(w: f64, s: f64) -> f64 {
    let t = w * w * s;
    t / (1.0 + t)
}

/// Shrinks row weights until `τ_k(WA) ≤ u_k` for every row.
///
/// Rows are swept in order; a row whose score reaches its target has its
/// weight reduced by bisection on `[0, W_kk]` so that the score equals the
/// target. Stops once a full sweep moves no weight by more than `tol`.
pub fn whack_a_mole(
    a: &CMatrix,
    u: &[f64],
    eps: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<WeightMatrixResult> {
    whack_a_mole_from(a, u, eps, tol, max_sweeps, vec![1.0; a.nrows()])
}

/// As [`whack_a_mole`], starting from given weights in `[0, 1]`.
pub fn whack_a_mole_from(
    a: &CMatrix,
    u: &[f64],
    eps: f64,
    tol: f64,
    max_sweeps: usize,
    mut weights: Vec<f64>,
) -> Result<WeightMatrixResult> {
    check_eps(eps)?;
    if u.len() != a.nrows() || weights.len() != a.nrows() {
        return Err(Error::Argument(format!(
            "matrix has {} rows but {} targets and {} weights",
            a.nrows(),
            u.len(),
            weights.len()
        )));
    }
    if let Some(bad) = u.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Argument(format!("targets must be positive, got {bad}")));
    }
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::Argument("initial weights must lie in [0, 1]".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument("tol must be positive".into()));
    }
    let mut moment = Moment::new(a, &weights, eps);
    for sweep in 1..=max_sweeps {
        let mut largest_change = 0.0f64;
        for k in 0..a.nrows() {
            let w = weights[k];
            if w == 0.0 || u[k] >= 1.0 {
                continue;
            }
            let s = moment.leave_one_out(k, w)?;
            if score_at(w, s) < u[k] {
                continue;
            }
            let (mut lo, mut hi) = (0.0, w);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if score_at(mid, s) > u[k] {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            // Keep the lower end so the score never exceeds its target.
            let new = lo;
            largest_change = largest_change.max(w - new);
            moment.update(k, w, new);
            weights[k] = new;
        }
        if largest_change <= tol {
            return Ok(WeightMatrixResult {
                diag_weights: weights,
                converged: true,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NonConvergence {
        sweeps: max_sweeps,
        weights,
    })
}

/// Outcome of checking the two whack-a-mole guarantees and the monotonicity
/// fact behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightingReport {
    /// `max_k τ_k(WA) − u_k`.
    pub max_excess: f64,
    pub scores_bounded: bool,
    /// `Σ u_k` over rows with `W_kk < 1 − tol`.
    pub reweighted_mass: f64,
    pub n_eps_matrix: f64,
    pub mass_bounded: bool,
    pub monotone: bool,
    pub violations: Vec<String>,
}

impl ReweightingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `τ_k(WA) ≤ u_k + tol` for all `k`, `Σ_{W_kk<1−tol} u_k ≤ n^ε(A)`,
/// and that halving one weight never lowers another row's score.
pub fn verify_reweighting(
    a: &CMatrix,
    u: &[f64],
    eps: f64,
    tol: f64,
    result: &WeightMatrixResult,
) -> Result<ReweightingReport> {
    let mut violations = Vec::new();
    if !result.converged {
        violations.push("weights did not converge".to_string());
    }
    let wa = scale_rows(a, &result.diag_weights);
    let scores = ridge_leverage_scores(&wa, eps)?.scores;
    let max_excess = scores
        .iter()
        .zip(u)
        .map(|(t, u)| t - u)
        .fold(f64::NEG_INFINITY, f64::max);
    let scores_bounded = max_excess <= tol;
    if !scores_bounded {
        violations.push(format!("score exceeds its target by {max_excess:e}"));
    }
    let reweighted_mass: f64 = result
        .diag_weights
        .iter()
        .zip(u)
        .filter(|(w, _)| **w < 1.0 - tol)
        .map(|(_, u)| u)
        .sum();
    let n_eps_matrix = matrix_numerical_dimension(a, eps);
    let mass_bounded = reweighted_mass <= n_eps_matrix;
    if !mass_bounded {
        violations.push(format!(
            "reweighted mass {reweighted_mass} exceeds n_eps {n_eps_matrix}"
        ));
    }

    let mut monotone = true;
    let step = (a.nrows() / SPOT_CHECK_ROWS).max(1);
    for j in (0..a.nrows()).step_by(step).take(SPOT_CHECK_ROWS) {
        let mut w = result.diag_weights.clone();
        w[j] *= 0.5;
        let perturbed = ridge_leverage_scores(&scale_rows(a, &w), eps)?.scores;
        for (k, (after, before)) in perturbed.iter().zip(&scores).enumerate() {
            if k != j && *after < before - 1e-12 * (1.0 + before.abs()) {
                monotone = false;
                violations.push(format!(
                    "halving row {j} lowered the score of row {k}: {before} -> {after}"
                ));
            }
        }
    }

    Ok(ReweightingReport {
        max_excess,
        scores_bounded,
        reweighted_mass,
        n_eps_matrix,
        mass_bounded,
        monotone,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    #[test]
    fn identity_scores() {
        let p = ridge_leverage_scores(&real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]), 1.0).unwrap();
        assert!(p.scores.iter().all(|s| (s - 0.5).abs() < 1e-15));
        assert!((p.n_eps_matrix - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_scores() {
        let p = ridge_leverage_scores(&real_matrix(1, 1, &[2.0]), 1.0).unwrap();
        assert!((p.scores[0] - 0.8).abs() < 1e-15);
        assert!((p.n_eps_matrix - 0.8).abs() < 1e-15);
    }

    #[test]
    fn symmetric_fixed_point() {
        let a = real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let r = whack_a_mole(&a, &[0.3, 0.3], 1.0, 1e-10, 500).unwrap();
        let expected = (3.0f64 / 7.0).sqrt();
        assert!(r.diag_weights.iter().all(|w| (w - expected).abs() < 1e-8));
        let report = verify_reweighting(&a, &[0.3, 0.3], 1.0, 1e-10, &r).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!((report.reweighted_mass - 0.6).abs() < 1e-15);
    }

    #[test]
    fn large_targets_leave_weights_alone() {
        let a = real_matrix(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.1]);
        let r = whack_a_mole(&a, &[1.0, 1.5, 2.0], 0.5, 1e-10, 500).unwrap();
        assert_eq!(r.diag_weights, vec![1.0; 3]);
        assert_eq!(r.sweeps, 1);
        let report = verify_reweighting(&a, &[1.0, 1.5, 2.0], 0.5, 1e-10, &r).unwrap();
        assert_eq!(report.reweighted_mass, 0.0);
        assert!(report.passed());
    }

    #[test]
    fn single_row_activation() {
        let a = real_matrix(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.1]);
        let u = [1e-3, 1e6, 1e6];
        let r = whack_a_mole(&a, &u, 0.5, 1e-10, 500).unwrap();
        assert!(r.diag_weights[0] < 1.0);
        assert_eq!(&r.diag_weights[1..], &[1.0, 1.0]);
    }

    #[test]
    fn non_positive_targets_are_rejected() {
        let a = real_matrix(1, 1, &[1.0]);
        assert!(whack_a_mole(&a, &[0.0], 1.0, 1e-10, 10).is_err());
    }
}
