//! Ridge-regularized weighted least squares and L²_ρ error metrics.
//!
//! Every solve goes through the triangular factor of the augmented matrix
//! `[diag(√w)Φ | √w f ; εI | 0]`, so the normal equations are never formed.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{elliptic_curve, BasisSet};
use crate::error::{Error, Result};
use crate::linalg::{RAccumulator, C64};
use crate::sampler::SampleBatch;

const CHUNK: usize = 4096;

/// Real-valued target function.
pub type Target = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `f(x) = √(x+1)/(1+5x²) + cos(5x)` on `[-1, 1]`.
pub fn sumframe_target(x: f64) -> f64 {
    (x + 1.0).max(0.0).sqrt() / (1.0 + 5.0 * x * x) + (5.0 * x).cos()
}

/// `f(x) = √x` on `[0, 1]`.
pub fn sqrt_target(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

/// Built-in targets selectable by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    Sumframe,
    Sqrt,
    Zero,
    Constant { value: f64 },
    /// Real part of the basis function with the given (zero-based) index.
    BasisFunction { index: usize },
    /// `Σ_d sin(2π x_d)`: smooth and periodic, for surfaces and tori.
    SineSum,
    /// `exp(−|x|²)` in any dimension.
    Gaussian,
    /// `√|Q(x, y)|`, singular along the elliptic curve of the 2D lightning basis.
    EllipticSqrt,
}

impl TargetSpec {
    pub fn build(&self, basis: &BasisSet) -> Result<Target> {
        Ok(match *self {
            TargetSpec::Sumframe => Arc::new(|x: &[f64]| sumframe_target(x[0])),
            TargetSpec::Sqrt => Arc::new(|x: &[f64]| sqrt_target(x[0])),
            TargetSpec::Zero => Arc::new(|_: &[f64]| 0.0),
            TargetSpec::Constant { value } => Arc::new(move |_: &[f64]| value),
            TargetSpec::BasisFunction { index } => {
                if index >= basis.n() {
                    return Err(Error::Argument(format!(
                        "basis function {index} requested but the basis has {}",
                        basis.n()
                    )));
                }
                let basis = basis.clone();
                Arc::new(move |x: &[f64]| {
                    let mut phi = vec![C64::new(0.0, 0.0); basis.n()];
                    basis.eval_into(x, &mut phi);
                    phi[index].re
                })
            }
            TargetSpec::SineSum => Arc::new(|x: &[f64]| {
                x.iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).sum()
            }),
            TargetSpec::Gaussian => {
                Arc::new(|x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>()).exp())
            }
            TargetSpec::EllipticSqrt => {
                if basis.domain().dim() != 2 {
                    return Err(Error::Argument("elliptic-sqrt needs a 2D domain".into()));
                }
                Arc::new(|x: &[f64]| elliptic_curve(x[0], x[1]).abs().sqrt())
            }
        })
    }
}

/// Coefficients of a regularized weighted fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: Vec<C64>,
    pub eps_used: f64,
    /// `(Σ w_k |f(x_k) − Σ c_i φ_i(x_k)|²)^{1/2}`, without the ridge term.
    pub residual_norm: f64,
    pub design_digest: String,
}

/// Triangular factor `[[R, z], [0, ρ]]` of the augmented ridge system.
fn augmented_factor<'a, F>(basis: &BasisSet, count: usize, eps: f64, row: F) -> nalgebra::DMatrix<C64>
where
    F: Fn(usize) -> (&'a [f64], f64, f64) + Sync,
{
    let n = basis.n();
    let chunks: Vec<(usize, usize)> = (0..count)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(count)))
        .collect();
    let partial: Vec<_> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = RAccumulator::new(n + 1);
            let mut phi = vec![C64::new(0.0, 0.0); n];
            let mut buf = vec![C64::new(0.0, 0.0); n + 1];
            for k in start..end {
                let (x, w, f) = row(k);
                basis.eval_into(x, &mut phi);
                let s = w.sqrt();
                for (b, p) in buf.iter_mut().zip(&phi) {
                    *b = p * s;
                }
                buf[n] = C64::new(f * s, 0.0);
                acc.push_row(&buf);
            }
            acc.finish()
        })
        .collect();
    let mut acc = RAccumulator::new(n + 1);
    for r in &partial {
        acc.push_block(r);
    }
    if eps > 0.0 {
        let mut ridge = nalgebra::DMatrix::zeros(n, n + 1);
        for i in 0..n {
            ridge[(i, i)] = C64::new(eps, 0.0);
        }
        acc.push_block(&ridge);
    }
    acc.finish()
}

/// Solves `R c = z` from the augmented factor; a truncated SVD when `ε = 0`.
fn solve_augmented(aug: &nalgebra::DMatrix<C64>, eps: f64) -> Result<Vec<C64>> {
    let n = aug.ncols() - 1;
    let r = aug.view((0, 0), (n, n)).into_owned();
    let z = aug.view((0, n), (n, 1)).into_owned();
    if r.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        return Err(Error::Data("design matrix is identically zero".into()));
    }
    let c = if eps > 0.0 {
        r.solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("singular ridge factor".into()))?
    } else {
        let svd = r.svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * n as f64 * f64::EPSILON;
        svd.solve(&z, tol).map_err(|e| Error::Numerical(e.to_string()))?
    };
    if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("non-finite coefficients".into()));
    }
    Ok(c.iter().copied().collect())
}

/// Weighted residual `(Σ w |f − Φc|²)^{1/2}` over a point set.
fn weighted_residual<'a, F>(basis: &BasisSet, coeffs: &[C64], count: usize, row: F) -> f64
where
    F: Fn(usize) -> (&'a [f64], f64, f64) + Sync,
{
    let n = basis.n();
    let total: f64 = (0..count)
        .into_par_iter()
        .map_init(
            || vec![C64::new(0.0, 0.0); n],
            |phi, k| {
                let (x, w, f) = row(k);
                basis.eval_into(x, phi);
                let v: C64 = phi.iter().zip(coeffs).map(|(p, c)| p * c).sum();
                w * (C64::new(f, 0.0) - v).norm_sqr()
            },
        )
        .sum();
    total.sqrt()
}

fn batch_digest(basis: &BasisSet, batch: &SampleBatch) -> String {
    let mut h = Sha256::new();
    h.update(basis.label().as_bytes());
    for (x, w) in batch.points.iter().zip(&batch.weights) {
        for v in x {
            h.update(v.to_le_bytes());
        }
        h.update(w.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// `ĉ ∈ argmin Σ_k w_k |f(x_k) − Σ c_i φ_i(x_k)|² + ε²‖c‖²`.
pub fn fit<F>(basis: &BasisSet, f: F, batch: &SampleBatch, eps: f64) -> Result<FitResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if batch.is_empty() {
        return Err(Error::Argument("cannot fit from an empty batch".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::Argument(format!("eps must be nonnegative, got {eps}")));
    }
    if batch.dim() != basis.domain().dim() {
        return Err(Error::Data(format!(
            "batch points have dimension {} but the basis lives in dimension {}",
            batch.dim(),
            basis.domain().dim()
        )));
    }
    let values: Vec<f64> = batch.points.par_iter().map(|x| f(x)).collect();
    let row = |k: usize| (&batch.points[k][..], batch.weights[k], values[k]);
    let aug = augmented_factor(basis, batch.len(), eps, row);
    let coefficients = solve_augmented(&aug, eps)?;
    let residual_norm = weighted_residual(basis, &coefficients, batch.len(), row);
    Ok(FitResult {
        coefficients,
        eps_used: eps,
        residual_norm,
        design_digest: batch_digest(basis, batch),
    })
}

/// Regularized discrete objective `Σ w |f − Φc|² + ε²‖c‖²`.
pub fn discrete_objective<F>(
    basis: &BasisSet,
    f: F,
    batch: &SampleBatch,
    coeffs: &[C64],
    eps: f64,
) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = basis.n();
    let data: f64 = batch
        .points
        .par_iter()
        .zip(&batch.weights)
        .map_init(
            || vec![C64::new(0.0, 0.0); n],
            |phi, (x, w)| {
                basis.eval_into(x, phi);
                let v: C64 = phi.iter().zip(coeffs).map(|(p, c)| p * c).sum();
                w * (C64::new(f(x), 0.0) - v).norm_sqr()
            },
        )
        .sum();
    data + eps * eps * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// `‖f − Re Σ c_i φ_i‖_{L²_ρ}` by the domain's quadrature.
pub fn l2_error<F>(basis: &BasisSet, coeffs: &[C64], f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if coeffs.len() != basis.n() {
        return Err(Error::Argument(format!(
            "{} coefficients for a basis of {} functions",
            coeffs.len(),
            basis.n()
        )));
    }
    let quad = basis
        .domain()
        .quadrature()
        .ok_or_else(|| Error::Capability(format!("no quadrature for {}", basis.domain().label())))?;
    let n = basis.n();
    let squares: Vec<f64> = (0..quad.len())
        .into_par_iter()
        .map_init(
            || vec![C64::new(0.0, 0.0); n],
            |phi, q| {
                let x = quad.node(q);
                basis.eval_into(x, phi);
                let v: C64 = phi.iter().zip(coeffs).map(|(p, c)| p * c).sum();
                (f(x) - v.re).powi(2)
            },
        )
        .collect();
    Ok(quad.mean_of(&squares).max(0.0).sqrt())
}

/// ε-regularized continuous projection of `f`, with its L²_ρ error.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFit {
    pub coefficients: Vec<C64>,
    pub error: f64,
    pub coefficient_norm: f64,
}

/// Solves `min ‖f − Φc‖²_{L²_ρ} + ε²‖c‖²` over the domain's quadrature.
///
/// Equivalent to `(G + ε²I)c = b` with `b_i = ⟨f, φ_i⟩`, but computed from a
/// QR factorization so it stays accurate when `G` is numerically singular.
pub fn oracle_fit<F>(basis: &BasisSet, f: F, eps: f64) -> Result<OracleFit>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(eps >= 0.0) {
        return Err(Error::Argument(format!("eps must be nonnegative, got {eps}")));
    }
    let quad = basis
        .domain()
        .quadrature()
        .ok_or_else(|| Error::Capability(format!("no quadrature for {}", basis.domain().label())))?;
    let values: Vec<f64> = (0..quad.len()).into_par_iter().map(|q| f(quad.node(q))).collect();
    let aug = augmented_factor(basis, quad.len(), eps, |q| {
        (quad.node(q), quad.weight(q), values[q])
    });
    let coefficients = solve_augmented(&aug, eps)?;
    let error = l2_error(basis, &coefficients, &f)?;
    let coefficient_norm = coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(OracleFit {
        coefficients,
        error,
        coefficient_norm,
    })
}

/// Error of the ε-regularized best approximation; see [`oracle_fit`].
pub fn oracle_best_error<F>(basis: &BasisSet, f: F, eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(oracle_fit(basis, f, eps)?.error)
}

/// `‖f‖_{L²_ρ}`.
pub fn l2_norm<F>(basis: &BasisSet, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    l2_error(basis, &vec![C64::new(0.0, 0.0); basis.n()], f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_chebyshev_basis, make_constant_basis, make_lightning_basis};
    use crate::domain::Domain;
    use crate::sampler::{make_batch_from_values, WeightRule};

    fn uniform_batch(points: Vec<Vec<f64>>) -> SampleBatch {
        let m = points.len();
        make_batch_from_values(points, vec![1.0; m], 1.0, WeightRule::Normalized, String::new())
            .unwrap()
    }

    fn grid(a: f64, b: f64, m: usize) -> Vec<Vec<f64>> {
        (0..m).map(|k| vec![a + (b - a) * (k as f64 + 0.5) / m as f64]).collect()
    }

    #[test]
    fn representable_target_is_recovered() {
        let basis = make_constant_basis(Domain::interval(0.0, 1.0));
        let batch = uniform_batch(grid(0.0, 1.0, 7));
        let fit = fit(&basis, |_: &[f64]| 1.0, &batch, 0.0).unwrap();
        assert!((fit.coefficients[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
        assert!(l2_error(&basis, &fit.coefficients, |_: &[f64]| 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn zero_target_gives_zero_coefficients() {
        let basis = make_chebyshev_basis(5, -1.0, 1.0).unwrap();
        let batch = uniform_batch(grid(-1.0, 1.0, 20));
        let fit = fit(&basis, |_: &[f64]| 0.0, &batch, 1e-8).unwrap();
        assert!(fit.coefficients.iter().all(|c| *c == C64::new(0.0, 0.0)));
    }

    #[test]
    fn ridge_shrinkage() {
        let basis = make_constant_basis(Domain::interval(0.0, 1.0));
        let batch = uniform_batch(grid(0.0, 1.0, 4));
        let fit = fit(&basis, |_: &[f64]| 1.0, &batch, 1.0).unwrap();
        assert!((fit.coefficients[0].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn zero_design_is_a_data_error() {
        let basis = BasisSet::from_fn(
            2,
            crate::basis::Field::Real,
            Domain::interval(0.0, 1.0),
            "zero",
            |_, out| out.fill(C64::new(0.0, 0.0)),
        );
        let batch = uniform_batch(grid(0.0, 1.0, 4));
        assert!(matches!(fit(&basis, |_: &[f64]| 1.0, &batch, 0.0), Err(Error::Data(_))));
    }

    #[test]
    fn l2_error_of_unit_target() {
        let basis = make_constant_basis(Domain::interval(0.0, 1.0));
        let e = l2_error(&basis, &[C64::new(0.0, 0.0)], |_: &[f64]| 1.0).unwrap();
        assert!((e - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_examples() {
        let basis = make_chebyshev_basis(6, -1.0, 1.0).unwrap();
        let e = oracle_best_error(&basis, |x: &[f64]| 3.0 * x[0].powi(3) - x[0], 0.0).unwrap();
        assert!(e < 1e-10);
        // x − 1/2 is orthogonal to the constants on [0, 1].
        let basis = make_constant_basis(Domain::interval(0.0, 1.0));
        let f = |x: &[f64]| x[0] - 0.5;
        let e = oracle_best_error(&basis, f, 0.0).unwrap();
        let norm = l2_norm(&basis, f).unwrap();
        assert!((e - norm).abs() < 1e-12);
        assert!((norm - (1.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lightning_oracle_error_decreases() {
        let small = make_lightning_basis(10, 7).unwrap();
        let large = make_lightning_basis(20, 9).unwrap();
        let f = |x: &[f64]| sqrt_target(x[0]);
        let e1 = oracle_best_error(&small, f, 1e-13).unwrap();
        let e2 = oracle_best_error(&large, f, 1e-13).unwrap();
        assert!(e2 < e1, "{e2} !< {e1}");
    }
}
