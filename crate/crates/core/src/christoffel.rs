//! Gram matrices, numerical dimension and the numerical inverse Christoffel
//! function `k^ε(x) = φ(x)*(G + ε²I)⁻¹φ(x)`.
//!
//! Two evaluation paths share the same triangular-solve kernel:
//!
//! - the oracle path, where `G` comes from quadrature or a dense Monte Carlo
//!   grid, and
//! - the [`RFactorStack`] path used by the refinement loop, where each factor
//!   `R` satisfies `R*R = A*A + ε²I` for a sampled matrix `A`.
//!
//! Quadratic forms are never formed through explicit inverses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RAccumulator, C64};
use crate::sampler::PositiveFunction;

/// Points per parallel chunk when streaming evaluations through QR.
const CHUNK: usize = 4096;

/// Relative tolerance for Hermitian symmetry of supplied matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GramSource {
    ExactQuadrature,
    DenseGrid { points: usize },
    WeightedSample { points: usize },
    Supplied,
}

/// Hermitian positive semidefinite matrix of `L²_ρ` inner products.
///
/// When the matrix was assembled from weighted point evaluations, the
/// triangular square root `root` (`root* root = G`) is kept as well; it makes
/// `G + ε²I` factorizable to full accuracy even when `G` is numerically singular.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: CMatrix,
    source: GramSource,
    root: Option<CMatrix>,
}

impl GramMatrix {
    /// Wraps a supplied matrix after checking that it is Hermitian.
    pub fn from_entries(entries: CMatrix, source: GramSource) -> Result<Self> {
        linalg::check_hermitian(&entries, HERMITIAN_TOL)?;
        Ok(GramMatrix {
            entries,
            source,
            root: None,
        })
    }

    /// Builds `G = root* root` from a triangular square root.
    pub fn from_root(root: CMatrix, source: GramSource) -> Self {
        let n = root.ncols();
        let product = root.adjoint() * &root;
        let mut entries = CMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = if i == j {
                    C64::new(product[(i, i)].re, 0.0)
                } else {
                    product[(i, j)]
                };
                entries[(i, j)] = v;
                entries[(j, i)] = v.conj();
            }
        }
        GramMatrix {
            entries,
            source,
            root: Some(root),
        }
    }

    /// `G = Σ_k w_k φ(x_k) φ(x_k)*`.
    pub fn from_weighted_points(
        basis: &BasisSet,
        points: &[Vec<f64>],
        weights: &[f64],
        source: GramSource,
    ) -> Self {
        assert_eq!(points.len(), weights.len());
        let root = weighted_root(basis, points.len(), |k| (&points[k][..], weights[k]));
        GramMatrix::from_root(root, source)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn source(&self) -> &GramSource {
        &self.source
    }

    pub fn root(&self) -> Option<&CMatrix> {
        self.root.as_ref()
    }

    /// Eigenvalues, ascending, with tiny negative values clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eigs = match &self.root {
            Some(root) => linalg::singular_values(root)
                .into_iter()
                .map(|s| s * s)
                .collect(),
            None => linalg::hermitian_eigenvalues(&self.entries),
        };
        for e in &mut eigs {
            *e = e.max(0.0);
        }
        eigs.sort_by(|a, b| a.total_cmp(b));
        eigs
    }

    /// Upper-triangular `R` with `R*R = G + ε²I`.
    pub fn regularized_factor(&self, eps: f64) -> Result<CMatrix> {
        if !(eps > 0.0) {
            return Err(Error::Argument(format!("eps must be positive, got {eps}")));
        }
        let n = self.n();
        match &self.root {
            Some(root) => {
                let mut acc = RAccumulator::new(n);
                acc.push_block(root);
                acc.push_ridge(eps);
                Ok(acc.finish())
            }
            None => {
                let shifted = &self.entries
                    + CMatrix::from_diagonal_element(n, n, C64::new(eps * eps, 0.0));
                let lower = linalg::cholesky_lower(&shifted).map_err(|_| {
                    Error::Numerical(format!(
                        "G + eps^2 I is not positive definite (eps = {eps:e})"
                    ))
                })?;
                Ok(lower.adjoint())
            }
        }
    }
}

/// Streams `√w_k · conj(φ(x_k))ᵀ` rows through QR in parallel chunks.
///
/// Chunks are combined in order, so the result is deterministic.
pub(crate) fn weighted_root<'a, F>(basis: &BasisSet, count: usize, point: F) -> CMatrix
where
    F: Fn(usize) -> (&'a [f64], f64) + Sync,
{
    let n = basis.n();
    let chunks: Vec<(usize, usize)> = (0..count)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK).min(count)))
        .collect();
    let partial: Vec<CMatrix> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = RAccumulator::new(n);
            let mut phi = vec![C64::new(0.0, 0.0); n];
            for k in start..end {
                let (x, w) = point(k);
                basis.eval_into(x, &mut phi);
                let s = w.sqrt();
                for v in phi.iter_mut() {
                    *v = v.conj() * s;
                }
                acc.push_row(&phi);
            }
            acc.finish()
        })
        .collect();
    let mut acc = RAccumulator::new(n);
    for r in &partial {
        acc.push_block(r);
    }
    acc.finish()
}

/// Monte Carlo Gram `G_ℓ` from `num_points` i.i.d. draws of ρ.
pub fn gram_dense(basis: &BasisSet, num_points: usize, seed: u64) -> Result<GramMatrix> {
    if num_points == 0 {
        return Err(Error::Argument("dense grid needs at least one point".into()));
    }
    let mut rng = crate::seed::rng(seed);
    let points: Vec<Vec<f64>> = (0..num_points)
        .map(|_| basis.domain().sample_rho(&mut rng))
        .collect();
    let w = 1.0 / num_points as f64;
    let root = weighted_root(basis, num_points, |k| (&points[k][..], w));
    Ok(GramMatrix::from_root(root, GramSource::DenseGrid { points: num_points }))
}

/// Gram matrix from the domain's deterministic quadrature rule.
pub fn gram_quadrature(basis: &BasisSet) -> Result<GramMatrix> {
    let quad = basis
        .domain()
        .quadrature()
        .ok_or_else(|| Error::Capability(format!("no quadrature for {}", basis.domain().label())))?;
    let root = weighted_root(basis, quad.len(), |q| (quad.node(q), quad.weight(q)));
    Ok(GramMatrix::from_root(root, GramSource::ExactQuadrature))
}

/// `n^ε = Σ λ_i / (λ_i + ε²)`.
pub fn numerical_dimension(gram: &GramMatrix, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    Ok(dimension_from_eigenvalues(&gram.eigenvalues(), eps))
}

/// `n^ε` of an arbitrary supplied matrix, which must be Hermitian.
pub fn numerical_dimension_of(entries: &CMatrix, eps: f64) -> Result<f64> {
    let gram = GramMatrix::from_entries(entries.clone(), GramSource::Supplied)?;
    numerical_dimension(&gram, eps)
}

pub(crate) fn dimension_from_eigenvalues(eigs: &[f64], eps: f64) -> f64 {
    let e2 = eps * eps;
    eigs.iter().map(|&l| l.max(0.0)).map(|l| l / (l + e2)).sum()
}

/// `k^ε(·)` for a fixed basis, Gram matrix and ε, with the factorization precomputed.
#[derive(Debug, Clone)]
pub struct InverseChristoffel {
    basis: BasisSet,
    factor: CMatrix,
    eps: f64,
}

impl InverseChristoffel {
    pub fn new(basis: &BasisSet, gram: &GramMatrix, eps: f64) -> Result<Self> {
        if gram.n() != basis.n() {
            return Err(Error::Argument(format!(
                "Gram matrix is {0}x{0} but the basis has {1} functions",
                gram.n(),
                basis.n()
            )));
        }
        Ok(InverseChristoffel {
            basis: basis.clone(),
            factor: gram.regularized_factor(eps)?,
            eps,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let phi = self.basis.eval(x)?;
        Ok(self.eval_phi(&phi))
    }

    pub fn eval_phi(&self, phi: &[C64]) -> f64 {
        let mut work = vec![C64::new(0.0, 0.0); phi.len()];
        linalg::rstar_solve_norm_sqr(&self.factor, phi, &mut work)
    }

    /// Evaluates on many points in parallel; points are assumed to lie in the domain.
    pub fn eval_many(&self, points: &[Vec<f64>]) -> Vec<f64> {
        let n = self.basis.n();
        points
            .par_iter()
            .map_init(
                || (vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]),
                |(phi, work), x| {
                    self.basis.eval_into(x, phi);
                    linalg::rstar_solve_norm_sqr(&self.factor, phi, work)
                },
            )
            .collect()
    }
}

impl PositiveFunction for InverseChristoffel {
    fn value(&self, x: &[f64]) -> f64 {
        let mut phi = vec![C64::new(0.0, 0.0); self.basis.n()];
        self.basis.eval_into(x, &mut phi);
        self.eval_phi(&phi)
    }
}

/// `k^ε(x; Φ, G)` at a single point.
pub fn k_eps(basis: &BasisSet, gram: &GramMatrix, eps: f64, x: &[f64]) -> Result<f64> {
    InverseChristoffel::new(basis, gram, eps)?.eval(x)
}

/// `φ*(M + ε²I)⁻¹φ` for an already evaluated `φ` and any PSD matrix `M`.
pub fn k_eps_phi(phi: &[C64], m: &GramMatrix, eps: f64) -> Result<f64> {
    if phi.len() != m.n() {
        return Err(Error::Argument(format!(
            "vector of length {} against a {}x{} matrix",
            phi.len(),
            m.n(),
            m.n()
        )));
    }
    let factor = m.regularized_factor(eps)?;
    let mut work = vec![C64::new(0.0, 0.0); phi.len()];
    Ok(linalg::rstar_solve_norm_sqr(&factor, phi, &mut work))
}

/// Twice the maximum of `k^ε` over the domain's deterministic grid: a deliberate
/// overestimate of `‖k^ε‖_∞`.
pub fn cap_estimate(basis: &BasisSet, gram: &GramMatrix, eps: f64, grid_size: usize) -> Result<f64> {
    if grid_size == 0 {
        return Err(Error::Argument("grid_size must be at least 1".into()));
    }
    let k = InverseChristoffel::new(basis, gram, eps)?;
    let grid = basis.domain().grid(grid_size);
    let max = k.eval_many(&grid).into_iter().fold(0.0, f64::max);
    Ok(2.0 * max)
}

/// Diagnostics of the oracle path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChristoffelReport {
    pub n_eps: f64,
    pub eigs: Vec<f64>,
    pub cap_estimate: f64,
    pub grid: Vec<Vec<f64>>,
    pub k_values: Vec<f64>,
}

pub fn christoffel_report(
    basis: &BasisSet,
    gram: &GramMatrix,
    eps: f64,
    grid_size: usize,
) -> Result<ChristoffelReport> {
    let k = InverseChristoffel::new(basis, gram, eps)?;
    let grid = basis.domain().grid(grid_size.max(1));
    let k_values = k.eval_many(&grid);
    let cap = 2.0 * k_values.iter().copied().fold(0.0, f64::max);
    let eigs = gram.eigenvalues();
    Ok(ChristoffelReport {
        n_eps: dimension_from_eigenvalues(&eigs, eps),
        eigs,
        cap_estimate: cap,
        grid,
        k_values,
    })
}

/// Default ε: `10 · u_mach · √λ_max(G_pilot)` with a 10⁴-point dense pilot Gram.
pub fn default_eps(basis: &BasisSet, seed: u64) -> Result<f64> {
    let pilot = gram_dense(basis, 10_000, seed)?;
    let lmax = pilot.eigenvalues().last().copied().unwrap_or(0.0);
    Ok(10.0 * f64::EPSILON * lmax.max(f64::MIN_POSITIVE).sqrt())
}

/// Which previously pushed factors the upper bound `u` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneMode {
    /// Every factor ever pushed.
    KeepAll,
    /// The first factor plus the two most recent ones.
    FirstPlusLastTwo,
    /// Only the two most recent factors (the cap is always kept).
    LastTwo,
}

/// The running upper bound
/// `u(x) = min(cap, min_j (1+Δ)‖(R_j*)⁻¹φ(x)‖²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RFactorStack {
    cap: f64,
    delta: f64,
    prune_mode: PruneMode,
    factors: Vec<CMatrix>,
    pushes: usize,
}

/// Creates the constant bound `u ≡ cap`.
pub fn stack_init(cap: f64, delta: f64, prune_mode: PruneMode) -> Result<RFactorStack> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::Argument(format!("cap must be positive and finite, got {cap}")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Argument(format!("delta must lie in [0, 1], got {delta}")));
    }
    Ok(RFactorStack {
        cap,
        delta,
        prune_mode,
        factors: Vec::new(),
        pushes: 0,
    })
}

impl RFactorStack {
    /// Reassembles a stack from stored parts (used by deserialization).
    pub fn from_parts(
        cap: f64,
        delta: f64,
        prune_mode: PruneMode,
        factors: Vec<CMatrix>,
        pushes: usize,
    ) -> Result<Self> {
        let mut stack = stack_init(cap, delta, prune_mode)?;
        if let Some(n) = factors.first().map(|f| f.ncols()) {
            for f in &factors {
                if f.nrows() != n || f.ncols() != n {
                    return Err(Error::Data("factors must share one square shape".into()));
                }
                if (0..n).any(|i| !(f[(i, i)].re > 0.0)) {
                    return Err(Error::Data("factor diagonal must be positive".into()));
                }
            }
        }
        stack.factors = factors;
        stack.pushes = pushes;
        Ok(stack)
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn prune_mode(&self) -> PruneMode {
        self.prune_mode
    }

    pub fn factors(&self) -> &[CMatrix] {
        &self.factors
    }

    /// Number of factors pushed over the stack's lifetime, including pruned ones.
    pub fn pushes(&self) -> usize {
        self.pushes
    }

    pub fn ncols(&self) -> Option<usize> {
        self.factors.first().map(|f| f.ncols())
    }

    /// Returns a new stack with the factor of `[A; εI]` added.
    pub fn push(&self, a: &CMatrix, eps: f64) -> Result<RFactorStack> {
        let mut next = self.clone();
        next.push_mut(a, eps)?;
        Ok(next)
    }

    pub fn push_mut(&mut self, a: &CMatrix, eps: f64) -> Result<()> {
        if !(eps > 0.0) {
            return Err(Error::Argument(format!("eps must be positive, got {eps}")));
        }
        if let Some(n) = self.ncols() {
            if a.ncols() != n {
                return Err(Error::Argument(format!(
                    "matrix has {} columns but the stack holds {n}x{n} factors",
                    a.ncols()
                )));
            }
        }
        let n = a.ncols();
        if n == 0 {
            return Err(Error::Argument("matrix has no columns".into()));
        }
        let mut acc = RAccumulator::new(n);
        if a.nrows() > 0 {
            acc.push_block(a);
        }
        acc.push_ridge(eps);
        self.factors.push(acc.finish());
        self.pushes += 1;
        match self.prune_mode {
            PruneMode::KeepAll => {}
            PruneMode::FirstPlusLastTwo => {
                while self.factors.len() > 3 {
                    self.factors.remove(1);
                }
            }
            PruneMode::LastTwo => {
                while self.factors.len() > 2 {
                    self.factors.remove(0);
                }
            }
        }
        Ok(())
    }

    /// `u` at a point given its basis evaluation; `work` has length `n`.
    pub fn eval_phi(&self, phi: &[C64], work: &mut [C64]) -> f64 {
        let scale = 1.0 + self.delta;
        self.factors.iter().fold(self.cap, |u, r| {
            u.min(scale * linalg::rstar_solve_norm_sqr(r, phi, work))
        })
    }

    /// `u(x)`, rejecting points outside the domain.
    pub fn u_eval(&self, basis: &BasisSet, x: &[f64]) -> Result<f64> {
        let phi = basis.eval(x)?;
        if let Some(n) = self.ncols() {
            if n != phi.len() {
                return Err(Error::Argument(format!(
                    "basis has {} functions but the stack holds {n}x{n} factors",
                    phi.len()
                )));
            }
        }
        let mut work = vec![C64::new(0.0, 0.0); phi.len()];
        Ok(self.eval_phi(&phi, &mut work))
    }

    /// Binds the stack to a basis, producing an evaluatable positive function.
    pub fn bind<'a>(&'a self, basis: &'a BasisSet) -> UpperBound<'a> {
        UpperBound { stack: self, basis }
    }
}

/// `u` as a function of `x`, for the sampler and estimators.
#[derive(Debug, Clone, Copy)]
pub struct UpperBound<'a> {
    stack: &'a RFactorStack,
    basis: &'a BasisSet,
}

impl UpperBound<'_> {
    pub fn eval_many(&self, points: &[Vec<f64>]) -> Vec<f64> {
        let n = self.basis.n();
        points
            .par_iter()
            .map_init(
                || (vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]),
                |(phi, work), x| {
                    self.basis.eval_into(x, phi);
                    self.stack.eval_phi(phi, work)
                },
            )
            .collect()
    }
}

impl PositiveFunction for UpperBound<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let n = self.basis.n();
        let mut phi = vec![C64::new(0.0, 0.0); n];
        let mut work = vec![C64::new(0.0, 0.0); n];
        self.basis.eval_into(x, &mut phi);
        self.stack.eval_phi(&phi, &mut work)
    }

    fn values(&self, points: &[Vec<f64>]) -> Vec<f64> {
        self.eval_many(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_chebyshev_basis, make_constant_basis, make_fourier_torus_basis};
    use crate::domain::Domain;
    use rand::Rng;

    fn constant() -> BasisSet {
        make_constant_basis(Domain::interval(0.0, 1.0))
    }

    fn real(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn constant_basis_gram_is_one() {
        let g = gram_dense(&constant(), 17, 3).unwrap();
        assert!((g.entries()[(0, 0)].re - 1.0).abs() < 1e-14);
        let g = gram_quadrature(&constant()).unwrap();
        assert!((g.entries()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_quadrature_gram_entries() {
        let basis = make_chebyshev_basis(2, -1.0, 1.0).unwrap();
        let g = gram_quadrature(&basis).unwrap();
        assert!(g.entries()[(0, 1)].norm() < 1e-14);
        assert!((g.entries()[(1, 1)].re - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn numerical_dimension_examples() {
        let g = GramMatrix::from_entries(CMatrix::identity(5, 5), GramSource::Supplied).unwrap();
        assert!((numerical_dimension(&g, 1.0).unwrap() - 2.5).abs() < 1e-14);
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = real(1.0);
        let g = GramMatrix::from_entries(d, GramSource::Supplied).unwrap();
        assert!((numerical_dimension(&g, 0.1).unwrap() - 1.0 / 1.01).abs() < 1e-14);
        assert!(numerical_dimension(&g, 0.0).is_err());
    }

    #[test]
    fn non_hermitian_input_is_a_data_error() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = real(0.3);
        assert!(matches!(
            numerical_dimension_of(&m, 0.1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn k_eps_examples() {
        let g = GramMatrix::from_entries(CMatrix::identity(1, 1), GramSource::Supplied).unwrap();
        let k = k_eps(&constant(), &g, 0.1, &[0.7]).unwrap();
        assert!((k - 1.0 / 1.01).abs() < 1e-14);

        let basis = make_fourier_torus_basis(1, 1, 0);
        let g = GramMatrix::from_entries(CMatrix::identity(9, 9), GramSource::Supplied).unwrap();
        let k = k_eps(&basis, &g, 1e-7, &[0.1, -0.3, 0.2]).unwrap();
        assert!((k - 9.0 / (1.0 + 1e-14)).abs() < 1e-12);
    }

    #[test]
    fn cap_estimate_examples() {
        let g = GramMatrix::from_entries(CMatrix::identity(1, 1), GramSource::Supplied).unwrap();
        let cap = cap_estimate(&constant(), &g, 0.1, 10).unwrap();
        assert!((cap - 2.0 / 1.01).abs() < 1e-13);
        let basis = make_fourier_torus_basis(1, 1, 0);
        let g = gram_quadrature(&basis).unwrap();
        let cap = cap_estimate(&basis, &g, 1e-7, 50).unwrap();
        assert!((cap - 18.0).abs() < 1e-9);
    }

    #[test]
    fn empty_stack_is_the_cap() {
        let stack = stack_init(100.0, 0.5, PruneMode::KeepAll).unwrap();
        assert_eq!(stack.u_eval(&constant(), &[0.2]).unwrap(), 100.0);
        assert!(stack_init(0.0, 0.5, PruneMode::KeepAll).is_err());
        assert!(stack_init(-1.0, 0.5, PruneMode::KeepAll).is_err());
    }

    #[test]
    fn push_examples() {
        // empty A: R = εI
        let stack = stack_init(1e6, 0.5, PruneMode::KeepAll).unwrap();
        let basis = make_chebyshev_basis(3, -1.0, 1.0).unwrap();
        let pushed = stack.push(&CMatrix::zeros(0, 3), 0.5).unwrap();
        let r = &pushed.factors()[0];
        assert!((r - CMatrix::from_diagonal_element(3, 3, real(0.5))).norm() < 1e-15);
        let x = [0.4];
        let phi = basis.eval(&x).unwrap();
        let norm2: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        let u = pushed.u_eval(&basis, &x).unwrap();
        assert!((u - 1.5 * norm2 / 0.25).abs() < 1e-12);

        // 1×1: R = [√5]
        let stack = stack_init(1e6, 0.0, PruneMode::KeepAll).unwrap();
        let pushed = stack.push(&CMatrix::from_element(1, 1, real(2.0)), 1.0).unwrap();
        assert!((pushed.factors()[0][(0, 0)].re - 5f64.sqrt()).abs() < 1e-15);
        assert!((pushed.u_eval(&constant(), &[0.1]).unwrap() - 0.2).abs() < 1e-15);

        // constant basis, A empty, ε = 1, Δ = 0, cap = 10
        let stack = stack_init(10.0, 0.0, PruneMode::KeepAll).unwrap();
        let pushed = stack.push(&CMatrix::zeros(0, 1), 1.0).unwrap();
        assert_eq!(pushed.u_eval(&constant(), &[0.5]).unwrap(), 1.0);
    }

    #[test]
    fn push_rejects_column_mismatch() {
        let stack = stack_init(10.0, 0.5, PruneMode::KeepAll).unwrap();
        let stack = stack.push(&CMatrix::zeros(2, 3), 1.0).unwrap();
        assert!(matches!(
            stack.push(&CMatrix::zeros(2, 4), 1.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn factor_reproduces_regularized_gram() {
        let mut rng = crate::seed::rng(21);
        let a = CMatrix::from_fn(50, 10, |_, _| real(rng.gen_range(-1.0..1.0)));
        let stack = stack_init(1.0, 0.5, PruneMode::KeepAll)
            .unwrap()
            .push(&a, 0.3)
            .unwrap();
        let r = &stack.factors()[0];
        let lhs = r.adjoint() * r;
        let rhs = a.adjoint() * &a + CMatrix::from_diagonal_element(10, 10, real(0.09));
        assert!((lhs - &rhs).norm() <= 1e-10 * rhs.norm());
        for i in 0..10 {
            assert!(r[(i, i)].re > 0.0 && r[(i, i)].im == 0.0);
        }
    }

    #[test]
    fn pruning_keeps_first_and_last_two() {
        let mut stack = stack_init(1e3, 0.5, PruneMode::FirstPlusLastTwo).unwrap();
        let mut last_two = stack_init(1e3, 0.5, PruneMode::LastTwo).unwrap();
        for s in 1..=5 {
            let a = CMatrix::from_element(1, 1, real(s as f64));
            stack.push_mut(&a, 1.0).unwrap();
            last_two.push_mut(&a, 1.0).unwrap();
        }
        let diag: Vec<f64> = stack.factors().iter().map(|r| r[(0, 0)].re).collect();
        assert_eq!(diag.len(), 3);
        assert!((diag[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!((diag[1] - 17f64.sqrt()).abs() < 1e-14);
        assert!((diag[2] - 26f64.sqrt()).abs() < 1e-14);
        assert_eq!(last_two.factors().len(), 2);
        assert_eq!(stack.pushes(), 5);
    }
}
