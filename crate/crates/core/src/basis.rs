//! Basis families and the [`BasisSet`] abstraction.
//!
//! A basis set is a finite family `φ_1, …, φ_n` on a [`Domain`]; evaluation
//! returns the vector `φ(x)` in complex arithmetic regardless of whether the
//! family is real.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::domain::{Domain, Shape};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Scalar field of a basis family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// A concrete family of functions. Implementations must be pure.
#[allow(clippy::len_without_is_empty)]
pub trait Family: Send + Sync {
    fn len(&self) -> usize;

    fn field(&self) -> Field;

    /// Writes `φ(x)` into `out` (length `len()`); `x` is assumed to lie in the domain.
    fn eval_into(&self, x: &[f64], out: &mut [C64]);
}

/// Evaluatable family `{φ_i}` over a domain with reference measure ρ.
#[derive(Clone)]
pub struct BasisSet {
    family: Arc<dyn Family>,
    domain: Domain,
    label: String,
}

impl fmt::Debug for BasisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisSet")
            .field("label", &self.label)
            .field("n", &self.n())
            .field("field", &self.field())
            .field("domain", &self.domain.label())
            .finish()
    }
}

impl BasisSet {
    pub fn new(family: Arc<dyn Family>, domain: Domain, label: impl Into<String>) -> Self {
        assert!(family.len() >= 1, "a basis needs at least one function");
        BasisSet {
            family,
            domain,
            label: label.into(),
        }
    }

    /// Wraps a closure as a basis family.
    pub fn from_fn<F>(n: usize, field: Field, domain: Domain, label: &str, f: F) -> Self
    where
        F: Fn(&[f64], &mut [C64]) + Send + Sync + 'static,
    {
        BasisSet::new(Arc::new(FnFamily { n, field, f }), domain, label)
    }

    pub fn n(&self) -> usize {
        self.family.len()
    }

    pub fn field(&self) -> Field {
        self.family.field()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Returns `φ(x)`, rejecting points outside the domain.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<C64>> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.n()];
        self.family.eval_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation for hot loops.
    pub fn eval_into(&self, x: &[f64], out: &mut [C64]) {
        self.family.eval_into(x, out);
    }

    /// Row-stacked evaluations: row `k` is `φ(x_k)ᵀ`.
    pub fn eval_rows(&self, points: &[Vec<f64>]) -> CMatrix {
        let n = self.n();
        let mut m = CMatrix::zeros(points.len(), n);
        let mut row = vec![C64::new(0.0, 0.0); n];
        for (k, x) in points.iter().enumerate() {
            self.family.eval_into(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(k, j)] = *v;
            }
        }
        m
    }
}

/// Free-function form of [`BasisSet::eval`].
pub fn eval_basis(basis: &BasisSet, x: &[f64]) -> Result<Vec<C64>> {
    basis.eval(x)
}

struct FnFamily<F> {
    n: usize,
    field: Field,
    f: F,
}

impl<F> Family for FnFamily<F>
where
    F: Fn(&[f64], &mut [C64]) + Send + Sync,
{
    fn len(&self) -> usize {
        self.n
    }

    fn field(&self) -> Field {
        self.field
    }

    fn eval_into(&self, x: &[f64], out: &mut [C64]) {
        (self.f)(x, out)
    }
}

/// Chebyshev polynomials `T_0 … T_{count-1}` at `t ∈ [-1, 1]`.
pub fn chebyshev_values(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for i in 2..out.len() {
        out[i] = 2.0 * t * out[i - 1] - out[i - 2];
    }
}

/// Affine map of `[a, b]` onto `[-1, 1]`.
fn to_reference(x: f64, a: f64, b: f64) -> f64 {
    ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0)
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// The constant function `1` on `domain`.
pub fn make_constant_basis(domain: Domain) -> BasisSet {
    BasisSet::from_fn(1, Field::Real, domain, "constant", |_, out| {
        out[0] = real(1.0);
    })
}

/// Chebyshev polynomials of degree `< n` on an interval with uniform ρ.
pub fn make_chebyshev_basis(n: usize, a: f64, b: f64) -> Result<BasisSet> {
    if n == 0 {
        return Err(Error::Argument("chebyshev basis needs n >= 1".into()));
    }
    Ok(BasisSet::from_fn(
        n,
        Field::Real,
        Domain::interval(a, b),
        &format!("chebyshev(n={n})"),
        move |x, out| {
            let mut values = vec![0.0; n];
            chebyshev_values(to_reference(x[0], a, b), &mut values);
            for (o, v) in out.iter_mut().zip(&values) {
                *o = real(*v);
            }
        },
    ))
}

struct WeightedPoly {
    n1: usize,
    n2: usize,
    weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Family for WeightedPoly {
    fn len(&self) -> usize {
        self.n1 + self.n2
    }

    fn field(&self) -> Field {
        Field::Real
    }

    fn eval_into(&self, x: &[f64], out: &mut [C64]) {
        let t = x[0];
        let count = self.n1.max(self.n2);
        let mut p = vec![0.0; count];
        chebyshev_values(t, &mut p);
        let w = if self.n2 > 0 { (self.weight)(t) } else { 0.0 };
        for i in 0..self.n1 {
            out[i] = real(p[i]);
        }
        for i in 0..self.n2 {
            out[self.n1 + i] = real(w * p[i]);
        }
    }
}

/// `{p_i}_{i<n1} ∪ {w·p_i}_{i<n2}` on `[-1, 1]` with Chebyshev `p_i` and uniform ρ.
pub fn make_weighted_poly_basis<W>(n1: usize, n2: usize, weight: W) -> Result<BasisSet>
where
    W: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if n1 + n2 == 0 {
        return Err(Error::Argument("weighted polynomial basis needs n1 + n2 >= 1".into()));
    }
    Ok(BasisSet::new(
        Arc::new(WeightedPoly {
            n1,
            n2,
            weight: Arc::new(weight),
        }),
        Domain::interval(-1.0, 1.0),
        format!("weighted-poly(n1={n1},n2={n2})"),
    ))
}

/// Tapered poles `q_i = -exp(4(√i - √n1))`, `i = 1..=n1`, clustering toward zero.
pub fn lightning_poles(n1: usize) -> Vec<f64> {
    let root = (n1 as f64).sqrt();
    (1..=n1)
        .map(|i| -(4.0 * ((i as f64).sqrt() - root)).exp())
        .collect()
}

struct Lightning {
    poles: Vec<f64>,
    n2: usize,
}

impl Family for Lightning {
    fn len(&self) -> usize {
        self.poles.len() + self.n2
    }

    fn field(&self) -> Field {
        Field::Real
    }

    fn eval_into(&self, x: &[f64], out: &mut [C64]) {
        let x = x[0];
        let n1 = self.poles.len();
        for (o, q) in out.iter_mut().zip(&self.poles) {
            *o = real(-q / (x - q));
        }
        let mut p = vec![0.0; self.n2];
        chebyshev_values(to_reference(x, 0.0, 1.0), &mut p);
        for (i, v) in p.iter().enumerate() {
            out[n1 + i] = real(*v);
        }
    }
}

/// Partial fractions with tapered poles toward `x = 0` plus Chebyshev polynomials, on `[0, 1]`.
pub fn make_lightning_basis(n1: usize, n2: usize) -> Result<BasisSet> {
    if n1 == 0 {
        return Err(Error::Argument("lightning basis needs n1 >= 1".into()));
    }
    Ok(BasisSet::new(
        Arc::new(Lightning {
            poles: lightning_poles(n1),
            n2,
        }),
        Domain::interval(0.0, 1.0),
        format!("lightning(n1={n1},n2={n2})"),
    ))
}

/// Polynomial degree used alongside the `n1` partial fractions in convergence studies.
pub fn lightning_poly_count(n1: usize) -> usize {
    (2.0 * (n1 as f64).sqrt()).ceil() as usize
}

/// `Q(x, y) = x³ − 2x + 1 − y²`, whose zero set carries the singular curve.
pub fn elliptic_curve(x: f64, y: f64) -> f64 {
    x * x * x - 2.0 * x + 1.0 - y * y
}

struct Lightning2d {
    poles: Vec<C64>,
    n2: usize,
    n3: usize,
}

impl Family for Lightning2d {
    fn len(&self) -> usize {
        self.poles.len() * self.n2 * self.n2 + self.n3 * self.n3
    }

    fn field(&self) -> Field {
        Field::Complex
    }

    fn eval_into(&self, x: &[f64], out: &mut [C64]) {
        let count = self.n2.max(self.n3);
        let mut px = vec![0.0; count];
        let mut py = vec![0.0; count];
        chebyshev_values(to_reference(x[0], -2.0, 2.0), &mut px);
        chebyshev_values(to_reference(x[1], -2.0, 2.0), &mut py);
        let q = real(elliptic_curve(x[0], x[1]));
        let mut idx = 0;
        for pole in &self.poles {
            let factor = pole / (q - pole);
            for &a in &px[..self.n2] {
                for &b in &py[..self.n2] {
                    out[idx] = factor * (a * b);
                    idx += 1;
                }
            }
        }
        for &a in &px[..self.n3] {
            for &b in &py[..self.n3] {
                out[idx] = real(a * b);
                idx += 1;
            }
        }
    }
}

/// Poles `±i·exp(−4(√n1 − √j))`, `j = 1..=n1`, ordered `(+j, −j)`.
pub fn lightning2d_poles(n1: usize) -> Vec<C64> {
    let root = (n1 as f64).sqrt();
    (1..=n1)
        .flat_map(|j| {
            let r = (-4.0 * (root - (j as f64).sqrt())).exp();
            [C64::new(0.0, r), C64::new(0.0, -r)]
        })
        .collect()
}

/// Lightning basis along the curve `Q = 0` on `[-2, 2]²`; `n = 2·n1·n2² + n3²`.
pub fn make_lightning2d_basis(n1: usize, n2: usize, n3: usize) -> Result<BasisSet> {
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(Error::Argument("2D lightning basis needs n1, n2, n3 >= 1".into()));
    }
    Ok(BasisSet::new(
        Arc::new(Lightning2d {
            poles: lightning2d_poles(n1),
            n2,
            n3,
        }),
        Domain::unit_box(&[-2.0, -2.0], &[2.0, 2.0]),
        format!("lightning-2d(n1={n1},n2={n2},n3={n3})"),
    ))
}

struct Fourier {
    freqs: Vec<[i64; 3]>,
}

impl Family for Fourier {
    fn len(&self) -> usize {
        self.freqs.len()
    }

    fn field(&self) -> Field {
        Field::Complex
    }

    fn eval_into(&self, x: &[f64], out: &mut [C64]) {
        let coord = |d: usize| x.get(d).copied().unwrap_or(0.0);
        let (a, b, c) = (coord(0), coord(1), coord(2));
        for (o, k) in out.iter_mut().zip(&self.freqs) {
            let phase = 2.0 * PI * (k[0] as f64 * a + k[1] as f64 * b + k[2] as f64 * c);
            *o = C64::from_polar(1.0, phase);
        }
    }
}

fn fourier_frequencies(nx: usize, ny: usize, nz: usize) -> Vec<[i64; 3]> {
    let (nx, ny, nz) = (nx as i64, ny as i64, nz as i64);
    let mut freqs = Vec::new();
    for kx in -nx..=nx {
        for ky in -ny..=ny {
            for kz in -nz..=nz {
                freqs.push([kx, ky, kz]);
            }
        }
    }
    freqs
}

/// Side half-length of the cube whose surface carries the Fourier extension problem.
pub const CUBE_HALF: f64 = 0.25;

/// Torus exponentials `exp(2πi k·x)`, `|k_*| ≤ n_*`, restricted to the surface of a cube.
pub fn make_fourier_surface_basis(nx: usize, ny: usize, nz: usize) -> BasisSet {
    BasisSet::new(
        Arc::new(Fourier {
            freqs: fourier_frequencies(nx, ny, nz),
        }),
        Domain::cube_surface(CUBE_HALF),
        format!("fourier-surface(nx={nx},ny={ny},nz={nz})"),
    )
}

/// The same exponentials on the full torus `[-1/2, 1/2)³`, where they are orthonormal.
pub fn make_fourier_torus_basis(nx: usize, ny: usize, nz: usize) -> BasisSet {
    BasisSet::new(
        Arc::new(Fourier {
            freqs: fourier_frequencies(nx, ny, nz),
        }),
        Domain::torus(3),
        format!("fourier-torus(nx={nx},ny={ny},nz={nz})"),
    )
}

/// `g(t) = 1 / (1 + exp(−t))`.
pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Hidden-layer parameters of an extreme learning machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmParams {
    pub weights: Vec<[f64; 2]>,
    pub biases: Vec<f64>,
}

impl ElmParams {
    /// `a_i ~ U([-1, 1]²)`, `b_i ~ U([0, 1])`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = crate::seed::rng(seed);
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        for _ in 0..n {
            weights.push([rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]);
            biases.push(rng.gen_range(0.0..=1.0));
        }
        ElmParams { weights, biases }
    }
}

struct Elm {
    params: ElmParams,
}

impl Family for Elm {
    fn len(&self) -> usize {
        self.params.biases.len()
    }

    fn field(&self) -> Field {
        Field::Real
    }

    fn eval_into(&self, x: &[f64], out: &mut [C64]) {
        for ((o, a), b) in out
            .iter_mut()
            .zip(&self.params.weights)
            .zip(&self.params.biases)
        {
            *o = real(sigmoid(a[0] * x[0] + a[1] * x[1] + b));
        }
    }
}

/// Sigmoidal extreme learning machine features on `[0, 1]²`.
pub fn make_elm_basis(n: usize, seed: u64) -> Result<BasisSet> {
    if n == 0 {
        return Err(Error::Argument("ELM basis needs n >= 1".into()));
    }
    Ok(make_elm_basis_from(ElmParams::random(n, seed)))
}

pub fn make_elm_basis_from(params: ElmParams) -> BasisSet {
    let n = params.biases.len();
    BasisSet::new(
        Arc::new(Elm { params }),
        Domain::unit_box(&[0.0, 0.0], &[1.0, 1.0]),
        format!("elm(n={n})"),
    )
}

/// Weight functions available by name in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightName {
    /// `w(x) = √(x + 1)`
    #[default]
    SqrtShift,
    /// `w(x) = |x|`
    Abs,
}

impl WeightName {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            WeightName::SqrtShift => (x + 1.0).max(0.0).sqrt(),
            WeightName::Abs => x.abs(),
        }
    }
}

/// Serializable description of a basis: family name, integer parameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum BasisSpec {
    Constant,
    Chebyshev {
        n: usize,
    },
    WeightedPoly {
        n1: usize,
        n2: usize,
        #[serde(default)]
        weight: WeightName,
    },
    Lightning {
        n1: usize,
        n2: Option<usize>,
    },
    #[serde(rename = "lightning-2d")]
    Lightning2d {
        n1: usize,
        n2: usize,
        n3: usize,
    },
    FourierSurface {
        nx: usize,
        ny: usize,
        nz: usize,
    },
    FourierTorus {
        nx: usize,
        ny: usize,
        nz: usize,
    },
    Elm {
        n: usize,
        seed: u64,
    },
}

impl BasisSpec {
    pub fn build(&self) -> Result<BasisSet> {
        match *self {
            BasisSpec::Constant => Ok(make_constant_basis(Domain::interval(0.0, 1.0))),
            BasisSpec::Chebyshev { n } => make_chebyshev_basis(n, -1.0, 1.0),
            BasisSpec::WeightedPoly { n1, n2, weight } => {
                make_weighted_poly_basis(n1, n2, move |x| weight.eval(x))
            }
            BasisSpec::Lightning { n1, n2 } => {
                make_lightning_basis(n1, n2.unwrap_or_else(|| lightning_poly_count(n1)))
            }
            BasisSpec::Lightning2d { n1, n2, n3 } => make_lightning2d_basis(n1, n2, n3),
            BasisSpec::FourierSurface { nx, ny, nz } => Ok(make_fourier_surface_basis(nx, ny, nz)),
            BasisSpec::FourierTorus { nx, ny, nz } => Ok(make_fourier_torus_basis(nx, ny, nz)),
            BasisSpec::Elm { n, seed } => make_elm_basis(n, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: f64) -> bool {
        (a - real(b)).norm() < 1e-14
    }

    #[test]
    fn constant_basis_is_one() {
        let basis = make_constant_basis(Domain::interval(0.0, 1.0));
        assert_eq!(basis.eval(&[0.3]).unwrap(), vec![real(1.0)]);
    }

    #[test]
    fn zero_frequency_fourier_is_one() {
        let basis = make_fourier_surface_basis(0, 0, 0);
        assert_eq!(basis.n(), 1);
        let v = basis.eval(&[0.25, 0.1, -0.2]).unwrap();
        assert!(close(v[0], 1.0));
    }

    #[test]
    fn weighted_poly_examples() {
        let basis = make_weighted_poly_basis(1, 1, |x| (x + 1.0).sqrt()).unwrap();
        let v = basis.eval(&[0.0]).unwrap();
        assert!(close(v[0], 1.0) && close(v[1], 1.0));
        let v = basis.eval(&[1.0]).unwrap();
        assert!(close(v[0], 1.0) && close(v[1], 2f64.sqrt()));

        let basis = make_weighted_poly_basis(2, 0, |_| f64::NAN).unwrap();
        let v = basis.eval(&[0.5]).unwrap();
        assert!(close(v[0], 1.0) && close(v[1], 0.5));

        let basis = make_weighted_poly_basis(20, 20, |x| (x + 1.0).sqrt()).unwrap();
        assert_eq!(basis.n(), 40);
        assert!(make_weighted_poly_basis(0, 0, |x| x).is_err());
    }

    #[test]
    fn outside_points_are_rejected() {
        let basis = make_weighted_poly_basis(2, 2, |x| (x + 1.0).sqrt()).unwrap();
        assert!(matches!(basis.eval(&[1.5]), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn lightning_poles_follow_the_taper() {
        assert_eq!(lightning_poles(1), vec![-1.0]);
        let basis = make_lightning_basis(1, 0).unwrap();
        assert!(close(basis.eval(&[0.0]).unwrap()[0], 1.0));
        let q = lightning_poles(4);
        assert!((q[0] + (-4.0f64).exp()).abs() < 1e-15);
        assert!((q[0] + 0.018_315_638_888_734_18).abs() < 1e-15);
        assert_eq!(lightning_poly_count(10), 7);
        assert_eq!(lightning_poly_count(20), 9);
    }

    #[test]
    fn lightning2d_dimensions_and_poles() {
        let basis = make_lightning2d_basis(15, 3, 10).unwrap();
        assert_eq!(basis.n(), 370);
        assert_eq!(elliptic_curve(1.0, 0.0), 0.0);
        let poles = lightning2d_poles(15);
        assert!((poles[28].norm() - 1.0).abs() < 1e-15);
        // finite even on the singular curve
        let v = basis.eval(&[1.0, 0.0]).unwrap();
        assert!(v.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn fourier_surface_dimensions() {
        let basis = make_fourier_surface_basis(4, 4, 4);
        assert_eq!(basis.n(), 729);
        let v = basis.eval(&[-0.25, 0.13, 0.2]).unwrap();
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-13));
    }

    #[test]
    fn elm_is_reproducible() {
        assert_eq!(sigmoid(0.0), 0.5);
        let a = make_elm_basis(600, 11).unwrap();
        let b = make_elm_basis(600, 11).unwrap();
        let c = make_elm_basis(600, 12).unwrap();
        assert_eq!(a.n(), 600);
        let x = [0.3, 0.8];
        assert_eq!(a.eval(&x).unwrap(), b.eval(&x).unwrap());
        assert_ne!(a.eval(&x).unwrap(), c.eval(&x).unwrap());
    }

    #[test]
    fn chebyshev_recurrence_holds() {
        let mut rng = crate::seed::rng(5);
        let mut p = vec![0.0; 52];
        for _ in 0..100 {
            let t: f64 = rng.gen_range(-1.0..=1.0);
            chebyshev_values(t, &mut p);
            for i in 1..51 {
                let direct = ((i + 1) as f64 * t.acos()).cos();
                assert!((p[i + 1] - (2.0 * t * p[i] - p[i - 1])).abs() < 1e-12);
                assert!((p[i + 1] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = BasisSpec::Lightning2d {
            n1: 15,
            n2: 3,
            n3: 10,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("lightning-2d"));
        let back: BasisSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.build().unwrap().n(), 370);
    }
}
