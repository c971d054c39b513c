//! Deterministic quadrature rules for probability measures.
//!
//! Every rule stores physical nodes and weights that sum to one, so that
//! `Σ w_q f(x_q)` approximates `∫ f dρ` for the associated reference measure.

use std::f64::consts::PI;

/// Node/weight set approximating integration against a probability measure.
#[derive(Debug, Clone)]
pub struct Quadrature {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    /// Builds a rule from flat row-major nodes. Weights are rescaled to sum to one.
    pub fn new(dim: usize, nodes: Vec<f64>, mut weights: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), dim * weights.len(), "node/weight length mismatch");
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Quadrature { dim, nodes, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.dim..(q + 1) * self.dim]
    }

    pub fn weight(&self, q: usize) -> f64 {
        self.weights[q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// Weighted mean of precomputed values, exact for constant inputs.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        weighted_mean(values, &self.weights)
    }
}

/// `Σ w v / Σ w`, evaluated around the first value so that constants are reproduced exactly.
pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let Some(&reference) = values.first() else {
        return 0.0;
    };
    let mut acc = 0.0;
    let mut total = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        acc += w * (v - reference);
        total += w;
    }
    reference + acc / total
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_k.
        let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(k, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule over the given panel breakpoints (unnormalized weights).
pub fn composite_rule(breaks: &[f64], points_per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(points_per_panel);
    let mut nodes = Vec::with_capacity((breaks.len() - 1) * points_per_panel);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

/// Panel breakpoints on [a, b], refined geometrically (ratio 1/2) toward both endpoints.
///
/// The smallest panel has width `(b - a) * 2^-levels / 4`, which resolves
/// endpoint singularities and poles clustered near the endpoints.
pub fn graded_breaks(a: f64, b: f64, levels: usize, middle_panels: usize) -> Vec<f64> {
    let len = b - a;
    let quarter = 0.25 * len;
    let mut left: Vec<f64> = (0..=levels)
        .map(|j| a + quarter * 0.5f64.powi(j as i32))
        .collect();
    left.push(a);
    left.reverse();
    let mut breaks = left;
    for j in 1..middle_panels {
        breaks.push(a + quarter + (len - 2.0 * quarter) * j as f64 / middle_panels as f64);
    }
    let mut right: Vec<f64> = (0..=levels)
        .map(|j| b - quarter * 0.5f64.powi(j as i32))
        .collect();
    right.push(b);
    breaks.extend(right);
    breaks
}

/// Graded composite rule for the uniform probability measure on [a, b].
pub fn graded_interval(a: f64, b: f64) -> Quadrature {
    let breaks = graded_breaks(a, b, 46, 8);
    let (nodes, weights) = composite_rule(&breaks, 16);
    Quadrature::new(1, nodes, weights)
}

/// Tensor composite Gauss–Legendre rule for the uniform measure on a box.
pub fn tensor_box(lo: &[f64], hi: &[f64], panels: usize, points_per_panel: usize) -> Quadrature {
    let dim = lo.len();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| {
            let breaks: Vec<f64> = (0..=panels)
                .map(|j| a + (b - a) * j as f64 / panels as f64)
                .collect();
            composite_rule(&breaks, points_per_panel)
        })
        .collect();
    tensor_product(&axes, dim)
}

/// Equispaced trapezoidal rule on the torus [-1/2, 1/2)^d; exact for trigonometric
/// polynomials with frequencies below `points` in every coordinate.
pub fn periodic_grid(dim: usize, points: usize) -> Quadrature {
    let axis: Vec<f64> = (0..points)
        .map(|j| -0.5 + j as f64 / points as f64)
        .collect();
    let w = vec![1.0; points];
    let axes = vec![(axis, w); dim];
    tensor_product(&axes, dim)
}

fn tensor_product(axes: &[(Vec<f64>, Vec<f64>)], dim: usize) -> Quadrature {
    let total: usize = axes.iter().map(|a| a.0.len()).product();
    let mut nodes = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut index = vec![0usize; dim];
    for _ in 0..total {
        let mut w = 1.0;
        for (d, &i) in index.iter().enumerate() {
            nodes.push(axes[d].0[i]);
            w *= axes[d].1[i];
        }
        weights.push(w);
        for d in (0..dim).rev() {
            index[d] += 1;
            if index[d] < axes[d].0.len() {
                break;
            }
            index[d] = 0;
        }
    }
    Quadrature::new(dim, nodes, weights)
}
