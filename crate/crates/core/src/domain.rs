//! Approximation domains with their reference probability measures.
//!
//! Every domain is the image of a parameter box under a map that pushes the
//! uniform measure on the box forward to ρ. Samplers work in parameter space;
//! basis functions see physical points.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature::{self, Quadrature};

const SURFACE_TOL: f64 = 1e-12;

/// Geometric description of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// Axis-aligned box `Π [lo_i, hi_i]` with uniform ρ.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// The torus `[-1/2, 1/2)^dim` with uniform ρ.
    Torus { dim: usize },
    /// Boundary of the cube `[-half, half]^3` with normalized surface measure.
    CubeSurface { half: f64 },
}

/// Domain `X` together with its probability measure ρ.
#[derive(Debug, Clone)]
pub struct Domain {
    shape: Shape,
    quadrature: Arc<OnceLock<Option<Quadrature>>>,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

impl Domain {
    pub fn new(shape: Shape) -> Self {
        Domain {
            shape,
            quadrature: Arc::new(OnceLock::new()),
        }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        assert!(a < b, "empty interval");
        Domain::new(Shape::Box {
            lo: vec![a],
            hi: vec![b],
        })
    }

    pub fn unit_box(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(hi).all(|(a, b)| a < b), "empty box");
        Domain::new(Shape::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        })
    }

    pub fn torus(dim: usize) -> Self {
        Domain::new(Shape::Torus { dim })
    }

    pub fn cube_surface(half: f64) -> Self {
        assert!(half > 0.0 && half < 0.5, "cube must lie strictly inside the torus");
        Domain::new(Shape::CubeSurface { half })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Dimension `d` of the ambient space.
    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Torus { dim } => *dim,
            Shape::CubeSurface { .. } => 3,
        }
    }

    /// Dimension of the parameter box.
    pub fn param_dim(&self) -> usize {
        match &self.shape {
            Shape::CubeSurface { .. } => 2,
            _ => self.dim(),
        }
    }

    /// Parameter box; the sampler draws uniform points here.
    pub fn param_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
            Shape::Torus { dim } => (vec![-0.5; *dim], vec![0.5; *dim]),
            Shape::CubeSurface { .. } => (vec![0.0, 0.0], vec![6.0, 1.0]),
        }
    }

    /// Axis-aligned bounding box of `X`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::CubeSurface { half } => (vec![-half; 3], vec![*half; 3]),
            _ => self.param_bounds(),
        }
    }

    /// Maps a parameter point into `X`. Returns `None` outside the parameter box.
    pub fn map_param(&self, p: &[f64], out: &mut Vec<f64>) -> bool {
        let (lo, hi) = self.param_bounds();
        let inside = p
            .iter()
            .zip(lo.iter().zip(&hi))
            .all(|(x, (a, b))| match self.shape {
                Shape::Torus { .. } => *x >= *a && *x < *b,
                _ => *x >= *a && *x <= *b,
            });
        if !inside {
            return false;
        }
        out.clear();
        match &self.shape {
            Shape::Box { .. } | Shape::Torus { .. } => out.extend_from_slice(p),
            Shape::CubeSurface { half } => {
                let face = (p[0].floor() as usize).min(5);
                let a = p[0] - face as f64;
                let c1 = -half + 2.0 * half * a;
                let c2 = -half + 2.0 * half * p[1];
                let side = if face.is_multiple_of(2) { -half } else { *half };
                match face / 2 {
                    0 => out.extend_from_slice(&[side, c1, c2]),
                    1 => out.extend_from_slice(&[c1, side, c2]),
                    _ => out.extend_from_slice(&[c1, c2, side]),
                }
            }
        }
        true
    }

    /// Membership predicate for `X`.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.shape {
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| v >= a && v <= b),
            Shape::Torus { .. } => x.iter().all(|v| *v >= -0.5 && *v < 0.5),
            Shape::CubeSurface { half } => {
                let inside = x.iter().all(|v| v.abs() <= half + SURFACE_TOL);
                let on_face = x.iter().any(|v| (v.abs() - half).abs() <= SURFACE_TOL);
                inside && on_face
            }
        }
    }

    /// Draws one point from ρ.
    pub fn sample_rho<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let p = self.sample_param(rng);
        let mut x = Vec::with_capacity(self.dim());
        let mapped = self.map_param(&p, &mut x);
        debug_assert!(mapped);
        x
    }

    /// Draws one uniform point from the parameter box.
    pub fn sample_param<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.param_bounds();
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| a + (b - a) * rng.gen::<f64>())
            .collect()
    }

    /// Deterministic quadrature for `∫ · dρ`, built lazily and cached.
    pub fn quadrature(&self) -> Option<&Quadrature> {
        self.quadrature
            .get_or_init(|| self.build_quadrature())
            .as_ref()
    }

    fn build_quadrature(&self) -> Option<Quadrature> {
        match &self.shape {
            Shape::Box { lo, hi } => match lo.len() {
                1 => Some(quadrature::graded_interval(lo[0], hi[0])),
                2 => Some(quadrature::tensor_box(lo, hi, 24, 8)),
                3 => Some(quadrature::tensor_box(lo, hi, 6, 6)),
                _ => None,
            },
            Shape::Torus { dim } if *dim <= 3 => Some(quadrature::periodic_grid(*dim, 32)),
            Shape::Torus { .. } => None,
            Shape::CubeSurface { .. } => {
                let face = quadrature::tensor_box(&[0.0, 0.0], &[1.0, 1.0], 8, 8);
                let mut nodes = Vec::with_capacity(6 * face.len() * 3);
                let mut weights = Vec::with_capacity(6 * face.len());
                let mut x = Vec::with_capacity(3);
                for f in 0..6 {
                    for (p, w) in face.iter() {
                        // keep the parameter strictly below the next face index
                        let t = (f as f64 + p[0]).min(f as f64 + 1.0 - 1e-15);
                        self.map_param(&[t, p[1]], &mut x);
                        nodes.extend_from_slice(&x);
                        weights.push(w);
                    }
                }
                Some(Quadrature::new(3, nodes, weights))
            }
        }
    }

    /// Deterministic evaluation grid: uniform in 1D (endpoints included), tensor
    /// grid plus a Halton fill in higher parameter dimensions.
    pub fn grid(&self, size: usize) -> Vec<Vec<f64>> {
        let size = size.max(1);
        let (lo, hi) = self.param_bounds();
        let pd = lo.len();
        let mut params: Vec<Vec<f64>> = Vec::new();
        if pd == 1 {
            if size == 1 {
                params.push(vec![0.5 * (lo[0] + hi[0])]);
            } else {
                for j in 0..size {
                    params.push(vec![lo[0] + (hi[0] - lo[0]) * j as f64 / (size - 1) as f64]);
                }
            }
        } else {
            let per_axis = ((size as f64).powf(1.0 / pd as f64).floor() as usize).max(1);
            let total = per_axis.pow(pd as u32);
            for flat in 0..total {
                let mut rem = flat;
                let mut p = vec![0.0; pd];
                for d in (0..pd).rev() {
                    let i = rem % per_axis;
                    rem /= per_axis;
                    p[d] = lo[d] + (hi[d] - lo[d]) * (i as f64 + 0.5) / per_axis as f64;
                }
                params.push(p);
            }
            for k in 0..size {
                let p: Vec<f64> = (0..pd)
                    .map(|d| lo[d] + (hi[d] - lo[d]) * halton(k + 1, PRIMES[d % PRIMES.len()]))
                    .collect();
                params.push(p);
            }
        }
        let mut out = Vec::with_capacity(params.len());
        let mut x = Vec::new();
        for mut p in params {
            if matches!(self.shape, Shape::Torus { .. }) {
                for (v, b) in p.iter_mut().zip(&hi) {
                    if *v >= *b {
                        *v = b - 1e-15;
                    }
                }
            }
            if let Shape::CubeSurface { .. } = self.shape {
                p[0] = p[0].min(6.0 - 1e-15);
            }
            if self.map_param(&p, &mut x) {
                out.push(x.clone());
            }
        }
        out
    }

    pub fn label(&self) -> String {
        match &self.shape {
            Shape::Box { lo, hi } => {
                let sides: Vec<String> = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| format!("[{a},{b}]"))
                    .collect();
                sides.join("x")
            }
            Shape::Torus { dim } => format!("torus^{dim}"),
            Shape::CubeSurface { half } => format!("cube-surface({half})"),
        }
    }
}

const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_probability_quadrature(domain: &Domain) {
        let q = domain.quadrature().expect("quadrature");
        let total: f64 = q.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "{}: weights sum {total}", domain.label());
        for (x, _) in q.iter() {
            assert!(domain.contains(x), "{}: node {x:?}", domain.label());
        }
    }

    #[test]
    fn quadratures_are_probability_measures() {
        check_probability_quadrature(&Domain::interval(-1.0, 1.0));
        check_probability_quadrature(&Domain::unit_box(&[-2.0, -2.0], &[2.0, 2.0]));
        check_probability_quadrature(&Domain::torus(3));
        check_probability_quadrature(&Domain::cube_surface(0.25));
    }

    #[test]
    fn rho_draws_satisfy_membership() {
        let mut rng = crate::seed::rng(1);
        for domain in [
            Domain::interval(0.0, 1.0),
            Domain::unit_box(&[0.0, 0.0], &[1.0, 1.0]),
            Domain::torus(3),
            Domain::cube_surface(0.25),
        ] {
            for _ in 0..1000 {
                let x = domain.sample_rho(&mut rng);
                assert!(domain.contains(&x), "{}: {x:?}", domain.label());
            }
        }
    }

    #[test]
    fn cube_surface_faces_are_equally_likely() {
        let domain = Domain::cube_surface(0.25);
        let mut rng = crate::seed::rng(2);
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            let x = domain.sample_rho(&mut rng);
            let axis = (0..3)
                .find(|&d| (x[d].abs() - 0.25).abs() < 1e-12)
                .unwrap();
            counts[2 * axis + usize::from(x[axis] > 0.0)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
        }
    }

    #[test]
    fn membership_rejects_interior_and_outside_points() {
        let cube = Domain::cube_surface(0.25);
        assert!(!cube.contains(&[0.0, 0.0, 0.0]));
        assert!(cube.contains(&[0.25, 0.1, -0.2]));
        assert!(!cube.contains(&[0.3, 0.1, 0.0]));
        let torus = Domain::torus(2);
        assert!(!torus.contains(&[0.5, 0.0]));
        assert!(torus.contains(&[-0.5, 0.0]));
    }

    #[test]
    fn grids_stay_inside() {
        for domain in [
            Domain::interval(0.0, 1.0),
            Domain::unit_box(&[0.0, 0.0], &[1.0, 1.0]),
            Domain::torus(3),
            Domain::cube_surface(0.25),
        ] {
            let grid = domain.grid(200);
            assert!(grid.len() >= 200);
            assert!(grid.iter().all(|x| domain.contains(x)));
        }
    }
}
