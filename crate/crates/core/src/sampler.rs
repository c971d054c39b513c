//! Sampling from `dμ_u = u dρ / ‖u‖₁` and estimating `‖u‖_{L¹_ρ}`.
//!
//! Draws come from a coordinate-wise slice sampler (stepping out and
//! shrinkage) run in the domain's parameter box, where ρ is uniform, so the
//! unnormalized target density is simply `u ∘ map`. Points whose image falls
//! outside the domain get density zero inside the shrinkage loop.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::christoffel::{GramMatrix, GramSource};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::quadrature::weighted_mean;
use crate::seed;

const START_RETRIES: usize = 1000;
const MAX_SHRINK: usize = 400;

/// Strictly positive function that can be evaluated on domain points.
pub trait PositiveFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;

    fn values(&self, points: &[Vec<f64>]) -> Vec<f64> {
        points.par_iter().map(|x| self.value(x)).collect()
    }
}

impl<F> PositiveFunction for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Markov chain settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Transitions discarded before the first retained draw.
    pub burn_in: usize,
    /// Transitions between retained draws; `None` means one sweep, `max(1, d)`.
    pub thinning: Option<usize>,
    /// Initial slice width per parameter coordinate; `None` uses the full box width.
    pub width: Option<Vec<f64>>,
    pub seed: u64,
    /// Independent chains, each started from a ρ-draw. Several short chains
    /// cover densities with pole-like peaks far better than one long chain.
    pub chains: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 200,
            thinning: None,
            width: None,
            seed: 0,
            chains: 4,
        }
    }
}

impl ChainConfig {
    pub fn with_seed(seed: u64) -> Self {
        ChainConfig {
            seed,
            ..ChainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thinning == Some(0) {
            return Err(Error::Argument("thinning must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Argument("chains must be at least 1".into()));
        }
        if let Some(w) = &self.width {
            if w.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Argument("slice widths must be positive".into()));
            }
        }
        Ok(())
    }
}

struct Chain<'a, U: ?Sized> {
    u: &'a U,
    domain: &'a Domain,
    lo: Vec<f64>,
    hi: Vec<f64>,
    width: Vec<f64>,
    rng: ChaCha8Rng,
    point: Vec<f64>,
    log_density: f64,
    coordinate: usize,
    scratch: Vec<f64>,
}

impl<'a, U: PositiveFunction + ?Sized> Chain<'a, U> {
    fn log_density(&mut self, p: &[f64]) -> f64 {
        if !self.domain.map_param(p, &mut self.scratch) || !self.domain.contains(&self.scratch) {
            return f64::NEG_INFINITY;
        }
        let v = self.u.value(&self.scratch);
        if v > 0.0 && v.is_finite() {
            v.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn start(u: &'a U, domain: &'a Domain, width: Vec<f64>, seed: u64) -> Result<Self> {
        let (lo, hi) = domain.param_bounds();
        let mut chain = Chain {
            u,
            domain,
            lo,
            hi,
            width,
            rng: seed::rng(seed),
            point: Vec::new(),
            log_density: f64::NEG_INFINITY,
            coordinate: 0,
            scratch: Vec::with_capacity(domain.dim()),
        };
        for _ in 0..START_RETRIES {
            let p = domain.sample_param(&mut chain.rng);
            let ld = chain.log_density(&p);
            if ld.is_finite() {
                chain.point = p;
                chain.log_density = ld;
                return Ok(chain);
            }
        }
        Err(Error::Sampler(format!(
            "no starting point with positive finite density after {START_RETRIES} draws"
        )))
    }

    /// One univariate slice update of the current coordinate.
    fn step(&mut self) {
        let i = self.coordinate;
        self.coordinate = (self.coordinate + 1) % self.point.len();
        let level = self.log_density + self.rng.gen::<f64>().ln();
        let x0 = self.point[i];
        let w = self.width[i];
        let (lo, hi) = (self.lo[i], self.hi[i]);

        let mut probe = self.point.clone();
        let (mut left, mut right) = if w >= hi - lo {
            // A width covering the box makes the whole box a valid bracket.
            (lo, hi)
        } else {
            self.step_out(&mut probe, i, x0, w, level)
        };

        for _ in 0..MAX_SHRINK {
            let candidate = left + (right - left) * self.rng.gen::<f64>();
            probe[i] = candidate;
            let ld = self.log_density(&probe);
            if ld > level {
                self.point = probe;
                self.log_density = ld;
                return;
            }
            if candidate < x0 {
                left = candidate;
            } else {
                right = candidate;
            }
        }
    }

    /// Stepping-out bracket of width multiples of `w`, clipped to the box.
    fn step_out(&mut self, probe: &mut [f64], i: usize, x0: f64, w: f64, level: f64) -> (f64, f64) {
        let (lo, hi) = (self.lo[i], self.hi[i]);
        let mut left = x0 - w * self.rng.gen::<f64>();
        let mut right = left + w;
        while left > lo {
            probe[i] = left;
            if self.log_density(probe) <= level {
                break;
            }
            left -= w;
        }
        while right < hi {
            probe[i] = right;
            if self.log_density(probe) <= level {
                break;
            }
            right += w;
        }
        (left.max(lo), right.min(hi))
    }

    fn current(&mut self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.domain.dim());
        self.domain.map_param(&self.point, &mut x);
        x
    }
}

/// Draws `count` points approximately distributed as `μ_u ∝ u dρ`.
///
/// Deterministic given `cfg.seed`. Chains run concurrently and their draws are
/// concatenated in chain order.
pub fn sample_mu_u<U: PositiveFunction + ?Sized>(
    u: &U,
    domain: &Domain,
    count: usize,
    cfg: &ChainConfig,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::Argument("count must be at least 1".into()));
    }
    cfg.validate()?;
    let (lo, hi) = domain.param_bounds();
    let pd = lo.len();
    let width = match &cfg.width {
        Some(w) if w.len() == pd => w.clone(),
        Some(w) => {
            return Err(Error::Argument(format!(
                "expected {pd} slice widths, got {}",
                w.len()
            )))
        }
        None => lo.iter().zip(&hi).map(|(a, b)| b - a).collect(),
    };
    let thinning = cfg.thinning.unwrap_or(pd.max(1));
    let chains = cfg.chains.min(count);
    let per_chain: Vec<usize> = (0..chains)
        .map(|c| count / chains + usize::from(c < count % chains))
        .collect();

    let draws: Vec<Result<Vec<Vec<f64>>>> = per_chain
        .par_iter()
        .enumerate()
        .map(|(c, &len)| {
            let mut chain = Chain::start(
                u,
                domain,
                width.clone(),
                seed::derive_seed(cfg.seed, seed::CHAIN, c as u64),
            )?;
            for _ in 0..cfg.burn_in {
                chain.step();
            }
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                for _ in 0..thinning {
                    chain.step();
                }
                out.push(chain.current());
            }
            Ok(out)
        })
        .collect();

    let mut points = Vec::with_capacity(count);
    for d in draws {
        points.extend(d?);
    }
    Ok(points)
}

/// Estimator for `‖u‖_{L¹_ρ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum L1Method {
    MonteCarlo { count: usize, seed: u64 },
    Quadrature,
}

/// Estimates `∫ u dρ` by Monte Carlo over ρ or by the domain's quadrature rule.
pub fn estimate_l1_norm<U: PositiveFunction + ?Sized>(
    u: &U,
    domain: &Domain,
    method: &L1Method,
) -> Result<f64> {
    let estimate = match method {
        L1Method::MonteCarlo { count, seed } => {
            if *count == 0 {
                return Err(Error::Argument("Monte Carlo estimate needs count >= 1".into()));
            }
            let mut rng = seed::rng(*seed);
            let points: Vec<Vec<f64>> = (0..*count).map(|_| domain.sample_rho(&mut rng)).collect();
            let values = u.values(&points);
            weighted_mean(&values, &vec![1.0; values.len()])
        }
        L1Method::Quadrature => {
            let quad = domain.quadrature().ok_or_else(|| {
                Error::Capability(format!("no quadrature for {}", domain.label()))
            })?;
            let nodes: Vec<Vec<f64>> = quad.iter().map(|(x, _)| x.to_vec()).collect();
            quad.mean_of(&u.values(&nodes))
        }
    };
    if !(estimate > 0.0) || !estimate.is_finite() {
        return Err(Error::Numerical(format!("L1 estimate is not positive: {estimate}")));
    }
    Ok(estimate)
}

/// `max(ln n^ε, 1)`: the logarithmic oversampling factor, guarded so that
/// small numerical dimensions never shrink or zero the weights.
pub fn log_factor(n_eps: f64) -> f64 {
    n_eps.ln().max(1.0)
}

/// How least-squares weights are derived from `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum WeightRule {
    /// `w_k = 1 / (C₁ u(x_k) log n^ε)`
    Logarithmic { c1: f64, n_eps: f64 },
    /// `w_k = 1 / (C₁ u(x_k))`
    Practical { c1: f64 },
    /// `w_k = ‖u‖₁ / (u(x_k) m)`
    Normalized,
}

impl WeightRule {
    fn weight(&self, u: f64, l1: f64, m: usize) -> f64 {
        match *self {
            WeightRule::Logarithmic { c1, n_eps } => 1.0 / (c1 * u * log_factor(n_eps)),
            WeightRule::Practical { c1 } => 1.0 / (c1 * u),
            WeightRule::Normalized => l1 / (u * m as f64),
        }
    }
}

/// Provenance of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub dim: usize,
    pub l1: f64,
    pub rule: WeightRule,
    /// Digest of the upper bound that generated the batch, if any.
    pub digest: String,
}

/// Sample points with least-squares weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub u_values: Vec<f64>,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    /// Checks lengths, positivity and membership.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if self.points.len() != self.weights.len() || self.points.len() != self.u_values.len() {
            return Err(Error::Data("batch columns have different lengths".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Data("batch weights must be positive and finite".into()));
        }
        if let Some(x) = self.points.iter().find(|x| !domain.contains(x)) {
            return Err(Error::OutsideDomain(x.clone()));
        }
        Ok(())
    }

    /// Weighted discrete Gram `Σ_k w_k φ(x_k) φ(x_k)*`.
    pub fn weighted_gram(&self, basis: &BasisSet) -> GramMatrix {
        GramMatrix::from_weighted_points(
            basis,
            &self.points,
            &self.weights,
            GramSource::WeightedSample {
                points: self.len(),
            },
        )
    }
}

/// Attaches weights to sampled points.
pub fn make_batch<U: PositiveFunction + ?Sized>(
    points: Vec<Vec<f64>>,
    u: &U,
    l1: f64,
    rule: WeightRule,
) -> Result<SampleBatch> {
    let u_values = u.values(&points);
    make_batch_from_values(points, u_values, l1, rule, String::new())
}

pub fn make_batch_from_values(
    points: Vec<Vec<f64>>,
    u_values: Vec<f64>,
    l1: f64,
    rule: WeightRule,
    digest: String,
) -> Result<SampleBatch> {
    if !(l1 > 0.0) {
        return Err(Error::Argument(format!("l1 must be positive, got {l1}")));
    }
    if points.len() != u_values.len() {
        return Err(Error::Data("points and u values differ in length".into()));
    }
    if let Some(bad) = u_values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Data(format!("u must be positive at every point, got {bad}")));
    }
    let m = points.len();
    let weights = u_values.iter().map(|&u| rule.weight(u, l1, m)).collect();
    let dim = points.first().map_or(0, Vec::len);
    Ok(SampleBatch {
        points,
        weights,
        u_values,
        meta: BatchMeta {
            dim,
            l1,
            rule,
            digest,
        },
    })
}
