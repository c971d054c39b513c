//! The refinement loop.
//!
//! Starting from the constant bound `u ≡ cap`, every iteration samples from
//! `μ_u`, builds a scaled evaluation matrix `A` from those samples, and
//! tightens `u` by pushing the R factor of `[A; εI]` onto the stack. The loop
//! stops once the estimated `‖u‖₁` drops to `(C₂/C₁)·n^ε`, after which a final
//! weighted batch is drawn from the tightened `u`.
//!
//! Two modes are provided: `Faithful` keeps the logarithmic factors and every
//! factor; `Practical` drops the logs, samples `C₂n^ε` points per iteration,
//! draws `C₃‖u‖₁` final points, and keeps only a few factors.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::BasisSet;
use crate::christoffel::{stack_init, GramMatrix, PruneMode, RFactorStack};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::sampler::{
    estimate_l1_norm, log_factor, make_batch_from_values, sample_mu_u, ChainConfig, L1Method,
    SampleBatch, WeightRule,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RcsMode {
    Faithful,
    #[default]
    Practical,
}

/// `‖u‖₁` estimator selection for the refinement loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum L1Choice {
    /// Quadrature when the domain has a 1D or 2D rule, otherwise Monte Carlo
    /// with 20 draws per sample of the current iteration.
    #[default]
    Auto,
    Quadrature,
    MonteCarlo {
        count: usize,
    },
}

/// Constants and bounds for one refinement run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcsConfig {
    pub eps: f64,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default = "defaults::c1")]
    pub c1: f64,
    #[serde(default = "defaults::c2")]
    pub c2: f64,
    #[serde(default = "defaults::c3")]
    pub c3: f64,
    /// Upper bound on `‖k^ε‖_∞`; the initial value of `u`.
    pub cap_bound: f64,
    /// Upper bound on `n^ε`.
    pub n_eps_bound: f64,
    #[serde(default)]
    pub mode: RcsMode,
    /// Defaults to `10 + ⌈5 log₁₀ cap_bound⌉`.
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub l1_method: L1Choice,
    /// Defaults to first-plus-last-two in practical mode and keep-all in faithful mode.
    #[serde(default)]
    pub prune_mode: Option<PruneMode>,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn delta() -> f64 {
        0.5
    }
    pub fn c1() -> f64 {
        5.0
    }
    pub fn c2() -> f64 {
        25.0
    }
    pub fn c3() -> f64 {
        10.0
    }
}

impl RcsConfig {
    /// Practical-mode defaults: `C₁ = 5`, `C₂ = 25`, `C₃ = 10`, `Δ = 1/2`.
    pub fn practical(eps: f64, cap_bound: f64, n_eps_bound: f64, seed: u64) -> Self {
        RcsConfig {
            eps,
            delta: defaults::delta(),
            c1: defaults::c1(),
            c2: defaults::c2(),
            c3: defaults::c3(),
            cap_bound,
            n_eps_bound,
            mode: RcsMode::Practical,
            max_iters: None,
            chain: ChainConfig::default(),
            l1_method: L1Choice::Auto,
            prune_mode: None,
            seed,
        }
    }

    pub fn faithful(eps: f64, cap_bound: f64, n_eps_bound: f64, seed: u64) -> Self {
        RcsConfig {
            mode: RcsMode::Faithful,
            ..RcsConfig::practical(eps, cap_bound, n_eps_bound, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Argument(msg));
        if !(self.eps > 0.0) {
            return fail(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return fail(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.c1 >= 1.0 && self.c2 >= self.c1) {
            return fail(format!("need c2 >= c1 >= 1, got c1={}, c2={}", self.c1, self.c2));
        }
        if !(self.c3 > 0.0) {
            return fail(format!("c3 must be positive, got {}", self.c3));
        }
        if !(self.n_eps_bound > 0.0) || !self.cap_bound.is_finite() {
            return fail("bounds must be positive and finite".into());
        }
        if self.cap_bound < self.n_eps_bound {
            return fail(format!(
                "cap_bound ({}) must be at least n_eps_bound ({})",
                self.cap_bound, self.n_eps_bound
            ));
        }
        if self.max_iters == Some(0) {
            return fail("max_iters must be at least 1".into());
        }
        self.chain.validate()
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
            .unwrap_or_else(|| 10 + (5.0 * self.cap_bound.log10()).ceil().max(0.0) as usize)
    }

    pub fn prune_mode(&self) -> PruneMode {
        self.prune_mode.unwrap_or(match self.mode {
            RcsMode::Practical => PruneMode::FirstPlusLastTwo,
            RcsMode::Faithful => PruneMode::KeepAll,
        })
    }

    /// Samples drawn per refinement iteration.
    pub fn samples_per_iteration(&self) -> usize {
        match self.mode {
            RcsMode::Faithful => {
                (self.c2 * self.n_eps_bound * log_factor(self.n_eps_bound) + 1.0).ceil() as usize
            }
            RcsMode::Practical => (self.c2 * self.n_eps_bound).ceil() as usize,
        }
    }

    /// Size of the final batch for a given `‖u‖₁` estimate.
    pub fn final_batch_size(&self, l1: f64) -> usize {
        let size = match self.mode {
            RcsMode::Faithful => self.c1 * l1 * log_factor(self.n_eps_bound),
            RcsMode::Practical => self.c3 * l1,
        };
        (size.ceil() as usize).max(1)
    }

    fn weight_rule(&self) -> WeightRule {
        match self.mode {
            RcsMode::Faithful => WeightRule::Logarithmic {
                c1: self.c1,
                n_eps: self.n_eps_bound,
            },
            RcsMode::Practical => WeightRule::Practical { c1: self.c1 },
        }
    }
}

/// `α = C₂ n^ε / (C₁ ‖u‖₁)`.
pub fn alpha_schedule(c1: f64, c2: f64, n_eps_bound: f64, l1_estimate: f64) -> f64 {
    c2 * n_eps_bound / (c1 * l1_estimate)
}

/// Loop guard: refine while `‖u‖₁ > (C₂/C₁) n^ε`, i.e. while `α < 1`.
pub fn should_refine(c1: f64, c2: f64, n_eps_bound: f64, l1_estimate: f64) -> bool {
    l1_estimate > c2 / c1 * n_eps_bound
}

/// Rows `conj(φ(x_k))ᵀ / √(C₁ u(x_k) [log n^ε])`.
pub fn build_a(
    basis: &BasisSet,
    points: &[Vec<f64>],
    u_values: &[f64],
    c1: f64,
    n_eps_bound: f64,
    mode: RcsMode,
) -> Result<CMatrix> {
    if points.is_empty() {
        return Err(Error::Argument("build_a needs at least one point".into()));
    }
    if points.len() != u_values.len() {
        return Err(Error::Data("points and u values differ in length".into()));
    }
    if let Some(bad) = u_values.iter().find(|u| !(**u > 0.0)) {
        return Err(Error::Data(format!("u must be positive, got {bad}")));
    }
    let log = match mode {
        RcsMode::Faithful => log_factor(n_eps_bound),
        RcsMode::Practical => 1.0,
    };
    let mut a = basis.eval_rows(points);
    for (k, &u) in u_values.iter().enumerate() {
        let scale = 1.0 / (c1 * u * log).sqrt();
        for v in a.row_mut(k).iter_mut() {
            *v = v.conj() * scale;
        }
    }
    Ok(a)
}

/// Diagnostics of one refinement iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub samples: usize,
    /// `‖u‖₁` estimate before the update.
    pub l1_before: f64,
    pub alpha: f64,
    /// `‖u‖₁` estimate after the update.
    pub l1_estimate: f64,
    pub elapsed_secs: f64,
}

/// Outcome of a refinement run.
#[derive(Debug, Clone)]
pub struct RcsReport {
    pub config: RcsConfig,
    pub records: Vec<IterationRecord>,
    pub final_batch: SampleBatch,
    pub final_stack: RFactorStack,
    pub final_l1: f64,
    pub total_samples: usize,
    pub iterations: usize,
}

impl RcsReport {
    /// `‖u‖₁` estimates, starting with the initial cap.
    pub fn l1_trace(&self) -> Vec<f64> {
        std::iter::once(self.config.cap_bound)
            .chain(self.records.iter().map(|r| r.l1_estimate))
            .collect()
    }

    /// Numerical dimension of the final batch's normalized discrete Gram.
    ///
    /// Diagnostic only: it systematically underestimates `n^ε` for redundant
    /// bases and must not be fed back as `n_eps_bound`.
    pub fn n_eps_from_batch(&self, basis: &BasisSet) -> Result<f64> {
        let m = self.final_batch.len() as f64;
        let weights: Vec<f64> = self
            .final_batch
            .u_values
            .iter()
            .map(|u| self.final_l1 / (u * m))
            .collect();
        let gram = GramMatrix::from_weighted_points(
            basis,
            &self.final_batch.points,
            &weights,
            crate::christoffel::GramSource::WeightedSample {
                points: self.final_batch.len(),
            },
        );
        crate::christoffel::numerical_dimension(&gram, self.config.eps)
    }
}

/// Hex digest identifying an upper bound (cap, Δ and every retained factor).
pub fn stack_digest(stack: &RFactorStack) -> String {
    let mut hasher = Sha256::new();
    hasher.update(stack.cap().to_le_bytes());
    hasher.update(stack.delta().to_le_bytes());
    hasher.update((stack.pushes() as u64).to_le_bytes());
    for r in stack.factors() {
        for z in r.iter() {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
    }
    hex::encode(&hasher.finalize()[..8])
}

fn resolve_l1(cfg: &RcsConfig, basis: &BasisSet, samples: usize, stream: u64) -> L1Method {
    let mc = |count: usize| L1Method::MonteCarlo {
        count: count.max(1),
        seed: seed::derive_seed(cfg.seed, seed::ESTIMATE, stream),
    };
    match cfg.l1_method {
        L1Choice::Quadrature => L1Method::Quadrature,
        L1Choice::MonteCarlo { count } => mc(count),
        L1Choice::Auto => {
            let domain = basis.domain();
            if domain.param_dim() <= 2 && domain.quadrature().is_some() {
                L1Method::Quadrature
            } else {
                mc(20 * samples)
            }
        }
    }
}

/// Runs the refinement loop and draws the final batch.
pub fn run_rcs(basis: &BasisSet, cfg: &RcsConfig) -> Result<RcsReport> {
    run_rcs_observed(basis, cfg, |_, _| {})
}

/// As [`run_rcs`], calling `observer` after every iteration with the updated stack.
pub fn run_rcs_observed<F>(basis: &BasisSet, cfg: &RcsConfig, mut observer: F) -> Result<RcsReport>
where
    F: FnMut(&IterationRecord, &RFactorStack),
{
    cfg.validate()?;
    let start = Instant::now();
    let domain = basis.domain();
    let mut stack = stack_init(cfg.cap_bound, cfg.delta, cfg.prune_mode())?;
    // u ≡ cap integrates to exactly cap against a probability measure.
    let mut l1 = cfg.cap_bound;
    let mut records = Vec::new();
    let mut total_samples = 0;
    let per_iteration = cfg.samples_per_iteration();
    let max_iters = cfg.max_iters();

    while should_refine(cfg.c1, cfg.c2, cfg.n_eps_bound, l1) {
        let iteration = records.len();
        if iteration >= max_iters {
            let mut trace = vec![cfg.cap_bound];
            trace.extend(records.iter().map(|r: &IterationRecord| r.l1_estimate));
            return Err(Error::NonTermination {
                iterations: iteration,
                trace,
            });
        }
        let chain = ChainConfig {
            seed: seed::derive_seed(cfg.seed, seed::ITERATION, iteration as u64),
            ..cfg.chain.clone()
        };
        let u = stack.bind(basis);
        let points = sample_mu_u(&u, domain, per_iteration, &chain)?;
        let u_values = u.eval_many(&points);
        let a = build_a(basis, &points, &u_values, cfg.c1, cfg.n_eps_bound, cfg.mode)?;
        stack.push_mut(&a, cfg.eps)?;
        total_samples += points.len();

        let method = resolve_l1(cfg, basis, per_iteration, iteration as u64);
        let l1_before = l1;
        l1 = estimate_l1_norm(&stack.bind(basis), domain, &method)?;
        let record = IterationRecord {
            iteration: iteration + 1,
            samples: points.len(),
            l1_before,
            alpha: alpha_schedule(cfg.c1, cfg.c2, cfg.n_eps_bound, l1_before),
            l1_estimate: l1,
            elapsed_secs: start.elapsed().as_secs_f64(),
        };
        observer(&record, &stack);
        records.push(record);
    }

    let size = cfg.final_batch_size(l1);
    let chain = ChainConfig {
        seed: seed::derive_seed(cfg.seed, seed::FINAL, 0),
        ..cfg.chain.clone()
    };
    let u = stack.bind(basis);
    let points = sample_mu_u(&u, domain, size, &chain)?;
    let u_values = u.eval_many(&points);
    let final_batch =
        make_batch_from_values(points, u_values, l1, cfg.weight_rule(), stack_digest(&stack))?;
    total_samples += final_batch.len();

    Ok(RcsReport {
        config: cfg.clone(),
        iterations: records.len(),
        records,
        final_batch,
        final_stack: stack,
        final_l1: l1,
        total_samples,
    })
}
