use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rcs_core::christoffel::{christoffel_report, default_eps, gram_dense};
use rcs_core::io::{
    batch_from_csv, batch_to_csv, fit_to_csv, matrix_from_csv, matrix_to_csv, read_text,
    stack_to_json, write_text, ReportFile,
};
use rcs_core::leverage::{ridge_leverage_scores, scale_rows, verify_reweighting, whack_a_mole, ReweightingReport};
use rcs_core::lsq::{l2_error, l2_norm, TargetSpec};
use rcs_core::rcs::run_rcs_observed;
use rcs_core::{BasisSet, RcsConfig};
use serde::Serialize;

use crate::config::{self, Config, UValues};
use crate::{Common, Failure};

pub fn progress(common: &Common, msg: impl AsRef<str>) {
    if !common.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    write_text(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn seed_of(common: &Common, cfg: &Config) -> u64 {
    common.seed.unwrap_or(cfg.seed)
}

/// `ε` from the first section that sets it, else the machine-precision default.
fn pick_eps(choices: &[Option<f64>], basis: &BasisSet, seed: u64) -> Result<f64, Failure> {
    match choices.iter().flatten().next() {
        Some(&eps) => Ok(eps),
        None => Ok(default_eps(basis, seed)?),
    }
}

pub fn sample(common: &Common) -> Result<(), Failure> {
    let loaded = config::load(common.config.as_deref(), true)?;
    let cfg = &loaded.config;
    let seed = seed_of(common, cfg);
    let spec = cfg.basis_spec()?;
    let basis = config::build_basis(spec)?;
    let eps = pick_eps(&[cfg.rcs.eps], &basis, seed)?;
    let rcs = cfg.rcs.resolve(&basis, eps, seed)?;
    progress(
        common,
        format!(
            "sampling {} (n = {}), eps = {eps:e}, cap = {:.4e}",
            basis.label(),
            basis.n(),
            rcs.cap_bound
        ),
    );
    let report = run_rcs_observed(&basis, &rcs, |rec, _| {
        progress(
            common,
            format!("  iteration {}: {} samples, l1 = {:.4e}", rec.iteration, rec.samples, rec.l1_estimate),
        )
    })?;

    let out = &common.out;
    let batch_path = write_out(out, "batch.csv", &batch_to_csv(&report.final_batch))?;
    let stack_path = write_out(out, "stack.json", &stack_to_json(&report.final_stack))?;
    let mut file = ReportFile::new(basis.label(), &report);
    file.batch_path = Some(batch_path.display().to_string());
    file.stack_path = Some(stack_path.display().to_string());
    write_out(out, "report.json", &to_json(&file))?;
    write_out(out, "config.toml", &echo_rcs(seed, cfg, &rcs)?)?;
    progress(common, file.table());
    progress(
        common,
        format!("wrote {} points to {}", report.final_batch.len(), batch_path.display()),
    );
    Ok(())
}

fn echo_rcs(seed: u64, cfg: &Config, rcs: &RcsConfig) -> anyhow::Result<String> {
    #[derive(Serialize)]
    struct Extra<'a> {
        rcs: &'a RcsConfig,
    }
    config::echo(seed, cfg.basis.as_ref(), Extra { rcs })
}

#[derive(Serialize)]
struct FitSummary {
    basis: String,
    target: TargetSpec,
    batch: String,
    batch_size: usize,
    eps: f64,
    /// Weighted discrete residual.
    residual_norm: f64,
    /// `‖f − f̃‖_{L²_ρ}` by quadrature; absent when the domain has no rule.
    l2_error: Option<f64>,
    relative_l2_error: Option<f64>,
    max_abs_coefficient: f64,
}

pub fn fit(common: &Common) -> Result<(), Failure> {
    let loaded = config::load(common.config.as_deref(), true)?;
    let cfg = &loaded.config;
    let seed = seed_of(common, cfg);
    let section = cfg
        .fit
        .as_ref()
        .ok_or_else(|| Failure::Usage(anyhow!("config has no [fit] section")))?;
    let basis = config::build_basis(cfg.basis_spec()?)?;
    let target = section.target.build(&basis).map_err(|e| Failure::Usage(e.into()))?;
    let batch_path = loaded.resolve(&section.batch);
    let text = read_text(&batch_path)
        .with_context(|| format!("cannot read batch {}", batch_path.display()))
        .map_err(Failure::Usage)?;
    let batch = batch_from_csv(&text).context("malformed batch")?;
    let eps = pick_eps(&[section.eps, cfg.rcs.eps], &basis, seed)?;
    let f = |x: &[f64]| target(x);
    let result = rcs_core::lsq::fit(&basis, f, &batch, eps)?;

    let error = l2_error(&basis, &result.coefficients, f).ok();
    let norm = l2_norm(&basis, f).ok();
    let summary = FitSummary {
        basis: basis.label().to_string(),
        target: section.target.clone(),
        batch: batch_path.display().to_string(),
        batch_size: batch.len(),
        eps,
        residual_norm: result.residual_norm,
        l2_error: error,
        relative_l2_error: error.zip(norm).filter(|(_, n)| *n > 0.0).map(|(e, n)| e / n),
        max_abs_coefficient: result.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max),
    };
    let out = &common.out;
    write_out(out, "fit.csv", &fit_to_csv(&result))?;
    write_out(out, "fit_summary.json", &to_json(&summary))?;
    #[derive(Serialize)]
    struct Extra {
        fit: config::FitSection,
    }
    let resolved = config::FitSection {
        eps: Some(eps),
        ..section.clone()
    };
    let echo = config::echo(seed, cfg.basis.as_ref(), Extra { fit: resolved })?;
    write_out(out, "config.toml", &echo)?;
    match error {
        Some(e) => progress(common, format!("L2 error {e:.6e}, residual {:.6e}", result.residual_norm)),
        None => progress(common, format!("residual {:.6e}", result.residual_norm)),
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleSummary {
    basis: String,
    n: usize,
    eps: f64,
    gram_points: usize,
    grid_points: usize,
    n_eps: f64,
    cap_estimate: f64,
    k_min: f64,
    k_max: f64,
    eigenvalues: Vec<f64>,
}

pub fn oracle(common: &Common) -> Result<(), Failure> {
    let loaded = config::load(common.config.as_deref(), true)?;
    let cfg = &loaded.config;
    let seed = seed_of(common, cfg);
    let basis = config::build_basis(cfg.basis_spec()?)?;
    let section = cfg.oracle.clone().unwrap_or_default();
    let eps = pick_eps(&[section.eps, cfg.rcs.eps], &basis, seed)?;
    let gram_points = section.gram_points.unwrap_or(100_000);
    let grid_points = section.grid_points.unwrap_or(1_000);
    if gram_points == 0 || grid_points == 0 {
        return Err(Failure::Usage(anyhow!("gram_points and grid_points must be positive")));
    }
    progress(common, format!("dense Gram of {} on {gram_points} points", basis.label()));
    let gram = gram_dense(&basis, gram_points, seed)?;
    let report = christoffel_report(&basis, &gram, eps, grid_points)?;

    let d = basis.domain().dim();
    let mut grid = String::new();
    let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).chain(["k_eps".into()]).collect();
    writeln!(grid, "{}", header.join(",")).unwrap();
    for (x, k) in report.grid.iter().zip(&report.k_values) {
        for v in x {
            write!(grid, "{v:.16e},").unwrap();
        }
        writeln!(grid, "{k:.16e}").unwrap();
    }
    let summary = OracleSummary {
        basis: basis.label().to_string(),
        n: basis.n(),
        eps,
        gram_points,
        grid_points: report.grid.len(),
        n_eps: report.n_eps,
        cap_estimate: report.cap_estimate,
        k_min: report.k_values.iter().copied().fold(f64::INFINITY, f64::min),
        k_max: report.k_values.iter().copied().fold(0.0, f64::max),
        eigenvalues: report.eigs.clone(),
    };
    let out = &common.out;
    write_out(out, "k_grid.csv", &grid)?;
    write_out(out, "gram.csv", &matrix_to_csv(gram.entries()))?;
    write_out(out, "oracle.json", &to_json(&summary))?;
    #[derive(Serialize)]
    struct Extra {
        oracle: config::OracleSection,
    }
    let resolved = config::OracleSection {
        eps: Some(eps),
        gram_points: Some(gram_points),
        grid_points: Some(grid_points),
    };
    write_out(out, "config.toml", &config::echo(seed, cfg.basis.as_ref(), Extra { oracle: resolved })?)?;
    progress(
        common,
        format!("n_eps = {:.6}, cap estimate = {:.6e}", summary.n_eps, summary.cap_estimate),
    );
    Ok(())
}

#[derive(Serialize)]
struct LeverageSummary {
    rows: usize,
    cols: usize,
    eps: f64,
    tol: f64,
    max_sweeps: usize,
    matrix_digest: String,
    n_eps: f64,
    converged: bool,
    sweeps: usize,
    guarantees: ReweightingReport,
}

pub fn leverage(common: &Common) -> Result<(), Failure> {
    let loaded = config::load(common.config.as_deref(), true)?;
    let cfg = &loaded.config;
    let section = cfg
        .leverage
        .as_ref()
        .ok_or_else(|| Failure::Usage(anyhow!("config has no [leverage] section")))?;
    let path = loaded.resolve(&section.matrix);
    let text = read_text(&path)
        .with_context(|| format!("cannot read matrix {}", path.display()))
        .map_err(Failure::Usage)?;
    let a = matrix_from_csv(&text).context("malformed matrix")?;
    let m = a.nrows();
    let u = match &section.u {
        UValues::Scalar(v) => vec![*v; m],
        UValues::List(v) if v.len() == m => v.clone(),
        UValues::List(v) => {
            return Err(Failure::Usage(anyhow!("{} u values for a matrix with {m} rows", v.len())))
        }
    };
    let tol = section.tol.unwrap_or(1e-10);
    let max_sweeps = section.max_sweeps.unwrap_or(500);

    let profile = ridge_leverage_scores(&a, section.eps)?;
    let result = whack_a_mole(&a, &u, section.eps, tol, max_sweeps)?;
    let after = ridge_leverage_scores(&scale_rows(&a, &result.diag_weights), section.eps)?;
    let guarantees = verify_reweighting(&a, &u, section.eps, tol, &result)?;

    let mut table = String::from("row,u,score,weight,weighted_score\n");
    for (k, uk) in u.iter().enumerate() {
        writeln!(
            table,
            "{k},{uk:.16e},{:.16e},{:.16e},{:.16e}",
            profile.scores[k], result.diag_weights[k], after.scores[k]
        )
        .unwrap();
    }
    let summary = LeverageSummary {
        rows: m,
        cols: a.ncols(),
        eps: section.eps,
        tol,
        max_sweeps,
        matrix_digest: profile.matrix_digest.clone(),
        n_eps: profile.n_eps_matrix,
        converged: result.converged,
        sweeps: result.sweeps,
        guarantees,
    };
    let out = &common.out;
    write_out(out, "leverage.csv", &table)?;
    write_out(out, "leverage.json", &to_json(&summary))?;
    progress(
        common,
        format!(
            "n_eps = {:.6}, {} sweeps, guarantees {}",
            summary.n_eps,
            summary.sweeps,
            if summary.guarantees.passed() { "hold" } else { "violated" }
        ),
    );
    Ok(())
}
