//! Text serialization of batches, matrices, stacks, fits and run reports.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every finite `f64` exactly. Complex entries use the `a+bi` form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::christoffel::{PruneMode, RFactorStack};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::lsq::FitResult;
use crate::rcs::{stack_digest, IterationRecord, RcsConfig, RcsReport};
use crate::sampler::{BatchMeta, SampleBatch};

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn parse_c64(s: &str) -> Result<C64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a complex number: {s:?}")))
}

fn fmt_c64(z: C64) -> String {
    if z.im == 0.0 {
        format!("{:.16e}", z.re)
    } else {
        format!("{z:.16e}")
    }
}

fn header_json<T: for<'de> Deserialize<'de>>(line: Option<&str>, what: &str) -> Result<T> {
    let line = line
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::Parse(format!("{what}: missing '#' metadata line")))?;
    serde_json::from_str(line.trim()).map_err(|e| Error::Parse(format!("{what} metadata: {e}")))
}

/// CSV with a `#`-prefixed JSON metadata line, a header row and columns
/// `x_1..x_d, weight, u_value`.
pub fn batch_to_csv(batch: &SampleBatch) -> String {
    let mut out = String::new();
    let meta = serde_json::to_string(&batch.meta).expect("batch metadata serializes");
    writeln!(out, "# {meta}").unwrap();
    let d = batch.dim();
    let header: Vec<String> = (1..=d)
        .map(|i| format!("x_{i}"))
        .chain(["weight".into(), "u_value".into()])
        .collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    for ((x, w), u) in batch.points.iter().zip(&batch.weights).zip(&batch.u_values) {
        for v in x {
            write!(out, "{v:.16e},").unwrap();
        }
        writeln!(out, "{w:.16e},{u:.16e}").unwrap();
    }
    out
}

pub fn batch_from_csv(text: &str) -> Result<SampleBatch> {
    let mut lines = text.lines();
    let meta: BatchMeta = header_json(lines.next(), "batch")?;
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("batch: missing header row".into()))?;
    let cols = header.split(',').count();
    if cols != meta.dim + 2 {
        return Err(Error::Parse(format!(
            "batch: {cols} columns for dimension {}",
            meta.dim
        )));
    }
    let (mut points, mut weights, mut u_values) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<f64> = line.split(',').map(parse_f64).collect::<Result<_>>()?;
        if fields.len() != cols {
            return Err(Error::Parse(format!("batch row {}: {} fields", i + 1, fields.len())));
        }
        points.push(fields[..meta.dim].to_vec());
        weights.push(fields[meta.dim]);
        u_values.push(fields[meta.dim + 1]);
    }
    Ok(SampleBatch {
        points,
        weights,
        u_values,
        meta,
    })
}

/// One matrix row per line; real entries plain, complex ones as `a+bi`.
pub fn matrix_to_csv(m: &CMatrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|z| fmt_c64(*z)).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

/// Reads a rectangular CSV matrix; `#` lines and blank lines are skipped.
pub fn matrix_from_csv(text: &str) -> Result<CMatrix> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows.push(line.split(',').map(parse_c64).collect::<Result<_>>()?);
    }
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 {
        return Err(Error::Parse("matrix file is empty".into()));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("matrix rows have different lengths".into()));
    }
    Ok(CMatrix::from_row_iterator(rows.len(), n, rows.into_iter().flatten()))
}

#[derive(Serialize, Deserialize)]
struct FactorJson {
    n: usize,
    /// Row-major real parts.
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StackJson {
    cap: f64,
    delta: f64,
    prune_mode: PruneMode,
    pushes: usize,
    factors: Vec<FactorJson>,
    digest: String,
}

pub fn stack_to_json(stack: &RFactorStack) -> String {
    let factors = stack
        .factors()
        .iter()
        .map(|r| {
            let n = r.nrows();
            let mut re = Vec::with_capacity(n * n);
            let mut im = Vec::with_capacity(n * n);
            for row in r.row_iter() {
                for z in row.iter() {
                    re.push(z.re);
                    im.push(z.im);
                }
            }
            FactorJson { n, re, im }
        })
        .collect();
    let json = StackJson {
        cap: stack.cap(),
        delta: stack.delta(),
        prune_mode: stack.prune_mode(),
        pushes: stack.pushes(),
        factors,
        digest: stack_digest(stack),
    };
    serde_json::to_string_pretty(&json).expect("stack serializes")
}

/// Parses a stack and checks its digest.
pub fn stack_from_json(text: &str) -> Result<RFactorStack> {
    let json: StackJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("stack: {e}")))?;
    let factors = json
        .factors
        .into_iter()
        .map(|f| {
            if f.re.len() != f.n * f.n || f.im.len() != f.n * f.n {
                return Err(Error::Parse("stack factor has the wrong number of entries".into()));
            }
            let entries = f.re.iter().zip(&f.im).map(|(&a, &b)| C64::new(a, b));
            Ok(CMatrix::from_row_iterator(f.n, f.n, entries))
        })
        .collect::<Result<Vec<_>>>()?;
    let stack = RFactorStack::from_parts(json.cap, json.delta, json.prune_mode, factors, json.pushes)?;
    let digest = stack_digest(&stack);
    if digest != json.digest {
        return Err(Error::Data(format!(
            "stack digest mismatch: file says {}, contents give {digest}",
            json.digest
        )));
    }
    Ok(stack)
}

#[derive(Serialize, Deserialize)]
struct FitHeader {
    eps_used: f64,
    residual_norm: f64,
    design_digest: String,
}

/// `#` JSON metadata line, then `index,re,im` rows.
pub fn fit_to_csv(fit: &FitResult) -> String {
    let mut out = String::new();
    let header = FitHeader {
        eps_used: fit.eps_used,
        residual_norm: fit.residual_norm,
        design_digest: fit.design_digest.clone(),
    };
    writeln!(out, "# {}", serde_json::to_string(&header).unwrap()).unwrap();
    writeln!(out, "index,re,im").unwrap();
    for (i, c) in fit.coefficients.iter().enumerate() {
        writeln!(out, "{i},{:.16e},{:.16e}", c.re, c.im).unwrap();
    }
    out
}

pub fn fit_from_csv(text: &str) -> Result<FitResult> {
    let mut lines = text.lines();
    let header: FitHeader = header_json(lines.next(), "fit")?;
    lines.next();
    let mut coefficients = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::Parse(format!("fit row {line:?} needs three fields")));
        }
        coefficients.push(C64::new(parse_f64(f[1])?, parse_f64(f[2])?));
    }
    Ok(FitResult {
        coefficients,
        eps_used: header.eps_used,
        residual_norm: header.residual_norm,
        design_digest: header.design_digest,
    })
}

/// Structured summary of a refinement run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub basis: String,
    pub config: RcsConfig,
    pub iterations: usize,
    pub total_samples: usize,
    pub final_l1: f64,
    pub final_batch_size: usize,
    pub records: Vec<IterationRecord>,
    pub batch_path: Option<String>,
    pub stack_path: Option<String>,
    pub stack_digest: String,
}

impl ReportFile {
    pub fn new(basis: &str, report: &RcsReport) -> Self {
        ReportFile {
            basis: basis.to_string(),
            config: report.config.clone(),
            iterations: report.iterations,
            total_samples: report.total_samples,
            final_l1: report.final_l1,
            final_batch_size: report.final_batch.len(),
            records: report.records.clone(),
            batch_path: None,
            stack_path: None,
            stack_digest: stack_digest(&report.final_stack),
        }
    }

    /// Fixed-width per-iteration table.
    pub fn table(&self) -> String {
        let mut out = String::from("iteration  samples        l1_estimate       alpha  elapsed_s\n");
        for r in &self.records {
            writeln!(
                out,
                "{:>9}  {:>7}  {:>17.6e}  {:>10.4e}  {:>9.3}",
                r.iteration, r.samples, r.l1_estimate, r.alpha, r.elapsed_secs
            )
            .unwrap();
        }
        out
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::christoffel::stack_init;
    use crate::linalg::real_matrix;
    use crate::sampler::{make_batch_from_values, WeightRule};

    #[test]
    fn batch_round_trip_is_exact() {
        let points = vec![vec![0.1, 1.0 / 3.0], vec![-2.0e-300, 7.25]];
        let batch = make_batch_from_values(
            points,
            vec![std::f64::consts::PI, 1e-7],
            2.5,
            WeightRule::Practical { c1: 5.0 },
            "abc".into(),
        )
        .unwrap();
        let text = batch_to_csv(&batch);
        assert!(text.lines().nth(1).unwrap() == "x_1,x_2,weight,u_value");
        assert_eq!(batch_from_csv(&text).unwrap(), batch);
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut m = real_matrix(2, 3, &[1.0, -0.1, 1.0 / 7.0, 0.0, 5e-320, 3.0]);
        m[(1, 0)] = C64::new(0.3, -1.0 / 3.0);
        assert_eq!(matrix_from_csv(&matrix_to_csv(&m)).unwrap(), m);
        assert!(matrix_from_csv("1,2\n3\n").is_err());
    }

    #[test]
    fn stack_round_trip_checks_digest() {
        let stack = stack_init(10.0, 0.5, PruneMode::FirstPlusLastTwo).unwrap();
        let a = real_matrix(3, 2, &[1.0, 0.5, -0.2, 2.0, 0.3, 0.7]);
        let stack = stack.push(&a, 0.1).unwrap();
        let text = stack_to_json(&stack);
        let back = stack_from_json(&text).unwrap();
        assert_eq!(back.factors(), stack.factors());
        let tampered = text.replacen("\"cap\": 10.0", "\"cap\": 11.0", 1);
        assert!(matches!(stack_from_json(&tampered), Err(Error::Data(_))));
    }

    #[test]
    fn fit_round_trip_is_exact() {
        let fit = FitResult {
            coefficients: vec![C64::new(0.1, 0.0), C64::new(-1.0 / 3.0, 2e-17)],
            eps_used: 1e-13,
            residual_norm: 0.25,
            design_digest: "d".into(),
        };
        assert_eq!(fit_from_csv(&fit_to_csv(&fit)).unwrap(), fit);
    }
}
