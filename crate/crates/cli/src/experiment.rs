//! Named experiments: seeded replicates over a size grid, with convergence
//! tables, spread bands and figures.

use std::fmt::Write as _;

use anyhow::anyhow;
use rayon::prelude::*;
use rcs_core::lsq::{fit, l2_error, oracle_best_error, Target, TargetSpec};
use rcs_core::rcs::run_rcs;
use rcs_core::sampler::{make_batch_from_values, WeightRule};
use rcs_core::seed::{self, derive_seed};
use rcs_core::stats::{geometric_mean, log_mean_std};
use rcs_core::{BasisSet, BasisSpec, RcsConfig, RcsReport};
use serde::Serialize;

use crate::commands::{progress, to_json, write_out};
use crate::config::{self, ExperimentSection};
use crate::plot::{self, Series};
use crate::{Common, Failure};

/// Stream tag for the uniform-ρ baseline batch of a replicate.
const UNIFORM: u64 = 0x554e_4946;

pub const NAMES: [&str; 6] = [
    "weighted-poly",
    "lightning-1d",
    "lightning-2d",
    "fourier-surface",
    "elm",
    "fourier-torus-sanity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    WeightedPoly,
    Lightning1d,
    Lightning2d,
    FourierSurface,
    Elm,
    TorusSanity,
}

impl Kind {
    fn parse(name: &str) -> Option<Kind> {
        Some(match name {
            "weighted-poly" => Kind::WeightedPoly,
            "lightning-1d" => Kind::Lightning1d,
            "lightning-2d" => Kind::Lightning2d,
            "fourier-surface" => Kind::FourierSurface,
            "elm" => Kind::Elm,
            "fourier-torus-sanity" => Kind::TorusSanity,
            _ => return None,
        })
    }

    fn grid(self) -> Vec<usize> {
        match self {
            Kind::WeightedPoly => vec![10, 20, 40],
            Kind::Lightning1d => vec![5, 10, 20, 40],
            Kind::Lightning2d => vec![5, 10, 15],
            Kind::FourierSurface => vec![1, 2, 3, 4],
            Kind::Elm => vec![100, 200, 400, 600],
            Kind::TorusSanity => vec![1],
        }
    }

    fn target(self) -> TargetSpec {
        match self {
            Kind::WeightedPoly => TargetSpec::Sumframe,
            Kind::Lightning1d => TargetSpec::Sqrt,
            Kind::Lightning2d => TargetSpec::EllipticSqrt,
            Kind::FourierSurface | Kind::TorusSanity => TargetSpec::SineSum,
            Kind::Elm => TargetSpec::Gaussian,
        }
    }

    fn eps(self) -> f64 {
        match self {
            Kind::WeightedPoly | Kind::Lightning1d => 1e-13,
            Kind::TorusSanity => 1e-7,
            _ => 1e-10,
        }
    }

    /// What a grid value controls.
    fn parameter(self) -> &'static str {
        match self {
            Kind::WeightedPoly | Kind::Elm => "n",
            Kind::Lightning1d | Kind::Lightning2d => "n1",
            Kind::FourierSurface | Kind::TorusSanity => "frequency",
        }
    }

    fn basis(self, g: usize, s: &ExperimentSection) -> BasisSpec {
        match self {
            Kind::WeightedPoly => BasisSpec::WeightedPoly {
                n1: g / 2,
                n2: g - g / 2,
                weight: Default::default(),
            },
            Kind::Lightning1d => BasisSpec::Lightning { n1: g, n2: None },
            Kind::Lightning2d => BasisSpec::Lightning2d {
                n1: g,
                n2: s.n2.unwrap_or(3),
                n3: s.n3.unwrap_or(10),
            },
            Kind::FourierSurface => BasisSpec::FourierSurface { nx: g, ny: g, nz: g },
            Kind::Elm => BasisSpec::Elm {
                n: g,
                seed: s.basis_seed.unwrap_or(0),
            },
            Kind::TorusSanity => BasisSpec::FourierTorus { nx: g, ny: g, nz: 0 },
        }
    }

    fn planar(self) -> bool {
        matches!(self, Kind::Lightning2d | Kind::FourierSurface | Kind::Elm)
    }
}

struct Replicate {
    index: usize,
    seed: u64,
    iterations: usize,
    total_samples: usize,
    batch_size: usize,
    final_l1: f64,
    error: f64,
    uniform_error: f64,
    /// Sup-norm relative deviation of `u` from `n/(1+ε²)` (orthonormal sanity case).
    u_deviation: Option<f64>,
    report: Option<RcsReport>,
}

fn run_replicate(
    kind: Kind,
    basis: &BasisSet,
    base: &RcsConfig,
    target: &Target,
    master: u64,
    index: usize,
    keep_report: bool,
) -> rcs_core::Result<Replicate> {
    let s = derive_seed(master, seed::REPLICATE, index as u64);
    let cfg = RcsConfig { seed: s, ..base.clone() };
    let f = |x: &[f64]| target(x);
    let report = run_rcs(basis, &cfg)?;
    let fitted = fit(basis, f, &report.final_batch, cfg.eps)?;
    let error = l2_error(basis, &fitted.coefficients, f)?;

    let m = report.final_batch.len();
    let mut rng = seed::rng(derive_seed(s, UNIFORM, 0));
    let points: Vec<Vec<f64>> = (0..m).map(|_| basis.domain().sample_rho(&mut rng)).collect();
    let uniform = make_batch_from_values(points, vec![1.0; m], 1.0, WeightRule::Normalized, String::new())?;
    let uniform_fit = fit(basis, f, &uniform, cfg.eps)?;
    let uniform_error = l2_error(basis, &uniform_fit.coefficients, f)?;

    let u_deviation = (kind == Kind::TorusSanity).then(|| {
        let level = basis.n() as f64 / (1.0 + cfg.eps * cfg.eps);
        let grid = basis.domain().grid(1_000);
        report
            .final_stack
            .bind(basis)
            .eval_many(&grid)
            .iter()
            .map(|u| (u - level).abs() / level)
            .fold(0.0, f64::max)
    });

    Ok(Replicate {
        index,
        seed: s,
        iterations: report.iterations,
        total_samples: report.total_samples,
        batch_size: m,
        final_l1: report.final_l1,
        error,
        uniform_error,
        u_deviation,
        report: keep_report.then_some(report),
    })
}

struct Band {
    geomean: f64,
    min: f64,
    max: f64,
    sigma_lo: f64,
    sigma_hi: f64,
}

fn band(values: &[f64]) -> Band {
    let (mean, std) = log_mean_std(values);
    Band {
        geomean: geometric_mean(values),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(0.0, f64::max),
        sigma_lo: (mean - std).exp(),
        sigma_hi: (mean + std).exp(),
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    name: &'a str,
    parameter: &'a str,
    grid: &'a [usize],
    reps: usize,
    target: &'a TargetSpec,
    eps: f64,
    field_grid: usize,
    seeds: Vec<u64>,
    rcs: Vec<&'a RcsConfig>,
}

pub fn run(common: &Common, name: Option<&str>) -> Result<(), Failure> {
    let loaded = config::load(common.config.as_deref(), false)?;
    let cfg = &loaded.config;
    let section = cfg.experiment.clone().unwrap_or_default();
    let name = name
        .map(str::to_string)
        .or_else(|| section.name.clone())
        .ok_or_else(|| Failure::Usage(anyhow!("no experiment name; expected one of {}", NAMES.join(", "))))?;
    let kind = Kind::parse(&name).ok_or_else(|| {
        Failure::Usage(anyhow!("unknown experiment {name:?}; expected one of {}", NAMES.join(", ")))
    })?;
    let master = common.seed.unwrap_or(cfg.seed);
    let reps = common.reps.or(section.reps).unwrap_or(10);
    let grid = section.grid.clone().unwrap_or_else(|| kind.grid());
    if reps == 0 || grid.is_empty() {
        return Err(Failure::Usage(anyhow!("need at least one replicate and one grid value")));
    }
    let target_spec = section.target.clone().unwrap_or_else(|| kind.target());
    let eps = section.eps.or(cfg.rcs.eps).unwrap_or_else(|| kind.eps());
    let field_grid = section.field_grid.unwrap_or(100);
    let out = &common.out;

    let mut replicates_csv = String::from(
        "parameter,n,replicate,seed,iterations,total_samples,batch_size,final_l1,rcs_error,uniform_error\n",
    );
    let mut summary_csv = String::from(
        "parameter,n,reps,rcs_geomean,rcs_min,rcs_max,rcs_sigma_lo,rcs_sigma_hi,\
         uniform_geomean,uniform_min,uniform_max,uniform_sigma_lo,uniform_sigma_hi,oracle_error\n",
    );
    let mut sanity_csv = String::from("replicate,seed,iterations,u_deviation\n");
    let mut configs = Vec::new();
    let mut rows: Vec<(f64, Band, Band, Option<f64>)> = Vec::new();
    let mut last: Option<(BasisSet, RcsReport)> = None;

    for (gi, &g) in grid.iter().enumerate() {
        let spec = kind.basis(g, &section);
        let basis = config::build_basis(&spec)?;
        let target = target_spec.build(&basis).map_err(|e| Failure::Usage(e.into()))?;
        let base = cfg.rcs.resolve(&basis, eps, master)?;
        progress(
            common,
            format!("{name}: {}={g} (n = {}), {reps} replicates", kind.parameter(), basis.n()),
        );
        let is_last = gi + 1 == grid.len();
        let results: Vec<Replicate> = (0..reps)
            .into_par_iter()
            .map(|r| run_replicate(kind, &basis, &base, &target, master, r, is_last && r == 0))
            .collect::<rcs_core::Result<_>>()?;
        let oracle = oracle_best_error(&basis, |x: &[f64]| target(x), eps).ok();

        for rep in &results {
            writeln!(
                replicates_csv,
                "{g},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
                basis.n(),
                rep.index,
                rep.seed,
                rep.iterations,
                rep.total_samples,
                rep.batch_size,
                rep.final_l1,
                rep.error,
                rep.uniform_error
            )
            .unwrap();
            if let Some(dev) = rep.u_deviation {
                writeln!(sanity_csv, "{},{},{},{dev:.16e}", rep.index, rep.seed, rep.iterations).unwrap();
            }
        }
        let errors: Vec<f64> = results.iter().map(|r| r.error).collect();
        let uniform: Vec<f64> = results.iter().map(|r| r.uniform_error).collect();
        let (a, b) = (band(&errors), band(&uniform));
        writeln!(
            summary_csv,
            "{g},{},{reps},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            basis.n(),
            a.geomean,
            a.min,
            a.max,
            a.sigma_lo,
            a.sigma_hi,
            b.geomean,
            b.min,
            b.max,
            b.sigma_lo,
            b.sigma_hi,
            oracle.map(|e| format!("{e:.16e}")).unwrap_or_default()
        )
        .unwrap();
        progress(
            common,
            format!("  geometric mean error: rcs {:.3e}, uniform {:.3e}", a.geomean, b.geomean),
        );
        rows.push((basis.n() as f64, a, b, oracle));
        configs.push(base);
        if let Some(report) = results.into_iter().find_map(|r| r.report) {
            last = Some((basis, report));
        }
    }

    write_out(out, "replicates.csv", &replicates_csv)?;
    write_out(out, "summary.csv", &summary_csv)?;
    if kind == Kind::TorusSanity {
        write_out(out, "sanity.csv", &sanity_csv)?;
    }
    write_out(out, "errors.svg", &error_plot(&name, &rows))?;

    if kind.planar() {
        let (basis, report) = last.as_ref().expect("last grid value keeps its first report");
        write_out(out, "u_field.csv", &u_field(basis, report, field_grid))?;
        write_out(out, "scatter.csv", &scatter_csv(report))?;
        if basis.domain().dim() == 2 {
            let (lo, hi) = basis.domain().bounds();
            let pts: Vec<(f64, f64)> = report.final_batch.points.iter().map(|x| (x[0], x[1])).collect();
            let title = format!("{name}: sample points (n = {})", basis.n());
            write_out(out, "scatter.svg", &plot::scatter(&title, &pts, [lo[0], lo[1]], [hi[0], hi[1]]))?;
        }
    }

    let resolved = Resolved {
        name: &name,
        parameter: kind.parameter(),
        grid: &grid,
        reps,
        target: &target_spec,
        eps,
        field_grid,
        seeds: (0..reps as u64).map(|r| derive_seed(master, seed::REPLICATE, r)).collect(),
        rcs: configs.iter().collect(),
    };
    write_out(out, "experiment.json", &to_json(&resolved))?;
    let mut echoed = section.clone();
    echoed.name = Some(name.clone());
    echoed.grid = Some(grid.clone());
    echoed.reps = Some(reps);
    echoed.target = Some(target_spec.clone());
    echoed.eps = Some(eps);
    echoed.field_grid = Some(field_grid);
    #[derive(Serialize)]
    struct Extra {
        experiment: ExperimentSection,
    }
    write_out(out, "config.toml", &config::echo(master, None, Extra { experiment: echoed })?)?;
    Ok(())
}

fn error_plot(name: &str, rows: &[(f64, Band, Band, Option<f64>)]) -> String {
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut series = vec![
        Series {
            label: "RCS".into(),
            color: "#1f5fa8",
            dash: None,
            xs: xs.clone(),
            ys: rows.iter().map(|r| r.1.geomean).collect(),
            band: Some((rows.iter().map(|r| r.1.sigma_lo).collect(), rows.iter().map(|r| r.1.sigma_hi).collect())),
        },
        Series {
            label: "uniform".into(),
            color: "#c0392b",
            dash: Some("6 4"),
            xs: xs.clone(),
            ys: rows.iter().map(|r| r.2.geomean).collect(),
            band: Some((rows.iter().map(|r| r.2.sigma_lo).collect(), rows.iter().map(|r| r.2.sigma_hi).collect())),
        },
    ];
    if rows.iter().all(|r| r.3.is_some()) {
        series.push(Series {
            label: "best in span".into(),
            color: "#555555",
            dash: Some("2 3"),
            xs,
            ys: rows.iter().map(|r| r.3.unwrap()).collect(),
            band: None,
        });
    }
    plot::log_log(&format!("{name}: L2 error (geometric mean, ±σ band)"), "n", "error", &series)
}

/// `u` on a `size × size` grid of the parameter box, mapped to the domain.
fn u_field(basis: &BasisSet, report: &RcsReport, size: usize) -> String {
    let domain = basis.domain();
    let (lo, hi) = domain.param_bounds();
    let size = size.max(2);
    let mut points = Vec::with_capacity(size * size);
    let mut x = Vec::new();
    for i in 0..size {
        for j in 0..size {
            let p: Vec<f64> = [i, j]
                .iter()
                .enumerate()
                .map(|(d, &k)| {
                    let t = lo[d] + (hi[d] - lo[d]) * k as f64 / (size - 1) as f64;
                    // half-open parameter ranges (cube faces, tori) exclude the top edge
                    t.min(hi[d] - 1e-12 * (hi[d] - lo[d]))
                })
                .collect();
            if domain.map_param(&p, &mut x) {
                points.push(x.clone());
            }
        }
    }
    let values = report.final_stack.bind(basis).eval_many(&points);
    let d = domain.dim();
    let mut out = String::new();
    let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).chain(["u".into()]).collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    for (x, u) in points.iter().zip(&values) {
        for v in x {
            write!(out, "{v:.16e},").unwrap();
        }
        writeln!(out, "{u:.16e}").unwrap();
    }
    out
}

fn scatter_csv(report: &RcsReport) -> String {
    let batch = &report.final_batch;
    let mut out = String::new();
    let header: Vec<String> = (1..=batch.dim()).map(|i| format!("x_{i}")).chain(["weight".into()]).collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    for (x, w) in batch.points.iter().zip(&batch.weights) {
        for v in x {
            write!(out, "{v:.16e},").unwrap();
        }
        writeln!(out, "{w:.16e}").unwrap();
    }
    out
}
