//! Sweep drivers: sup-error measurement, log-log rate fitting, and CSV
//! reports.
//!
//! Two sweep shapes are supported. A grid sweep builds interpolation nets on
//! a box corpus over a list of grid budgets and measures how the error decays
//! with size; an accuracy sweep assembles manifold networks over a list of
//! targets and measures how the size grows with accuracy. Both emit the same
//! row format so downstream fitting code does not care which one produced
//! the data.
//!
//! Every random choice flows from the config seed; row `i` owns the stream
//! derived from `(seed, i)`, so identical configs give byte-identical
//! reports regardless of worker scheduling.

use crate::assemble::{assemble, AssembleOptions};
use crate::error::{Error, Result};
use crate::holder::{build_holder_net, Domain, HolderFunction};
use crate::manifold::Manifold;
use crate::net::{EvalScratch, Network};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

fn default_dim() -> usize {
    1
}

fn default_m() -> usize {
    12
}

fn default_samples() -> usize {
    2000
}

/// Declarative description of one experiment. Exactly one of `n_sweep` and
/// `eta_sweep` must be nonempty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Row label in emitted reports.
    pub id: String,
    /// Named target: `square`, `sine-product`, `radial-bump`, `pyramid`,
    /// `cone`, or `cross` for grid sweeps; `coordinate`,
    /// `coordinate-product`, or `sine-sum` for accuracy sweeps.
    pub function: String,
    pub beta: f64,
    pub k_const: f64,
    /// Box dimension for grid sweeps.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Grid budgets; nonempty selects a grid sweep on `[1/4, 3/4]^dim`.
    #[serde(default)]
    pub n_sweep: Vec<usize>,
    /// Product accuracy for grid sweeps.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Accuracy targets; nonempty selects a manifold sweep.
    #[serde(default)]
    pub eta_sweep: Vec<f64>,
    /// Named manifold for accuracy sweeps: `circle` or `circle-r10`.
    #[serde(default)]
    pub manifold: Option<String>,
    /// Points per row for error measurement.
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: u64,
    /// CSV destination; omitted keeps the report in memory.
    #[serde(default)]
    pub output: Option<String>,
    /// Optional regression experiment block.
    #[serde(default)]
    pub erm: Option<crate::erm::ErmConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One sweep row: size counters of the built network next to its measured
/// error and the envelope it is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub config: String,
    /// Grid budget for grid sweeps, accuracy target for manifold sweeps.
    pub size: f64,
    pub sup_error: f64,
    pub depth: usize,
    pub max_width: usize,
    pub sparsity: usize,
    /// Grid sweeps: the nonzero-count envelope of the construction.
    /// Manifold sweeps: the unscaled shape `eta^(-d*/beta)`, so a consumer
    /// can fit the constant without rebuilding anything.
    pub envelope: f64,
}

/// Sweep rows plus the fitted log-log slope: error against size for grid
/// sweeps, nonzero count against accuracy for manifold sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<RateRow>,
    pub slope: Option<f64>,
}

/// Largest absolute gap between the network's first output and `f` over the
/// given points.
pub fn sup_error(
    net: &Network,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    points: &[Vec<f64>],
) -> f64 {
    points
        .par_iter()
        .map_init(EvalScratch::default, |scratch, x| {
            (net.eval_into(x, scratch).unwrap()[0] - f(x)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Least-squares slope of `log error` against `log size`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(s, e)| s <= 0.0 || e <= 0.0) {
        return Err(Error::InvalidArgument(
            "rate fit needs positive sizes and errors".into(),
        ));
    }
    if points.iter().all(|&(s, _)| s == points[0].0) {
        return Err(Error::InvalidArgument("rate fit sizes are all equal".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(s, e)| (s.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Named box corpus on `[1/4, 3/4]^dim`: three smooth targets (a quadratic,
/// a product of sines, a compactly supported radial bump) and three kinked
/// Lipschitz ones (a sup-norm tent, a distance cone, a sum of axis tents).
pub fn named_box_function(
    name: &str,
    dim: usize,
) -> Result<(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, Domain)> {
    let domain = Domain::new_box(vec![0.25; dim], vec![0.75; dim])?;
    let f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = match name {
        "square" => Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()),
        "sine-product" => Arc::new(|x: &[f64]| {
            x.iter().map(|v| (std::f64::consts::PI * v).sin()).product()
        }),
        "radial-bump" => Arc::new(|x: &[f64]| {
            let r2: f64 =
                x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / (0.35 * 0.35);
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        }),
        // Kinked Lipschitz targets: rough enough that a declared smoothness
        // of one is saturated, not just an upper bound.
        "pyramid" => Arc::new(|x: &[f64]| {
            let r = x.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
            (0.2 - r).max(0.0)
        }),
        "cone" => Arc::new(|x: &[f64]| {
            let r2: f64 = x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
            0.3 - r2.sqrt()
        }),
        "cross" => Arc::new(|x: &[f64]| {
            x.iter().map(|v| (0.1 - (v - 0.5).abs()).max(0.0)).sum()
        }),
        other => {
            return Err(Error::InvalidArgument(format!("unknown box function `{other}`")))
        }
    };
    Ok((f, domain))
}

/// Named manifolds for accuracy sweeps. `circle-r10` places the circle in
/// ten ambient dimensions through a seeded orthonormal map.
pub fn named_manifold(name: &str, seed: u64) -> Result<Manifold> {
    match name {
        "circle" => Ok(Manifold::circle()),
        "circle-r10" => Manifold::circle_embedded(10, seed),
        other => Err(Error::InvalidArgument(format!("unknown manifold `{other}`"))),
    }
}

/// Named targets on a manifold, expressed in the plane coordinates of its
/// first chart so the same name means the same function across embeddings.
pub fn named_manifold_function(
    name: &str,
    manifold: &Manifold,
) -> Result<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
    let q = manifold.charts[0].reduction_matrix();
    let plane = move |u: &[f64]| -> (f64, f64) {
        match &q {
            Some(rows) => (
                rows[0].iter().zip(u).map(|(a, b)| a * b).sum(),
                rows[1].iter().zip(u).map(|(a, b)| a * b).sum(),
            ),
            None => (u[0], u[1]),
        }
    };
    let f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = match name {
        "zero" => Arc::new(|_: &[f64]| 0.0),
        "coordinate" => Arc::new(move |u: &[f64]| plane(u).0),
        "coordinate-product" => Arc::new(move |u: &[f64]| {
            let (a, b) = plane(u);
            a * b
        }),
        "sine-sum" => Arc::new(move |u: &[f64]| {
            let (a, b) = plane(u);
            (2.0 * a + b).sin()
        }),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown manifold function `{other}`"
            )))
        }
    };
    Ok(f)
}

fn row_rng(seed: u64, idx: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn sample_box_points(domain: &Domain, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dim = domain.dim();
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|i| rng.gen_range(domain.lo()[i]..domain.hi()[i]))
                .collect()
        })
        .collect()
}

/// Grid sweep: build an interpolation net per budget and measure its error
/// on seeded uniform samples of the box.
pub fn run_rate_sweep(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let (f, domain) = named_box_function(&cfg.function, cfg.dim)?;
    let rows: Vec<RateRow> = cfg
        .n_sweep
        .par_iter()
        .enumerate()
        .map(|(idx, &n)| -> Result<RateRow> {
            let hf =
                HolderFunction::new(domain.clone(), cfg.beta, cfg.k_const, Arc::clone(&f))?;
            let built = build_holder_net(&hf, n, cfg.m, None)?;
            if !built.net.validate().passed {
                return Err(Error::InvalidArgument(format!(
                    "grid sweep row N={n}: strict validation failed"
                )));
            }
            let mut rng = row_rng(cfg.seed, idx);
            let points = sample_box_points(&domain, cfg.samples, &mut rng);
            Ok(RateRow {
                config: cfg.id.clone(),
                size: n as f64,
                sup_error: sup_error(&built.net, &*f, &points),
                depth: built.net.depth(),
                max_width: built.net.widths().iter().copied().max().unwrap_or(0),
                sparsity: built.net.sparsity().s,
                envelope: built.report.sparsity_envelope,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = fit_error_slope(&rows)?;
    Ok(ErrorReport { rows, slope })
}

/// Accuracy sweep: assemble the manifold network per target and record how
/// the nonzero count scales.
pub fn run_eta_sweep(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let name = cfg
        .manifold
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("accuracy sweep needs a manifold".into()))?;
    let manifold = named_manifold(name, cfg.seed)?;
    let f = named_manifold_function(&cfg.function, &manifold)?;
    let shape_exp = manifold.intrinsic_dim as f64 / cfg.beta;
    let rows: Vec<RateRow> = cfg
        .eta_sweep
        .par_iter()
        .enumerate()
        .map(|(idx, &eta)| -> Result<RateRow> {
            let mut opts = AssembleOptions::new(eta, cfg.beta, cfg.k_const);
            opts.seed = cfg.seed.wrapping_add(idx as u64);
            opts.final_samples = cfg.samples;
            let built = assemble(&manifold, Arc::clone(&f), &opts)?;
            if !built.net.validate().passed {
                return Err(Error::InvalidArgument(format!(
                    "accuracy sweep row eta={eta}: strict validation failed"
                )));
            }
            let fresh = manifold.sample(cfg.samples, row_rng(cfg.seed, idx).gen());
            Ok(RateRow {
                config: cfg.id.clone(),
                size: eta,
                sup_error: sup_error(&built.net, &*f, &fresh),
                depth: built.net.depth(),
                max_width: built.net.widths().iter().copied().max().unwrap_or(0),
                sparsity: built.net.sparsity().s,
                envelope: eta.powf(-shape_exp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = fit_size_slope(&rows)?;
    Ok(ErrorReport { rows, slope })
}

fn fit_error_slope(rows: &[RateRow]) -> Result<Option<f64>> {
    if rows.len() < 3 {
        return Ok(None);
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.size, r.sup_error)).collect();
    Ok(Some(rate_fit(&pts)?))
}

fn fit_size_slope(rows: &[RateRow]) -> Result<Option<f64>> {
    if rows.len() < 3 {
        return Ok(None);
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.size, r.sparsity as f64)).collect();
    Ok(Some(rate_fit(&pts)?))
}

/// Dispatch on the populated sweep and, when an output path is set, write
/// the CSV alongside returning the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let report = match (cfg.n_sweep.is_empty(), cfg.eta_sweep.is_empty()) {
        (false, true) => run_rate_sweep(cfg),
        (true, false) => run_eta_sweep(cfg),
        (true, true) => Err(Error::InvalidArgument("both sweeps are empty".into())),
        (false, false) => {
            Err(Error::InvalidArgument("config sets both a grid and an accuracy sweep".into()))
        }
    }?;
    if let Some(path) = &cfg.output {
        emit_report(&report, path)?;
    }
    Ok(report)
}

const CSV_HEADER: &str = "config,size,sup_error,depth,max_width,sparsity,envelope";

/// Render the rows as CSV. Timing never enters this format: rows must be
/// byte-identical across reruns of the same config.
pub fn csv_string(report: &ErrorReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.config, r.size, r.sup_error, r.depth, r.max_width, r.sparsity, r.envelope
        );
    }
    out
}

/// Write the CSV rows to `path`. The fitted slope is not part of the file;
/// `parse_report_rows` plus `rate_fit` recover it.
pub fn emit_report(report: &ErrorReport, path: &str) -> Result<()> {
    std::fs::write(path, csv_string(report))?;
    Ok(())
}

/// Parse rows back out of `csv_string` output.
pub fn parse_report_rows(text: &str) -> Result<Vec<RateRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Format(format!("unexpected CSV header {other:?}")));
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Format(format!(
                "row {}: expected 7 columns, got {}",
                lineno + 2,
                cols.len()
            )));
        }
        let field = |i: usize| -> Result<f64> {
            cols[i]
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: column {i}: {e}", lineno + 2)))
        };
        rows.push(RateRow {
            config: cols[0].to_string(),
            size: field(1)?,
            sup_error: field(2)?,
            depth: field(3)? as usize,
            max_width: field(4)? as usize,
            sparsity: field(5)? as usize,
            envelope: field(6)?,
        });
    }
    Ok(rows)
}

/// Human-readable rundown of a report; timing and paths stay out so the
/// text is as reproducible as the CSV.
pub fn render_summary(report: &ErrorReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} rows", report.rows.len());
    for r in &report.rows {
        let _ = writeln!(
            out,
            "  {} size {} sup_error {:.3e} depth {} width {} nnz {}",
            r.config, r.size, r.sup_error, r.depth, r.max_width, r.sparsity
        );
    }
    match report.slope {
        Some(s) => {
            let _ = writeln!(out, "fitted log-log slope {s:.3}");
        }
        None => {
            let _ = writeln!(out, "too few rows for a slope fit");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_fit_recovers_exact_power_laws() {
        let quad: Vec<(f64, f64)> =
            (1..=6).map(|k| (k as f64 * 10.0, (k as f64 * 10.0).powi(-2))).collect();
        assert!((rate_fit(&quad).unwrap() + 2.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64, 0.5)).collect();
        assert!(rate_fit(&flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rate_fit_rejects_degenerate_input() {
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.5), (3.0, 0.0)]).is_err());
        assert!(rate_fit(&[(2.0, 1.0), (2.0, 0.5), (2.0, 0.25)]).is_err());
    }

    #[test]
    fn sup_error_measures_constant_gaps() {
        let zero = HolderFunction::new(
            Domain::new_box(vec![0.25], vec![0.75]).unwrap(),
            2.0,
            1.0,
            Arc::new(|_: &[f64]| 0.0),
        )
        .unwrap();
        let built = build_holder_net(&zero, 9, 6, None).unwrap();
        let points: Vec<Vec<f64>> = (0..50).map(|k| vec![0.25 + 0.01 * k as f64]).collect();
        assert_eq!(sup_error(&built.net, &|_: &[f64]| 0.0, &points), 0.0);
        assert_eq!(sup_error(&built.net, &|_: &[f64]| 0.3, &points), 0.3);
    }

    #[test]
    fn csv_round_trips_and_is_deterministic() {
        let report = ErrorReport {
            rows: vec![
                RateRow {
                    config: "demo".into(),
                    size: 16.0,
                    sup_error: 0.012345,
                    depth: 20,
                    max_width: 64,
                    sparsity: 800,
                    envelope: 1.5e6,
                },
                RateRow {
                    config: "demo".into(),
                    size: 32.0,
                    sup_error: 0.0031,
                    depth: 22,
                    max_width: 128,
                    sparsity: 1700,
                    envelope: 3e6,
                },
            ],
            slope: Some(-2.0),
        };
        let a = csv_string(&report);
        let b = csv_string(&report);
        assert_eq!(a, b);
        assert_eq!(parse_report_rows(&a).unwrap(), report.rows);
        let empty = csv_string(&ErrorReport { rows: vec![], slope: None });
        assert_eq!(empty, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn grid_sweep_rows_and_slope_are_complete() {
        let cfg = ExperimentConfig {
            id: "squares".into(),
            function: "square".into(),
            beta: 2.0,
            k_const: 1.0,
            dim: 1,
            n_sweep: vec![8, 16, 32],
            m: 10,
            eta_sweep: vec![],
            manifold: None,
            samples: 400,
            seed: 7,
            output: None,
            erm: None,
        };
        let report = run_rate_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        for w in report.rows.windows(2) {
            assert!(w[1].sup_error <= w[0].sup_error * 1.05);
            assert!(w[1].size > w[0].size);
        }
        for r in &report.rows {
            assert!((r.sparsity as f64) <= r.envelope);
            assert!(r.sup_error > 0.0);
        }
        assert!(report.slope.unwrap() < -1.5);
        let again = run_rate_sweep(&cfg).unwrap();
        assert_eq!(csv_string(&report), csv_string(&again));
    }
}
