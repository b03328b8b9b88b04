//! Command-line driver for the network construction kit.
//!
//! Subcommands: `build` serializes one constructed network, `audit` prints
//! its size counters against the envelopes without writing anything, `rate`
//! runs a grid or accuracy sweep with a slope fit, `erm` runs the toy
//! regression sweep, and `eval` applies a serialized network to points from
//! a file.
//!
//! A JSON config provides the experiment description; every field can be
//! overridden by a flag. CSV outputs are byte-deterministic for a given
//! config; timings only ever appear on stdout.
//!
//! Exit codes: 0 success, 1 validation or budget failure, 2 I/O or config
//! errors.

use clap::{Args, Parser, Subcommand};
use relunet::experiment::{
    csv_string, named_box_function, named_manifold, named_manifold_function, parse_report_rows,
    render_summary,
};
use relunet::erm::{emit_erm_report, erm_csv_string, render_erm_summary};
use relunet::{
    assemble, build_holder_net, read_network, run_erm_experiment, run_experiment, write_network,
    AssembleOptions, Error, ExperimentConfig, HolderFunction, Result,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "relunet", version, about = "Sparse ReLU network construction toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct a network and serialize it.
    Build(BuildArgs),
    /// Construct a network and report its budgets without serializing.
    Audit(AuditArgs),
    /// Run the configured sweep and fit its log-log slope.
    Rate(SweepArgs),
    /// Run the toy regression sweep.
    Erm(ErmArgs),
    /// Apply a serialized network to points from a file.
    Eval(EvalArgs),
}

/// Config loading plus field-by-field overrides shared by all subcommands.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Row label in reports.
    #[arg(long)]
    id: Option<String>,
    /// Named target function.
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k_const: Option<f64>,
    /// Box dimension for grid builds.
    #[arg(long)]
    dim: Option<usize>,
    /// Grid budgets for a grid sweep (repeatable).
    #[arg(long = "n")]
    n_sweep: Vec<usize>,
    /// Product accuracy for grid builds.
    #[arg(long)]
    m: Option<usize>,
    /// Accuracy targets for a manifold sweep (repeatable).
    #[arg(long = "eta")]
    eta_sweep: Vec<f64>,
    /// Named manifold for accuracy builds.
    #[arg(long)]
    manifold: Option<String>,
    /// Points per row for error measurement.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination.
    #[arg(long)]
    output: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig {
                id: "run".into(),
                function: "square".into(),
                beta: 2.0,
                k_const: 1.0,
                dim: 1,
                n_sweep: vec![],
                m: 12,
                eta_sweep: vec![],
                manifold: None,
                samples: 2000,
                seed: 1,
                output: None,
                erm: None,
            },
        };
        if let Some(v) = &self.id {
            cfg.id = v.clone();
        }
        if let Some(v) = &self.function {
            cfg.function = v.clone();
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.k_const {
            cfg.k_const = v;
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if !self.n_sweep.is_empty() {
            cfg.n_sweep = self.n_sweep.clone();
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if !self.eta_sweep.is_empty() {
            cfg.eta_sweep = self.eta_sweep.clone();
        }
        if let Some(v) = &self.manifold {
            cfg.manifold = Some(v.clone());
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Destination path; `.json` selects the text format, anything else the
    /// binary one.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ErmArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Training-set sizes (repeatable); overrides the config's erm block.
    #[arg(long = "train-n")]
    train_n: Vec<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    hidden_layers: Option<usize>,
    /// Cap on nonzero trainable entries.
    #[arg(long)]
    sparsity_budget: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Drop the observation noise.
    #[arg(long)]
    noiseless: bool,
    /// Assemble a constructive baseline at this accuracy and report its risk.
    #[arg(long)]
    baseline_eta: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Serialized network.
    #[arg(long)]
    net: PathBuf,
    /// Input points, one per line, comma or whitespace separated.
    #[arg(long)]
    points: PathBuf,
    /// Output destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Build(args) => cmd_build(args),
        Cmd::Audit(args) => cmd_audit(args),
        Cmd::Rate(args) => cmd_rate(args),
        Cmd::Erm(args) => cmd_erm(args),
        Cmd::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Validation and budget failures exit 1; broken inputs, configs, and I/O
/// exit 2.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::StageBudget { .. }
        | Error::Coverage { .. }
        | Error::Margin(_)
        | Error::GridTooCoarse { .. }
        | Error::BadArchitecture { .. }
        | Error::BadLayer { .. }
        | Error::Incompatible(_) => 1,
        Error::Io(_)
        | Error::Json(_)
        | Error::Format(_)
        | Error::Version { .. }
        | Error::InvalidArgument(_)
        | Error::InputDim { .. } => 2,
    }
}

/// Build the single network a config describes: a manifold assembly when an
/// accuracy target is present, a grid interpolation net otherwise.
fn build_network(cfg: &ExperimentConfig) -> Result<(relunet::Network, String)> {
    if !cfg.eta_sweep.is_empty() || cfg.manifold.is_some() {
        let eta = *cfg.eta_sweep.first().ok_or_else(|| {
            Error::InvalidArgument("manifold build needs an accuracy target (--eta)".into())
        })?;
        let name = cfg
            .manifold
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("manifold build needs --manifold".into()))?;
        let manifold = named_manifold(name, cfg.seed)?;
        let f = named_manifold_function(&cfg.function, &manifold)?;
        let mut opts = AssembleOptions::new(eta, cfg.beta, cfg.k_const);
        opts.seed = cfg.seed;
        opts.final_samples = cfg.samples;
        let built = assemble(&manifold, f, &opts)?;
        let mut summary = String::new();
        summary.push_str(&format!(
            "assembled {} on {} at eta {eta}: depth {} max width {} nnz {} audit {:.3e}\n",
            cfg.function,
            name,
            built.report.depth,
            built.net.widths().iter().max().unwrap(),
            built.report.nonzeros,
            built.report.audit_sup,
        ));
        for s in &built.report.stages {
            summary.push_str(&format!(
                "  {}: target {:.3e} achieved {:.3e} grid {} m {} nnz {}\n",
                s.stage, s.target, s.achieved, s.grid, s.m, s.nonzeros
            ));
        }
        Ok((built.net, summary))
    } else {
        let n = *cfg.n_sweep.first().ok_or_else(|| {
            Error::InvalidArgument("grid build needs a budget (--n)".into())
        })?;
        let (f, domain) = named_box_function(&cfg.function, cfg.dim)?;
        let hf = HolderFunction::new(domain, cfg.beta, cfg.k_const, f)?;
        let built = build_holder_net(&hf, n, cfg.m, None)?;
        let r = &built.report;
        let summary = format!(
            "built {} (dim {}, beta {}) at N {n}, m {}: depth {} nnz {}\n  grid {} scale {} \
             normalizer {:.3}\n  gadget bound {:.3e} scheme bound {:.3e} total {:.3e}\n  \
             envelope {:.3e} ({:.2}% used)\n",
            cfg.function,
            cfg.dim,
            cfg.beta,
            cfg.m,
            r.depth,
            r.nonzeros,
            r.m_grid,
            r.scale_r,
            r.b_norm,
            r.c_gadget * f64::powi(2.0, -(r.m as i32)),
            r.scheme_bound,
            r.total_bound,
            r.sparsity_envelope,
            100.0 * r.nonzeros as f64 / r.sparsity_envelope,
        );
        Ok((built.net, summary))
    }
}

fn cmd_build(args: BuildArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let start = Instant::now();
    let (net, summary) = build_network(&cfg)?;
    let validation = net.validate();
    if !validation.passed {
        return Err(Error::Incompatible(format!(
            "built network failed strict validation: {} violations",
            validation.violations.len()
        )));
    }
    write_network(&net, &args.out)?;
    print!("{summary}");
    println!("wrote {} ({:.1?})", args.out.display(), start.elapsed());
    Ok(())
}

fn cmd_audit(args: AuditArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let start = Instant::now();
    let (net, summary) = build_network(&cfg)?;
    print!("{summary}");
    let validation = net.validate();
    println!(
        "validation: {} ({} violations), elapsed {:.1?}",
        if validation.passed { "pass" } else { "FAIL" },
        validation.violations.len(),
        start.elapsed()
    );
    if !validation.passed {
        return Err(Error::Incompatible("audit found strict-mode violations".into()));
    }
    Ok(())
}

fn cmd_rate(args: SweepArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let start = Instant::now();
    let report = run_experiment(&cfg)?;
    print!("{}", render_summary(&report));
    match &cfg.output {
        Some(path) => println!("wrote {path} ({:.1?})", start.elapsed()),
        None => {
            print!("{}", csv_string(&report));
            println!("elapsed {:.1?}", start.elapsed());
        }
    }
    // Guard against stale column drift between writer and parser.
    debug_assert!(parse_report_rows(&csv_string(&report)).is_ok());
    Ok(())
}

fn cmd_erm(args: ErmArgs) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    let mut erm = cfg.erm.clone().unwrap_or_else(|| relunet::ErmConfig {
        n_sweep: vec![64, 256, 1024],
        seeds: 5,
        epochs: 400,
        learning_rate: 0.05,
        width: 24,
        hidden_layers: 2,
        sparsity_budget: 400,
        mc_samples: 4000,
        noiseless: false,
        baseline_eta: None,
    });
    if !args.train_n.is_empty() {
        erm.n_sweep = args.train_n.clone();
    }
    if let Some(v) = args.seeds {
        erm.seeds = v;
    }
    if let Some(v) = args.epochs {
        erm.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        erm.learning_rate = v;
    }
    if let Some(v) = args.width {
        erm.width = v;
    }
    if let Some(v) = args.hidden_layers {
        erm.hidden_layers = v;
    }
    if let Some(v) = args.sparsity_budget {
        erm.sparsity_budget = v;
    }
    if let Some(v) = args.mc_samples {
        erm.mc_samples = v;
    }
    if args.noiseless {
        erm.noiseless = true;
    }
    if let Some(v) = args.baseline_eta {
        erm.baseline_eta = Some(v);
    }
    cfg.erm = Some(erm);
    if cfg.manifold.is_none() {
        cfg.manifold = Some("circle".into());
    }

    let start = Instant::now();
    let report = run_erm_experiment(&cfg)?;
    print!("{}", render_erm_summary(&report));
    match &cfg.output {
        Some(path) => {
            emit_erm_report(&report, path)?;
            println!("wrote {path} ({:.1?})", start.elapsed());
        }
        None => {
            print!("{}", erm_csv_string(&report));
            println!("elapsed {:.1?}", start.elapsed());
        }
    }
    Ok(())
}

fn parse_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|e| {
                    Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        points.push(coords);
    }
    Ok(points)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let net = read_network(&args.net)?;
    let points = parse_points(&args.points)?;
    let mut out = String::new();
    for p in &points {
        let y = net.eval(p)?;
        let line: Vec<String> = y.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_budget_from_config_failures() {
        let budget = Error::StageBudget {
            stage: "test".into(),
            target: 0.1,
            measured: 0.5,
            size: 10,
        };
        assert_eq!(exit_code_for(&budget), 1);
        assert_eq!(exit_code_for(&Error::InvalidArgument("bad".into())), 2);
        assert_eq!(
            exit_code_for(&Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "x"))),
            2
        );
    }

    #[test]
    fn flags_override_config_fields() {
        let args = ConfigArgs {
            config: None,
            id: Some("demo".into()),
            function: Some("sine-product".into()),
            beta: Some(1.0),
            k_const: None,
            dim: Some(2),
            n_sweep: vec![9, 25],
            m: None,
            eta_sweep: vec![],
            manifold: None,
            samples: Some(100),
            seed: Some(9),
            output: None,
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.id, "demo");
        assert_eq!(cfg.function, "sine-product");
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.k_const, 1.0);
        assert_eq!(cfg.dim, 2);
        assert_eq!(cfg.n_sweep, vec![9, 25]);
        assert_eq!(cfg.samples, 100);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn point_files_accept_mixed_separators() {
        let dir = std::env::temp_dir().join("relunet-cli-test-points");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pts.txt");
        std::fs::write(&path, "# header\n0.5, 0.25\n0.1 0.9\n\n").unwrap();
        let pts = parse_points(&path).unwrap();
        assert_eq!(pts, vec![vec![0.5, 0.25], vec![0.1, 0.9]]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
