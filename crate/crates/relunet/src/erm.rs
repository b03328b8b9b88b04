//! Toy regression experiment: least squares over a constrained dense ReLU
//! network, trained by projected full-batch gradient descent.
//!
//! The constraint set mirrors the approximation class: every weight and
//! shift lies in `[-1, 1]`, at most `sparsity_budget` entries are nonzero,
//! and predictions are clipped to `[-1, 1]` inside the loss. Exact
//! minimization over that set is out of reach, so each step projects back:
//! clip after the gradient update, then zero everything outside the largest
//! `s` magnitudes. Both constraints are checked every epoch.
//!
//! Rows are `(sample count, seed)` pairs. Each row owns an RNG stream
//! derived from the config seed and its index, so reports are reproducible
//! under any worker scheduling.

use crate::assemble::{assemble, AssembleOptions};
use crate::error::{Error, Result};
use crate::experiment::{named_manifold, named_manifold_function, ExperimentConfig};
use crate::manifold::Manifold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

fn default_seeds() -> usize {
    5
}

fn default_epochs() -> usize {
    400
}

fn default_learning_rate() -> f64 {
    0.05
}

fn default_width() -> usize {
    24
}

fn default_hidden_layers() -> usize {
    2
}

fn default_sparsity_budget() -> usize {
    400
}

fn default_mc_samples() -> usize {
    4000
}

/// Regression block of an experiment config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErmConfig {
    /// Training-set sizes.
    pub n_sweep: Vec<usize>,
    /// Independent repetitions per size.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: usize,
    /// Cap on nonzero weights and shifts, enforced every epoch.
    #[serde(default = "default_sparsity_budget")]
    pub sparsity_budget: usize,
    /// Fresh points for the Monte-Carlo risk estimate.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Drop the unit-variance observation noise.
    #[serde(default)]
    pub noiseless: bool,
    /// Accuracy at which to assemble the constructive reference network; its
    /// Monte-Carlo risk is reported as a feasible-point baseline.
    #[serde(default)]
    pub baseline_eta: Option<f64>,
}

/// One trained row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErmRow {
    pub config: String,
    pub n: usize,
    pub seed_index: usize,
    /// Monte-Carlo prediction risk on fresh inputs.
    pub risk: f64,
    /// Training produced a non-finite loss; the row is kept but flagged.
    pub diverged: bool,
}

/// Full regression report: per-row risks, per-size medians, the complexity
/// penalty of the class at each size, and the optional constructive
/// baseline risk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErmReport {
    pub rows: Vec<ErmRow>,
    pub medians: Vec<(usize, f64)>,
    /// `((s+1) log(4n(L+1)(s+1)^L(d+1)) + 1) / n` with unit constant,
    /// evaluated in log space; reported next to the medians, never asserted.
    pub complexity: Vec<(usize, f64)>,
    pub baseline_risk: Option<f64>,
}

/// Dense layer stored row-major; the network alternates affine maps and
/// rectifiers, with a linear scalar output.
struct Dense {
    w: Vec<f64>,
    b: Vec<f64>,
    rows: usize,
    cols: usize,
}

struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers = dims
            .windows(2)
            .map(|d| {
                let (cols, rows) = (d[0], d[1]);
                let scale = (1.0 / cols as f64).sqrt().min(1.0);
                Dense {
                    w: (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect(),
                    b: vec![0.0; rows],
                    rows,
                    cols,
                }
            })
            .collect();
        Mlp { layers }
    }

    /// Activations per layer, input first; hidden layers are rectified, the
    /// last layer is linear.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = &acts[l];
            let mut out = vec![0.0; layer.rows];
            for r in 0..layer.rows {
                let mut acc = layer.b[r];
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                for (wv, xv) in row.iter().zip(prev) {
                    acc += wv * xv;
                }
                out[r] = if l + 1 < self.layers.len() { acc.max(0.0) } else { acc };
            }
            acts.push(out);
        }
        acts
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let acts = self.forward(x);
        acts.last().unwrap()[0].clamp(-1.0, 1.0)
    }

    fn entries(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    fn entries_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    fn nonzeros(&self) -> usize {
        self.entries().filter(|v| **v != 0.0).count()
    }
}

/// Zero everything outside the `budget` largest magnitudes. Ties at the
/// threshold are resolved in storage order, so the result is deterministic.
fn prune_to_budget(net: &mut Mlp, budget: usize) {
    let nnz = net.nonzeros();
    if nnz <= budget {
        return;
    }
    let mut mags: Vec<f64> = net.entries().map(|v| v.abs()).filter(|m| *m > 0.0).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let cut = mags[budget.saturating_sub(1).min(mags.len() - 1)];
    let mut kept_at_cut = if budget == 0 {
        0
    } else {
        budget - mags.iter().take_while(|m| **m > cut).count()
    };
    for v in net.entries_mut() {
        let m = v.abs();
        if budget == 0 || m < cut {
            *v = 0.0;
        } else if m == cut {
            if kept_at_cut > 0 {
                kept_at_cut -= 1;
            } else {
                *v = 0.0;
            }
        }
    }
}

/// Full-batch squared-loss descent with per-epoch projection. Returns the
/// trained network and whether the loss ever left the finite range.
fn train(
    xs: &[Vec<f64>],
    ys: &[f64],
    cfg: &ErmConfig,
    rng: &mut ChaCha8Rng,
) -> (Mlp, bool) {
    let dim = xs[0].len();
    let mut dims = vec![dim];
    dims.extend(std::iter::repeat(cfg.width).take(cfg.hidden_layers));
    dims.push(1);
    let mut net = Mlp::new(&dims, rng);
    prune_to_budget(&mut net, cfg.sparsity_budget);
    let n = xs.len() as f64;
    let mut diverged = false;

    for _ in 0..cfg.epochs {
        let mut gw: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect();
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let acts = net.forward(x);
            let out = acts.last().unwrap()[0];
            let pred = out.clamp(-1.0, 1.0);
            loss += (pred - y) * (pred - y);
            // Clipped outputs pass no gradient outside the clamp range.
            let mut delta = if out.abs() <= 1.0 { vec![2.0 * (pred - y) / n] } else { vec![0.0] };
            for l in (0..net.layers.len()).rev() {
                let layer = &net.layers[l];
                let prev = &acts[l];
                let mut next_delta = vec![0.0; layer.cols];
                for r in 0..layer.rows {
                    let d = delta[r];
                    if d == 0.0 {
                        continue;
                    }
                    gb[l][r] += d;
                    let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                    for c in 0..layer.cols {
                        gw[l][r * layer.cols + c] += d * prev[c];
                        next_delta[c] += d * row[c];
                    }
                }
                if l > 0 {
                    // Rectifier gate of the producing layer.
                    for (c, nd) in next_delta.iter_mut().enumerate() {
                        if acts[l][c] <= 0.0 {
                            *nd = 0.0;
                        }
                    }
                }
                delta = next_delta;
            }
        }
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        for (l, layer) in net.layers.iter_mut().enumerate() {
            for (w, g) in layer.w.iter_mut().zip(&gw[l]) {
                *w = (*w - cfg.learning_rate * g).clamp(-1.0, 1.0);
            }
            for (b, g) in layer.b.iter_mut().zip(&gb[l]) {
                *b = (*b - cfg.learning_rate * g).clamp(-1.0, 1.0);
            }
        }
        prune_to_budget(&mut net, cfg.sparsity_budget);
        // Invariant: the projected iterate stays in the class.
        assert!(net.nonzeros() <= cfg.sparsity_budget, "pruning left too many entries");
        assert!(net.entries().all(|v| v.abs() <= 1.0), "clipping left an oversized entry");
    }
    (net, diverged)
}

/// Manifold points live in `[-1, 1]^d`; the trainer consumes them shifted
/// into the unit box.
fn to_unit_box(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| (v + 1.0) / 2.0).collect()
}

fn mc_risk(
    predict: &dyn Fn(&[f64]) -> f64,
    f0: &dyn Fn(&[f64]) -> f64,
    manifold: &Manifold,
    count: usize,
    seed: u64,
) -> f64 {
    let fresh = manifold.sample(count, seed);
    fresh
        .iter()
        .map(|u| {
            let d = predict(&to_unit_box(u)) - f0(u);
            d * d
        })
        .sum::<f64>()
        / count as f64
}

fn complexity_penalty(n: usize, s: usize, hidden_layers: usize, dim: usize) -> f64 {
    let (n, s, l, d) = (n as f64, s as f64, hidden_layers as f64, dim as f64);
    let log_term = (4.0 * n * (l + 1.0) * (d + 1.0)).ln() + l * (s + 1.0).ln();
    ((s + 1.0) * log_term + 1.0) / n
}

/// Run the regression sweep in the config's `erm` block against its named
/// manifold and target.
pub fn run_erm_experiment(cfg: &ExperimentConfig) -> Result<ErmReport> {
    let erm = cfg
        .erm
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("config has no erm block".into()))?;
    if erm.n_sweep.is_empty() {
        return Err(Error::InvalidArgument("erm sweep is empty".into()));
    }
    let manifold = named_manifold(cfg.manifold.as_deref().unwrap_or("circle"), cfg.seed)?;
    let f0 = named_manifold_function(&cfg.function, &manifold)?;

    let jobs: Vec<(usize, usize)> = erm
        .n_sweep
        .iter()
        .flat_map(|&n| (0..erm.seeds.max(1)).map(move |s| (n, s)))
        .collect();
    let rows: Vec<ErmRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(row_idx, &(n, seed_index))| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                cfg.seed.wrapping_add((row_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            );
            let data_seed: u64 = rng.gen();
            let xs_raw = manifold.sample(n, data_seed);
            let xs: Vec<Vec<f64>> = xs_raw.iter().map(|u| to_unit_box(u)).collect();
            let ys: Vec<f64> = xs_raw
                .iter()
                .map(|u| {
                    let noise: f64 =
                        if erm.noiseless { 0.0 } else { rng.sample(StandardNormal) };
                    f0(u) + noise
                })
                .collect();
            let (net, diverged) = train(&xs, &ys, erm, &mut rng);
            let mc_seed: u64 = rng.gen();
            let risk =
                mc_risk(&|x| net.predict(x), f0.as_ref(), &manifold, erm.mc_samples, mc_seed);
            ErmRow { config: cfg.id.clone(), n, seed_index, risk, diverged }
        })
        .collect();

    let medians = erm
        .n_sweep
        .iter()
        .map(|&n| {
            let mut risks: Vec<f64> =
                rows.iter().filter(|r| r.n == n && !r.diverged).map(|r| r.risk).collect();
            risks.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let med = if risks.is_empty() {
                f64::NAN
            } else if risks.len() % 2 == 1 {
                risks[risks.len() / 2]
            } else {
                (risks[risks.len() / 2 - 1] + risks[risks.len() / 2]) / 2.0
            };
            (n, med)
        })
        .collect();
    let complexity = erm
        .n_sweep
        .iter()
        .map(|&n| {
            (n, complexity_penalty(n, erm.sparsity_budget, erm.hidden_layers, manifold.ambient_dim))
        })
        .collect();

    let baseline_risk = match erm.baseline_eta {
        Some(eta) => {
            let opts = AssembleOptions::new(eta, cfg.beta, cfg.k_const);
            let built = assemble(&manifold, Arc::clone(&f0), &opts)?;
            let fresh = manifold.sample(erm.mc_samples, cfg.seed.wrapping_add(0x0bad_cafe));
            let risk = fresh
                .iter()
                .map(|u| {
                    let d = built.net.eval(u).unwrap()[0] - f0(u);
                    d * d
                })
                .sum::<f64>()
                / fresh.len().max(1) as f64;
            Some(risk)
        }
        None => None,
    };

    Ok(ErmReport { rows, medians, complexity, baseline_risk })
}

const ERM_CSV_HEADER: &str = "config,n,seed,risk,diverged";

/// CSV rows for the regression sweep; deterministic for identical configs.
pub fn erm_csv_string(report: &ErmReport) -> String {
    let mut out = String::from(ERM_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.config,
            r.n,
            r.seed_index,
            r.risk,
            if r.diverged { 1 } else { 0 }
        );
    }
    out
}

/// Write the regression CSV to `path`.
pub fn emit_erm_report(report: &ErmReport, path: &str) -> Result<()> {
    std::fs::write(path, erm_csv_string(report))?;
    Ok(())
}

/// Medians, complexity penalties, and the baseline comparison in prose. The
/// risk bound shape `median <= baseline + penalty` is printed for context,
/// not asserted: the trainer is not the exact minimizer.
pub fn render_erm_summary(report: &ErmReport) -> String {
    let mut out = String::new();
    for ((n, med), (_, pen)) in report.medians.iter().zip(&report.complexity) {
        let _ = write!(out, "n {n}: median risk {med:.4e}, complexity penalty {pen:.4e}");
        if let Some(base) = report.baseline_risk {
            let _ = write!(out, ", baseline + penalty {:.4e}", base + pen);
        }
        let _ = writeln!(out);
    }
    if let Some(base) = report.baseline_risk {
        let _ = writeln!(out, "constructive baseline risk {base:.4e}");
    }
    out
}
