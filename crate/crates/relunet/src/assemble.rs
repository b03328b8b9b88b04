//! End-to-end assembly: approximate a function on a chart atlas by one
//! strict-weight network on the ambient space.
//!
//! Per chart the assembly wires four pieces:
//!
//! * a chart net mapping ambient points to chart coordinates (one scalar
//!   interpolation net per coordinate, built in the chart's reduced space
//!   and lifted through its orthonormal reduction);
//! * a pullback net for the local representative `g_j = f o inverse_j` on
//!   the chart's bump-support box, scaled into the unit range, split into a
//!   rectified sign pair, and fed by the chart net;
//! * a weight net for the chart's partition weight, built directly on the
//!   reduced space so it never depends on a fitted coordinate;
//! * a gated pair multiplier combining them into
//!   `(g_j^+ * w, g_j^- * w)` with `w = relu(weight - gate)`.
//!
//! The gate threshold equals the weight net's accuracy target: wherever the
//! true weight vanishes, the measured weight stays below the gate, the
//! multiplier input is zero and the chart contributes exactly nothing.
//! Off-chart manifold points cannot slip through: bump supports end well
//! inside each patch, so around the patch boundary the weight's grid data
//! is identically zero and the fitted weight is exactly zero, no matter how
//! the other heads behave there.
//!
//! Budgets split the target `eta`: pullback fits and coordinate-induced
//! value error take `eta/8` each, weight errors (fit plus gate shift, two
//! gate widths per chart) take at most `eta/4`, and the pair
//! multiplications run below `eta/128`, leaving slack for off-sample
//! excursions. Each scalar stage is fitted by doubling its grid budget,
//! warm-started by the cheap interpolation-scheme oracle, and the assembled
//! network must pass a final sampled audit against `f`.

use crate::calculus::{compose, make_signed_pair, pad_depth_output, parallelize, precompose_affine, scale_output};
use crate::error::{Error, Result};
use crate::gadgets::{build_mult_star, build_weighted_sum};
use crate::holder::{build_holder_net, build_local_scheme, Domain, HolderFunction};
use crate::manifold::partition::{build_partition, PartitionOfUnity};
use crate::manifold::{Chart, Manifold};
use crate::net::{EvalScratch, Network, SparseVec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Assembly parameters. `beta` and `k_const` declare the smoothness of the
/// target in chart coordinates; the rest control partition resolution,
/// audit sizes, and determinism.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub eta: f64,
    pub beta: f64,
    pub k_const: f64,
    pub bumps_per_axis: usize,
    pub stage_samples: usize,
    pub final_samples: usize,
    pub seed: u64,
}

impl AssembleOptions {
    pub fn new(eta: f64, beta: f64, k_const: f64) -> Self {
        Self {
            eta,
            beta,
            k_const,
            bumps_per_axis: 6,
            stage_samples: 2000,
            final_samples: 10_000,
            seed: 1,
        }
    }
}

/// One fitted stage: what was asked, what was measured, what it cost.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: String,
    pub target: f64,
    pub achieved: f64,
    pub grid: usize,
    pub m: usize,
    pub nonzeros: usize,
}

/// Assembly summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssembleReport {
    pub eta: f64,
    pub charts: usize,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    pub m_star: usize,
    pub depth: usize,
    pub nonzeros: usize,
    pub audit_sup: f64,
    pub stages: Vec<StageOutcome>,
}

pub struct AssembleBuild {
    pub net: Network,
    pub partition: PartitionOfUnity,
    pub report: AssembleReport,
}

fn m_for(target: f64) -> usize {
    let m = (1.0 / target).log2().ceil() as i64 + 8;
    m.clamp(10, 30) as usize
}


/// Produces support samples at least as dense as a quarter of the grid
/// spacing it is called with, so pruning keeps every node the sampled set
/// can touch.
type SupportGen = dyn Fn(f64) -> Vec<Vec<f64>> + Sync;

/// Fit one scalar interpolation net to `target` sup accuracy, doubling the
/// grid budget. The scheme oracle screens budgets before any network is
/// built; when the network error stays dominated by its multiplication
/// gadgets, the accuracy parameter is raised instead of the grid. Audits
/// run over the given samples plus the generated support set.
/// Largest pointwise gap between a network and the truth over both point
/// sets, reusing forward-pass scratch per worker.
fn net_sup_gap(
    net: &Network,
    truth: &HolderFunction,
    samples: &[Vec<f64>],
    support: &[Vec<f64>],
) -> f64 {
    let gap = |pts: &[Vec<f64>]| {
        pts.par_iter()
            .map_init(EvalScratch::default, |scratch, x| {
                (net.eval_into(x, scratch).unwrap()[0] - truth.eval(x)).abs()
            })
            .reduce(|| 0.0, f64::max)
    };
    gap(samples).max(gap(support))
}

fn fit_stage(
    stage: String,
    truth: &HolderFunction,
    target: f64,
    samples: &[Vec<f64>],
    support_gen: Option<&SupportGen>,
) -> Result<(Network, StageOutcome)> {
    let dim = truth.domain.dim();
    let mut m = m_for(target);
    let mut n = 1usize;
    let mut last = f64::INFINITY;
    for _ in 0..24 {
        // Mirror the grid sizing of the scheme builder so the support
        // density can track the spacing.
        let mut m_grid = 4usize;
        while (m_grid + 2).pow(dim as u32) <= n {
            m_grid += 1;
        }
        let min_spacing = (0..dim)
            .map(|i| (truth.domain.hi()[i] - truth.domain.lo()[i]) / m_grid as f64)
            .fold(f64::INFINITY, f64::min);
        let dense = support_gen.map(|g| g(min_spacing));
        let support = dense.as_deref();
        let audit = |v: &(dyn Fn(&[f64]) -> f64 + Sync)| -> f64 {
            let a = samples
                .par_iter()
                .map(|x| (v(x) - truth.eval(x)).abs())
                .reduce(|| 0.0, f64::max);
            let b = support
                .unwrap_or(&[])
                .par_iter()
                .map(|x| (v(x) - truth.eval(x)).abs())
                .reduce(|| 0.0, f64::max);
            a.max(b)
        };
        let scheme = match build_local_scheme(truth, n, support) {
            Err(Error::GridTooCoarse { min, .. }) => {
                n = min;
                continue;
            }
            other => other?,
        };
        let scheme_err = audit(&|x| scheme.eval(x));
        if scheme_err > 0.6 * target {
            // Scheme error scales like n^(-beta/dim); jump toward the
            // budget that lands just under the warm-start bar.
            let ratio = (scheme_err / (0.55 * target)).max(2.0);
            let factor = ratio.powf(dim as f64 / truth.beta).clamp(2.0, 16.0);
            n = ((n as f64) * factor).ceil() as usize;
            continue;
        }
        // The network builder enforces a higher grid floor than the scheme
        // alone; treat its coarseness rejection as another budget bump.
        let built = match build_holder_net(truth, n, m, support) {
            Err(Error::GridTooCoarse { min, .. }) => {
                n = min;
                continue;
            }
            other => other?,
        };
        let err = net_sup_gap(&built.net, truth, samples, support.unwrap_or(&[]));
        if err <= target {
            return Ok((
                built.net,
                StageOutcome {
                    stage,
                    target,
                    achieved: err,
                    grid: n,
                    m,
                    nonzeros: built.report.nonzeros,
                },
            ));
        }
        last = err;
        if err - scheme_err > 0.5 * target && m < 30 {
            m = (m + 4).min(30);
        } else {
            n *= 2;
        }
        if n > 4_000_000 {
            break;
        }
    }
    Err(Error::StageBudget { stage, target, measured: last, size: n })
}

/// Total coordinate formula of one chart component on its reduced space;
/// unlike the membership-checked forward map it never rejects, so central
/// differences near the patch boundary stay well-defined.
fn coord_component(chart: &Chart, k: usize) -> Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> {
    let chart = chart.clone();
    Arc::new(move |v: &[f64]| coord_unchecked(&chart, v)[k])
}

fn coord_unchecked(chart: &Chart, v: &[f64]) -> Vec<f64> {
    match chart {
        Chart::CircleArc { center, offset, .. } => {
            vec![crate::manifold::wrap_angle(v[1].atan2(v[0]) - center) + offset]
        }
        Chart::Product { left, right, .. } => {
            let ld = left.reduced_dim();
            let mut x = coord_unchecked(left, &v[..ld]);
            x.extend(coord_unchecked(right, &v[ld..]));
            x
        }
        Chart::Reduced { inner, .. } => coord_unchecked(inner, v),
    }
}

fn pad_to(net: Network, depth: usize) -> Result<Network> {
    let extra = depth - net.depth();
    if extra == 0 { Ok(net) } else { pad_depth_output(&net, extra) }
}

/// Approximate `f` on the manifold to sup accuracy `eta` by a single
/// strict-weight network on the ambient space.
pub fn assemble(
    manifold: &Manifold,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    opts: &AssembleOptions,
) -> Result<AssembleBuild> {
    if !(opts.eta.is_finite() && opts.eta > 0.0) {
        return Err(Error::InvalidArgument("target accuracy must be positive".into()));
    }
    let part = build_partition(manifold, opts.bumps_per_axis, opts.stage_samples, opts.seed)?;
    let charts = manifold.charts.len() as f64;

    let stage_points = manifold.sample(opts.stage_samples, opts.seed.wrapping_add(101));
    let mut stages = Vec::new();
    let mut branches: Vec<Network> = Vec::new();
    let mut caps: Vec<f64> = Vec::new();
    let mut m_star = 0usize;

    for (j, chart) in manifold.charts.iter().enumerate() {
        let reduced: Vec<Vec<f64>> = stage_points
            .iter()
            .filter(|u| chart.forward(u).is_some())
            .map(|u| chart.reduce(u))
            .collect();
        if reduced.is_empty() {
            return Err(Error::Coverage { reason: format!("chart {j} contains no samples") });
        }
        let d_red = chart.reduced_dim();
        let d_coord = chart.coord_dim();
        let margin = part.support_margin(j);
        let (sup_lo, sup_hi) = part.support_box(j);
        let pad = margin / 2.0;
        let box_lo: Vec<f64> = sup_lo.iter().map(|v| v - pad).collect();
        let box_hi: Vec<f64> = sup_hi.iter().map(|v| v + pad).collect();
        let coord_samples = grid_samples(&box_lo, &box_hi, opts.stage_samples);

        // Pullback of the target through the chart, on the fattened support
        // box where the weight can be positive.
        let chart_for_g = chart.clone();
        let f_for_g = Arc::clone(&f);
        let g_truth = HolderFunction::new(
            Domain::new_box(box_lo.clone(), box_hi.clone())?,
            opts.beta,
            opts.k_const,
            Arc::new(move |x: &[f64]| f_for_g(&chart_for_g.inverse(x))),
        )?;
        let cap = coord_samples
            .iter()
            .map(|x| g_truth.eval(x).abs())
            .fold(0.0f64, f64::max)
            .max(1e-6);
        caps.push(cap);
        let (g_net, outcome) = fit_stage(
            format!("chart {j} pullback"),
            &g_truth,
            opts.eta / 8.0,
            &coord_samples,
            None,
        )?;
        stages.push(outcome);
        let g_pair = make_signed_pair(&scale_output(&g_net, 1.0 / (1.0 + cap))?)?;

        // Chart coordinate budget: a displacement e1 moves the pullback
        // value by k_const * e1^min(beta,1), and must keep coordinates
        // inside the fattened box. The weight never sees the coordinate.
        let gate = opts.eta / (8.0 * charts * (1.0 + cap));
        let e1 = (opts.eta / (8.0 * opts.k_const))
            .powf(1.0 / opts.beta.min(1.0))
            .min(margin / 4.0);

        let mut reduced_lo = vec![f64::INFINITY; d_red];
        let mut reduced_hi = vec![f64::NEG_INFINITY; d_red];
        for v in &reduced {
            for i in 0..d_red {
                reduced_lo[i] = reduced_lo[i].min(v[i]);
                reduced_hi[i] = reduced_hi[i].max(v[i]);
            }
        }
        for i in 0..d_red {
            reduced_lo[i] -= 0.15;
            reduced_hi[i] += 0.15;
        }

        // Dense, deterministic manifold samples for grid pruning: points on
        // a coordinate grid finer than a quarter of the spacing, mapped to
        // the reduced space. The coordinate maps are 1-Lipschitz per axis,
        // so the images inherit the density.
        let chart_for_s = chart.clone();
        let (img_lo, img_hi) = chart.image();
        let support_gen = move |min_spacing: f64| {
            let step = (min_spacing / 4.0).max(1e-5);
            let counts: Vec<usize> = img_lo
                .iter()
                .zip(&img_hi)
                .map(|(l, h)| (((h - l) / step).ceil() as usize + 1).clamp(2, 20_000))
                .collect();
            grid_counts(&img_lo, &img_hi, &counts)
                .into_iter()
                .map(|x| chart_for_s.inverse_reduced(&x))
                .collect()
        };

        let mut comp_nets = Vec::with_capacity(d_coord);
        for k in 0..d_coord {
            let truth = HolderFunction::new(
                Domain::new_box(reduced_lo.clone(), reduced_hi.clone())?,
                opts.beta.max(2.0),
                4.0,
                coord_component(chart, k),
            )?;
            let (net, outcome) = fit_stage(
                format!("chart {j} coordinate {k}"),
                &truth,
                e1,
                &reduced,
                Some(&support_gen),
            )?;
            stages.push(outcome);
            comp_nets.push(net);
        }
        let coord_depth = comp_nets.iter().map(|n| n.depth()).max().unwrap();
        let comp_padded = comp_nets
            .into_iter()
            .map(|n| pad_to(n, coord_depth))
            .collect::<Result<Vec<_>>>()?;
        let comp_refs: Vec<&Network> = comp_padded.iter().collect();
        let coords_reduced = parallelize(&comp_refs)?;
        let chart_net = match chart.reduction_matrix() {
            Some(q) => precompose_affine(&coords_reduced, &q, &vec![0.0; d_red])?,
            None => coords_reduced,
        };

        // Chart weight on the reduced space, NOT behind the fitted
        // coordinate. A fitted coordinate decays to zero over the pruning
        // boundary and sweeps through mid-image values on its way down,
        // which a coordinate-space weight would mistake for interior points.
        // On the reduced space that boundary lies where the weight's data
        // is identically zero, so the fitted weight is exactly zero there.
        // The weight is infinitely smooth; third-order data keeps its grid
        // from dominating the budget.
        let part_for_t = part.clone();
        let chart_for_t = chart.clone();
        let t_truth = HolderFunction::new(
            Domain::new_box(reduced_lo.clone(), reduced_hi.clone())?,
            3.0,
            16.0,
            Arc::new(move |v: &[f64]| {
                part_for_t.tau_in_coords(j, &coord_unchecked(&chart_for_t, v))
            }),
        )?;
        let (t_net, outcome) = fit_stage(
            format!("chart {j} weight"),
            &t_truth,
            gate,
            &reduced,
            Some(&support_gen),
        )?;
        stages.push(outcome);
        let t_lifted = match chart.reduction_matrix() {
            Some(q) => precompose_affine(&t_net, &q, &vec![0.0; d_red])?,
            None => t_net,
        };

        // Feed the pullback its coordinates, pad both heads to a common
        // depth, and run the gated pair multiplier. The junction entry IS
        // the gate: composing rectifies the interface, so the weight
        // arrives as relu(weight - gate).
        let head_g = compose(&g_pair, &chart_net, SparseVec::empty(d_coord))?;
        let depth = head_g.depth().max(t_lifted.depth());
        let head_g = pad_to(head_g, depth)?;
        let head_t = pad_to(t_lifted, depth)?;
        let e_j = parallelize(&[&head_g, &head_t])?;
        m_star = m_star.max(m_for(opts.eta / (4.0 * charts * (1.0 + cap))));
        let gated = compose(
            &build_mult_star(m_star)?,
            &e_j,
            SparseVec::new(3, vec![(2, gate)])?,
        )?;
        branches.push(gated);
    }

    let deepest = branches.iter().map(|n| n.depth()).max().unwrap();
    let padded = branches
        .into_iter()
        .map(|b| pad_to(b, deepest))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Network> = padded.iter().collect();
    let stacked = parallelize(&refs)?;

    // Undo the per-chart scaling while summing: chart j contributes
    // (1 + cap_j) * (positive product - negative product).
    let mut weights = Vec::with_capacity(2 * caps.len());
    for cap in &caps {
        weights.push(1.0 + cap);
        weights.push(-(1.0 + cap));
    }
    let net = compose(
        &build_weighted_sum(&weights)?,
        &stacked,
        SparseVec::empty(weights.len()),
    )?;

    let audit = manifold.sample(opts.final_samples, opts.seed.wrapping_add(777));
    let audit_sup = audit
        .par_iter()
        .map_init(EvalScratch::default, |scratch, u| {
            (net.eval_into(u, scratch).unwrap()[0] - f(u)).abs()
        })
        .reduce(|| 0.0, f64::max);
    if audit_sup > opts.eta {
        return Err(Error::StageBudget {
            stage: "assembled network".into(),
            target: opts.eta,
            measured: audit_sup,
            size: net.sparsity().s,
        });
    }

    let report = AssembleReport {
        eta: opts.eta,
        charts: manifold.charts.len(),
        ambient_dim: manifold.ambient_dim,
        intrinsic_dim: manifold.intrinsic_dim,
        m_star,
        depth: net.depth(),
        nonzeros: net.sparsity().s,
        audit_sup,
        stages,
    };
    Ok(AssembleBuild { net, partition: part, report })
}

/// Uniform grid with roughly `budget` points over a box.
fn grid_samples(lo: &[f64], hi: &[f64], budget: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let per_axis = ((budget as f64).powf(1.0 / d as f64).ceil() as usize).clamp(2, 4096);
    grid_counts(lo, hi, &vec![per_axis; d])
}

/// Uniform grid with the given per-axis point counts.
fn grid_counts(lo: &[f64], hi: &[f64], counts: &[usize]) -> Vec<Vec<f64>> {
    let d = lo.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        out.push(
            (0..d)
                .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (counts[i] - 1) as f64)
                .collect(),
        );
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < counts[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_opts(eta: f64, beta: f64, k_const: f64) -> AssembleOptions {
        let mut opts = AssembleOptions::new(eta, beta, k_const);
        opts.stage_samples = 1200;
        opts.final_samples = 4000;
        opts
    }

    #[test]
    fn assembles_coordinate_function_on_the_circle() {
        let m = Manifold::circle();
        let opts = test_opts(0.2, 2.0, 1.0);
        let built = assemble(&m, Arc::new(|u: &[f64]| u[0]), &opts).unwrap();
        assert!(built.net.validate().passed);
        assert!(built.report.audit_sup <= 0.2);
        assert_eq!(built.net.input_dim(), 2);
        for theta in [0.0f64, 1.0, 2.5, 4.0, 5.5] {
            let u = [theta.cos(), theta.sin()];
            let got = built.net.eval(&u).unwrap()[0];
            assert!((got - u[0]).abs() <= 0.2, "theta {theta}: {got} vs {}", u[0]);
        }
    }

    #[test]
    fn tighter_targets_cost_more_and_deliver_more() {
        let m = Manifold::circle();
        let f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> =
            Arc::new(|u: &[f64]| (2.0 * u[0] + u[1]).sin());
        let loose = assemble(&m, Arc::clone(&f), &test_opts(0.5, 2.0, 4.0)).unwrap();
        let tight = assemble(&m, f, &test_opts(0.1, 2.0, 4.0)).unwrap();
        assert!(tight.report.audit_sup <= 0.1);
        assert!(tight.report.audit_sup < loose.report.eta);
        assert!(tight.report.nonzeros >= loose.report.nonzeros);
    }

    #[test]
    fn embedded_assembly_matches_planar_costs() {
        let base = Manifold::circle();
        let emb = Manifold::circle_embedded(10, 42).unwrap();
        let q = emb.charts[0].reduction_matrix().unwrap();
        let f_base: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|u: &[f64]| u[0] * u[1]);
        let f_emb: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(move |u: &[f64]| {
            let a: f64 = q[0].iter().zip(u).map(|(x, y)| x * y).sum();
            let b: f64 = q[1].iter().zip(u).map(|(x, y)| x * y).sum();
            a * b
        });
        let opts = test_opts(0.25, 2.0, 2.0);
        let planar = assemble(&base, f_base, &opts).unwrap();
        let lifted = assemble(&emb, f_emb, &opts).unwrap();
        assert_eq!(lifted.net.input_dim(), 10);
        assert!(lifted.report.audit_sup <= 0.25);
        // The ambient dimension only enters the first affine layer.
        assert!(
            (lifted.report.nonzeros as f64) <= 4.0 * planar.report.nonzeros as f64,
            "lifted {} vs planar {}",
            lifted.report.nonzeros,
            planar.report.nonzeros
        );
    }
}
