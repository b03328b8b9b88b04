//! Local polynomial interpolation nets for smoothness-constrained functions
//! on box domains.
//!
//! The target is approximated by a grid scheme: a uniform grid over the
//! domain box, one local Taylor polynomial per grid node (expanded at the
//! nearest in-domain node, which matters when a membership predicate carves
//! the box), and the piecewise-linear partition of unity of grid hats. The
//! scheme value is `sum_node P_node(x) * hat_node(x)`; [`LocalScheme::eval`]
//! computes it directly and serves as the reference the wired network is
//! tested against.
//!
//! The network realizes the same scheme with strict weights:
//!
//! 1. rescale to `x' = (x - center)/R + 1/2`, mapping the box into the
//!    middle of the unit cube, plus one constant unit;
//! 2. rectified ramps at every used grid coordinate, duplicated so a
//!    doubling pyramid can raise them to the hat slope (doubling a value by
//!    adding two identical units keeps every coefficient at 1);
//! 3. one-dimensional hats, anchor difference units for higher-degree
//!    monomials, and a pool of constant copies that absorbs affine offsets
//!    too large for a single shift;
//! 4. a shared multiplication schedule that forms the d-dimensional hats
//!    and all monomials of the Taylor polynomials;
//! 5. per-anchor polynomial units `y = 1/2 + P/B` (B normalizes every
//!    coefficient into `[-1, 1]`), clipped to `[0, 1]` when monomial
//!    products could overshoot;
//! 6. a final multiplication bank pairing each hat with its polynomial
//!    unit, and a fan stage that realizes the output weights `B`, `B/2`, and
//!    the constant-path coefficients with unit-bounded edges.
//!
//! Nodes whose polynomial has no nonconstant term skip the final bank: their
//! contribution `c0 * hat` is wired directly, so a function with vanishing
//! derivative data (notably `f = 0`, or any target below the smoothness
//! threshold for first-order data) is realized without a single
//! multiplication and therefore exactly on one-dimensional domains.

use crate::error::{Error, Result};
use crate::gadgets::{emit_mult_bank, emit_product_schedule, lc_merge, mult_error_bound, LinComb};
use crate::net::{NetBuilder, Network, UnitSpec, WeightMode};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Axis-aligned box, optionally carved by a membership predicate. Grid
/// anchors are snapped to predicate-satisfying grid points, so a function
/// only defined on a sub-region still gets usable polynomial data.
#[derive(Clone)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    member: Option<Arc<dyn Fn(&[f64]) -> bool + Send + Sync>>,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("member", &self.member.as_ref().map(|_| "<predicate>"))
            .finish()
    }
}

impl Domain {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidArgument(
                "domain bounds must be nonempty and of equal length".into(),
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidArgument(format!(
                    "degenerate domain interval [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi, member: None })
    }

    pub fn unit_box(dim: usize) -> Self {
        Self::new_box(vec![0.0; dim], vec![1.0; dim]).unwrap()
    }

    pub fn with_member(mut self, member: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>) -> Self {
        self.member = Some(member);
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
            && self.member.as_ref().map_or(true, |m| m(x))
    }
}

/// How to obtain the local polynomial data of a target function.
#[derive(Clone)]
pub enum TaylorSource {
    /// Central differences with the given step; `0.0` picks a step from the
    /// grid spacing. The function must be evaluable slightly outside the box.
    FiniteDifference { step: f64 },
    /// Exact partial derivatives: called with `(x, alpha)` and expected to
    /// return the raw derivative of multi-order `alpha` at `x`.
    Analytic(Arc<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>),
}

/// Scalar target with declared smoothness: the construction interpolates
/// degree-`deg` Taylor data, where `deg` is the largest integer strictly
/// below `beta`, and budgets its grid against the remainder constant
/// `k_const` (|f - Taylor_z f|(x) <= k_const * |x - z|_inf^beta on the
/// domain).
#[derive(Clone)]
pub struct HolderFunction {
    pub domain: Domain,
    pub beta: f64,
    pub k_const: f64,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    taylor: TaylorSource,
}

impl HolderFunction {
    pub fn new(
        domain: Domain,
        beta: f64,
        k_const: f64,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidArgument("smoothness exponent must be positive".into()));
        }
        if !(k_const.is_finite() && k_const > 0.0) {
            return Err(Error::InvalidArgument("smoothness constant must be positive".into()));
        }
        Ok(Self { domain, beta, k_const, f, taylor: TaylorSource::FiniteDifference { step: 0.0 } })
    }

    pub fn with_taylor(mut self, taylor: TaylorSource) -> Self {
        self.taylor = taylor;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn partial(&self, x: &[f64], alpha: &[usize], auto_step: f64) -> f64 {
        match &self.taylor {
            TaylorSource::Analytic(d) => d(x, alpha),
            TaylorSource::FiniteDifference { step } => {
                let h = if *step > 0.0 { *step } else { auto_step };
                fd_partial(self.f.as_ref(), x, alpha, h)
            }
        }
    }
}

/// Largest integer strictly below `beta`: the Taylor degree the scheme
/// interpolates.
pub fn taylor_degree(beta: f64) -> usize {
    if beta.fract() == 0.0 {
        (beta as usize).saturating_sub(1)
    } else {
        beta.floor() as usize
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// All multi-indices over `dim` axes with total order at most `max_total`,
/// graded-lexicographically ordered.
fn multi_indices(dim: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0usize; dim]];
    let mut frontier = out.clone();
    for _ in 0..max_total {
        let mut next = Vec::new();
        for base in &frontier {
            for i in 0..dim {
                let mut a = base.clone();
                a[i] += 1;
                // Keep only the canonical generation path to avoid duplicates.
                if base[..i].iter().zip(&a[..i]).all(|(b, n)| b == n)
                    && base[i + 1..].iter().all(|&v| v == 0)
                {
                    next.push(a);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.sort();
    out.sort_by_key(|a| a.iter().sum::<usize>());
    out.dedup();
    out
}

/// Central-difference partial derivative of multi-order `alpha`, recursing
/// one axis at a time.
fn fd_partial(f: &(dyn Fn(&[f64]) -> f64 + Send + Sync), x: &[f64], alpha: &[usize], h: f64) -> f64 {
    match alpha.iter().position(|&a| a > 0) {
        None => f(x),
        Some(i) => {
            let mut a = alpha.to_vec();
            a[i] -= 1;
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (fd_partial(f, &xp, &a, h) - fd_partial(f, &xm, &a, h)) / (2.0 * h)
        }
    }
}

/// Taylor polynomial around `anchor`: `sum_alpha c_alpha (x - anchor)^alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorPolynomial {
    pub anchor: Vec<f64>,
    /// `(alpha, c_alpha)` pairs, graded-lexicographic, including `alpha = 0`.
    pub terms: Vec<(Vec<usize>, f64)>,
}

impl TaylorPolynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (alpha, c) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            let mut mono = 1.0;
            for (i, &a) in alpha.iter().enumerate() {
                if a > 0 {
                    mono *= (x[i] - self.anchor[i]).powi(a as i32);
                }
            }
            total += c * mono;
        }
        total
    }
}

/// One kept grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeNode {
    /// Per-axis grid index.
    pub index: Vec<usize>,
    /// Node coordinates in original units.
    pub center: Vec<f64>,
    /// Index into [`LocalScheme::anchors`].
    pub anchor: usize,
}

/// Grid interpolation scheme: the mathematical object the network realizes.
/// Evaluation here is plain arithmetic with no shared plumbing with the
/// network, so it doubles as the test oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalScheme {
    pub dim: usize,
    /// Grid resolution: `m_grid + 1` points per axis.
    pub m_grid: usize,
    pub lo: Vec<f64>,
    pub spacing: Vec<f64>,
    pub nodes: Vec<SchemeNode>,
    pub anchors: Vec<TaylorPolynomial>,
    pub beta: f64,
    pub k_const: f64,
    /// Dense node lookup over the full grid, -1 where a node was pruned.
    lookup: Vec<i32>,
    strides: Vec<usize>,
}

impl LocalScheme {
    /// Tent value of the node's hat at `x`: the product over axes of
    /// `max(0, 1 - |x_i - c_i| / spacing_i)`.
    pub fn hat(&self, node: &SchemeNode, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for i in 0..self.dim {
            let t = 1.0 - ((x[i] - node.center[i]) / self.spacing[i]).abs();
            if t <= 0.0 {
                return 0.0;
            }
            v *= t;
        }
        v
    }

    fn node_at(&self, index: &[usize]) -> Option<&SchemeNode> {
        let flat: usize = index.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
        match self.lookup[flat] {
            -1 => None,
            id => Some(&self.nodes[id as usize]),
        }
    }

    /// Scheme value `sum_node P(x) hat(x)`, visiting only the at most `2^d`
    /// nodes whose hat support contains `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut base = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let t = (x[i] - self.lo[i]) / self.spacing[i];
            base.push(t.floor() as i64);
        }
        let mut total = 0.0;
        let mut index = vec![0usize; self.dim];
        'corner: for corner in 0..(1usize << self.dim) {
            for i in 0..self.dim {
                let j = base[i] + ((corner >> i) & 1) as i64;
                if j < 0 || j > self.m_grid as i64 {
                    continue 'corner;
                }
                index[i] = j as usize;
            }
            if let Some(node) = self.node_at(&index) {
                let h = self.hat(node, x);
                if h > 0.0 {
                    total += self.anchors[node.anchor].eval(x) * h;
                }
            }
        }
        total
    }

    /// Interpolation error bound `k_const * 3^beta * m_grid^-beta`, valid
    /// when anchors sit within two cells of their node and the box extent is
    /// at most 3 per axis.
    pub fn approx_error_bound(&self) -> f64 {
        self.k_const * 3f64.powf(self.beta) * (self.m_grid as f64).powf(-self.beta)
    }
}

/// Smallest admissible grid budget for the network construction: the scheme
/// floor plus smoothness-dependent terms that keep the error bound valid.
fn min_net_budget(dim: usize, beta: f64, k_const: f64) -> usize {
    let d = dim as f64;
    let b = (beta + 1.0).powf(d);
    let c = (k_const + 1.0) * std::f64::consts::E.powf(d);
    (min_scheme_budget(dim) as f64).max(b).max(c).ceil() as usize
}

/// Smallest budget the grid chooser handles: five points per axis.
fn min_scheme_budget(dim: usize) -> usize {
    5usize.pow(dim as u32)
}

/// Build the grid scheme: choose the largest grid with `(M+1)^d <= n_budget`
/// nodes, optionally prune nodes whose hat support contains none of
/// `support_samples`, and expand Taylor data at each node's nearest
/// in-domain grid point.
pub fn build_local_scheme(
    f: &HolderFunction,
    n_budget: usize,
    support_samples: Option<&[Vec<f64>]>,
) -> Result<LocalScheme> {
    let dim = f.domain.dim();
    let min = min_scheme_budget(dim);
    if n_budget < min {
        return Err(Error::GridTooCoarse { n: n_budget, min, dim });
    }
    if n_budget > 50_000_000 {
        return Err(Error::InvalidArgument(format!(
            "grid budget {n_budget} too large to enumerate"
        )));
    }
    let mut m_grid = 4usize;
    while (m_grid + 2).pow(dim as u32) <= n_budget {
        m_grid += 1;
    }
    let points = m_grid + 1;
    let spacing: Vec<f64> = (0..dim)
        .map(|i| (f.domain.hi[i] - f.domain.lo[i]) / m_grid as f64)
        .collect();
    let coord = |i: usize, j: usize| f.domain.lo[i] + j as f64 * spacing[i];

    let mut strides = vec![1usize; dim];
    for i in (0..dim.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * points;
    }

    // Grid points satisfying the domain predicate, the anchor candidates.
    let mut index = vec![0usize; dim];
    let mut admissible: Vec<Vec<usize>> = Vec::new();
    let mut all_indices: Vec<Vec<usize>> = Vec::new();
    loop {
        all_indices.push(index.clone());
        let x: Vec<f64> = index.iter().enumerate().map(|(i, &j)| coord(i, j)).collect();
        if f.domain.contains(&x) {
            admissible.push(index.clone());
        }
        let mut axis = dim;
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] <= m_grid {
                break;
            }
            index[axis] = 0;
        }
        if index.iter().all(|&j| j == 0) {
            break;
        }
    }
    if admissible.is_empty() {
        return Err(Error::Coverage {
            reason: "no grid point satisfies the domain predicate; refine the grid or widen the domain"
                .into(),
        });
    }

    let auto_step = spacing
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .mul_add(1e-2, 0.0)
        .max(1e-4);
    let deg = taylor_degree(f.beta);
    let alphas = multi_indices(dim, deg);

    let mut anchors: Vec<TaylorPolynomial> = Vec::new();
    let mut anchor_ids: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut lookup = vec![-1i32; points.pow(dim as u32)];

    for index in &all_indices {
        let center: Vec<f64> = index.iter().enumerate().map(|(i, &j)| coord(i, j)).collect();
        if let Some(samples) = support_samples {
            // The 25% slack keeps every node whose hat can touch the sampled
            // set even when samples sit a quarter-spacing apart.
            let covered = samples.iter().any(|s| {
                s.len() == dim
                    && s.iter()
                        .zip(&center)
                        .zip(&spacing)
                        .all(|((&sv, &cv), &sp)| (sv - cv).abs() < 1.25 * sp)
            });
            if !covered {
                continue;
            }
        }
        // Nearest admissible grid point; the first minimum in iteration
        // order (graded by index) wins ties, making anchors deterministic.
        let anchor_index = admissible
            .iter()
            .min_by(|a, b| {
                let da: f64 = a
                    .iter()
                    .zip(index)
                    .enumerate()
                    .map(|(i, (&aj, &ij))| {
                        let d = (aj as f64 - ij as f64) * spacing[i];
                        d * d
                    })
                    .sum();
                let db: f64 = b
                    .iter()
                    .zip(index)
                    .enumerate()
                    .map(|(i, (&bj, &ij))| {
                        let d = (bj as f64 - ij as f64) * spacing[i];
                        d * d
                    })
                    .sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap()
            .clone();
        let anchor_id = *anchor_ids.entry(anchor_index.clone()).or_insert_with(|| {
            let z: Vec<f64> = anchor_index
                .iter()
                .enumerate()
                .map(|(i, &j)| coord(i, j))
                .collect();
            let terms = alphas
                .iter()
                .map(|alpha| {
                    let fact: f64 = alpha.iter().map(|&a| factorial(a)).product();
                    (alpha.clone(), f.partial(&z, alpha, auto_step) / fact)
                })
                .collect();
            anchors.push(TaylorPolynomial { anchor: z, terms });
            anchors.len() - 1
        });
        let flat: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
        lookup[flat] = nodes.len() as i32;
        nodes.push(SchemeNode { index: index.clone(), center, anchor: anchor_id });
    }

    Ok(LocalScheme {
        dim,
        m_grid,
        lo: f.domain.lo.clone(),
        spacing,
        nodes,
        anchors,
        beta: f.beta,
        k_const: f.k_const,
        lookup,
        strides,
    })
}

/// Size, accuracy, and envelope data of a built interpolation net.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderReport {
    pub n_budget: usize,
    pub m: usize,
    pub m_grid: usize,
    pub dim: usize,
    /// Rescale factor of the first layer.
    pub scale_r: f64,
    /// Polynomial normalizer; output fan realizes it with unit-bounded edges.
    pub b_norm: f64,
    /// `|net - scheme| <= c_gadget * 2^-m` on the domain.
    pub c_gadget: f64,
    pub depth: usize,
    pub nonzeros: usize,
    /// `k 3^beta m_grid^-beta`: scheme-to-target interpolation bound.
    pub scheme_bound: f64,
    /// Combined bound on `|net - f|` over the domain.
    pub total_bound: f64,
    /// Coarse nonzero-count envelope the construction stays under.
    pub sparsity_envelope: f64,
    /// Coarse depth envelope; reported for context, pyramid depth also grows
    /// with the grid resolution.
    pub depth_envelope: f64,
}

/// Network realization of a grid scheme.
pub struct HolderBuild {
    pub net: Network,
    pub scheme: LocalScheme,
    pub report: HolderReport,
}

struct TermPlan {
    /// Signed coefficient applied to the product, already divided by B.
    w: f64,
    /// `(axis, negative_part)` factor list, length = monomial order.
    factors: Vec<(usize, bool)>,
}

struct AnchorPlan {
    /// `(axis, weight)` edges onto the amplified difference pair, one `+w`
    /// and one `-w` edge per entry.
    linear: Vec<(usize, f64)>,
    prods: Vec<TermPlan>,
    /// Constant routed through the pool: `1/2 + c0/B + sum_t w_t`.
    const_part: f64,
    /// `sum_t |w_t| (order_t - 1)`: multiplication errors feeding `y`.
    budget: f64,
    /// True when any nonconstant coefficient is nonzero; otherwise every
    /// node of this anchor takes the constant path.
    serving: bool,
    c0: f64,
}

/// Build the interpolation network for `f` with grid budget `n_budget` and
/// multiplication accuracy `2^-m`. `support_samples`, when given, prunes
/// grid nodes whose hat touches none of the samples; the returned scheme
/// reflects the pruning, so net and oracle stay comparable.
pub fn build_holder_net(
    f: &HolderFunction,
    n_budget: usize,
    m: usize,
    support_samples: Option<&[Vec<f64>]>,
) -> Result<HolderBuild> {
    if m == 0 {
        return Err(Error::InvalidArgument("accuracy parameter m must be positive".into()));
    }
    let net_min = min_net_budget(f.domain.dim(), f.beta, f.k_const);
    if n_budget < net_min {
        return Err(Error::GridTooCoarse { n: n_budget, min: net_min, dim: f.domain.dim() });
    }
    let scheme = build_local_scheme(f, n_budget, support_samples)?;
    let dim = scheme.dim;
    let deg = taylor_degree(f.beta);

    // Rescale so the box maps into [1/4, 3/4]^d and the first-layer shifts
    // stay within [-1, 1]: R covers both the half-widths and the centers.
    let centers: Vec<f64> = (0..dim)
        .map(|i| (f.domain.lo[i] + f.domain.hi[i]) / 2.0)
        .collect();
    let mut scale_r = 1.0f64;
    for i in 0..dim {
        scale_r = scale_r.max(2.0 * (f.domain.hi[i] - f.domain.lo[i]));
        if centers[i] > 0.0 {
            scale_r = scale_r.max(centers[i] / 1.5);
        } else {
            scale_r = scale_r.max(2.0 * centers[i].abs());
        }
    }
    let to_prime = |i: usize, v: f64| (v - centers[i]) / scale_r + 0.5;

    // Hat slope per axis in rescaled coordinates, split into doublings and a
    // residual factor in [1, 2).
    let slopes: Vec<f64> = (0..dim).map(|i| scale_r / scheme.spacing[i]).collect();
    let levels: Vec<usize> = slopes.iter().map(|s| s.log2().floor() as usize).collect();
    let rho: Vec<f64> = slopes
        .iter()
        .zip(&levels)
        .map(|(s, &a)| s / f64::powi(2.0, a as i32))
        .collect();
    let max_levels = levels.iter().copied().max().unwrap_or(0);

    // Anchor differences are doubled through the pyramid like the hat ramps,
    // but stop enough levels short that their value stays below 1/2 on every
    // hat support they serve. A factor then carries one spacing-sized unit of
    // scale instead of the full box width, which keeps the folded
    // coefficients, and with them B, small.
    let anchor_serving: Vec<bool> = scheme
        .anchors
        .iter()
        .map(|p| p.terms.iter().any(|(alpha, c)| alpha.iter().sum::<usize>() >= 1 && *c != 0.0))
        .collect();
    let mut ratio = vec![1.0f64; dim];
    for node in &scheme.nodes {
        if !anchor_serving[node.anchor] {
            continue;
        }
        let anchor = &scheme.anchors[node.anchor].anchor;
        for i in 0..dim {
            let r = 1.0 + (node.center[i] - anchor[i]).abs() / scheme.spacing[i];
            ratio[i] = ratio[i].max(r);
        }
    }
    let amp_levels: Vec<usize> = (0..dim)
        .map(|i| {
            let hold = (2.0 * ratio[i]).log2().ceil() as usize;
            levels[i].saturating_sub(hold)
        })
        .collect();
    let unit_scale: Vec<f64> =
        (0..dim).map(|i| scale_r / f64::powi(2.0, amp_levels[i] as i32)).collect();

    // Normalizer B: large enough that y = 1/2 + P/B stays in [0, 1] on every
    // hat support and that every coefficient folded onto the amplified
    // difference scale fits in [-1, 1].
    let mut b_norm = 1.0f64;
    for node in &scheme.nodes {
        let poly = &scheme.anchors[node.anchor];
        let r_node = (0..dim)
            .map(|i| scheme.spacing[i] + (node.center[i] - poly.anchor[i]).abs())
            .fold(0.0f64, f64::max);
        let sup: f64 = poly
            .terms
            .iter()
            .map(|(alpha, c)| c.abs() * r_node.powi(alpha.iter().sum::<usize>() as i32))
            .sum();
        b_norm = b_norm.max(2.0 * sup);
    }
    let fold_scale = |alpha: &[usize]| -> f64 {
        alpha.iter().enumerate().map(|(i, &ai)| unit_scale[i].powi(ai as i32)).product()
    };
    for poly in &scheme.anchors {
        for (alpha, c) in &poly.terms {
            let order: usize = alpha.iter().sum();
            if order >= 1 {
                b_norm = b_norm.max(c.abs() * fold_scale(alpha));
            }
        }
    }

    // Per-anchor wiring plans.
    let mut plans: Vec<AnchorPlan> = Vec::with_capacity(scheme.anchors.len());
    for poly in &scheme.anchors {
        let mut plan = AnchorPlan {
            linear: Vec::new(),
            prods: Vec::new(),
            const_part: 0.5,
            budget: 0.0,
            serving: false,
            c0: 0.0,
        };
        for (alpha, c) in &poly.terms {
            let order: usize = alpha.iter().sum();
            if order == 0 {
                plan.c0 = *c;
                plan.const_part += c / b_norm;
                continue;
            }
            if *c == 0.0 {
                continue;
            }
            plan.serving = true;
            let w = c * fold_scale(alpha) / b_norm;
            if order == 1 {
                // The signed difference pair recovers the centered coordinate
                // exactly, so no constant correction is needed.
                let axis = alpha.iter().position(|&a| a > 0).unwrap();
                plan.linear.push((axis, w));
                continue;
            }
            // Sign-split expansion: (p - n)^k = p^k + (-1)^k n^k because one
            // factor of each pair is always zero, so a monomial becomes a sum
            // over per-axis sign choices.
            let support: Vec<usize> = (0..dim).filter(|&i| alpha[i] > 0).collect();
            for choice in 0..(1usize << support.len()) {
                let mut sign = 1.0;
                let mut factors = Vec::with_capacity(order);
                for (bit, &axis) in support.iter().enumerate() {
                    let neg = (choice >> bit) & 1 == 1;
                    if neg && alpha[axis] % 2 == 1 {
                        sign = -sign;
                    }
                    for _ in 0..alpha[axis] {
                        factors.push((axis, neg));
                    }
                }
                let wt = sign * w;
                plan.budget += wt.abs() * (order - 1) as f64;
                plan.const_part += wt;
                plan.prods.push(TermPlan { w: wt, factors });
            }
        }
        plans.push(plan);
    }

    let pool_size = plans
        .iter()
        .filter(|p| p.serving)
        .map(|p| p.const_part.abs().ceil() as usize)
        .max()
        .unwrap_or(0)
        .max(1);

    let mult_nodes: Vec<usize> = (0..scheme.nodes.len())
        .filter(|&i| plans[scheme.nodes[i].anchor].serving)
        .collect();
    let const_nodes: Vec<usize> = (0..scheme.nodes.len())
        .filter(|&i| {
            !plans[scheme.nodes[i].anchor].serving && plans[scheme.nodes[i].anchor].c0 != 0.0
        })
        .collect();
    let serving_anchors: Vec<usize> =
        (0..plans.len()).filter(|&a| plans[a].serving).collect();

    // Grid coordinates backing the difference pairs, shared across anchors
    // that sit on the same grid line.
    let anchor_j = |a: usize, i: usize| -> usize {
        ((scheme.anchors[a].anchor[i] - scheme.lo[i]) / scheme.spacing[i]).round() as usize
    };
    let mut pn_axes: Vec<Vec<usize>> = vec![Vec::new(); plans.len()];
    let mut pn_need: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &a in &serving_anchors {
        let mut axes: Vec<usize> = plans[a].linear.iter().map(|&(i, _)| i).collect();
        axes.extend(plans[a].prods.iter().flat_map(|t| t.factors.iter().map(|&(i, _)| i)));
        axes.sort_unstable();
        axes.dedup();
        for &i in &axes {
            pn_need.insert((i, anchor_j(a, i)));
        }
        pn_axes[a] = axes;
    }

    // Grid coordinates actually used by kept nodes, per axis.
    let mut used: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for node in &scheme.nodes {
        for i in 0..dim {
            used[i].push(node.index[i]);
        }
    }
    for u in &mut used {
        u.sort_unstable();
        u.dedup();
    }

    let mut b = NetBuilder::new(dim);

    // Layer 1: rescaled coordinates and the constant unit.
    let mut specs: Vec<UnitSpec> = (0..dim)
        .map(|i| UnitSpec::with_shift(vec![(i, 1.0 / scale_r)], centers[i] / scale_r - 0.5))
        .collect();
    specs.push(UnitSpec::one());
    b.advance(&specs);
    let xp: Vec<usize> = (0..dim).collect();
    let mut one = dim;

    // Ramp layer: two copies of each rectified ramp per sign, seeding the
    // doubling pyramids for the hats and for the anchor difference pairs.
    let mut specs = Vec::new();
    let mut ramp: BTreeMap<(usize, usize), [usize; 4]> = BTreeMap::new();
    for (i, coords) in used.iter().enumerate() {
        for &j in coords {
            let g = to_prime(i, scheme.lo[i] + j as f64 * scheme.spacing[i]);
            let base = specs.len();
            specs.push(UnitSpec::with_shift(vec![(xp[i], 1.0)], g));
            specs.push(UnitSpec::with_shift(vec![(xp[i], 1.0)], g));
            specs.push(UnitSpec::with_shift(vec![(xp[i], -1.0)], -g));
            specs.push(UnitSpec::with_shift(vec![(xp[i], -1.0)], -g));
            ramp.insert((i, j), [base, base + 1, base + 2, base + 3]);
        }
    }
    let mut pn_ramp: BTreeMap<(usize, usize), [usize; 4]> = BTreeMap::new();
    for &(i, j) in &pn_need {
        let g = to_prime(i, scheme.lo[i] + j as f64 * scheme.spacing[i]);
        let base = specs.len();
        specs.push(UnitSpec::with_shift(vec![(xp[i], 1.0)], g));
        specs.push(UnitSpec::with_shift(vec![(xp[i], 1.0)], g));
        specs.push(UnitSpec::with_shift(vec![(xp[i], -1.0)], -g));
        specs.push(UnitSpec::with_shift(vec![(xp[i], -1.0)], -g));
        pn_ramp.insert((i, j), [base, base + 1, base + 2, base + 3]);
    }
    let tail = specs.len();
    specs.push(UnitSpec::carry(one));
    b.advance(&specs);
    one = tail;

    // Doubling pyramid: each level replaces a pair by two copies of its sum,
    // which is exact in floating point; finished entries carry through. The
    // difference pairs stop at their own, earlier level.
    for level in 1..=max_levels {
        let mut specs = Vec::new();
        let mut next_ramp = BTreeMap::new();
        for (&(i, j), &[pa, pb, na, nb]) in &ramp {
            let base = specs.len();
            if level <= levels[i] {
                specs.push(UnitSpec::new(vec![(pa, 1.0), (pb, 1.0)]));
                specs.push(UnitSpec::new(vec![(pa, 1.0), (pb, 1.0)]));
                specs.push(UnitSpec::new(vec![(na, 1.0), (nb, 1.0)]));
                specs.push(UnitSpec::new(vec![(na, 1.0), (nb, 1.0)]));
            } else {
                specs.push(UnitSpec::carry(pa));
                specs.push(UnitSpec::carry(pb));
                specs.push(UnitSpec::carry(na));
                specs.push(UnitSpec::carry(nb));
            }
            next_ramp.insert((i, j), [base, base + 1, base + 2, base + 3]);
        }
        let mut next_pn = BTreeMap::new();
        for (&(i, j), &[pa, pb, na, nb]) in &pn_ramp {
            let base = specs.len();
            if level <= amp_levels[i] {
                specs.push(UnitSpec::new(vec![(pa, 1.0), (pb, 1.0)]));
                specs.push(UnitSpec::new(vec![(pa, 1.0), (pb, 1.0)]));
                specs.push(UnitSpec::new(vec![(na, 1.0), (nb, 1.0)]));
                specs.push(UnitSpec::new(vec![(na, 1.0), (nb, 1.0)]));
            } else {
                specs.push(UnitSpec::carry(pa));
                specs.push(UnitSpec::carry(pb));
                specs.push(UnitSpec::carry(na));
                specs.push(UnitSpec::carry(nb));
            }
            next_pn.insert((i, j), [base, base + 1, base + 2, base + 3]);
        }
        let tail = specs.len();
        specs.push(UnitSpec::carry(one));
        b.advance(&specs);
        ramp = next_ramp;
        pn_ramp = next_pn;
        one = tail;
    }

    // Staging layer: one-dimensional hats, the amplified difference pairs,
    // and the constant pool.
    let mut specs = Vec::new();
    let mut hat1d: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&(i, j), &[pa, pb, na, nb]) in &ramp {
        let half = rho[i] / 2.0;
        hat1d.insert((i, j), specs.len());
        specs.push(UnitSpec::with_shift(
            vec![(pa, -half), (pb, -half), (na, -half), (nb, -half)],
            -1.0,
        ));
    }
    let mut pn_pair: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for &(i, j) in &pn_need {
        let [pa, _, na, _] = pn_ramp[&(i, j)];
        pn_pair.insert((i, j), (specs.len(), specs.len() + 1));
        specs.push(UnitSpec::carry(pa));
        specs.push(UnitSpec::carry(na));
    }
    let pool_start = specs.len();
    specs.extend((0..pool_size).map(|_| UnitSpec::carry(one)));
    b.advance(&specs);
    let mut pool: Vec<usize> = (pool_start..pool_start + pool_size).collect();

    // Shared product schedule: d-dimensional hats for every node, then every
    // monomial sign-term of every serving anchor.
    let mut factor_lists: Vec<Vec<LinComb>> = Vec::new();
    for node in &scheme.nodes {
        factor_lists.push(
            (0..dim)
                .map(|i| vec![(hat1d[&(i, node.index[i])], 1.0)])
                .collect(),
        );
    }
    let mut term_owner: Vec<(usize, usize)> = Vec::new();
    for &a in &serving_anchors {
        for (t, term) in plans[a].prods.iter().enumerate() {
            factor_lists.push(
                term.factors
                    .iter()
                    .map(|&(i, neg)| {
                        let (p, n) = pn_pair[&(i, anchor_j(a, i))];
                        vec![(if neg { n } else { p }, 1.0)]
                    })
                    .collect(),
            );
            term_owner.push((a, t));
        }
    }
    let mut carries = pool.clone();
    for &(i, j) in &pn_need {
        let (p, n) = pn_pair[&(i, j)];
        carries.push(p);
        carries.push(n);
    }
    let (combos, carried) = emit_product_schedule(&mut b, factor_lists, m, &carries);
    pool = carried[..pool_size].to_vec();
    one = pool[0];
    let mut pn_out: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for (k, &(i, j)) in pn_need.iter().enumerate() {
        pn_out.insert((i, j), (carried[pool_size + 2 * k], carried[pool_size + 2 * k + 1]));
    }
    let (hat_combos, term_combos) = combos.split_at(scheme.nodes.len());

    // Polynomial layer: y = relu of the assembled affine-plus-products, with
    // the bank constant routed through the pool; hats are materialized as
    // units on the same layer.
    let mut specs = Vec::new();
    let mut y_unit: BTreeMap<usize, usize> = BTreeMap::new();
    for &a in &serving_anchors {
        let plan = &plans[a];
        let mut parts: Vec<LinComb> = Vec::new();
        let mut lin: LinComb = Vec::new();
        for &(i, w) in &plan.linear {
            let (p, n) = pn_out[&(i, anchor_j(a, i))];
            lin.push((p, w));
            lin.push((n, -w));
        }
        parts.push(lin);
        for (combo, &(owner, t)) in term_combos.iter().zip(&term_owner) {
            if owner != a {
                continue;
            }
            // Bank products come back as (one, +1), (d, -1); take only the
            // rectified side and fold the +1 into the pooled constant, which
            // already accounts for it.
            let w = plan.prods[t].w;
            parts.push(
                combo
                    .iter()
                    .filter(|&&(_, c)| c < 0.0)
                    .map(|&(u, c)| (u, c * w))
                    .collect(),
            );
        }
        let k = plan.const_part.abs().ceil() as usize;
        if k > 0 {
            parts.push(pool[..k].iter().map(|&u| (u, plan.const_part / k as f64)).collect());
        }
        y_unit.insert(a, specs.len());
        specs.push(UnitSpec::new(lc_merge(&parts)));
    }
    let hat_start = specs.len();
    specs.extend(hat_combos.iter().map(|c| UnitSpec::new(c.clone())));
    let tail = specs.len();
    specs.push(UnitSpec::carry(one));
    b.advance(&specs);
    let y_unit: BTreeMap<usize, usize> = y_unit.into_iter().collect();
    let mut hat_units: Vec<usize> = (hat_start..hat_start + scheme.nodes.len()).collect();
    one = tail;

    // Overshoot clip for product-assembled polynomials: downstream pairs read
    // min(y, 1) as (one) - relu(one - y).
    let needs_clip = deg >= 2 && !serving_anchors.is_empty();
    let mut clip_unit: BTreeMap<usize, usize> = BTreeMap::new();
    if needs_clip {
        let mut specs = Vec::new();
        for &a in &serving_anchors {
            clip_unit.insert(a, specs.len());
            specs.push(UnitSpec::new(vec![(one, 1.0), (y_unit[&a], -1.0)]));
        }
        let tail = specs.len();
        specs.extend(hat_units.iter().map(|&u| UnitSpec::carry(u)));
        specs.push(UnitSpec::carry(one));
        b.advance(&specs);
        hat_units = (tail..tail + scheme.nodes.len()).collect();
        one = tail + scheme.nodes.len();
    }

    // Final bank: hat times polynomial per mult node, with the hat sum
    // created on the bank's first layer and const-path hats carried through.
    let mut output_row: LinComb = Vec::new();
    if !mult_nodes.is_empty() {
        let pairs: Vec<(LinComb, LinComb)> = mult_nodes
            .iter()
            .map(|&ni| {
                let a = scheme.nodes[ni].anchor;
                let y_side: LinComb = if needs_clip {
                    vec![(one, 1.0), (clip_unit[&a], -1.0)]
                } else {
                    vec![(y_unit[&a], 1.0)]
                };
                (vec![(hat_units[ni], 1.0)], y_side)
            })
            .collect();
        let sh_spec = UnitSpec::new(mult_nodes.iter().map(|&ni| (hat_units[ni], 1.0)).collect());
        let const_hats: Vec<usize> = const_nodes.iter().map(|&ni| hat_units[ni]).collect();
        let bank = emit_mult_bank(&mut b, &pairs, &const_hats, m, &[sh_spec]);

        // Fan stage: copies realize output coefficients B, B/2, and c0 with
        // unit-bounded edges.
        let kb = b_norm.ceil() as usize;
        let ks = (b_norm / 2.0).ceil() as usize;
        let mut specs = Vec::new();
        for z in &bank.products {
            for _ in 0..kb {
                output_row.push((specs.len(), b_norm / kb as f64));
                specs.push(UnitSpec::new(z.clone()));
            }
        }
        for _ in 0..ks {
            output_row.push((specs.len(), -(b_norm / 2.0) / ks as f64));
            specs.push(UnitSpec::carry(bank.extra[0]));
        }
        for (&ni, &hat) in const_nodes.iter().zip(&bank.carried) {
            let c0 = plans[scheme.nodes[ni].anchor].c0;
            let k = c0.abs().ceil() as usize;
            for _ in 0..k {
                output_row.push((specs.len(), c0 / k as f64));
                specs.push(UnitSpec::carry(hat));
            }
        }
        b.advance(&specs);
    } else {
        let mut specs = Vec::new();
        for &ni in &const_nodes {
            let c0 = plans[scheme.nodes[ni].anchor].c0;
            let k = c0.abs().ceil() as usize;
            for _ in 0..k {
                output_row.push((specs.len(), c0 / k as f64));
                specs.push(UnitSpec::carry(hat_units[ni]));
            }
        }
        if specs.is_empty() {
            // Nothing contributes; keep a well-formed layer.
            specs.push(UnitSpec::carry(one));
        }
        b.advance(&specs);
    }

    let net = b.finish(&[output_row], WeightMode::Strict)?;
    debug_assert!(net.validate().passed, "construction broke the weight bound");

    // Error constant: at any x at most 2^d hats are active; an active mult
    // node contributes B * (final mult + hat tree + polynomial assembly)
    // errors, an active const node c0 * (hat tree) errors. Products of an
    // exactly zero hat stay exactly zero, so inactive nodes are free.
    let mut worst = 0.0f64;
    for node in &scheme.nodes {
        let plan = &plans[node.anchor];
        let bound = if plan.serving {
            b_norm * (dim as f64 + plan.budget)
        } else {
            plan.c0.abs() * (dim as f64 - 1.0)
        };
        worst = worst.max(bound);
    }
    let c_gadget = f64::powi(2.0, dim as i32) * worst * (mult_error_bound(m) / f64::powi(2.0, -(m as i32)));

    let sparsity = net.sparsity();
    let scheme_bound = scheme.approx_error_bound();
    let n = n_budget as f64;
    let d = dim as f64;
    let report = HolderReport {
        n_budget,
        m,
        m_grid: scheme.m_grid,
        dim,
        scale_r,
        b_norm,
        c_gadget,
        depth: net.depth(),
        nonzeros: sparsity.s,
        scheme_bound,
        total_bound: c_gadget * f64::powi(2.0, -(m as i32)) + scheme_bound,
        sparsity_envelope: 142.0 * (d + f.beta + 1.0).powf(3.0 + d) * n * (m as f64 + 6.0),
        depth_envelope: 9.0 + (m as f64 + 5.0) * (1.0 + d.max(f.beta).log2().ceil().max(0.0)),
    };
    Ok(HolderBuild { net, scheme, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn func(
        domain: Domain,
        beta: f64,
        k: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> HolderFunction {
        HolderFunction::new(domain, beta, k, Arc::new(f)).unwrap()
    }

    fn sample_box(domain: &Domain, per_axis: usize) -> Vec<Vec<f64>> {
        let d = domain.dim();
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            out.push(
                (0..d)
                    .map(|i| {
                        domain.lo()[i]
                            + (domain.hi()[i] - domain.lo()[i]) * idx[i] as f64
                                / (per_axis - 1) as f64
                    })
                    .collect(),
            );
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    #[test]
    fn taylor_degree_frozen_values() {
        assert_eq!(taylor_degree(1.0), 0);
        assert_eq!(taylor_degree(2.0), 1);
        assert_eq!(taylor_degree(2.5), 2);
        assert_eq!(taylor_degree(3.0), 2);
        assert_eq!(taylor_degree(0.5), 0);
    }

    #[test]
    fn multi_index_enumeration_is_complete() {
        let idx = multi_indices(2, 2);
        assert_eq!(
            idx,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![1, 0],
                vec![0, 2],
                vec![1, 1],
                vec![2, 0]
            ]
        );
        assert_eq!(multi_indices(3, 2).len(), 10);
        assert_eq!(multi_indices(1, 4).len(), 5);
    }

    #[test]
    fn finite_differences_match_analytic_derivatives() {
        let f = |x: &[f64]| 3.0 + 2.0 * x[0] + x[0] * x[1] * x[1];
        let x = [0.4, -0.3];
        let cases: Vec<(Vec<usize>, f64)> = vec![
            (vec![0, 0], f(&x)),
            (vec![1, 0], 2.0 + x[1] * x[1]),
            (vec![0, 1], 2.0 * x[0] * x[1]),
            (vec![1, 1], 2.0 * x[1]),
            (vec![0, 2], 2.0 * x[0]),
        ];
        for (alpha, expect) in cases {
            let got = fd_partial(&f, &x, &alpha, 1e-4);
            assert!((got - expect).abs() < 1e-5, "{alpha:?}: {got} vs {expect}");
        }
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let f = func(Domain::unit_box(2), 2.0, 1.0, |x| x[0] * x[1]);
        match build_local_scheme(&f, 20, None) {
            Err(Error::GridTooCoarse { n: 20, min, dim: 2 }) => assert!(min > 20),
            other => panic!("expected GridTooCoarse, got {other:?}"),
        }
        assert!(build_local_scheme(&f, 25, None).is_ok());
    }

    #[test]
    fn scheme_reproduces_polynomials_exactly() {
        // Degree <= taylor_degree means zero interpolation remainder.
        let f1 = func(Domain::unit_box(1), 3.0, 1.0, |x| 0.3 + 0.4 * x[0] - 0.2 * x[0] * x[0]);
        let s1 = build_local_scheme(&f1, 9, None).unwrap();
        for x in sample_box(&f1.domain, 41) {
            assert!((s1.eval(&x) - f1.eval(&x)).abs() < 1e-10, "{x:?}");
        }
        let f2 = func(Domain::unit_box(2), 2.0, 1.0, |x| {
            0.1 + 0.5 * x[0] - 0.3 * x[1]
        });
        let s2 = build_local_scheme(&f2, 25, None).unwrap();
        for x in sample_box(&f2.domain, 9) {
            assert!((s2.eval(&x) - f2.eval(&x)).abs() < 1e-10, "{x:?}");
        }
    }

    #[test]
    fn scheme_error_stays_within_interpolation_bound() {
        // |sin''| <= 4 for sin(2x), so the remainder constant is 2.
        let f = func(Domain::unit_box(1), 2.0, 2.0, |x| (2.0 * x[0]).sin());
        for n in [9usize, 33] {
            let s = build_local_scheme(&f, n, None).unwrap();
            let bound = s.approx_error_bound();
            let mut worst = 0.0f64;
            for x in sample_box(&f.domain, 257) {
                worst = worst.max((s.eval(&x) - f.eval(&x)).abs());
            }
            assert!(worst <= bound, "n = {n}: {worst} > {bound}");
        }
    }

    #[test]
    fn net_matches_scheme_within_gadget_bound_1d() {
        let targets: Vec<HolderFunction> = vec![
            func(Domain::unit_box(1), 2.0, 1.0, |x| x[0] * x[0]),
            func(Domain::unit_box(1), 2.0, 2.0, |x| (2.0 * x[0]).sin() + 0.3),
        ];
        for f in &targets {
            for m in [8usize, 12] {
                let built = build_holder_net(f, 16, m, None).unwrap();
                assert!(built.net.validate().passed);
                let tol = built.report.c_gadget * f64::powi(2.0, -(m as i32)) + 1e-9;
                let mut worst = 0.0f64;
                for x in sample_box(&f.domain, 201) {
                    let got = built.net.eval(&x).unwrap()[0];
                    worst = worst.max((got - built.scheme.eval(&x)).abs());
                }
                assert!(worst <= tol, "m = {m}: {worst} > {tol}");
                assert!((built.report.nonzeros as f64) <= built.report.sparsity_envelope);
            }
        }
    }

    #[test]
    fn net_matches_scheme_within_gadget_bound_2d() {
        let f = func(Domain::unit_box(2), 2.0, 2.0, |x| {
            (2.0 * x[0] + x[1]).sin() * 0.5 + 0.2
        });
        let built = build_holder_net(&f, 25, 8, None).unwrap();
        assert!(built.net.validate().passed);
        let tol = built.report.c_gadget * f64::powi(2.0, -8) + 1e-9;
        let mut worst = 0.0f64;
        for x in sample_box(&f.domain, 33) {
            let got = built.net.eval(&x).unwrap()[0];
            worst = worst.max((got - built.scheme.eval(&x)).abs());
        }
        assert!(worst <= tol, "{worst} > {tol}");
    }

    #[test]
    fn higher_degree_monomials_use_the_product_path() {
        // beta = 3 interpolates second-order data, exercising sign-split
        // factor products, the pool, and the clip.
        let f = func(Domain::unit_box(2), 3.0, 3.0, |x| {
            x[0] * x[0] * x[1] * 0.8
        })
        .with_taylor(TaylorSource::Analytic(Arc::new(|x: &[f64], a: &[usize]| {
            match (a[0], a[1]) {
                (0, 0) => 0.8 * x[0] * x[0] * x[1],
                (1, 0) => 1.6 * x[0] * x[1],
                (0, 1) => 0.8 * x[0] * x[0],
                (2, 0) => 1.6 * x[1],
                (1, 1) => 1.6 * x[0],
                (0, 2) => 0.0,
                _ => 0.0,
            }
        })));
        let built = build_holder_net(&f, 64, 8, None).unwrap();
        assert!(built.net.validate().passed);
        let tol = built.report.c_gadget * f64::powi(2.0, -8) + 1e-9;
        let mut worst = 0.0f64;
        for x in sample_box(&f.domain, 25) {
            let got = built.net.eval(&x).unwrap()[0];
            worst = worst.max((got - built.scheme.eval(&x)).abs());
        }
        assert!(worst <= tol, "{worst} > {tol}");
    }

    #[test]
    fn zero_function_yields_exactly_zero_network() {
        let f = func(Domain::unit_box(2), 2.0, 1.0, |_| 0.0);
        let built = build_holder_net(&f, 25, 6, None).unwrap();
        for x in sample_box(&f.domain, 9) {
            assert_eq!(built.net.eval(&x).unwrap()[0], 0.0, "{x:?}");
        }
        assert_eq!(built.net.eval(&[7.0, -3.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn constant_one_is_exact_without_multiplications_1d() {
        // beta = 1 interpolates degree-0 data: every node takes the constant
        // path and the hats form an exact partition of unity.
        let f = func(Domain::unit_box(1), 1.0, 1.0, |_| 1.0);
        let built = build_holder_net(&f, 8, 6, None).unwrap();
        for x in sample_box(&f.domain, 101) {
            let got = built.net.eval(&x).unwrap()[0];
            assert!((got - 1.0).abs() < 1e-12, "{x:?} -> {got}");
        }
    }

    #[test]
    fn predicate_domain_snaps_anchors_and_prunes() {
        let tri = Domain::unit_box(2).with_member(Arc::new(|x: &[f64]| x[0] + x[1] <= 1.0));
        let f = func(tri, 2.0, 2.0, |x| x[0] + 0.5 * x[1]);
        let scheme = build_local_scheme(&f, 25, None).unwrap();
        // Every anchor satisfies the predicate even though some nodes do not.
        for poly in &scheme.anchors {
            assert!(poly.anchor[0] + poly.anchor[1] <= 1.0 + 1e-12, "{:?}", poly.anchor);
        }

        // Pruning by support samples keeps the scheme and net consistent.
        let samples: Vec<Vec<f64>> = sample_box(&Domain::unit_box(2), 21)
            .into_iter()
            .filter(|x| x[0] + x[1] <= 1.0)
            .collect();
        let built = build_holder_net(&f, 25, 8, Some(&samples)).unwrap();
        assert!(built.scheme.nodes.len() < 24);
        let tol = built.report.c_gadget * f64::powi(2.0, -8) + 1e-9;
        for x in &samples {
            let got = built.net.eval(x).unwrap()[0];
            assert!((got - built.scheme.eval(x)).abs() <= tol, "{x:?}");
        }
    }
}
