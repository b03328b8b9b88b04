//! Approximate-multiplication gadgets with strict weights.
//!
//! The core circuit computes `x * y` on `[0, 1]^2` to accuracy `2^-m` from
//! the identity `x y = u^2 - w^2`, `u = (x + y) / 2`, `w = |x - y| / 2`. Each
//! square is the piecewise-linear interpolation of `t^2` at step `2^-n`,
//! accumulated by a rectified recurrence whose coefficients all lie in
//! `[-1, 1]`:
//!
//! ```text
//! acc_1 = relu(t)    f1_1 = relu(t)          f2_1 = relu(t - 1/2)
//! acc_{k+1} = relu(acc_k - f1_k / 2 + f2_k)
//! f1_{k+1}  = relu(f1_k / 2 - f2_k)          f2_{k+1} = relu(f1_k / 2 - f2_k - 2^{-1-2k})
//! ```
//!
//! `f1_k / 2 - f2_k` is the k-fold tent map of `t` scaled by `4^-k`, so
//! `acc_{n+1}` interpolates `t^2` with error at most `2^{-2n-2}`, and the
//! difference of the two chains lands within `2^{-2n-1}` of `x y`.
//!
//! Three properties beyond the error bound are load-bearing downstream and
//! covered by tests: the output is exactly zero whenever either input is
//! zero (both chains then receive bit-identical inputs and cancel), the
//! output always lies in `[0, 1]` whatever the inputs, and products of
//! products keep both properties because intermediate results are consumed
//! as linear pairs rather than re-materialized.

use crate::calculus::{parallelize, remap_input};
use crate::error::{Error, Result};
use crate::net::{NetBuilder, Network, UnitSpec, WeightMode};
use std::collections::BTreeMap;

/// Linear combination of frontier units; the common currency between gadget
/// emitters. A gadget output is handed around as a combination rather than a
/// unit so consumers can fold it into their own in-edges.
pub(crate) type LinComb = Vec<(usize, f64)>;

pub(crate) fn lc_scale(lc: &LinComb, s: f64) -> LinComb {
    lc.iter().map(|&(u, w)| (u, w * s)).collect()
}

/// Sum combinations, merging duplicate units and dropping exact zeros.
pub(crate) fn lc_merge(parts: &[LinComb]) -> LinComb {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for part in parts {
        for &(u, w) in part {
            *acc.entry(u).or_insert(0.0) += w;
        }
    }
    acc.into_iter().filter(|&(_, w)| w != 0.0).collect()
}

/// Number of recurrence steps needed for accuracy `2^-m`.
fn transitions(m: usize) -> usize {
    (m / 2).max(1)
}

/// Hidden layers one multiplication bank occupies.
#[cfg(test)]
fn mult_bank_depth(m: usize) -> usize {
    transitions(m) + 4
}

/// The guarantee actually delivered for accuracy parameter `m`: `2^{-2n-1}`
/// with `n` recurrence steps, which is at most `2^-m`.
pub fn mult_error_bound(m: usize) -> f64 {
    f64::powi(2.0, -(2 * transitions(m) as i32 + 1))
}

/// Frontier indices produced by [`emit_mult_bank`].
pub(crate) struct MultBankResult {
    /// One combination per input pair, valued in `[0, 1]`.
    pub products: Vec<LinComb>,
    /// Final indices of the `carries` argument, in order.
    pub carried: Vec<usize>,
    /// Final indices of the `extra_first` units, in order.
    pub extra: Vec<usize>,
}

/// Emit the multiplication circuit for several input pairs side by side,
/// sharing one constant unit. `carries` are frontier units to keep alive
/// (their values must be nonnegative, as must every combination's value).
/// `extra_first` units are created on the bank's first layer, reading the
/// pre-bank frontier, and are then carried along like `carries`.
pub(crate) fn emit_mult_bank(
    b: &mut NetBuilder,
    pairs: &[(LinComb, LinComb)],
    carries: &[usize],
    m: usize,
    extra_first: &[UnitSpec],
) -> MultBankResult {
    assert!(!pairs.is_empty(), "multiplication bank needs at least one pair");
    let n = transitions(m);
    let p = pairs.len();

    // First layer: u = (x + y) / 2 plus the split |x - y| / 2 = a + bb.
    let mut specs = Vec::with_capacity(3 * p + extra_first.len() + carries.len());
    for (x, y) in pairs {
        specs.push(UnitSpec::new(lc_merge(&[lc_scale(x, 0.5), lc_scale(y, 0.5)])));
        specs.push(UnitSpec::new(lc_merge(&[lc_scale(x, 0.5), lc_scale(y, -0.5)])));
        specs.push(UnitSpec::new(lc_merge(&[lc_scale(y, 0.5), lc_scale(x, -0.5)])));
    }
    specs.extend_from_slice(extra_first);
    specs.extend(carries.iter().map(|&u| UnitSpec::carry(u)));
    b.advance(&specs);
    let n_tail = extra_first.len() + carries.len();
    let tail_start = 3 * p;

    // Chain start: (acc, f1, f2) per chain, two chains per pair. The u chain
    // reads the sum unit, the w chain the two halves of the absolute value.
    let mut specs = Vec::with_capacity(6 * p + n_tail);
    for i in 0..p {
        for chain_in in [vec![(3 * i, 1.0)], vec![(3 * i + 1, 1.0), (3 * i + 2, 1.0)]] {
            specs.push(UnitSpec::new(chain_in.clone()));
            specs.push(UnitSpec::new(chain_in.clone()));
            specs.push(UnitSpec::with_shift(chain_in, 0.5));
        }
    }
    specs.extend((0..n_tail).map(|t| UnitSpec::carry(tail_start + t)));
    b.advance(&specs);
    let tail_start = 6 * p;

    for k in 1..=n {
        let step = f64::powi(2.0, -(1 + 2 * k as i32));
        let mut specs = Vec::with_capacity(6 * p + n_tail);
        for i in 0..p {
            for chain in 0..2 {
                let (acc, f1, f2) = (6 * i + 3 * chain, 6 * i + 3 * chain + 1, 6 * i + 3 * chain + 2);
                specs.push(UnitSpec::new(vec![(acc, 1.0), (f1, -0.5), (f2, 1.0)]));
                specs.push(UnitSpec::new(vec![(f1, 0.5), (f2, -1.0)]));
                specs.push(UnitSpec::with_shift(vec![(f1, 0.5), (f2, -1.0)], step));
            }
        }
        specs.extend((0..n_tail).map(|t| UnitSpec::carry(tail_start + t)));
        b.advance(&specs);
    }

    // Difference of the chains: c = relu(acc_u - acc_w) = x y up to 2^{-2n-1}.
    let mut specs = Vec::with_capacity(p + n_tail);
    for i in 0..p {
        specs.push(UnitSpec::new(vec![(6 * i, 1.0), (6 * i + 3, -1.0)]));
    }
    specs.extend((0..n_tail).map(|t| UnitSpec::carry(6 * p + t)));
    b.advance(&specs);

    // Clip stage: d = relu(1 - c), product = 1 - d = min(c, 1), keeping the
    // output in [0, 1] for arbitrary real inputs.
    let mut specs = Vec::with_capacity(p + 1 + n_tail);
    for i in 0..p {
        specs.push(UnitSpec::with_shift(vec![(i, -1.0)], -1.0));
    }
    specs.push(UnitSpec::one());
    specs.extend((0..n_tail).map(|t| UnitSpec::carry(p + t)));
    b.advance(&specs);

    let one = p;
    let products = (0..p).map(|i| vec![(i, -1.0), (one, 1.0)]).collect();
    let extra = (0..extra_first.len()).map(|t| p + 1 + t).collect();
    let carried = (0..carries.len()).map(|t| p + 1 + extra_first.len() + t).collect();
    MultBankResult { products, carried, extra }
}

/// Reduce several factor lists to their products with shared multiplication
/// banks: every round pairs adjacent factors within each list, deduplicates
/// identical pairs across lists, and runs one bank. Factor values must lie in
/// `[0, 1]`; each product picks up at most `(len - 1) * 2^-m` of error.
/// Returns one combination per list plus the survivors of `carries`.
pub(crate) fn emit_product_schedule(
    b: &mut NetBuilder,
    factor_lists: Vec<Vec<LinComb>>,
    m: usize,
    carries: &[usize],
) -> (Vec<LinComb>, Vec<usize>) {
    assert!(
        factor_lists.iter().all(|l| !l.is_empty()),
        "every product needs at least one factor"
    );
    let mut lists = factor_lists;
    let mut carries: Vec<usize> = carries.to_vec();

    // Per list: sequence of either a bank slot or a leftover factor.
    enum Item {
        Slot(usize),
        Leftover,
    }

    while lists.iter().any(|l| l.len() > 1) {
        // Greedy adjacent pairing; identical pairs across lists share a slot.
        let mut pair_slots: BTreeMap<Vec<(usize, u64)>, usize> = BTreeMap::new();
        let mut pairs: Vec<(LinComb, LinComb)> = Vec::new();
        let mut plans: Vec<Vec<Item>> = Vec::new();
        let mut leftovers: Vec<LinComb> = Vec::new();
        for list in &lists {
            let mut plan = Vec::new();
            let mut chunks = list.chunks_exact(2);
            for pair in &mut chunks {
                let key: Vec<(usize, u64)> = pair
                    .iter()
                    .flat_map(|lc| lc.iter().map(|&(u, w)| (u, w.to_bits())))
                    .collect();
                let slot = *pair_slots.entry(key).or_insert_with(|| {
                    pairs.push((pair[0].clone(), pair[1].clone()));
                    pairs.len() - 1
                });
                plan.push(Item::Slot(slot));
            }
            if let [odd] = chunks.remainder() {
                plan.push(Item::Leftover);
                leftovers.push(odd.clone());
            }
            plans.push(plan);
        }

        // Leftover factors ride through the bank: plain units as carries,
        // multi-term combinations materialized on the bank's first layer.
        let mut leftover_specs = Vec::new();
        let mut leftover_route = Vec::new();
        for lc in &leftovers {
            if let [(unit, w)] = lc[..] {
                if w == 1.0 {
                    leftover_route.push((false, carries.len()));
                    carries.push(unit);
                    continue;
                }
            }
            leftover_route.push((true, leftover_specs.len()));
            leftover_specs.push(UnitSpec::new(lc.clone()));
        }

        let result = emit_mult_bank(b, &pairs, &carries, m, &leftover_specs);

        // Rebuild factor lists for the next round.
        let mut next_lists = Vec::with_capacity(lists.len());
        let mut leftover_iter = leftover_route.iter();
        for plan in plans {
            let mut list = Vec::new();
            for item in plan {
                match item {
                    Item::Slot(s) => list.push(result.products[s].clone()),
                    Item::Leftover => {
                        let &(materialized, idx) = leftover_iter.next().unwrap();
                        let unit = if materialized {
                            result.extra[idx]
                        } else {
                            result.carried[idx]
                        };
                        list.push(vec![(unit, 1.0)]);
                    }
                }
            }
            next_lists.push(list);
        }
        // Units appended to `carries` for leftovers are not the caller's.
        let n_caller = carries.len() - leftover_route.iter().filter(|&&(mat, _)| !mat).count();
        carries = result.carried[..n_caller].to_vec();
        lists = next_lists;
    }

    (lists.into_iter().map(|mut l| l.pop().unwrap()).collect(), carries)
}

/// Approximate product of two inputs on `[0, 1]^2` to accuracy
/// [`mult_error_bound`]`(m)`. The output is exactly zero when either input
/// is zero and always lies in `[0, 1]`.
pub fn build_mult(m: usize) -> Result<Network> {
    if m == 0 {
        return Err(Error::InvalidArgument("accuracy parameter m must be positive".into()));
    }
    let mut b = NetBuilder::new(2);
    let result = emit_mult_bank(
        &mut b,
        &[(vec![(0, 1.0)], vec![(1, 1.0)])],
        &[],
        m,
        &[],
    );
    b.finish(&[result.products[0].clone()], WeightMode::Strict)
}

/// Pair multiplier for gated sums: on input `(u, v, t)` the outputs
/// approximate `(u t, v t)`. Both outputs are exactly zero when `t = 0`, and
/// an output is exactly zero when its own first factor is, so a rectified
/// sign pair `(u, v) = (relu(c), relu(-c))` activates only one of the two
/// product circuits.
pub fn build_mult_star(m: usize) -> Result<Network> {
    let mult = build_mult(m)?;
    let first = remap_input(&mult, 3, &[0, 2])?;
    let second = remap_input(&mult, 3, &[1, 2])?;
    parallelize(&[&first, &second])
}

/// Approximate product of `d` inputs on `[0, 1]^d` via a balanced tree of
/// pair multiplications; the error is at most `(d - 1) *`
/// [`mult_error_bound`]`(m)`.
pub fn build_product_tree(d: usize, m: usize) -> Result<Network> {
    if d == 0 {
        return Err(Error::InvalidArgument("product needs at least one input".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("accuracy parameter m must be positive".into()));
    }
    let mut b = NetBuilder::new(d);
    let factors: Vec<LinComb> = (0..d).map(|i| vec![(i, 1.0)]).collect();
    let (mut products, _) = emit_product_schedule(&mut b, vec![factors], m, &[]);
    b.finish(&[products.pop().unwrap()], WeightMode::Strict)
}

/// Multiply a nonnegative input by an arbitrary fixed scalar using strict
/// weights: `ceil(|w|)` rectified copies, each feeding the output with
/// coefficient `w / ceil(|w|)`.
pub fn build_scale(w: f64) -> Result<Network> {
    if !w.is_finite() {
        return Err(Error::InvalidArgument("scale factor must be finite".into()));
    }
    let k = (w.abs().ceil() as usize).max(1);
    let mut b = NetBuilder::new(1);
    let units = b.advance(&vec![UnitSpec::carry(0); k]);
    let row = units.into_iter().map(|u| (u, w / k as f64)).collect();
    b.finish(&[row], WeightMode::Strict)
}

/// Weighted sum of nonnegative inputs with arbitrary finite coefficients:
/// each input is fanned into `ceil(|w|)` rectified copies so every wire
/// stays within the unit bound. Inputs with zero weight are ignored.
pub fn build_weighted_sum(weights: &[f64]) -> Result<Network> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(
            "weighted sum needs a nonempty list of finite coefficients".into(),
        ));
    }
    let mut b = NetBuilder::new(weights.len());
    let mut specs = Vec::new();
    let mut row: LinComb = Vec::new();
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let k = w.abs().ceil() as usize;
        for _ in 0..k {
            row.push((specs.len(), w / k as f64));
            specs.push(UnitSpec::carry(i));
        }
    }
    if specs.is_empty() {
        specs.push(UnitSpec::carry(0));
    }
    b.advance(&specs);
    b.finish(&[row], WeightMode::Strict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    #[test]
    fn weighted_sum_fans_large_coefficients() {
        let net = build_weighted_sum(&[2.5, -1.2, 0.0]).unwrap();
        assert!(net.validate().passed);
        let got = net.eval(&[1.0, 2.0, 3.0]).unwrap()[0];
        assert!((got - 0.1).abs() < 1e-12, "{got}");
        assert_eq!(net.eval(&[0.0, 0.0, 9.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn mult_validates_strict_and_matches_product() {
        for m in [4, 8, 12] {
            let net = build_mult(m).unwrap();
            assert!(net.validate().passed, "m = {m}");
            let bound = mult_error_bound(m);
            let mut worst = 0.0f64;
            for &x in &grid(32, 0.0, 1.0) {
                for &y in &grid(32, 0.0, 1.0) {
                    let got = net.eval(&[x, y]).unwrap()[0];
                    worst = worst.max((got - x * y).abs());
                }
            }
            assert!(worst <= bound, "m = {m}: worst error {worst} > {bound}");
        }
    }

    #[test]
    fn mult_vanishes_exactly_on_zero_inputs() {
        for m in [4, 8] {
            let net = build_mult(m).unwrap();
            for &t in &[0.0, 1.0 / 3.0, 0.2137, 0.7, 1.0] {
                assert_eq!(net.eval(&[0.0, t]).unwrap()[0], 0.0, "m = {m}, t = {t}");
                assert_eq!(net.eval(&[t, 0.0]).unwrap()[0], 0.0, "m = {m}, t = {t}");
            }
        }
    }

    #[test]
    fn mult_is_exact_on_coarse_dyadics() {
        // Dyadic inputs hit interpolation knots, and every intermediate is a
        // small dyadic, so the result is the exact product.
        for m in [4, 8, 12] {
            let net = build_mult(m).unwrap();
            assert_eq!(net.eval(&[0.5, 0.5]).unwrap()[0], 0.25);
            assert_eq!(net.eval(&[0.25, 0.75]).unwrap()[0], 0.1875);
            assert_eq!(net.eval(&[1.0, 1.0]).unwrap()[0], 1.0);
            assert_eq!(net.eval(&[1.0, 0.5]).unwrap()[0], 0.5);
        }
    }

    #[test]
    fn mult_output_stays_in_unit_interval_off_domain() {
        let net = build_mult(6).unwrap();
        for &x in &grid(12, -0.5, 1.5) {
            for &y in &grid(12, -0.5, 1.5) {
                let got = net.eval(&[x, y]).unwrap()[0];
                assert!((0.0..=1.0).contains(&got), "({x}, {y}) -> {got}");
            }
        }
    }

    #[test]
    fn mult_bound_and_shape_are_frozen() {
        assert_eq!(mult_error_bound(1), 0.125);
        assert_eq!(mult_error_bound(4), f64::powi(2.0, -5));
        assert_eq!(mult_error_bound(8), f64::powi(2.0, -9));
        assert_eq!(mult_error_bound(12), f64::powi(2.0, -13));
        let net = build_mult(8).unwrap();
        assert_eq!(net.depth(), mult_bank_depth(8));
        assert_eq!(net.widths(), &[2, 3, 6, 6, 6, 6, 6, 1, 2, 1]);
    }

    #[test]
    fn mult_star_keeps_single_factor_active() {
        let net = build_mult_star(8).unwrap();
        assert!(net.validate().passed);
        let bound = mult_error_bound(8);
        for &(u, v, t) in &[(0.8, 0.0, 0.6), (0.0, 0.3, 0.9), (0.5, 0.0, 1.0 / 3.0)] {
            let out = net.eval(&[u, v, t]).unwrap();
            if u == 0.0 {
                assert_eq!(out[0], 0.0);
            } else {
                assert!((out[0] - u * t).abs() <= bound);
                assert_eq!(out[1], 0.0);
            }
            if v == 0.0 {
                assert_eq!(out[1], 0.0);
            } else {
                assert!((out[1] - v * t).abs() <= bound);
            }
        }
        // Gate closed: both outputs vanish exactly whatever the pair holds.
        for &(u, v) in &[(0.9, 0.0), (0.0, 0.4), (1.0, 1.0)] {
            assert_eq!(net.eval(&[u, v, 0.0]).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn product_tree_error_within_linear_budget() {
        for d in [1usize, 2, 3, 4] {
            let net = build_product_tree(d, 8).unwrap();
            assert!(net.validate().passed, "d = {d}");
            let budget = (d.saturating_sub(1)) as f64 * mult_error_bound(8);
            let points: Vec<Vec<f64>> = vec![
                vec![0.9; d],
                vec![0.31; d],
                (0..d).map(|i| 0.2 + 0.75 * i as f64 / d.max(1) as f64).collect(),
                vec![1.0; d],
            ];
            for x in points {
                let expect: f64 = x.iter().product();
                let got = net.eval(&x).unwrap()[0];
                assert!(
                    (got - expect).abs() <= budget,
                    "d = {d}, x = {x:?}: {got} vs {expect}"
                );
                assert!((0.0..=1.0).contains(&got));
            }
        }
    }

    #[test]
    fn product_tree_vanishes_exactly_with_any_zero_factor() {
        let net = build_product_tree(3, 8).unwrap();
        assert_eq!(net.eval(&[0.7, 0.0, 0.9]).unwrap()[0], 0.0);
        assert_eq!(net.eval(&[0.0, 0.5, 0.5]).unwrap()[0], 0.0);
        assert_eq!(net.eval(&[0.4, 0.8, 0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn scale_gadget_multiplies_nonnegative_inputs() {
        for &w in &[0.3, 1.0, 2.7, -3.2, 17.0, 0.0] {
            let net = build_scale(w).unwrap();
            assert!(net.validate().passed, "w = {w}");
            for &x in &grid(7, 0.0, 2.0) {
                let got = net.eval(&[x]).unwrap()[0];
                assert!((got - w * x).abs() <= 1e-14 * (1.0 + (w * x).abs()), "w = {w}, x = {x}");
            }
        }
    }
}
