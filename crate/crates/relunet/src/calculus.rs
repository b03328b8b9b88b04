//! Combination rules for wiring networks together.
//!
//! Every rule here is exact arithmetic on the sparse representation: no
//! retraining, no approximation beyond what is stated per rule. The rules are
//! the workhorses behind the product gadgets and the interpolation nets, so
//! each one documents its effect on depth, widths, and nonzero count.
//!
//! Conventions shared by all rules:
//!
//! * "valid on nonnegative inputs" marks rules that insert bottom identity
//!   layers, since `relu(x) = x` only holds for `x >= 0`;
//! * the result is [`WeightMode::Strict`] only when every operand is strict;
//!   magnitude violations introduced by a rule are caught by
//!   [`Network::validate`], never silently clamped.

use crate::error::{Error, Result};
use crate::net::{Architecture, Network, SparseMat, SparseVec, WeightMode};
use std::collections::BTreeMap;

fn join_mode(a: WeightMode, b: WeightMode) -> WeightMode {
    if a == WeightMode::Strict && b == WeightMode::Strict {
        WeightMode::Strict
    } else {
        WeightMode::Relaxed
    }
}

fn identity_mat(n: usize) -> SparseMat {
    SparseMat::new(n, n, (0..n as u32).map(|i| (i, i, 1.0)).collect()).unwrap()
}

/// Compose `outer` after `inner` with a rectified junction:
/// `x -> outer(relu(inner(x) - junction))`.
///
/// The inner output layer becomes a hidden layer, so the result has depth
/// `L_inner + L_outer + 1`. With `junction = 0` and a nonnegative inner
/// output this is plain composition `outer(inner(x))`.
pub fn compose(outer: &Network, inner: &Network, junction: SparseVec) -> Result<Network> {
    if outer.input_dim() != inner.output_dim() {
        return Err(Error::Incompatible(format!(
            "compose: outer expects {} inputs, inner produces {}",
            outer.input_dim(),
            inner.output_dim()
        )));
    }
    if junction.len != inner.output_dim() {
        return Err(Error::Incompatible(format!(
            "compose: junction shift has length {}, expected {}",
            junction.len,
            inner.output_dim()
        )));
    }
    let depth = inner.depth() + outer.depth() + 1;
    let mut widths = inner.widths().to_vec();
    widths.extend_from_slice(&outer.widths()[1..]);
    let arch = Architecture::new(depth, widths)?;

    let mut weights: Vec<SparseMat> = inner.weights().to_vec();
    weights.extend_from_slice(outer.weights());
    let mut shifts: Vec<SparseVec> = inner.shifts().to_vec();
    shifts.push(junction);
    shifts.extend_from_slice(outer.shifts());

    Network::new(arch, weights, shifts, join_mode(outer.mode(), inner.mode()))
}

/// Stack networks of equal depth over a shared input: the result computes all
/// operand outputs side by side. First-layer matrices stack vertically over
/// the common input; deeper layers are block diagonal. Widths add except at
/// the input.
pub fn parallelize(nets: &[&Network]) -> Result<Network> {
    let first = *nets.first().ok_or_else(|| {
        Error::InvalidArgument("parallelize: need at least one network".into())
    })?;
    let depth = first.depth();
    let input_dim = first.input_dim();
    for n in nets {
        if n.depth() != depth {
            return Err(Error::Incompatible(format!(
                "parallelize: depth mismatch ({} vs {})",
                n.depth(),
                depth
            )));
        }
        if n.input_dim() != input_dim {
            return Err(Error::Incompatible(format!(
                "parallelize: input dimension mismatch ({} vs {})",
                n.input_dim(),
                input_dim
            )));
        }
    }

    let mut widths = vec![input_dim];
    for l in 1..=depth + 1 {
        widths.push(nets.iter().map(|n| n.widths()[l]).sum());
    }
    let arch = Architecture::new(depth, widths.clone())?;

    let mut weights = Vec::with_capacity(depth + 1);
    for l in 0..=depth {
        let mut entries = Vec::new();
        let mut row_off = 0u32;
        let mut col_off = 0u32;
        for n in nets {
            for &(r, c, v) in &n.weight(l).entries {
                let c_new = if l == 0 { c } else { c + col_off };
                entries.push((r + row_off, c_new, v));
            }
            row_off += n.widths()[l + 1] as u32;
            col_off += n.widths()[l] as u32;
        }
        weights.push(SparseMat::new(widths[l + 1], widths[l], entries)?);
    }
    let mut shifts = Vec::with_capacity(depth);
    for l in 1..=depth {
        let mut entries = Vec::new();
        let mut off = 0u32;
        for n in nets {
            for &(i, v) in &n.shift(l).entries {
                entries.push((i + off, v));
            }
            off += n.widths()[l] as u32;
        }
        shifts.push(SparseVec::new(widths[l], entries)?);
    }

    let mode = nets
        .iter()
        .map(|n| n.mode())
        .fold(WeightMode::Strict, join_mode);
    Network::new(arch, weights, shifts, mode)
}

/// Realize a network inside a larger architecture of the same depth. Original
/// units keep their indices; added inputs are ignored, added hidden units are
/// disconnected, added outputs are constant zero. The nonzero count is
/// unchanged, so the result fits any parameter budget the original fits.
pub fn embed(net: &Network, widths: &[usize]) -> Result<Network> {
    if widths.len() != net.widths().len() {
        return Err(Error::Incompatible(format!(
            "embed: target has {} layers, expected {}",
            widths.len(),
            net.widths().len()
        )));
    }
    for (l, (&old, &new)) in net.widths().iter().zip(widths).enumerate() {
        if new < old {
            return Err(Error::Incompatible(format!(
                "embed: target width {new} at layer {l} is below current width {old}"
            )));
        }
    }
    let arch = Architecture::new(net.depth(), widths.to_vec())?;
    let weights = net
        .weights()
        .iter()
        .enumerate()
        .map(|(l, w)| SparseMat::new(widths[l + 1], widths[l], w.entries.clone()))
        .collect::<Result<Vec<_>>>()?;
    let shifts = net
        .shifts()
        .iter()
        .enumerate()
        .map(|(i, s)| SparseVec::new(widths[i + 1], s.entries.clone()))
        .collect::<Result<Vec<_>>>()?;
    Network::new(arch, weights, shifts, net.mode())
}

/// Insert `extra` identity layers just after the input. Valid on nonnegative
/// inputs only. Adds `extra * input_dim` nonzero weights.
pub fn pad_depth(net: &Network, extra: usize) -> Result<Network> {
    if extra == 0 {
        return Ok(net.clone());
    }
    let p0 = net.input_dim();
    let mut widths = vec![p0; extra + 1];
    widths.extend_from_slice(&net.widths()[1..]);
    let arch = Architecture::new(net.depth() + extra, widths)?;

    let mut weights = vec![identity_mat(p0); extra];
    weights.extend_from_slice(net.weights());
    let mut shifts = vec![SparseVec::empty(p0); extra];
    shifts.extend_from_slice(net.shifts());
    Network::new(arch, weights, shifts, net.mode())
}

/// Insert `extra` layers just before the output without changing the computed
/// function on any input. The output is split into rectified positive and
/// negative parts, carried through identity layers, and recombined, so unlike
/// [`pad_depth`] this is exact for outputs of either sign. Adds
/// `nnz(W_last) + 2 * output_dim * extra` nonzeros.
pub fn pad_depth_output(net: &Network, extra: usize) -> Result<Network> {
    if extra == 0 {
        return Ok(net.clone());
    }
    let q = net.output_dim();
    let last = net.depth();
    let mut widths = net.widths()[..=last].to_vec();
    widths.extend(std::iter::repeat(2 * q).take(extra));
    widths.push(q);
    let arch = Architecture::new(net.depth() + extra, widths)?;

    let mut weights = net.weights()[..last].to_vec();
    // Split layer: rows 2i and 2i+1 carry the positive and negative parts of
    // output i.
    let w_last = net.weight(last);
    let mut split = Vec::with_capacity(2 * w_last.entries.len());
    for &(r, c, v) in &w_last.entries {
        split.push((2 * r, c, v));
        split.push((2 * r + 1, c, -v));
    }
    weights.push(SparseMat::new(2 * q, w_last.cols, split)?);
    for _ in 1..extra {
        weights.push(identity_mat(2 * q));
    }
    let recombine = SparseMat::new(
        q,
        2 * q,
        (0..q as u32)
            .flat_map(|i| [(i, 2 * i, 1.0), (i, 2 * i + 1, -1.0)])
            .collect(),
    )?;
    weights.push(recombine);

    let mut shifts = net.shifts().to_vec();
    shifts.extend(std::iter::repeat(SparseVec::empty(2 * q)).take(extra));
    Network::new(arch, weights, shifts, net.mode())
}

/// Append one rectified layer so the outputs become interleaved sign parts:
/// output `2i` is `relu(y_i)` and output `2i+1` is `relu(-y_i)`. Depth grows
/// by one; the output dimension doubles.
pub fn sign_split(net: &Network) -> Result<Network> {
    let q = net.output_dim();
    let last = net.depth();
    let mut widths = net.widths()[..=last].to_vec();
    widths.push(2 * q);
    widths.push(2 * q);
    let arch = Architecture::new(net.depth() + 1, widths)?;

    let mut weights = net.weights()[..last].to_vec();
    let w_last = net.weight(last);
    let mut split = Vec::with_capacity(2 * w_last.entries.len());
    for &(r, c, v) in &w_last.entries {
        split.push((2 * r, c, v));
        split.push((2 * r + 1, c, -v));
    }
    weights.push(SparseMat::new(2 * q, w_last.cols, split)?);
    weights.push(identity_mat(2 * q));

    let mut shifts = net.shifts().to_vec();
    shifts.push(SparseVec::empty(2 * q));
    Network::new(arch, weights, shifts, net.mode())
}

/// Duplicate every output with its negation: output `2i` is `y_i`, output
/// `2i+1` is `-y_i`. Both copies come from the same linear row, so after any
/// downstream rectification exactly one of the pair is nonzero. Depth is
/// unchanged.
pub fn make_signed_pair(net: &Network) -> Result<Network> {
    let q = net.output_dim();
    let last = net.depth();
    let mut widths = net.widths().to_vec();
    widths[last + 1] = 2 * q;
    let arch = Architecture::new(net.depth(), widths)?;

    let mut weights = net.weights()[..last].to_vec();
    let w_last = net.weight(last);
    let mut split = Vec::with_capacity(2 * w_last.entries.len());
    for &(r, c, v) in &w_last.entries {
        split.push((2 * r, c, v));
        split.push((2 * r + 1, c, -v));
    }
    weights.push(SparseMat::new(2 * q, w_last.cols, split)?);
    Network::new(arch, weights, net.shifts().to_vec(), net.mode())
}

/// Re-route the inputs: new first-layer column `map[c]` receives what column
/// `c` used to read, inside a new input of dimension `new_input_dim`. Columns
/// mapped to the same target are merged by summing coefficients, which
/// restricts the function to the corresponding diagonal.
pub fn remap_input(net: &Network, new_input_dim: usize, map: &[usize]) -> Result<Network> {
    if map.len() != net.input_dim() {
        return Err(Error::Incompatible(format!(
            "remap_input: map has length {}, expected {}",
            map.len(),
            net.input_dim()
        )));
    }
    if let Some(&bad) = map.iter().find(|&&m| m >= new_input_dim) {
        return Err(Error::InvalidArgument(format!(
            "remap_input: target column {bad} out of range for input dimension {new_input_dim}"
        )));
    }
    let mut widths = net.widths().to_vec();
    widths[0] = new_input_dim;
    let arch = Architecture::new(net.depth(), widths.clone())?;

    let mut merged: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for &(r, c, v) in &net.weight(0).entries {
        *merged.entry((r, map[c as usize] as u32)).or_insert(0.0) += v;
    }
    let entries = merged.into_iter().map(|((r, c), v)| (r, c, v)).collect();
    let mut weights = vec![SparseMat::new(widths[1], new_input_dim, entries)?];
    weights.extend_from_slice(&net.weights()[1..]);
    Network::new(arch, weights, net.shifts().to_vec(), net.mode())
}

/// Precompose with an affine map: the result computes `net(A x + b)`. `a`
/// is given dense, row `i` holding the coefficients of old input `i` over the
/// new input. The constant `b` is absorbed into the first shift layer, so a
/// depth-zero network requires `W_0 b = 0`. Magnitudes of the folded entries
/// may grow; callers re-validate.
pub fn precompose_affine(net: &Network, a: &[Vec<f64>], b: &[f64]) -> Result<Network> {
    let d_old = net.input_dim();
    if a.len() != d_old || b.len() != d_old {
        return Err(Error::Incompatible(format!(
            "precompose_affine: map has {} rows and offset length {}, expected {}",
            a.len(),
            b.len(),
            d_old
        )));
    }
    let d_new = a.first().map_or(0, |row| row.len());
    if d_new == 0 || a.iter().any(|row| row.len() != d_new) {
        return Err(Error::InvalidArgument(
            "precompose_affine: map rows must be nonempty and of equal length".into(),
        ));
    }

    let w0 = net.weight(0);
    let mut folded: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut w0b = vec![0.0; w0.rows];
    for &(r, c, v) in &w0.entries {
        for (j, &ajc) in a[c as usize].iter().enumerate() {
            if ajc != 0.0 {
                *folded.entry((r, j as u32)).or_insert(0.0) += v * ajc;
            }
        }
        w0b[r as usize] += v * b[c as usize];
    }

    let mut widths = net.widths().to_vec();
    widths[0] = d_new;
    let arch = Architecture::new(net.depth(), widths.clone())?;
    let entries = folded.into_iter().map(|((r, c), v)| (r, c, v)).collect();
    let mut weights = vec![SparseMat::new(widths[1], d_new, entries)?];
    weights.extend_from_slice(&net.weights()[1..]);

    if net.depth() == 0 {
        if w0b.iter().any(|&v| v != 0.0) {
            return Err(Error::Incompatible(
                "precompose_affine: depth-zero network has no shift layer to absorb the offset"
                    .into(),
            ));
        }
        return Network::new(arch, weights, Vec::new(), net.mode());
    }

    let mut v1 = vec![0.0; widths[1]];
    for &(i, v) in &net.shift(1).entries {
        v1[i as usize] = v;
    }
    for (i, &wb) in w0b.iter().enumerate() {
        v1[i] -= wb;
    }
    let v1_entries = v1
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v != 0.0)
        .map(|(i, &v)| (i as u32, v))
        .collect();
    let mut shifts = vec![SparseVec::new(widths[1], v1_entries)?];
    shifts.extend_from_slice(&net.shifts()[1..]);
    Network::new(arch, weights, shifts, net.mode())
}

/// Multiply the output layer by a scalar. Magnitudes may grow; callers
/// re-validate.
pub fn scale_output(net: &Network, factor: f64) -> Result<Network> {
    let last = net.depth();
    let mut weights = net.weights().to_vec();
    for entry in &mut weights[last].entries {
        entry.2 *= factor;
    }
    Network::new(net.arch().clone(), weights, net.shifts().to_vec(), net.mode())
}

/// Remove hidden units that cannot affect the output and shrink widths
/// accordingly. A unit is removable when it has no nonzero outgoing weight,
/// or when it has no nonzero incoming weight and a nonnegative shift (its
/// activation is then constantly zero; a negative shift makes a constant
/// generator, which is kept). Removal cascades until a fixed point. A layer
/// that would empty keeps a single disconnected unit so every width stays at
/// least one. Unit order is preserved, so the result is deterministic.
pub fn canonical_width(net: &Network) -> Result<Network> {
    let mut current = net.clone();
    // Each pass removes at least one unit or strips a placeholder; unit count
    // bounds the iteration.
    let max_passes = current.widths().iter().sum::<usize>() + 2;
    for _ in 0..max_passes {
        let next = prune_pass(&current)?;
        if next == current {
            return Ok(current);
        }
        current = next;
    }
    Ok(current)
}

fn prune_pass(net: &Network) -> Result<Network> {
    let depth = net.depth();
    if depth == 0 {
        return Ok(net.clone());
    }

    // keep[l] for hidden layer l+1: Some(new_index) or None.
    let mut keep: Vec<Vec<Option<u32>>> = Vec::with_capacity(depth);
    let mut new_widths = vec![net.input_dim()];
    for l in 1..=depth {
        let width = net.widths()[l];
        let mut has_in = vec![false; width];
        let mut has_out = vec![false; width];
        for &(r, _, v) in &net.weight(l - 1).entries {
            if v != 0.0 {
                has_in[r as usize] = true;
            }
        }
        for &(_, c, v) in &net.weight(l).entries {
            if v != 0.0 {
                has_out[c as usize] = true;
            }
        }
        let mut shift_neg = vec![false; width];
        for &(i, v) in &net.shift(l).entries {
            if v < 0.0 {
                shift_neg[i as usize] = true;
            }
        }
        let mut map = vec![None; width];
        let mut next = 0u32;
        for u in 0..width {
            let constant_zero = !has_in[u] && !shift_neg[u];
            if has_out[u] && !constant_zero {
                map[u] = Some(next);
                next += 1;
            }
        }
        new_widths.push((next as usize).max(1));
        keep.push(map);
    }
    new_widths.push(net.output_dim());

    let arch = Architecture::new(depth, new_widths.clone())?;
    let mut weights = Vec::with_capacity(depth + 1);
    for l in 0..=depth {
        let entries = net
            .weight(l)
            .entries
            .iter()
            .filter_map(|&(r, c, v)| {
                let r_new = if l == depth { Some(r) } else { keep[l][r as usize] };
                let c_new = if l == 0 { Some(c) } else { keep[l - 1][c as usize] };
                match (r_new, c_new) {
                    (Some(rn), Some(cn)) => Some((rn, cn, v)),
                    _ => None,
                }
            })
            .collect();
        weights.push(SparseMat::new(new_widths[l + 1], new_widths[l], entries)?);
    }
    let mut shifts = Vec::with_capacity(depth);
    for l in 1..=depth {
        let entries = net
            .shift(l)
            .entries
            .iter()
            .filter_map(|&(i, v)| keep[l - 1][i as usize].map(|i_new| (i_new, v)))
            .collect();
        shifts.push(SparseVec::new(new_widths[l], entries)?);
    }
    Network::new(arch, weights, shifts, net.mode())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(
        depth: usize,
        widths: &[usize],
        weights: Vec<SparseMat>,
        shifts: Vec<SparseVec>,
    ) -> Network {
        let arch = Architecture::new(depth, widths.to_vec()).unwrap();
        Network::new(arch, weights, shifts, WeightMode::Strict).unwrap()
    }

    /// f(x) = |x| via relu(x) + relu(-x).
    fn abs_net() -> Network {
        net(
            1,
            &[1, 2, 1],
            vec![
                SparseMat::new(2, 1, vec![(0, 0, 1.0), (1, 0, -1.0)]).unwrap(),
                SparseMat::new(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]).unwrap(),
            ],
            vec![SparseVec::empty(2)],
        )
    }

    /// f(y) = relu(y - 0.25).
    fn ramp_net() -> Network {
        net(
            1,
            &[1, 1, 1],
            vec![
                SparseMat::new(1, 1, vec![(0, 0, 1.0)]).unwrap(),
                SparseMat::new(1, 1, vec![(0, 0, 1.0)]).unwrap(),
            ],
            vec![SparseVec::new(1, vec![(0, 0.25)]).unwrap()],
        )
    }

    fn eval1(n: &Network, x: f64) -> f64 {
        n.eval(&[x]).unwrap()[0]
    }

    #[test]
    fn compose_matches_pointwise_application() {
        let inner = abs_net();
        let outer = ramp_net();
        let c = compose(&outer, &inner, SparseVec::empty(1)).unwrap();
        assert_eq!(c.depth(), 3);
        assert_eq!(c.widths(), &[1, 2, 1, 1, 1]);
        for x in [-2.0f64, -0.3, 0.0, 0.7, 1.5] {
            let expect = (x.abs() - 0.25).max(0.0);
            assert_eq!(eval1(&c, x), expect, "x = {x}");
        }
    }

    #[test]
    fn compose_junction_shift_is_applied() {
        // relu(|x| - 0.5) fed into the ramp: relu(relu(|x| - 0.5) - 0.25).
        let inner = abs_net();
        let outer = ramp_net();
        let junction = SparseVec::new(1, vec![(0, 0.5)]).unwrap();
        let c = compose(&outer, &inner, junction).unwrap();
        for x in [-2.0f64, 0.6, 0.9] {
            let expect = ((x.abs() - 0.5).max(0.0) - 0.25).max(0.0);
            assert_eq!(eval1(&c, x), expect, "x = {x}");
        }
    }

    #[test]
    fn compose_rejects_dimension_mismatch() {
        let two_out = make_signed_pair(&abs_net()).unwrap();
        assert!(compose(&ramp_net(), &two_out, SparseVec::empty(2)).is_err());
        assert!(compose(&ramp_net(), &abs_net(), SparseVec::empty(3)).is_err());
    }

    #[test]
    fn parallelize_concatenates_outputs() {
        let a = abs_net();
        let b = ramp_net();
        let p = parallelize(&[&a, &b]).unwrap();
        assert_eq!(p.widths(), &[1, 3, 2]);
        let out = p.eval(&[0.8]).unwrap();
        assert_eq!(out, vec![0.8, 0.55]);
        let out = p.eval(&[-0.4]).unwrap();
        assert_eq!(out, vec![0.4, 0.0]);
    }

    #[test]
    fn parallelize_rejects_mismatches() {
        let a = abs_net();
        let deeper = pad_depth(&a, 1).unwrap();
        assert!(parallelize(&[&a, &deeper]).is_err());
        let wider_input = remap_input(&a, 2, &[0]).unwrap();
        assert!(parallelize(&[&a, &wider_input]).is_err());
        assert!(parallelize(&[]).is_err());
    }

    #[test]
    fn embed_preserves_function_and_nonzeros() {
        let a = abs_net();
        let e = embed(&a, &[1, 4, 2]).unwrap();
        assert_eq!(e.eval(&[-0.3]).unwrap(), vec![0.3, 0.0]);
        assert_eq!(e.sparsity().s, a.sparsity().s);
        assert!(embed(&a, &[1, 1, 1]).is_err());
    }

    #[test]
    fn pad_depth_is_identity_on_nonnegative_inputs() {
        let a = abs_net();
        let padded = pad_depth(&a, 3).unwrap();
        assert_eq!(padded.depth(), 4);
        assert_eq!(padded.widths(), &[1, 1, 1, 1, 2, 1]);
        assert_eq!(padded.sparsity().s, a.sparsity().s + 3);
        for x in [0.0, 0.3, 1.7] {
            assert_eq!(eval1(&padded, x), eval1(&a, x), "x = {x}");
        }
    }

    #[test]
    fn pad_depth_output_is_exact_for_negative_outputs() {
        // f(x) = -|x| has strictly negative outputs away from zero, which a
        // bottom-padded identity could never carry.
        let neg_abs = scale_output(&abs_net(), -1.0).unwrap();
        let padded = pad_depth_output(&neg_abs, 2).unwrap();
        assert_eq!(padded.depth(), 3);
        assert_eq!(padded.widths(), &[1, 2, 2, 2, 1]);
        for x in [-1.3, -0.2, 0.0, 0.7] {
            assert_eq!(eval1(&padded, x), -x.abs(), "x = {x}");
        }
    }

    #[test]
    fn sign_split_separates_signs() {
        // Depth-zero identity x -> x.
        let ident = net(
            0,
            &[1, 1],
            vec![SparseMat::new(1, 1, vec![(0, 0, 1.0)]).unwrap()],
            vec![],
        );
        let s = sign_split(&ident).unwrap();
        assert_eq!(s.depth(), 1);
        assert_eq!(s.eval(&[0.7]).unwrap(), vec![0.7, 0.0]);
        assert_eq!(s.eval(&[-0.3]).unwrap(), vec![0.0, 0.3]);
    }

    #[test]
    fn make_signed_pair_duplicates_with_negation() {
        let a = abs_net();
        let pair = make_signed_pair(&a).unwrap();
        assert_eq!(pair.depth(), a.depth());
        assert_eq!(pair.eval(&[-0.6]).unwrap(), vec![0.6, -0.6]);
    }

    #[test]
    fn remap_input_merges_and_reroutes() {
        // f(a, b) = a + 2b.
        let f = net(
            0,
            &[2, 1],
            vec![SparseMat::new(1, 2, vec![(0, 0, 1.0), (0, 1, 2.0)]).unwrap()],
            vec![],
        );
        let diag = remap_input(&f, 1, &[0, 0]).unwrap();
        assert_eq!(eval1(&diag, 0.5), 1.5);

        let routed = remap_input(&f, 3, &[2, 0]).unwrap();
        assert_eq!(routed.eval(&[0.25, 9.0, 1.0]).unwrap(), vec![1.5]);
        assert!(remap_input(&f, 1, &[0, 1]).is_err());
    }

    #[test]
    fn precompose_affine_matches_direct_evaluation() {
        let f = ramp_net();
        let g = precompose_affine(&f, &[vec![0.5, -0.5]], &[0.25]).unwrap();
        assert_eq!(g.input_dim(), 2);
        for (x0, x1) in [(1.0, 0.2), (0.0, 0.0), (-0.5, 0.5)] {
            let expect = eval1(&f, 0.5 * x0 - 0.5 * x1 + 0.25);
            assert_eq!(g.eval(&[x0, x1]).unwrap(), vec![expect]);
        }
    }

    #[test]
    fn precompose_affine_rejects_offset_without_shift_layer() {
        let lin = net(
            0,
            &[1, 1],
            vec![SparseMat::new(1, 1, vec![(0, 0, 2.0)]).unwrap()],
            vec![],
        );
        assert!(precompose_affine(&lin, &[vec![1.0]], &[0.1]).is_err());
        let ok = precompose_affine(&lin, &[vec![3.0]], &[0.0]).unwrap();
        assert_eq!(eval1(&ok, 0.5), 3.0);
    }

    #[test]
    fn canonical_width_removes_dead_units_transitively() {
        // Layer 1: u0 live, u1 has no outgoing weight, u2 has no incoming
        // weight. Layer 2: u3 live, u4 reads only from u2 so it dies on the
        // second pass.
        let f = net(
            2,
            &[1, 3, 2, 1],
            vec![
                SparseMat::new(3, 1, vec![(0, 0, 1.0), (1, 0, 1.0)]).unwrap(),
                SparseMat::new(2, 3, vec![(0, 0, 1.0), (1, 2, 1.0)]).unwrap(),
                SparseMat::new(1, 2, vec![(0, 0, 1.0), (0, 1, 0.5)]).unwrap(),
            ],
            vec![
                SparseVec::new(3, vec![(1, 0.5)]).unwrap(),
                SparseVec::empty(2),
            ],
        );
        let c = canonical_width(&f).unwrap();
        assert_eq!(c.widths(), &[1, 1, 1, 1]);
        assert_eq!(c.sparsity().s, 3);
        for x in [-1.0, 0.3, 2.0] {
            assert_eq!(eval1(&c, x), eval1(&f, x), "x = {x}");
        }
    }

    #[test]
    fn canonical_width_keeps_constant_generators() {
        // relu(0 - (-1)) = 1: no incoming weight but a negative shift.
        let one = net(
            1,
            &[1, 1, 1],
            vec![
                SparseMat::new(1, 1, vec![]).unwrap(),
                SparseMat::new(1, 1, vec![(0, 0, 1.0)]).unwrap(),
            ],
            vec![SparseVec::new(1, vec![(0, -1.0)]).unwrap()],
        );
        let c = canonical_width(&one).unwrap();
        assert_eq!(eval1(&c, 123.0), 1.0);
        assert_eq!(c.widths(), one.widths());
    }

    #[test]
    fn canonical_width_leaves_placeholder_in_empty_layer() {
        // Both hidden units are constant zero, so the whole layer dies; a
        // single disconnected unit remains and the function is constant zero.
        let f = net(
            1,
            &[1, 2, 1],
            vec![
                SparseMat::new(2, 1, vec![]).unwrap(),
                SparseMat::new(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]).unwrap(),
            ],
            vec![SparseVec::new(2, vec![(0, 0.5)]).unwrap()],
        );
        let c = canonical_width(&f).unwrap();
        assert_eq!(c.widths(), &[1, 1, 1]);
        assert_eq!(c.sparsity().s, 0);
        assert_eq!(eval1(&c, 5.0), 0.0);
        assert_eq!(eval1(&f, 5.0), 0.0);
    }

    #[test]
    fn scale_output_scales_only_the_last_layer() {
        let a = abs_net();
        let s = scale_output(&a, 0.25).unwrap();
        assert_eq!(eval1(&s, -2.0), 0.5);
        assert_eq!(s.weight(0).entries, a.weight(0).entries);
    }
}
