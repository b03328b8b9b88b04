//! Incremental layer-by-layer construction of sparse networks.
//!
//! Gadget builders lay out many co-scheduled subcircuits inside one network.
//! `NetBuilder` grows the hidden stack one full layer at a time; units are
//! addressed by their index in the current frontier layer, and the strictly
//! feedforward adjacency (layer i+1 reads only layer i) is enforced by
//! construction: a value still needed later must be carried forward through
//! an explicit unit.

use super::{Architecture, Network, SparseMat, SparseVec, WeightMode};
use crate::error::Result;

/// One rectified unit: `relu(sum_i w_i * frontier[u_i] - shift)`.
#[derive(Debug, Clone)]
pub(crate) struct UnitSpec {
    pub inputs: Vec<(usize, f64)>,
    pub shift: f64,
}

impl UnitSpec {
    pub fn new(inputs: Vec<(usize, f64)>) -> Self {
        Self { inputs, shift: 0.0 }
    }

    pub fn with_shift(inputs: Vec<(usize, f64)>, shift: f64) -> Self {
        Self { inputs, shift }
    }

    /// Identity pass-through; exact for nonnegative signals.
    pub fn carry(unit: usize) -> Self {
        Self { inputs: vec![(unit, 1.0)], shift: 0.0 }
    }

    /// Constant unit: `relu(0 - (-1)) = 1`, one nonzero (the shift).
    pub fn one() -> Self {
        Self { inputs: Vec::new(), shift: -1.0 }
    }
}

#[derive(Debug, Clone)]
struct LayerDraft {
    width: usize,
    weights: Vec<(u32, u32, f64)>,
    shifts: Vec<(u32, f64)>,
}

#[derive(Debug)]
pub(crate) struct NetBuilder {
    input_dim: usize,
    layers: Vec<LayerDraft>,
}

impl NetBuilder {
    pub fn new(input_dim: usize) -> Self {
        Self { input_dim, layers: Vec::new() }
    }

    pub fn frontier_width(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.width)
    }

    /// Append one hidden layer; returns the new units' frontier indices.
    pub fn advance(&mut self, specs: &[UnitSpec]) -> Vec<usize> {
        let prev_width = self.frontier_width();
        let mut weights = Vec::new();
        let mut shifts = Vec::new();
        for (row, spec) in specs.iter().enumerate() {
            debug_assert!(
                {
                    let mut cols: Vec<_> = spec.inputs.iter().map(|&(c, _)| c).collect();
                    cols.sort_unstable();
                    cols.windows(2).all(|w| w[0] != w[1])
                },
                "duplicate input column in unit spec"
            );
            for &(col, w) in &spec.inputs {
                assert!(col < prev_width, "unit reads column {col} beyond frontier width {prev_width}");
                if w != 0.0 {
                    weights.push((row as u32, col as u32, w));
                }
            }
            if spec.shift != 0.0 {
                shifts.push((row as u32, spec.shift));
            }
        }
        self.layers.push(LayerDraft { width: specs.len(), weights, shifts });
        (0..specs.len()).collect()
    }

    /// Close the network with linear output rows over the frontier.
    pub fn finish(self, output_rows: &[Vec<(usize, f64)>], mode: WeightMode) -> Result<Network> {
        let frontier = self.frontier_width();
        let depth = self.layers.len();
        let mut widths = Vec::with_capacity(depth + 2);
        widths.push(self.input_dim);
        for l in &self.layers {
            widths.push(l.width);
        }
        widths.push(output_rows.len());
        let arch = Architecture::new(depth, widths)?;

        let mut weights = Vec::with_capacity(depth + 1);
        let mut shifts = Vec::with_capacity(depth);
        let mut prev = self.input_dim;
        for l in self.layers {
            weights.push(SparseMat::new(l.width, prev, l.weights)?);
            shifts.push(SparseVec::new(l.width, l.shifts)?);
            prev = l.width;
        }
        let mut out_entries = Vec::new();
        for (row, cols) in output_rows.iter().enumerate() {
            for &(col, w) in cols {
                assert!(col < frontier, "output reads column {col} beyond frontier width {frontier}");
                if w != 0.0 {
                    out_entries.push((row as u32, col as u32, w));
                }
            }
        }
        weights.push(SparseMat::new(output_rows.len(), prev, out_entries)?);

        Network::new(arch, weights, shifts, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_shifted_relu_chain() {
        let mut b = NetBuilder::new(1);
        let u = b.advance(&[UnitSpec::with_shift(vec![(0, 1.0)], 0.5)]);
        let v = b.advance(&[UnitSpec::carry(u[0])]);
        let net = b
            .finish(&[vec![(v[0], 2.0)]], WeightMode::Relaxed)
            .unwrap();
        assert_eq!(net.depth(), 2);
        assert_eq!(net.widths(), &[1, 1, 1, 1]);
        assert_eq!(net.eval(&[2.0]).unwrap(), vec![3.0]);
        assert_eq!(net.eval(&[0.25]).unwrap(), vec![0.0]);
    }

    #[test]
    fn constant_unit_is_one() {
        let mut b = NetBuilder::new(1);
        let u = b.advance(&[UnitSpec::one()]);
        let net = b.finish(&[vec![(u[0], 1.0)]], WeightMode::Strict).unwrap();
        assert_eq!(net.eval(&[123.0]).unwrap(), vec![1.0]);
    }
}
