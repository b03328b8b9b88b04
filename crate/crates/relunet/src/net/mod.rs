//! Sparse layered ReLU network representation.
//!
//! A network of depth `L` (number of hidden layers) with width vector
//! `p = (p_0, ..., p_{L+1})` computes
//!
//! ```text
//! f(x) = W_L relu(W_{L-1} ... relu(W_0 x - v_1) ... - v_L)
//! ```
//!
//! where `W_i` maps `R^{p_i} -> R^{p_{i+1}}` and `v_i` shifts hidden layer `i`
//! before the rectifier. The output layer is linear (no activation, no shift);
//! no shift is applied to the input either, so only `L` shift vectors are
//! stored. Weight matrices and shift vectors are kept as sorted coordinate
//! lists; evaluation scatters into dense per-layer buffers.

mod builder;
mod serial;

pub(crate) use builder::{NetBuilder, UnitSpec};
pub use serial::{read_network, write_network, FileFormat};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Constraint regime for parameter magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    /// Every weight and shift must lie in `[-1, 1]`.
    Strict,
    /// Magnitudes unconstrained (still finite).
    Relaxed,
}

/// Depth and width profile of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Number of hidden layers.
    pub depth: usize,
    /// Widths `(p_0, ..., p_{L+1})`; length `depth + 2`.
    pub widths: Vec<usize>,
}

impl Architecture {
    pub fn new(depth: usize, widths: Vec<usize>) -> Result<Self> {
        if widths.len() != depth + 2 {
            return Err(Error::BadArchitecture {
                reason: format!(
                    "width vector has length {}, expected depth + 2 = {}",
                    widths.len(),
                    depth + 2
                ),
            });
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::BadArchitecture {
                reason: "all widths must be at least 1".into(),
            });
        }
        Ok(Self { depth, widths })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Total parameter slots of an architecture: all weight-matrix cells plus all
/// shift cells. Equals `sum_l (p_l + 1) p_{l+1} - p_{L+1}` because the output
/// layer has no shift.
pub fn count_params(arch: &Architecture) -> usize {
    let p = &arch.widths;
    let mut total = 0usize;
    for l in 0..=arch.depth {
        total += (p[l] + 1) * p[l + 1];
    }
    total - arch.output_dim()
}

/// Sparse matrix in row-major sorted coordinate form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    /// Entries sorted by (row, col), no duplicates. Zero values are allowed
    /// but not counted as nonzero parameters.
    pub entries: Vec<(u32, u32, f64)>,
}

impl SparseMat {
    pub fn new(rows: usize, cols: usize, mut entries: Vec<(u32, u32, f64)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate matrix entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| {
            r as usize >= rows || c as usize >= cols
        }) {
            return Err(Error::InvalidArgument(format!(
                "matrix entry ({r}, {c}) out of bounds for {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|&&(_, _, v)| v != 0.0).count()
    }
}

/// Sparse vector in sorted coordinate form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub len: usize,
    pub entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn new(len: usize, mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vector entry at {}",
                    w[0].0
                )));
            }
        }
        if let Some(&(i, _)) = entries.iter().find(|&&(i, _)| i as usize >= len) {
            return Err(Error::InvalidArgument(format!(
                "vector entry {i} out of bounds for length {len}"
            )));
        }
        Ok(Self { len, entries })
    }

    pub fn empty(len: usize) -> Self {
        Self { len, entries: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|&&(_, v)| v != 0.0).count()
    }
}

/// Nonzero-count summary of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    /// Number of nonzero weights and shifts.
    pub s: usize,
    /// Total parameter slots of the architecture.
    pub total_count: usize,
    /// Largest magnitude over all stored weights and shifts (0 if none).
    pub max_abs: f64,
}

/// One constraint violation found by [`Network::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Weight { layer: usize, row: u32, col: u32, value: f64 },
    Shift { layer: usize, index: u32, value: f64 },
    NonFinite { layer: usize, value: f64 },
}

/// Outcome of validation; `passed` is true when no violations were found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Scratch buffers for repeated evaluation without reallocation.
#[derive(Debug, Default, Clone)]
pub struct EvalScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Sparse layered ReLU network. Construct with [`Network::new`] (shape checks
/// are enforced there); magnitude constraints are checked by
/// [`Network::validate`], the single enforcement point for weight bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    arch: Architecture,
    /// `weights[i] = W_i`, shape `widths[i+1] x widths[i]`, for `i in 0..=depth`.
    weights: Vec<SparseMat>,
    /// `shifts[i] = v_{i+1}` applied to hidden layer `i+1`, for `i in 0..depth`.
    shifts: Vec<SparseVec>,
    mode: WeightMode,
}

impl Network {
    pub fn new(
        arch: Architecture,
        weights: Vec<SparseMat>,
        shifts: Vec<SparseVec>,
        mode: WeightMode,
    ) -> Result<Self> {
        if weights.len() != arch.depth + 1 {
            return Err(Error::BadArchitecture {
                reason: format!(
                    "{} weight matrices provided, expected {}",
                    weights.len(),
                    arch.depth + 1
                ),
            });
        }
        if shifts.len() != arch.depth {
            return Err(Error::BadArchitecture {
                reason: format!("{} shift vectors provided, expected {}", shifts.len(), arch.depth),
            });
        }
        for (i, w) in weights.iter().enumerate() {
            if w.rows != arch.widths[i + 1] || w.cols != arch.widths[i] {
                return Err(Error::BadLayer {
                    layer: i,
                    reason: format!(
                        "weight matrix is {}x{}, expected {}x{}",
                        w.rows,
                        w.cols,
                        arch.widths[i + 1],
                        arch.widths[i]
                    ),
                });
            }
        }
        for (i, v) in shifts.iter().enumerate() {
            if v.len != arch.widths[i + 1] {
                return Err(Error::BadLayer {
                    layer: i + 1,
                    reason: format!("shift vector has length {}, expected {}", v.len, arch.widths[i + 1]),
                });
            }
        }
        Ok(Self { arch, weights, shifts, mode })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn depth(&self) -> usize {
        self.arch.depth
    }

    pub fn widths(&self) -> &[usize] {
        &self.arch.widths
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    #[cfg(test)]
    pub(crate) fn set_mode(&mut self, mode: WeightMode) {
        self.mode = mode;
    }

    pub fn weight(&self, layer: usize) -> &SparseMat {
        &self.weights[layer]
    }

    pub fn shift(&self, hidden_layer: usize) -> &SparseVec {
        &self.shifts[hidden_layer - 1]
    }

    pub(crate) fn weights(&self) -> &[SparseMat] {
        &self.weights
    }

    pub(crate) fn shifts(&self) -> &[SparseVec] {
        &self.shifts
    }

    /// Forward pass. Allocates; use [`Network::eval_into`] in hot loops.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = EvalScratch::default();
        self.eval_into(x, &mut scratch).map(|out| out.to_vec())
    }

    /// Forward pass into reusable scratch buffers; returns the output slice.
    pub fn eval_into<'s>(&self, x: &[f64], scratch: &'s mut EvalScratch) -> Result<&'s [f64]> {
        if x.len() != self.input_dim() {
            return Err(Error::InputDim { got: x.len(), expected: self.input_dim() });
        }
        let max_w = self.arch.widths.iter().copied().max().unwrap();
        scratch.a.resize(max_w, 0.0);
        scratch.b.resize(max_w, 0.0);
        scratch.a[..x.len()].copy_from_slice(x);

        let depth = self.arch.depth;
        let mut cur_in_a = true;
        for i in 0..=depth {
            let (input, output) = if cur_in_a {
                (&scratch.a, &mut scratch.b)
            } else {
                (&scratch.b, &mut scratch.a)
            };
            let w = &self.weights[i];
            output[..w.rows].fill(0.0);
            for &(r, c, val) in &w.entries {
                output[r as usize] += val * input[c as usize];
            }
            if i < depth {
                let v = &self.shifts[i];
                for &(idx, val) in &v.entries {
                    output[idx as usize] -= val;
                }
                for o in output[..w.rows].iter_mut() {
                    if *o < 0.0 {
                        *o = 0.0;
                    }
                }
            }
            cur_in_a = !cur_in_a;
        }
        let out = if cur_in_a { &scratch.a } else { &scratch.b };
        Ok(&out[..self.output_dim()])
    }

    /// Count nonzero parameters and the largest stored magnitude.
    pub fn sparsity(&self) -> SparsityReport {
        let mut s = 0usize;
        let mut max_abs = 0.0f64;
        for w in &self.weights {
            for &(_, _, v) in &w.entries {
                if v != 0.0 {
                    s += 1;
                }
                max_abs = max_abs.max(v.abs());
            }
        }
        for sv in &self.shifts {
            for &(_, v) in &sv.entries {
                if v != 0.0 {
                    s += 1;
                }
                max_abs = max_abs.max(v.abs());
            }
        }
        SparsityReport { s, total_count: count_params(&self.arch), max_abs }
    }

    /// Check magnitude constraints. In strict mode every weight and shift must
    /// lie in `[-1, 1]`; in relaxed mode only finiteness is required. Always
    /// returns a report rather than failing.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let strict = self.mode == WeightMode::Strict;
        for (layer, w) in self.weights.iter().enumerate() {
            for &(r, c, v) in &w.entries {
                if !v.is_finite() {
                    violations.push(Violation::NonFinite { layer, value: v });
                } else if strict && v.abs() > 1.0 {
                    violations.push(Violation::Weight { layer, row: r, col: c, value: v });
                }
            }
        }
        for (i, sv) in self.shifts.iter().enumerate() {
            for &(idx, v) in &sv.entries {
                if !v.is_finite() {
                    violations.push(Violation::NonFinite { layer: i + 1, value: v });
                } else if strict && v.abs() > 1.0 {
                    violations.push(Violation::Shift { layer: i + 1, index: idx, value: v });
                }
            }
        }
        ValidationReport { passed: violations.is_empty(), violations }
    }
}
