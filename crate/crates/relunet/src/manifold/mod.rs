//! Chart atlases for low-dimensional sets embedded in higher-dimensional
//! space.
//!
//! A manifold is described by overlapping charts, each mapping its patch to
//! an open coordinate box. Charts are built from three primitives: circular
//! arcs (the unit circle carries four arcs of angular half-width `5pi/8`, so
//! every point lies in at least two of them), products (tori and cylinders),
//! and linear reductions (the same arcs after an orthonormal change of
//! coordinates, which is how a circle sitting in a large ambient space keeps
//! its two-dimensional chart geometry: downstream constructions grid the
//! reduced space and fold the reduction into their first affine layer).
//!
//! Arc coordinates are angular offsets translated away from zero, so every
//! chart image is the fixed interval `(1, 1 + 5pi/4)`; keeping images away
//! from the origin leaves room for margin gymnastics in later stages without
//! sign juggling.

pub mod partition;

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

/// Angular half-width of each circle arc chart.
pub const ARC_HALF_WIDTH: f64 = 5.0 * PI / 8.0;
/// Arc chart images start here.
pub const ARC_IMAGE_LO: f64 = 1.0;

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// One coordinate patch.
#[derive(Debug, Clone)]
pub enum Chart {
    /// Arc of the unit circle in the plane: points whose angle lies within
    /// `half_width` of `center`, with coordinate `offset + angular offset`.
    CircleArc { center: f64, half_width: f64, offset: f64 },
    /// Cartesian product: ambient and coordinate vectors are concatenations.
    Product { left: Box<Chart>, right: Box<Chart>, left_ambient: usize },
    /// A chart of a linearly transformed copy: `matrix` has orthonormal rows
    /// and carries ambient points into the inner chart's space.
    Reduced { inner: Box<Chart>, matrix: Vec<Vec<f64>> },
}

impl Chart {
    pub fn coord_dim(&self) -> usize {
        match self {
            Chart::CircleArc { .. } => 1,
            Chart::Product { left, right, .. } => left.coord_dim() + right.coord_dim(),
            Chart::Reduced { inner, .. } => inner.coord_dim(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Chart::CircleArc { .. } => 2,
            Chart::Product { left, right, .. } => left.ambient_dim() + right.ambient_dim(),
            Chart::Reduced { matrix, .. } => matrix[0].len(),
        }
    }

    /// Dimension after applying the reduction: the space downstream grids.
    pub fn reduced_dim(&self) -> usize {
        match self {
            Chart::CircleArc { .. } => 2,
            Chart::Product { left, right, .. } => left.reduced_dim() + right.reduced_dim(),
            Chart::Reduced { inner, .. } => inner.reduced_dim(),
        }
    }

    /// Coordinate image box.
    pub fn image(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Chart::CircleArc { half_width, offset, .. } => {
                (vec![offset - half_width], vec![offset + half_width])
            }
            Chart::Product { left, right, .. } => {
                let (mut lo, mut hi) = left.image();
                let (rlo, rhi) = right.image();
                lo.extend(rlo);
                hi.extend(rhi);
                (lo, hi)
            }
            Chart::Reduced { inner, .. } => inner.image(),
        }
    }

    /// Linear reduction applied to ambient points, or `None` when it is the
    /// identity.
    pub fn reduction_matrix(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Chart::CircleArc { .. } => None,
            Chart::Reduced { matrix, .. } => Some(matrix.clone()),
            Chart::Product { left, right, left_ambient } => {
                let lm = left.reduction_matrix();
                let rm = right.reduction_matrix();
                if lm.is_none() && rm.is_none() {
                    return None;
                }
                // Block diagonal; identity blocks are materialized.
                let la = *left_ambient;
                let ra = right.ambient_dim();
                let lm = lm.unwrap_or_else(|| identity_rows(la));
                let rm = rm.unwrap_or_else(|| identity_rows(ra));
                let mut rows = Vec::with_capacity(lm.len() + rm.len());
                for r in &lm {
                    let mut row = r.clone();
                    row.extend(std::iter::repeat(0.0).take(ra));
                    rows.push(row);
                }
                for r in &rm {
                    let mut row = vec![0.0; la];
                    row.extend(r.iter().copied());
                    rows.push(row);
                }
                Some(rows)
            }
        }
    }

    /// Apply the reduction to an ambient point.
    pub fn reduce(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Chart::CircleArc { .. } => u.to_vec(),
            Chart::Reduced { matrix, .. } => matrix
                .iter()
                .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum())
                .collect(),
            Chart::Product { left, right, left_ambient } => {
                let mut v = left.reduce(&u[..*left_ambient]);
                v.extend(right.reduce(&u[*left_ambient..]));
                v
            }
        }
    }

    /// Chart coordinates of a reduced-space point, `None` outside the patch.
    pub fn forward_reduced(&self, v: &[f64]) -> Option<Vec<f64>> {
        match self {
            Chart::CircleArc { center, half_width, offset } => {
                let r2 = v[0] * v[0] + v[1] * v[1];
                if !(0.25..=2.25).contains(&r2) {
                    return None;
                }
                let a = wrap_angle(v[1].atan2(v[0]) - center);
                if a.abs() >= *half_width {
                    return None;
                }
                Some(vec![a + offset])
            }
            Chart::Product { left, right, .. } => {
                let ld = left.reduced_dim();
                let mut x = left.forward_reduced(&v[..ld])?;
                x.extend(right.forward_reduced(&v[ld..])?);
                Some(x)
            }
            Chart::Reduced { inner, .. } => inner.forward_reduced(v),
        }
    }

    /// Reduced-space point of a coordinate vector. Arc formulas extend
    /// smoothly beyond the open image, which later stages rely on when they
    /// fatten domains by small margins.
    pub fn inverse_reduced(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Chart::CircleArc { center, offset, .. } => {
                let theta = center + (x[0] - offset);
                vec![theta.cos(), theta.sin()]
            }
            Chart::Product { left, right, .. } => {
                let ld = left.coord_dim();
                let mut v = left.inverse_reduced(&x[..ld]);
                v.extend(right.inverse_reduced(&x[ld..]));
                v
            }
            Chart::Reduced { inner, .. } => inner.inverse_reduced(x),
        }
    }

    /// Chart coordinates of an ambient point, `None` outside the patch.
    pub fn forward(&self, u: &[f64]) -> Option<Vec<f64>> {
        self.forward_reduced(&self.reduce(u))
    }

    /// Ambient point of a coordinate vector. Reductions are inverted by
    /// their transpose, which is exact on the manifold because the rows are
    /// orthonormal.
    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Chart::CircleArc { .. } => self.inverse_reduced(x),
            Chart::Product { left, right, .. } => {
                let ld = left.coord_dim();
                let mut u = left.inverse(&x[..ld]);
                u.extend(right.inverse(&x[ld..]));
                u
            }
            Chart::Reduced { inner, matrix } => {
                let v = inner.inverse(x);
                let d = matrix[0].len();
                (0..d)
                    .map(|i| matrix.iter().zip(&v).map(|(row, &vi)| row[i] * vi).sum())
                    .collect()
            }
        }
    }
}

fn identity_rows(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut row = vec![0.0; d];
            row[i] = 1.0;
            row
        })
        .collect()
}

/// A chart atlas with consistent dimensions.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub charts: Vec<Chart>,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
}

impl Manifold {
    pub fn new(charts: Vec<Chart>) -> Result<Self> {
        let first = charts.first().ok_or_else(|| Error::Coverage {
            reason: "atlas needs at least one chart".into(),
        })?;
        let ambient_dim = first.ambient_dim();
        let intrinsic_dim = first.coord_dim();
        for c in &charts {
            if c.ambient_dim() != ambient_dim || c.coord_dim() != intrinsic_dim {
                return Err(Error::Coverage {
                    reason: "charts disagree on ambient or coordinate dimension".into(),
                });
            }
        }
        Ok(Self { charts, ambient_dim, intrinsic_dim })
    }

    /// Unit circle in the plane, four arc charts centered at multiples of
    /// `pi/2`.
    pub fn circle() -> Self {
        let charts = (0..4)
            .map(|j| Chart::CircleArc {
                center: j as f64 * PI / 2.0,
                half_width: ARC_HALF_WIDTH,
                offset: ARC_IMAGE_LO + ARC_HALF_WIDTH,
            })
            .collect();
        Self::new(charts).unwrap()
    }

    /// Unit circle placed in `ambient_dim`-dimensional space by a seeded
    /// random orthonormal pair of directions. Chart geometry is untouched;
    /// only the reduction differs.
    pub fn circle_embedded(ambient_dim: usize, seed: u64) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidArgument(
                "embedding needs an ambient dimension of at least 2".into(),
            ));
        }
        let q = orthonormal_pair(ambient_dim, seed);
        let charts = Self::circle()
            .charts
            .into_iter()
            .map(|inner| Chart::Reduced { inner: Box::new(inner), matrix: q.clone() })
            .collect();
        Self::new(charts)
    }

    /// Cartesian product; charts are all pairs.
    pub fn product(a: &Manifold, b: &Manifold) -> Result<Self> {
        let mut charts = Vec::with_capacity(a.charts.len() * b.charts.len());
        for ca in &a.charts {
            for cb in &b.charts {
                charts.push(Chart::Product {
                    left: Box::new(ca.clone()),
                    right: Box::new(cb.clone()),
                    left_ambient: a.ambient_dim,
                });
            }
        }
        Self::new(charts)
    }

    /// Indices of charts containing the point.
    pub fn charts_containing(&self, u: &[f64]) -> Vec<usize> {
        (0..self.charts.len())
            .filter(|&j| self.charts[j].forward(u).is_some())
            .collect()
    }

    /// Quasi-uniform points on the manifold: a random chart, a uniform
    /// coordinate in its image, mapped back to ambient space. Overlaps are
    /// sampled more densely, which is harmless for audits and suprema.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let chart = &self.charts[rng.gen_range(0..self.charts.len())];
                let (lo, hi) = chart.image();
                let x: Vec<f64> = lo
                    .iter()
                    .zip(&hi)
                    .map(|(&l, &h)| l + (h - l) * rng.gen::<f64>())
                    .collect();
                chart.inverse(&x)
            })
            .collect()
    }

    /// Smallest number of charts covering any of the given points.
    pub fn coverage(&self, samples: &[Vec<f64>]) -> Result<usize> {
        let mut min = usize::MAX;
        for u in samples {
            let c = self.charts_containing(u).len();
            if c == 0 {
                return Err(Error::Coverage {
                    reason: format!("point {u:?} lies in no chart"),
                });
            }
            min = min.min(c);
        }
        Ok(min)
    }
}

/// Two orthonormal rows in `d` dimensions from seeded Gaussian draws.
fn orthonormal_pair(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    };
    loop {
        let g1: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
        let n1 = g1.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n1 < 1e-6 {
            continue;
        }
        let q1: Vec<f64> = g1.iter().map(|v| v / n1).collect();
        let g2: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
        let dot: f64 = q1.iter().zip(&g2).map(|(a, b)| a * b).sum();
        let r2: Vec<f64> = g2.iter().zip(&q1).map(|(g, q)| g - dot * q).collect();
        let n2 = r2.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n2 < 1e-6 {
            continue;
        }
        return vec![q1, r2.iter().map(|v| v / n2).collect()];
    }
}
