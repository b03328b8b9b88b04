//! Smooth partitions of unity subordinate to a chart atlas.
//!
//! Each chart gets a grid of compactly supported mollifier bumps placed in
//! its coordinate image, inset far enough that every bump support stays well
//! inside the chart both in coordinates and, audited by sampling, in ambient
//! distance. The chart weight is `tau_j = G(sigma_j, sum_k sigma_k)` where
//! `sigma_j` is the bump sum pulled back to the manifold and extended by
//! zero off the chart.
//!
//! `G` is a smoothed division: multiplying `u/v` by smooth cutoffs that are
//! identically 1 on the audited range of the manifold makes `tau_j` a
//! globally smooth function while keeping `sum_j tau_j = 1` exact on the
//! manifold itself. Cutting off below the audited floor instead of dividing
//! blindly is what keeps the formula well-defined where every bump vanishes.

use super::Manifold;
use crate::error::{Error, Result};

/// Infinitely differentiable step: 0 at or below 1/4, 1 at or above 3/4.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.25 {
        0.0
    } else if t >= 0.75 {
        1.0
    } else {
        let s = (t - 0.25) * 2.0;
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        a / (a + b)
    }
}

/// `u/v` guarded by smooth cutoffs: exactly `u/v` for `u` in `[0, hi]` and
/// `v` in `[2*lo, hi]`, exactly 0 once `v` drops to `lo/4`, smooth
/// everywhere in between.
pub fn smoothed_division(u: f64, v: f64, lo: f64, hi: f64) -> f64 {
    if v <= lo * 0.25 {
        return 0.0;
    }
    let k = smoothstep(u + 1.0)
        * smoothstep(hi + 1.0 - u)
        * smoothstep(v / lo)
        * smoothstep(hi + 1.0 - v);
    if k == 0.0 {
        0.0
    } else {
        k * u / v
    }
}

/// Tensor mollifier bump: product over axes of `exp(1 - 1/(1 - t^2))` with
/// `t = (x_i - center_i)/radius_i`, supported on the open radius box.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Bump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for i in 0..self.center.len() {
            let t = (x[i] - self.center[i]) / self.radius[i];
            let t2 = t * t;
            if t2 >= 1.0 {
                return 0.0;
            }
            v *= (1.0 - 1.0 / (1.0 - t2)).exp();
        }
        v
    }
}

/// Bump layout in one chart image: `k` centers per axis with spacing
/// `s = len/(k + 3.2)`, inset by `1.6 s`, radius `0.6 s`. Adjacent supports
/// overlap while the support box keeps a `1.5 s` margin to the image edge,
/// which the ambient audit converts into a safety distance.
fn place_bumps(lo: &[f64], hi: &[f64], k: usize) -> (Vec<Bump>, (Vec<f64>, Vec<f64>)) {
    let dim = lo.len();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut radius = Vec::with_capacity(dim);
    let mut sup_lo = Vec::with_capacity(dim);
    let mut sup_hi = Vec::with_capacity(dim);
    for i in 0..dim {
        let s = (hi[i] - lo[i]) / (k as f64 + 3.2);
        let r = 0.6 * s;
        let centers: Vec<f64> = (0..k)
            .map(|j| lo[i] + 1.6 * s + (j as f64 + 0.5) * s)
            .collect();
        sup_lo.push(centers[0] - r);
        sup_hi.push(centers[k - 1] + r);
        axes.push(centers);
        radius.push(r);
    }
    let mut bumps = Vec::with_capacity(k.pow(dim as u32));
    let mut idx = vec![0usize; dim];
    loop {
        bumps.push(Bump {
            center: (0..dim).map(|i| axes[i][idx[i]]).collect(),
            radius: radius.clone(),
        });
        let mut axis = dim;
        loop {
            if axis == 0 {
                return (bumps, (sup_lo, sup_hi));
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < k {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// A partition of unity over a manifold, with audited constants.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub manifold: Manifold,
    pub bumps: Vec<Vec<Bump>>,
    /// Division floor: half the audited minimum of the bump total.
    pub nu_floor: f64,
    /// Division ceiling: the audited maximum of the bump total.
    pub nu_ceil: f64,
    /// Smallest audited ambient safety distance over all bumps.
    pub delta_min: f64,
    support: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PartitionOfUnity {
    /// Bump total of one chart in its own coordinates.
    pub fn nu(&self, chart: usize, x: &[f64]) -> f64 {
        self.bumps[chart].iter().map(|b| b.eval(x)).sum()
    }

    /// Bump total seen from ambient space, zero off the chart.
    pub fn sigma(&self, chart: usize, u: &[f64]) -> f64 {
        match self.manifold.charts[chart].forward(u) {
            Some(x) => self.nu(chart, &x),
            None => 0.0,
        }
    }

    /// Denominator `sum_k sigma_k`.
    pub fn total(&self, u: &[f64]) -> f64 {
        (0..self.manifold.charts.len()).map(|k| self.sigma(k, u)).sum()
    }

    /// Chart weight at an ambient point.
    pub fn tau(&self, chart: usize, u: &[f64]) -> f64 {
        smoothed_division(self.sigma(chart, u), self.total(u), self.nu_floor, self.nu_ceil)
    }

    pub fn tau_all(&self, u: &[f64]) -> Vec<f64> {
        let total = self.total(u);
        (0..self.manifold.charts.len())
            .map(|k| smoothed_division(self.sigma(k, u), total, self.nu_floor, self.nu_ceil))
            .collect()
    }

    /// Chart weight as a function of the chart's own coordinates; this is
    /// the scalar target a network approximates for the chart. Coordinates
    /// are mapped back to the manifold, so the formula stays valid slightly
    /// beyond the open image.
    pub fn tau_in_coords(&self, chart: usize, x: &[f64]) -> f64 {
        let u = self.manifold.charts[chart].inverse(x);
        smoothed_division(self.nu(chart, x), self.total(&u), self.nu_floor, self.nu_ceil)
    }

    /// Coordinate box spanned by the chart's bump supports.
    pub fn support_box(&self, chart: usize) -> (&[f64], &[f64]) {
        (&self.support[chart].0, &self.support[chart].1)
    }

    /// Smallest gap between a support box and its chart image boundary.
    pub fn support_margin(&self, chart: usize) -> f64 {
        let (img_lo, img_hi) = self.manifold.charts[chart].image();
        let (sup_lo, sup_hi) = (&self.support[chart].0, &self.support[chart].1);
        let mut m = f64::INFINITY;
        for i in 0..img_lo.len() {
            m = m.min(sup_lo[i] - img_lo[i]).min(img_hi[i] - sup_hi[i]);
        }
        m
    }
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Build and audit a partition with `bumps_per_axis` bumps per chart axis.
/// Audits run over `audit_n` seeded samples: chart coverage of at least two,
/// a positive bump total everywhere, and for every bump an ambient support
/// radius of at most half its distance to off-chart territory.
pub fn build_partition(
    manifold: &Manifold,
    bumps_per_axis: usize,
    audit_n: usize,
    seed: u64,
) -> Result<PartitionOfUnity> {
    if bumps_per_axis == 0 {
        return Err(Error::InvalidArgument("need at least one bump per axis".into()));
    }
    let mut bumps = Vec::with_capacity(manifold.charts.len());
    let mut support = Vec::with_capacity(manifold.charts.len());
    for chart in &manifold.charts {
        let (lo, hi) = chart.image();
        let (b, s) = place_bumps(&lo, &hi, bumps_per_axis);
        bumps.push(b);
        support.push(s);
    }

    let samples = manifold.sample(audit_n.max(64), seed);
    let cov = manifold.coverage(&samples)?;
    if cov < 2 {
        return Err(Error::Coverage {
            reason: format!("chart coverage {cov} below 2; overlaps too thin"),
        });
    }

    let mut part = PartitionOfUnity {
        manifold: manifold.clone(),
        bumps,
        nu_floor: 0.0,
        nu_ceil: 0.0,
        delta_min: f64::INFINITY,
        support,
    };

    let mut total_min = f64::INFINITY;
    let mut total_max = 0.0f64;
    for u in &samples {
        let t = part.total(u);
        total_min = total_min.min(t);
        total_max = total_max.max(t);
    }
    if total_min <= 0.0 {
        return Err(Error::Coverage {
            reason: "bump total vanishes at a sampled manifold point".into(),
        });
    }
    part.nu_floor = total_min / 2.0;
    part.nu_ceil = total_max;

    // Ambient audit: every point a bump sees must sit within half the
    // bump's distance to points outside the chart.
    for (j, chart) in manifold.charts.iter().enumerate() {
        let mut in_chart: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut off_chart: Vec<usize> = Vec::new();
        for (si, u) in samples.iter().enumerate() {
            match chart.forward(u) {
                Some(x) => in_chart.push((si, x)),
                None => off_chart.push(si),
            }
        }
        for bump in &part.bumps[j] {
            let p = chart.inverse(&bump.center);
            let delta = off_chart
                .iter()
                .map(|&si| dist_inf(&p, &samples[si]))
                .fold(f64::INFINITY, f64::min);
            for (si, x) in &in_chart {
                if bump.eval(x) > 0.0 {
                    let d = dist_inf(&p, &samples[*si]);
                    if d > delta / 2.0 {
                        return Err(Error::Margin(format!(
                            "bump at {:?} in chart {j} reaches ambient distance {d:.4}, over half its safety distance {delta:.4}",
                            bump.center
                        )));
                    }
                }
            }
            part.delta_min = part.delta_min.min(delta / 2.0);
        }
    }
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Chart;

    #[test]
    fn smoothstep_is_a_smooth_step() {
        assert_eq!(smoothstep(0.1), 0.0);
        assert_eq!(smoothstep(0.25), 0.0);
        assert_eq!(smoothstep(0.75), 1.0);
        assert_eq!(smoothstep(0.9), 1.0);
        let mid = smoothstep(0.5);
        assert!((mid - 0.5).abs() < 1e-12, "symmetric midpoint, got {mid}");
        let mut prev = -1.0;
        for i in 0..=100 {
            let v = smoothstep(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
        // Flat to high order at the seams.
        for (t, v) in [(0.25, 0.0), (0.75, 1.0)] {
            let h = 1e-4;
            let d = (smoothstep(t + h) - smoothstep(t - h)) / (2.0 * h);
            assert!(d.abs() < 1e-3, "seam slope {d} at {t}");
            let _ = v;
        }
    }

    #[test]
    fn smoothed_division_is_exact_division_in_range() {
        assert_eq!(smoothed_division(0.3, 0.9, 0.2, 2.0), 0.3 / 0.9);
        assert_eq!(smoothed_division(0.0, 1.0, 0.2, 2.0), 0.0);
        assert_eq!(smoothed_division(0.3, 0.04, 0.2, 2.0), 0.0);
        assert_eq!(smoothed_division(0.3, 0.0, 0.2, 2.0), 0.0);
        // Between floor/4 and floor/2 the value interpolates smoothly.
        let v = smoothed_division(0.1, 0.08, 0.2, 2.0);
        assert!(v > 0.0 && v < 0.1 / 0.08);
    }

    #[test]
    fn circle_partition_sums_to_one() {
        let m = Manifold::circle();
        let part = build_partition(&m, 6, 2048, 17).unwrap();
        assert!(part.delta_min > 0.0);
        for u in m.sample(512, 99) {
            let taus = part.tau_all(&u);
            let sum: f64 = taus.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum} at {u:?}");
            for t in taus {
                assert!((0.0..=1.0 + 1e-12).contains(&t));
            }
        }
    }

    #[test]
    fn supports_stay_inside_images_with_margin() {
        let m = Manifold::circle();
        let part = build_partition(&m, 6, 1024, 3).unwrap();
        for j in 0..m.charts.len() {
            let (img_lo, img_hi) = m.charts[j].image();
            let (sup_lo, sup_hi) = part.support_box(j);
            for i in 0..img_lo.len() {
                assert!(sup_lo[i] > img_lo[i]);
                assert!(sup_hi[i] < img_hi[i]);
            }
            assert!(part.support_margin(j) > 0.0);
            // Off the support box the chart weight numerator vanishes.
            let x = vec![img_lo[0] + 0.25 * (sup_lo[0] - img_lo[0])];
            assert_eq!(part.nu(j, &x), 0.0);
        }
    }

    #[test]
    fn ambient_and_coordinate_views_agree() {
        let m = Manifold::circle();
        let part = build_partition(&m, 6, 1024, 5).unwrap();
        for u in m.sample(256, 23) {
            for &j in &m.charts_containing(&u) {
                let x = m.charts[j].forward(&u).unwrap();
                let a = part.tau(j, &u);
                let b = part.tau_in_coords(j, &x);
                assert!((a - b).abs() < 1e-12, "chart {j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn embedded_partition_matches_planar_one() {
        let base = Manifold::circle();
        let emb = Manifold::circle_embedded(10, 42).unwrap();
        let pb = build_partition(&base, 6, 1024, 7).unwrap();
        let pe = build_partition(&emb, 6, 1024, 7).unwrap();
        let q = emb.charts[0].reduction_matrix().unwrap();
        for c in base.sample(128, 31) {
            // Lift the planar point through the embedding.
            let u: Vec<f64> = (0..10).map(|i| q[0][i] * c[0] + q[1][i] * c[1]).collect();
            for j in 0..4 {
                let a = pb.tau(j, &c);
                let b = pe.tau(j, &u);
                assert!((a - b).abs() < 1e-9, "chart {j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn torus_partition_sums_to_one() {
        let c = Manifold::circle();
        let t = Manifold::product(&c, &c).unwrap();
        let part = build_partition(&t, 4, 2048, 13).unwrap();
        for u in t.sample(256, 77) {
            let sum: f64 = part.tau_all(&u).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
        }
    }

    #[test]
    fn thin_atlases_are_rejected() {
        let m = Manifold::circle();
        let thin = Manifold::new(m.charts[..2].to_vec()).unwrap();
        match build_partition(&thin, 6, 1024, 1) {
            Err(Error::Coverage { .. }) => {}
            other => panic!("expected a coverage failure, got {other:?}"),
        }
    }

    #[test]
    fn coarse_bump_grids_still_audit_on_the_circle() {
        let m = Manifold::circle();
        for k in [2usize, 4, 12] {
            let part = build_partition(&m, k, 1024, 9).unwrap();
            assert!(part.nu_floor > 0.0);
        }
        // A single giant bump per chart reaches too far relative to its
        // safety distance.
        let arc = Chart::CircleArc {
            center: 0.0,
            half_width: std::f64::consts::PI * 0.95,
            offset: 1.0 + std::f64::consts::PI * 0.95,
        };
        let wide = Manifold::new(vec![
            arc.clone(),
            Chart::CircleArc {
                center: std::f64::consts::PI,
                half_width: std::f64::consts::PI * 0.95,
                offset: 1.0 + std::f64::consts::PI * 0.95,
            },
        ])
        .unwrap();
        assert!(build_partition(&wide, 1, 1024, 9).is_err());
    }
}
