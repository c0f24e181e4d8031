//! PM^a, X^a, L^q and weak-L^q norms of lattice fields.
//!
//! The essential supremum over ℝ³ in `‖u‖_{PM^a} = esssup |ξ|^a |û(ξ)|` is
//! replaced by a lattice maximum over an annulus [`NormBand`] in ξ-space;
//! the default band `[2Δξ, 0.9·ξ_max]` keeps away from the mean mode and the
//! dealiasing edge. Vector magnitudes are Euclidean norms of the three complex
//! amplitudes.
//!
//! L^q norms of singular fields only make sense on bounded regions, so the
//! physical-space norms always take a [`Region`].

use serde::{Deserialize, Serialize};

use crate::error::{PmError, Result};
use crate::grid::{cnorm3, norm3, to_physical, FourierVectorField, GridSpec, PhysicalVectorField, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBand {
    pub xi_min: f64,
    pub xi_max: f64,
}

impl NormBand {
    pub fn new(xi_min: f64, xi_max: f64) -> Result<Self> {
        if !(xi_min >= 0.0) || !(xi_max > xi_min) {
            return Err(PmError::arg(format!(
                "norm band needs 0 <= xi_min < xi_max, got [{xi_min}, {xi_max}]"
            )));
        }
        Ok(NormBand { xi_min, xi_max })
    }

    /// `[2Δξ, 0.9·ξ_max]`
    pub fn default_for(grid: &GridSpec) -> Self {
        NormBand {
            xi_min: 2.0 * grid.wavenumber_spacing(),
            xi_max: 0.9 * grid.xi_max(),
        }
    }

    pub fn contains(&self, xi_abs: f64) -> bool {
        xi_abs > 0.0 && xi_abs >= self.xi_min && xi_abs <= self.xi_max
    }

    /// Sub-band scaled by `s` in ξ.
    pub fn scaled(&self, s: f64) -> Self {
        NormBand {
            xi_min: self.xi_min * s,
            xi_max: self.xi_max * s,
        }
    }

    pub(crate) fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.xi_max > grid.xi_max() * (1.0 + 1e-12) {
            return Err(PmError::arg(format!(
                "band edge {} exceeds the retained radius {}",
                self.xi_max,
                grid.xi_max()
            )));
        }
        Ok(())
    }
}

/// Snapshots `u(·, t_m)` on a shared grid at strictly increasing positive times.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    times: Vec<f64>,
    snapshots: Vec<FourierVectorField>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, snapshots: Vec<FourierVectorField>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(PmError::arg("need one snapshot per time, at least one"));
        }
        if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PmError::arg("times must be positive and strictly increasing"));
        }
        let grid = *snapshots[0].grid();
        if snapshots.iter().any(|s| *s.grid() != grid) {
            return Err(PmError::GridMismatch);
        }
        Ok(SpaceTimeField { times, snapshots })
    }

    /// Same field at every time.
    pub fn constant(times: Vec<f64>, field: FourierVectorField) -> Result<Self> {
        let snapshots = vec![field; times.len()];
        Self::new(times, snapshots)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[FourierVectorField] {
        &self.snapshots
    }

    pub fn snapshot(&self, i: usize) -> &FourierVectorField {
        &self.snapshots[i]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        self.snapshots[0].grid()
    }

    /// Index of the node equal to `t` (relative tolerance 1e-12).
    pub fn node_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * s.abs().max(t.abs()))
            .ok_or(PmError::NotANode(t))
    }

    pub fn at_time(&self, t: f64) -> Result<&FourierVectorField> {
        Ok(&self.snapshots[self.node_index(t)?])
    }

    /// `self + alpha·other`, snapshot by snapshot.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.times != other.times {
            return Err(PmError::arg("space-time fields live on different time grids"));
        }
        let snapshots = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| a.axpy(alpha, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpaceTimeField {
            times: self.times.clone(),
            snapshots,
        })
    }

    pub fn map_snapshots<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(f64, &FourierVectorField) -> Result<FourierVectorField>,
    {
        let snapshots = self
            .times
            .iter()
            .zip(&self.snapshots)
            .map(|(&t, s)| f(t, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), snapshots)
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<FourierVectorField>) {
        (self.times, self.snapshots)
    }
}

/// `max_{ξ ∈ band} |ξ|^a |û(ξ)|`, zero mode excluded.
pub fn pm_norm(field: &FourierVectorField, a: f64, band: &NormBand) -> Result<f64> {
    band.check(field.grid())?;
    let table = field.grid().mode_table();
    let mut best: Option<f64> = None;
    for p in 0..field.len() {
        let r = norm3(table.xi_of(p));
        if !band.contains(r) {
            continue;
        }
        let weight = if a == 0.0 { 1.0 } else { r.powf(a) };
        let v = weight * cnorm3(&field.mode(p));
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.ok_or(PmError::EmptyBand {
        xi_min: band.xi_min,
        xi_max: band.xi_max,
    })
}

/// `max_m ‖u(t_m)‖_{PM^a}`.
pub fn xa_norm(field: &SpaceTimeField, a: f64, band: &NormBand) -> Result<f64> {
    field
        .snapshots()
        .iter()
        .map(|s| pm_norm(s, a, band))
        .try_fold(0.0, |acc, v| Ok(f64::max(acc, v?)))
}

/// Physical-space integration region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// `r_min ≤ |x - center| ≤ r_max`, distances taken to the nearest periodic image.
    Annulus { center: Vec3, r_min: f64, r_max: f64 },
    /// Every collocation point.
    WholeBox,
}

impl Region {
    pub fn annulus(center: Vec3, r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min >= 0.0) || !(r_max > r_min) {
            return Err(PmError::Region(format!(
                "annulus needs 0 <= r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        Ok(Region::Annulus { center, r_min, r_max })
    }

    /// Annulus around the origin (the location of `δ₀`).
    pub fn origin_annulus(r_min: f64, r_max: f64) -> Result<Self> {
        Self::annulus([0.0; 3], r_min, r_max)
    }

    /// `[L/32, L/8]` around the origin, where the crate's singular forces sit.
    pub fn default_at_origin(grid: &GridSpec) -> Self {
        let l = grid.box_length();
        Region::Annulus {
            center: [0.0; 3],
            r_min: l / 32.0,
            r_max: l / 8.0,
        }
    }

    /// `[L/32, L/8]` around the box center.
    pub fn default_for(grid: &GridSpec) -> Self {
        let l = grid.box_length();
        Region::Annulus {
            center: grid.center(),
            r_min: l / 32.0,
            r_max: l / 8.0,
        }
    }

    fn check(&self, grid: &GridSpec) -> Result<()> {
        if let Region::Annulus { r_max, .. } = *self {
            if r_max > grid.box_length() / 2.0 * (1.0 + 1e-12) {
                return Err(PmError::Region(format!(
                    "outer radius {r_max} exceeds half the box length {}",
                    grid.box_length() / 2.0
                )));
            }
        }
        Ok(())
    }

    /// Collocation indices inside the region.
    pub fn points(&self, grid: &GridSpec) -> Result<Vec<usize>> {
        self.check(grid)?;
        let all = 0..grid.point_count();
        match *self {
            Region::WholeBox => Ok(all.collect()),
            Region::Annulus { center, r_min, r_max } => {
                let n = grid.n();
                let h = grid.cell_size();
                let l = grid.box_length();
                let wrap = |d: f64| d - l * (d / l).round();
                Ok(all
                    .filter(|&idx| {
                        let x = [
                            (idx / (n * n)) as f64 * h,
                            ((idx / n) % n) as f64 * h,
                            (idx % n) as f64 * h,
                        ];
                        let r = norm3([wrap(x[0] - center[0]), wrap(x[1] - center[1]), wrap(x[2] - center[2])]);
                        r >= r_min && r <= r_max
                    })
                    .collect())
            }
        }
    }
}

/// `(Σ |u(x)|^q (L/n)³)^{1/q}` over the lattice points of `region`.
pub fn lq_norm(field: &PhysicalVectorField, q: f64, region: &Region) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(PmError::arg(format!("q must lie in [1, inf), got {q}")));
    }
    let cell = field.grid().cell_size().powi(3);
    let sum: f64 = region
        .points(field.grid())?
        .into_iter()
        .map(|idx| norm3(field.value(idx)).powf(q))
        .sum();
    Ok((sum * cell).powf(1.0 / q))
}

/// `sup_λ λ·|{|u| > λ} ∩ region|^{1/q}` on the lattice.
///
/// Sorting the magnitudes descending, the supremum is attained as λ
/// approaches a sample value from below: `max_i v_(i) (i·h³)^{1/q}`.
pub fn weak_lq_norm(field: &PhysicalVectorField, q: f64, region: &Region) -> Result<f64> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(PmError::arg(format!("q must lie in (1, inf), got {q}")));
    }
    let cell = field.grid().cell_size().powi(3);
    let mut mags: Vec<f64> = region
        .points(field.grid())?
        .into_iter()
        .map(|idx| norm3(field.value(idx)))
        .collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags
        .iter()
        .enumerate()
        .map(|(i, &v)| v * ((i + 1) as f64 * cell).powf(1.0 / q))
        .fold(0.0, f64::max))
}

/// Which embedding an exponent pair falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpolationRange {
    /// `b ∈ [0,2)`, `q ∈ (3/(3-b), 3)`, `q ≥ 2`
    BelowCritical,
    /// `b = 2+δ`, `δ ∈ (0,1)`, `q ∈ (3, 3/(1-δ))`
    AboveCritical,
}

pub fn interpolation_range(b: f64, q: f64) -> Result<InterpolationRange> {
    if (0.0..2.0).contains(&b) && q > 3.0 / (3.0 - b) && q < 3.0 && q >= 2.0 {
        return Ok(InterpolationRange::BelowCritical);
    }
    let delta = b - 2.0;
    if delta > 0.0 && delta < 1.0 && q > 3.0 && q < 3.0 / (1.0 - delta) {
        return Ok(InterpolationRange::AboveCritical);
    }
    Err(PmError::arg(format!(
        "(b, q) = ({b}, {q}) lies outside both interpolation ranges"
    )))
}

/// `θ = (q-3)/(q(b-2))`, the weight on the PM^b factor.
pub fn interpolation_exponent(b: f64, q: f64) -> f64 {
    (q - 3.0) / (q * (b - 2.0))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterpolationGap {
    pub ratio: f64,
    pub lq: f64,
    pub pm2: f64,
    pub pmb: f64,
    pub theta: f64,
    pub range: InterpolationRange,
}

/// `‖w‖_q / (‖w‖_{PM²}^{1-θ} ‖w‖_{PM^b}^θ)`.
pub fn interpolation_gap(
    field: &FourierVectorField,
    b: f64,
    q: f64,
    band: &NormBand,
    region: &Region,
) -> Result<InterpolationGap> {
    let range = interpolation_range(b, q)?;
    let theta = interpolation_exponent(b, q);
    let pm2 = pm_norm(field, 2.0, band)?;
    let pmb = pm_norm(field, b, band)?;
    let lq = lq_norm(&to_physical(field), q, region)?;
    let denom = pm2.powf(1.0 - theta) * pmb.powf(theta);
    Ok(InterpolationGap {
        ratio: if denom > 0.0 { lq / denom } else { 0.0 },
        lq,
        pm2,
        pmb,
        theta,
        range,
    })
}
