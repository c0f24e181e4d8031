//! Quadratic fixed-point engine `x = y + L(x) + B(x,x)` and its two uses:
//! the Cauchy problem `u = S(t)u₀ - B(u,u) + F` in `X²` and the stationary
//! problem `w = -B_E(w,w) + G` in `PM²`.
//!
//! Smallness is never assumed. The engine measures the bilinear constant `η`
//! and the linear bound `λ` along the iteration and records whether
//! `4η‖y‖ < (1-λ)²` held.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PmError, Result};
use crate::forces::ForceSpec;
use crate::grid::{norm3, CVec3, FourierVectorField, GridSpec, Vec3};
use crate::norms::{pm_norm, xa_norm, NormBand, SpaceTimeField};
use crate::operators::{
    duhamel_force_all_with, duhamel_nonlinear_all, heat_propagate, leray_apply, leray_project,
    stationary_bilinear, DuhamelOptions, ForceQuadrature, TimeGrid,
};

/// Vector space operations needed by the fixed-point engine.
pub trait FixedPointSpace: Clone {
    /// `self + alpha·other`
    fn combine(&self, alpha: f64, other: &Self) -> Result<Self>;
}

impl FixedPointSpace for f64 {
    fn combine(&self, alpha: f64, other: &Self) -> Result<Self> {
        Ok(self + alpha * other)
    }
}

impl FixedPointSpace for FourierVectorField {
    fn combine(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.axpy(alpha, other)
    }
}

impl FixedPointSpace for SpaceTimeField {
    fn combine(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.axpy(alpha, other)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    /// Largest measured `‖B(x,x)‖/‖x‖²` and difference quotient.
    pub eta: f64,
    pub y_norm: f64,
    /// Largest measured `‖L(x)‖/‖x‖`.
    pub lambda: f64,
    /// `4η‖y‖ < (1-λ)²`
    pub smallness_ok: bool,
    /// `(1-λ)/(2η)`; absent when `η = 0`.
    pub uniqueness_radius: Option<f64>,
    /// `4η‖y‖/(1-λ)²`
    pub predicted_ratio: f64,
    /// Largest ratio of consecutive residuals above the roundoff floor.
    pub observed_ratio: f64,
    /// `‖x_{k+1} - x_k‖` per iteration.
    pub iteration_residuals: Vec<f64>,
    /// `‖x - y - L(x) - B(x,x)‖` for the returned `x`.
    pub a_posteriori_residual: f64,
    pub solution_norm: f64,
    pub tolerance: f64,
    pub converged: bool,
}

impl ContractionCertificate {
    /// `‖x‖ ≤ 2‖y‖/(1-λ)`
    pub fn solution_bound(&self) -> f64 {
        2.0 * self.y_norm / (1.0 - self.lambda)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

/// Iterate `x₀ = y`, `x_{k+1} = y + L(x_k) + B(x_k, x_k)` until
/// `‖x_{k+1} - x_k‖ ≤ tol`.
///
/// Three consecutive residual increases, or a non-finite residual, end the
/// iteration with [`PmError::Diverged`].
pub fn picard_fixed_point<T, L, B, N>(
    y: &T,
    apply_linear: Option<L>,
    apply_bilinear: B,
    norm: N,
    opts: PicardOptions,
) -> Result<(T, ContractionCertificate)>
where
    T: FixedPointSpace,
    L: Fn(&T) -> Result<T>,
    B: Fn(&T, &T) -> Result<T>,
    N: Fn(&T) -> Result<f64>,
{
    let y_norm = norm(y)?;
    if !y_norm.is_finite() {
        return Err(PmError::arg("the forcing term has infinite norm"));
    }
    let mut eta: f64 = 0.0;
    let mut lambda: f64 = 0.0;
    let mut residuals = Vec::new();
    let mut increases = 0;

    // one application of the map, recording η and λ samples
    let mut prev: Option<(T, T, f64)> = None; // (x, B(x,x), ‖x‖)
    let mut apply = |x: &T, eta: &mut f64, lambda: &mut f64| -> Result<T> {
        let xn = norm(x)?;
        let bx = apply_bilinear(x, x)?;
        if xn > 0.0 {
            *eta = eta.max(norm(&bx)? / (xn * xn));
        }
        if let Some((px, pb, pn)) = &prev {
            let dx = norm(&x.combine(-1.0, px)?)?;
            if dx > 0.0 {
                let db = norm(&bx.combine(-1.0, pb)?)?;
                *eta = eta.max(db / (dx * (xn + pn)));
            }
        }
        let mut next = y.combine(1.0, &bx)?;
        if let Some(lin) = &apply_linear {
            let lx = lin(x)?;
            if xn > 0.0 {
                *lambda = lambda.max(norm(&lx)? / xn);
            }
            next = next.combine(1.0, &lx)?;
        }
        prev = Some((x.clone(), bx, xn));
        Ok(next)
    };

    let certificate = |eta: f64, lambda: f64, residuals: &[f64], post: f64, sol: f64, converged: bool| {
        let gap = 1.0 - lambda;
        let floor = 1e-13 * sol.max(y_norm);
        let observed = residuals
            .windows(2)
            .filter(|w| w[0] > floor && w[1] > floor)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max);
        ContractionCertificate {
            eta,
            y_norm,
            lambda,
            smallness_ok: 4.0 * eta * y_norm < gap * gap,
            uniqueness_radius: (eta > 0.0).then(|| gap / (2.0 * eta)),
            predicted_ratio: 4.0 * eta * y_norm / (gap * gap),
            observed_ratio: observed,
            iteration_residuals: residuals.to_vec(),
            a_posteriori_residual: post,
            solution_norm: sol,
            tolerance: opts.tol,
            converged,
        }
    };

    let mut x = y.clone();
    for _ in 0..opts.max_iter {
        let next = apply(&x, &mut eta, &mut lambda)?;
        let r = norm(&next.combine(-1.0, &x)?)?;
        if !r.is_finite() {
            residuals.push(r);
            let sol = norm(&x).unwrap_or(f64::NAN);
            return Err(PmError::Diverged {
                iterations: residuals.len(),
                certificate: Box::new(certificate(eta, lambda, &residuals, f64::NAN, sol, false)),
            });
        }
        if let Some(&last) = residuals.last() {
            increases = if r > last { increases + 1 } else { 0 };
        }
        residuals.push(r);
        log::debug!("picard iteration {}: residual {r:.3e}, eta {eta:.3e}", residuals.len());
        x = next;
        if r <= opts.tol {
            let check = apply(&x, &mut eta, &mut lambda)?;
            let post = norm(&check.combine(-1.0, &x)?)?;
            let sol = norm(&x)?;
            let cert = certificate(eta, lambda, &residuals, post, sol, true);
            return Ok((x, cert));
        }
        if increases >= 3 {
            let sol = norm(&x)?;
            return Err(PmError::Diverged {
                iterations: residuals.len(),
                certificate: Box::new(certificate(eta, lambda, &residuals, f64::NAN, sol, false)),
            });
        }
    }
    let sol = norm(&x)?;
    let last = *residuals.last().unwrap_or(&f64::NAN);
    Err(PmError::MaxIterations {
        iterations: opts.max_iter,
        residual: last,
        certificate: Box::new(certificate(eta, lambda, &residuals, f64::NAN, sol, false)),
    })
}

/// No linear part.
pub type NoLinear<T> = fn(&T) -> Result<T>;

#[derive(Clone, Debug)]
pub struct CauchyOptions {
    pub picard: PicardOptions,
    /// Band for the `X²` norm; defaults to the grid's default band.
    pub band: Option<NormBand>,
    pub duhamel: DuhamelOptions,
    pub force_quadrature: ForceQuadrature,
}

impl Default for CauchyOptions {
    fn default() -> Self {
        CauchyOptions {
            picard: PicardOptions::default(),
            band: None,
            duhamel: DuhamelOptions::default(),
            force_quadrature: ForceQuadrature::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CauchySolution {
    pub field: SpaceTimeField,
    /// Leray-projected initial datum.
    pub datum: FourierVectorField,
    pub force: ForceSpec,
    /// `S(t)u₀` per node.
    pub heat_part: Vec<FourierVectorField>,
    /// `F(t)` per node.
    pub force_part: Vec<FourierVectorField>,
    pub certificate: ContractionCertificate,
}

impl CauchySolution {
    /// `u(t) - S(t)u₀ - F(t)` per node, i.e. `-B(u,u)(t)`.
    pub fn nonlinear_part(&self) -> Result<Vec<FourierVectorField>> {
        self.field
            .snapshots()
            .iter()
            .zip(self.heat_part.iter().zip(&self.force_part))
            .map(|(u, (s, f))| u.checked_sub(s)?.checked_sub(f))
            .collect()
    }
}

/// Fixed point of `u ↦ S(·)u₀ - B(u,u) + F` on the nodes of `timegrid`.
pub fn solve_cauchy(
    u0: &FourierVectorField,
    f: &ForceSpec,
    grid: &GridSpec,
    timegrid: &TimeGrid,
    tol: f64,
) -> Result<CauchySolution> {
    let opts = CauchyOptions {
        picard: PicardOptions {
            tol,
            ..Default::default()
        },
        ..Default::default()
    };
    solve_cauchy_with(u0, f, grid, timegrid, &opts)
}

pub fn solve_cauchy_with(
    u0: &FourierVectorField,
    f: &ForceSpec,
    grid: &GridSpec,
    timegrid: &TimeGrid,
    opts: &CauchyOptions,
) -> Result<CauchySolution> {
    if u0.grid() != grid {
        return Err(PmError::GridMismatch);
    }
    let band = opts.band.unwrap_or_else(|| NormBand::default_for(grid));
    let datum = leray_project(u0);
    let times = timegrid.nodes().to_vec();
    let heat_part = times
        .iter()
        .map(|&t| heat_propagate(&datum, t))
        .collect::<Result<Vec<_>>>()?;
    let force_part = duhamel_force_all_with(f, grid, &times, opts.force_quadrature)?;
    let y_snaps = heat_part
        .iter()
        .zip(&force_part)
        .map(|(s, fp)| s.checked_add(fp))
        .collect::<Result<Vec<_>>>()?;
    let y = SpaceTimeField::new(times.clone(), y_snaps)?;

    let duhamel = opts.duhamel;
    let bilinear = |a: &SpaceTimeField, b: &SpaceTimeField| -> Result<SpaceTimeField> {
        let snaps = duhamel_nonlinear_all(a, b, duhamel)?
            .into_iter()
            .map(|s| -&s)
            .collect();
        SpaceTimeField::new(times.clone(), snaps)
    };
    let norm = |x: &SpaceTimeField| xa_norm(x, 2.0, &band);
    let (field, certificate) = picard_fixed_point(&y, None::<NoLinear<SpaceTimeField>>, bilinear, norm, opts.picard)?;
    Ok(CauchySolution {
        field,
        datum,
        force: f.clone(),
        heat_part,
        force_part,
        certificate,
    })
}

#[derive(Clone, Debug)]
pub struct StationarySolution {
    pub field: FourierVectorField,
    /// Absent when the problem was posed directly by a lattice symbol.
    pub force: Option<ForceSpec>,
    /// `G = ℙ̂ĝ/|ξ|²`
    pub lift: FourierVectorField,
    pub certificate: ContractionCertificate,
    /// `‖w‖_{PM²} / ‖g‖_{PM⁰}` (zero for a zero force).
    pub bound_constant: f64,
}

/// Fixed point of `w ↦ -B_E(w,w) + G`.
pub fn solve_stationary(g: &ForceSpec, grid: &GridSpec, tol: f64) -> Result<StationarySolution> {
    solve_stationary_with(
        g,
        grid,
        PicardOptions {
            tol,
            ..Default::default()
        },
        None,
    )
}

pub fn solve_stationary_with(
    g: &ForceSpec,
    grid: &GridSpec,
    picard: PicardOptions,
    band: Option<NormBand>,
) -> Result<StationarySolution> {
    if g.is_time_dependent() {
        return Err(PmError::arg("the stationary problem needs a time-independent force"));
    }
    let mut sol = solve_stationary_symbol(&g.lattice_symbol(grid, 0.0)?, picard, band)?;
    sol.force = Some(g.clone());
    Ok(sol)
}

/// Stationary problem for a force given by its lattice symbol `ĝ`.
pub fn solve_stationary_symbol(
    g_hat: &FourierVectorField,
    picard: PicardOptions,
    band: Option<NormBand>,
) -> Result<StationarySolution> {
    let grid = g_hat.grid();
    let band = band.unwrap_or_else(|| NormBand::default_for(grid));
    let lift = g_hat
        .map_modes(|xi, v| {
            let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            if r2 == 0.0 {
                return [Complex64::new(0.0, 0.0); 3];
            }
            leray_apply(xi, v).map(|c| c / r2)
        })
        .with_divergence_free(true);
    let bilinear = |a: &FourierVectorField, b: &FourierVectorField| Ok(-&stationary_bilinear(a, b)?);
    let norm = |x: &FourierVectorField| pm_norm(x, 2.0, &band);
    let (field, certificate) = picard_fixed_point(&lift, None::<NoLinear<FourierVectorField>>, bilinear, norm, picard)?;
    let g0 = pm_norm(g_hat, 0.0, &band)?;
    let bound_constant = if g0 > 0.0 { certificate.solution_norm / g0 } else { 0.0 };
    Ok(StationarySolution {
        field: field.with_divergence_free(true),
        force: None,
        lift,
        certificate,
        bound_constant,
    })
}

/// `û₀(ξ) = ε ℙ̂(ξ)a/|ξ|²`, homogeneous of degree -2 and zero at `ξ = 0`.
pub fn homogeneous_datum(grid: &GridSpec, eps: f64, a: Vec3) -> FourierVectorField {
    FourierVectorField::from_symbol(*grid, |xi| {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if r2 == 0.0 {
            return [Complex64::new(0.0, 0.0); 3];
        }
        let v = [0, 1, 2].map(|i| Complex64::new(eps * a[i] / r2, 0.0));
        leray_apply(xi, v)
    })
    .with_divergence_free(true)
}

/// Random real divergence-free field with amplitudes supported in `band`.
/// The largest mode amplitude equals `amplitude`.
///
/// Each wavevector draws from its own stream keyed by `(seed, k)`, so the same
/// seed yields the same field on every lattice of the box that retains the band.
pub fn random_band_limited(grid: &GridSpec, band: &NormBand, amplitude: f64, seed: u64) -> FourierVectorField {
    let table = grid.mode_table();
    let draw = |k: [i64; 3]| -> CVec3 {
        let mut rng = ChaCha8Rng::seed_from_u64(mode_seed(seed, k));
        [0; 3].map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    };
    let values: Vec<CVec3> = (0..grid.mode_count())
        .map(|p| {
            if !band.contains(norm3(table.xi_of(p))) {
                return [Complex64::new(0.0, 0.0); 3];
            }
            let k = table.k_of(p);
            let (a, b) = (draw(k), draw([-k[0], -k[1], -k[2]]));
            let v = [0, 1, 2].map(|i| (a[i] + b[i].conj()) * 0.5);
            leray_apply(table.xi_of(p), v)
        })
        .collect();
    let f = FourierVectorField::from_modes(*grid, values);
    let m = f.max_amplitude();
    let s = if m > 0.0 { amplitude / m } else { 0.0 };
    f.scale(s).with_divergence_free(true)
}

fn mode_seed(seed: u64, k: [i64; 3]) -> u64 {
    // splitmix64 finalizer over the packed wavevector
    let mut z = seed ^ ((k[0] as u64) << 42 ^ (k[1] as u64 & 0x1f_ffff) << 21 ^ (k[2] as u64 & 0x1f_ffff));
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_quadratic_oracle() {
        let y = 0.1;
        let (x, cert) = picard_fixed_point(
            &y,
            None::<NoLinear<f64>>,
            |a: &f64, b: &f64| Ok(a * b),
            |v: &f64| Ok(v.abs()),
            PicardOptions {
                tol: 1e-14,
                max_iter: 200,
            },
        )
        .unwrap();
        let exact = (1.0 - (1.0f64 - 0.4).sqrt()) / 2.0;
        assert_relative_eq!(x, exact, max_relative = 1e-12);
        assert!(cert.smallness_ok);
        assert!(cert.observed_ratio <= cert.predicted_ratio + 0.05);
        assert!(cert.a_posteriori_residual <= 10.0 * 1e-14);
    }

    #[test]
    fn trivial_maps_return_y() {
        let (x, cert) = picard_fixed_point(
            &0.3,
            None::<NoLinear<f64>>,
            |_: &f64, _: &f64| Ok(0.0),
            |v: &f64| Ok(v.abs()),
            PicardOptions::default(),
        )
        .unwrap();
        assert_eq!(x, 0.3);
        assert_eq!(cert.iteration_residuals, vec![0.0]);
        assert_eq!(cert.uniqueness_radius, None);
    }

    #[test]
    fn large_data_is_flagged() {
        let err = picard_fixed_point(
            &0.3,
            None::<NoLinear<f64>>,
            |a: &f64, b: &f64| Ok(a * b),
            |v: &f64| Ok(v.abs()),
            PicardOptions::default(),
        )
        .unwrap_err();
        match err {
            PmError::Diverged { certificate, .. } | PmError::MaxIterations { certificate, .. } => {
                assert!(!certificate.smallness_ok)
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn linear_part_is_measured() {
        let (x, cert) = picard_fixed_point(
            &0.05,
            Some(|a: &f64| Ok(0.5 * a)),
            |a: &f64, b: &f64| Ok(a * b),
            |v: &f64| Ok(v.abs()),
            PicardOptions {
                tol: 1e-14,
                max_iter: 200,
            },
        )
        .unwrap();
        // x = 0.05 + 0.5x + x²
        let exact = (0.5 - (0.25f64 - 0.2).sqrt()) / 2.0;
        assert_relative_eq!(x, exact, max_relative = 1e-11);
        assert_relative_eq!(cert.lambda, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn random_fields_are_real_and_solenoidal() {
        let g = GridSpec::new(16, 8.0, 2.0 / 3.0).unwrap();
        let f = random_band_limited(&g, &NormBand::default_for(&g), 1.0, 7);
        assert!(f.hermitian_defect() < 1e-15);
        assert!(f.max_divergence_ratio() < 1e-12);
        assert_relative_eq!(f.max_amplitude(), 1.0, max_relative = 1e-14);
    }
}
