//! Singular and regular external forces, described by their Fourier symbols.
//!
//! Every force is evaluated symbol-side only; there is no physical-space
//! mollification of Dirac masses. Descriptors serialize to tagged JSON:
//!
//! ```json
//! {"kind": "moving_dirac", "beta": [1, 0, 0],
//!  "trajectory": {"type": "sqrt_drift", "origin": [0, 0, 0], "direction": [1, 0, 0]}}
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PmError, Result};
use crate::grid::{cnorm3, norm3, CVec3, FourierVectorField, GridSpec, Vec3, FOURIER_NORM};
use crate::norms::NormBand;
use crate::operators::TimeGrid;
use crate::quadrature::{integrate, integrate_pieces, integrate_to_infinity, QuadOptions};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `4π·2^{-3/2}π^{-1/2}`, the coefficient of `i c sgn ξ₃` in the log-line symbol.
pub const LOG_LINE_COEFF: f64 = 4.0 * PI * 0.353_553_390_593_273_8 * 0.564_189_583_547_756_3;

/// Curve `γ(t)` carrying a moving singularity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// `γ(t) = origin + t·velocity`
    Linear { origin: Vec3, velocity: Vec3 },
    /// `γ(t) = origin + √t·direction`
    SqrtDrift { origin: Vec3, direction: Vec3 },
    /// Piecewise-linear through `(times[i], points[i])`, constant after the last sample.
    Table { times: Vec<f64>, points: Vec<Vec3> },
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        match self {
            TrajectorySpec::Linear { origin, velocity } => {
                if !finite(origin) || !finite(velocity) {
                    return Err(PmError::arg("trajectory coordinates must be finite"));
                }
            }
            TrajectorySpec::SqrtDrift { origin, direction } => {
                if !finite(origin) || !finite(direction) {
                    return Err(PmError::arg("trajectory coordinates must be finite"));
                }
            }
            TrajectorySpec::Table { times, points } => {
                if times.len() < 2 || times.len() != points.len() {
                    return Err(PmError::arg("trajectory table needs matching times and points, at least two"));
                }
                if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(PmError::arg("trajectory table times must start at 0 and increase"));
                }
                if !points.iter().all(finite) {
                    return Err(PmError::arg("trajectory coordinates must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn position(&self, t: f64) -> Vec3 {
        match self {
            TrajectorySpec::Linear { origin, velocity } => {
                [0, 1, 2].map(|i| origin[i] + t * velocity[i])
            }
            TrajectorySpec::SqrtDrift { origin, direction } => {
                let s = t.max(0.0).sqrt();
                [0, 1, 2].map(|i| origin[i] + s * direction[i])
            }
            TrajectorySpec::Table { times, points } => {
                let last = times.len() - 1;
                if t >= times[last] {
                    return points[last];
                }
                let j = times.partition_point(|&s| s <= t).max(1) - 1;
                let w = (t - times[j]) / (times[j + 1] - times[j]);
                [0, 1, 2].map(|i| points[j][i] + w * (points[j + 1][i] - points[j][i]))
            }
        }
    }

    /// Declared `(α, H)` with `|γ(t) - γ(s)| ≤ H|t - s|^α`.
    pub fn holder(&self) -> (f64, f64) {
        match self {
            TrajectorySpec::Linear { velocity, .. } => (1.0, norm3(*velocity)),
            TrajectorySpec::SqrtDrift { direction, .. } => (0.5, norm3(*direction)),
            TrajectorySpec::Table { times, points } => {
                let slope = times
                    .windows(2)
                    .zip(points.windows(2))
                    .map(|(t, p)| norm3([0, 1, 2].map(|i| p[1][i] - p[0][i])) / (t[1] - t[0]))
                    .fold(0.0, f64::max);
                (1.0, slope)
            }
        }
    }

    /// Check the declared Hölder bound on pairs from `samples`.
    pub fn spot_check(&self, samples: &[f64]) -> Result<()> {
        let (alpha, h) = self.holder();
        for (i, &t) in samples.iter().enumerate() {
            for &s in &samples[i + 1..] {
                let a = self.position(t);
                let b = self.position(s);
                let d = norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
                let bound = h * (t - s).abs().powf(alpha);
                if d > bound * (1.0 + 1e-12) + 1e-14 {
                    return Err(PmError::arg(format!(
                        "trajectory violates its Hölder bound between t = {s} and t = {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Tagged description of an external force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceSpec {
    Zero,
    /// `β δ₀`
    Dirac { beta: Vec3 },
    /// `β δ_{γ(t)}`
    MovingDirac { beta: Vec3, trajectory: TrajectorySpec },
    /// `(4πc ∫ log|x₃| ∂₃φ(0,0,x₃) dx₃ - b φ(0)) e₃`
    LogLine { c: f64, b: f64 },
    /// `χ(|ξ|)(2π)^{-3/2} Σ a_j e^{-iξ·c_j}` with a smooth bump `χ` supported in `(xi_min, xi_max)`.
    BandLimited {
        xi_min: f64,
        xi_max: f64,
        amplitudes: Vec<Vec3>,
        centers: Vec<Vec3>,
    },
    /// `g(x) = Σ m_j (2πs²)^{-3/2} e^{-|x - c_j|²/(2s²)}`, an integrable force with
    /// mass `β = Σ m_j`.
    IntegrableMoment { width: f64, masses: Vec<Vec3>, centers: Vec<Vec3> },
}

impl ForceSpec {
    pub fn dirac(beta: Vec3) -> Self {
        ForceSpec::Dirac { beta }
    }

    pub fn gaussian(width: f64, mass: Vec3) -> Self {
        ForceSpec::IntegrableMoment {
            width,
            masses: vec![mass],
            centers: vec![[0.0; 3]],
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, ForceSpec::MovingDirac { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ForceSpec::MovingDirac { trajectory, .. } => trajectory.validate(),
            ForceSpec::BandLimited {
                xi_min,
                xi_max,
                amplitudes,
                centers,
            } => {
                if !(*xi_min >= 0.0 && xi_max > xi_min) {
                    return Err(PmError::arg("band-limited force needs 0 <= xi_min < xi_max"));
                }
                if amplitudes.len() != centers.len() {
                    return Err(PmError::arg("band-limited force needs one center per amplitude"));
                }
                Ok(())
            }
            ForceSpec::IntegrableMoment { width, masses, centers } => {
                if !(*width > 0.0) {
                    return Err(PmError::arg("integrable force needs a positive width"));
                }
                if masses.len() != centers.len() || masses.is_empty() {
                    return Err(PmError::arg("integrable force needs one center per mass"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `∫ g` for forces with a total mass (`None` for the log line and band-limited kinds).
    pub fn mass(&self) -> Option<Vec3> {
        match self {
            ForceSpec::Zero => Some([0.0; 3]),
            ForceSpec::Dirac { beta } | ForceSpec::MovingDirac { beta, .. } => Some(*beta),
            ForceSpec::IntegrableMoment { masses, .. } => {
                Some(masses.iter().fold([0.0; 3], |acc, m| [0, 1, 2].map(|i| acc[i] + m[i])))
            }
            _ => None,
        }
    }

    /// `f̂(ξ, t)`.
    pub fn symbol(&self, xi: Vec3, t: f64) -> Result<CVec3> {
        if self.is_time_dependent() && t < 0.0 {
            return Err(PmError::NegativeTime(t));
        }
        Ok(self.symbol_unchecked(xi, t))
    }

    pub(crate) fn symbol_unchecked(&self, xi: Vec3, t: f64) -> CVec3 {
        let real = |v: Vec3, s: f64| [0, 1, 2].map(|i| Complex64::new(v[i] * s, 0.0));
        let phase = |c: &Vec3| Complex64::from_polar(1.0, -(xi[0] * c[0] + xi[1] * c[1] + xi[2] * c[2]));
        match self {
            ForceSpec::Zero => [ZERO; 3],
            ForceSpec::Dirac { beta } => real(*beta, FOURIER_NORM),
            ForceSpec::MovingDirac { beta, trajectory } => {
                let e = phase(&trajectory.position(t)) * FOURIER_NORM;
                [0, 1, 2].map(|i| e * beta[i])
            }
            ForceSpec::LogLine { c, b } => {
                let s = sgn(xi[2]);
                [ZERO, ZERO, Complex64::new(-b * FOURIER_NORM, LOG_LINE_COEFF * c * s)]
            }
            ForceSpec::BandLimited {
                xi_min,
                xi_max,
                amplitudes,
                centers,
            } => {
                let chi = band_bump(norm3(xi), *xi_min, *xi_max);
                if chi == 0.0 {
                    return [ZERO; 3];
                }
                let mut out = [ZERO; 3];
                for (a, c) in amplitudes.iter().zip(centers) {
                    let e = phase(c) * (chi * FOURIER_NORM);
                    for i in 0..3 {
                        out[i] += e * a[i];
                    }
                }
                out
            }
            ForceSpec::IntegrableMoment { width, masses, centers } => {
                let env = (-0.5 * width * width * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])).exp() * FOURIER_NORM;
                let mut out = [ZERO; 3];
                for (m, c) in masses.iter().zip(centers) {
                    let e = phase(c) * env;
                    for i in 0..3 {
                        out[i] += e * m[i];
                    }
                }
                out
            }
        }
    }

    /// Symbol sampled on the retained cube of `grid` at time `t`.
    pub fn lattice_symbol(&self, grid: &GridSpec, t: f64) -> Result<FourierVectorField> {
        self.validate()?;
        if self.is_time_dependent() && t < 0.0 {
            return Err(PmError::NegativeTime(t));
        }
        if let ForceSpec::MovingDirac { beta, trajectory } = self {
            // e^{-iξ·γ} factors over the three axes
            let table = grid.mode_table();
            let g = trajectory.position(t);
            let axis: Vec<[Complex64; 3]> = table
                .xi
                .iter()
                .map(|&x| [0, 1, 2].map(|i| Complex64::from_polar(1.0, -x * g[i])))
                .collect();
            let values: Vec<CVec3> = (0..grid.mode_count())
                .into_par_iter()
                .map(|p| {
                    let (a, b, c) = table.split(p);
                    let e = axis[a][0] * axis[b][1] * axis[c][2] * FOURIER_NORM;
                    [0, 1, 2].map(|i| e * beta[i])
                })
                .collect();
            return Ok(FourierVectorField::from_modes(*grid, values));
        }
        Ok(FourierVectorField::from_symbol(*grid, |xi| self.symbol_unchecked(xi, t)))
    }

    /// `λ³f(λx, λ²t)`; only defined for the Dirac kinds, for which the symbol is invariant
    /// up to the rescaled trajectory.
    pub fn rescaled(&self, lambda: f64) -> Result<ForceSpec> {
        match self {
            ForceSpec::Zero => Ok(ForceSpec::Zero),
            ForceSpec::Dirac { beta } => Ok(ForceSpec::Dirac { beta: *beta }),
            _ => Err(PmError::arg(format!("rescaling by {lambda} is only implemented for the static kinds"))),
        }
    }
}

/// `sgn(x)` with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Smooth bump equal to 1 at the band center and vanishing outside `(lo, hi)`.
pub fn band_bump(r: f64, lo: f64, hi: f64) -> f64 {
    let s = (2.0 * r - lo - hi) / (hi - lo);
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// `sup_{ξ ∈ band, t ∈ nodes} |f̂(ξ,t)|` on the lattice of `grid`.
pub fn force_pm0_norm(f: &ForceSpec, band: &NormBand, grid: &GridSpec, timegrid: &TimeGrid) -> Result<f64> {
    let times: Vec<f64> = if f.is_time_dependent() {
        timegrid.nodes().to_vec()
    } else {
        vec![0.0]
    };
    let mut best: f64 = 0.0;
    for t in times {
        best = best.max(crate::norms::pm_norm(&f.lattice_symbol(grid, t)?, 0.0, band)?);
    }
    Ok(best)
}

/// `∫ e^{-ix·ξ}|x|^{-1-b} dx = A(b)|ξ|^{b-2}`.
pub fn riesz_fourier_coefficient(b: f64) -> f64 {
    PI.powf(1.5) * 2f64.powf(2.0 - b) * gamma((2.0 - b) / 2.0) / gamma((1.0 + b) / 2.0)
}

/// `K(b) = ∫ ||ω - e|^{-1-b} - |ω|^{-1-b}| dω` for a unit vector `e`, `b ∈ (1,2)`.
///
/// The angular integral is done in closed form: the two kernels cross on the
/// plane `ω·e = 1/2`. The radial integral is split at `ρ = 1/2`, `1`, `2`;
/// the `ρ^{1-b}` behaviour at the origin, `|1-ρ|^{1-b}` at the unit sphere
/// and `ρ^{-b}` at infinity are removed by power substitutions.
pub fn kernel_difference_integral(b: f64) -> Result<f64> {
    if !(b > 1.0 && b < 2.0) {
        return Err(PmError::arg(format!("kernel difference needs b in (1,2), got {b}")));
    }
    let e = (1.0 - b) / 2.0;
    let a = 1.0 - b;
    // Σ_{k≥1} 2·binom(a, 2k) ε^{2k} = (1-ε)^a + (1+ε)^a - 2
    let second_difference = move |eps: f64| -> f64 {
        let mut sum = 0.0;
        let mut binom = 1.0;
        let mut pow = 1.0;
        for k in 1..40 {
            let j = 2 * k;
            binom *= (a - (j - 2) as f64) * (a - (j - 1) as f64) / ((j - 1) as f64 * j as f64);
            pow *= eps * eps;
            let term = 2.0 * binom * pow;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    };
    // `d = 1 - ρ` is passed separately so it stays exact next to the unit sphere
    let angular = move |rho: f64, d: f64| -> f64 {
        if rho > 10.0 {
            return rho.powf(-2.0 - b) + rho.powf(-b) / (b - 1.0) * second_difference(1.0 / rho);
        }
        // F(μ) = w(μ)^{(1-b)/2} / (ρ(b-1)), w(μ) = 1 + ρ² - 2ρμ
        let f = |w: f64| w.powf(e) / (rho * (b - 1.0));
        let r = rho.powf(-1.0 - b);
        let f_plus = f(d * d);
        let f_minus = f((1.0 + rho) * (1.0 + rho));
        if rho < 0.5 {
            2.0 * r - (f_plus - f_minus)
        } else {
            let f_star = f(rho * rho);
            rho.powf(-2.0 - b) - 2.0 * f_star + f_plus + f_minus
        }
    };
    let radial_at = move |rho: f64, d: f64| rho * rho * angular(rho, d);
    let radial = move |rho: f64| radial_at(rho, 1.0 - rho);
    // K(b) is of order one, so a small absolute floor keeps bisection away from
    // the underflow of the substitutions below
    let opts = QuadOptions::tol(1e-15, 1e-11);
    let k = 2.0 - b;

    // ρ = ½ v^{1/k}
    let origin = integrate(
        |v: f64| {
            let s = v.powf(1.0 / k);
            if s == 0.0 {
                return 0.0;
            }
            radial(0.5 * s) * 0.5 * s.powf(1.0 - k) / k
        },
        0.0,
        1.0,
        opts,
    )?;
    // ρ = 1 ∓ v^{1/k}
    let near = |sign: f64| {
        move |v: f64| {
            let s = v.powf(1.0 / k);
            if s == 0.0 {
                return 0.0;
            }
            radial_at(1.0 + sign * s, -sign * s) * s.powf(1.0 - k) / k
        }
    };
    let below = integrate(near(-1.0), 0.0, 0.5f64.powf(k), opts)?;
    let above = integrate(near(1.0), 0.0, 1.0, opts)?;
    // ρ = 2 s^{-1/(b-1)} up to R, then the expansion
    // ρ²·angular = (1+b)ρ^{-b} + 2·binom(a,4)/(b-1)·ρ^{-2-b} + O(ρ^{-4-b})
    const R: f64 = 1e4;
    let eb = b - 1.0;
    let body = integrate(
        |s: f64| {
            let rho = 2.0 * s.powf(-1.0 / eb);
            radial(rho) * 2.0 / eb * s.powf(-1.0 / eb - 1.0)
        },
        (2.0 / R).powf(eb),
        1.0,
        opts,
    )?;
    let binom4 = a * (a - 1.0) * (a - 2.0) * (a - 3.0) / 24.0;
    let far = (1.0 + b) * R.powf(-eb) / eb + 2.0 * binom4 / eb * R.powf(-1.0 - b) / (1.0 + b);
    let tail = body.value + far;
    Ok(2.0 * PI * (origin.value + below.value + above.value + tail))
}

/// Constant of the moment estimate, read off from its proof: `K(b)/A(b)`.
pub fn moment_constant(b: f64) -> Result<f64> {
    Ok(kernel_difference_integral(b)? / riesz_fourier_coefficient(b))
}

/// `∫ |x|^{2-b} |g(x)| dx` by spherical quadrature.
pub fn moment_integral(g: &ForceSpec, b: f64) -> Result<f64> {
    let ForceSpec::IntegrableMoment { width, masses, centers } = g else {
        return Err(PmError::arg("moment integral needs an integrable_moment force"));
    };
    g.validate()?;
    let s2 = width * width;
    let norm = (2.0 * PI * s2).powf(-1.5);
    let density = |x: Vec3| -> f64 {
        let mut v = [0.0; 3];
        for (m, c) in masses.iter().zip(centers) {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
            let w = norm * (-0.5 * d2 / s2).exp();
            for i in 0..3 {
                v[i] += w * m[i];
            }
        }
        norm3(v)
    };
    let mass: f64 = masses.iter().map(|m| norm3(*m)).sum();
    // absolute floors scaled to the force; a bare relative test stalls in the underflowing tail
    let opts = QuadOptions::tol(1e-13 * mass * norm, 1e-9);
    let radial_opts = QuadOptions::tol(1e-13 * mass, 1e-9);
    let reach = centers.iter().map(|c| norm3(*c)).fold(0.0, f64::max) + 12.0 * width;
    let shell = |rho: f64| -> f64 {
        integrate(
            |mu: f64| {
                let st = (1.0 - mu * mu).max(0.0).sqrt();
                integrate(
                    |phi: f64| density([rho * mu, rho * st * phi.cos(), rho * st * phi.sin()]),
                    0.0,
                    2.0 * PI,
                    opts,
                )
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
            },
            -1.0,
            1.0,
            opts,
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
    };
    let radial = |rho: f64| rho.powf(4.0 - b) * shell(rho);
    let mut breaks = vec![0.0];
    let mut r: f64 = 0.0;
    while r < reach {
        r += width.min(reach / 4.0);
        breaks.push(r.min(reach));
    }
    let inner = integrate_pieces(radial, &breaks, radial_opts)?;
    let outer = integrate_to_infinity(radial, reach, radial_opts)?;
    let total = inner.value + outer.value;
    if !total.is_finite() {
        return Err(PmError::Quadrature("moment integral diverged".into()));
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MomentMajorant {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub moment: f64,
    pub holds: bool,
}

/// `sup_band |ξ|^{b-2}|ĝ(ξ) - β(2π)^{-3/2}|(2π)^{3/2}` against
/// `C(b)∫|x|^{2-b}|g|`.
pub fn moment_majorant(g: &ForceSpec, b: f64, band: &NormBand, grid: &GridSpec) -> Result<MomentMajorant> {
    if !(b > 1.0 && b < 2.0) {
        return Err(PmError::arg(format!("moment majorant needs b in (1,2), got {b}")));
    }
    let beta = g
        .mass()
        .ok_or_else(|| PmError::arg("moment majorant needs a force with finite mass"))?;
    let moment = moment_integral(g, b)?;
    let constant = moment_constant(b)?;
    let table = grid.mode_table();
    let mut lhs: f64 = 0.0;
    let mut seen = false;
    for p in 0..grid.mode_count() {
        let xi = table.xi_of(p);
        let r = norm3(xi);
        if !band.contains(r) {
            continue;
        }
        seen = true;
        let v = g.symbol_unchecked(xi, 0.0);
        let gap = [0, 1, 2].map(|i| v[i] - beta[i] * FOURIER_NORM);
        lhs = lhs.max(r.powf(b - 2.0) * cnorm3(&gap) / FOURIER_NORM);
    }
    if !seen {
        return Err(PmError::EmptyBand {
            xi_min: band.xi_min,
            xi_max: band.xi_max,
        });
    }
    let rhs = constant * moment;
    Ok(MomentMajorant {
        lhs,
        rhs,
        constant,
        moment,
        holds: lhs <= rhs,
    })
}

/// Separable test function `φ(x) = e^{-(x₁²+x₂²)/2} Σ w_j e^{-(x₃-a_j)²/(2s_j²)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxialTestFunction {
    /// `(w_j, a_j, s_j)`
    pub bumps: Vec<(f64, f64, f64)>,
}

impl AxialTestFunction {
    /// `∂₃φ(0,0,x₃)`
    pub fn axial_derivative(&self, x: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(w, a, s)| -w * (x - a) / (s * s) * (-(x - a) * (x - a) / (2.0 * s * s)).exp())
            .sum()
    }

    /// `∫ sin(kx) φ(0,0,x) dx`
    pub fn axial_sine_transform(&self, k: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(w, a, s)| w * s * (2.0 * PI).sqrt() * (-0.5 * k * k * s * s).exp() * (k * a).sin())
            .sum()
    }

    fn reach(&self) -> f64 {
        self.bumps
            .iter()
            .map(|&(_, a, s)| a.abs() + 40.0 * s)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairingResult {
    pub direct: f64,
    pub fourier_side: f64,
    pub agrees: bool,
}

/// Both sides of `T φ = ∫ T̂(ξ) φ̌(ξ) dξ` for `T̂ = 2^{-3/2}π^{-1/2} i sgn ξ₃`.
///
/// The direct side integrates `log|x₃| ∂₃φ(0,0,x₃)` with the interval split
/// at the logarithmic singularity. For the separable test function the
/// transverse factors of `φ̌` integrate to `2π`, and the axial factor reduces
/// to the sine transform, so the Fourier side becomes
/// `-∫₀^∞ (∫ sin(kx) φ(0,0,x) dx) dk`.
pub fn pv_log_pairing(phi: &AxialTestFunction, opts: QuadOptions) -> Result<PairingResult> {
    let reach = phi.reach();
    if reach == 0.0 {
        return Ok(PairingResult {
            direct: 0.0,
            fourier_side: 0.0,
            agrees: true,
        });
    }
    let integrand = |x: f64| x.abs().ln() * phi.axial_derivative(x);
    let mut breaks: Vec<f64> = vec![-reach, 0.0, reach];
    for &(_, a, s) in &phi.bumps {
        for d in [-3.0 * s, 0.0, 3.0 * s] {
            let p = a + d;
            if p.abs() < reach && p != 0.0 {
                breaks.push(p);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let direct = integrate_pieces(integrand, &breaks, opts)?.value;

    let kmax = phi
        .bumps
        .iter()
        .map(|&(_, _, s)| 40.0 / s)
        .fold(0.0, f64::max);
    let amax = phi.bumps.iter().map(|&(_, a, _)| a.abs()).fold(0.0, f64::max);
    // break the oscillatory integral at roughly one period of the widest shift
    let step = if amax > 0.0 { (PI / amax).min(kmax) } else { kmax };
    let mut kb = vec![0.0];
    while *kb.last().unwrap() < kmax {
        let next = (kb.last().unwrap() + step).min(kmax);
        kb.push(next);
    }
    let fourier_side = -integrate_pieces(|k| phi.axial_sine_transform(k), &kb, opts)?.value;
    Ok(PairingResult {
        direct,
        fourier_side,
        agrees: (direct - fourier_side).abs() <= 1e-6 * (1.0 + direct.abs()),
    })
}

/// Lanczos approximation, `g = 7`, `n = 9`.
pub fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, &g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dirac_and_log_line_symbols() {
        let d = ForceSpec::dirac([1.0, 0.0, 0.0]);
        let v = d.symbol([0.3, -2.0, 1.0], 5.0).unwrap();
        assert_relative_eq!(v[0].re, 0.063_493_6, max_relative = 1e-6);
        assert_eq!(v[1], ZERO);

        let ll = ForceSpec::LogLine { c: 0.5, b: 2.0 };
        let v = ll.symbol([0.0, 0.0, 1.0], 0.0).unwrap();
        let expected_im = 4.0 * PI * 0.5 * 2f64.powf(-1.5) * PI.powf(-0.5);
        assert_relative_eq!(v[2].im, expected_im, max_relative = 1e-15);
        assert_relative_eq!(v[2].re, -2.0 * FOURIER_NORM, max_relative = 1e-15);
        assert_eq!(ll.symbol([1.0, 0.0, 0.0], 0.0).unwrap()[2].im, 0.0);
    }

    #[test]
    fn moving_dirac_at_zero_is_static() {
        let beta = [0.2, -1.0, 0.5];
        let md = ForceSpec::MovingDirac {
            beta,
            trajectory: TrajectorySpec::SqrtDrift {
                origin: [0.0; 3],
                direction: [1.0, 0.0, 0.0],
            },
        };
        let xi = [1.3, 0.2, -0.7];
        assert_eq!(md.symbol(xi, 0.0).unwrap(), ForceSpec::dirac(beta).symbol(xi, 0.0).unwrap());
        assert!(md.symbol(xi, -1.0).is_err());
        let m = cnorm3(&md.symbol(xi, 2.5).unwrap());
        assert_relative_eq!(m, norm3(beta) * FOURIER_NORM, max_relative = 1e-14);
    }

    #[test]
    fn factored_lattice_symbol_matches_direct() {
        let g = GridSpec::new(16, 6.0, 2.0 / 3.0).unwrap();
        let md = ForceSpec::MovingDirac {
            beta: [1.0, 2.0, 0.0],
            trajectory: TrajectorySpec::Linear {
                origin: [0.1, 0.0, 0.0],
                velocity: [0.3, -0.2, 0.1],
            },
        };
        let fast = md.lattice_symbol(&g, 1.7).unwrap();
        let slow = FourierVectorField::from_symbol(g, |xi| md.symbol_unchecked(xi, 1.7));
        assert!(fast.checked_sub(&slow).unwrap().max_amplitude() < 1e-15);
    }

    #[test]
    fn json_descriptors_round_trip() {
        let text = r#"{"kind":"moving_dirac","beta":[1,0,0],
            "trajectory":{"type":"sqrt_drift","origin":[0,0,0],"direction":[1,0,0]}}"#;
        let f: ForceSpec = serde_json::from_str(text).unwrap();
        assert!(f.is_time_dependent());
        let back: ForceSpec = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        let ll: ForceSpec = serde_json::from_str(r#"{"kind":"log_line","c":1.0,"b":0.5}"#).unwrap();
        assert_eq!(ll, ForceSpec::LogLine { c: 1.0, b: 0.5 });
        assert!(serde_json::from_str::<ForceSpec>(r#"{"kind":"dirac","beta":[1,0,0],"x":1}"#).is_err());
    }

    #[test]
    fn holder_spot_checks() {
        let samples: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).powi(2)).collect();
        let sq = TrajectorySpec::SqrtDrift {
            origin: [0.0; 3],
            direction: [0.0, 2.0, 0.0],
        };
        assert!(sq.spot_check(&samples).is_ok());
        let tab = TrajectorySpec::Table {
            times: vec![0.0, 1.0, 3.0],
            points: vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
        };
        tab.validate().unwrap();
        assert!(tab.spot_check(&samples).is_ok());
        assert_eq!(tab.position(2.0), [1.0, 0.5, 0.0]);
        assert_eq!(tab.position(10.0), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-13);
        assert_relative_eq!(gamma(0.25), 3.625_609_908_221_908, max_relative = 1e-13);
    }

    #[test]
    fn pm0_norms_of_catalog() {
        let g = GridSpec::new(16, 8.0, 2.0 / 3.0).unwrap();
        let band = NormBand::default_for(&g);
        let tg = TimeGrid::geometric(0.1, 10.0, 2.0).unwrap();
        let beta = [1.0, -2.0, 2.0];
        let n = force_pm0_norm(&ForceSpec::dirac(beta), &band, &g, &tg).unwrap();
        assert_relative_eq!(n, 3.0 * FOURIER_NORM, max_relative = 1e-14);
        let (c, b) = (0.7, 1.3);
        let n = force_pm0_norm(&ForceSpec::LogLine { c, b }, &band, &g, &tg).unwrap();
        let expected = ((LOG_LINE_COEFF * c).powi(2) + (b * FOURIER_NORM).powi(2)).sqrt();
        assert_relative_eq!(n, expected, max_relative = 1e-14);
    }
}
