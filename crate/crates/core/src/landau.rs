//! Slezkin–Landau solutions of the stationary Navier–Stokes system forced by
//! `β₁e₁δ₀`.
//!
//! For `|c| > 1`,
//!
//! ```text
//! U₁ = 2(c|x|² - 2x₁|x| + cx₁²) / (|x|(c|x| - x₁)²)
//! Uⱼ = 2xⱼ(cx₁ - |x|) / (|x|(c|x| - x₁)²),   j = 2, 3
//! P  = 4(cx₁ - |x|) / (|x|(c|x| - x₁)²)
//! ```
//!
//! with `β₁(c) = 8πc/(3(c²-1)) (2 + 6c² - 3c(c²-1) log((c+1)/(c-1)))`.
//! Forces along other directions are handled by rotating coordinates so that
//! `e₁` points along `β`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PmError, Result};
use crate::grid::{norm3, GridSpec, PhysicalVectorField, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `c > 1`, `β₁ > 0`
    Positive,
    /// `c < -1`, `β₁ < 0`
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauParams {
    c: f64,
    beta1: f64,
}

impl LandauParams {
    pub fn new(c: f64) -> Result<Self> {
        Ok(LandauParams {
            c,
            beta1: beta_from_c(c)?,
        })
    }

    pub fn from_beta(beta1: f64) -> Result<Self> {
        let branch = if beta1 > 0.0 { Branch::Positive } else { Branch::Negative };
        Self::new(c_from_beta(beta1, branch)?)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn branch(&self) -> Branch {
        if self.c > 0.0 {
            Branch::Positive
        } else {
            Branch::Negative
        }
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c.abs() > 1.0 + 1e-9) || !c.is_finite() {
        return Err(PmError::arg(format!("Landau parameter needs |c| > 1, got {c}")));
    }
    Ok(())
}

/// `β₁(c)`. For `|c| > 4` the bracket is summed as
/// `6 + Σ_{m≥1} 12c^{-2m}/(4(m+1)² - 1)`, which avoids the cancellation
/// between `6c²` and the logarithm.
pub fn beta_from_c(c: f64) -> Result<f64> {
    check_c(c)?;
    let a = c.abs();
    let value = if a <= 4.0 {
        let log = (2.0 / (a - 1.0)).ln_1p();
        8.0 * PI * a / (3.0 * (a * a - 1.0)) * (2.0 + 6.0 * a * a - 3.0 * a * (a * a - 1.0) * log)
    } else {
        let inv2 = 1.0 / (a * a);
        let mut sum = 6.0;
        let mut p = 1.0;
        for m in 1..200 {
            p *= inv2;
            let term = 12.0 * p / (4.0 * ((m + 1) * (m + 1)) as f64 - 1.0);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        8.0 * PI * a / (3.0 * (a * a - 1.0)) * sum
    };
    Ok(value.copysign(c))
}

/// Inverse of [`beta_from_c`] on one branch, by bisection in `ln(|c| - 1)`.
pub fn c_from_beta(beta1: f64, branch: Branch) -> Result<f64> {
    if beta1 == 0.0 || !beta1.is_finite() {
        return Err(PmError::arg("beta1 must be finite and nonzero"));
    }
    let sign = match branch {
        Branch::Positive => 1.0,
        Branch::Negative => -1.0,
    };
    if beta1 * sign < 0.0 {
        return Err(PmError::arg(format!(
            "beta1 = {beta1} is not attained on the {branch:?} branch"
        )));
    }
    let target = beta1.abs();
    let beta_at = |s: f64| beta_from_c(1.0 + s.exp()).expect("|c| > 1 by construction");
    // β decreases in s = ln(|c| - 1)
    let mut lo = -20.0;
    let mut hi = 1.0;
    while beta_at(lo) < target {
        lo -= 10.0;
        if lo < -700.0 {
            return Err(PmError::arg(format!("beta1 = {beta1} is too large to invert")));
        }
    }
    while beta_at(hi) > target {
        hi += 2.0;
        if hi > 700.0 {
            return Err(PmError::arg(format!("beta1 = {beta1} is too small to invert")));
        }
    }
    let tol = 1e-10 * (1.0 + target);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let v = beta_at(mid);
        if (v - target).abs() <= tol * 1e-3 || mid == lo || mid == hi {
            break;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 1.0 + mid.exp();
    if (beta_at(mid) - target).abs() > tol {
        return Err(PmError::arg(format!("bisection for beta1 = {beta1} stalled")));
    }
    Ok(sign * c)
}

/// `(U(x), P(x))` for `β = β₁e₁`.
pub fn landau_eval(x: Vec3, params: &LandauParams) -> Result<(Vec3, f64)> {
    let r = norm3(x);
    if r == 0.0 {
        return Err(PmError::Singular("the Landau solution is singular at the origin".into()));
    }
    let c = params.c;
    let d = c * r - x[0];
    let den = r * d * d;
    let k = c * x[0] - r;
    let u1 = 2.0 * (c * r * r - 2.0 * x[0] * r + c * x[0] * x[0]) / den;
    let u2 = 2.0 * x[1] * k / den;
    let u3 = 2.0 * x[2] * k / den;
    let p = 4.0 * k / den;
    Ok(([u1, u2, u3], p))
}

/// Orthonormal frame whose first vector is `e`.
fn frame(e: Vec3) -> [Vec3; 3] {
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = e[0] * helper[0] + e[1] * helper[1] + e[2] * helper[2];
    let f = [helper[0] - d * e[0], helper[1] - d * e[1], helper[2] - d * e[2]];
    let nf = norm3(f);
    let f = [f[0] / nf, f[1] / nf, f[2] / nf];
    let g = [e[1] * f[2] - e[2] * f[1], e[2] * f[0] - e[0] * f[2], e[0] * f[1] - e[1] * f[0]];
    [e, f, g]
}

/// Landau solution for a force `β` along an arbitrary direction.
#[derive(Clone, Copy, Debug)]
pub struct RotatedLandau {
    params: LandauParams,
    frame: [Vec3; 3],
}

impl RotatedLandau {
    pub fn new(beta: Vec3) -> Result<Self> {
        let m = norm3(beta);
        if m == 0.0 {
            return Err(PmError::arg("Landau solution needs a nonzero force"));
        }
        Ok(RotatedLandau {
            params: LandauParams::from_beta(m)?,
            frame: frame([beta[0] / m, beta[1] / m, beta[2] / m]),
        })
    }

    pub fn params(&self) -> &LandauParams {
        &self.params
    }

    pub fn eval(&self, x: Vec3) -> Result<(Vec3, f64)> {
        let f = &self.frame;
        let local = [0, 1, 2].map(|i| f[i][0] * x[0] + f[i][1] * x[1] + f[i][2] * x[2]);
        let (u, p) = landau_eval(local, &self.params)?;
        Ok(([0, 1, 2].map(|j| u[0] * f[0][j] + u[1] * f[1][j] + u[2] * f[2][j]), p))
    }
}

/// Whole-space Stokeslet `(1/8π)(I/r + xxᵀ/r³)β`, the linearization of the
/// Landau family at `β = 0`.
pub fn stokeslet(x: Vec3, beta: Vec3) -> Vec3 {
    let r = norm3(x);
    let xb = x[0] * beta[0] + x[1] * beta[1] + x[2] * beta[2];
    [0, 1, 2].map(|i| (beta[i] / r + x[i] * xb / (r * r * r)) / (8.0 * PI))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LandauResidual {
    /// Richardson-extrapolated `max |-ΔU + (U·∇)U + ∇P|`.
    pub residual: f64,
    /// Same maximum with plain central differences at step `h`.
    pub residual_raw: f64,
    /// Richardson-extrapolated `max |∇·U|`.
    pub divergence: f64,
    pub divergence_raw: f64,
    pub samples: usize,
}

/// Sample points on `r_min ≤ |x| ≤ r_max`: 7 radii times 64 Fibonacci directions.
pub fn annulus_samples(r_min: f64, r_max: f64) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let dirs = 64;
    let mut pts = Vec::new();
    for i in 0..7 {
        let r = r_min * (r_max / r_min).powf(i as f64 / 6.0);
        for j in 0..dirs {
            let z = 1.0 - 2.0 * (j as f64 + 0.5) / dirs as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * j as f64;
            pts.push([r * z, r * s * phi.cos(), r * s * phi.sin()]);
        }
    }
    pts
}

struct Derivs {
    res: Vec3,
    div: f64,
}

fn fd_terms(x: Vec3, p: &LandauParams, h: f64) -> Result<Derivs> {
    let eval = |y: Vec3| landau_eval(y, p);
    let (u0, _) = eval(x)?;
    let mut grad_u = [[0.0; 3]; 3]; // grad_u[k][i] = ∂_k U_i
    let mut lap = [0.0; 3];
    let mut grad_p = [0.0; 3];
    for k in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let (up, pp) = eval(xp)?;
        let (um, pm) = eval(xm)?;
        for i in 0..3 {
            grad_u[k][i] = (up[i] - um[i]) / (2.0 * h);
            lap[i] += (up[i] - 2.0 * u0[i] + um[i]) / (h * h);
        }
        grad_p[k] = (pp - pm) / (2.0 * h);
    }
    let res = [0, 1, 2].map(|i| {
        let adv = u0[0] * grad_u[0][i] + u0[1] * grad_u[1][i] + u0[2] * grad_u[2][i];
        -lap[i] + adv + grad_p[i]
    });
    let div = grad_u[0][0] + grad_u[1][1] + grad_u[2][2];
    Ok(Derivs { res, div })
}

/// Residual of the stationary equations away from the origin.
pub fn landau_residual(params: &LandauParams, r_min: f64, r_max: f64, h: f64) -> Result<LandauResidual> {
    if !(h > 0.0) || !(r_max > r_min) {
        return Err(PmError::arg("residual needs h > 0 and r_max > r_min"));
    }
    if r_min < 10.0 * h {
        return Err(PmError::Region(format!(
            "annulus inner radius {r_min} must exceed 10h = {}",
            10.0 * h
        )));
    }
    let pts = annulus_samples(r_min, r_max);
    let per_point: Vec<(f64, f64, f64, f64)> = pts
        .par_iter()
        .map(|&x| {
            let a = fd_terms(x, params, h)?;
            let b = fd_terms(x, params, h / 2.0)?;
            let rich = [0, 1, 2].map(|i| (4.0 * b.res[i] - a.res[i]) / 3.0);
            let div = (4.0 * b.div - a.div) / 3.0;
            Ok((norm3(rich), norm3(a.res), div.abs(), a.div.abs()))
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&(f64, f64, f64, f64)) -> f64| per_point.iter().map(f).fold(0.0, f64::max);
    Ok(LandauResidual {
        residual: max(|t| t.0),
        residual_raw: max(|t| t.1),
        divergence: max(|t| t.2),
        divergence_raw: max(|t| t.3),
        samples: pts.len(),
    })
}

/// Minimum-image displacement from `origin` to `x` in the periodic box.
pub fn periodic_offset(x: Vec3, origin: Vec3, box_length: f64) -> Vec3 {
    [0, 1, 2].map(|i| {
        let d = x[i] - origin[i];
        d - box_length * (d / box_length).round()
    })
}

/// Landau velocity sampled on the collocation lattice with the singularity at
/// `origin`. Points within `2·(L/n)` of it are set to zero and flagged in the
/// returned mask.
pub fn sample_landau(landau: &RotatedLandau, grid: &GridSpec, origin: Vec3) -> (PhysicalVectorField, Vec<bool>) {
    let radius = 2.0 * grid.cell_size();
    let l = grid.box_length();
    let field = PhysicalVectorField::from_fn(*grid, |x| {
        let d = periodic_offset(x, origin, l);
        if norm3(d) <= radius {
            [0.0; 3]
        } else {
            landau.eval(d).map(|(u, _)| u).unwrap_or([0.0; 3])
        }
    });
    let mask = (0..grid.point_count())
        .map(|idx| norm3(periodic_offset(field.position(idx), origin, l)) <= radius)
        .collect();
    (field, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn direct_beta(c: f64) -> f64 {
        8.0 * PI * c / (3.0 * (c * c - 1.0))
            * (2.0 + 6.0 * c * c - 3.0 * c * (c * c - 1.0) * ((c + 1.0) / (c - 1.0)).ln())
    }

    #[test]
    fn reference_point() {
        let p = LandauParams::new(2.0).unwrap();
        let (u, pr) = landau_eval([1.0, 0.0, 0.0], &p).unwrap();
        assert_relative_eq!(u[0], 4.0, max_relative = 1e-15);
        assert_eq!(u[1], 0.0);
        assert_relative_eq!(pr, 4.0, max_relative = 1e-15);
        assert!(matches!(landau_eval([0.0; 3], &p), Err(PmError::Singular(_))));
    }

    #[test]
    fn series_branch_agrees_with_formula() {
        for &c in &[4.0, 4.0001, 5.0, 8.0] {
            let s = beta_from_c(c).unwrap();
            assert_relative_eq!(s, direct_beta(c), max_relative = 1e-11);
        }
        assert_relative_eq!(beta_from_c(1e6).unwrap() * 1e6, 16.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn odd_and_invertible() {
        for &c in &[1.01, 2.0, 7.5, 300.0] {
            assert_eq!(beta_from_c(-c).unwrap(), -beta_from_c(c).unwrap());
            let b = beta_from_c(c).unwrap();
            assert_relative_eq!(c_from_beta(b, Branch::Positive).unwrap(), c, max_relative = 1e-9);
            assert_relative_eq!(c_from_beta(-b, Branch::Negative).unwrap(), -c, max_relative = 1e-9);
        }
        assert!(c_from_beta(-5.0, Branch::Positive).is_err());
        assert!(c_from_beta(0.0, Branch::Positive).is_err());
        assert!(beta_from_c(1.0).is_err());
        assert!(beta_from_c(0.5).is_err());
    }

    #[test]
    fn rotation_reproduces_axis_case() {
        let rl = RotatedLandau::new([1.5, 0.0, 0.0]).unwrap();
        let x = [0.3, -0.4, 0.9];
        let (u, p) = rl.eval(x).unwrap();
        let (v, q) = landau_eval(x, rl.params()).unwrap();
        for i in 0..3 {
            assert_relative_eq!(u[i], v[i], max_relative = 1e-14, epsilon = 1e-15);
        }
        assert_relative_eq!(p, q, max_relative = 1e-14);
    }

    #[test]
    fn residual_region_check() {
        let p = LandauParams::new(2.0).unwrap();
        assert!(matches!(landau_residual(&p, 0.005, 1.0, 1e-3), Err(PmError::Region(_))));
    }
}
