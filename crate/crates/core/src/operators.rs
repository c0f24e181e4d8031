//! Fourier-multiplier operators of the mild formulation.
//!
//! Time integrals `∫₀ᵗ e^{-(t-τ)|ξ|²} N̂(ξ,τ) dτ` are evaluated with
//! exponential-integrator weights: `N̂` is interpolated linearly in τ between
//! nodes and each segment is integrated exactly against the heat factor, so
//! the scheme is stable for every `|ξ|` regardless of the step. The first
//! segment `[0, t₁]` uses a power-law interpolant `N̂(t₁)(τ/t₁)^p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PmError, Result};
use crate::forces::ForceSpec;
use crate::grid::{convolve_tensor, CVec3, FourierVectorField, GridSpec, Vec3};
use crate::norms::SpaceTimeField;
use crate::quadrature::{integrate, integrate_pieces, QuadOptions};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Strictly increasing positive time nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(PmError::arg("a time grid needs at least two nodes"));
        }
        if !(nodes[0] > 0.0) || nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes[nodes.len() - 1].is_finite() {
            return Err(PmError::arg("time nodes must be positive, finite and strictly increasing"));
        }
        Ok(TimeGrid { nodes })
    }

    /// Nodes `r^j` lying in `[t_min, t_max]`, so that `t = 1` is always a node
    /// when it is in range.
    pub fn geometric(t_min: f64, t_max: f64, ratio: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && ratio > 1.0) {
            return Err(PmError::arg(format!(
                "geometric grid needs 0 < t_min < t_max and ratio > 1, got ({t_min}, {t_max}, {ratio})"
            )));
        }
        let lr = ratio.ln();
        let j0 = (t_min.ln() / lr - 1e-9).ceil() as i64;
        let j1 = (t_max.ln() / lr + 1e-9).floor() as i64;
        Self::new((j0..=j1).map(|j| ratio.powi(j as i32)).collect())
    }

    /// `[10⁻², 10²]` with ratio `2^{1/4}`.
    pub fn desk() -> Self {
        Self::geometric(1e-2, 1e2, 2f64.powf(0.25)).expect("valid default time grid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.nodes
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * s.max(t.abs()))
            .ok_or(PmError::NotANode(t))
    }

    /// Nodes up to and including `t`.
    pub fn truncated(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.nodes[..=self.index_of(t)?].to_vec())
    }
}

/// `S(t)u₀`: multiply every mode by `e^{-t|ξ|²}`.
pub fn heat_propagate(u0: &FourierVectorField, t: f64) -> Result<FourierVectorField> {
    if !(t >= 0.0) {
        return Err(PmError::NegativeTime(t));
    }
    let flag = u0.is_flagged_divergence_free();
    Ok(u0
        .map_modes(|xi, v| {
            let g = (-t * dot(xi, xi)).exp();
            [v[0] * g, v[1] * g, v[2] * g]
        })
        .with_divergence_free(flag))
}

#[inline]
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `ℙ̂(ξ)v`, zero at `ξ = 0`.
#[inline]
pub fn leray_apply(xi: Vec3, v: CVec3) -> CVec3 {
    let r2 = dot(xi, xi);
    if r2 == 0.0 {
        return [ZERO; 3];
    }
    let proj = (v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2]) / r2;
    let out = [v[0] - proj * xi[0], v[1] - proj * xi[1], v[2] - proj * xi[2]];
    // one correction pass removes the roundoff left in ξ·out
    let resid = (out[0] * xi[0] + out[1] * xi[1] + out[2] * xi[2]) / r2;
    [out[0] - resid * xi[0], out[1] - resid * xi[1], out[2] - resid * xi[2]]
}

pub fn leray_project(u: &FourierVectorField) -> FourierVectorField {
    u.map_modes(leray_apply).with_divergence_free(true)
}

/// `N̂(ξ) = iℙ̂(ξ)(ξ·T̂(ξ))` with `T̂ = FT(u ⊗ v)`, i.e. the transform of
/// `ℙ∇·(u ⊗ v)`.
pub fn nonlinear_symbol(u: &FourierVectorField, v: &FourierVectorField) -> Result<FourierVectorField> {
    let t = convolve_tensor(u, v)?;
    let grid = *u.grid();
    let table = grid.mode_table();
    let values: Vec<CVec3> = (0..grid.mode_count())
        .into_par_iter()
        .map(|p| {
            let xi = table.xi_of(p);
            let m = t.mode(p);
            let mut div = [ZERO; 3];
            for (j, d) in div.iter_mut().enumerate() {
                *d = I * (m[0][j] * xi[0] + m[1][j] * xi[1] + m[2][j] * xi[2]);
            }
            leray_apply(xi, div)
        })
        .collect();
    Ok(FourierVectorField::from_modes(grid, values).with_divergence_free(true))
}

/// `B_E(w,z)`: `(iξ/|ξ|²)ℙ̂(ξ)` applied to `FT(w ⊗ z)`.
pub fn stationary_bilinear(w: &FourierVectorField, z: &FourierVectorField) -> Result<FourierVectorField> {
    let n = nonlinear_symbol(w, z)?;
    Ok(n.map_modes(|xi, v| {
        let r2 = dot(xi, xi);
        if r2 == 0.0 {
            [ZERO; 3]
        } else {
            [v[0] / r2, v[1] / r2, v[2] / r2]
        }
    })
    .with_divergence_free(true))
}

/// `(1 - e^{-z})/z`
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-300 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `(1 - e^{-z} - z e^{-z})/z²`, series below `z = 0.1`.
pub fn phi2(z: f64) -> f64 {
    if z < 0.1 {
        // Σ (-1)^k (k+1) z^k / (k+2)!
        let mut sum = 0.0;
        let mut fact = 2.0;
        let mut zk = 1.0;
        for k in 0..20 {
            let term = (k + 1) as f64 * zk / fact;
            sum += if k % 2 == 0 { term } else { -term };
            zk *= z;
            fact *= (k + 3) as f64;
        }
        sum
    } else {
        (-(-z).exp_m1() - z * (-z).exp()) / (z * z)
    }
}

/// `∫₀¹ e^{-a(1-s)} s^p ds` for `p > -1`, `a ≥ 0`.
pub fn power_weight(a: f64, p: f64) -> f64 {
    if p == 0.0 {
        return phi1(a);
    }
    if a < 40.0 {
        // e^{-a} Σ a^k / (k! (p+k+1))
        let mut sum = 0.0;
        let mut ak = 1.0;
        for k in 0..400 {
            let term = ak / (p + k as f64 + 1.0);
            sum += term;
            if term < 1e-18 * sum && k as f64 > a {
                break;
            }
            ak *= a / (k + 1) as f64;
        }
        (-a).exp() * sum
    } else {
        // ∫₀^∞ e^{-au}(1-u)^p du, asymptotic in 1/a
        let mut sum = 0.0;
        let mut term = 1.0 / a;
        for j in 0..60 {
            sum += term;
            let next = term * (j as f64 - p) / a;
            if next.abs() < 1e-18 * sum.abs() || next.abs() > term.abs() {
                break;
            }
            term = next;
        }
        sum
    }
}

/// Streaming evaluation of `I(t_m) = ∫₀^{t_m} e^{-(t_m-τ)|ξ|²} N̂(ξ,τ) dτ`.
pub struct ExpIntegrator {
    grid: GridSpec,
    lambda: Vec<f64>,
    acc: Vec<CVec3>,
    prev: Vec<CVec3>,
    t: f64,
}

impl ExpIntegrator {
    /// Start at `τ = 0` with the value `N̂(0)`.
    pub fn at_zero(n0: &FourierVectorField) -> Self {
        let grid = *n0.grid();
        let len = grid.mode_count();
        ExpIntegrator {
            grid,
            lambda: grid.mode_table().xi_squared(),
            acc: vec![[ZERO; 3]; len],
            prev: (0..len).map(|p| n0.mode(p)).collect(),
            t: 0.0,
        }
    }

    /// Start at `t₁` with the first segment integrated against `N̂(t₁)(τ/t₁)^p`.
    pub fn with_power_start(t1: f64, n1: &FourierVectorField, p: f64) -> Result<Self> {
        if !(t1 > 0.0) || !(p > -1.0) {
            return Err(PmError::arg(format!(
                "power start needs t1 > 0 and p > -1, got ({t1}, {p})"
            )));
        }
        let grid = *n1.grid();
        let lambda = grid.mode_table().xi_squared();
        let acc = lambda
            .par_iter()
            .enumerate()
            .map(|(q, &l)| {
                let w = t1 * power_weight(l * t1, p);
                let v = n1.mode(q);
                [v[0] * w, v[1] * w, v[2] * w]
            })
            .collect();
        let prev = (0..grid.mode_count()).map(|q| n1.mode(q)).collect();
        Ok(ExpIntegrator {
            grid,
            lambda,
            acc,
            prev,
            t: t1,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Advance to `t_next` where `N̂(t_next) = n_next`.
    pub fn step(&mut self, t_next: f64, n_next: &FourierVectorField) -> Result<()> {
        if n_next.grid() != &self.grid {
            return Err(PmError::GridMismatch);
        }
        let h = t_next - self.t;
        if !(h > 0.0) {
            return Err(PmError::arg("integrator steps must move forward in time"));
        }
        self.advance(h, |q| n_next.mode(q));
        self.t = t_next;
        Ok(())
    }

    pub(crate) fn step_modes(&mut self, t_next: f64, n_next: &[CVec3]) {
        let h = t_next - self.t;
        self.advance(h, |q| n_next[q]);
        self.t = t_next;
    }

    fn advance<F: Fn(usize) -> CVec3 + Sync>(&mut self, h: f64, next: F) {
        let lambda = &self.lambda;
        self.acc
            .par_iter_mut()
            .zip(self.prev.par_iter_mut())
            .enumerate()
            .for_each(|(q, (acc, prev))| {
                let z = h * lambda[q];
                let decay = (-z).exp();
                let w1 = phi1(z);
                let w2 = phi2(z);
                let wp = h * w2;
                let wn = h * (w1 - w2);
                let nn = next(q);
                for c in 0..3 {
                    acc[c] = acc[c] * decay + prev[c] * wp + nn[c] * wn;
                }
                *prev = nn;
            });
    }

    pub fn value(&self) -> FourierVectorField {
        FourierVectorField::from_modes(self.grid, self.acc.clone())
    }
}

/// Options for the Duhamel quadrature of the bilinear term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelOptions {
    /// Exponent `p` of the first-segment interpolant `N̂(t₁)(τ/t₁)^p`.
    pub leading_power: f64,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        DuhamelOptions { leading_power: 0.0 }
    }
}

/// `B(u,v)(t_m)` at every node of the shared time grid.
pub fn duhamel_nonlinear_all(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    opts: DuhamelOptions,
) -> Result<Vec<FourierVectorField>> {
    duhamel_nonlinear_upto(u, v, u.len() - 1, opts)
}

fn duhamel_nonlinear_upto(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    last: usize,
    opts: DuhamelOptions,
) -> Result<Vec<FourierVectorField>> {
    if u.times() != v.times() {
        return Err(PmError::arg("bilinear operands live on different time grids"));
    }
    if u.grid() != v.grid() {
        return Err(PmError::GridMismatch);
    }
    let times = u.times();
    let first = nonlinear_symbol(u.snapshot(0), v.snapshot(0))?;
    let mut integ = ExpIntegrator::with_power_start(times[0], &first, opts.leading_power)?;
    let mut out = Vec::with_capacity(last + 1);
    out.push(integ.value().with_divergence_free(true));
    for m in 1..=last {
        let nm = nonlinear_symbol(u.snapshot(m), v.snapshot(m))?;
        integ.step(times[m], &nm)?;
        out.push(integ.value().with_divergence_free(true));
    }
    Ok(out)
}

/// `B(u,v)(t)` for a node `t`.
pub fn duhamel_nonlinear(u: &SpaceTimeField, v: &SpaceTimeField, t: f64) -> Result<FourierVectorField> {
    duhamel_nonlinear_with(u, v, t, DuhamelOptions::default())
}

pub fn duhamel_nonlinear_with(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    t: f64,
    opts: DuhamelOptions,
) -> Result<FourierVectorField> {
    let m = u.node_index(t)?;
    v.node_index(t)?;
    Ok(duhamel_nonlinear_upto(u, v, m, opts)?.pop().expect("at least one node"))
}

/// Control of the adaptive sub-mesh used for time-dependent forces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceQuadrature {
    /// Allowed midpoint deviation of the linear interpolant, relative to the
    /// symbol scale.
    pub interp_tol: f64,
    pub max_subintervals: usize,
}

impl Default for ForceQuadrature {
    fn default() -> Self {
        ForceQuadrature {
            interp_tol: 1e-8,
            max_subintervals: 4_000_000,
        }
    }
}

/// `∫₀ᵗ e^{-(t-τ)|ξ|²} ℙ̂ f̂(ξ,τ) dτ` at each node of `times`, for a
/// general time-dependent symbol.
///
/// The sub-mesh is shared by all modes and refined by bisection until the
/// linear interpolant of the symbol deviates by at most
/// `interp_tol · scale` at every probe mode (the corners and axis extremes of
/// the retained cube, where the phase varies fastest).
pub fn duhamel_symbol<S>(grid: &GridSpec, times: &[f64], symbol: S, quad: ForceQuadrature) -> Result<Vec<FourierVectorField>>
where
    S: Fn(Vec3, f64) -> CVec3 + Sync,
{
    let table = grid.mode_table();
    let kmax = *table.k.last().expect("non-empty axis") as f64;
    let d = grid.wavenumber_spacing();
    let mut probes: Vec<Vec3> = Vec::new();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                probes.push([sx * kmax * d, sy * kmax * d, sz * kmax * d]);
            }
        }
    }
    for ax in 0..3 {
        let mut e = [0.0; 3];
        e[ax] = kmax * d;
        probes.push(e);
        e[ax] = -kmax * d;
        probes.push(e);
    }
    probes.push([d, 0.0, 0.0]);

    let probe_vals = |t: f64| -> Vec<CVec3> { probes.iter().map(|&xi| symbol(xi, t)).collect() };
    let scale = probes
        .iter()
        .flat_map(|&xi| times.iter().map(move |&t| (xi, t)))
        .map(|(xi, t)| crate::grid::cnorm3(&symbol(xi, t)))
        .fold(0.0, f64::max)
        .max(1e-300);
    let tol = quad.interp_tol * scale;

    // adaptive sub-mesh on [0, t_last] containing every node
    let mut mesh = vec![0.0];
    let mut budget = quad.max_subintervals;
    let mut prev_t = 0.0;
    for &tn in times {
        let mut stack = vec![(prev_t, tn, probe_vals(prev_t), probe_vals(tn))];
        let mut pieces: Vec<f64> = Vec::new();
        while let Some((a, b, fa, fb)) = stack.pop() {
            let mid = 0.5 * (a + b);
            let fm = probe_vals(mid);
            let dev = fm
                .iter()
                .zip(fa.iter().zip(&fb))
                .map(|(m, (x, y))| {
                    let avg = [(x[0] + y[0]) * 0.5, (x[1] + y[1]) * 0.5, (x[2] + y[2]) * 0.5];
                    crate::grid::cnorm3(&[m[0] - avg[0], m[1] - avg[1], m[2] - avg[2]])
                })
                .fold(0.0, f64::max);
            if dev > tol && (b - a) > 1e-14 * tn {
                if budget == 0 {
                    return Err(PmError::Quadrature(
                        "force sub-mesh exceeded max_subintervals".into(),
                    ));
                }
                budget -= 1;
                // right half pushed first so the left half is processed first
                stack.push((mid, b, fm.clone(), fb));
                stack.push((a, mid, fa, fm));
            } else {
                pieces.push(b);
            }
        }
        mesh.extend(pieces);
        prev_t = tn;
    }

    let eval = |t: f64| -> Vec<CVec3> {
        (0..grid.mode_count())
            .into_par_iter()
            .map(|p| {
                let xi = table.xi_of(p);
                leray_apply(xi, symbol(xi, t))
            })
            .collect()
    };
    let f0 = FourierVectorField::from_modes(*grid, eval(0.0));
    let mut integ = ExpIntegrator::at_zero(&f0);
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    for &tau in &mesh[1..] {
        integ.step_modes(tau, &eval(tau));
        if next < times.len() && (tau - times[next]).abs() <= 1e-15 * tau {
            out.push(integ.value().with_divergence_free(true));
            next += 1;
        }
    }
    if out.len() != times.len() {
        return Err(PmError::Quadrature("sub-mesh lost a time node".into()));
    }
    Ok(out)
}

/// `F(t)` at every node of `times`.
pub fn duhamel_force_all(f: &ForceSpec, grid: &GridSpec, times: &[f64]) -> Result<Vec<FourierVectorField>> {
    duhamel_force_all_with(f, grid, times, ForceQuadrature::default())
}

pub fn duhamel_force_all_with(
    f: &ForceSpec,
    grid: &GridSpec,
    times: &[f64],
    quad: ForceQuadrature,
) -> Result<Vec<FourierVectorField>> {
    if f.is_time_dependent() {
        f.validate()?;
        return duhamel_symbol(grid, times, |xi, t| f.symbol_unchecked(xi, t), quad);
    }
    let projected = leray_project(&f.lattice_symbol(grid, 0.0)?);
    Ok(times
        .iter()
        .map(|&t| {
            projected
                .map_modes(|xi, v| {
                    let w = t * phi1(t * dot(xi, xi));
                    [v[0] * w, v[1] * w, v[2] * w]
                })
                .with_divergence_free(true)
        })
        .collect())
}

/// `F(t)` for a node `t` of `timegrid`.
pub fn duhamel_force(f: &ForceSpec, t: f64, grid: &GridSpec, timegrid: &TimeGrid) -> Result<FourierVectorField> {
    let nodes = timegrid.truncated(t)?;
    Ok(duhamel_force_all(f, grid, &nodes)?.pop().expect("non-empty"))
}

/// `Ĝ = ℙ̂ĝ/|ξ|²` for a time-independent force.
pub fn stationary_lift(g: &ForceSpec, grid: &GridSpec) -> Result<FourierVectorField> {
    if g.is_time_dependent() {
        return Err(PmError::arg("stationary lift needs a time-independent force"));
    }
    Ok(g.lattice_symbol(grid, 0.0)?
        .map_modes(|xi, v| {
            let r2 = dot(xi, xi);
            if r2 == 0.0 {
                return [ZERO; 3];
            }
            let p = leray_apply(xi, v);
            [p[0] / r2, p[1] / r2, p[2] / r2]
        })
        .with_divergence_free(true))
}

/// `C(b) = ∫ |η|^{-2} |e - η|^{-b} dη` for a unit vector `e`, `b ∈ (1,3)`.
///
/// In spherical coordinates about the origin the angular integral runs over
/// `w = |e - η|² ∈ [(1-ρ)², (1+ρ)²]`; it is integrated adaptively in `ln w`.
/// The radial integral is split at `ρ = 1`, where the integrand behaves like
/// `|1-ρ|^{2-b}`, and at `ρ = 2`, beyond which it decays like `ρ^{-b}`. Both
/// behaviours are removed by power substitutions.
pub fn riesz_constant(b: f64) -> Result<f64> {
    if !(b > 1.0 && b < 3.0) {
        return Err(PmError::arg(format!("riesz_constant needs b in (1,3), got {b}")));
    }
    let inner_opts = QuadOptions::tol(1e-300, 1e-13);
    let outer_opts = QuadOptions::tol(1e-300, 1e-11);

    // ∫_{-1}^{1} (1 + ρ² - 2ρμ)^{-b/2} dμ = (1/2ρ) ∫ w^{1-b/2} d(ln w)
    let angular = |rho: f64| -> f64 {
        let lo = if rho < 1.0 { 2.0 * (-rho).ln_1p() } else { 2.0 * (rho - 1.0).ln() };
        let hi = 2.0 * rho.ln_1p();
        let e = 1.0 - b / 2.0;
        integrate(|s: f64| (e * s).exp(), lo, hi, inner_opts)
            .map(|r| r.value / (2.0 * rho))
            .unwrap_or(f64::NAN)
    };

    let e = 1.0 - b / 2.0;
    let k = 3.0 - b;
    // ρ = 1 ∓ v^{1/k} with s = |1-ρ|: the Jacobian v^{1/k-1}/k equals s^{b-2}/k,
    // which cancels the s^{2-b} behaviour of the angular factor. Shifting the
    // angular variable by ln s² absorbs that factor exactly, so s may underflow.
    let near = |sign: f64| {
        move |v: f64| {
            let ln_s = v.ln() / k;
            let rho = 1.0 + sign * ln_s.exp();
            let span = 2.0 * rho.ln_1p() - 2.0 * ln_s;
            let span = if e < 0.0 { span.min(1500.0 / -e) } else { span };
            let mut cuts = vec![0.0];
            let mut c = 1.0;
            while c < span {
                cuts.push(c);
                c *= 4.0;
            }
            cuts.push(span);
            integrate_pieces(|t: f64| (e * t).exp(), &cuts, inner_opts)
                .map(|r| r.value / (2.0 * rho * k))
                .unwrap_or(f64::NAN)
        }
    };
    let below = integrate(near(-1.0), 0.0, 1.0, outer_opts)?;
    let above = integrate(near(1.0), 0.0, 1.0, outer_opts)?;

    let tail = radial_tail(angular, b)?;
    let total = below.value + above.value + tail;
    if !total.is_finite() {
        return Err(PmError::Quadrature(format!("riesz_constant({b}) is not finite")));
    }
    Ok(2.0 * PI * total)
}

/// `∫₂^∞ a(ρ) dρ` for an angular factor `a(ρ) ~ 2ρ^{-b}(1 + b(b-1)/(6ρ²))`.
///
/// `[2, R]` is mapped by `ρ = 2s^{-1/(b-1)}`, which flattens the `ρ^{-b}`
/// decay; beyond `R = 10⁴` the two-term expansion is integrated exactly.
fn radial_tail<A: Fn(f64) -> f64>(angular: A, b: f64) -> Result<f64> {
    const R: f64 = 1e4;
    let e = b - 1.0;
    let s_lo = (2.0 / R).powf(e);
    let body = integrate(
        |s: f64| {
            let rho = 2.0 * s.powf(-1.0 / e);
            angular(rho) * 2.0 / e * s.powf(-1.0 / e - 1.0)
        },
        s_lo,
        1.0,
        QuadOptions::tol(1e-300, 1e-11),
    )?;
    let far = 2.0 * R.powf(-e) / e + b * e / (3.0 * (1.0 + b)) * R.powf(-1.0 - b);
    Ok(body.value + far)
}

/// `C(b)` from the closed-form angular integral, as a cross-check.
pub fn riesz_constant_reference(b: f64) -> Result<f64> {
    if !(b > 1.0 && b < 3.0) {
        return Err(PmError::arg(format!("b must lie in (1,3), got {b}")));
    }
    let radial = |rho: f64| -> f64 {
        if rho > 1.0 {
            // (1+ρ)^a - (ρ-1)^a without cancellation
            let (lp, lm) = ((1.0 / rho).ln_1p(), (-1.0 / rho).ln_1p());
            if (b - 2.0).abs() < 1e-14 {
                return (lp - lm) / rho;
            }
            let a = 2.0 - b;
            return rho.powf(a) * (a * lm).exp() * (a * (lp - lm)).exp_m1() / (rho * a);
        }
        if (b - 2.0).abs() < 1e-14 {
            ((1.0 + rho) / (1.0 - rho).abs()).ln() / rho
        } else {
            ((1.0 + rho).powf(2.0 - b) - (1.0 - rho).abs().powf(2.0 - b)) / (rho * (2.0 - b))
        }
    };
    let a = 2.0 - b;
    let k = 3.0 - b;
    // same substitution about ρ = 1 as above, with s^{b-2}·radial(ρ) in closed form
    let near = |sign: f64| {
        move |v: f64| {
            let ln_s = v.ln() / k;
            let rho = 1.0 + sign * ln_s.exp();
            let d = rho.ln_1p() - ln_s;
            let scaled = if a.abs() < 1e-14 { d } else { (a * d).exp_m1() / a };
            scaled / (rho * k)
        }
    };
    let opts = QuadOptions::tol(1e-300, 1e-12);
    let below = integrate(near(-1.0), 0.0, 1.0, opts)?;
    let above = integrate(near(1.0), 0.0, 1.0, opts)?;
    let tail = radial_tail(radial, b)?;
    Ok(2.0 * PI * (below.value + above.value + tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, FOURIER_NORM};
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn phi_functions_match_direct_quadrature() {
        for &z in &[1e-8, 0.05, 0.0999, 0.1, 0.7, 3.0, 25.0, 400.0] {
            let q1 = integrate(|s: f64| (-z * s).exp(), 0.0, 1.0, QuadOptions::default()).unwrap();
            let q2 = integrate(|s: f64| s * (-z * s).exp(), 0.0, 1.0, QuadOptions::default()).unwrap();
            assert_relative_eq!(phi1(z), q1.value, max_relative = 1e-12);
            assert_relative_eq!(phi2(z), q2.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn power_weight_matches_quadrature() {
        for &p in &[-0.5, -0.25, 0.5, 1.0, 2.0] {
            for &a in &[0.0, 0.3, 5.0, 39.0, 41.0, 300.0, 1e5] {
                let q = integrate(
                    |s: f64| (-a * (1.0 - s)).exp() * s.powf(p),
                    0.0,
                    1.0,
                    QuadOptions::tol(1e-300, 1e-13),
                )
                .unwrap();
                assert_relative_eq!(power_weight(a, p), q.value, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn geometric_grid_contains_one() {
        let g = TimeGrid::desk();
        assert!(g.index_of(1.0).is_ok());
        assert_eq!(g.len(), 53);
        assert!(g.first() >= 1e-2 && g.last() <= 1e2);
        assert!(TimeGrid::new(vec![1.0]).is_err());
    }

    #[test]
    fn heat_identity_and_decay() {
        let g = build_grid(16, 2.0 * PI, 1.0).unwrap();
        let u = FourierVectorField::from_symbol(g, |_| [c(1.0), c(0.0), c(0.0)]);
        assert_eq!(heat_propagate(&u, 0.0).unwrap(), u);
        let s = heat_propagate(&u, 1.0).unwrap();
        assert_relative_eq!(s.at([1, 0, 0])[0].re, (-1.0f64).exp(), max_relative = 1e-15);
        assert!(matches!(heat_propagate(&u, -1.0), Err(PmError::NegativeTime(_))));
    }

    #[test]
    fn constant_force_path_matches_closed_form() {
        let g = build_grid(16, 8.0, 2.0 / 3.0).unwrap();
        let grid_t = TimeGrid::geometric(0.01, 10.0, 2f64.powf(0.25)).unwrap();
        let f = FourierVectorField::from_symbol(g, |_| [c(FOURIER_NORM), c(0.0), c(0.0)]);
        let pf = leray_project(&f);
        let mut integ = ExpIntegrator::at_zero(&pf);
        for &t in grid_t.nodes() {
            integ.step(t, &pf).unwrap();
            let exact = pf.map_modes(|xi, v| {
                let l = dot(xi, xi);
                let w = if l == 0.0 { t } else { -(-t * l).exp_m1() / l };
                [v[0] * w, v[1] * w, v[2] * w]
            });
            let diff = integ.value().checked_sub(&exact).unwrap();
            assert!(diff.max_amplitude() <= 1e-12 * exact.max_amplitude());
        }
    }

    #[test]
    fn riesz_two_is_pi_cubed() {
        let v = riesz_constant(2.0).unwrap();
        assert_relative_eq!(v, PI.powi(3), max_relative = 1e-8);
        for &b in &[1.2, 1.5, 2.5, 2.9] {
            assert_relative_eq!(
                riesz_constant(b).unwrap(),
                riesz_constant_reference(b).unwrap(),
                max_relative = 1e-7
            );
        }
        assert!(riesz_constant(1.0).is_err());
        assert!(riesz_constant(3.0).is_err());
    }

    #[test]
    fn riesz_diverges_at_endpoints() {
        assert!(riesz_constant(1.0005).unwrap() > 1e3);
        assert!(riesz_constant(2.9995).unwrap() > 1e3);
    }
}
