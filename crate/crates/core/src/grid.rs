//! Lattice discretization of whole-space Fourier transforms.
//!
//! A [`GridSpec`] fixes a periodic box `[0, L)^3` sampled at `n` points per
//! axis. Spectral fields are samples of the continuous transform
//! `û(ξ) = (2π)^{-3/2} ∫ e^{-ix·ξ} u(x) dx` at `ξ = Δξ·k`, `Δξ = 2π/L`,
//! and are stored only on the retained (dealiased) cube
//! `|k_i| ≤ dealias_fraction · n/2`. Every constant factor in the crate
//! derives from that single `(2π)^{-3/2}` convention, including the
//! convolution weight of [`convolve_tensor`].

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PmError, Result};
use crate::fft::{Direction, Fft3};

/// `(2π)^{-3/2}`, the transform normalization and the symbol of `δ₀`.
pub const FOURIER_NORM: f64 = 0.063_493_635_934_240_97;

pub type Vec3 = [f64; 3];
pub type CVec3 = [Complex64; 3];

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    box_length: f64,
    dealias_fraction: f64,
}

/// Validated grid construction.
pub fn build_grid(n: usize, box_length: f64, dealias_fraction: f64) -> Result<GridSpec> {
    GridSpec::new(n, box_length, dealias_fraction)
}

impl GridSpec {
    pub fn new(n: usize, box_length: f64, dealias_fraction: f64) -> Result<Self> {
        if n % 2 != 0 {
            return Err(PmError::InvalidGrid(format!("n must be even, got {n}")));
        }
        if n < 8 {
            return Err(PmError::InvalidGrid(format!("n must be at least 8, got {n}")));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(PmError::InvalidGrid(format!(
                "box_length must be positive, got {box_length}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(PmError::InvalidGrid(format!(
                "dealias_fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        Ok(GridSpec {
            n,
            box_length,
            dealias_fraction,
        })
    }

    /// Desk-scale default: `n = 64`, `L = 16`, 2/3 dealiasing.
    pub fn desk() -> Self {
        GridSpec::new(64, 16.0, 2.0 / 3.0).expect("valid default grid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// `Δξ = 2π/L`
    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// `L/n`
    pub fn cell_size(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Same resolution with a different dealiasing fraction.
    pub fn with_dealias_fraction(&self, fraction: f64) -> Result<Self> {
        GridSpec::new(self.n, self.box_length, fraction)
    }

    /// Same box with twice the points per axis.
    pub fn refined(&self) -> Self {
        GridSpec { n: 2 * self.n, ..*self }
    }

    /// Same box with half the points per axis.
    pub fn coarsened(&self) -> Result<Self> {
        GridSpec::new(self.n / 2, self.box_length, self.dealias_fraction)
    }

    fn keeps_all(&self) -> bool {
        self.cutoff_index() >= self.n / 2
    }

    /// Largest retained `|k_i|`.
    pub fn cutoff_index(&self) -> usize {
        let kc = (self.dealias_fraction * self.n as f64 / 2.0 + 1e-9).floor() as usize;
        kc.min(self.n / 2)
    }

    /// `Δξ · n/2 · dealias_fraction`: the radius a [`crate::norms::NormBand`] may not exceed.
    pub fn xi_max(&self) -> f64 {
        self.wavenumber_spacing() * self.n as f64 / 2.0 * self.dealias_fraction
    }

    /// Retained integer wavenumbers along one axis, ascending.
    pub fn retained_axis(&self) -> Vec<i64> {
        let half = (self.n / 2) as i64;
        if self.keeps_all() {
            (-half..half).collect()
        } else {
            let kc = self.cutoff_index() as i64;
            (-kc..=kc).collect()
        }
    }

    /// Retained modes per axis.
    pub fn axis_len(&self) -> usize {
        if self.keeps_all() {
            self.n
        } else {
            2 * self.cutoff_index() + 1
        }
    }

    /// Number of stored spectral modes.
    pub fn mode_count(&self) -> usize {
        self.axis_len().pow(3)
    }

    /// Number of physical collocation points.
    pub fn point_count(&self) -> usize {
        self.n.pow(3)
    }

    pub fn wavevector_at(&self, k: [i64; 3]) -> Vec3 {
        let d = self.wavenumber_spacing();
        [d * k[0] as f64, d * k[1] as f64, d * k[2] as f64]
    }

    /// Whether `k` lies in the retained cube.
    pub fn is_retained(&self, k: [i64; 3]) -> bool {
        let axis = self.retained_axis();
        let (lo, hi) = (axis[0], *axis.last().unwrap());
        k.iter().all(|&ki| ki >= lo && ki <= hi)
    }

    pub fn mode_table(&self) -> ModeTable {
        let k = self.retained_axis();
        let d = self.wavenumber_spacing();
        let n = self.n as i64;
        let xi = k.iter().map(|&ki| d * ki as f64).collect();
        let fft_index = k.iter().map(|&ki| ki.rem_euclid(n) as usize).collect();
        ModeTable {
            m: k.len(),
            k,
            xi,
            fft_index,
        }
    }

    /// Collocation coordinate `x_j = j·L/n` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        j as f64 * self.cell_size()
    }

    pub fn center(&self) -> Vec3 {
        let c = self.box_length / 2.0;
        [c, c, c]
    }
}

/// Per-axis description of the retained cube.
#[derive(Clone, Debug)]
pub struct ModeTable {
    pub m: usize,
    pub k: Vec<i64>,
    pub xi: Vec<f64>,
    pub fft_index: Vec<usize>,
}

impl ModeTable {
    #[inline]
    pub fn split(&self, p: usize) -> (usize, usize, usize) {
        let m = self.m;
        (p / (m * m), (p / m) % m, p % m)
    }

    #[inline]
    pub fn xi_of(&self, p: usize) -> Vec3 {
        let (a, b, c) = self.split(p);
        [self.xi[a], self.xi[b], self.xi[c]]
    }

    #[inline]
    pub fn k_of(&self, p: usize) -> [i64; 3] {
        let (a, b, c) = self.split(p);
        [self.k[a], self.k[b], self.k[c]]
    }

    /// Packed index of `k`, if retained.
    pub fn index_of(&self, k: [i64; 3]) -> Option<usize> {
        let lo = self.k[0];
        let pos = |ki: i64| {
            let i = ki - lo;
            (i >= 0 && (i as usize) < self.m).then_some(i as usize)
        };
        Some((pos(k[0])? * self.m + pos(k[1])?) * self.m + pos(k[2])?)
    }

    /// Offset of the mode in the full `n³` FFT buffer.
    #[inline]
    pub fn fft_offset(&self, p: usize, n: usize) -> usize {
        let (a, b, c) = self.split(p);
        (self.fft_index[a] * n + self.fft_index[b]) * n + self.fft_index[c]
    }

    /// `|ξ|²` for every packed mode.
    pub fn xi_squared(&self) -> Vec<f64> {
        (0..self.m.pow(3))
            .map(|p| {
                let x = self.xi_of(p);
                x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
            })
            .collect()
    }
}

#[inline]
pub fn norm3(x: Vec3) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

#[inline]
pub fn cnorm3(v: &CVec3) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt()
}

/// Three complex amplitude arrays on the retained cube.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierVectorField {
    grid: GridSpec,
    comps: [Vec<Complex64>; 3],
    divergence_free: bool,
}

impl FourierVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.mode_count();
        FourierVectorField {
            grid,
            comps: [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]],
            divergence_free: true,
        }
    }

    /// Sample a continuous symbol `ξ ↦ û(ξ)` on the retained cube.
    pub fn from_symbol<F>(grid: GridSpec, symbol: F) -> Self
    where
        F: Fn(Vec3) -> CVec3 + Sync,
    {
        let table = grid.mode_table();
        let values: Vec<CVec3> = (0..grid.mode_count())
            .into_par_iter()
            .map(|p| symbol(table.xi_of(p)))
            .collect();
        Self::from_modes(grid, values)
    }

    pub(crate) fn from_modes(grid: GridSpec, values: Vec<CVec3>) -> Self {
        let mut out = Self::zeros(grid);
        for (p, v) in values.into_iter().enumerate() {
            out.comps[0][p] = v[0];
            out.comps[1][p] = v[1];
            out.comps[2][p] = v[2];
        }
        out.divergence_free = false;
        out
    }

    pub fn from_components(grid: GridSpec, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        let len = grid.mode_count();
        if comps.iter().any(|c| c.len() != len) {
            return Err(PmError::arg(format!(
                "component length must be {len} for this grid"
            )));
        }
        Ok(FourierVectorField {
            grid,
            comps,
            divergence_free: false,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }


    #[inline]
    pub fn mode(&self, p: usize) -> CVec3 {
        [self.comps[0][p], self.comps[1][p], self.comps[2][p]]
    }

    #[inline]
    pub(crate) fn set_mode(&mut self, p: usize, v: CVec3) {
        self.comps[0][p] = v[0];
        self.comps[1][p] = v[1];
        self.comps[2][p] = v[2];
    }

    /// The same amplitudes on another lattice of the same box: modes retained
    /// by both grids are copied, the rest are zero.
    pub fn resampled(&self, grid: &GridSpec) -> Result<Self> {
        if (grid.box_length() - self.grid.box_length()).abs() > 1e-12 * grid.box_length() {
            return Err(PmError::GridMismatch);
        }
        let (table, src) = (grid.mode_table(), self.grid.mode_table());
        let mut out = Self::zeros(*grid);
        for p in 0..out.len() {
            if let Some(q) = src.index_of(table.k_of(p)) {
                out.set_mode(p, self.mode(q));
            }
        }
        out.divergence_free = self.divergence_free;
        Ok(out)
    }

    /// Amplitude at integer wavevector `k`, zero when `k` is not retained.
    pub fn at(&self, k: [i64; 3]) -> CVec3 {
        match self.grid.mode_table().index_of(k) {
            Some(p) => self.mode(p),
            None => [ZERO; 3],
        }
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Set when the field was produced by an operator with a Leray factor.
    pub fn is_flagged_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub(crate) fn with_divergence_free(mut self, flag: bool) -> Self {
        self.divergence_free = flag;
        self
    }

    /// Mode-wise map `(ξ, û(ξ)) ↦ v̂(ξ)`.
    pub fn map_modes<F>(&self, f: F) -> Self
    where
        F: Fn(Vec3, CVec3) -> CVec3 + Sync,
    {
        let table = self.grid.mode_table();
        let values: Vec<CVec3> = (0..self.len())
            .into_par_iter()
            .map(|p| f(table.xi_of(p), self.mode(p)))
            .collect();
        Self::from_modes(self.grid, values)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.comps
            .iter_mut()
            .for_each(|c| c.iter_mut().for_each(|v| *v *= s));
        out
    }

    /// `self + alpha·other`
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(PmError::GridMismatch);
        }
        let mut out = self.clone();
        for (dst, src) in out.comps.iter_mut().zip(&other.comps) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += alpha * b;
            }
        }
        out.divergence_free = self.divergence_free && other.divergence_free;
        Ok(out)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Largest Euclidean amplitude over all modes.
    pub fn max_amplitude(&self) -> f64 {
        (0..self.len())
            .map(|p| cnorm3(&self.mode(p)))
            .fold(0.0, f64::max)
    }

    /// `max |ξ·û(ξ)| / (|ξ||û(ξ)|)` over nonzero modes.
    pub fn max_divergence_ratio(&self) -> f64 {
        let table = self.grid.mode_table();
        (0..self.len())
            .filter_map(|p| {
                let xi = table.xi_of(p);
                let u = self.mode(p);
                let mag = norm3(xi) * cnorm3(&u);
                if mag == 0.0 {
                    return None;
                }
                let div = u[0] * xi[0] + u[1] * xi[1] + u[2] * xi[2];
                Some(div.norm() / mag)
            })
            .fold(0.0, f64::max)
    }

    /// `max |û(-k) - conj(û(k))|` over retained pairs.
    pub fn hermitian_defect(&self) -> f64 {
        let table = self.grid.mode_table();
        let mut worst: f64 = 0.0;
        for p in 0..self.len() {
            let k = table.k_of(p);
            if let Some(q) = table.index_of([-k[0], -k[1], -k[2]]) {
                for c in 0..3 {
                    worst = worst.max((self.comps[c][q] - self.comps[c][p].conj()).norm());
                }
            }
        }
        worst
    }

    /// Lattice quadrature of `∫ |û|² dξ`.
    pub fn spectral_energy(&self) -> f64 {
        let d = self.grid.wavenumber_spacing();
        let sum: f64 = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        sum * d * d * d
    }
}

impl Add for &FourierVectorField {
    type Output = FourierVectorField;
    fn add(self, rhs: Self) -> FourierVectorField {
        self.checked_add(rhs).expect("grid mismatch in field addition")
    }
}

impl Sub for &FourierVectorField {
    type Output = FourierVectorField;
    fn sub(self, rhs: Self) -> FourierVectorField {
        self.checked_sub(rhs).expect("grid mismatch in field subtraction")
    }
}

impl Mul<f64> for &FourierVectorField {
    type Output = FourierVectorField;
    fn mul(self, rhs: f64) -> FourierVectorField {
        self.scale(rhs)
    }
}

impl Neg for &FourierVectorField {
    type Output = FourierVectorField;
    fn neg(self) -> FourierVectorField {
        let flag = self.divergence_free;
        self.scale(-1.0).with_divergence_free(flag)
    }
}

/// Real vector field on the collocation lattice `x_j = j·L/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalVectorField {
    grid: GridSpec,
    values: [Vec<f64>; 3],
}

impl PhysicalVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.point_count();
        PhysicalVectorField {
            grid,
            values: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
        }
    }

    /// Sample `x ↦ u(x)` at the collocation points.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(Vec3) -> Vec3 + Sync,
    {
        let n = grid.n();
        let h = grid.cell_size();
        let samples: Vec<Vec3> = (0..grid.point_count())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
                f([i as f64 * h, j as f64 * h, k as f64 * h])
            })
            .collect();
        let mut out = Self::zeros(grid);
        for (idx, v) in samples.into_iter().enumerate() {
            for c in 0..3 {
                out.values[c][idx] = v[c];
            }
        }
        out
    }

    pub fn from_components(grid: GridSpec, values: [Vec<f64>; 3]) -> Result<Self> {
        if values.iter().any(|v| v.len() != grid.point_count()) {
            return Err(PmError::arg("component length must be n^3"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PmError::arg("physical field values must be finite"));
        }
        Ok(PhysicalVectorField { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.values
    }

    #[inline]
    pub fn value(&self, idx: usize) -> Vec3 {
        [self.values[0][idx], self.values[1][idx], self.values[2][idx]]
    }

    /// Position of collocation point `idx`.
    #[inline]
    pub fn position(&self, idx: usize) -> Vec3 {
        let n = self.grid.n();
        let h = self.grid.cell_size();
        [
            (idx / (n * n)) as f64 * h,
            ((idx / n) % n) as f64 * h,
            (idx % n) as f64 * h,
        ]
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(PmError::GridMismatch);
        }
        let mut out = self.clone();
        for (dst, src) in out.values.iter_mut().zip(&other.values) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a -= b);
        }
        Ok(out)
    }

    /// Riemann sum of `∫ |u|² dx` over the box.
    pub fn energy(&self) -> f64 {
        let h = self.grid.cell_size();
        let sum: f64 = self
            .values
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum();
        sum * h * h * h
    }
}

/// Nine spectral components `T̂_{lk}`, `l, k ∈ {0,1,2}`, row-major.
#[derive(Clone, Debug)]
pub struct TensorField {
    grid: GridSpec,
    comps: Vec<Vec<Complex64>>,
}

impl TensorField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, l: usize, k: usize) -> &[Complex64] {
        &self.comps[3 * l + k]
    }

    #[inline]
    pub fn mode(&self, p: usize) -> [[Complex64; 3]; 3] {
        let c = &self.comps;
        [
            [c[0][p], c[1][p], c[2][p]],
            [c[3][p], c[4][p], c[5][p]],
            [c[6][p], c[7][p], c[8][p]],
        ]
    }

    pub fn transpose(&self) -> TensorField {
        let mut comps = Vec::with_capacity(9);
        for l in 0..3 {
            for k in 0..3 {
                comps.push(self.comps[3 * k + l].clone());
            }
        }
        TensorField {
            grid: self.grid,
            comps,
        }
    }

    pub fn max_abs_difference(&self, other: &TensorField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|a| a.iter().map(|x| x.norm()))
            .fold(0.0, f64::max)
    }
}

fn scatter_to_full(grid: &GridSpec, table: &ModeTable, spectral: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n();
    let mut buf = vec![ZERO; n * n * n];
    for (p, v) in spectral.iter().enumerate() {
        buf[table.fft_offset(p, n)] = *v;
    }
    buf
}

fn gather_from_full(grid: &GridSpec, table: &ModeTable, buf: &[Complex64], scale: f64) -> Vec<Complex64> {
    let n = grid.n();
    (0..grid.mode_count())
        .map(|p| buf[table.fft_offset(p, n)] * scale)
        .collect()
}

fn forward_scale(grid: &GridSpec) -> f64 {
    FOURIER_NORM * grid.cell_size().powi(3)
}

fn inverse_scale(grid: &GridSpec) -> f64 {
    FOURIER_NORM * grid.wavenumber_spacing().powi(3)
}

/// Inverse transform of one spectral component to real lattice values.
pub(crate) fn component_to_physical(grid: &GridSpec, table: &ModeTable, spectral: &[Complex64]) -> Vec<f64> {
    let mut buf = scatter_to_full(grid, table, spectral);
    Fft3::for_size(grid.n()).process(&mut buf, Direction::Inverse);
    let s = inverse_scale(grid);
    buf.iter().map(|v| v.re * s).collect()
}

/// Forward transform of real lattice values, truncated to the retained cube.
pub(crate) fn component_to_fourier(grid: &GridSpec, table: &ModeTable, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft3::for_size(grid.n()).process(&mut buf, Direction::Forward);
    gather_from_full(grid, table, &buf, forward_scale(grid))
}

/// Lattice quadrature of the forward transform. Modes outside the retained
/// cube are discarded.
pub fn to_fourier(field: &PhysicalVectorField) -> FourierVectorField {
    let grid = *field.grid();
    let table = grid.mode_table();
    let comps = [0, 1, 2].map(|c| component_to_fourier(&grid, &table, &field.values[c]));
    FourierVectorField {
        grid,
        comps,
        divergence_free: false,
    }
}

/// Lattice quadrature of the inverse transform; the real part is kept.
pub fn to_physical(field: &FourierVectorField) -> PhysicalVectorField {
    let grid = *field.grid();
    let table = grid.mode_table();
    let values = [0, 1, 2].map(|c| component_to_physical(&grid, &table, &field.comps[c]));
    PhysicalVectorField { grid, values }
}

/// `FT(u_l v_k) = (2π)^{-3/2} (û_l * v̂_k)` for all nine pairs, computed
/// pseudospectrally and truncated to the retained cube.
pub fn convolve_tensor(u: &FourierVectorField, v: &FourierVectorField) -> Result<TensorField> {
    if u.grid != v.grid {
        return Err(PmError::GridMismatch);
    }
    let grid = u.grid;
    let table = grid.mode_table();
    let up = to_physical(u);
    let same = std::ptr::eq(u, v) || u.comps == v.comps;
    let vp = if same { up.clone() } else { to_physical(v) };
    let fwd = forward_scale(&grid);
    let fft = Fft3::for_size(grid.n());

    let product = |l: usize, k: usize| {
        let mut buf: Vec<Complex64> = up.values[l]
            .iter()
            .zip(&vp.values[k])
            .map(|(a, b)| Complex64::new(a * b, 0.0))
            .collect();
        fft.process(&mut buf, Direction::Forward);
        gather_from_full(&grid, &table, &buf, fwd)
    };

    let mut comps: Vec<Option<Vec<Complex64>>> = vec![None; 9];
    for l in 0..3 {
        for k in 0..3 {
            if same && k < l {
                continue;
            }
            comps[3 * l + k] = Some(product(l, k));
        }
    }
    if same {
        for l in 0..3 {
            for k in 0..l {
                comps[3 * l + k] = comps[3 * k + l].clone();
            }
        }
    }
    Ok(TensorField {
        grid,
        comps: comps.into_iter().map(|c| c.expect("filled")).collect(),
    })
}
