//! Library routines against slow, independent reference computations.

use std::f64::consts::PI;

use num_complex::Complex64;

use pmflow::forces::{kernel_difference_integral, ForceSpec, TrajectorySpec};
use pmflow::grid::{GridSpec, FOURIER_NORM};
use pmflow::operators::{duhamel_force_all, leray_apply};
use pmflow::quadrature::{integrate, integrate_pieces, integrate_to_infinity, QuadOptions};

/// `∫ ||ω - e|^{-1-b} - |ω|^{-1-b}| dω` in cylindrical coordinates about the axis of `e`.
fn kernel_difference_cylindrical(b: f64) -> f64 {
    let inner = QuadOptions::tol(1e-15, 1e-12);
    let opts = QuadOptions::tol(1e-12, 1e-8);
    let p = -(1.0 + b) / 2.0;
    let slab = |z: f64| -> f64 {
        // ((z-1)² + r²)^p - (z² + r²)^p, rearranged far out to avoid cancellation
        let f = |r: f64| {
            let c = z * z + r * r;
            let d = if z.abs() > 2.0 {
                c.powf(p) * (p * ((1.0 - 2.0 * z) / c).ln_1p()).exp_m1()
            } else {
                ((z - 1.0).powi(2) + r * r).powf(p) - c.powf(p)
            };
            2.0 * PI * r * d.abs()
        };
        // the integrand peaks at r ~ distance to the nearer singular point
        let h = z.abs().min((z - 1.0).abs());
        if h < 1e-60 {
            // slab ~ h^{1-b}, so these layers hold ~h^{2-b} in total
            return 0.0;
        }
        let mut breaks = vec![0.0];
        breaks.extend([h / 4.0, h, 4.0 * h].into_iter().filter(|&x| x < 1.0));
        breaks.push(1.0);
        breaks.extend([h / 4.0, h, 4.0 * h].into_iter().filter(|&x| x > 1.0));
        let last = *breaks.last().unwrap();
        integrate_pieces(f, &breaks, inner).unwrap().value + last * integrate_to_infinity(|v| f(last * v), 1.0, inner).unwrap().value
    };
    // symmetric under z -> 1 - z, so only z < 1/2 is integrated, where slab ~ |z|^{1-b}
    // near the origin; z = ±u^m with m = 1/(2-b) makes that regular
    let m = 1.0 / (2.0 - b);
    let side = |sign: f64, len: f64| {
        integrate(|u: f64| slab(sign * u.powf(m)) * m * u.powf(m - 1.0), 0.0, len.powf(1.0 / m), opts)
            .unwrap()
            .value
    };
    // z < -1 by decades out to Z, then slab(z) ~ c |z|^{-b}
    let z_far = 1e12;
    let decades: Vec<f64> = (0..=12).map(|k| -(10f64.powi(k))).rev().collect();
    let c = slab(-z_far) * z_far.powf(b);
    let far = integrate_pieces(slab, &decades, opts).unwrap().value + c * z_far.powf(1.0 - b) / (b - 1.0);
    2.0 * (side(1.0, 0.5) + side(-1.0, 1.0) + far)
}

#[test]
fn kernel_difference_matches_brute_force() {
    for b in [1.2, 1.5, 1.8] {
        let fast = kernel_difference_integral(b).unwrap();
        let slow = kernel_difference_cylindrical(b);
        assert!((fast / slow - 1.0).abs() < 1e-6, "b = {b}: {fast} vs {slow}");
    }
}

#[test]
fn moving_dirac_lift_matches_per_mode_integrals() {
    let grid = GridSpec::new(16, 16.0, 2.0 / 3.0).unwrap();
    let beta = [0.4, -0.2, 0.1];
    let path = TrajectorySpec::SqrtDrift {
        origin: [0.1, 0.0, -0.2],
        direction: [0.5, 0.3, 0.0],
    };
    let f = ForceSpec::MovingDirac {
        beta,
        trajectory: path.clone(),
    };
    let times = [0.05, 0.5, 3.0];
    let lifts = duhamel_force_all(&f, &grid, &times).unwrap();
    let table = grid.mode_table();
    let opts = QuadOptions::tol(1e-14, 1e-11);
    let gamma = |s: f64| -> [f64; 3] {
        let TrajectorySpec::SqrtDrift { origin, direction } = &path else { unreachable!() };
        [0, 1, 2].map(|i| origin[i] + s.sqrt() * direction[i])
    };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (j, &t) in times.iter().enumerate() {
        for p in (0..grid.mode_count()).step_by(37) {
            let xi = table.xi_of(p);
            let r2: f64 = xi.iter().map(|v| v * v).sum();
            if r2 == 0.0 {
                continue;
            }
            // ∫₀ᵗ e^{-(t-s)|ξ|²} e^{-iξ·γ(s)} ds, before projection
            let part = |im: bool| {
                integrate(
                    |s| {
                        let g = gamma(s);
                        let phase = -(xi[0] * g[0] + xi[1] * g[1] + xi[2] * g[2]);
                        let w = (-(t - s) * r2).exp();
                        w * if im { phase.sin() } else { phase.cos() }
                    },
                    0.0,
                    t,
                    opts,
                )
                .unwrap()
                .value
            };
            let z = Complex64::new(part(false), part(true)) * FOURIER_NORM;
            let want = leray_apply(xi, beta.map(|b| z * b));
            let got = lifts[j].mode(p);
            for c in 0..3 {
                worst = worst.max((got[c] - want[c]).norm());
                scale = scale.max(want[c].norm());
            }
        }
    }
    assert!(worst <= 1e-8 * scale, "worst {worst:e}, scale {scale:e}");
}
