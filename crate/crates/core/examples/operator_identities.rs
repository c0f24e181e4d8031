//! Leray projection, the Riesz constant and the heat semigroup on a small grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use pmflow::grid::{FourierVectorField, GridSpec};
use pmflow::operators::{heat_propagate, leray_project, riesz_constant, riesz_constant_reference};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(16, 8.0, 2.0 / 3.0)?;
    let u = FourierVectorField::from_symbol(grid, |xi| {
        let g = (-0.3 * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])).exp();
        [Complex64::new(g, 0.0), Complex64::new(0.0, xi[1] * g), Complex64::new(0.5 * g, 0.0)]
    });
    let p = leray_project(&u);
    println!("divergence ratio before {:.2e}, after {:.2e}", u.max_divergence_ratio(), p.max_divergence_ratio());
    let twice = leray_project(&p).checked_sub(&p)?.max_amplitude();
    println!("|P(Pu) - Pu| = {twice:.2e}");

    let a = heat_propagate(&heat_propagate(&u, 0.3)?, 0.7)?;
    let b = heat_propagate(&u, 1.0)?;
    println!("semigroup defect {:.2e}", a.checked_sub(&b)?.max_amplitude());

    for s in [1.5, 2.0, 2.5] {
        println!("C({s}) = {:.10} (reference {:.10})", riesz_constant(s)?, riesz_constant_reference(s)?);
    }
    println!("pi^3  = {:.10}", PI.powi(3));
    Ok(())
}
