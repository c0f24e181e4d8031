//! The Landau family: the parameter map, a few velocity samples, and the
//! finite-difference residual of the stationary equations.

use pmflow::landau::{beta_from_c, landau_eval, landau_residual, LandauParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>8} {:>12}", "c", "beta1(c)");
    for c in [-10.0, -2.0, -1.1, 1.1, 2.0, 10.0, 100.0] {
        println!("{c:>8} {:>12.6}", beta_from_c(c)?);
    }

    let p = LandauParams::from_beta(2.0)?;
    println!("\nbeta1 = 2 -> c = {:.6}", p.c());
    for x in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.5]] {
        let (u, pr) = landau_eval(x, &p)?;
        println!("U({x:?}) = [{:+.5}, {:+.5}, {:+.5}], P = {pr:+.5}", u[0], u[1], u[2]);
    }

    let r = landau_residual(&p, 0.5, 2.0, 1e-3)?;
    println!(
        "\nresidual on 0.5 <= |x| <= 2: {:.2e} (raw {:.2e}), divergence {:.2e}, {} samples",
        r.residual, r.residual_raw, r.divergence, r.samples
    );
    Ok(())
}
