//! The abstract Picard iteration on the scalar equation x = y + x².

use pmflow::solver::{picard_fixed_point, PicardOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for y in [0.05, 0.15, 0.24, 0.3] {
        let out = picard_fixed_point(
            &y,
            Some(|a: &f64| Ok(0.0 * a)),
            |a: &f64, b: &f64| Ok(a * b),
            |v: &f64| Ok(v.abs()),
            PicardOptions { tol: 1e-14, max_iter: 500 },
        );
        match out {
            Ok((x, c)) => println!(
                "y = {y}: x = {x:.12} (exact {:.12}), ratio {:.3} <= {:.3}",
                (1.0 - (1.0 - 4.0 * y).sqrt()) / 2.0,
                c.observed_ratio,
                c.predicted_ratio
            ),
            Err(e) => println!("y = {y}: {e}"),
        }
    }
    Ok(())
}
