//! Distance between stationary solutions as the force gap shrinks.

use pmflow::asymptotics::{run_stationary_stability, StabilityOptions};
use pmflow::forces::ForceSpec;
use pmflow::grid::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(32, 16.0, 2.0 / 3.0)?;
    let g1 = ForceSpec::gaussian(0.5, [0.5, 0.0, 0.0]);
    let g2 = ForceSpec::dirac([0.5, 0.0, 0.0]);
    let r = run_stationary_stability(&g1, &g2, 1.5, 2.5, &grid, &StabilityOptions::default())?;
    println!("{}", r.summary());
    for (s, (v, b)) in r.times_or_params.iter().zip(r.values.iter().zip(&r.bounds)) {
        println!("  s = {s:.4}  gap {v:.4e}  bound {b:.4e}");
    }
    Ok(())
}
