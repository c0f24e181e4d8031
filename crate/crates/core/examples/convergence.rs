//! Two solutions with the same force and different data approach each other.

use pmflow::asymptotics::{run_convergence_rate, ConvergenceOptions};
use pmflow::forces::ForceSpec;
use pmflow::grid::{FourierVectorField, GridSpec};
use pmflow::norms::NormBand;
use pmflow::operators::TimeGrid;
use pmflow::solver::random_band_limited;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(32, 16.0, 2.0 / 3.0)?;
    let f = ForceSpec::dirac([0.5, 0.0, 0.0]);
    let u01 = FourierVectorField::zeros(grid);
    let u02 = random_band_limited(&grid, &NormBand::new(0.5, 2.0)?, 0.02, 3);
    let r = run_convergence_rate(&u01, &u02, &f, &f, 0.5, 4.0, &grid, &TimeGrid::desk(), &ConvergenceOptions::default())?;
    println!("{}", r.summary());
    for (k, v) in &r.extras {
        println!("  {k} = {v:.4}");
    }
    Ok(())
}
