//! A point force drifting like sqrt(t), lifted through the Duhamel integral.

use pmflow::forces::{ForceSpec, TrajectorySpec};
use pmflow::grid::GridSpec;
use pmflow::norms::{pm_norm, NormBand};
use pmflow::operators::{duhamel_force_all, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(32, 16.0, 2.0 / 3.0)?;
    let f = ForceSpec::MovingDirac {
        beta: [0.5, 0.0, 0.0],
        trajectory: TrajectorySpec::SqrtDrift {
            origin: [0.0; 3],
            direction: [0.0, 0.5, 0.0],
        },
    };
    let still = ForceSpec::dirac([0.5, 0.0, 0.0]);
    let times = TimeGrid::geometric(1e-2, 1e2, 10f64.sqrt())?;
    let band = NormBand::default_for(&grid);
    let moving = duhamel_force_all(&f, &grid, times.nodes())?;
    let fixed = duhamel_force_all(&still, &grid, times.nodes())?;
    for (t, (m, s)) in times.nodes().iter().zip(moving.iter().zip(&fixed)) {
        println!(
            "t = {t:9.4}  |F|_PM2 moving {:.4e}, fixed {:.4e}",
            pm_norm(m, 2.0, &band)?,
            pm_norm(s, 2.0, &band)?
        );
    }
    Ok(())
}
