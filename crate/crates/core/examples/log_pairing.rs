//! Principal-value pairing of the logarithmic line force with axial test functions.

use pmflow::forces::{pv_log_pairing, AxialTestFunction};
use pmflow::quadrature::QuadOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        vec![(1.0, 0.0, 1.0)],
        vec![(1.0, 0.5, 0.7)],
        vec![(1.0, -1.0, 0.5), (0.5, 1.5, 1.2)],
    ];
    for bumps in cases {
        let r = pv_log_pairing(&AxialTestFunction { bumps: bumps.clone() }, QuadOptions::tol(1e-13, 1e-12))?;
        println!("{bumps:?}: direct {:+.12}, Fourier side {:+.12}", r.direct, r.fourier_side);
    }
    Ok(())
}
