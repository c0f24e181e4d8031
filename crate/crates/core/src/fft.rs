//! Cached 3D complex FFT on an `n × n × n` row-major cube.
//!
//! Built from 1D `rustfft` passes: the contiguous axis is transformed in
//! place, the two strided axes go through a transpose buffer.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `sum_j e^{-2 pi i k j / n} a_j`
    Forward,
    /// `sum_k e^{+2 pi i k j / n} a_k`, unnormalized
    Inverse,
}

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<Fft3>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft3 {
    /// Shared plan for cube side `n`.
    pub fn for_size(n: usize) -> Arc<Fft3> {
        let mut map = cache().lock().expect("fft cache poisoned");
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft3 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn process(&self, data: &mut [Complex64], direction: Direction) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "fft buffer has wrong length");
        let fft = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let scratch_len = fft.get_inplace_scratch_len();

        // axes 2 and 1, one plane at a time
        data.par_chunks_mut(n * n).for_each_init(
            || {
                (
                    vec![Complex64::default(); n * n],
                    vec![Complex64::default(); scratch_len],
                )
            },
            |(buf, scratch), plane| {
                fft.process_with_scratch(plane, scratch);
                for i1 in 0..n {
                    for i2 in 0..n {
                        buf[i2 * n + i1] = plane[i1 * n + i2];
                    }
                }
                fft.process_with_scratch(buf, scratch);
                for i1 in 0..n {
                    for i2 in 0..n {
                        plane[i1 * n + i2] = buf[i2 * n + i1];
                    }
                }
            },
        );

        // axis 0
        let mut buf = vec![Complex64::default(); n * n];
        let mut scratch = vec![Complex64::default(); scratch_len];
        for i1 in 0..n {
            for i0 in 0..n {
                let row = &data[(i0 * n + i1) * n..(i0 * n + i1 + 1) * n];
                for (i2, v) in row.iter().enumerate() {
                    buf[i2 * n + i0] = *v;
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for i0 in 0..n {
                let row = &mut data[(i0 * n + i1) * n..(i0 * n + i1 + 1) * n];
                for (i2, v) in row.iter_mut().enumerate() {
                    *v = buf[i2 * n + i0];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], n: usize, sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n * n];
        let w = |k: usize, j: usize| {
            let ang = sign * 2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
            Complex64::new(ang.cos(), ang.sin())
        };
        for k0 in 0..n {
            for k1 in 0..n {
                for k2 in 0..n {
                    let mut acc = Complex64::default();
                    for j0 in 0..n {
                        for j1 in 0..n {
                            for j2 in 0..n {
                                acc += data[(j0 * n + j1) * n + j2] * w(k0, j0) * w(k1, j1) * w(k2, j2);
                            }
                        }
                    }
                    out[(k0 * n + k1) * n + k2] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 4;
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        for (dir, sign) in [(Direction::Forward, -1.0), (Direction::Inverse, 1.0)] {
            let mut fast = data.clone();
            Fft3::for_size(n).process(&mut fast, dir);
            let slow = naive_dft(&data, n, sign);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
