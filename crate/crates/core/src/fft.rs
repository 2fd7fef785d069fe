//! Multi-dimensional complex FFT over a hypercubic periodic lattice.
//!
//! Axes are stored row-major with axis 0 slowest. Each 1-D transform is
//! independent, so lines are batched and processed in parallel; the result
//! does not depend on the number of worker threads.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct NdFft {
    axes: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for NdFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdFft").field("axes", &self.axes).field("len", &self.len).finish()
    }
}

impl NdFft {
    pub fn new(axes: usize, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        NdFft {
            axes,
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn total(&self) -> usize {
        self.len.pow(self.axes as u32)
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform in place, normalized by the point count.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / self.total() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.total());
        let n = self.len;
        for axis in 0..self.axes {
            let stride = n.pow((self.axes - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(n * 64).for_each(|chunk| {
                    let mut scratch = vec![C64::default(); plan.get_inplace_scratch_len()];
                    plan.process_with_scratch(chunk, &mut scratch);
                });
                continue;
            }
            // Gather strided lines block by block: a block of n*stride
            // contiguous values holds `stride` lines of this axis.
            let block = n * stride;
            data.par_chunks_mut(block).for_each(|blk| {
                let mut scratch = vec![C64::default(); plan.get_inplace_scratch_len()];
                let mut lines = vec![C64::default(); block];
                for i in 0..n {
                    for s in 0..stride {
                        lines[s * n + i] = blk[i * stride + s];
                    }
                }
                for line in lines.chunks_mut(n) {
                    plan.process_with_scratch(line, &mut scratch);
                }
                for i in 0..n {
                    for s in 0..stride {
                        blk[i * stride + s] = lines[s * n + i];
                    }
                }
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(axes: usize, n: usize, x: &[C64]) -> Vec<C64> {
        let total = n.pow(axes as u32);
        let idx = |mut i: usize| {
            let mut m = vec![0usize; axes];
            for a in (0..axes).rev() {
                m[a] = i % n;
                i /= n;
            }
            m
        };
        (0..total)
            .map(|k| {
                let km = idx(k);
                let mut s = C64::default();
                for (j, &v) in x.iter().enumerate() {
                    let jm = idx(j);
                    let phase: f64 = km.iter().zip(&jm).map(|(&a, &b)| (a * b) as f64).sum::<f64>()
                        * -2.0
                        * std::f64::consts::PI
                        / n as f64;
                    s += v * C64::from_polar(1.0, phase);
                }
                s
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_four_axes() {
        let (axes, n): (usize, usize) = (4, 4);
        let x: Vec<C64> = (0..n.pow(4))
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut y = x.clone();
        NdFft::new(axes, n).forward(&mut y);
        let z = naive_dft(axes, n, &x);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let fft = NdFft::new(2, 16);
        let x: Vec<C64> = (0..256).map(|i| C64::new((i as f64).sqrt(), -(i as f64) * 0.01)).collect();
        let mut y = x.clone();
        fft.forward(&mut y);
        fft.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }
}
