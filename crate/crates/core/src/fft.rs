//! Multi-dimensional complex FFT on cubic row-major arrays, built from
//! rustfft's one-dimensional plans.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct FftNd {
    n: usize,
    dims: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("n", &self.n).field("dims", &self.dims).finish()
    }
}

impl FftNd {
    pub fn new(n: usize, dims: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dims,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform in place, normalised by `1/len`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        let n = self.n;
        if self.dims == 0 {
            return;
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        for line in data.chunks_mut(n) {
            plan.process_with_scratch(line, &mut scratch);
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dims - 1 {
            let stride = n.pow((self.dims - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, b) in buf.iter_mut().enumerate() {
                        *b = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut buf, &mut scratch);
                    for (k, b) in buf.iter().enumerate() {
                        data[base + k * stride] = *b;
                    }
                }
            }
        }
    }
}

/// Signed integer frequency of index `k` on an `n`-point transform, with the
/// Nyquist index (even `n`) reported as `None`.
pub fn signed_frequency(k: usize, n: usize) -> Option<i64> {
    let k = k as i64;
    let n = n as i64;
    if n % 2 == 0 && k == n / 2 {
        None
    } else if k < (n + 1) / 2 {
        Some(k)
    } else {
        Some(k - n)
    }
}
