use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// In-place unnormalized 2-D FFT on a row-major square buffer.
pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::default(); len],
            tmp: vec![Complex64::default(); n * n],
        }
    }

    pub(crate) fn forward(&mut self, buf: &mut [Complex64]) {
        let f = self.fwd.clone();
        self.run(&*f, buf);
    }

    pub(crate) fn inverse(&mut self, buf: &mut [Complex64]) {
        let f = self.inv.clone();
        self.run(&*f, buf);
    }

    fn run(&mut self, f: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let n = self.n;
        f.process_with_scratch(buf, &mut self.scratch);
        transpose(buf, &mut self.tmp, n);
        f.process_with_scratch(&mut self.tmp, &mut self.scratch);
        transpose(&self.tmp, buf, n);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}
