//! Discrete Fourier transform helpers.
//!
//! The forward transform is unnormalized and the inverse carries the `1/N`
//! factor, so that `dft(a * b) == dft(a) .* dft(b)` holds for circular
//! convolution without extra scale factors.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward DFT: `X_f = sum_t x_t exp(-2 pi i f t / N)`.
pub fn forward(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    forward_in_place(&mut buf);
    buf
}

/// Inverse DFT including the `1/N` factor.
pub fn inverse(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    inverse_in_place(&mut buf);
    buf
}

pub fn forward_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

pub fn inverse_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let x: Vec<Complex64> = (0..12)
            .map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1))
            .collect();
        let back = inverse(&forward(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let mut x = vec![Complex64::new(0.0, 0.0); 7];
        x[0] = Complex64::new(1.0, 0.0);
        for v in forward(&x) {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }
}
