//! Thin helpers over `rustfft` for real signals sampled on a ring.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Unnormalized forward DFT: `X_k = sum_j x_j exp(-2 pi i j k / n)`.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse DFT including the `1/n` factor, so `inverse(forward(x)) == x`.
pub fn inverse(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Signed integer frequency of DFT bin `k` (`0, 1, .., -2, -1`).
#[inline]
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// True for the unpaired Nyquist bin of an even-length transform.
#[inline]
pub fn is_nyquist(k: usize, n: usize) -> bool {
    n.is_multiple_of(2) && 2 * k == n
}

/// Largest imaginary magnitude in `values`.
pub fn max_imag(values: &[Complex64]) -> f64 {
    values.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
}

/// Band-limited rotation of a ring signal by `angle` radians, so that
/// `out(theta) = x(theta - angle)` for samples at `theta_j = 2 pi j / n`.
pub fn rotate(values: &[f64], angle: f64) -> Vec<f64> {
    let n = values.len();
    let mut spectrum = forward(values);
    for (k, c) in spectrum.iter_mut().enumerate() {
        if is_nyquist(k, n) {
            // keep the unpaired bin real
            *c *= (signed_frequency(k, n) * angle).cos();
        } else {
            *c *= Complex64::from_polar(1.0, -signed_frequency(k, n) * angle);
        }
    }
    inverse(&spectrum).into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn forward_inverse_identity() {
        let x: Vec<f64> = (0..17).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let back = inverse(&forward(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn rotate_by_grid_step_is_cyclic_shift() {
        let n = 12;
        let x: Vec<f64> = (0..n).map(|i| (i * i) as f64).collect();
        let r = rotate(&x, TAU * 3.0 / n as f64);
        for j in 0..n {
            assert!((r[j] - x[(j + n - 3) % n]).abs() < 1e-9);
        }
    }

    #[test]
    fn rotate_single_harmonic_off_grid() {
        let n = 100;
        let theta = |j: usize| TAU * j as f64 / n as f64;
        let x: Vec<f64> = (0..n).map(|j| 3.0 + (2.0 * theta(j)).cos()).collect();
        let r = rotate(&x, 0.37);
        for (j, v) in r.iter().enumerate() {
            let expect = 3.0 + (2.0 * (theta(j) - 0.37)).cos();
            assert!((v - expect).abs() < 1e-12);
        }
    }
}
