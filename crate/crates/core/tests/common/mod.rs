//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use hdcnet::NeuronParams;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

pub fn sigmoid_inverse(f: f64, p: &NeuronParams) -> f64 {
    p.h0 - (p.r_max / f - 1.0).ln() / p.beta
}

/// Target rates and the inputs that sustain them, built from first principles.
pub fn target(a: f64, m: f64, n: usize, p: &NeuronParams) -> (Vec<f64>, Vec<f64>) {
    let b = ((1.0 - 1e-6) * p.r_max - a) / m.exp();
    let f: Vec<f64> = (0..n).map(|j| a + b * (m * (TAU * j as f64 / n as f64).cos()).exp()).collect();
    let lo = 1e-6 * p.r_max;
    let hi = (1.0 - 1e-6) * p.r_max;
    let u = f.iter().map(|&x| sigmoid_inverse(x.clamp(lo, hi), p)).collect();
    (f, u)
}

pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, &v)| {
                let phase = -TAU * (j * k % n) as f64 / n as f64;
                (re + v * phase.cos(), im + v * phase.sin())
            })
        })
        .collect()
}

pub fn naive_idft_real(spectrum: &[(f64, f64)]) -> Vec<f64> {
    let n = spectrum.len();
    (0..n)
        .map(|j| {
            spectrum.iter()
                .enumerate()
                .map(|(k, &(re, im))| {
                    let phase = TAU * (j * k % n) as f64 / n as f64;
                    re * phase.cos() - im * phase.sin()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Minimizes |U_k - W_k F_k|^2 + lambda |W_k|^2 for each bin, writing
/// W_k = x + iy and solving the 2x2 normal equations.
pub fn per_frequency_oracle(f: &[f64], u: &[f64], lambda: f64) -> Vec<f64> {
    let fh = naive_dft(f);
    let uh = naive_dft(u);
    let w: Vec<(f64, f64)> = fh
        .iter()
        .zip(&uh)
        .map(|(&(a, b), &(ur, ui))| {
            // residual = A [x, y] - [ur, ui] with A = [[a, -b], [b, a]]
            let m = Matrix2::new(a, -b, b, a);
            let normal = m.transpose() * m + Matrix2::identity() * lambda;
            let rhs = m.transpose() * Vector2::new(ur, ui);
            let sol = normal.lu().solve(&rhs).expect("ridge normal matrix is positive definite");
            (sol[0], sol[1])
        })
        .collect();
    naive_idft_real(&w)
}

/// Dense ridge regression: minimize ||u - C w||^2 + lambda ||w||^2 where
/// (C w)_j = sum_i f_{(j-i) mod n} w_i is circular convolution.
pub fn time_domain_oracle(f: &[f64], u: &[f64], lambda: f64) -> Vec<f64> {
    let n = f.len();
    let c = DMatrix::from_fn(n, n, |j, i| f[(j + n - i) % n]);
    let normal = c.transpose() * &c + DMatrix::identity(n, n) * lambda;
    let rhs = c.transpose() * DVector::from_column_slice(u);
    normal.cholesky().expect("positive definite").solve(&rhs).iter().copied().collect()
}
