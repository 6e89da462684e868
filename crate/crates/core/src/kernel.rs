//! Synaptic weight synthesis for the ring network.
//!
//! The recurrent kernel is the regularized deconvolution of the steady-state
//! synaptic input `U = phi^-1(F)` by the target rate profile `F`:
//!
//! ```text
//! W_k = U_k * conj(F_k) / (lambda + |F_k|^2)      (per DFT bin k)
//! ```
//!
//! Shift-layer projections use the spectral derivative of `W`, scaled by the
//! shift gain `gamma`; the HDC to shift-layer projection is `W / 2`.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::neuron::{NeuronParams, RATE_CLAMP_MARGIN};
use crate::spectral;

pub const DEFAULT_LAMBDA: f64 = 25824.0;
pub const DEFAULT_GAMMA: f64 = 0.2;
pub const DEFAULT_N: usize = 100;
pub const KERNEL_FILE_VERSION: u32 = 1;

/// Largest tolerated imaginary residue of an inverse transform.
const IMAG_TOLERANCE: f64 = 1e-9;

/// Target tuning curve `f(dtheta) = a + b * exp(m * cos(dtheta))` over `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningCurve {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    #[serde(skip, default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    DEFAULT_N
}

impl TuningCurve {
    pub const DEFAULT_A: f64 = 8.95;
    pub const DEFAULT_M: f64 = 5.29;

    /// Curve whose peak `a + b e^m` sits exactly at `(1 - 1e-6) * r_max`.
    pub fn pinned(a: f64, m: f64, n: usize, neuron: &NeuronParams) -> Result<Self> {
        let b = ((1.0 - RATE_CLAMP_MARGIN) * neuron.r_max - a) / m.exp();
        let curve = Self { a, b, m, n };
        curve.validate(neuron)?;
        Ok(curve)
    }

    /// Default curve (`a = 8.95`, `m = 5.29`, `n = 100`) with a pinned peak.
    pub fn default_for(neuron: &NeuronParams) -> Self {
        Self::pinned(Self::DEFAULT_A, Self::DEFAULT_M, DEFAULT_N, neuron)
            .expect("default tuning curve is valid")
    }

    pub fn validate(&self, neuron: &NeuronParams) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidParameter(format!("need at least 3 cells, got {}", self.n)));
        }
        if ![self.a, self.b, self.m].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("tuning curve parameters must be finite".into()));
        }
        if self.a <= 0.0 || self.b < 0.0 || self.m < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tuning curve needs a > 0, b >= 0, m >= 0 (a={}, b={}, m={})",
                self.a, self.b, self.m
            )));
        }
        if self.peak() >= neuron.r_max {
            return Err(Error::InvalidParameter(format!(
                "tuning curve peak {:.4} Hz reaches r_max {} Hz",
                self.peak(),
                neuron.r_max
            )));
        }
        Ok(())
    }

    pub fn rate_at(&self, dtheta: f64) -> f64 {
        self.a + self.b * (self.m * dtheta.cos()).exp()
    }

    pub fn peak(&self) -> f64 {
        self.rate_at(0.0)
    }

    /// Grid spacing between preferred directions, radians.
    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn preferred_directions(&self) -> Vec<f64> {
        preferred_directions(self.n)
    }
}

/// `theta_i = 2 pi i / n`.
pub fn preferred_directions(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// Target rates `F[i] = a + b exp(m cos theta_i)`, peaked at cell 0.
pub fn target_profile(curve: &TuningCurve) -> Vec<f64> {
    curve
        .preferred_directions()
        .into_iter()
        .map(|theta| curve.rate_at(theta))
        .collect()
}

/// Recurrent kernel `W`, indexed by cell distance `0..n`.
///
/// Target rates are clamped into the invertible range of the transfer
/// function before inversion.
pub fn synthesize_recurrent(curve: &TuningCurve, neuron: &NeuronParams, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let rates: Vec<f64> = target_profile(curve).into_iter().map(|f| neuron.clamp_rate(f)).collect();
    let inputs = rates
        .iter()
        .map(|&f| neuron.inverse_transfer(f))
        .collect::<Result<Vec<_>>>()?;

    let rates_hat = spectral::forward(&rates);
    let inputs_hat = spectral::forward(&inputs);
    let weights_hat: Vec<Complex64> = rates_hat
        .iter()
        .zip(&inputs_hat)
        .map(|(f, u)| u * f.conj() / (lambda + f.norm_sqr()))
        .collect();
    let w = real_part(&spectral::inverse(&weights_hat), "recurrent kernel")?;
    Ok(symmetrize_even(&w))
}

/// Spectral derivative of a ring kernel with respect to angle.
///
/// The Nyquist bin of an even-length kernel has no real derivative and is dropped.
pub fn derivative_kernel(w: &[f64]) -> Result<Vec<f64>> {
    let n = w.len();
    let mut spectrum = spectral::forward(w);
    for (k, c) in spectrum.iter_mut().enumerate() {
        if spectral::is_nyquist(k, n) {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, spectral::signed_frequency(k, n));
        }
    }
    real_part(&spectral::inverse(&spectrum), "derivative kernel")
}

fn real_part(values: &[Complex64], what: &str) -> Result<Vec<f64>> {
    let residue = spectral::max_imag(values);
    if residue >= IMAG_TOLERANCE {
        return Err(Error::KernelInvariant(format!(
            "{what} has imaginary residue {residue:e}"
        )));
    }
    Ok(values.iter().map(|c| c.re).collect())
}

/// Projects `w` onto kernels with `w[k] == w[n - k]`.
fn symmetrize_even(w: &[f64]) -> Vec<f64> {
    let n = w.len();
    (0..n).map(|k| 0.5 * (w[k] + w[(n - k) % n])).collect()
}

/// Projects `w` onto kernels with `w[k] == -w[n - k]`.
fn symmetrize_odd(w: &[f64]) -> Vec<f64> {
    let n = w.len();
    (0..n).map(|k| 0.5 * (w[k] - w[(n - k) % n])).collect()
}

/// All synaptic weights of the three-layer network, indexed by signed cell
/// distance `d = (j - i) mod n` from postsynaptic cell `i` to presynaptic `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightKernel {
    pub curve: TuningCurve,
    pub lambda: f64,
    pub gamma: f64,
    /// HDC to HDC.
    pub h_to_h: Vec<f64>,
    /// HDC to either shift layer (`h_to_h / 2`).
    pub h_to_s: Vec<f64>,
    /// Shift-left layer to HDC (`gamma * W'`).
    pub s_to_h_left: Vec<f64>,
    /// Shift-right layer to HDC (`-s_to_h_left`).
    pub s_to_h_right: Vec<f64>,
}

pub fn build_kernel(curve: &TuningCurve, neuron: &NeuronParams, lambda: f64, gamma: f64) -> Result<WeightKernel> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    curve.validate(neuron)?;
    let h_to_h = synthesize_recurrent(curve, neuron, lambda)?;
    let derivative = symmetrize_odd(&derivative_kernel(&h_to_h)?);
    let s_to_h_left: Vec<f64> = derivative.iter().map(|w| gamma * w).collect();
    let kernel = WeightKernel {
        curve: *curve,
        lambda,
        gamma,
        h_to_s: h_to_h.iter().map(|w| w / 2.0).collect(),
        s_to_h_right: s_to_h_left.iter().map(|w| -w).collect(),
        s_to_h_left,
        h_to_h,
    };
    kernel.validate()?;
    Ok(kernel)
}

/// Residuals of the kernel's structural identities; all zero for a freshly
/// built kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub recurrent_even: f64,
    pub shift_odd: f64,
    pub half_amplitude: f64,
    pub left_right: f64,
    pub shift_sum: f64,
}

impl SymmetryReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.recurrent_even,
            self.shift_odd,
            self.half_amplitude,
            self.left_right,
            self.shift_sum,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl WeightKernel {
    pub fn n(&self) -> usize {
        self.h_to_h.len()
    }

    pub fn symmetry_report(&self) -> SymmetryReport {
        let n = self.n();
        let max_over = |f: &dyn Fn(usize) -> f64| (0..n).map(f).fold(0.0, f64::max);
        SymmetryReport {
            recurrent_even: max_over(&|k| (self.h_to_h[k] - self.h_to_h[(n - k) % n]).abs()),
            shift_odd: max_over(&|k| (self.s_to_h_left[k] + self.s_to_h_left[(n - k) % n]).abs()),
            half_amplitude: max_over(&|k| (self.h_to_s[k] - self.h_to_h[k] / 2.0).abs()),
            left_right: max_over(&|k| (self.s_to_h_right[k] + self.s_to_h_left[k]).abs()),
            shift_sum: self.s_to_h_left.iter().sum::<f64>().abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.curve.n;
        for (name, v) in [
            ("w_hh", &self.h_to_h),
            ("w_hs", &self.h_to_s),
            ("w_sh_left", &self.s_to_h_left),
            ("w_sh_right", &self.s_to_h_right),
        ] {
            if v.len() != n {
                return Err(Error::KernelInvariant(format!("{name} has {} entries, expected {n}", v.len())));
            }
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::KernelInvariant(format!("{name} contains {bad}")));
            }
        }
        let scale = self
            .h_to_h
            .iter()
            .chain(&self.s_to_h_left)
            .map(|w| w.abs())
            .fold(f64::MIN_POSITIVE, f64::max);
        let report = self.symmetry_report();
        if report.max_residual() > 1e-12 * scale {
            return Err(Error::KernelInvariant(format!("symmetry residuals {report:?}")));
        }
        Ok(())
    }

    /// Hex SHA-256 of the kernel file contents; identifies the kernel a
    /// calibration was measured on.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&KernelFile::from(self)).expect("kernel serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&KernelFile::from(self)).expect("kernel serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let file: KernelFile = serde_json::from_str(text)?;
        Ok(file.into())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let kernel = Self::from_json(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        kernel.validate()?;
        Ok(kernel)
    }
}

/// On-disk layout of a kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelFile {
    version: u32,
    n: usize,
    lambda: f64,
    gamma: f64,
    curve: TuningCurve,
    w_hh: Vec<f64>,
    w_hs: Vec<f64>,
    w_sh_left: Vec<f64>,
    w_sh_right: Vec<f64>,
}

impl From<&WeightKernel> for KernelFile {
    fn from(k: &WeightKernel) -> Self {
        Self {
            version: KERNEL_FILE_VERSION,
            n: k.curve.n,
            lambda: k.lambda,
            gamma: k.gamma,
            curve: k.curve,
            w_hh: k.h_to_h.clone(),
            w_hs: k.h_to_s.clone(),
            w_sh_left: k.s_to_h_left.clone(),
            w_sh_right: k.s_to_h_right.clone(),
        }
    }
}

impl From<KernelFile> for WeightKernel {
    fn from(f: KernelFile) -> Self {
        Self {
            curve: TuningCurve { n: f.n, ..f.curve },
            lambda: f.lambda,
            gamma: f.gamma,
            h_to_h: f.w_hh,
            h_to_s: f.w_hs,
            s_to_h_left: f.w_sh_left,
            s_to_h_right: f.w_sh_right,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neuron() -> NeuronParams {
        NeuronParams::default()
    }

    fn curve() -> TuningCurve {
        TuningCurve::default_for(&neuron())
    }

    #[test]
    fn pinned_amplitude() {
        let c = curve();
        assert!((c.b - 0.339_057_993).abs() < 1e-8, "b = {}", c.b);
        assert!((c.peak() - (1.0 - 1e-6) * 76.2).abs() < 1e-10);
    }

    #[test]
    fn profile_values_and_symmetry() {
        let c = curve();
        let f = target_profile(&c);
        // a + b e^-m with the pinned b
        assert!((f[50] - 8.951_709_5).abs() < 1e-6, "{}", f[50]);
        assert!((f[0] - (1.0 - 1e-6) * 76.2).abs() < 1e-10);
        for k in 1..c.n {
            assert!((f[k] - f[c.n - k]).abs() < 1e-12);
            assert!(f[k] < f[0]);
        }
    }

    #[test]
    fn quoted_amplitude_exceeds_rate_ceiling() {
        let c = TuningCurve {
            b: 0.344,
            ..curve()
        };
        assert!(c.validate(&neuron()).is_err());
    }

    #[test]
    fn huge_lambda_flattens_kernel() {
        let w = synthesize_recurrent(&curve(), &neuron(), 1e15).unwrap();
        assert!(w.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn recurrent_kernel_shape() {
        let w = synthesize_recurrent(&curve(), &neuron(), DEFAULT_LAMBDA).unwrap();
        let n = w.len();
        for k in 1..n {
            assert_eq!(w[k], w[n - k]);
        }
        // excitatory near, inhibitory at mid distances
        assert!(w[1] > 0.0 && w[2] > 0.0);
        assert!(w[12] < 0.0 && w[50] < 0.0);
        assert!(w[1] > w[10]);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let d = derivative_kernel(&[3.5; 16]).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn derivative_of_cosine() {
        let n = 100;
        let theta = preferred_directions(n);
        let w: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let d = derivative_kernel(&w).unwrap();
        for (dk, t) in d.iter().zip(&theta) {
            assert!((dk + t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_agrees_with_central_differences() {
        let w = synthesize_recurrent(&curve(), &neuron(), DEFAULT_LAMBDA).unwrap();
        let n = w.len();
        let h = TAU / n as f64;
        let d = derivative_kernel(&w).unwrap();
        // fourth-order central stencil; the three-point one carries ~1.4 % truncation error here
        let at = |k: usize, s: isize| w[(k as isize + s).rem_euclid(n as isize) as usize];
        let fd: Vec<f64> = (0..n)
            .map(|k| (8.0 * (at(k, 1) - at(k, -1)) - (at(k, 2) - at(k, -2))) / (12.0 * h))
            .collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| d[b].abs().total_cmp(&d[a].abs()));
        for &k in &idx[..3] {
            assert!(((fd[k] - d[k]) / d[k]).abs() < 0.01, "k={k}: fd {} vs {}", fd[k], d[k]);
        }
    }

    #[test]
    fn zero_gamma_silences_shift_projection() {
        let k = build_kernel(&curve(), &neuron(), DEFAULT_LAMBDA, 0.0).unwrap();
        assert!(k.s_to_h_left.iter().chain(&k.s_to_h_right).all(|&w| w == 0.0));
    }

    #[test]
    fn built_kernel_identities_hold_exactly() {
        let k = build_kernel(&curve(), &neuron(), DEFAULT_LAMBDA, DEFAULT_GAMMA).unwrap();
        let n = k.n();
        for i in 0..n {
            assert_eq!(k.h_to_h[i], k.h_to_h[(n - i) % n]);
            assert_eq!(k.s_to_h_left[i], -k.s_to_h_left[(n - i) % n]);
            assert_eq!(k.h_to_s[i], k.h_to_h[i] / 2.0);
            assert_eq!(k.s_to_h_right[i], -k.s_to_h_left[i]);
        }
        assert!(k.s_to_h_left.iter().sum::<f64>().abs() < 1e-9);
        // left-layer cells excite HDCs on the counterclockwise side
        assert!(k.s_to_h_left[1] < 0.0 && k.s_to_h_left[n - 1] > 0.0);
    }

    #[test]
    fn negative_gamma_rejected() {
        assert!(build_kernel(&curve(), &neuron(), DEFAULT_LAMBDA, -0.1).is_err());
        assert!(build_kernel(&curve(), &neuron(), -1.0, 0.1).is_err());
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let k = build_kernel(&curve(), &neuron(), DEFAULT_LAMBDA, DEFAULT_GAMMA).unwrap();
        let back = WeightKernel::from_json(&k.to_json()).unwrap();
        assert_eq!(k, back);
        assert_eq!(k.content_hash(), back.content_hash());
    }

    #[test]
    fn json_field_names() {
        let k = build_kernel(&curve(), &neuron(), DEFAULT_LAMBDA, DEFAULT_GAMMA).unwrap();
        let v: serde_json::Value = serde_json::from_str(&k.to_json()).unwrap();
        for key in ["version", "n", "lambda", "gamma", "curve", "w_hh", "w_hs", "w_sh_left", "w_sh_right"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["n"], 100);
        assert_eq!(v["lambda"], 25824.0);
        assert!(v["curve"].get("a").is_some() && v["curve"].get("b").is_some() && v["curve"].get("m").is_some());
    }

    #[test]
    fn tampered_kernel_fails_validation() {
        let mut k = build_kernel(&curve(), &neuron(), DEFAULT_LAMBDA, DEFAULT_GAMMA).unwrap();
        k.h_to_h[3] += 1e-3;
        assert!(matches!(k.validate(), Err(Error::KernelInvariant(_))));
        let mut k = build_kernel(&curve(), &neuron(), DEFAULT_LAMBDA, DEFAULT_GAMMA).unwrap();
        k.s_to_h_right.pop();
        assert!(k.validate().is_err());
    }
}
