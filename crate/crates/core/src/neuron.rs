//! Rate-based neuron model.
//!
//! Each cell is described by a single firing rate `f` that relaxes towards the
//! sigmoid transfer of its synaptic input:
//!
//! ```text
//! tau * df/dt = -f + phi(x),    phi(x) = r_max / (1 + exp(-beta * (x - h0)))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default explicit Euler step, seconds.
pub const DEFAULT_DT: f64 = 0.0005;

/// Relative margin kept between a clamped rate and the ends of `(0, r_max)`.
pub const RATE_CLAMP_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Time constant of the rate dynamics, seconds.
    pub tau: f64,
    /// Saturation firing rate, Hz.
    pub r_max: f64,
    /// Sigmoid slope.
    pub beta: f64,
    /// Sigmoid midpoint, input units.
    pub h0: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            tau: 0.020,
            r_max: 76.2,
            beta: 0.82,
            h0: 2.46,
        }
    }
}

impl NeuronParams {
    pub fn new(tau: f64, r_max: f64, beta: f64, h0: f64) -> Result<Self> {
        let p = Self {
            tau,
            r_max,
            beta,
            h0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("tau", self.tau)?;
        positive("r_max", self.r_max)?;
        positive("beta", self.beta)?;
        if !self.h0.is_finite() {
            return Err(Error::InvalidParameter(format!("h0 must be finite, got {}", self.h0)));
        }
        Ok(())
    }

    /// Sigmoid transfer from synaptic input to firing rate (Hz).
    #[inline]
    pub fn transfer(&self, x: f64) -> f64 {
        self.r_max / (1.0 + (-self.beta * (x - self.h0)).exp())
    }

    /// Synaptic input that produces firing rate `f` at steady state.
    pub fn inverse_transfer(&self, f: f64) -> Result<f64> {
        if !(f > 0.0 && f < self.r_max) {
            return Err(Error::RateOutOfDomain {
                rate: f,
                r_max: self.r_max,
            });
        }
        Ok(self.h0 - (self.r_max / f - 1.0).ln() / self.beta)
    }

    /// Clamps `f` into `[m * r_max, (1 - m) * r_max]` with `m = RATE_CLAMP_MARGIN`,
    /// the range on which [`inverse_transfer`](Self::inverse_transfer) is always defined.
    pub fn clamp_rate(&self, f: f64) -> f64 {
        let lo = RATE_CLAMP_MARGIN * self.r_max;
        let hi = (1.0 - RATE_CLAMP_MARGIN) * self.r_max;
        f.clamp(lo, hi)
    }

    /// Largest Euler step accepted by [`euler_step`].
    pub fn max_dt(&self) -> f64 {
        self.tau / 10.0
    }

    pub fn check_dt(&self, dt: f64) -> Result<()> {
        let max = self.max_dt();
        if dt.is_finite() && dt > 0.0 && dt <= max * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::UnstableTimeStep { dt, max })
        }
    }
}

/// One explicit Euler step of the rate equation for a vector of cells.
pub fn euler_step(rates: &[f64], inputs: &[f64], dt: f64, p: &NeuronParams) -> Result<Vec<f64>> {
    let mut out = rates.to_vec();
    euler_step_in_place(&mut out, inputs, dt, p)?;
    Ok(out)
}

/// In-place variant of [`euler_step`], used on the simulation hot path.
pub fn euler_step_in_place(rates: &mut [f64], inputs: &[f64], dt: f64, p: &NeuronParams) -> Result<()> {
    if rates.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: rates.len(),
            actual: inputs.len(),
        });
    }
    p.check_dt(dt)?;
    relax(rates, inputs, dt / p.tau, p);
    Ok(())
}

#[inline]
pub(crate) fn relax(rates: &mut [f64], inputs: &[f64], k: f64, p: &NeuronParams) {
    for (f, &x) in rates.iter_mut().zip(inputs) {
        *f += k * (p.transfer(x) - *f);
    }
}
