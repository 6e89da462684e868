//! Three-layer ring attractor: an HDC ring plus shift-left and shift-right
//! rings driven by turning cells.
//!
//! Conventions: headings increase counterclockwise, cell `i` prefers
//! `theta_i = 2 pi i / n`, and a left turn is a positive angular velocity.
//! Every projection is indexed by `d = (j - i) mod n` from the receiving cell
//! `i` to the sending cell `j`; the `d = 0` self-connection is skipped.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{target_profile, WeightKernel};
use crate::neuron::{self, NeuronParams};
use crate::spectral;

/// Zero-stimulus relaxation applied by [`HdcNetwork::init_at`], seconds.
pub const SETTLE_TIME: f64 = 0.5;

/// Minimum population-vector magnitude, as a fraction of `n * r_max`.
pub const DEGENERATE_FRACTION: f64 = 1e-3;

/// Convergence target for the settled attractor profile, Hz per second of
/// simulated time.
const ATTRACTOR_TOLERANCE: f64 = 1e-9;
/// Upper bound on the simulated time spent finding the settled profile.
const ATTRACTOR_MAX_TIME: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub sim_time: f64,
    pub hdc_rates: Vec<f64>,
    pub shift_left_rates: Vec<f64>,
    pub shift_right_rates: Vec<f64>,
}

impl NetworkState {
    /// HDC rates set to `hdc_rates`, both shift layers at half of them.
    pub fn from_hdc_profile(hdc_rates: Vec<f64>) -> Self {
        let half: Vec<f64> = hdc_rates.iter().map(|f| f / 2.0).collect();
        Self {
            sim_time: 0.0,
            shift_left_rates: half.clone(),
            shift_right_rates: half,
            hdc_rates,
        }
    }

    pub fn n(&self) -> usize {
        self.hdc_rates.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    fn rates(&self) -> impl Iterator<Item = &f64> {
        self.hdc_rates
            .iter()
            .chain(&self.shift_left_rates)
            .chain(&self.shift_right_rates)
    }

    /// True when every rate lies strictly inside `(0, r_max)`.
    pub fn rates_bounded(&self, r_max: f64) -> bool {
        self.rates().all(|&f| f > 0.0 && f < r_max)
    }
}

/// Input currents broadcast by the two turning cells.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TurningStimulus {
    pub left: f64,
    pub right: f64,
}

impl TurningStimulus {
    pub const NONE: Self = Self { left: 0.0, right: 0.0 };

    pub fn new(left: f64, right: f64) -> Result<Self> {
        for (side, v) in [("left", left), ("right", right)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{side} turning stimulus must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { left, right })
    }

    /// One-sided drive for angular velocity `omega` (rad/s): `alpha * |omega|`
    /// to the layer matching the turn direction, zero to the other.
    pub fn from_velocity(omega: f64, alpha: f64) -> Self {
        let drive = alpha * omega.abs();
        if omega > 0.0 {
            Self { left: drive, right: 0.0 }
        } else if omega < 0.0 {
            Self { left: 0.0, right: drive }
        } else {
            Self::NONE
        }
    }
}

/// Population-vector decode of a ring of rates, in `[0, 2 pi)`.
pub fn decode(rates: &[f64], r_max: f64) -> Result<f64> {
    let n = rates.len();
    let (mut s, mut c) = (0.0, 0.0);
    for (i, f) in rates.iter().enumerate() {
        let theta = TAU * i as f64 / n as f64;
        s += f * theta.sin();
        c += f * theta.cos();
    }
    resolve_heading(s, c, n, r_max)
}

fn resolve_heading(s: f64, c: f64, n: usize, r_max: f64) -> Result<f64> {
    let magnitude = s.hypot(c);
    let threshold = DEGENERATE_FRACTION * n as f64 * r_max;
    if !(magnitude > threshold) {
        return Err(Error::DegenerateProfile { magnitude, threshold });
    }
    Ok(wrap_angle(s.atan2(c)))
}

/// Signed difference `a - b` wrapped into `(-pi, pi]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Immutable model shared by every network built on one kernel: weights,
/// neuron parameters, time step and the settled zero-stimulus activity profile.
#[derive(Debug)]
pub struct RingModel {
    kernel: Arc<WeightKernel>,
    neuron: NeuronParams,
    dt: f64,
    attractor: Vec<f64>,
}

impl RingModel {
    pub fn new(kernel: Arc<WeightKernel>, neuron: NeuronParams, dt: f64) -> Result<Arc<Self>> {
        neuron.validate()?;
        neuron.check_dt(dt)?;
        kernel.validate()?;
        let attractor = settle_attractor(&kernel, &neuron)?;
        Ok(Arc::new(Self {
            kernel,
            neuron,
            dt,
            attractor,
        }))
    }

    pub fn kernel(&self) -> &Arc<WeightKernel> {
        &self.kernel
    }

    pub fn neuron(&self) -> &NeuronParams {
        &self.neuron
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    /// Settled HDC profile with its peak on cell 0.
    pub fn attractor_profile(&self) -> &[f64] {
        &self.attractor
    }

    /// Settled HDC profile centred on `heading` (band-limited rotation).
    pub fn attractor_at(&self, heading: f64) -> Vec<f64> {
        spectral::rotate(&self.attractor, heading)
            .into_iter()
            .map(|f| f.clamp(f64::MIN_POSITIVE, self.neuron.r_max * (1.0 - f64::EPSILON)))
            .collect()
    }
}

/// Relaxes the HDC ring alone from the target profile until it stops moving.
///
/// With zero stimulus both shift layers carry identical rates and their
/// projections cancel exactly, so the HDC ring evolves on its own. The
/// profile's width mode relaxes on a time scale of seconds, far slower than
/// `tau`, which is why this runs to convergence rather than for a fixed time.
fn settle_attractor(kernel: &WeightKernel, neuron: &NeuronParams) -> Result<Vec<f64>> {
    let n = kernel.n();
    let dt = neuron.max_dt();
    let k = dt / neuron.tau;
    let mut rates = target_profile(&kernel.curve);
    let mut doubled = vec![0.0; 2 * n];
    let mut input = vec![0.0; n];
    let max_steps = (ATTRACTOR_MAX_TIME / dt) as usize;
    for _ in 0..max_steps {
        fill_doubled(&mut doubled, &rates);
        input.fill(0.0);
        correlate_into(&mut input, &kernel.h_to_h, &doubled);
        let mut change: f64 = 0.0;
        for (f, &x) in rates.iter_mut().zip(&input) {
            let delta = k * (neuron.transfer(x) - *f);
            *f += delta;
            change = change.max(delta.abs());
        }
        if change / dt < ATTRACTOR_TOLERANCE {
            return Ok(rates);
        }
    }
    Err(Error::KernelInvariant(format!(
        "activity did not settle within {ATTRACTOR_MAX_TIME} s of simulated time"
    )))
}

#[inline]
fn fill_doubled(doubled: &mut [f64], rates: &[f64]) {
    let n = rates.len();
    doubled[..n].copy_from_slice(rates);
    doubled[n..].copy_from_slice(rates);
}

/// `out[i] += sum_{d=1}^{n-1} w[d] * src[i + d]` over a doubled source buffer.
#[inline]
fn correlate_into(out: &mut [f64], w: &[f64], doubled: &[f64]) {
    let n = out.len();
    for (d, &wd) in w.iter().enumerate().skip(1) {
        for (o, &s) in out.iter_mut().zip(&doubled[d..d + n]) {
            *o += wd * s;
        }
    }
}

/// A running network instance. Single-threaded; build one per trajectory.
#[derive(Debug, Clone)]
pub struct HdcNetwork {
    model: Arc<RingModel>,
    state: NetworkState,
    sin: Vec<f64>,
    cos: Vec<f64>,
    hdc_buf: Vec<f64>,
    left_buf: Vec<f64>,
    right_buf: Vec<f64>,
    hdc_input: Vec<f64>,
    shift_drive: Vec<f64>,
    side_input: Vec<f64>,
}

impl HdcNetwork {
    /// Network holding the settled profile at heading 0, not yet relaxed
    /// with its shift layers; call [`init_at`](Self::init_at) before use.
    pub fn new(model: Arc<RingModel>) -> Self {
        let n = model.n();
        let theta: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let state = NetworkState::from_hdc_profile(model.attractor_profile().to_vec());
        Self {
            sin: theta.iter().map(|t| t.sin()).collect(),
            cos: theta.iter().map(|t| t.cos()).collect(),
            hdc_buf: vec![0.0; 2 * n],
            left_buf: vec![0.0; 2 * n],
            right_buf: vec![0.0; 2 * n],
            hdc_input: vec![0.0; n],
            shift_drive: vec![0.0; n],
            side_input: vec![0.0; n],
            state,
            model,
        }
    }

    pub fn model(&self) -> &Arc<RingModel> {
        &self.model
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn set_state(&mut self, state: NetworkState) -> Result<()> {
        let n = self.model.n();
        for len in [
            state.hdc_rates.len(),
            state.shift_left_rates.len(),
            state.shift_right_rates.len(),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        self.state = state;
        Ok(())
    }

    /// Places the settled activity packet at `heading`, shift layers at half
    /// of it, then relaxes for [`SETTLE_TIME`] with zero stimulus.
    pub fn init_at(&mut self, heading: f64) -> Result<()> {
        if !heading.is_finite() {
            return Err(Error::InvalidParameter(format!("heading must be finite, got {heading}")));
        }
        self.state = NetworkState::from_hdc_profile(self.model.attractor_at(heading));
        self.run_for(TurningStimulus::NONE, SETTLE_TIME)?;
        self.state.sim_time = 0.0;
        Ok(())
    }

    /// Advances all three layers by one Euler step of the model's `dt`.
    pub fn step(&mut self, stim: TurningStimulus) -> Result<()> {
        self.step_with(stim, self.model.dt)
    }

    fn step_with(&mut self, stim: TurningStimulus, dt: f64) -> Result<()> {
        let neuron = *self.model.neuron();
        neuron.check_dt(dt)?;
        let kernel = Arc::clone(self.model.kernel());
        let k = dt / neuron.tau;

        fill_doubled(&mut self.hdc_buf, &self.state.hdc_rates);
        fill_doubled(&mut self.left_buf, &self.state.shift_left_rates);
        fill_doubled(&mut self.right_buf, &self.state.shift_right_rates);

        self.hdc_input.fill(0.0);
        correlate_into(&mut self.hdc_input, &kernel.h_to_h, &self.hdc_buf);
        correlate_into(&mut self.hdc_input, &kernel.s_to_h_left, &self.left_buf);
        correlate_into(&mut self.hdc_input, &kernel.s_to_h_right, &self.right_buf);

        self.shift_drive.fill(0.0);
        correlate_into(&mut self.shift_drive, &kernel.h_to_s, &self.hdc_buf);

        neuron::relax(&mut self.state.hdc_rates, &self.hdc_input, k, &neuron);
        for (layer, drive) in [
            (&mut self.state.shift_left_rates, stim.left),
            (&mut self.state.shift_right_rates, stim.right),
        ] {
            for (x, &s) in self.side_input.iter_mut().zip(&self.shift_drive) {
                *x = s + drive;
            }
            neuron::relax(layer, &self.side_input, k, &neuron);
        }
        self.state.sim_time += dt;
        Ok(())
    }

    /// Holds `stim` for `frame_dt` seconds using `ceil(frame_dt / dt)` equal
    /// Euler sub-steps. Returns the number of sub-steps taken.
    pub fn run_frame(&mut self, stim: TurningStimulus, frame_dt: f64) -> Result<usize> {
        if !(frame_dt.is_finite() && frame_dt > 0.0) {
            return Err(Error::InvalidParameter(format!("frame_dt must be > 0, got {frame_dt}")));
        }
        let steps = substeps(frame_dt, self.model.dt);
        let sub_dt = frame_dt / steps as f64;
        let start = self.state.sim_time;
        for _ in 0..steps {
            self.step_with(stim, sub_dt)?;
        }
        self.state.sim_time = start + frame_dt;
        Ok(steps)
    }

    /// Runs with constant stimulus for `duration` seconds at the model's `dt`.
    pub fn run_for(&mut self, stim: TurningStimulus, duration: f64) -> Result<()> {
        let steps = (duration / self.model.dt).round() as usize;
        for _ in 0..steps {
            self.step(stim)?;
        }
        Ok(())
    }

    /// Decoded heading of the HDC layer, in `[0, 2 pi)`.
    pub fn decode(&self) -> Result<f64> {
        let rates = &self.state.hdc_rates;
        let s: f64 = rates.iter().zip(&self.sin).map(|(f, s)| f * s).sum();
        let c: f64 = rates.iter().zip(&self.cos).map(|(f, c)| f * c).sum();
        resolve_heading(s, c, rates.len(), self.model.neuron().r_max)
    }
}

/// Number of Euler sub-steps used for a frame of `frame_dt` seconds.
pub fn substeps(frame_dt: f64, dt: f64) -> usize {
    ((frame_dt / dt) - 1e-9).ceil().max(1.0) as usize
}
