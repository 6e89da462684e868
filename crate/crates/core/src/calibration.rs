//! Empirical stimulus-to-velocity calibration.
//!
//! A sweep drives one shift layer at a series of constant stimulus levels and
//! measures how fast the decoded heading turns. A line through the origin,
//! `velocity = c * stimulus`, is fitted to the sweep and inverted into the
//! tracker's gain `alpha = 1 / c` (stimulus per rad/s).

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{HdcNetwork, RingModel, TurningStimulus};

pub const MIN_SWEEP_DURATION: f64 = 2.0;
pub const DEFAULT_SWEEP_DURATION: f64 = 6.0;
/// Default automatic sweep range, degrees per second.
pub const AUTO_RANGE_DEG: (f64, f64) = (3.0, 45.0);
pub const AUTO_LEVELS: usize = 12;
pub const MIN_FIT_SAMPLES: usize = 5;
pub const MIN_FIT_R2: f64 = 0.99;
/// Relative residual below which a swept level counts as inside the linear range.
pub const LINEAR_RESIDUAL: f64 = 0.05;
/// Decoding interval while measuring velocity, seconds.
const PROBE_INTERVAL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftSide {
    Left,
    Right,
}

impl ShiftSide {
    pub fn stimulus(self, level: f64) -> TurningStimulus {
        match self {
            ShiftSide::Left => TurningStimulus { left: level, right: 0.0 },
            ShiftSide::Right => TurningStimulus { left: 0.0, right: level },
        }
    }
}

/// One swept level. `velocity` is `None` when the activity packet dissolved
/// and the heading could no longer be decoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub stimulus: f64,
    pub velocity: Option<f64>,
}

/// Measures the steady angular velocity (rad/s) of the packet under a
/// constant one-sided stimulus: the least-squares slope of the unwrapped
/// decoded heading over the second half of a `duration`-second run.
pub fn measure_velocity(model: &Arc<RingModel>, side: ShiftSide, level: f64, duration: f64) -> Result<f64> {
    let stim = side.stimulus(level);
    TurningStimulus::new(stim.left, stim.right)?;
    let mut net = HdcNetwork::new(Arc::clone(model));
    net.init_at(0.0)?;
    let frames = (duration / PROBE_INTERVAL).round() as usize;
    let mut unwrapped = net.decode()?;
    let mut previous = unwrapped;
    let mut samples = Vec::with_capacity(frames / 2 + 1);
    for k in 1..=frames {
        net.run_frame(stim, PROBE_INTERVAL)?;
        let heading = net.decode()?;
        unwrapped += crate::network::angle_difference(heading, previous);
        previous = heading;
        if 2 * k >= frames {
            samples.push((k as f64 * PROBE_INTERVAL, unwrapped));
        }
    }
    Ok(slope(&samples))
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs one independent simulation per stimulus level, in parallel.
pub fn sweep(model: &Arc<RingModel>, stimuli: &[f64], duration: f64, side: ShiftSide) -> Result<Vec<SweepSample>> {
    if !(duration >= MIN_SWEEP_DURATION) {
        return Err(Error::InvalidParameter(format!(
            "sweep duration must be >= {MIN_SWEEP_DURATION} s, got {duration}"
        )));
    }
    if stimuli.is_empty() {
        return Err(Error::InvalidParameter("no stimulus levels given".into()));
    }
    if stimuli.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::InvalidParameter("stimulus levels must be finite and >= 0".into()));
    }
    if stimuli.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("stimulus levels must be strictly ascending".into()));
    }
    stimuli
        .par_iter()
        .map(|&level| match measure_velocity(model, side, level, duration) {
            Ok(v) => Ok(SweepSample { stimulus: level, velocity: Some(v) }),
            Err(Error::DegenerateProfile { .. }) => Ok(SweepSample { stimulus: level, velocity: None }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Stimulus levels expected to span `min_velocity..=max_velocity` (rad/s),
/// spaced evenly, chosen from a pilot measurement at a small stimulus.
pub fn auto_stimuli(
    model: &Arc<RingModel>,
    min_velocity: f64,
    max_velocity: f64,
    levels: usize,
    duration: f64,
) -> Result<Vec<f64>> {
    if !(min_velocity > 0.0 && max_velocity > min_velocity && levels >= 2) {
        return Err(Error::InvalidParameter(format!(
            "bad auto range {min_velocity}..{max_velocity} rad/s with {levels} levels"
        )));
    }
    let pilot = 0.01;
    let speed = measure_velocity(model, ShiftSide::Left, pilot, duration.max(MIN_SWEEP_DURATION))?;
    if !(speed > 0.0) {
        return Err(Error::FitFailure(format!(
            "pilot stimulus {pilot} turned the packet at {speed} rad/s; expected a positive (counterclockwise) turn"
        )));
    }
    let per_unit = speed / pilot;
    Ok((0..levels)
        .map(|i| {
            let v = min_velocity + (max_velocity - min_velocity) * i as f64 / (levels - 1) as f64;
            v / per_unit
        })
        .collect())
}

/// Linear stimulus-to-velocity law, inverted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusGain {
    /// Stimulus per rad/s.
    pub alpha: f64,
    /// Coefficient of determination of the through-origin fit.
    pub fit_r2: f64,
    /// Largest swept speed (rad/s) whose residual stays below 5 %.
    pub max_velocity: f64,
}

/// Least-squares line `velocity = c * stimulus` through the origin.
///
/// `fit_r2` uses the centred total sum of squares, the stricter of the two
/// usual conventions for through-origin fits.
pub fn fit_gain(samples: &[(f64, f64)]) -> Result<StimulusGain> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::FitFailure(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|(s, v)| !(s.is_finite() && v.is_finite())) {
        return Err(Error::FitFailure("non-finite sample".into()));
    }
    let sss: f64 = samples.iter().map(|(s, _)| s * s).sum();
    let ssv: f64 = samples.iter().map(|(s, v)| s * v).sum();
    if sss == 0.0 {
        return Err(Error::FitFailure("all stimulus levels are zero".into()));
    }
    let c = ssv / sss;
    if !(c > 0.0) {
        return Err(Error::FitFailure(format!(
            "slope {c} rad/s per unit stimulus is not positive; shift-layer sign convention is flipped"
        )));
    }
    let mean_v = samples.iter().map(|(_, v)| v).sum::<f64>() / samples.len() as f64;
    let ss_res: f64 = samples.iter().map(|(s, v)| (v - c * s).powi(2)).sum();
    let ss_tot: f64 = samples.iter().map(|(_, v)| (v - mean_v).powi(2)).sum();
    let fit_r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    if fit_r2 < MIN_FIT_R2 {
        return Err(Error::FitFailure(format!("r^2 = {fit_r2:.5} below {MIN_FIT_R2}")));
    }
    let max_velocity = samples
        .iter()
        .filter(|(s, v)| *s > 0.0 && (v - c * s).abs() < LINEAR_RESIDUAL * c * s)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    Ok(StimulusGain {
        alpha: 1.0 / c,
        fit_r2,
        max_velocity,
    })
}

/// Calibration file contents: a gain bound to the kernel it was measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub fit_r2: f64,
    pub max_velocity: f64,
    pub gamma: f64,
    pub kernel_hash: String,
}

impl Calibration {
    pub fn new(gain: StimulusGain, model: &RingModel) -> Self {
        Self {
            alpha: gain.alpha,
            fit_r2: gain.fit_r2,
            max_velocity: gain.max_velocity,
            gamma: model.kernel().gamma,
            kernel_hash: model.kernel().content_hash(),
        }
    }

    pub fn gain(&self) -> StimulusGain {
        StimulusGain {
            alpha: self.alpha,
            fit_r2: self.fit_r2,
            max_velocity: self.max_velocity,
        }
    }

    /// Refuses a calibration measured on a different kernel.
    pub fn check_kernel(&self, kernel_hash: &str) -> Result<()> {
        if self.kernel_hash == kernel_hash {
            Ok(())
        } else {
            Err(Error::CalibrationMismatch {
                expected: self.kernel_hash.clone(),
                actual: kernel_hash.to_string(),
            })
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("calibration serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Sweeps the left layer and fits the gain. Degenerate levels are dropped
/// from the fit but kept in the returned table.
pub fn calibrate(model: &Arc<RingModel>, stimuli: &[f64], duration: f64) -> Result<(Calibration, Vec<SweepSample>)> {
    let table = sweep(model, stimuli, duration, ShiftSide::Left)?;
    let usable: Vec<(f64, f64)> = table
        .iter()
        .filter_map(|s| s.velocity.map(|v| (s.stimulus, v)))
        .collect();
    let gain = fit_gain(&usable)?;
    Ok((Calibration::new(gain, model), table))
}

/// CSV rendering of a sweep table (`stimulus,velocity_rad_s,velocity_deg_s`).
pub fn sweep_csv(table: &[SweepSample]) -> String {
    let mut out = String::from("stimulus,velocity_rad_s,velocity_deg_s\n");
    for s in table {
        match s.velocity {
            Some(v) => out.push_str(&format!("{},{},{}\n", s.stimulus, v, v.to_degrees())),
            None => out.push_str(&format!("{},,\n", s.stimulus)),
        }
    }
    out
}
