//! Heading tracking: replays an angular-velocity trajectory through the
//! network and compares the decoded heading against ground truth and a
//! trapezoid-rule integrator.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calibration::StimulusGain;
use crate::error::{Error, Result};
use crate::network::{angle_difference, wrap_angle, HdcNetwork, NetworkState, RingModel, TurningStimulus};

/// Per-frame budget at 100 Hz, milliseconds.
pub const FRAME_BUDGET_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Seconds.
    pub t: f64,
    /// Yaw rate, rad/s.
    pub omega: f64,
    /// Ground-truth yaw, radians.
    pub truth_heading: Option<f64>,
}

impl TrajectoryRecord {
    pub fn new(t: f64, omega: f64) -> Self {
        Self {
            t,
            omega,
            truth_heading: None,
        }
    }

    pub fn with_truth(t: f64, omega: f64, truth: f64) -> Self {
        Self {
            t,
            omega,
            truth_heading: Some(truth),
        }
    }
}

/// Checks that a trajectory is non-empty, finite and strictly increasing in time.
pub fn validate_records(records: &[TrajectoryRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("trajectory is empty".into()));
    }
    for (i, r) in records.iter().enumerate() {
        if !(r.t.is_finite() && r.omega.is_finite() && r.truth_heading.is_none_or(f64::is_finite)) {
            return Err(Error::InvalidParameter(format!("record {i} has a non-finite field")));
        }
        if i > 0 && r.t <= records[i - 1].t {
            return Err(Error::NonMonotonic {
                location: format!("record {i} (t = {} after {})", r.t, records[i - 1].t),
            });
        }
    }
    Ok(())
}

/// Shortest signed difference `a - b`, in degrees within `(-180, 180]`.
pub fn wrapped_error_deg(a: f64, b: f64) -> f64 {
    angle_difference(a, b).to_degrees()
}

/// Trapezoid-rule integration of the yaw rate, wrapped to `[0, 2 pi)`.
pub fn baseline_integrate(records: &[TrajectoryRecord], initial_heading: f64) -> Result<Vec<f64>> {
    validate_records(records)?;
    let mut out = Vec::with_capacity(records.len());
    let mut heading = initial_heading;
    out.push(wrap_angle(heading));
    for w in records.windows(2) {
        heading += (w[1].t - w[0].t) * 0.5 * (w[0].omega + w[1].omega);
        out.push(wrap_angle(heading));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub frames: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
    pub pct_over_10ms: f64,
}

impl TimingStats {
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        if samples_ms.is_empty() {
            return Self {
                frames: 0,
                mean_ms: 0.0,
                median_ms: 0.0,
                max_ms: 0.0,
                pct_over_10ms: 0.0,
            };
        }
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median_ms = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let over = sorted.iter().filter(|&&t| t > FRAME_BUDGET_MS).count();
        Self {
            frames: n,
            mean_ms: sorted.iter().sum::<f64>() / n as f64,
            median_ms,
            max_ms: sorted[n - 1],
            pct_over_10ms: 100.0 * over as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub t: f64,
    pub omega: f64,
    pub decoded_heading: f64,
    pub baseline_heading: f64,
    pub truth_heading: Option<f64>,
    pub error_deg: Option<f64>,
    pub baseline_error_deg: Option<f64>,
    /// `|omega|` exceeded the calibrated linear range.
    pub out_of_range: bool,
}

/// Summary of absolute wrapped errors, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean_deg: f64,
    pub max_deg: f64,
    pub min_deg: f64,
}

impl ErrorSummary {
    fn of(errors: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut n, mut sum, mut max, mut min) = (0usize, 0.0, f64::NEG_INFINITY, f64::INFINITY);
        for e in errors.map(f64::abs) {
            n += 1;
            sum += e;
            max = max.max(e);
            min = min.min(e);
        }
        (n > 0).then(|| Self {
            mean_deg: sum / n as f64,
            max_deg: max,
            min_deg: min,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub per_sample: Vec<SampleReport>,
    /// Network error; absent when the trajectory has no truth column.
    pub error: Option<ErrorSummary>,
    pub baseline_error: Option<ErrorSummary>,
    pub out_of_range_samples: usize,
    pub timing: TimingStats,
}

impl TrackingReport {
    pub fn mean_error_deg(&self) -> Option<f64> {
        self.error.map(|e| e.mean_deg)
    }

    pub fn max_error_deg(&self) -> Option<f64> {
        self.error.map(|e| e.max_deg)
    }

    pub fn min_error_deg(&self) -> Option<f64> {
        self.error.map(|e| e.min_deg)
    }

    /// Per-sample series as CSV: `t,omega,decoded,baseline,truth,err_hdc,err_baseline`
    /// (angles in degrees, empty cells where no truth exists).
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("t,omega,decoded,baseline,truth,err_hdc,err_baseline\n");
        for s in &self.per_sample {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.t,
                s.omega,
                s.decoded_heading.to_degrees(),
                s.baseline_heading.to_degrees(),
                opt(s.truth_heading.map(f64::to_degrees)),
                opt(s.error_deg),
                opt(s.baseline_error_deg),
            ));
        }
        out
    }
}

/// Stimulus applied over the interval between two records: the interval mean
/// of omega, which keeps the network input consistent with the trapezoid rule.
fn interval_stimulus(a: &TrajectoryRecord, b: &TrajectoryRecord, gain: &StimulusGain) -> TurningStimulus {
    TurningStimulus::from_velocity(0.5 * (a.omega + b.omega), gain.alpha)
}

/// Replays `records` through a fresh network started at `initial_heading`.
pub fn track(
    records: &[TrajectoryRecord],
    model: &Arc<RingModel>,
    gain: &StimulusGain,
    initial_heading: f64,
) -> Result<TrackingReport> {
    track_with_state(records, model, gain, initial_heading).map(|(report, _)| report)
}

/// [`track`], also returning the network state after the last frame.
pub fn track_with_state(
    records: &[TrajectoryRecord],
    model: &Arc<RingModel>,
    gain: &StimulusGain,
    initial_heading: f64,
) -> Result<(TrackingReport, NetworkState)> {
    validate_records(records)?;
    if !(gain.alpha > 0.0 && gain.alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("gain alpha must be > 0, got {}", gain.alpha)));
    }
    let baseline = baseline_integrate(records, initial_heading)?;
    let mut net = HdcNetwork::new(Arc::clone(model));
    net.init_at(wrap_angle(initial_heading))?;

    let mut decoded = Vec::with_capacity(records.len());
    decoded.push(net.decode()?);
    let mut frame_ms = Vec::with_capacity(records.len().saturating_sub(1));
    for w in records.windows(2) {
        let stim = interval_stimulus(&w[0], &w[1], gain);
        let start = Instant::now();
        net.run_frame(stim, w[1].t - w[0].t)?;
        let heading = net.decode()?;
        frame_ms.push(start.elapsed().as_secs_f64() * 1e3);
        decoded.push(heading);
    }

    let limit = gain.max_velocity;
    let per_sample: Vec<SampleReport> = records
        .iter()
        .zip(decoded.iter().zip(&baseline))
        .map(|(r, (&d, &b))| SampleReport {
            t: r.t,
            omega: r.omega,
            decoded_heading: d,
            baseline_heading: b,
            truth_heading: r.truth_heading,
            error_deg: r.truth_heading.map(|truth| wrapped_error_deg(d, truth)),
            baseline_error_deg: r.truth_heading.map(|truth| wrapped_error_deg(b, truth)),
            out_of_range: r.omega.abs() > limit,
        })
        .collect();
    let report = TrackingReport {
        error: ErrorSummary::of(per_sample.iter().filter_map(|s| s.error_deg)),
        baseline_error: ErrorSummary::of(per_sample.iter().filter_map(|s| s.baseline_error_deg)),
        out_of_range_samples: per_sample.iter().filter(|s| s.out_of_range).count(),
        per_sample,
        timing: TimingStats::from_samples(&frame_ms),
    };
    Ok((report, net.state().clone()))
}

/// Per-frame compute time over `repetitions` full replays.
pub fn benchmark(
    records: &[TrajectoryRecord],
    model: &Arc<RingModel>,
    gain: &StimulusGain,
    repetitions: usize,
) -> Result<TimingStats> {
    validate_records(records)?;
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    let mut frame_ms = Vec::with_capacity(repetitions * records.len().saturating_sub(1));
    for _ in 0..repetitions {
        let mut net = HdcNetwork::new(Arc::clone(model));
        net.init_at(0.0)?;
        for w in records.windows(2) {
            let stim = interval_stimulus(&w[0], &w[1], gain);
            let start = Instant::now();
            net.run_frame(stim, w[1].t - w[0].t)?;
            std::hint::black_box(net.decode()?);
            frame_ms.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    Ok(TimingStats::from_samples(&frame_ms))
}
