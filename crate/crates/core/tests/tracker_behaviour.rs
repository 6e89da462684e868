use std::sync::Arc;

use hdcnet::calibration::StimulusGain;
use hdcnet::kernel::{build_kernel, TuningCurve, DEFAULT_GAMMA, DEFAULT_LAMBDA};
use hdcnet::network::RingModel;
use hdcnet::neuron::DEFAULT_DT;
use hdcnet::tracker::{track, TrajectoryRecord};
use hdcnet::NeuronParams;

fn model() -> Arc<RingModel> {
    let p = NeuronParams::default();
    let kernel = build_kernel(&TuningCurve::default_for(&p), &p, DEFAULT_LAMBDA, DEFAULT_GAMMA).unwrap();
    RingModel::new(Arc::new(kernel), p, DEFAULT_DT).unwrap()
}

// Gain measured by the default 6 s calibration sweep; only its rough size matters here.
fn gain() -> StimulusGain {
    StimulusGain {
        alpha: 0.6027,
        fit_r2: 0.9998,
        max_velocity: 0.77,
    }
}

/// 100 Hz samples of `omega(t)` with exactly integrated truth from `start`.
fn trajectory(duration: f64, start: f64, omega: impl Fn(f64) -> f64) -> Vec<TrajectoryRecord> {
    let frames = (duration / 0.01).round() as usize;
    let mut heading = start;
    let mut out: Vec<TrajectoryRecord> = Vec::with_capacity(frames + 1);
    for k in 0..=frames {
        let t = k as f64 * 0.01;
        let w = omega(t);
        if let Some(prev) = out.last() {
            heading += 0.5 * 0.01 * (prev.omega + w);
        }
        out.push(TrajectoryRecord::with_truth(t, w, heading));
    }
    out
}

#[test]
fn zero_rate_holds_heading_for_a_minute() {
    let start = 90f64.to_radians();
    let records = trajectory(60.0, start, |_| 0.0);
    let report = track(&records, &model(), &gain(), start).unwrap();
    assert!(report.error.unwrap().max_deg < 1.0);
    assert_eq!(report.baseline_error.unwrap().max_deg, 0.0);
}

#[test]
fn error_transient_opposes_rate_step() {
    let m = model();
    let w = 20f64.to_radians();
    // step up at t = 1 s
    let up = trajectory(1.5, 0.0, |t| if t < 1.0 { 0.0 } else { w });
    let r = track(&up, &m, &gain(), 0.0).unwrap();
    let before = r.per_sample[100].error_deg.unwrap();
    let after = r.per_sample[120].error_deg.unwrap();
    assert!(after - before < 0.0, "step up: {before} -> {after}");

    // step down after a few seconds of turning
    let down = trajectory(4.5, 0.0, |t| if t < 4.0 { w } else { 0.0 });
    let r = track(&down, &m, &gain(), 0.0).unwrap();
    let before = r.per_sample[400].error_deg.unwrap();
    let after = r.per_sample[420].error_deg.unwrap();
    assert!(after - before > 0.0, "step down: {before} -> {after}");
}

#[test]
fn reported_statistics_follow_samples() {
    let records = trajectory(3.0, 0.5, |t| 0.4 * (2.0 * t).sin());
    let report = track(&records, &model(), &gain(), 0.5).unwrap();
    let errs: Vec<f64> = report.per_sample.iter().map(|s| s.error_deg.unwrap()).collect();
    assert!(errs.iter().all(|e| *e > -180.0 && *e <= 180.0));
    let e = report.error.unwrap();
    assert_eq!(e.max_deg, errs.iter().map(|x| x.abs()).fold(0.0, f64::max));
    assert_eq!(report.timing.frames, records.len() - 1);
}
