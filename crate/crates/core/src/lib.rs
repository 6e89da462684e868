//! Head-direction-cell ring attractor network for angular path integration.
//!
//! Angular velocity enters through two turning cells that drive a pair of
//! shift layers; the shift layers push the activity packet of the HDC ring
//! around, and the packet's population vector is the heading estimate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod error;
pub mod io;
pub mod kernel;
pub mod network;
pub mod neuron;
mod spectral;
pub mod tracker;

#[cfg(test)]
mod testutil;

pub use calibration::{Calibration, StimulusGain};
pub use error::{Error, Result};
pub use kernel::{build_kernel, TuningCurve, WeightKernel};
pub use network::{HdcNetwork, NetworkState, RingModel, TurningStimulus};
pub use neuron::NeuronParams;
pub use tracker::{track, TrackingReport};
