use std::sync::{Arc, OnceLock};

use crate::kernel::{build_kernel, TuningCurve, DEFAULT_GAMMA, DEFAULT_LAMBDA};
use crate::network::RingModel;
use crate::neuron::{NeuronParams, DEFAULT_DT};

/// Default model, built once per test binary.
pub fn model() -> Arc<RingModel> {
    static MODEL: OnceLock<Arc<RingModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let neuron = NeuronParams::default();
            let curve = TuningCurve::default_for(&neuron);
            let kernel = build_kernel(&curve, &neuron, DEFAULT_LAMBDA, DEFAULT_GAMMA).unwrap();
            RingModel::new(Arc::new(kernel), neuron, DEFAULT_DT).unwrap()
        })
        .clone()
}
