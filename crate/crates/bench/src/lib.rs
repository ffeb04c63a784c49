//! Shared inputs for the benchmarks.

use raysr_core::fitting::TrialRecord;
use raysr_core::synth::SyntheticDesign;
use raysr_core::{DistributionParams, ModelSpec};

/// Baseline parameters at `w` with the lateral offset applied.
pub fn baseline_params(w: f64) -> DistributionParams {
    ModelSpec::baseline().distribution_params(w, None).expect("baseline is defined everywhere").params
}

/// The default synthetic data set with outliers.
pub fn trials(seed: u64) -> Vec<TrialRecord> {
    SyntheticDesign::full_size(seed).generate().trials
}
