//! Shared fixtures for the benchmarks.

use grab_core::{
    generate_rbf, random_mask, unit_features, LearnerState, Network, Result, UcbObjective,
};

/// A selection objective on an `n`-node random geometric graph, built from a
/// fresh learner with a unit exploration weight.
pub fn objective(n: usize, k: usize, seed: u64) -> Result<UcbObjective> {
    let threshold = (8.0 / n as f64).sqrt().min(1.0);
    let net = Network::new(generate_rbf(n, 0.5, threshold, seed)?, k)?;
    let mask = random_mask(n, 0.2, seed)?;
    let feats = unit_features(net.basis(), &mask)?;
    let state = LearnerState::new(k, 0.01)?;
    let alpha = grab_core::KernelCoefficients::from_vector(nalgebra::DVector::from_fn(k, |i, _| {
        1.0 / (1.0 + i as f64)
    }))?;
    UcbObjective::new(&feats, &alpha, 1.0, &state)
}
