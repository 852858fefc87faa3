//! Fixtures shared by the benchmarks.

use gossip_core::{generate, EventProbabilities, Model, Schedule, Topology, UpdateMode};

/// Symmetric ring model with constant weights and all three events enabled.
pub fn ring_model(n: usize) -> Model {
    let matrix = generate(Topology::Ring, n, 0).expect("ring is connected");
    let probs = EventProbabilities::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).expect("valid probabilities");
    Model::new(matrix, UpdateMode::Symmetric, probs, Schedule::constant(0.25), Schedule::constant(0.1))
        .expect("valid model")
}
