//! Exact one-slot expectation by enumeration, for small networks.
//!
//! Every ordered pair `(i, j)` is selected with probability `a_ij / n` and
//! both endpoints apply one shared event. Averaging the post-slot dispersion
//! over all outcomes gives `E[L(k+1) | x]` exactly, which must equal the
//! quadratic form `xc^T E[Psi^2] xc`.

use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

use crate::dynamics::{EventProbabilities, Model};
use crate::graph::SelectionMatrix;
use crate::rng::trial_rng;
use crate::theory::expected_second_moment_matrix;

/// Largest network the enumeration accepts.
pub const ORACLE_MAX_N: usize = 4;

/// Agreement required between the two sides.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("enumeration supports n <= {ORACLE_MAX_N}, got n = {0}")]
    TooLarge(usize),
    #[error("the enumeration oracle covers symmetric updates only")]
    NotSymmetric,
}

fn dispersion_about(x: &[f64], centre: f64) -> f64 {
    x.iter().map(|v| (v - centre) * (v - centre)).sum()
}

/// `E[L(k+1) | x(k) = x]` by enumerating pairs and shared events; `centre`
/// is the initial average the dispersion is measured against.
pub fn enumerate_expected_dispersion(
    a: &SelectionMatrix,
    probs: &EventProbabilities,
    t: f64,
    s: f64,
    x: &[f64],
    centre: f64,
) -> f64 {
    let n = a.n();
    // Signed step toward the partner: attraction, neglect, repulsion.
    let events = [(probs.alpha, t), (probs.beta, 0.0), (probs.gamma, -s)];
    let mut expected = 0.0;
    let mut next = x.to_vec();
    for i in 0..n {
        for j in 0..n {
            let pair = a.get(i, j) / n as f64;
            if i == j || pair == 0.0 {
                continue;
            }
            for &(q, w) in &events {
                if q == 0.0 {
                    continue;
                }
                next.copy_from_slice(x);
                next[i] = x[i] + w * (x[j] - x[i]);
                next[j] = x[j] + w * (x[i] - x[j]);
                expected += pair * q * dispersion_about(&next, centre);
            }
        }
    }
    expected
}

/// `(x - centre)^T E[Psi^2] (x - centre)`.
pub fn spectral_expected_dispersion(
    a: &SelectionMatrix,
    probs: &EventProbabilities,
    t: f64,
    s: f64,
    x: &[f64],
    centre: f64,
) -> f64 {
    let xc = DVector::from_iterator(x.len(), x.iter().map(|v| v - centre));
    let m = expected_second_moment_matrix(a, probs, t, s);
    xc.dot(&(m * &xc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub states: usize,
    pub max_abs_discrepancy: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_abs_discrepancy <= ORACLE_TOLERANCE
    }
}

/// Compares both sides on `states` random states drawn uniformly from
/// `[0, n)^n`, at slot `k` of the model's schedules.
pub fn run_oracle(model: &Model, k: u64, states: usize, seed: u64) -> Result<OracleReport, OracleError> {
    let n = model.n();
    if n > ORACLE_MAX_N {
        return Err(OracleError::TooLarge(n));
    }
    if !model.mode.is_symmetric() {
        return Err(OracleError::NotSymmetric);
    }
    let (t, s) = (model.t(k), model.s(k));
    let mut rng = trial_rng(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..states {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..n as f64)).collect();
        let centre = x.iter().sum::<f64>() / n as f64;
        let lhs = enumerate_expected_dispersion(&model.matrix, &model.probs, t, s, &x, centre);
        let rhs = spectral_expected_dispersion(&model.matrix, &model.probs, t, s, &x, centre);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(OracleReport { states, max_abs_discrepancy: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::UpdateMode;
    use crate::graph::{generate, reference_matrix, Topology};
    use crate::schedule::Schedule;

    fn model(a: SelectionMatrix, t: f64, s: f64, probs: EventProbabilities) -> Model {
        Model::new(a, UpdateMode::Symmetric, probs, Schedule::constant(t), Schedule::constant(s)).unwrap()
    }

    #[test]
    fn complete_three_matches() {
        let a = generate(Topology::Complete, 3, 0).unwrap();
        let probs = EventProbabilities::new(0.5, 0.2, 0.3).unwrap();
        let report = run_oracle(&model(a, 0.3, 0.7, probs), 0, 100, 1).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn critical_config_is_identity() {
        let s = (7f64.sqrt() - 2.0) / 4.0;
        let third = 1.0 / 3.0;
        let probs = EventProbabilities::new(third, third, third).unwrap();
        let m = model(reference_matrix(), 0.25, s, probs);
        let x = [1.0, 2.0, 3.0, 4.0];
        let lhs = enumerate_expected_dispersion(&m.matrix, &m.probs, 0.25, s, &x, 2.5);
        assert!((lhs - 5.0).abs() < 1e-12, "{lhs}");
        assert!(run_oracle(&m, 0, 100, 7).unwrap().passed());
    }

    #[test]
    fn rejects_large_or_asymmetric() {
        let probs = EventProbabilities::new(1.0, 0.0, 0.0).unwrap();
        let big = model(generate(Topology::Ring, 5, 0).unwrap(), 0.5, 0.1, probs);
        assert_eq!(run_oracle(&big, 0, 1, 0), Err(OracleError::TooLarge(5)));
        let mut asym = model(reference_matrix(), 0.5, 0.1, probs);
        asym.mode = UpdateMode::asymmetric();
        assert_eq!(run_oracle(&asym, 0, 1, 0), Err(OracleError::NotSymmetric));
    }
}
