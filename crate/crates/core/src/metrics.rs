//! Agreement and dispersion measures, and finite-horizon classification.

use serde::{Deserialize, Serialize};

use crate::dynamics::NetworkState;

/// Measures of one state. `l` is taken against the initial average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSample {
    pub k: u64,
    /// Largest node value.
    pub max: f64,
    /// Smallest node value.
    pub min: f64,
    pub spread: f64,
    /// Sum of squared deviations from the initial average.
    pub l: f64,
}

pub fn spread(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

pub fn dispersion(x: &[f64], x_ave: f64) -> f64 {
    x.iter().map(|v| (v - x_ave).powi(2)).sum()
}

pub fn measure(state: &NetworkState, x_ave: f64) -> MeasureSample {
    let (min, max) = state
        .x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    MeasureSample { k: state.k, max, min, spread: max - min, l: dispersion(&state.x, x_ave) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Agreed,
    Diverged,
    Undecided,
}

/// Finite-horizon stand-in for the almost-sure notions: agreed when the last
/// spread is below `eps_agree`, diverged when any spread exceeded `big_m`.
/// Divergence takes precedence.
pub fn classify(samples: &[MeasureSample], eps_agree: f64, big_m: f64) -> Classification {
    if samples.iter().any(|s| !s.spread.is_finite() || s.spread > big_m) {
        return Classification::Diverged;
    }
    match samples.last() {
        Some(last) if last.spread < eps_agree => Classification::Agreed,
        _ => Classification::Undecided,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_with_spread(k: u64, spread: f64) -> MeasureSample {
        MeasureSample { k, max: spread, min: 0.0, spread, l: spread * spread }
    }

    #[test]
    fn ramp_measures() {
        let m = measure(&NetworkState::new(vec![1.0, 2.0, 3.0, 4.0], 0), 2.5);
        assert_eq!((m.max, m.min, m.spread, m.l), (4.0, 1.0, 3.0, 5.0));
    }

    #[test]
    fn constant_state() {
        let c = 1.75;
        let m = measure(&NetworkState::new(vec![c; 5], 3), 0.5);
        assert_eq!(m.spread, 0.0);
        assert!((m.l - 5.0 * (c - 0.5f64).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn two_node_sandwich() {
        let m = measure(&NetworkState::new(vec![0.0, 1.0], 0), 0.5);
        assert_eq!((m.l, m.spread), (0.5, 1.0));
        assert!(0.5 * m.spread.powi(2) <= m.l && m.l <= 2.0 * m.spread.powi(2));
    }

    #[test]
    fn classification_examples() {
        let flat_zero: Vec<_> = (0..5).map(|k| sample_with_spread(k, 0.0)).collect();
        assert_eq!(classify(&flat_zero, 1e-6, 1e6), Classification::Agreed);
        let blowup = [3.0, 30.0, 3e6].iter().enumerate().map(|(k, &s)| sample_with_spread(k as u64, s)).collect::<Vec<_>>();
        assert_eq!(classify(&blowup, 1e-6, 1e3), Classification::Diverged);
        let flat: Vec<_> = (0..5).map(|k| sample_with_spread(k, 3.0)).collect();
        assert_eq!(classify(&flat, 1e-6, 1e6), Classification::Undecided);
        let overflow = [sample_with_spread(0, 1.0), sample_with_spread(1, f64::INFINITY)];
        assert_eq!(classify(&overflow, 1e-6, 1e6), Classification::Diverged);
    }

    proptest! {
        #[test]
        fn sandwich_bounds(x in prop::collection::vec(-100.0f64..100.0, 2..12)) {
            let ave = x.iter().sum::<f64>() / x.len() as f64;
            let m = measure(&NetworkState::new(x.clone(), 0), ave);
            let h2 = m.spread * m.spread;
            prop_assert!(m.spread >= 0.0 && m.l >= 0.0);
            prop_assert!(0.5 * h2 <= m.l * (1.0 + 1e-12) + 1e-12);
            prop_assert!(m.l <= x.len() as f64 * h2 * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn classification_monotone_in_thresholds(spreads in prop::collection::vec(0.0f64..1e4, 1..8),
                                                 eps in 1e-9f64..10.0, shrink in 0.0f64..1.0,
                                                 big_m in 1.0f64..1e5) {
            let samples: Vec<_> = spreads.iter().enumerate().map(|(k, &s)| sample_with_spread(k as u64, s)).collect();
            let base = classify(&samples, eps, big_m);
            if base == Classification::Undecided {
                prop_assert_ne!(classify(&samples, eps * shrink, big_m), Classification::Agreed);
            }
            if base == Classification::Diverged {
                prop_assert_eq!(classify(&samples, eps, big_m * shrink), Classification::Diverged);
            }
        }
    }
}
