//! One meeting slot of the gossip process: pair selection, event draws and
//! the attraction / neglect / repulsion state update.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, SelectionMatrix};
use crate::schedule::{Role, Schedule, ScheduleError};

/// States with a coordinate beyond this magnitude end the trajectory as diverged.
pub const DIVERGENCE_GUARD: f64 = 1e150;

/// Tolerance on `alpha + beta + gamma = 1`.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("event probabilities must lie in [0, 1] and sum to 1, got alpha={alpha}, beta={beta}, gamma={gamma}")]
    BadProbabilities { alpha: f64, beta: f64, gamma: f64 },
    #[error("state has {got} entries but the selection matrix has {n} nodes")]
    StateLength { got: usize, n: usize },
    #[error("initial state entry {0} is not finite")]
    NonFiniteInitial(usize),
    #[error("state left the finite range at slot {k}")]
    NonFiniteState { k: u64 },
    #[error("{role} schedule: {source}")]
    Schedule { role: &'static str, source: ScheduleError },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProbabilities {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EventProbabilities {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, DynamicsError> {
        let p = EventProbabilities { alpha, beta, gamma };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), DynamicsError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let sum = self.alpha + self.beta + self.gamma;
        if in_unit(self.alpha) && in_unit(self.beta) && in_unit(self.gamma) && (sum - 1.0).abs() <= PROBABILITY_TOLERANCE {
            Ok(())
        } else {
            Err(DynamicsError::BadProbabilities { alpha: self.alpha, beta: self.beta, gamma: self.gamma })
        }
    }

    /// Draws one event. `gamma == 0` never yields repulsion and
    /// `alpha == 0` never yields attraction, regardless of rounding in the sum.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Event {
        let u: f64 = rng.gen();
        if u < self.alpha {
            Event::Attraction
        } else if u < 1.0 - self.gamma {
            Event::Neglect
        } else {
            Event::Repulsion
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveRule {
    Initiator,
    Responder,
    Uniform,
}

/// How the events of the two endpoints of a selected pair are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UpdateMode {
    /// Both endpoints apply the same event.
    Symmetric,
    /// One endpoint draws an event, the other neglects.
    Asymmetric {
        #[serde(default = "default_active_rule")]
        active_rule: ActiveRule,
    },
}

fn default_active_rule() -> ActiveRule {
    ActiveRule::Uniform
}

impl UpdateMode {
    pub fn asymmetric() -> Self {
        UpdateMode::Asymmetric { active_rule: ActiveRule::Uniform }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, UpdateMode::Symmetric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    Attraction,
    Neglect,
    Repulsion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub k: u64,
}

impl NetworkState {
    pub fn new(x: Vec<f64>, k: u64) -> Self {
        NetworkState { x, k }
    }

    pub fn average(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub initiator: usize,
    pub partner: usize,
    pub event_i: Event,
    pub event_j: Event,
    pub t: f64,
    pub s: f64,
}

/// Per-row cumulative distributions over positive entries, for drawing the
/// partner of a drawn node.
#[derive(Debug, Clone)]
pub struct PairSampler {
    rows: Vec<Vec<(usize, f64)>>,
}

impl PairSampler {
    pub fn new(a: &SelectionMatrix) -> Self {
        let rows = (0..a.n())
            .map(|i| {
                let mut acc = 0.0;
                a.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(j, &v)| {
                        acc += v;
                        (j, acc)
                    })
                    .collect()
            })
            .collect();
        PairSampler { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Ordered pair `(i, j)` with probability `a_ij / n`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let i = rng.gen_range(0..self.rows.len());
        let row = &self.rows[i];
        let u: f64 = rng.gen::<f64>() * row.last().map_or(1.0, |&(_, c)| c);
        let j = row.iter().find(|&&(_, c)| u < c).unwrap_or(&row[row.len() - 1]).0;
        (i, j)
    }
}

/// Draws an ordered pair from `a`. Builds a [`PairSampler`] per call; reuse one
/// in loops.
pub fn sample_pair<R: Rng + ?Sized>(a: &SelectionMatrix, rng: &mut R) -> (usize, usize) {
    PairSampler::new(a).sample(rng)
}

/// Events for the initiator and the partner of a selected pair.
pub fn sample_events<R: Rng + ?Sized>(mode: UpdateMode, probs: &EventProbabilities, rng: &mut R) -> (Event, Event) {
    match mode {
        UpdateMode::Symmetric => {
            let e = probs.draw(rng);
            (e, e)
        }
        UpdateMode::Asymmetric { active_rule } => {
            let initiator_active = match active_rule {
                ActiveRule::Initiator => true,
                ActiveRule::Responder => false,
                ActiveRule::Uniform => rng.gen::<bool>(),
            };
            let e = probs.draw(rng);
            if initiator_active {
                (e, Event::Neglect)
            } else {
                (Event::Neglect, e)
            }
        }
    }
}

#[inline]
fn updated(own: f64, other: f64, event: Event, t: f64, s: f64) -> f64 {
    match event {
        Event::Attraction => (1.0 - t) * own + t * other,
        Event::Neglect => own,
        Event::Repulsion => (1.0 + s) * own - s * other,
    }
}

/// Applies `outcome` in place; both endpoints read pre-step values.
pub fn apply_step_in_place(state: &mut NetworkState, outcome: &StepOutcome) -> Result<(), DynamicsError> {
    let (i, j) = (outcome.initiator, outcome.partner);
    let (xi, xj) = (state.x[i], state.x[j]);
    let new_i = updated(xi, xj, outcome.event_i, outcome.t, outcome.s);
    let new_j = updated(xj, xi, outcome.event_j, outcome.t, outcome.s);
    state.x[i] = new_i;
    state.x[j] = new_j;
    state.k += 1;
    let out_of_range = |v: f64| !v.is_finite() || v.abs() > DIVERGENCE_GUARD;
    if out_of_range(new_i) || out_of_range(new_j) {
        return Err(DynamicsError::NonFiniteState { k: state.k });
    }
    Ok(())
}

pub fn apply_step(state: &NetworkState, outcome: &StepOutcome) -> Result<NetworkState, DynamicsError> {
    let mut next = state.clone();
    apply_step_in_place(&mut next, outcome)?;
    Ok(next)
}

/// Full model: selection matrix, coupling, event law and weight schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub matrix: SelectionMatrix,
    pub mode: UpdateMode,
    pub probs: EventProbabilities,
    pub attraction: Schedule,
    pub repulsion: Schedule,
}

impl Model {
    /// Validates probabilities, schedules and weak connectivity of the graph.
    pub fn new(
        matrix: SelectionMatrix,
        mode: UpdateMode,
        probs: EventProbabilities,
        attraction: Schedule,
        repulsion: Schedule,
    ) -> Result<Self, DynamicsError> {
        probs.check()?;
        attraction
            .check(Role::Attraction)
            .map_err(|source| DynamicsError::Schedule { role: "attraction", source })?;
        repulsion
            .check(Role::Repulsion)
            .map_err(|source| DynamicsError::Schedule { role: "repulsion", source })?;
        if !matrix.induced_graph().is_weakly_connected() {
            return Err(GraphError::Disconnected.into());
        }
        Ok(Model { matrix, mode, probs, attraction, repulsion })
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn t(&self, k: u64) -> f64 {
        self.attraction.value(k, Role::Attraction)
    }

    pub fn s(&self, k: u64) -> f64 {
        self.repulsion.value(k, Role::Repulsion)
    }

    pub fn stepper(&self) -> Stepper<'_> {
        Stepper { model: self, sampler: PairSampler::new(&self.matrix) }
    }
}

/// Draws and applies slots for one model.
pub struct Stepper<'a> {
    model: &'a Model,
    sampler: PairSampler,
}

impl Stepper<'_> {
    pub fn draw<R: Rng + ?Sized>(&self, k: u64, rng: &mut R) -> (StepOutcome, bool) {
        let (initiator, partner) = self.sampler.sample(rng);
        let (event_i, event_j) = sample_events(self.model.mode, &self.model.probs, rng);
        let (t, t_clipped) = self.model.attraction.value_flagged(k, Role::Attraction);
        let (s, s_clipped) = self.model.repulsion.value_flagged(k, Role::Repulsion);
        (StepOutcome { initiator, partner, event_i, event_j, t, s }, t_clipped || s_clipped)
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &mut NetworkState, rng: &mut R) -> Result<StepOutcome, DynamicsError> {
        let (outcome, _) = self.draw(state.k, rng);
        apply_step_in_place(state, &outcome)?;
        Ok(outcome)
    }
}

/// Snapshots of one run plus how it ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<NetworkState>,
    /// Slot at which the state left the finite range, if it did.
    pub diverged_at: Option<u64>,
    /// Slots whose `T_k` or `S_k` was clipped into its legal range.
    pub clipped_slots: u64,
}

/// Runs `steps` slots from `x0` at slot `k0`, keeping snapshots at every
/// slot in `checkpoints` as well as at `k0` and the final slot.
pub fn run_trajectory<R: Rng + ?Sized>(
    model: &Model,
    x0: &[f64],
    k0: u64,
    steps: u64,
    checkpoints: &[u64],
    rng: &mut R,
) -> Result<Trajectory, DynamicsError> {
    if x0.len() != model.n() {
        return Err(DynamicsError::StateLength { got: x0.len(), n: model.n() });
    }
    if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteInitial(i));
    }
    let end = k0 + steps;
    let keep = |k: u64| k == k0 || k == end || checkpoints.binary_search(&k).is_ok();
    let stepper = model.stepper();
    let mut state = NetworkState::new(x0.to_vec(), k0);
    let mut snapshots = vec![state.clone()];
    let mut clipped_slots = 0;
    while state.k < end {
        let (outcome, clipped) = stepper.draw(state.k, rng);
        clipped_slots += u64::from(clipped);
        if let Err(DynamicsError::NonFiniteState { k }) = apply_step_in_place(&mut state, &outcome) {
            return Ok(Trajectory { snapshots, diverged_at: Some(k), clipped_slots });
        }
        if keep(state.k) {
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory { snapshots, diverged_at: None, clipped_slots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, reference_matrix, Topology};
    use crate::metrics::spread;
    use crate::rng::trial_rng;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn outcome(event_i: Event, event_j: Event, t: f64, s: f64) -> StepOutcome {
        StepOutcome { initiator: 0, partner: 1, event_i, event_j, t, s }
    }

    fn model(a: SelectionMatrix, mode: UpdateMode, probs: (f64, f64, f64), t: f64, s: f64) -> Model {
        Model::new(
            a,
            mode,
            EventProbabilities::new(probs.0, probs.1, probs.2).unwrap(),
            Schedule::constant(t),
            Schedule::constant(s),
        )
        .unwrap()
    }

    #[test]
    fn probabilities_validated() {
        assert!(EventProbabilities::new(0.5, 0.5, 0.0).is_ok());
        assert!(EventProbabilities::new(0.5, 0.6, 0.0).is_err());
        assert!(EventProbabilities::new(-0.1, 0.6, 0.5).is_err());
        assert!(EventProbabilities::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).is_ok());
    }

    #[test]
    fn attraction_averages() {
        let s = NetworkState::new(vec![0.0, 1.0], 0);
        let next = apply_step(&s, &outcome(Event::Attraction, Event::Attraction, 0.5, 1.0)).unwrap();
        assert_eq!(next.x, vec![0.5, 0.5]);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn repulsion_uses_pre_step_values() {
        let s = NetworkState::new(vec![0.0, 1.0], 0);
        let next = apply_step(&s, &outcome(Event::Repulsion, Event::Neglect, 0.5, 1.0)).unwrap();
        assert_eq!(next.x, vec![-1.0, 1.0]);
        for sk in [0.1, 0.7, 3.0] {
            let next = apply_step(&s, &outcome(Event::Repulsion, Event::Repulsion, 0.5, sk)).unwrap();
            assert!(((next.x[1] - next.x[0]).abs() - (1.0 + 2.0 * sk)).abs() < 1e-12);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let s = NetworkState::new(vec![0.0, 1e149], 0);
        let err = apply_step(&s, &outcome(Event::Repulsion, Event::Repulsion, 0.5, 100.0));
        assert_eq!(err, Err(DynamicsError::NonFiniteState { k: 1 }));
    }

    #[test]
    fn exact_pair_probabilities() {
        // complete n=3: (1/3)(1/2); reference matrix: a_34 / 4 = 1/6.
        let a = generate(Topology::Complete, 3, 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((a.get(i, j) / 3.0 - 1.0 / 6.0).abs() < 1e-15);
                }
            }
        }
        assert!((reference_matrix().get(2, 3) / 4.0 - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_pair_frequencies() {
        let a = reference_matrix();
        let sampler = PairSampler::new(&a);
        let mut rng = trial_rng(1, 0);
        let draws = 1_000_000;
        let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(sampler.sample(&mut rng)).or_default() += 1;
        }
        for i in 0..4 {
            for j in 0..4 {
                let p = a.get(i, j) / 4.0;
                let got = counts.get(&(i, j)).copied().unwrap_or(0) as f64 / draws as f64;
                if p == 0.0 {
                    assert_eq!(got, 0.0);
                } else {
                    let se = (p * (1.0 - p) / draws as f64).sqrt();
                    assert!((got - p).abs() < 4.0 * se, "({i},{j}) {got} vs {p}");
                }
            }
        }
    }

    #[test]
    fn event_couplings() {
        let mut rng = trial_rng(2, 0);
        let all_attract = EventProbabilities::new(1.0, 0.0, 0.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_events(UpdateMode::Symmetric, &all_attract, &mut rng), (Event::Attraction, Event::Attraction));
        }
        let all_repel = EventProbabilities::new(0.0, 0.0, 1.0).unwrap();
        let draws = 100_000;
        let mut initiator_active = 0;
        for _ in 0..draws {
            match sample_events(UpdateMode::asymmetric(), &all_repel, &mut rng) {
                (Event::Repulsion, Event::Neglect) => initiator_active += 1,
                (Event::Neglect, Event::Repulsion) => {}
                other => panic!("unexpected {other:?}"),
            }
        }
        let se = (0.25 / draws as f64).sqrt();
        assert!((initiator_active as f64 / draws as f64 - 0.5).abs() < 4.0 * se);
        let fixed = UpdateMode::Asymmetric { active_rule: ActiveRule::Responder };
        assert_eq!(sample_events(fixed, &all_repel, &mut rng), (Event::Neglect, Event::Repulsion));
    }

    #[test]
    fn symmetric_event_frequencies() {
        let third = 1.0 / 3.0;
        let probs = EventProbabilities::new(third, third, third).unwrap();
        let mut rng = trial_rng(3, 0);
        let draws = 100_000;
        let mut counts: HashMap<Event, u64> = HashMap::new();
        for _ in 0..draws {
            let (a, b) = sample_events(UpdateMode::Symmetric, &probs, &mut rng);
            assert_eq!(a, b);
            *counts.entry(a).or_default() += 1;
        }
        let se = (third * (1.0 - third) / draws as f64).sqrt();
        for e in [Event::Attraction, Event::Neglect, Event::Repulsion] {
            let f = counts[&e] as f64 / draws as f64;
            assert!((f - third).abs() < 4.0 * se, "{e:?} {f}");
        }
    }

    #[test]
    fn symmetric_update_matrix_law() {
        // P(pair {i,j} updated) = (alpha/n)(a_ij + a_ji) for i<j.
        let a = reference_matrix();
        let m = model(a.clone(), UpdateMode::Symmetric, (0.5, 0.5, 0.0), 0.5, 0.1);
        let stepper = m.stepper();
        let mut rng = trial_rng(4, 0);
        let draws = 400_000;
        let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
        for _ in 0..draws {
            let (o, _) = stepper.draw(0, &mut rng);
            if o.event_i == Event::Attraction {
                let key = (o.initiator.min(o.partner), o.initiator.max(o.partner));
                *counts.entry(key).or_default() += 1;
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let p = 0.5 / 4.0 * (a.get(i, j) + a.get(j, i));
                let got = counts.get(&(i, j)).copied().unwrap_or(0) as f64 / draws as f64;
                let se = (p * (1.0 - p) / draws as f64).sqrt().max(1e-12);
                assert!((got - p).abs() < 4.0 * se, "({i},{j}) {got} vs {p}");
            }
        }
    }

    #[test]
    fn trajectory_edge_cases() {
        let m = model(reference_matrix(), UpdateMode::Symmetric, (0.0, 1.0, 0.0), 0.5, 0.5);
        let x0 = [1.0, 2.0, 3.0, 4.0];
        let empty = run_trajectory(&m, &x0, 0, 0, &[], &mut trial_rng(0, 0)).unwrap();
        assert_eq!(empty.snapshots, vec![NetworkState::new(x0.to_vec(), 0)]);
        let frozen = run_trajectory(&m, &x0, 5, 1000, &[10, 100], &mut trial_rng(0, 0)).unwrap();
        let ks: Vec<u64> = frozen.snapshots.iter().map(|s| s.k).collect();
        assert_eq!(ks, vec![5, 10, 100, 1005]);
        assert!(frozen.snapshots.iter().all(|s| s.x == x0));
        assert!(run_trajectory(&m, &x0[..3], 0, 1, &[], &mut trial_rng(0, 0)).is_err());
    }

    #[test]
    fn trajectory_is_seed_deterministic() {
        let m = model(reference_matrix(), UpdateMode::Symmetric, (0.4, 0.3, 0.3), 0.25, 0.2);
        let x0 = [1.0, 2.0, 3.0, 4.0];
        let a = run_trajectory(&m, &x0, 0, 500, &[100, 200], &mut trial_rng(9, 3)).unwrap();
        let b = run_trajectory(&m, &x0, 0, 500, &[100, 200], &mut trial_rng(9, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn averaging_on_complete_graph_agrees() {
        let a = generate(Topology::Complete, 4, 0).unwrap();
        let m = model(a, UpdateMode::Symmetric, (1.0, 0.0, 0.0), 0.5, 0.5);
        for seed in 0..100 {
            let traj = run_trajectory(&m, &[1.0, 2.0, 3.0, 4.0], 0, 10_000, &[], &mut trial_rng(seed, 0)).unwrap();
            let last = traj.snapshots.last().unwrap();
            assert!(spread(&last.x) < 1e-6, "seed {seed}: {}", spread(&last.x));
        }
    }

    #[test]
    fn divergence_marks_trajectory() {
        let m = model(reference_matrix(), UpdateMode::Symmetric, (0.0, 0.0, 1.0), 0.5, 5.0);
        let traj = run_trajectory(&m, &[1.0, 2.0, 3.0, 4.0], 0, 100_000, &[], &mut trial_rng(0, 0)).unwrap();
        assert!(traj.diverged_at.is_some());
    }

    fn arb_probs() -> impl Strategy<Value = EventProbabilities> {
        (0.0f64..1.0, 0.0f64..1.0).prop_map(|(u, v)| {
            let alpha = u;
            let gamma = (1.0 - u) * v;
            EventProbabilities { alpha, beta: 1.0 - alpha - gamma, gamma }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_mean_invariant(probs in arb_probs(), t in 0.01f64..1.0, s in 0.0f64..0.3, seed in any::<u64>()) {
            let m = model(reference_matrix(), UpdateMode::Symmetric, (probs.alpha, probs.beta, probs.gamma), t, s);
            let stepper = m.stepper();
            let mut rng = trial_rng(seed, 0);
            let mut state = NetworkState::new(vec![1.0, 2.0, 3.0, 4.0], 0);
            let mean0 = state.average();
            for _ in 0..1000 {
                if stepper.step(&mut state, &mut rng).is_err() { break; }
                let scale = state.x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                prop_assert!((state.average() - mean0).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn spread_bounds_per_slot(probs in arb_probs(), t in 0.01f64..1.0, s in 0.01f64..0.5,
                                  symmetric in any::<bool>(), seed in any::<u64>()) {
            let mode = if symmetric { UpdateMode::Symmetric } else { UpdateMode::asymmetric() };
            let m = model(reference_matrix(), mode, (probs.alpha, probs.beta, probs.gamma), t, s);
            let stepper = m.stepper();
            let mut rng = trial_rng(seed, 1);
            let mut state = NetworkState::new(vec![1.0, 2.0, 3.0, 4.0], 0);
            for _ in 0..500 {
                let before = spread(&state.x);
                let scale = state.x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                if stepper.step(&mut state, &mut rng).is_err() { break; }
                let after = spread(&state.x);
                prop_assert!(after <= (1.0 + 2.0 * s) * before + 1e-12 * scale);
                if probs.gamma == 0.0 {
                    prop_assert!(after <= before + 1e-12 * scale);
                    if t <= 0.5 {
                        prop_assert!(after >= (1.0 - 2.0 * t) * before - 1e-12 * scale);
                    }
                }
            }
        }
    }
}
