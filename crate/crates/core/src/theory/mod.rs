//! Closed-form quantities and convergence verdicts for a model configuration.
//!
//! Each [`ConditionId`] is one sufficient, necessary or threshold condition on
//! the schedules, event probabilities and graph spectrum. Series and products
//! are decided from schedule tails (see [`tail`]); partial sums and products
//! up to a finite horizon are attached as numeric evidence.

mod conditions;
pub mod tail;

use nalgebra::DMatrix;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::dynamics::{EventProbabilities, Model};
use crate::graph::{spectral, GraphError, SelectionMatrix, SpectralData};

pub use conditions::evaluate_condition;

/// `|D0|` at or below this is treated as the critical case `D0 = 0`.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Cesaro tail means must exceed this to certify linear growth.
pub const GROWTH_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("horizon {horizon} is shorter than the node count {n}")]
    BadHorizon { horizon: u64, n: usize },
    #[error("{0}")]
    UnsupportedSchedule(String),
    #[error("contradictory verdicts (implementation bug): {0}")]
    InternalInconsistency(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Search and truncation parameters for the evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryParams {
    /// Number of slots used for partial sums, products and Cesaro means.
    pub horizon: u64,
    pub tau_grid: Vec<f64>,
    pub z_max: u32,
}

impl Default for TheoryParams {
    fn default() -> Self {
        TheoryParams {
            horizon: 10_000,
            tau_grid: (1..=19).map(|i| i as f64 * 0.05).collect(),
            z_max: 64,
        }
    }
}

/// `D0 = S(1+S) gamma - T(1-T) alpha`.
pub fn critical_measure(t_star: f64, s_star: f64, probs: &EventProbabilities) -> f64 {
    s_star * (1.0 + s_star) * probs.gamma - t_star * (1.0 - t_star) * probs.alpha
}

/// Net attraction coefficient `T(1-T) alpha - S(1+S) gamma` of one slot.
pub fn net_attraction(t: f64, s: f64, probs: &EventProbabilities) -> f64 {
    t * (1.0 - t) * probs.alpha - s * (1.0 + s) * probs.gamma
}

/// `E[Psi^2] = I - 2 (T(1-T) alpha - S(1+S) gamma) / n * (D - (A + A^T))`, the
/// expected squared update matrix of one symmetric slot.
pub fn expected_second_moment_matrix(a: &SelectionMatrix, probs: &EventProbabilities, t: f64, s: f64) -> DMatrix<f64> {
    let n = a.n();
    let coef = 2.0 * net_attraction(t, s, probs) / n as f64;
    DMatrix::identity(n, n) - a.laplacian() * coef
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCoefficients {
    #[serde(rename = "I_k")]
    pub i_k: f64,
    #[serde(rename = "I_hat_k")]
    pub i_hat_k: f64,
    /// `1 - (2/n) I_hat_k`, the lower-bound factor on expected dispersion growth.
    #[serde(rename = "Z_k")]
    pub z_k: f64,
}

/// The upper-bound coefficient `I_k` takes `lambda2` while the net attraction
/// coefficient is nonnegative and `lambda_n` once repulsion outweighs it;
/// `I_hat_k` takes the other eigenvalue. With `alpha = gamma` the switch sits
/// exactly at `T(1-T) = S(1+S)`, and both coefficients vanish at the switch.
pub fn contraction(t: f64, s: f64, probs: &EventProbabilities, spectral: &SpectralData) -> ContractionCoefficients {
    let n = spectral.degrees.len() as f64;
    let coef = net_attraction(t, s, probs);
    let (upper, lower) = if coef >= 0.0 {
        (spectral.lambda2, spectral.lambda_n)
    } else {
        (spectral.lambda_n, spectral.lambda2)
    };
    let i_hat_k = coef * lower;
    ContractionCoefficients { i_k: coef * upper, i_hat_k, z_k: 1.0 - 2.0 / n * i_hat_k }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    #[serde(rename = "THM1_NEC")]
    Thm1Nec,
    #[serde(rename = "THM2_NEC")]
    Thm2Nec,
    #[serde(rename = "SYM_AGREE")]
    SymAgree,
    #[serde(rename = "SYM_THRESHOLD")]
    SymThreshold,
    #[serde(rename = "ASYM_AGREE")]
    AsymAgree,
    #[serde(rename = "ASYM_AGREE_MONO")]
    AsymAgreeMono,
    #[serde(rename = "SYM_REP_AGREE")]
    SymRepAgree,
    #[serde(rename = "SYM_REP_EXPECT_DIV")]
    SymRepExpectDiv,
    #[serde(rename = "SYM_REP_AS_DIV")]
    SymRepAsDiv,
    #[serde(rename = "BEER_CLASSIFY")]
    BeerClassify,
    #[serde(rename = "ASYM_REP_AGREE")]
    AsymRepAgree,
    #[serde(rename = "ASYM_REP_AS_DIV")]
    AsymRepAsDiv,
    #[serde(rename = "ASYM_CONST")]
    AsymConst,
}

/// Whether a condition can only rule outcomes out, only certify them, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    Necessary,
    Sufficient,
    Threshold,
}

impl ConditionId {
    pub const ALL: [ConditionId; 13] = [
        ConditionId::Thm1Nec,
        ConditionId::Thm2Nec,
        ConditionId::SymAgree,
        ConditionId::SymThreshold,
        ConditionId::AsymAgree,
        ConditionId::AsymAgreeMono,
        ConditionId::SymRepAgree,
        ConditionId::SymRepExpectDiv,
        ConditionId::SymRepAsDiv,
        ConditionId::BeerClassify,
        ConditionId::AsymRepAgree,
        ConditionId::AsymRepAsDiv,
        ConditionId::AsymConst,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConditionId::Thm1Nec => "THM1_NEC",
            ConditionId::Thm2Nec => "THM2_NEC",
            ConditionId::SymAgree => "SYM_AGREE",
            ConditionId::SymThreshold => "SYM_THRESHOLD",
            ConditionId::AsymAgree => "ASYM_AGREE",
            ConditionId::AsymAgreeMono => "ASYM_AGREE_MONO",
            ConditionId::SymRepAgree => "SYM_REP_AGREE",
            ConditionId::SymRepExpectDiv => "SYM_REP_EXPECT_DIV",
            ConditionId::SymRepAsDiv => "SYM_REP_AS_DIV",
            ConditionId::BeerClassify => "BEER_CLASSIFY",
            ConditionId::AsymRepAgree => "ASYM_REP_AGREE",
            ConditionId::AsymRepAsDiv => "ASYM_REP_AS_DIV",
            ConditionId::AsymConst => "ASYM_CONST",
        }
    }

    pub fn formula(&self) -> &'static str {
        match self {
            ConditionId::Thm1Nec => "agreement needs sum T_k = inf or sum (1 - T_k) = inf",
            ConditionId::Thm2Nec => "divergence needs prod (1 + 2 S_k) = inf",
            ConditionId::SymAgree => "sum T_k (1 - T_k) = inf => agreement (symmetric, no repulsion)",
            ConditionId::SymThreshold => "monotone T_k: sum T_k (1 - T_k) = inf <=> agreement (symmetric, no repulsion)",
            ConditionId::AsymAgree => "sum_k prod_{block of n-1} T_s (1 - T_s) = inf => agreement (asymmetric, no repulsion)",
            ConditionId::AsymAgreeMono => "monotone T_k: sum (T_k (1 - T_k))^(n-1) = inf => agreement (asymmetric, no repulsion)",
            ConditionId::SymRepAgree => "prod (1 - (2/n) I_k) = 0 => agreement (symmetric)",
            ConditionId::SymRepExpectDiv => "prod (1 - (2/n) I_hat_k) = inf => E[spread] diverges (symmetric)",
            ConditionId::SymRepAsDiv => "bounded S_k, T_k away from 1/2, positive Cesaro mean of J_tau => divergence (symmetric)",
            ConditionId::BeerClassify => "sign of D0 = S(1+S) gamma - T(1-T) alpha (symmetric, constant weights)",
            ConditionId::AsymRepAgree => "prod [1 - (alpha a*/n)^(n-1) T^_k + (1 - (1-gamma)^(n-1)) (S^_k - 1)] = 0 => agreement (asymmetric)",
            ConditionId::AsymRepAsDiv => "S_k, T_k bounded, positive Cesaro mean of J_Z for some Z => divergence (asymmetric)",
            ConditionId::AsymConst => "constant weights: agreement inequality (i) or divergence condition (ii) (asymmetric)",
        }
    }

    pub fn kind(&self) -> ConditionKind {
        match self {
            ConditionId::Thm1Nec | ConditionId::Thm2Nec => ConditionKind::Necessary,
            ConditionId::SymThreshold | ConditionId::BeerClassify | ConditionId::AsymConst => ConditionKind::Threshold,
            _ => ConditionKind::Sufficient,
        }
    }

    /// Conditions that apply to a model, given its coupling and schedules.
    pub fn applicable(model: &Model) -> Vec<ConditionId> {
        let repulsion_free = model.probs.gamma == 0.0;
        let constant = model.attraction.is_constant() && model.repulsion.is_constant();
        let mut ids = vec![ConditionId::Thm1Nec, ConditionId::Thm2Nec];
        if model.mode.is_symmetric() {
            if repulsion_free {
                ids.extend([ConditionId::SymAgree, ConditionId::SymThreshold]);
            }
            ids.extend([ConditionId::SymRepAgree, ConditionId::SymRepExpectDiv, ConditionId::SymRepAsDiv]);
            if constant {
                ids.push(ConditionId::BeerClassify);
            }
        } else {
            if repulsion_free {
                ids.extend([ConditionId::AsymAgree, ConditionId::AsymAgreeMono]);
            }
            ids.extend([ConditionId::AsymRepAgree, ConditionId::AsymRepAsDiv]);
            if constant {
                ids.push(ConditionId::AsymConst);
            }
        }
        ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Guaranteed,
    Impossible,
    Inconclusive,
    ExpectedDivergence,
    ExpectedOscillation,
}

/// The conclusion a verdict certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    /// Global agreement almost surely.
    Agreement,
    /// Almost-sure agreement fails for almost all initial values.
    AgreementImpossible,
    /// Disagreement divergence almost surely.
    Divergence,
    /// Almost-sure disagreement divergence cannot happen.
    DivergenceImpossible,
    DivergenceInExpectation,
    OscillationInExpectation,
}

impl Claim {
    fn status(self) -> Status {
        match self {
            Claim::Agreement | Claim::Divergence => Status::Guaranteed,
            Claim::AgreementImpossible | Claim::DivergenceImpossible => Status::Impossible,
            Claim::DivergenceInExpectation => Status::ExpectedDivergence,
            Claim::OscillationInExpectation => Status::ExpectedOscillation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Conclusions certified by the check; the first one sets `status`.
    pub claims: Vec<Claim>,
    pub detail: Map<String, Value>,
    pub caveats: Vec<String>,
}

impl Verdict {
    pub fn inconclusive() -> Self {
        Verdict { status: Status::Inconclusive, claims: Vec::new(), detail: Map::new(), caveats: Vec::new() }
    }

    pub fn claim(mut self, claim: Claim) -> Self {
        if self.claims.is_empty() {
            self.status = claim.status();
        }
        self.claims.push(claim);
        self
    }

    pub fn detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.detail.insert(key.to_string(), value.into());
        self
    }

    pub fn caveat(mut self, text: impl Into<String>) -> Self {
        self.caveats.push(text.into());
        self
    }

    pub fn has(&self, claim: Claim) -> bool {
        self.claims.contains(&claim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    /// Present for symmetric models with constant schedules.
    pub d0: Option<f64>,
    pub spectral: SpectralData,
    /// Coefficients at slot 0.
    pub contraction: ContractionCoefficients,
    pub conditions: Vec<(ConditionId, Verdict)>,
}

impl TheoryReport {
    pub fn verdict(&self, id: ConditionId) -> Option<&Verdict> {
        self.conditions.iter().find(|(c, _)| *c == id).map(|(_, v)| v)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl Serialize for TheoryReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            id: &'a ConditionId,
            status: Status,
            claims: &'a [Claim],
            detail: &'a Map<String, Value>,
            caveats: &'a [String],
        }
        let conditions: Vec<Entry> = self
            .conditions
            .iter()
            .map(|(id, v)| Entry { id, status: v.status, claims: &v.claims, detail: &v.detail, caveats: &v.caveats })
            .collect();
        let mut s = serializer.serialize_struct("TheoryReport", 7)?;
        s.serialize_field("D0", &self.d0)?;
        s.serialize_field("lambda2", &self.spectral.lambda2)?;
        s.serialize_field("lambdaN", &self.spectral.lambda_n)?;
        s.serialize_field("aStar", &self.spectral.a_star)?;
        s.serialize_field("spectrum", &self.spectral.spectrum)?;
        s.serialize_field("contraction", &self.contraction)?;
        s.serialize_field("conditions", &conditions)?;
        s.end()
    }
}

/// Evaluates every applicable condition and cross-checks the verdicts.
pub fn theory_report(model: &Model, params: &TheoryParams) -> Result<TheoryReport, TheoryError> {
    let spec = spectral(&model.matrix)?;
    let mut conditions = Vec::new();
    for id in ConditionId::applicable(model) {
        conditions.push((id, evaluate_condition(id, model, &spec, params)?));
    }
    check_consistency(&conditions)?;
    let constant = model.attraction.is_constant() && model.repulsion.is_constant();
    let d0 = (constant && model.mode.is_symmetric()).then(|| critical_measure(model.t(0), model.s(0), &model.probs));
    Ok(TheoryReport {
        d0,
        contraction: contraction(model.t(0), model.s(0), &model.probs, &spec),
        spectral: spec,
        conditions,
    })
}

/// Flags verdict sets that certify mutually exclusive outcomes.
pub fn check_consistency(conditions: &[(ConditionId, Verdict)]) -> Result<(), TheoryError> {
    let holders = |claims: &[Claim]| -> Vec<&'static str> {
        conditions
            .iter()
            .filter(|(_, v)| claims.iter().any(|c| v.has(*c)))
            .map(|(id, _)| id.name())
            .collect()
    };
    let clashes = [
        ([Claim::Agreement].as_slice(), [Claim::Divergence, Claim::DivergenceInExpectation].as_slice()),
        (&[Claim::Agreement], &[Claim::AgreementImpossible]),
        (&[Claim::Divergence], &[Claim::DivergenceImpossible]),
    ];
    for (left, right) in clashes {
        let (a, b) = (holders(left), holders(right));
        if !a.is_empty() && !b.is_empty() {
            return Err(TheoryError::InternalInconsistency(format!(
                "{a:?} certify {left:?} while {b:?} certify {right:?}"
            )));
        }
    }
    Ok(())
}
