use serde_json::{json, Value};

use super::tail::{schedule_tail, ScheduleTail, Signed, Tail};
use super::{
    contraction, critical_measure, Claim, ConditionId, TheoryError, TheoryParams, Verdict,
    CRITICAL_TOLERANCE, GROWTH_MARGIN,
};
use crate::dynamics::Model;
use crate::graph::SpectralData;
use crate::schedule::{Role, ScheduleKind};

/// Evaluates one condition. Conditions whose coupling or repulsion
/// assumptions do not match the model come back Inconclusive with a caveat.
pub fn evaluate_condition(
    id: ConditionId,
    model: &Model,
    spectral: &SpectralData,
    params: &TheoryParams,
) -> Result<Verdict, TheoryError> {
    let n = model.n();
    if params.horizon < n as u64 {
        return Err(TheoryError::BadHorizon { horizon: params.horizon, n });
    }
    let ctx = Ctx::new(model, spectral, params);
    let verdict = match id {
        ConditionId::Thm1Nec => ctx.thm1_nec(),
        ConditionId::Thm2Nec => ctx.thm2_nec(),
        ConditionId::SymAgree => ctx.sym_agree(false),
        ConditionId::SymThreshold => ctx.sym_agree(true),
        ConditionId::AsymAgree => ctx.asym_agree(false),
        ConditionId::AsymAgreeMono => ctx.asym_agree(true),
        ConditionId::SymRepAgree => ctx.sym_rep_agree(),
        ConditionId::SymRepExpectDiv => ctx.sym_rep_expect_div(),
        ConditionId::SymRepAsDiv => ctx.sym_rep_as_div(),
        ConditionId::BeerClassify => ctx.beer_classify(id)?,
        ConditionId::AsymRepAgree => ctx.asym_rep_agree(),
        ConditionId::AsymRepAsDiv => ctx.asym_rep_as_div(),
        ConditionId::AsymConst => ctx.asym_const(id)?,
    };
    Ok(ctx.annotate(verdict))
}

/// JSON number, or a string for non-finite values.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// `w * ln(x)` with `0 * ln(0) = 0`.
fn weighted_log(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x.ln()
    }
}

/// Minimum of the running Cesaro mean over the second half of `terms`, and
/// the full partial sum.
fn cesaro_tail_min(terms: impl Iterator<Item = f64>, len: usize) -> (f64, f64) {
    let start = len / 2;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for (m, j) in terms.enumerate() {
        sum += j;
        if m >= start {
            min = min.min(sum / (m + 1) as f64);
        }
    }
    (min, sum)
}

struct Ctx<'a> {
    model: &'a Model,
    spectral: &'a SpectralData,
    params: &'a TheoryParams,
    n: usize,
    /// Block length `n - 1`.
    m: u32,
    t: ScheduleTail,
    s: ScheduleTail,
    constant: bool,
    t_seq: Vec<f64>,
    s_seq: Vec<f64>,
}

impl<'a> Ctx<'a> {
    fn new(model: &'a Model, spectral: &'a SpectralData, params: &'a TheoryParams) -> Self {
        let h = params.horizon;
        Ctx {
            model,
            spectral,
            params,
            n: model.n(),
            m: (model.n() - 1) as u32,
            t: schedule_tail(&model.attraction, Role::Attraction),
            s: schedule_tail(&model.repulsion, Role::Repulsion),
            constant: model.attraction.is_constant() && model.repulsion.is_constant(),
            t_seq: (0..h).map(|k| model.t(k)).collect(),
            s_seq: (0..h).map(|k| model.s(k)).collect(),
        }
    }

    fn alpha(&self) -> f64 {
        self.model.probs.alpha
    }

    fn gamma(&self) -> f64 {
        self.model.probs.gamma
    }

    fn horizon(&self) -> usize {
        self.params.horizon as usize
    }

    /// Tail of `T_k (1 - T_k)`.
    fn tt(&self) -> Tail {
        self.t.value.mul(self.t.complement.expect("attraction is bounded by one"))
    }

    /// Tail of `S_k (1 + S_k)`.
    fn ss(&self) -> Tail {
        self.s.value.mul(self.s.value.one_plus())
    }

    /// Sign and magnitude tail of `T(1-T) alpha - S(1+S) gamma`.
    fn net(&self) -> Signed {
        self.tt().scale(self.alpha()).sub(self.ss().scale(self.gamma()))
    }

    fn i_hat(&self, k: usize) -> f64 {
        contraction(self.t_seq[k], self.s_seq[k], &self.model.probs, self.spectral).i_hat_k
    }

    fn a_star(&self) -> f64 {
        self.spectral.a_star
    }

    fn annotate(&self, mut v: Verdict) -> Verdict {
        if self.t.floor_ignored || self.s.floor_ignored {
            v.caveats.push(format!(
                "a schedule decays below the {:e} simulation floor; series are decided for the unfloored sequence",
                crate::schedule::SCHEDULE_FLOOR
            ));
        }
        let explicit = |k: &ScheduleKind| matches!(k, ScheduleKind::Explicit { .. });
        if explicit(&self.model.attraction.kind) || explicit(&self.model.repulsion.kind) {
            v.caveats.push(format!(
                "explicit schedule: series are decided from its constant tail value; partial sums cover the first {} slots only",
                self.params.horizon
            ));
        }
        v
    }

    fn needs_symmetric(&self) -> Option<Verdict> {
        (!self.model.mode.is_symmetric())
            .then(|| Verdict::inconclusive().caveat("assumes symmetric updates; the model is asymmetric"))
    }

    fn needs_asymmetric(&self) -> Option<Verdict> {
        self.model
            .mode
            .is_symmetric()
            .then(|| Verdict::inconclusive().caveat("assumes asymmetric updates; the model is symmetric"))
    }

    fn needs_repulsion_free(&self) -> Option<Verdict> {
        (self.gamma() != 0.0).then(|| {
            Verdict::inconclusive().caveat(format!("assumes no repulsion events; gamma = {}", self.gamma()))
        })
    }

    fn thm1_nec(&self) -> Verdict {
        let sum_t: f64 = self.t_seq.iter().sum();
        let sum_c: f64 = self.t_seq.iter().map(|t| 1.0 - t).sum();
        let div_t = self.t.value.sum_diverges();
        let div_c = self.t.complement.expect("attraction is bounded by one").sum_diverges();
        let mut v = Verdict::inconclusive()
            .detail("partial_sum_T", num(sum_t))
            .detail("partial_sum_one_minus_T", num(sum_c))
            .detail("sum_T_diverges", div_t)
            .detail("sum_one_minus_T_diverges", div_c);
        if !div_t && !div_c {
            v = v.claim(Claim::AgreementImpossible);
        } else if !div_t || !div_c {
            v = v.caveat("one of the two series converges; the condition only needs the other to diverge");
        }
        v
    }

    fn thm2_nec(&self) -> Verdict {
        let log_prod: f64 = self.s_seq.iter().map(|s| (2.0 * s).ln_1p()).sum();
        let v = Verdict::inconclusive().detail("log_partial_product_one_plus_2S", num(log_prod));
        if self.gamma() == 0.0 {
            return v
                .detail("product_diverges", false)
                .claim(Claim::DivergenceImpossible)
                .caveat("gamma = 0: repulsion never fires, so the effective S_k is zero and the spread never grows");
        }
        let diverges = self.s.value.sum_diverges();
        let v = v.detail("product_diverges", diverges);
        if diverges {
            v
        } else {
            v.claim(Claim::DivergenceImpossible)
        }
    }

    /// Repulsion-free symmetric sufficient condition, or its monotone threshold form.
    fn sym_agree(&self, threshold: bool) -> Verdict {
        if let Some(v) = self.needs_symmetric().or_else(|| self.needs_repulsion_free()) {
            return v;
        }
        let partial: f64 = self.t_seq.iter().map(|t| t * (1.0 - t)).sum();
        let diverges = self.tt().sum_diverges();
        let v = Verdict::inconclusive()
            .detail("partial_sum_T_one_minus_T", num(partial))
            .detail("series_diverges", diverges);
        let monotone = self.model.attraction.monotonicity(Role::Attraction);
        if threshold && monotone.is_none() {
            return v.caveat("threshold form needs a monotone T_k; this schedule is not known to be monotone");
        }
        if diverges {
            if self.alpha() > 0.0 {
                v.claim(Claim::Agreement)
            } else {
                v.caveat("alpha = 0: attraction never fires")
            }
        } else if threshold {
            v.claim(Claim::AgreementImpossible)
                .caveat("impossibility holds for almost all initial values once k0 is large enough")
        } else {
            v
        }
    }

    /// Repulsion-free asymmetric block condition, or its monotone form.
    fn asym_agree(&self, mono: bool) -> Verdict {
        if let Some(v) = self.needs_asymmetric().or_else(|| self.needs_repulsion_free()) {
            return v;
        }
        let m = self.m as usize;
        let v = if mono {
            let partial: f64 = self.t_seq.iter().map(|t| (t * (1.0 - t)).powi(m as i32)).sum();
            let v = Verdict::inconclusive()
                .detail("partial_sum_power", num(partial))
                .caveat("evaluated for asymmetric updates, where it is equivalent to the block-product form");
            if self.model.attraction.monotonicity(Role::Attraction).is_none() {
                return v.caveat("needs a monotone T_k; this schedule is not known to be monotone");
            }
            let diverges = self.tt().powi(self.m).sum_diverges();
            v.detail("series_diverges", diverges)
        } else {
            let partial: f64 = self
                .t_seq
                .chunks_exact(m)
                .map(|b| b.iter().map(|t| t * (1.0 - t)).product::<f64>())
                .sum();
            let diverges = self.tt().block_product(self.m).sum_diverges();
            Verdict::inconclusive()
                .detail("partial_sum_block_products", num(partial))
                .detail("series_diverges", diverges)
        };
        let diverges = v.detail["series_diverges"].as_bool().unwrap_or(false);
        if diverges && self.alpha() > 0.0 {
            v.claim(Claim::Agreement)
        } else if diverges {
            v.caveat("alpha = 0: attraction never fires")
        } else {
            v
        }
    }

    fn sym_rep_agree(&self) -> Verdict {
        if let Some(v) = self.needs_symmetric() {
            return v;
        }
        let nf = self.n as f64;
        let log_prod: f64 = (0..self.horizon())
            .map(|k| {
                let c = contraction(self.t_seq[k], self.s_seq[k], &self.model.probs, self.spectral);
                (1.0 - 2.0 / nf * c.i_k).ln()
            })
            .sum();
        let v = Verdict::inconclusive().detail("log_partial_product", num(log_prod));
        match self.net() {
            Signed::Positive(mag) if mag.sum_diverges() => v.detail("product_is_zero", true).claim(Claim::Agreement),
            Signed::Undetermined => v.caveat("leading orders of attraction and repulsion cancel; sign undecided"),
            _ => v.detail("product_is_zero", false),
        }
    }

    fn sym_rep_expect_div(&self) -> Verdict {
        if let Some(v) = self.needs_symmetric() {
            return v;
        }
        let nf = self.n as f64;
        let log_prod: f64 = (0..self.horizon()).map(|k| (1.0 - 2.0 / nf * self.i_hat(k)).ln()).sum();
        let last = self.horizon() - 1;
        let v = Verdict::inconclusive()
            .detail("log_partial_product", num(log_prod))
            .detail("growth_rate", num(1.0 - 2.0 / nf * self.i_hat(last)));
        match self.net() {
            Signed::Negative(mag) if mag.sum_diverges() => {
                v.detail("product_is_infinite", true).claim(Claim::DivergenceInExpectation)
            }
            Signed::Undetermined => v.caveat("leading orders of attraction and repulsion cancel; sign undecided"),
            _ => v.detail("product_is_infinite", false),
        }
    }

    /// Distance of `T_k` from 1/2 over all `k`, exact for monotone schedules.
    fn t_gap_from_half(&self) -> f64 {
        let limit = self.t.value.limit().min(1.0);
        self.t_seq.iter().fold((limit - 0.5).abs(), |acc, t| acc.min((t - 0.5).abs()))
    }

    fn horizon_caveat(&self, v: Verdict) -> Verdict {
        if self.constant {
            v
        } else {
            v.caveat(format!(
                "Cesaro mean checked over slots {}..{} only; behaviour beyond the horizon is assumed",
                self.params.horizon / 2,
                self.params.horizon
            ))
        }
    }

    fn sym_rep_as_div(&self) -> Verdict {
        if let Some(v) = self.needs_symmetric() {
            return v;
        }
        let (_, s_sup) = self.model.repulsion.range(Role::Repulsion);
        let gap = self.t_gap_from_half();
        let (alpha, gamma, nf) = (self.alpha(), self.gamma(), self.n as f64);
        let h = self.horizon();
        let i_hat: Vec<f64> = (0..h).map(|k| self.i_hat(k)).collect();
        let mut best: Option<(f64, f64, f64)> = None;
        for &tau in &self.params.tau_grid {
            let terms = (0..h).map(|k| {
                let (t, s) = (self.t_seq[k], self.s_seq[k]);
                let ss = s * s + s;
                let p = -(2.0 / nf * i_hat[k] + gamma * (1.0 + 4.0 * tau * ss)) / (4.0 * (1.0 - tau) * ss);
                p * (4.0 * tau * ss).ln_1p() + weighted_log(2.0 * alpha, (2.0 * t - 1.0).abs())
            });
            let (tail_min, sum) = cesaro_tail_min(terms, h);
            if best.map_or(true, |(_, b, _)| tail_min > b || b.is_nan()) {
                best = Some((tau, tail_min, sum));
            }
        }
        let (tau, tail_min, sum) = best.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        let v = Verdict::inconclusive()
            .detail("S_sup", num(s_sup))
            .detail("T_gap_from_half", num(gap))
            .detail("tau", num(tau))
            .detail("cesaro_tail_mean_min", num(tail_min))
            .detail("partial_sum_J", num(sum));
        if gamma == 0.0 {
            return v.caveat("gamma = 0: p_k < 0 and (2T-1)^(2 alpha) <= 1, so J_tau is never positive");
        }
        if !s_sup.is_finite() {
            return v.caveat("S_k is unbounded");
        }
        if gap <= 0.0 {
            return v.caveat("T_k is not bounded away from 1/2");
        }
        if tail_min > GROWTH_MARGIN {
            self.horizon_caveat(v.claim(Claim::Divergence))
        } else {
            v
        }
    }

    fn beer_classify(&self, id: ConditionId) -> Result<Verdict, TheoryError> {
        if !self.constant {
            return Err(TheoryError::UnsupportedSchedule(format!(
                "{} needs constant attraction and repulsion schedules",
                id.name()
            )));
        }
        if let Some(v) = self.needs_symmetric() {
            return Ok(v);
        }
        let (t, s) = (self.t_seq[0], self.s_seq[0]);
        let probs = &self.model.probs;
        let d0 = critical_measure(t, s, probs);
        let mut v = Verdict::inconclusive().detail("D0", num(d0));
        if d0.abs() <= CRITICAL_TOLERANCE {
            return Ok(v.claim(Claim::OscillationInExpectation));
        }
        if d0 < 0.0 {
            return Ok(v.claim(Claim::Agreement));
        }
        v = v.claim(Claim::DivergenceInExpectation);
        if t == 0.5 {
            return Ok(v.caveat("T = 1/2: the almost-sure divergence test does not apply"));
        }
        let (nf, lambda2, gamma) = (self.n as f64, self.spectral.lambda2, probs.gamma);
        let ss = s * s + s;
        let (tau, value) = self
            .params
            .tau_grid
            .iter()
            .map(|&tau| {
                let p = (2.0 * d0 * lambda2 - nf * gamma * (1.0 + 4.0 * tau * ss)) / (4.0 * nf * (1.0 - tau) * ss);
                (tau, p * (4.0 * tau * ss).ln_1p() + weighted_log(2.0 * probs.alpha, (2.0 * t - 1.0).abs()))
            })
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        v = v.detail("tau", num(tau)).detail("log_as_divergence_test", num(value));
        if value > GROWTH_MARGIN {
            v = v.claim(Claim::Divergence);
        }
        Ok(v)
    }

    fn asym_rep_agree(&self) -> Verdict {
        if let Some(v) = self.needs_asymmetric() {
            return v;
        }
        let (_, s_sup) = self.model.repulsion.range(Role::Repulsion);
        let m = self.m as i32;
        let x_coef = (self.alpha() * self.a_star() / self.n as f64).powi(m);
        let y_coef = 1.0 - (1.0 - self.gamma()).powi(m);
        let log_prod: f64 = self
            .t_seq
            .chunks_exact(self.m as usize)
            .zip(self.s_seq.chunks_exact(self.m as usize))
            .map(|(tb, sb)| {
                let t_hat: f64 = tb.iter().map(|t| t * (1.0 - t)).product();
                let s_hat: f64 = sb.iter().map(|s| 1.0 + s).product();
                (1.0 - x_coef * t_hat + y_coef * (s_hat - 1.0)).ln()
            })
            .sum();
        let v = Verdict::inconclusive().detail("log_partial_product", num(log_prod)).detail("S_sup", num(s_sup));
        if !s_sup.is_finite() {
            return v.caveat("S_k is unbounded");
        }
        let x = self.tt().block_product(self.m).scale(x_coef);
        let y = self.s.value.block_growth_excess(self.m).scale(y_coef);
        match x.sub(y) {
            Signed::Positive(mag) if mag.sum_diverges() => v.detail("product_is_zero", true).claim(Claim::Agreement),
            Signed::Undetermined => v.caveat("leading orders of attraction and repulsion cancel; sign undecided"),
            _ => v.detail("product_is_zero", false),
        }
    }

    fn asym_rep_as_div(&self) -> Verdict {
        if let Some(v) = self.needs_asymmetric() {
            return v;
        }
        let (_, s_sup) = self.model.repulsion.range(Role::Repulsion);
        let (_, t_sup) = self.model.attraction.range(Role::Attraction);
        let (alpha, gamma, nf) = (self.alpha(), self.gamma(), self.n as f64);
        let log_n1 = (nf - 1.0).ln();
        let mut best: Option<(u32, f64, f64)> = None;
        for z in 0..=self.params.z_max {
            let b = z as usize + 1;
            let blocks = self.horizon() / b;
            if blocks < 2 {
                break;
            }
            let w1 = (gamma * self.a_star() / nf).powi(b as i32);
            let w2 = 1.0 - (1.0 - alpha).powi(b as i32);
            let terms = self.t_seq.chunks_exact(b).zip(self.s_seq.chunks_exact(b)).map(|(tb, sb)| {
                let log_s: f64 = sb.iter().map(|s| s.ln_1p()).sum();
                let log_t: f64 = tb.iter().map(|t| (1.0 - t).ln()).sum();
                let attraction = if w2 == 0.0 { 0.0 } else { w2 * log_t };
                w1 * (log_s - log_n1) + attraction
            });
            let (tail_min, sum) = cesaro_tail_min(terms, blocks);
            if best.map_or(true, |(_, m, _)| tail_min > m) {
                best = Some((z, tail_min, sum));
            }
        }
        let (z, tail_min, sum) = best.unwrap_or((0, f64::NAN, f64::NAN));
        let v = Verdict::inconclusive()
            .detail("S_sup", num(s_sup))
            .detail("T_sup", num(t_sup))
            .detail("Z", z)
            .detail("cesaro_tail_mean_min", num(tail_min))
            .detail("partial_sum_J", num(sum));
        if !s_sup.is_finite() {
            return v.caveat("S_k is unbounded");
        }
        if t_sup >= 1.0 {
            return v.caveat("T_k is not bounded below one");
        }
        if tail_min > GROWTH_MARGIN {
            self.horizon_caveat(v.claim(Claim::Divergence))
        } else {
            v
        }
    }

    fn asym_const(&self, id: ConditionId) -> Result<Verdict, TheoryError> {
        if !self.constant {
            return Err(TheoryError::UnsupportedSchedule(format!(
                "{} needs constant attraction and repulsion schedules",
                id.name()
            )));
        }
        if let Some(v) = self.needs_asymmetric() {
            return Ok(v);
        }
        let (t, s) = (self.t_seq[0], self.s_seq[0]);
        let (alpha, gamma, nf) = (self.alpha(), self.gamma(), self.n as f64);
        let m = self.m as i32;
        let lhs = (1.0 - (1.0 - gamma).powi(m)) * ((s + 1.0).powi(m) - 1.0);
        let rhs = (alpha * self.a_star() / nf).powi(m) * t.max(1.0 - t).powi(m);
        let agree = alpha > 0.0 && lhs < rhs;

        let search = |base: f64| -> (Option<u32>, f64) {
            let mut best = f64::NEG_INFINITY;
            for z in 0..=self.params.z_max {
                let b = (z + 1) as i32;
                let w2 = 1.0 - (1.0 - alpha).powi(b);
                let value = (gamma * self.a_star() / nf).powi(b) * (b as f64 * base.ln() - (nf - 1.0).ln())
                    + weighted_log(w2 * b as f64, 1.0 - t);
                if value > 0.0 {
                    return (Some(z), value);
                }
                best = best.max(value);
            }
            (None, best)
        };
        let (z_lit, v_lit) = search(s);
        let (z_prop, v_prop) = search(1.0 + s);
        let mut v = Verdict::inconclusive()
            .detail("agreement_lhs", num(lhs))
            .detail("agreement_rhs", num(rhs))
            .detail("agreement_holds", agree)
            .detail("thm6_paper_form", json!({ "satisfied": z_lit.is_some(), "Z": z_lit, "value": num(v_lit) }))
            .detail("thm6_prop8_form", json!({ "satisfied": z_prop.is_some(), "Z": z_prop, "value": num(v_prop) }));
        if agree {
            v = v.claim(Claim::Agreement);
        }
        if z_lit.is_some() {
            v = v.claim(Claim::Divergence);
        } else if let Some(z) = z_prop {
            v = v.caveat(format!(
                "the divergence expression with (1 + S) in place of S is positive at Z = {z}; the verdict uses the conservative S form"
            ));
        }
        Ok(v)
    }
}
