//! Leading-order tail behaviour of nonnegative sequences.
//!
//! Series and infinite products over schedule-derived terms are decided from
//! the tail `coef * base^k * k^(-power)`: the sum diverges exactly when the
//! base exceeds one, or equals one with `power <= 1`.

use std::cmp::Ordering;

use crate::schedule::{Role, Schedule, ScheduleKind, SCHEDULE_FLOOR};

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// Eventually exactly zero.
    Zero,
    /// `coef * base^k * k^(-power)` to leading order. `exact` means the
    /// sequence is eventually equal to this form, not just asymptotic to it.
    Term { coef: f64, base: f64, power: f64, exact: bool },
}

/// Sign of a difference of two tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signed {
    Positive(Tail),
    Negative(Tail),
    /// Eventually exactly zero.
    Zero,
    /// Leading orders cancel; the sign is decided by terms not tracked here.
    Undetermined,
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

impl Tail {
    pub fn constant(v: f64) -> Tail {
        Self::constant_with(v, true)
    }

    fn constant_with(v: f64, exact: bool) -> Tail {
        if v == 0.0 && exact {
            Tail::Zero
        } else {
            Tail::Term { coef: v, base: 1.0, power: 0.0, exact }
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            Tail::Zero => true,
            Tail::Term { exact, .. } => *exact,
        }
    }

    pub fn decays(&self) -> bool {
        match *self {
            Tail::Zero => true,
            Tail::Term { coef, base, power, .. } => coef == 0.0 || base < 1.0 || (base == 1.0 && power > 0.0),
        }
    }

    pub fn grows(&self) -> bool {
        match *self {
            Tail::Zero => false,
            Tail::Term { coef, base, power, .. } => coef != 0.0 && (base > 1.0 || (base == 1.0 && power < 0.0)),
        }
    }

    /// Limit of the sequence: zero, the constant, or infinity.
    pub fn limit(&self) -> f64 {
        match *self {
            _ if self.decays() => 0.0,
            _ if self.grows() => f64::INFINITY,
            Tail::Term { coef, .. } => coef,
            Tail::Zero => 0.0,
        }
    }

    /// Whether the series of this (nonnegative) sequence diverges.
    pub fn sum_diverges(&self) -> bool {
        match *self {
            Tail::Zero => false,
            Tail::Term { coef, base, power, .. } => {
                coef > 0.0 && (base > 1.0 || (base == 1.0 && power <= 1.0))
            }
        }
    }

    pub fn scale(self, c: f64) -> Tail {
        match self {
            Tail::Zero => Tail::Zero,
            _ if c == 0.0 => Tail::Zero,
            Tail::Term { coef, base, power, exact } => Tail::Term { coef: coef * c, base, power, exact },
        }
    }

    pub fn mul(self, other: Tail) -> Tail {
        match (self, other) {
            (Tail::Zero, _) | (_, Tail::Zero) => Tail::Zero,
            (
                Tail::Term { coef: c1, base: b1, power: p1, exact: e1 },
                Tail::Term { coef: c2, base: b2, power: p2, exact: e2 },
            ) => Tail::Term { coef: c1 * c2, base: b1 * b2, power: p1 + p2, exact: e1 && e2 },
        }
    }

    pub fn powi(self, m: u32) -> Tail {
        match self {
            Tail::Zero => Tail::Zero,
            Tail::Term { coef, base, power, exact } => Tail::Term {
                coef: coef.powi(m as i32),
                base: base.powi(m as i32),
                power: power * m as f64,
                exact,
            },
        }
    }

    /// `1 + x_k`.
    pub fn one_plus(self) -> Tail {
        match self {
            Tail::Zero => Tail::constant(1.0),
            t if t.grows() => t.inexact(),
            t if t.decays() => Tail::constant_with(1.0, false),
            Tail::Term { coef, exact, .. } => Tail::constant_with(1.0 + coef, exact),
        }
    }

    fn inexact(self) -> Tail {
        match self {
            Tail::Zero => Tail::Zero,
            Tail::Term { coef, base, power, .. } => Tail::Term { coef, base, power, exact: false },
        }
    }

    /// Dominance order: larger base, then smaller power, then larger coefficient.
    fn order(&self) -> (f64, f64) {
        match *self {
            Tail::Zero => (0.0, f64::INFINITY),
            Tail::Term { base, power, .. } => (base, power),
        }
    }

    fn same_rate(&self, other: &Tail) -> bool {
        let (b1, p1) = self.order();
        let (b2, p2) = other.order();
        close(b1, b2) && close(p1, p2)
    }

    fn dominates(&self, other: &Tail) -> bool {
        let (b1, p1) = self.order();
        let (b2, p2) = other.order();
        if !close(b1, b2) {
            b1 > b2
        } else {
            p1 < p2
        }
    }

    fn coef(&self) -> f64 {
        match *self {
            Tail::Zero => 0.0,
            Tail::Term { coef, .. } => coef,
        }
    }

    pub fn add(self, other: Tail) -> Tail {
        match (self, other) {
            (Tail::Zero, t) | (t, Tail::Zero) => t,
            (a, b) if a.same_rate(&b) => match a {
                Tail::Term { base, power, .. } => Tail::Term {
                    coef: a.coef() + b.coef(),
                    base,
                    power,
                    exact: a.is_exact() && b.is_exact(),
                },
                Tail::Zero => unreachable!(),
            },
            (a, b) => {
                if a.dominates(&b) {
                    a.inexact()
                } else {
                    b.inexact()
                }
            }
        }
    }

    pub fn sub(self, other: Tail) -> Signed {
        match (self, other) {
            (Tail::Zero, Tail::Zero) => Signed::Zero,
            (t, Tail::Zero) => Signed::Positive(t),
            (Tail::Zero, t) => Signed::Negative(t),
            (a, b) if a.same_rate(&b) => {
                let (c1, c2) = (a.coef(), b.coef());
                let exact = a.is_exact() && b.is_exact();
                if close(c1, c2) {
                    if exact {
                        Signed::Zero
                    } else {
                        Signed::Undetermined
                    }
                } else {
                    let (base, power) = a.order();
                    let mag = Tail::Term { coef: (c1 - c2).abs(), base, power, exact };
                    if c1 > c2 {
                        Signed::Positive(mag)
                    } else {
                        Signed::Negative(mag)
                    }
                }
            }
            (a, b) => {
                if a.dominates(&b) {
                    Signed::Positive(a.inexact())
                } else {
                    Signed::Negative(b.inexact())
                }
            }
        }
    }

    /// Tail, in the block index, of the product over blocks of `m`
    /// consecutive terms.
    pub fn block_product(self, m: u32) -> Tail {
        match self {
            Tail::Zero => Tail::Zero,
            Tail::Term { coef, base, power, exact } => {
                let mf = m as f64;
                let constant = base == 1.0 && power == 0.0;
                Tail::Term {
                    coef: coef.powi(m as i32) * base.powf(mf * (mf - 1.0) / 2.0) * mf.powf(-power * mf),
                    base: base.powf(mf * mf),
                    power: power * mf,
                    exact: exact && constant,
                }
            }
        }
    }

    /// Tail, in the block index, of the sum over blocks of `m` consecutive terms.
    pub fn block_sum(self, m: u32) -> Tail {
        match self {
            Tail::Zero => Tail::Zero,
            Tail::Term { coef, base, power, exact } => {
                let mf = m as f64;
                let geometric: f64 = (0..m).map(|j| base.powi(j as i32)).sum();
                Tail::Term {
                    coef: coef * mf.powf(-power) * geometric,
                    base: base.powf(mf),
                    power,
                    exact: exact && base == 1.0 && power == 0.0,
                }
            }
        }
    }

    /// Tail of `prod_{block of m} (1 + x) - 1` for a nonnegative sequence `x`.
    pub fn block_growth_excess(self, m: u32) -> Tail {
        match self {
            Tail::Zero => Tail::Zero,
            t if t.decays() => t.block_sum(m).inexact(),
            t if t.grows() => t.block_product(m).inexact(),
            Tail::Term { coef, exact, .. } => Tail::constant_with((1.0 + coef).powi(m as i32) - 1.0, exact),
        }
    }
}

/// Tails of a clipped schedule `x_k` and of `1 - x_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleTail {
    pub value: Tail,
    /// `None` when `x_k` grows without bound.
    pub complement: Option<Tail>,
    /// The raw sequence decays below the default floor; the floor is treated
    /// as a numerical guard and ignored here.
    pub floor_ignored: bool,
}

enum Raw {
    Const(f64),
    Decay(Tail),
    Grow(Tail),
    /// Approaches one from below; carries the tail of `1 - x`.
    ToOne(Tail),
    NegGrow,
}

fn raw_tail(kind: &ScheduleKind) -> Raw {
    match kind {
        ScheduleKind::Constant { value } => Raw::Const(*value),
        ScheduleKind::Explicit { tail, .. } => Raw::Const(*tail),
        ScheduleKind::Power { c, p } => {
            let t = Tail::Term { coef: *c, base: 1.0, power: *p, exact: false };
            match p.partial_cmp(&0.0) {
                Some(Ordering::Greater) => Raw::Decay(t),
                Some(Ordering::Less) => Raw::Grow(t),
                _ => Raw::Const(*c),
            }
        }
        ScheduleKind::Geometric { c, r } => {
            let t = Tail::Term { coef: *c, base: *r, power: 0.0, exact: false };
            match r.partial_cmp(&1.0) {
                Some(Ordering::Less) => Raw::Decay(t),
                Some(Ordering::Greater) => Raw::Grow(t),
                _ => Raw::Const(*c),
            }
        }
        ScheduleKind::Complement { of } => match raw_tail(of) {
            Raw::Const(v) => Raw::Const(1.0 - v),
            Raw::Decay(t) => Raw::ToOne(t),
            Raw::Grow(_) => Raw::NegGrow,
            Raw::ToOne(_) | Raw::NegGrow => Raw::NegGrow,
        },
    }
}

pub fn schedule_tail(s: &Schedule, role: Role) -> ScheduleTail {
    let (lo, hi) = s.bounds(role);
    let constant = |v: f64| {
        let v = v.clamp(lo, hi);
        ScheduleTail { value: Tail::constant(v), complement: Some(Tail::constant(1.0 - v)), floor_ignored: false }
    };
    match raw_tail(&s.kind) {
        Raw::Const(v) => constant(v),
        Raw::NegGrow => constant(lo),
        Raw::Decay(_) if lo > SCHEDULE_FLOOR => constant(lo),
        Raw::Decay(t) => ScheduleTail {
            value: t,
            complement: Some(Tail::constant_with(1.0, false)),
            floor_ignored: true,
        },
        Raw::Grow(_) if hi.is_finite() => constant(hi),
        Raw::Grow(t) => ScheduleTail { value: t, complement: None, floor_ignored: false },
        Raw::ToOne(_) if hi < 1.0 => constant(hi),
        Raw::ToOne(t) => ScheduleTail {
            value: Tail::constant_with(1.0, false),
            complement: Some(t),
            floor_ignored: false,
        },
    }
}
