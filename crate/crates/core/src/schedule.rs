//! Weight schedules `T_k` (attraction) and `S_k` (repulsion).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest value either schedule may take.
pub const SCHEDULE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule parameter {name} = {value} is invalid: {reason}")]
    BadParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("clip range [{lo}, {hi}] is empty or outside the legal range")]
    BadClip { lo: f64, hi: f64 },
    #[error("complement schedules cannot be nested")]
    NestedComplement,
}

/// Closed-form or tabulated sequence, before clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant { value: f64 },
    /// `values[k]` for `k < values.len()`, then `tail` forever.
    Explicit { values: Vec<f64>, tail: f64 },
    /// `c * (k + 1)^(-p)`.
    Power { c: f64, p: f64 },
    /// `c * r^k`.
    Geometric { c: f64, r: f64 },
    /// `1 - inner(k)`; gives schedules that approach one.
    Complement { of: Box<ScheduleKind> },
}

impl ScheduleKind {
    pub fn raw(&self, k: u64) -> f64 {
        match self {
            ScheduleKind::Constant { value } => *value,
            ScheduleKind::Explicit { values, tail } => {
                usize::try_from(k).ok().and_then(|i| values.get(i)).copied().unwrap_or(*tail)
            }
            ScheduleKind::Power { c, p } => c * ((k as f64) + 1.0).powf(-p),
            ScheduleKind::Geometric { c, r } => c * r.powf(k as f64),
            ScheduleKind::Complement { of } => 1.0 - of.raw(k),
        }
    }

    fn check(&self, nested: bool) -> Result<(), ScheduleError> {
        let finite = |name, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(ScheduleError::BadParameter { name, value, reason: "must be finite" })
            }
        };
        match self {
            ScheduleKind::Constant { value } => finite("value", *value),
            ScheduleKind::Explicit { values, tail } => {
                values.iter().try_for_each(|&v| finite("values[]", v))?;
                finite("tail", *tail)
            }
            ScheduleKind::Power { c, p } => {
                finite("p", *p)?;
                if !(c.is_finite() && *c > 0.0) {
                    return Err(ScheduleError::BadParameter { name: "c", value: *c, reason: "must be positive" });
                }
                Ok(())
            }
            ScheduleKind::Geometric { c, r } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(ScheduleError::BadParameter { name: "c", value: *c, reason: "must be positive" });
                }
                if !(r.is_finite() && *r > 0.0) {
                    return Err(ScheduleError::BadParameter { name: "r", value: *r, reason: "must be positive" });
                }
                Ok(())
            }
            ScheduleKind::Complement { of } => {
                if nested {
                    return Err(ScheduleError::NestedComplement);
                }
                of.check(true)
            }
        }
    }
}

/// Which weight a schedule feeds; fixes the legal clip range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Attraction,
    Repulsion,
}

impl Role {
    pub fn legal_range(self) -> (f64, f64) {
        match self {
            Role::Attraction => (SCHEDULE_FLOOR, 1.0),
            Role::Repulsion => (SCHEDULE_FLOOR, f64::INFINITY),
        }
    }
}

/// A schedule with its clip range. Values outside `[lo, hi]` are clamped and
/// flagged by [`Schedule::value_flagged`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    /// Optional `[lo, hi]`; `hi` may be omitted (`null`) for no upper bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<(f64, Option<f64>)>,
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Self {
        Schedule { kind, clip: None }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(ScheduleKind::Constant { value })
    }

    /// Validates parameters and the clip range against `role`.
    pub fn check(&self, role: Role) -> Result<(), ScheduleError> {
        self.kind.check(false)?;
        let (lo, hi) = self.bounds(role);
        let (legal_lo, legal_hi) = role.legal_range();
        if !(lo >= legal_lo && hi <= legal_hi && lo <= hi) || lo.is_nan() || hi.is_nan() {
            return Err(ScheduleError::BadClip { lo, hi });
        }
        Ok(())
    }

    /// Effective clip range: the configured one, intersected with the legal range.
    pub fn bounds(&self, role: Role) -> (f64, f64) {
        let (legal_lo, legal_hi) = role.legal_range();
        match self.clip {
            None => (legal_lo, legal_hi),
            Some((lo, hi)) => (lo, hi.unwrap_or(legal_hi)),
        }
    }

    pub fn value(&self, k: u64, role: Role) -> f64 {
        self.value_flagged(k, role).0
    }

    /// Clipped value and whether clipping changed it.
    pub fn value_flagged(&self, k: u64, role: Role) -> (f64, bool) {
        let raw = self.kind.raw(k);
        let (lo, hi) = self.bounds(role);
        let v = if raw.is_nan() { lo } else { raw.clamp(lo, hi) };
        (v, v != raw)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, ScheduleKind::Constant { .. })
    }

    /// Monotone direction of the clipped sequence, if any.
    pub fn monotonicity(&self, role: Role) -> Option<Monotone> {
        let (lo, hi) = self.bounds(role);
        let clamp = |v: f64| v.clamp(lo, hi);
        let dir = |kind: &ScheduleKind| -> Option<Monotone> {
            match kind {
                ScheduleKind::Constant { .. } => Some(Monotone::Constant),
                ScheduleKind::Power { p, .. } => Some(match p.partial_cmp(&0.0)? {
                    std::cmp::Ordering::Greater => Monotone::NonIncreasing,
                    std::cmp::Ordering::Less => Monotone::NonDecreasing,
                    std::cmp::Ordering::Equal => Monotone::Constant,
                }),
                ScheduleKind::Geometric { r, .. } => Some(match r.partial_cmp(&1.0)? {
                    std::cmp::Ordering::Less => Monotone::NonIncreasing,
                    std::cmp::Ordering::Greater => Monotone::NonDecreasing,
                    std::cmp::Ordering::Equal => Monotone::Constant,
                }),
                ScheduleKind::Explicit { .. } | ScheduleKind::Complement { .. } => None,
            }
        };
        match &self.kind {
            ScheduleKind::Explicit { values, tail } => {
                let seq: Vec<f64> = values.iter().chain(std::iter::once(tail)).map(|&v| clamp(v)).collect();
                let up = seq.windows(2).all(|w| w[1] >= w[0]);
                let down = seq.windows(2).all(|w| w[1] <= w[0]);
                match (up, down) {
                    (true, true) => Some(Monotone::Constant),
                    (true, false) => Some(Monotone::NonDecreasing),
                    (false, true) => Some(Monotone::NonIncreasing),
                    (false, false) => None,
                }
            }
            ScheduleKind::Complement { of } => dir(of).map(Monotone::reversed),
            other => dir(other),
        }
    }

    /// Infimum and supremum of the clipped sequence over all `k`.
    pub fn range(&self, role: Role) -> (f64, f64) {
        let (lo, hi) = self.bounds(role);
        let clamp = |v: f64| v.clamp(lo, hi);
        let mut points: Vec<f64> = match &self.kind {
            ScheduleKind::Explicit { values, tail } => {
                values.iter().chain(std::iter::once(tail)).copied().collect()
            }
            _ => vec![self.kind.raw(0), self.limit_raw()],
        };
        points.iter_mut().for_each(|v| *v = clamp(*v));
        let inf = points.iter().copied().fold(f64::INFINITY, f64::min);
        let sup = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (inf, sup)
    }

    fn limit_raw(&self) -> f64 {
        fn limit(kind: &ScheduleKind) -> f64 {
            match kind {
                ScheduleKind::Constant { value } => *value,
                ScheduleKind::Explicit { tail, .. } => *tail,
                ScheduleKind::Power { c, p } => {
                    if *p > 0.0 {
                        0.0
                    } else if *p == 0.0 {
                        *c
                    } else {
                        f64::INFINITY
                    }
                }
                ScheduleKind::Geometric { c, r } => {
                    if *r < 1.0 {
                        0.0
                    } else if *r == 1.0 {
                        *c
                    } else {
                        f64::INFINITY
                    }
                }
                ScheduleKind::Complement { of } => 1.0 - limit(of),
            }
        }
        limit(&self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotone {
    Constant,
    NonIncreasing,
    NonDecreasing,
}

impl Monotone {
    fn reversed(self) -> Monotone {
        match self {
            Monotone::Constant => Monotone::Constant,
            Monotone::NonIncreasing => Monotone::NonDecreasing,
            Monotone::NonDecreasing => Monotone::NonIncreasing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_evaluate() {
        assert_eq!(Schedule::constant(0.25).value(9, Role::Attraction), 0.25);
        let explicit = Schedule::new(ScheduleKind::Explicit { values: vec![0.5, 0.4], tail: 0.1 });
        assert_eq!(explicit.value(1, Role::Attraction), 0.4);
        assert_eq!(explicit.value(2, Role::Attraction), 0.1);
        assert_eq!(explicit.value(u64::MAX, Role::Attraction), 0.1);
        let power = Schedule::new(ScheduleKind::Power { c: 1.0, p: 1.0 });
        assert_eq!(power.value(3, Role::Attraction), 0.25);
        let geo = Schedule::new(ScheduleKind::Geometric { c: 0.25, r: 0.25 });
        assert_eq!(geo.value(1, Role::Attraction), 1.0 / 16.0);
        let comp = Schedule::new(ScheduleKind::Complement {
            of: Box::new(ScheduleKind::Geometric { c: 0.25, r: 0.5 }),
        });
        assert_eq!(comp.value(1, Role::Attraction), 1.0 - 0.125);
    }

    #[test]
    fn clipping_is_reported() {
        let big = Schedule::constant(3.0);
        assert_eq!(big.value_flagged(0, Role::Attraction), (1.0, true));
        assert_eq!(big.value_flagged(0, Role::Repulsion), (3.0, false));
        let zero = Schedule::constant(0.0);
        assert_eq!(zero.value_flagged(0, Role::Repulsion), (SCHEDULE_FLOOR, true));
        let tiny = Schedule::new(ScheduleKind::Geometric { c: 1.0, r: 0.01 });
        assert_eq!(tiny.value(100, Role::Attraction), SCHEDULE_FLOOR);
        let capped = Schedule { kind: ScheduleKind::Constant { value: 2.0 }, clip: Some((0.1, Some(0.5))) };
        assert_eq!(capped.value(0, Role::Repulsion), 0.5);
    }

    #[test]
    fn check_rejects_bad_parameters() {
        assert!(Schedule::new(ScheduleKind::Geometric { c: 1.0, r: -0.5 }).check(Role::Attraction).is_err());
        assert!(Schedule::new(ScheduleKind::Power { c: 0.0, p: 1.0 }).check(Role::Attraction).is_err());
        let clip = Schedule { kind: ScheduleKind::Constant { value: 0.5 }, clip: Some((0.0, Some(1.0))) };
        assert!(clip.check(Role::Attraction).is_err());
        let clip = Schedule { kind: ScheduleKind::Constant { value: 0.5 }, clip: Some((0.1, Some(2.0))) };
        assert!(clip.check(Role::Attraction).is_err());
        assert!(clip.check(Role::Repulsion).is_ok());
        let nested = Schedule::new(ScheduleKind::Complement {
            of: Box::new(ScheduleKind::Complement { of: Box::new(ScheduleKind::Constant { value: 0.5 }) }),
        });
        assert_eq!(nested.check(Role::Attraction), Err(ScheduleError::NestedComplement));
    }

    #[test]
    fn monotonicity_and_range() {
        let geo = Schedule::new(ScheduleKind::Geometric { c: 0.25, r: 0.5 });
        assert_eq!(geo.monotonicity(Role::Attraction), Some(Monotone::NonIncreasing));
        assert_eq!(geo.range(Role::Attraction), (SCHEDULE_FLOOR, 0.25));
        let comp = Schedule::new(ScheduleKind::Complement { of: Box::new(geo.kind.clone()) });
        assert_eq!(comp.monotonicity(Role::Attraction), Some(Monotone::NonDecreasing));
        assert_eq!(comp.range(Role::Attraction), (0.75, 1.0));
        let wiggle = Schedule::new(ScheduleKind::Explicit { values: vec![0.2, 0.4, 0.3], tail: 0.3 });
        assert_eq!(wiggle.monotonicity(Role::Attraction), None);
        assert_eq!(wiggle.range(Role::Attraction), (0.2, 0.4));
    }

    #[test]
    fn json_shape() {
        let s: Schedule = serde_json::from_str(r#"{"kind":"constant","value":0.25}"#).unwrap();
        assert_eq!(s, Schedule::constant(0.25));
        let s: Schedule =
            serde_json::from_str(r#"{"kind":"power","c":1.0,"p":0.5,"clip":[0.001,null]}"#).unwrap();
        assert_eq!(s.clip, Some((0.001, None)));
        let text = serde_json::to_string(&Schedule::new(ScheduleKind::Complement {
            of: Box::new(ScheduleKind::Geometric { c: 0.25, r: 0.5 }),
        }))
        .unwrap();
        assert_eq!(text, r#"{"kind":"complement","of":{"kind":"geometric","c":0.25,"r":0.5}}"#);
    }
}
