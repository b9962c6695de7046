//! Per-record sample weights for weighted ERM.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collector::ExplorationSchedule;
use crate::dataset::{LoggedDataset, LoggedRecord, ReferenceWeight};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeightScheme {
    #[serde(rename = "unweighted")]
    Unweighted,
    #[serde(rename = "iswerm")]
    Iswerm,
    #[serde(rename = "isfloor")]
    IsFloor,
    #[serde(rename = "sqrtis")]
    SqrtIs,
    #[serde(rename = "sqrtisfloor")]
    SqrtIsFloor,
    #[serde(rename = "mrdr")]
    Mrdr,
    #[serde(rename = "mrdrfloor")]
    MrdrFloor,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 7] = [
        WeightScheme::Unweighted,
        WeightScheme::Iswerm,
        WeightScheme::IsFloor,
        WeightScheme::SqrtIs,
        WeightScheme::SqrtIsFloor,
        WeightScheme::Mrdr,
        WeightScheme::MrdrFloor,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Unweighted => "unweighted",
            WeightScheme::Iswerm => "iswerm",
            WeightScheme::IsFloor => "isfloor",
            WeightScheme::SqrtIs => "sqrtis",
            WeightScheme::SqrtIsFloor => "sqrtisfloor",
            WeightScheme::Mrdr => "mrdr",
            WeightScheme::MrdrFloor => "mrdrfloor",
        }
    }

    /// Weight of one record whose propensity is `g` and floor is `floor`.
    /// `ratio` is `g*(a|x)`, used only by the importance-sampling scheme.
    pub fn weight(&self, g: f64, floor: f64, ratio: f64) -> f64 {
        match self {
            WeightScheme::Unweighted => 1.0,
            WeightScheme::Iswerm => ratio / g,
            WeightScheme::IsFloor => 1.0 / floor,
            WeightScheme::SqrtIs => g.sqrt().recip(),
            WeightScheme::SqrtIsFloor => floor.sqrt().recip(),
            WeightScheme::Mrdr => (1.0 - g) / (g * g),
            WeightScheme::MrdrFloor => (1.0 - floor) / (floor * floor),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightScheme::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown weight scheme '{s}' (expected one of {})",
                    WeightScheme::ALL.map(|w| w.name()).join(", ")
                ))
            })
    }
}

/// Propensity floor `eps_t / K`.
pub fn floor_at(schedule: &ExplorationSchedule, t: u64, num_arms: usize) -> f64 {
    schedule.epsilon_at(t) / num_arms as f64
}

/// The floor of a logged record, from the epsilon it was collected with.
/// Warm-start rounds log `eps = 1` and so get the uniform floor `1/K`.
pub fn record_floor(r: &LoggedRecord, num_arms: usize) -> f64 {
    r.epsilon / num_arms as f64
}

/// Weights with the default reference `g* = 1`.
pub fn compute_weights(scheme: WeightScheme, ds: &LoggedDataset) -> Result<Vec<f64>> {
    compute_weights_with(scheme, ds, &ReferenceWeight::ConstantOne)
}

pub fn compute_weights_with(
    scheme: WeightScheme,
    ds: &LoggedDataset,
    gstar: &ReferenceWeight,
) -> Result<Vec<f64>> {
    gstar.check(ds.num_arms)?;
    let k = ds.num_arms;
    ds.records
        .iter()
        .map(|r| {
            if !(r.propensity > 0.0 && r.propensity <= 1.0) || !(r.epsilon > 0.0 && r.epsilon <= 1.0) {
                return Err(Error::InvalidDataset(format!(
                    "record {}: propensity {} / epsilon {} outside (0, 1]",
                    r.t, r.propensity, r.epsilon
                )));
            }
            let w = scheme.weight(r.propensity, record_floor(r, k), gstar.value(r.action, k));
            debug_assert!(w.is_finite() && w >= 0.0);
            Ok(w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collector::{collect, GreedyModelSpec};
    use crate::dataset::Context;
    use crate::env::{make_synthetic_linear, Environment};

    fn one(g: f64, eps: f64, k: usize) -> LoggedDataset {
        let records = (0..k)
            .map(|a| LoggedRecord {
                t: a as u64 + 1,
                context: Context(vec![0.0]),
                action: a,
                outcome: 0.0,
                propensity: g,
                epsilon: eps,
            })
            .collect();
        LoggedDataset::new(k, 1, 0.0, 0, records).unwrap()
    }

    #[test]
    fn scheme_examples() {
        let ds = one(0.25, 1.0, 4);
        let w = |s| compute_weights(s, &ds).unwrap()[0];
        assert_eq!(w(WeightScheme::Iswerm), 4.0);
        assert_eq!(w(WeightScheme::Unweighted), 1.0);
        assert_eq!(w(WeightScheme::SqrtIs), 2.0);
        let ds = one(0.5, 1.0, 2);
        assert_eq!(compute_weights(WeightScheme::Mrdr, &ds).unwrap()[0], 2.0);
        // g = 1 gives a zero MRDR weight.
        assert_eq!(WeightScheme::Mrdr.weight(1.0, 0.5, 1.0), 0.0);
    }

    #[test]
    fn floor_examples() {
        let s = ExplorationSchedule::new(0.0, 0.2).unwrap();
        assert_eq!(floor_at(&ExplorationSchedule::new(0.0, 0.0).unwrap(), 5, 2), 0.5);
        // eps_t = 0.2 with K = 4.
        let s2 = ExplorationSchedule::new(1.0, 0.0).unwrap();
        assert!((floor_at(&s2, 5, 4) - 0.05).abs() < 1e-15);
        assert_eq!(floor_at(&s, 1, 2), 0.5);
    }

    #[test]
    fn names_round_trip() {
        for s in WeightScheme::ALL {
            assert_eq!(s.name().parse::<WeightScheme>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("ips".parse::<WeightScheme>().is_err());
    }

    #[test]
    fn reference_weight_scales_iswerm() {
        let ds = one(0.25, 1.0, 4);
        let u = compute_weights_with(WeightScheme::Iswerm, &ds, &ReferenceWeight::UniformDensity).unwrap();
        assert!(u.iter().all(|w| (w - 1.0).abs() < 1e-15));
        let d = compute_weights_with(WeightScheme::Iswerm, &ds, &ReferenceWeight::Dirac(2)).unwrap();
        assert_eq!(d, vec![0.0, 0.0, 4.0, 0.0]);
        assert!(compute_weights_with(WeightScheme::Iswerm, &ds, &ReferenceWeight::Dirac(4)).is_err());
    }

    #[test]
    fn collected_data_respects_floor_and_gamma() {
        let env = Environment::Linear(make_synthetic_linear(2, 3, 4, 1.0).unwrap());
        let s = ExplorationSchedule::new(0.5, 0.0).unwrap();
        let ds = collect(&env, &s, &GreedyModelSpec::linear(), 500, 2).unwrap();
        let w = compute_weights(WeightScheme::Iswerm, &ds).unwrap();
        for (r, w) in ds.records.iter().zip(&w) {
            assert!(record_floor(r, 3) <= r.propensity + 1e-15);
            assert!(*w <= 3.0 / s.epsilon_at(r.t) + 1e-9);
            assert!(w.is_finite() && *w > 0.0);
        }
    }

    #[test]
    fn constant_exploration_makes_is_and_floor_coincide() {
        let env = Environment::Linear(make_synthetic_linear(2, 3, 4, 1.0).unwrap());
        let s = ExplorationSchedule::new(0.0, 0.0).unwrap();
        let ds = collect(&env, &s, &GreedyModelSpec::linear(), 300, 8).unwrap();
        let is = compute_weights(WeightScheme::Iswerm, &ds).unwrap();
        let fl = compute_weights(WeightScheme::IsFloor, &ds).unwrap();
        assert!(is.iter().zip(&fl).all(|(a, b)| (a - 3.0).abs() < 1e-12 && (b - 3.0).abs() < 1e-12));
    }
}
