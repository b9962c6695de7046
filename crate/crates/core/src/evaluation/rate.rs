//! Log-log rate fits with bootstrap intervals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::{mean, quantile_sorted};
use crate::error::{Error, Result};
use crate::seed::{child_rng, stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted exponent of `loss ~ c T^slope`.
    pub slope: f64,
    pub intercept: f64,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    /// Bootstrap resamples that produced a slope.
    pub n_boot: usize,
}

impl RateFit {
    pub fn covers(&self, exponent: f64) -> bool {
        self.lo <= exponent && exponent <= self.hi
    }
}

/// OLS of `log y` on `log t`: `(slope, intercept)`.
pub fn ols_loglog(t: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn check_inputs(t_values: &[f64], level: f64) -> Result<()> {
    let mut distinct: Vec<f64> = t_values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid("rate fit needs at least 3 distinct T values"));
    }
    if t_values.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("T values must be positive"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(())
}

fn interval(point: (f64, f64), mut boots: Vec<f64>, level: f64) -> RateFit {
    boots.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let (lo, hi) = if boots.is_empty() {
        (point.0, point.0)
    } else {
        (quantile_sorted(&boots, alpha), quantile_sorted(&boots, 1.0 - alpha))
    };
    // A percentile interval can miss a skewed point estimate; widen to keep it.
    RateFit {
        slope: point.0,
        intercept: point.1,
        level,
        lo: lo.min(point.0),
        hi: hi.max(point.0),
        n_boot: boots.len(),
    }
}

/// Fit over `(T, loss)` pairs; the bootstrap resamples pairs.
pub fn fit_rate(t_values: &[f64], losses: &[f64], n_boot: usize, level: f64, seed: u64) -> Result<RateFit> {
    if t_values.len() != losses.len() {
        return Err(Error::invalid("T values and losses differ in length"));
    }
    check_inputs(t_values, level)?;
    if losses.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::invalid("losses must be positive to take logs"));
    }
    let point = ols_loglog(t_values, losses);
    let mut rng = child_rng(seed, 0, stage::BOOTSTRAP);
    let n = t_values.len();
    let mut boots = Vec::with_capacity(n_boot);
    let (mut bt, mut bl) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..n_boot {
        for i in 0..n {
            let j = rng.random_range(0..n);
            bt[i] = t_values[j];
            bl[i] = losses[j];
        }
        if bt.iter().any(|t| *t != bt[0]) {
            boots.push(ols_loglog(&bt, &bl).0);
        }
    }
    Ok(interval(point, boots, level))
}

/// Fit of the across-replication mean loss at each `T`.
/// `per_rep[r][i]` is replication `r`'s loss at `t_values[i]`; individual
/// values may be zero or negative but every mean must be positive. The bootstrap
/// resamples whole replications, keeping each one's losses across `T`
/// together.
pub fn fit_rate_replicated(
    t_values: &[f64],
    per_rep: &[Vec<f64>],
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<RateFit> {
    check_inputs(t_values, level)?;
    if per_rep.is_empty() || per_rep.iter().any(|r| r.len() != t_values.len()) {
        return Err(Error::invalid("need one loss per T for every replication"));
    }
    if per_rep.iter().flatten().any(|l| !l.is_finite()) {
        return Err(Error::invalid("losses must be finite"));
    }
    let nt = t_values.len();
    let means = |rows: &mut dyn Iterator<Item = &Vec<f64>>| -> Vec<f64> {
        let mut s = vec![0.0; nt];
        let mut n = 0usize;
        for r in rows {
            for (a, b) in s.iter_mut().zip(r) {
                *a += b;
            }
            n += 1;
        }
        s.iter().map(|v| v / n as f64).collect()
    };
    let m = means(&mut per_rep.iter());
    if m.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("mean loss is zero at some T; cannot take logs"));
    }
    let point = ols_loglog(t_values, &m);
    let mut rng = child_rng(seed, 0, stage::BOOTSTRAP);
    let nr = per_rep.len();
    let mut boots = Vec::with_capacity(n_boot);
    let mut pick = vec![0usize; nr];
    for _ in 0..n_boot {
        for p in pick.iter_mut() {
            *p = rng.random_range(0..nr);
        }
        let bm = means(&mut pick.iter().map(|&i| &per_rep[i]));
        if bm.iter().all(|v| *v > 0.0) {
            boots.push(ols_loglog(t_values, &bm).0);
        }
    }
    Ok(interval(point, boots, level))
}
