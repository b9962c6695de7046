use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_table_shape, second_moments, CheckReport};
use crate::dataset::ReferenceWeight;
use crate::env::DiscreteEnv;
use crate::error::{Error, Result};
use crate::seed::{child_rng, stage};

/// Slack for rounding in the exact comparisons.
const RATIO_TOL: f64 = 1e-9;

/// Box-constrained cell functions: `lo[i][a] <= f[i][a] <= hi[i][a]`. The
/// class is convex and its squared-loss risk separates over cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxClass {
    pub lo: Vec<Vec<f64>>,
    pub hi: Vec<Vec<f64>>,
}

impl BoxClass {
    pub fn uniform(n_ctx: usize, num_arms: usize, lo: f64, hi: f64) -> Self {
        BoxClass {
            lo: vec![vec![lo; num_arms]; n_ctx],
            hi: vec![vec![hi; num_arms]; n_ctx],
        }
    }

    /// Exact risk minimizer over the box: `mu` clipped cell by cell.
    pub fn minimizer(&self, env: &DiscreteEnv) -> Vec<Vec<f64>> {
        env.mu
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(a, m)| m.clamp(self.lo[i][a], self.hi[i][a]))
                    .collect()
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<Vec<f64>>> {
        (0..count)
            .map(|_| {
                self.lo
                    .iter()
                    .zip(&self.hi)
                    .map(|(l, h)| l.iter().zip(h).map(|(l, h)| rng.random_range(*l..=*h)).collect())
                    .collect()
            })
            .collect()
    }

    fn bound(&self) -> f64 {
        self.lo
            .iter()
            .chain(&self.hi)
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Checks `||l(f) - l(f1)||_{2,g*} <= 4 sqrt(M) (R*(f) - R*(f1))^{1/2}` for
/// squared loss, exactly, for each sampled `f` in a box class whose
/// minimizer is `f1`. Outcomes must be bounded, so the environment has to be
/// noise-free; `sqrt(M)` bounds `|mu|` and the box.
pub fn check_square_loss_variance_bound(
    env: &DiscreteEnv,
    gstar: &ReferenceWeight,
    class: &BoxClass,
    fs: &[Vec<Vec<f64>>],
    f1: &[Vec<f64>],
) -> Result<CheckReport> {
    let k = env.num_arms();
    gstar.check(k)?;
    check_table_shape(env, &class.lo, "box lower bounds")?;
    check_table_shape(env, &class.hi, "box upper bounds")?;
    check_table_shape(env, f1, "f1")?;
    if env.noise_std.iter().flatten().any(|s| *s != 0.0) {
        return Err(Error::invalid("the variance bound needs bounded outcomes: use a noise-free environment"));
    }
    let sqrt_m = env.mean_bound().max(class.bound());
    // Per-cell loss of a function at Y = mu.
    let loss = |f: &[Vec<f64>], i: usize, a: usize| (env.mu[i][a] - f[i][a]).powi(2);
    let risk = |f: &[Vec<f64>]| -> f64 {
        (0..env.len())
            .map(|i| env.probs[i] * (0..k).map(|a| gstar.value(a, k) * loss(f, i, a)).sum::<f64>())
            .sum()
    };
    let r1 = risk(f1);
    let mut worst = 0.0f64;
    for f in fs {
        check_table_shape(env, f, "f")?;
        let excess = risk(f) - r1;
        if excess < -1e-12 * r1.abs().max(1.0) {
            return Err(Error::Degenerate(format!(
                "f1 is not a minimizer: a sampled f has risk lower by {}",
                -excess
            )));
        }
        let lhs = (0..env.len())
            .map(|i| {
                env.probs[i]
                    * (0..k)
                        .map(|a| gstar.value(a, k) * (loss(f, i, a) - loss(f1, i, a)).powi(2))
                        .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt();
        let rhs = 4.0 * sqrt_m * excess.max(0.0).sqrt();
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        worst = worst.max(ratio);
    }
    Ok(CheckReport::at_most(
        "square-loss-variance-bound",
        worst,
        1.0 + RATIO_TOL,
        json!({ "functions": fs.len(), "sqrt_M": sqrt_m, "max_ratio": worst }),
    ))
}

/// Checks `|l(f, o) - l(f', o)| <= 4 sqrt(M) |f - f'|` on random triples in
/// `[-sqrt(M), sqrt(M)]` plus the extreme corners. The report also carries
/// the worst ratio against the constant `sqrt(M)` without the factor 4,
/// which the corners exceed.
pub fn check_lipschitz_square_loss(m: f64, n: usize, seed: u64) -> Result<CheckReport> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid("M must be positive"));
    }
    let r = m.sqrt();
    let mut rng = child_rng(seed, 0, stage::CHECK);
    let mut triples: Vec<(f64, f64, f64)> = vec![(r, r, -r), (-r, -r, r), (r, -r, r), (0.0, r, r)];
    triples.extend((0..n).map(|_| {
        (
            rng.random_range(-r..=r),
            rng.random_range(-r..=r),
            rng.random_range(-r..=r),
        )
    }));
    let (mut worst, mut worst_unit) = (0.0f64, 0.0f64);
    for (y, f, g) in &triples {
        let lhs = ((y - f).powi(2) - (y - g).powi(2)).abs();
        let d = (f - g).abs();
        if d == 0.0 {
            if lhs != 0.0 {
                worst = f64::INFINITY;
            }
            continue;
        }
        worst = worst.max(lhs / (4.0 * r * d));
        worst_unit = worst_unit.max(lhs / (r * d));
    }
    Ok(CheckReport::at_most(
        "square-loss-lipschitz",
        worst,
        1.0 + RATIO_TOL,
        json!({
            "triples": triples.len(),
            "constant": "4*sqrt(M)",
            "max_ratio_unit_constant": worst_unit,
        }),
    ))
}

/// `M` with `E[Y^2] <= M^2` in every cell.
pub fn outcome_scale(env: &DiscreteEnv) -> f64 {
    second_moments(env)
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.sqrt()))
}

/// Smallest `kappa` with `Pr(gap <= u) <= (kappa u / M)^nu` for all `u`,
/// found by scanning the finitely many gap values. For `nu = inf` this is
/// `M / min gap`.
pub fn margin_constant(env: &DiscreteEnv, nu: f64, m: f64) -> Result<f64> {
    if !env.has_unique_argmin() {
        return Err(Error::invalid("margin condition needs a unique best arm in every context"));
    }
    if !(nu > 0.0) {
        return Err(Error::invalid("nu must be positive"));
    }
    let mut gaps: Vec<(f64, f64)> = (0..env.len()).map(|i| (env.arm_gap(i), env.probs[i])).collect();
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    if nu.is_infinite() {
        return Ok(m / gaps[0].0);
    }
    let mut cdf = 0.0;
    let mut kappa = 0.0f64;
    for (j, (g, p)) in gaps.iter().enumerate() {
        cdf += p;
        // Only the last of equal gaps carries the full jump.
        if j + 1 < gaps.len() && gaps[j + 1].0 == *g {
            continue;
        }
        kappa = kappa.max(m * cdf.min(1.0).powf(1.0 / nu) / g);
    }
    Ok(kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReports {
    /// `Pr{A != A*}` against the explicit-constant margin chain (Markov form
    /// for `nu = inf`).
    pub chain: CheckReport,
    /// `||l(f) - l(f1)||^2_{2,g*} <= 2 M^2 Pr{A != A*}`.
    pub l2: CheckReport,
    pub kappa: f64,
    pub m: f64,
}

/// For each stochastic policy `f[i][a]` (rows on the simplex), computes
/// `P = Pr{A != A*}` and `E = E[mu(X, A) - mu(X, A*)]` exactly and checks
/// `P <= nu^(-nu/(nu+1)) (nu+1) ((kappa/M) E)^(nu/(nu+1))`, with
/// `P <= (kappa/M) E` when `nu = inf`, where `kappa` is the smallest valid
/// margin constant.
///
/// The second report bounds the policy-value loss difference. A policy that
/// puts all mass on one wrong arm reaches `2 M^2 P`, so that is the constant
/// checked; the worst ratio against `M^2 P` is reported alongside.
pub fn check_margin_variance_bound(
    env: &DiscreteEnv,
    nu: f64,
    policies: &[Vec<Vec<f64>>],
    gstar: &ReferenceWeight,
) -> Result<MarginReports> {
    let k = env.num_arms();
    gstar.check(k)?;
    let m = outcome_scale(env);
    let kappa = margin_constant(env, nu, m)?;
    let c = kappa / m;
    let ey2 = second_moments(env);
    let star: Vec<usize> = (0..env.len()).map(|i| env.optimal_arm(i)).collect();

    let (mut worst_chain, mut worst_l2, mut worst_unit) = (0.0f64, 0.0f64, 0.0f64);
    for f in policies {
        check_table_shape(env, f, "policy")?;
        if f.iter().any(|r| r.iter().any(|p| *p < 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9) {
            return Err(Error::invalid("policy rows must lie on the simplex"));
        }
        let mut p = 0.0;
        let mut e = 0.0;
        let mut l2 = 0.0;
        for i in 0..env.len() {
            let w = env.probs[i];
            let best = env.mu[i][star[i]];
            p += w * (1.0 - f[i][star[i]]);
            for a in 0..k {
                e += w * f[i][a] * (env.mu[i][a] - best);
                let f1 = if a == star[i] { 1.0 } else { 0.0 };
                l2 += w * gstar.value(a, k) * ey2[i][a] * (f[i][a] - f1).powi(2);
            }
        }
        let bound = if nu.is_infinite() {
            c * e
        } else {
            nu.powf(-nu / (nu + 1.0)) * (nu + 1.0) * (c * e.max(0.0)).powf(nu / (nu + 1.0))
        };
        let ratio = |lhs: f64, rhs: f64| {
            if lhs <= 1e-15 {
                0.0
            } else if rhs <= 0.0 {
                f64::INFINITY
            } else {
                lhs / rhs
            }
        };
        worst_chain = worst_chain.max(ratio(p, bound));
        worst_l2 = worst_l2.max(ratio(l2, 2.0 * m * m * p));
        worst_unit = worst_unit.max(ratio(l2, m * m * p));
    }
    let details = json!({ "policies": policies.len(), "nu": if nu.is_infinite() { json!("inf") } else { json!(nu) }, "kappa": kappa, "M": m });
    Ok(MarginReports {
        chain: CheckReport::at_most("margin-chain", worst_chain, 1.0 + RATIO_TOL, details.clone()),
        l2: CheckReport::at_most(
            "margin-l2-bound",
            worst_l2,
            1.0 + RATIO_TOL,
            json!({ "details": details, "constant": "2*M^2", "max_ratio_unit_constant": worst_unit }),
        ),
        kappa,
        m,
    })
}
