use crate::dataset::Context;

/// Anything that scores a (context, arm) pair: a regression function
/// `f(x, a)`, or a policy viewed as `f(x, a) = P(h(x) = a)`.
pub trait Predictor {
    fn predict(&self, x: &[f64], arm: usize) -> f64;
}

impl<F> Predictor for F
where
    F: Fn(&[f64], usize) -> f64,
{
    fn predict(&self, x: &[f64], arm: usize) -> f64 {
        self(x, arm)
    }
}

/// Arm minimizing the scores, ties to the lowest index.
pub fn argmin_arm<P: Predictor + ?Sized>(p: &P, x: &Context, num_arms: usize) -> usize {
    let mut best = 0;
    let mut best_v = p.predict(x, 0);
    for a in 1..num_arms {
        let v = p.predict(x, a);
        if v < best_v {
            best = a;
            best_v = v;
        }
    }
    best
}
