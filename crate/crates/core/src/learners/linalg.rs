//! Weighted normal equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero when
/// forming the minimum-norm solution.
const RANK_TOL: f64 = 1e-11;

/// Running sufficient statistics `X'WX`, `X'Wy`, `y'Wy` and `sum w`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    pub dim: usize,
    /// Row-major `dim x dim`, upper and lower triangles both filled.
    pub xtwx: Vec<f64>,
    pub xtwy: Vec<f64>,
    pub ytwy: f64,
    pub total_weight: f64,
    pub count: usize,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        NormalEquations {
            dim,
            xtwx: vec![0.0; dim * dim],
            xtwy: vec![0.0; dim],
            ytwy: 0.0,
            total_weight: 0.0,
            count: 0,
        }
    }

    pub fn add(&mut self, phi: &[f64], y: f64, w: f64) {
        debug_assert_eq!(phi.len(), self.dim);
        let p = self.dim;
        for i in 0..p {
            let wi = w * phi[i];
            if wi == 0.0 {
                continue;
            }
            self.xtwy[i] += wi * y;
            let row = &mut self.xtwx[i * p..(i + 1) * p];
            for j in i..p {
                row[j] += wi * phi[j];
            }
        }
        self.ytwy += w * y * y;
        self.total_weight += w;
        self.count += 1;
    }

    /// Adds every entry of `other`.
    pub fn merge(&mut self, other: &NormalEquations) {
        for (a, b) in self.xtwx.iter_mut().zip(&other.xtwx) {
            *a += b;
        }
        for (a, b) in self.xtwy.iter_mut().zip(&other.xtwy) {
            *a += b;
        }
        self.ytwy += other.ytwy;
        self.total_weight += other.total_weight;
        self.count += other.count;
    }

    /// Subtracts every entry of `other`.
    pub fn subtract(&mut self, other: &NormalEquations) {
        for (a, b) in self.xtwx.iter_mut().zip(&other.xtwx) {
            *a -= b;
        }
        for (a, b) in self.xtwy.iter_mut().zip(&other.xtwy) {
            *a -= b;
        }
        self.ytwy -= other.ytwy;
        self.total_weight -= other.total_weight;
        self.count -= other.count;
    }

    /// Full symmetric matrix (the accumulator only fills the upper triangle).
    pub fn gram(&self) -> DMatrix<f64> {
        let p = self.dim;
        DMatrix::from_fn(p, p, |i, j| {
            if i <= j {
                self.xtwx[i * p + j]
            } else {
                self.xtwx[j * p + i]
            }
        })
    }

    /// `sum w (y - theta.phi)^2`, from the sufficient statistics.
    pub fn weighted_sse(&self, theta: &[f64]) -> f64 {
        let g = self.gram();
        let t = DVector::from_column_slice(theta);
        let b = DVector::from_column_slice(&self.xtwy);
        self.ytwy - 2.0 * t.dot(&b) + (g * &t).dot(&t)
    }

    /// Minimizes `sum w (y - theta.phi)^2 + ridge * sum_{j in penalized} theta_j^2`.
    ///
    /// With no effective penalty and a singular system the minimum-norm
    /// solution is returned.
    pub fn solve(&self, ridge: f64, penalize_first: bool) -> Result<Vec<f64>> {
        if !(self.total_weight > 0.0) {
            return Err(Error::Degenerate("all weights are zero".into()));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::invalid("ridge penalty must be finite and >= 0"));
        }
        let mut a = self.gram();
        if ridge > 0.0 {
            let start = if penalize_first { 0 } else { 1 };
            for j in start..self.dim {
                a[(j, j)] += ridge;
            }
        }
        let b = DVector::from_column_slice(&self.xtwy);
        Ok(solve_psd(a, b))
    }

    /// The collector's per-arm fit: plain least squares, with `jitter` on the
    /// diagonal when there are fewer samples than unknowns or the system is
    /// numerically singular.
    pub fn solve_jittered(&self, jitter: f64) -> Vec<f64> {
        let mut a = self.gram();
        let b = DVector::from_column_slice(&self.xtwy);
        if self.count >= self.dim {
            if let Some(ch) = a.clone().cholesky() {
                let x = ch.solve(&b);
                if x.iter().all(|v| v.is_finite()) {
                    return x.as_slice().to_vec();
                }
            }
        }
        for j in 0..self.dim {
            a[(j, j)] += jitter;
        }
        match a.clone().cholesky() {
            Some(ch) => ch.solve(&b).as_slice().to_vec(),
            None => solve_psd(a, b),
        }
    }
}

/// Minimum-norm solution of `A x = b` for symmetric positive semi-definite
/// `A`, via its eigendecomposition.
pub fn solve_psd(a: DMatrix<f64>, b: DVector<f64>) -> Vec<f64> {
    let p = a.nrows();
    let eig = a.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = max * RANK_TOL;
    let mut x = DVector::zeros(p);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let v = eig.eigenvectors.column(i);
            let coef = v.dot(&b) / lambda;
            x.axpy(coef, &v, 1.0);
        }
    }
    x.as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_system_gives_min_norm() {
        // Two identical columns: any split of the coefficient fits; the
        // minimum-norm one splits it evenly.
        let mut ne = NormalEquations::new(2);
        for (x, y) in [(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)] {
            ne.add(&[x, x], y, 1.0);
        }
        let th = ne.solve(0.0, true).unwrap();
        assert!((th[0] - 1.0).abs() < 1e-10 && (th[1] - 1.0).abs() < 1e-10, "{th:?}");
    }

    #[test]
    fn merge_and_subtract_are_inverse() {
        let mut a = NormalEquations::new(2);
        a.add(&[1.0, 0.5], 1.0, 2.0);
        let mut b = NormalEquations::new(2);
        b.add(&[1.0, -1.0], 3.0, 0.5);
        let mut c = a.clone();
        c.merge(&b);
        c.subtract(&b);
        for (x, y) in c.xtwx.iter().zip(&a.xtwx) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(c.count, 1);
    }

    #[test]
    fn jitter_handles_underdetermined() {
        let mut ne = NormalEquations::new(3);
        ne.add(&[1.0, 0.2, 0.3], 1.5, 1.0);
        let th = ne.solve_jittered(1e-8);
        let pred = th[0] + 0.2 * th[1] + 0.3 * th[2];
        assert!((pred - 1.5).abs() < 1e-6);
    }
}
