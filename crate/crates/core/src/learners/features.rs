use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// `[(1, x), onehot(a) (x) (1, x)]`, dimension `(K+1)(d+1)`.
    LinearInteracted,
    /// `[x, onehot(a)]`, dimension `d + K`.
    TreeConcat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub mode: FeatureMode,
    pub context_dim: usize,
    pub num_arms: usize,
}

impl FeatureMap {
    pub fn new(mode: FeatureMode, context_dim: usize, num_arms: usize) -> Self {
        FeatureMap {
            mode,
            context_dim,
            num_arms,
        }
    }

    pub fn dim(&self) -> usize {
        let (d, k) = (self.context_dim, self.num_arms);
        match self.mode {
            FeatureMode::LinearInteracted => (k + 1) * (d + 1),
            FeatureMode::TreeConcat => d + k,
        }
    }

    pub fn build(&self, x: &[f64], arm: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        self.build_into(x, arm, &mut out)?;
        Ok(out)
    }

    pub fn build_into(&self, x: &[f64], arm: usize, out: &mut Vec<f64>) -> Result<()> {
        if arm >= self.num_arms {
            return Err(Error::invalid(format!(
                "arm {arm} out of range for K = {}",
                self.num_arms
            )));
        }
        if x.len() != self.context_dim {
            return Err(Error::invalid(format!(
                "context has dimension {}, feature map expects {}",
                x.len(),
                self.context_dim
            )));
        }
        out.clear();
        match self.mode {
            FeatureMode::LinearInteracted => {
                let block = self.context_dim + 1;
                out.resize(self.dim(), 0.0);
                out[0] = 1.0;
                out[1..block].copy_from_slice(x);
                let off = block * (arm + 1);
                out[off] = 1.0;
                out[off + 1..off + block].copy_from_slice(x);
            }
            FeatureMode::TreeConcat => {
                out.extend_from_slice(x);
                out.extend((0..self.num_arms).map(|a| if a == arm { 1.0 } else { 0.0 }));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let lin = FeatureMap::new(FeatureMode::LinearInteracted, 2, 3);
        assert_eq!(lin.build(&[0.1, 0.2], 1).unwrap().len(), 12);
        let tree = FeatureMap::new(FeatureMode::TreeConcat, 2, 3);
        assert_eq!(tree.build(&[0.1, 0.2], 1).unwrap().len(), 5);
    }

    #[test]
    fn linear_expansion_by_hand() {
        let lin = FeatureMap::new(FeatureMode::LinearInteracted, 1, 2);
        assert_eq!(lin.build(&[0.0], 0).unwrap(), vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(lin.build(&[2.0], 1).unwrap(), vec![1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        let tree = FeatureMap::new(FeatureMode::TreeConcat, 1, 2);
        assert_eq!(tree.build(&[2.0], 1).unwrap(), vec![2.0, 0.0, 1.0]);
    }

    #[test]
    fn arm_out_of_range() {
        let lin = FeatureMap::new(FeatureMode::LinearInteracted, 1, 2);
        assert!(lin.build(&[0.0], 2).is_err());
        assert!(lin.build(&[0.0, 1.0], 0).is_err());
    }
}
