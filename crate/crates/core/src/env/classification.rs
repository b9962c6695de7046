use std::sync::Arc;

use rand::Rng;

use super::Draw;
use crate::dataset::Context;
use crate::error::Result;
use crate::ingest::ClassificationTable;

/// Classification table replayed as a bandit: a row is drawn uniformly with
/// replacement, and pulling arm `a` returns a reward `N(1{a = label}, 1)`.
#[derive(Debug, Clone)]
pub struct ClassificationEnv {
    pub table: Arc<ClassificationTable>,
}

pub fn make_classification_env(table: ClassificationTable) -> Result<ClassificationEnv> {
    table.validate()?;
    Ok(ClassificationEnv {
        table: Arc::new(table),
    })
}

impl ClassificationEnv {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let row = rng.random_range(0..self.table.len());
        Draw {
            context: Context(self.table.features[row].clone()),
            latent: row,
        }
    }

    pub fn mean_for_row(&self, row: usize, arm: usize) -> f64 {
        if self.table.labels[row] == arm {
            1.0
        } else {
            0.0
        }
    }
}
