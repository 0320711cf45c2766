use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitfloat::Fp32Bits;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("features and hidden must be positive")]
    Shape,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset row {0} has {1} features, expected {2}")]
    RowWidth(usize, usize, usize),
    #[error("dataset row {0} has label {1}, expected -1 or +1")]
    Label(usize, i8),
    #[error("dataset row {0} has feature value {1}, expected 0 or 1")]
    Feature(usize, u8),
    #[error("learning rates must be a nonempty subset of 0.1..0.9 (given in tenths)")]
    Rates,
    #[error("epoch budget must be at least 1")]
    Budget,
    #[error("expected {0} initial weights, got {1}")]
    WeightCount(usize, usize),
    #[error("initial weight {0} is subnormal")]
    Subnormal(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataRow {
    pub features: Vec<u8>,
    pub label: i8,
}

impl DataRow {
    pub fn new(features: &[u8], label: i8) -> Self {
        DataRow {
            features: features.to_vec(),
            label,
        }
    }

    /// Features as a bit string, e.g. `01`.
    pub fn key(&self) -> String {
        self.features.iter().map(|b| b.to_string()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub features: usize,
    pub hidden: usize,
    pub dataset: Vec<DataRow>,
    /// Learning rates in tenths, each in 1..=9.
    pub learning_rates: Vec<u8>,
    pub epoch_budget: Option<u32>,
    pub seed: u64,
    pub initial_weights: Option<Vec<Fp32Bits>>,
}

impl NetworkSpec {
    /// Two features, two hidden neurons, the XOR dataset and rate 0.6.
    pub fn xor() -> Self {
        NetworkSpec {
            features: 2,
            hidden: 2,
            dataset: vec![
                DataRow::new(&[0, 0], -1),
                DataRow::new(&[0, 1], 1),
                DataRow::new(&[1, 0], 1),
                DataRow::new(&[1, 1], -1),
            ],
            learning_rates: vec![6],
            epoch_budget: None,
            seed: 1,
            initial_weights: None,
        }
    }

    pub fn num_weights(&self) -> usize {
        self.features * self.hidden + self.hidden
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.features == 0 || self.hidden == 0 {
            return Err(SpecError::Shape);
        }
        if self.dataset.is_empty() {
            return Err(SpecError::EmptyDataset);
        }
        for (i, row) in self.dataset.iter().enumerate() {
            if row.features.len() != self.features {
                return Err(SpecError::RowWidth(i, row.features.len(), self.features));
            }
            if let Some(&f) = row.features.iter().find(|&&f| f > 1) {
                return Err(SpecError::Feature(i, f));
            }
            if row.label != 1 && row.label != -1 {
                return Err(SpecError::Label(i, row.label));
            }
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|r| !(1..=9).contains(r)) {
            return Err(SpecError::Rates);
        }
        if self.epoch_budget == Some(0) {
            return Err(SpecError::Budget);
        }
        if let Some(w) = &self.initial_weights {
            if w.len() != self.num_weights() {
                return Err(SpecError::WeightCount(self.num_weights(), w.len()));
            }
            if let Some(i) = w.iter().position(|b| b.is_subnormal()) {
                return Err(SpecError::Subnormal(i));
            }
        }
        Ok(())
    }

    /// Sorted, deduplicated learning rates.
    pub fn rates(&self) -> Vec<u8> {
        let mut r = self.learning_rates.clone();
        r.sort();
        r.dedup();
        r
    }

    /// Explicit initial weights, or uniform draws from (-1, 1) seeded by
    /// `seed`.
    pub fn resolved_weights(&self) -> Vec<Fp32Bits> {
        if let Some(w) = &self.initial_weights {
            return w.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.num_weights())
            .map(|_| {
                let v: f32 = rng.gen_range(-1.0f32..1.0);
                Fp32Bits::from_f32(if v == 0.0 { 0.0 } else { v }).expect("|v| < 1")
            })
            .collect()
    }

    /// Weight index of input-hidden weight `(hidden i, feature j)`.
    pub fn w_in(&self, i: usize, j: usize) -> usize {
        i * self.features + j
    }

    /// Weight index of the hidden-output weight of neuron `i`.
    pub fn w_out(&self, i: usize) -> usize {
        self.features * self.hidden + i
    }
}
