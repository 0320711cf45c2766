//! Reference BNN: sign(hard-tanh) hidden layer, sign output, hinge loss,
//! straight-through estimator and `W <- W - eta * g` updates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitfloat::{native_update, update_weight, Fp32Bits, UpdateValue};
use crate::blueprints::{Layout, NetworkSpec, SpecError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("expected {0} features, got {1}")]
    Features(usize, usize),
    #[error("learning rate {0} tenths is outside 1..=9")]
    Rate(u8),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Updates through the bit-level pipeline the net implements.
    #[default]
    PnExact,
    /// Native binary32 subtraction with round-to-nearest.
    NativeFloat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnnState {
    pub features: usize,
    pub hidden: usize,
    pub real_weights: Vec<Fp32Bits>,
    pub binary_weights: Vec<i8>,
    /// Learning rate in tenths.
    pub lr: u8,
}

/// Everything computed for one data vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 1-based epoch.
    pub epoch: u32,
    pub vector_index: usize,
    pub features: Vec<u8>,
    pub y_true: i8,
    pub pre_activations: Vec<i32>,
    pub activations: Vec<i8>,
    pub neuron_outputs: Vec<i8>,
    pub output_sum: i32,
    pub prediction: i8,
    pub loss: i32,
    pub dldz: i8,
    pub weights: Vec<WeightMetrics>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightMetrics {
    /// Binarized weight used in this cycle.
    pub binary: i8,
    pub binary_grad: i8,
    pub ste: u8,
    pub real_grad: i8,
    /// `eta * real_grad` in tenths.
    pub j: i8,
    pub updated: Fp32Bits,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forward {
    pub s: Vec<i32>,
    pub x: Vec<i8>,
    pub o: Vec<i8>,
    pub z: i32,
    pub yhat: i8,
}

fn sign(v: i32) -> i8 {
    if v >= 0 {
        1
    } else {
        -1
    }
}

impl BnnState {
    pub fn new(features: usize, hidden: usize, weights: Vec<Fp32Bits>, lr: u8) -> Result<Self, RefError> {
        if !(1..=9).contains(&lr) {
            return Err(RefError::Rate(lr));
        }
        if weights.len() != features * hidden + hidden {
            return Err(SpecError::WeightCount(features * hidden + hidden, weights.len()).into());
        }
        let binary_weights = weights.iter().map(|w| w.binarize()).collect();
        Ok(BnnState {
            features,
            hidden,
            real_weights: weights,
            binary_weights,
            lr,
        })
    }

    /// Initial state of `spec`: its resolved weights and its smallest rate.
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, RefError> {
        spec.validate()?;
        Self::new(spec.features, spec.hidden, spec.resolved_weights(), spec.rates()[0])
    }

    fn layout(&self) -> Layout {
        Layout {
            features: self.features,
            hidden: self.hidden,
            rates: vec![self.lr],
        }
    }

    pub fn forward(&self, a: &[u8]) -> Result<Forward, RefError> {
        if a.len() != self.features {
            return Err(RefError::Features(self.features, a.len()));
        }
        let l = self.layout();
        let mut f = Forward {
            s: vec![],
            x: vec![],
            o: vec![],
            z: 0,
            yhat: 0,
        };
        for i in 0..self.hidden {
            let s: i32 = (0..self.features)
                .map(|j| a[j] as i32 * self.binary_weights[l.w_in(i, j)] as i32)
                .sum();
            let x = sign(s.clamp(-1, 1));
            let o = x * self.binary_weights[l.w_out(i)];
            f.s.push(s);
            f.x.push(x);
            f.o.push(o);
            f.z += o as i32;
        }
        f.yhat = sign(f.z);
        Ok(f)
    }

    /// One training step on `(a, y)`.
    pub fn step(&self, a: &[u8], y: i8, mode: Mode) -> Result<(BnnState, StepMetrics), RefError> {
        let f = self.forward(a)?;
        let (loss, dldz) = loss(y, f.z);
        let l = self.layout();
        let mut next = self.clone();
        let mut weights = Vec::with_capacity(self.real_weights.len());
        for (k, &w) in self.real_weights.iter().enumerate() {
            let gb = match l.weight_role(k) {
                (i, Some(j)) => dldz * self.binary_weights[l.w_out(i)] * a[j] as i8,
                (i, None) => dldz * f.x[i],
            };
            let ste = ste(w);
            let gr = gb * ste as i8;
            let j = gr * self.lr as i8;
            let jv = UpdateValue::from_tenths(j as i32).expect("|j| <= 9");
            let updated = match mode {
                Mode::PnExact => update_weight(w, jv).result,
                Mode::NativeFloat => native_update(w, jv),
            };
            next.real_weights[k] = updated;
            next.binary_weights[k] = updated.binarize();
            weights.push(WeightMetrics {
                binary: self.binary_weights[k],
                binary_grad: gb,
                ste,
                real_grad: gr,
                j,
                updated,
            });
        }
        let metrics = StepMetrics {
            epoch: 0,
            vector_index: 0,
            features: a.to_vec(),
            y_true: y,
            pre_activations: f.s,
            activations: f.x,
            neuron_outputs: f.o,
            output_sum: f.z,
            prediction: f.yhat,
            loss,
            dldz,
            weights,
        };
        Ok((next, metrics))
    }
}

/// Hinge loss `max(0, 1 - y z)` and its derivative in `z`.
pub fn loss(y: i8, z: i32) -> (i32, i8) {
    let m = y as i32 * z;
    ((1 - m).max(0), if m < 1 { -y } else { 0 })
}

/// 1 when `|w| <= 1`.
pub fn ste(w: Fp32Bits) -> u8 {
    (w.magnitude_bits() <= 1.0f32.to_bits()) as u8
}

/// Metrics of every step plus the running mean of `L / L_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: Vec<StepMetrics>,
    pub running_loss: Vec<f64>,
    pub final_state: BnnState,
}

/// Train from `state` over `dataset` in its fixed order for `epochs`.
pub fn train_from(
    mut state: BnnState,
    dataset: &[crate::blueprints::DataRow],
    epochs: u32,
    mode: Mode,
) -> Result<TrainReport, RefError> {
    let max_loss = 1 + state.hidden as i32;
    let mut steps = Vec::new();
    let mut running_loss = Vec::new();
    let mut total = 0.0;
    for epoch in 1..=epochs {
        for (idx, row) in dataset.iter().enumerate() {
            let (next, mut m) = state.step(&row.features, row.label, mode)?;
            m.epoch = epoch;
            m.vector_index = idx;
            total += m.loss as f64 / max_loss as f64;
            steps.push(m);
            running_loss.push(total / steps.len() as f64);
            state = next;
        }
    }
    Ok(TrainReport {
        steps,
        running_loss,
        final_state: state,
    })
}

pub fn train(spec: &NetworkSpec, epochs: u32, mode: Mode) -> Result<TrainReport, RefError> {
    train_from(BnnState::from_spec(spec)?, &spec.dataset, epochs, mode)
}
