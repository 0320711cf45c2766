//! TOML run configuration.
//!
//! ```toml
//! [network]
//! features = 2
//! hidden = 2
//! learning_rates = [6]          # tenths
//! seed = 1
//! initial_weights = ["0x3f000000", "-0.25", ...]   # optional
//! dataset = [
//!   { features = [0, 0], label = -1 },
//!   { features = [0, 1], label = 1 },
//! ]
//!
//! [run]
//! epochs = 100
//! seeds = [1, 2, 3]
//! policy = "random"             # or "priority"
//! weight_init = "free-choice"   # or "preset"
//! mode = "pn-exact"             # or "native-float"
//! instrument = true
//! budget = true
//! state_budget = 10000000
//! system_cycles = 40
//! out = "out"
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::bitfloat::Fp32Bits;
use crate::blueprints::{BuildOptions, DataRow, NetworkSpec, WeightInit};
use crate::engine::{LockstepOptions, SchedulePolicy};
use crate::refbnn::Mode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowConfig {
    pub features: Vec<u8>,
    pub label: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub features: usize,
    pub hidden: usize,
    pub learning_rates: Vec<u8>,
    pub seed: u64,
    pub initial_weights: Option<Vec<String>>,
    pub dataset: Option<Vec<RowConfig>>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let xor = NetworkSpec::xor();
        NetworkConfig {
            features: xor.features,
            hidden: xor.hidden,
            learning_rates: xor.learning_rates,
            seed: xor.seed,
            initial_weights: None,
            dataset: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[default]
    Random,
    Priority,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub epochs: u32,
    pub seeds: Vec<u64>,
    pub policy: PolicyKind,
    pub weight_init: WeightInit,
    pub mode: Mode,
    pub instrument: bool,
    /// Stop after `epochs` through the epoch budget counter.
    pub budget: bool,
    pub state_budget: usize,
    pub system_cycles: u64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epochs: 100,
            seeds: vec![1, 2, 3],
            policy: PolicyKind::Random,
            weight_init: WeightInit::FreeChoice,
            mode: Mode::PnExact,
            instrument: true,
            budget: true,
            state_budget: 10_000_000,
            system_cycles: 40,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub network: NetworkConfig,
    pub run: RunConfig,
}

/// A weight given as `0x…` bit pattern or as a decimal binary32 value.
pub fn parse_weight(s: &str) -> Result<Fp32Bits, IoError> {
    let bad = || IoError::Config(format!("bad weight `{s}`"));
    let w = match s.strip_prefix("0x") {
        Some(hex) => Fp32Bits::new(u32::from_str_radix(hex, 16).map_err(|_| bad())?),
        None => Fp32Bits::from_f32(s.parse().map_err(|_| bad())?),
    };
    w.map_err(|e| IoError::Config(format!("weight `{s}`: {e}")))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The network, with the epoch budget set when `run.budget` is on.
    pub fn spec(&self) -> Result<NetworkSpec, IoError> {
        let n = &self.network;
        let mut spec = NetworkSpec {
            features: n.features,
            hidden: n.hidden,
            learning_rates: n.learning_rates.clone(),
            seed: n.seed,
            epoch_budget: self.run.budget.then_some(self.run.epochs),
            ..NetworkSpec::xor()
        };
        if let Some(rows) = &n.dataset {
            spec.dataset = rows.iter().map(|r| DataRow::new(&r.features, r.label)).collect();
        }
        if let Some(ws) = &n.initial_weights {
            spec.initial_weights = Some(ws.iter().map(|w| parse_weight(w)).collect::<Result<_, _>>()?);
        }
        spec.validate().map_err(|e| IoError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn policy(&self, seed: u64) -> SchedulePolicy {
        match self.run.policy {
            PolicyKind::Random => SchedulePolicy::UniformRandom { seed },
            PolicyKind::Priority => SchedulePolicy::PriorityOrder,
        }
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            instrument: self.run.instrument,
            weight_init: self.run.weight_init,
        }
    }

    pub fn lockstep_options(&self) -> LockstepOptions {
        LockstepOptions {
            mode: self.run.mode,
            weight_init: self.run.weight_init,
        }
    }
}
