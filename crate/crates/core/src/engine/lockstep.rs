use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{Decoder, EngineError, SchedulePolicy, Simulator, Terminal};
use crate::bitfloat::Fp32Bits;
use crate::blueprints::{bit_place, compose_bnn, parse_value, BuildOptions, NetworkSpec, WeightInit, NEXT_VECTOR};
use crate::petri::{Marking, Net};
use crate::refbnn::{train_from, BnnState, Mode, StepMetrics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockstepOptions {
    pub mode: Mode,
    pub weight_init: WeightInit,
}

impl Default for LockstepOptions {
    fn default() -> Self {
        LockstepOptions {
            mode: Mode::PnExact,
            weight_init: WeightInit::FreeChoice,
        }
    }
}

/// First field where the two sides of a cycle disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    /// 0-based cycle index.
    pub cycle: usize,
    pub field: String,
    pub pn: String,
    pub reference: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub cycles: usize,
    pub firings: u64,
    pub terminal: Terminal,
    pub initial_weights: Vec<Fp32Bits>,
    /// Learning rate in tenths chosen by the net.
    pub lr: u8,
    pub mismatches: Vec<Mismatch>,
    pub metrics: Vec<StepMetrics>,
}

impl SeedOutcome {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockstepReport {
    pub epochs: u32,
    pub runs: Vec<SeedOutcome>,
}

impl LockstepReport {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(SeedOutcome::passed)
    }
}

fn walk(path: &str, a: &Json, b: &Json) -> Option<(String, String, String)> {
    match (a, b) {
        (Json::Object(x), Json::Object(y)) => {
            for (k, v) in x {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let hit = match y.get(k) {
                    Some(w) => walk(&p, v, w),
                    None => Some((p, v.to_string(), "absent".into())),
                };
                if hit.is_some() {
                    return hit;
                }
            }
            None
        }
        (Json::Array(x), Json::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).enumerate().find_map(|(i, (v, w))| walk(&format!("{path}[{i}]"), v, w))
        }
        _ if a == b => None,
        _ => Some((path.to_string(), a.to_string(), b.to_string())),
    }
}

/// First differing field of two step records, as `(path, pn, reference)`.
pub fn first_mismatch(pn: &StepMetrics, reference: &StepMetrics) -> Option<(String, String, String)> {
    let a = serde_json::to_value(pn).expect("metrics serialize");
    let b = serde_json::to_value(reference).expect("metrics serialize");
    walk("", &a, &b)
}

fn register_bits(m: &Marking, net: &Net, k: usize) -> Fp32Bits {
    let mut raw = 0u32;
    for n in 0..32 {
        if net.place_id(&bit_place(k, n, true)).is_some_and(|p| m.is_marked(p)) {
            raw |= 1 << n;
        }
    }
    Fp32Bits::new(raw).expect("register bit 30 is never set")
}

/// Simulate the instrumented net for `epochs` with one seed and replay the
/// reference on the weights and rate the net selected.
pub fn lockstep_seed(
    spec: &NetworkSpec,
    epochs: u32,
    seed: u64,
    opts: &LockstepOptions,
) -> Result<SeedOutcome, EngineError> {
    let spec = NetworkSpec {
        epoch_budget: Some(epochs),
        ..spec.clone()
    };
    spec.validate().map_err(crate::refbnn::RefError::from)?;
    let net = compose_bnn(
        &spec,
        &BuildOptions {
            instrument: true,
            weight_init: opts.weight_init,
        },
    )?;
    let decoder = Decoder::try_new(&net)?;
    let next_vector = net.transition_id(NEXT_VECTOR);
    let nw = spec.num_weights();
    let setters: HashMap<_, _> = (0..nw)
        .filter_map(|k| net.transition_id(&format!("w{k}.set_weights")).map(|t| (t, k)))
        .collect();
    let lr_places: Vec<_> = net
        .place_ids()
        .filter_map(|p| {
            let v = net.place(p).name.strip_prefix("lr=").and_then(parse_value)?;
            Some((p, (v * 10).to_integer() as u8))
        })
        .collect();
    let choosers: Vec<_> = net
        .transition_ids()
        .filter(|&t| net.transition(t).name.starts_with("lr.choose["))
        .collect();

    let expected = epochs as u64 * spec.dataset.len() as u64;
    let mut sim = Simulator::new(&net, SchedulePolicy::UniformRandom { seed });
    let mut weights: Vec<Fp32Bits> = (0..nw).map(|k| register_bits(sim.marking(), &net, k)).collect();
    let mut lr = None;
    let mut metrics = Vec::new();
    let terminal = loop {
        if metrics.len() as u64 >= expected {
            break Terminal::CycleLimit;
        }
        let t = match sim.step() {
            None => break Terminal::Quiescent,
            Some(Err(v)) => break Terminal::SafetyViolation(v),
            Some(Ok(t)) => t,
        };
        if let Some(&k) = setters.get(&t) {
            weights[k] = register_bits(sim.marking(), &net, k);
        } else if choosers.contains(&t) {
            lr = lr_places.iter().find(|(p, _)| sim.marking().is_marked(*p)).map(|&(_, v)| v);
        } else if Some(t) == next_vector {
            metrics.push(decoder.decode(sim.marking())?);
        }
    };

    let lr = lr.unwrap_or(spec.rates()[0]);
    let state = BnnState::new(spec.features, spec.hidden, weights.clone(), lr)?;
    let reference = train_from(state, &spec.dataset, epochs, opts.mode)?;
    let mut mismatches = Vec::new();
    for (cycle, r) in reference.steps.iter().enumerate() {
        let hit = match metrics.get(cycle) {
            Some(m) => first_mismatch(m, r),
            None => Some(("cycle".into(), "missing".into(), "present".into())),
        };
        if let Some((field, pn, reference)) = hit {
            mismatches.push(Mismatch {
                cycle,
                field,
                pn,
                reference,
            });
        }
    }
    Ok(SeedOutcome {
        seed,
        cycles: metrics.len(),
        firings: sim.firings(),
        terminal,
        initial_weights: weights,
        lr,
        mismatches,
        metrics,
    })
}

/// Lockstep comparison over several seeds.
pub fn lockstep(spec: &NetworkSpec, epochs: u32, seeds: &[u64]) -> Result<LockstepReport, EngineError> {
    let opts = LockstepOptions::default();
    let runs = seeds
        .iter()
        .map(|&s| lockstep_seed(spec, epochs, s, &opts))
        .collect::<Result<_, _>>()?;
    Ok(LockstepReport { epochs, runs })
}
