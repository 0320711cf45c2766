//! Token-game simulation, instrument decoding and the lockstep harness.

mod decode;
mod lockstep;

pub use decode::{decode_instrument, Decoder, InstrumentError};
pub use lockstep::{first_mismatch, lockstep, lockstep_seed, LockstepOptions, LockstepReport, Mismatch, SeedOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blueprints::NEXT_VECTOR;
use crate::petri::{count_key, place_key, Marking, Net, PlaceId, PlaceKind, SafetyViolation, Trace, TransitionId};
use crate::refbnn::StepMetrics;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Blueprint(#[from] crate::blueprints::BlueprintError),
    #[error(transparent)]
    Reference(#[from] crate::refbnn::RefError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SchedulePolicy {
    /// Uniform choice among the enabled transitions, driven by ChaCha8.
    UniformRandom { seed: u64 },
    /// Always the enabled transition with the lowest id.
    PriorityOrder,
}

/// When a run stops besides quiescence and safety violations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopCondition {
    pub max_steps: Option<u64>,
    /// Number of `next_vector` firings.
    pub max_cycles: Option<u64>,
}

impl StopCondition {
    pub fn quiescence() -> Self {
        Self::default()
    }

    pub fn steps(n: u64) -> Self {
        StopCondition {
            max_steps: Some(n),
            max_cycles: None,
        }
    }

    pub fn cycles(n: u64) -> Self {
        StopCondition {
            max_steps: None,
            max_cycles: Some(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Terminal {
    Quiescent,
    StepLimit,
    CycleLimit,
    SafetyViolation(SafetyViolation),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub record_trace: bool,
    /// Decode the instrument at every cycle boundary when present.
    pub decode: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_trace: true,
            decode: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub trace: Trace,
    pub firings: u64,
    pub cycles: u64,
    pub terminal: Terminal,
    pub metrics: Vec<StepMetrics>,
    pub final_marking: Marking,
}

/// A single run: owns its marking and keeps the enabled set up to date by
/// rechecking only the transitions touching the places a firing changed.
pub struct Simulator<'a> {
    net: &'a Net,
    marking: Marking,
    digest: u64,
    enabled: Vec<TransitionId>,
    slot: Vec<u32>,
    policy: SchedulePolicy,
    rng: ChaCha8Rng,
    touched: Vec<PlaceId>,
    firings: u64,
}

const ABSENT: u32 = u32::MAX;

impl<'a> Simulator<'a> {
    pub fn new(net: &'a Net, policy: SchedulePolicy) -> Self {
        Self::with_marking(net, net.initial_marking().clone(), policy)
    }

    pub fn with_marking(net: &'a Net, marking: Marking, policy: SchedulePolicy) -> Self {
        let seed = match policy {
            SchedulePolicy::UniformRandom { seed } => seed,
            SchedulePolicy::PriorityOrder => 0,
        };
        let mut sim = Simulator {
            net,
            digest: marking.digest(),
            marking,
            enabled: Vec::new(),
            slot: vec![ABSENT; net.num_transitions()],
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            touched: Vec::new(),
            firings: 0,
        };
        for t in net.transition_ids() {
            sim.refresh(t);
        }
        sim
    }

    pub fn net(&self) -> &'a Net {
        self.net
    }

    pub fn marking(&self) -> &Marking {
        &self.marking
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn firings(&self) -> u64 {
        self.firings
    }

    pub fn enabled(&self) -> &[TransitionId] {
        &self.enabled
    }

    pub fn is_quiescent(&self) -> bool {
        self.enabled.is_empty()
    }

    fn refresh(&mut self, t: TransitionId) {
        let on = self.net.enabled_unchecked(&self.marking, t);
        let s = self.slot[t.index()];
        if on && s == ABSENT {
            self.slot[t.index()] = self.enabled.len() as u32;
            self.enabled.push(t);
        } else if !on && s != ABSENT {
            let last = *self.enabled.last().expect("nonempty");
            self.enabled.swap_remove(s as usize);
            if last != t {
                self.slot[last.index()] = s;
            }
            self.slot[t.index()] = ABSENT;
        }
    }

    fn contribution(&self, p: PlaceId) -> u64 {
        match self.net.place(p).kind {
            PlaceKind::Standard if self.marking.is_marked(p) => place_key(p),
            PlaceKind::Standard => 0,
            PlaceKind::Counter { .. } => count_key(p, self.marking.count(p)),
        }
    }

    /// The transition the policy would fire next.
    pub fn choose(&mut self) -> Option<TransitionId> {
        if self.enabled.is_empty() {
            return None;
        }
        Some(match self.policy {
            SchedulePolicy::UniformRandom { .. } => self.enabled[self.rng.gen_range(0..self.enabled.len())],
            SchedulePolicy::PriorityOrder => *self.enabled.iter().min().expect("nonempty"),
        })
    }

    /// Fire `t`, which must be enabled.
    pub fn fire(&mut self, t: TransitionId) -> Result<(), SafetyViolation> {
        debug_assert!(self.slot[t.index()] != ABSENT);
        let net = self.net;
        self.touched.clear();
        for &p in net.consumed(t).iter().chain(net.produced(t)) {
            if !self.touched.contains(&p) {
                self.touched.push(p);
            }
        }
        for i in 0..self.touched.len() {
            self.digest ^= self.contribution(self.touched[i]);
        }
        net.fire_in_place(&mut self.marking, t)?;
        self.firings += 1;
        for i in 0..self.touched.len() {
            let p = self.touched[i];
            self.digest ^= self.contribution(p);
            for &u in net.consumers(p).iter().chain(net.readers(p)) {
                self.refresh(u);
            }
        }
        Ok(())
    }

    /// Choose and fire one transition; `None` when quiescent.
    pub fn step(&mut self) -> Option<Result<TransitionId, SafetyViolation>> {
        let t = self.choose()?;
        Some(self.fire(t).map(|_| t))
    }
}

/// Simulate `net` from its initial marking.
pub fn run(net: &Net, policy: SchedulePolicy, stop: StopCondition) -> Result<RunReport, EngineError> {
    run_with(net, policy, stop, RunOptions::default())
}

pub fn run_with(
    net: &Net,
    policy: SchedulePolicy,
    stop: StopCondition,
    opts: RunOptions,
) -> Result<RunReport, EngineError> {
    let decoder = if opts.decode { Decoder::new(net) } else { None };
    let next_vector = net.transition_id(NEXT_VECTOR);
    let mut sim = Simulator::new(net, policy);
    let mut trace = Trace::default();
    let mut metrics = Vec::new();
    let mut cycles = 0;
    let terminal = loop {
        if stop.max_steps.is_some_and(|n| sim.firings() >= n) {
            break Terminal::StepLimit;
        }
        if stop.max_cycles.is_some_and(|n| cycles >= n) {
            break Terminal::CycleLimit;
        }
        let t = match sim.step() {
            None => break Terminal::Quiescent,
            Some(Err(v)) => break Terminal::SafetyViolation(v),
            Some(Ok(t)) => t,
        };
        if opts.record_trace {
            trace.push(t, sim.digest());
        }
        if Some(t) == next_vector {
            cycles += 1;
            if let Some(d) = &decoder {
                metrics.push(d.decode(sim.marking())?);
            }
        }
    };
    Ok(RunReport {
        trace,
        firings: sim.firings(),
        cycles,
        terminal,
        metrics,
        final_marking: sim.marking().clone(),
    })
}

#[cfg(test)]
mod tests;
