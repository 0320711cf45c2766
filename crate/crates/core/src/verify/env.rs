//! Closed environments: every open input port is driven by a one-hot
//! free-choice generator and every output port drained by a sink.

use std::collections::BTreeSet;

use super::{explore_from, StateGraph, VerifyError};
use crate::bitfloat::Fp32Bits;
use crate::blueprints::{bit_place, Port, PortRole, Segment};
use crate::petri::{Marking, Net, PlaceId};

#[derive(Clone, Debug, Default)]
pub struct EnvOptions {
    /// Drive every input once and stop, instead of restarting the
    /// generators after all outputs were drained.
    pub one_shot: bool,
    /// Register contents `(k, w)` loaded into the bit places of weight `k`.
    pub weights: Vec<(usize, Fp32Bits)>,
    /// Extra places marked initially.
    pub preset: Vec<String>,
    /// Input ports left undriven.
    pub undriven: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Environment {
    pub net: Net,
    pub initial: Marking,
    /// Sink places, all marked once a one-shot run has finished.
    pub acks: Vec<PlaceId>,
    pub one_shot: bool,
}

impl Environment {
    /// A dead marking is by design when the one-shot environment drained
    /// every output.
    pub fn is_terminal(&self, m: &Marking) -> bool {
        self.one_shot && self.acks.iter().all(|&p| m.is_marked(p))
    }

    pub fn explore(&self, budget: usize) -> StateGraph {
        explore_from(&self.net, &self.initial, budget)
    }
}

fn is_input(r: PortRole) -> bool {
    matches!(r, PortRole::ValueIn | PortRole::ControlIn)
}

fn is_output(r: PortRole) -> bool {
    matches!(r, PortRole::ValueOut | PortRole::ControlOut)
}

/// External ports of a group of segments: inputs not produced inside the
/// group, outputs not consumed inside it, and state not owned by it.
pub fn component_ports(segs: &[Segment]) -> Vec<Port> {
    let all: Vec<&Port> = segs.iter().flat_map(|s| &s.ports).collect();
    let named = |pred: fn(PortRole) -> bool| -> BTreeSet<&str> {
        all.iter().filter(|p| pred(p.role)).map(|p| p.name.as_str()).collect()
    };
    let ins = named(is_input);
    let outs = named(is_output);
    let owned = named(|r| r == PortRole::StateOwned);
    let mut seen = BTreeSet::new();
    let mut ports = Vec::new();
    for p in all {
        let external = match p.role {
            r if is_input(r) => !outs.contains(p.name.as_str()),
            r if is_output(r) => !ins.contains(p.name.as_str()),
            PortRole::StateShared => !owned.contains(p.name.as_str()),
            _ => true,
        };
        if external && seen.insert((p.name.clone(), is_input(p.role))) {
            ports.push(p.clone());
        }
    }
    ports
}

/// Close `net` over its `ports`.
pub fn close(net: &Net, ports: &[Port], opts: &EnvOptions) -> Result<Environment, VerifyError> {
    let mut b = net.to_builder();
    let mut preset: Vec<String> = opts.preset.clone();
    let mut cleared: Vec<String> = Vec::new();
    for &(k, w) in &opts.weights {
        if net.place_id(&bit_place(k, 0, false)).is_none() {
            continue;
        }
        for n in (0..32).filter(|&n| net.place_id(&bit_place(k, n, w.bit(n))).is_some()) {
            cleared.push(bit_place(k, n, !w.bit(n)));
            preset.push(bit_place(k, n, w.bit(n)));
        }
    }
    let marked = |name: &str| {
        preset.iter().any(|p| p == name)
            || net.place_id(name).is_some_and(|p| net.initial_marking().is_marked(p))
    };

    let mut restart = Vec::new();
    for (i, port) in ports.iter().enumerate() {
        if !is_input(port.role) || opts.undriven.contains(&port.name) {
            continue;
        }
        let places: Vec<PlaceId> = port
            .places
            .iter()
            .map(|p| net.lookup_place(p))
            .collect::<Result<_, _>>()?;
        // Read-only inputs are produced once and stay.
        let persistent = places.iter().all(|&p| net.consumers(p).is_empty());
        let go = b.place(format!("env.go{i}"));
        if !port.places.iter().any(|p| marked(p)) {
            b.mark(go);
        }
        for (q, &p) in port.places.iter().zip(&places) {
            let t = b.transition(format!("env.gen{i}[{q}]"), format!("drive {q}"));
            b.consume(go, t);
            b.produce(t, p);
        }
        if !persistent {
            restart.push(go);
        }
    }
    let mut acks = Vec::new();
    for (i, port) in ports.iter().enumerate() {
        if !is_output(port.role) {
            continue;
        }
        let ack = b.place(format!("env.ack{i}"));
        for q in &port.places {
            let p = net.lookup_place(q)?;
            let t = b.transition(format!("env.sink{i}[{q}]"), format!("drain {q}"));
            b.consume(p, t);
            b.produce(t, ack);
        }
        acks.push(ack);
    }
    let one_shot = opts.one_shot || restart.is_empty() || acks.is_empty();
    if !one_shot {
        let t = b.transition("env.restart", "restart");
        for &a in &acks {
            b.consume(a, t);
        }
        for &g in &restart {
            b.produce(t, g);
        }
    }
    let closed = b.build()?;
    let mut initial = closed.initial_marking().clone();
    for name in &cleared {
        if let Some(p) = closed.place_id(name) {
            initial.set(p, false);
        }
    }
    for name in &preset {
        let p = closed
            .place_id(name)
            .ok_or_else(|| VerifyError::Environment(format!("no place `{name}` to preset")))?;
        initial.set(p, true);
    }
    Ok(Environment {
        net: closed,
        initial,
        acks,
        one_shot,
    })
}
