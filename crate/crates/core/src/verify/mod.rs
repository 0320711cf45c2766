//! Explicit-state exploration and property checks.

mod env;
mod tiers;

pub use env::{close, component_ports, Environment, EnvOptions};
pub use tiers::{verify_tier, weight_samples, CheckEntry, Tier, TierOptions, TierReport};

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::petri::{Marking, Net, NetError, PlaceId, SafetyViolation, Trace, TransitionId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Blueprint(#[from] crate::blueprints::BlueprintError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error("environment: {0}")]
    Environment(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub verdict: Verdict,
    /// Firing sequence from the initial marking to the offending marking.
    pub witness: Option<Trace>,
    pub states_explored: usize,
    pub detail: Option<String>,
}

impl PropertyReport {
    fn new(property: &str, verdict: Verdict, states: usize) -> Self {
        PropertyReport {
            property: property.to_string(),
            verdict,
            witness: None,
            states_explored: states,
            detail: None,
        }
    }

    fn with_witness(mut self, w: Trace) -> Self {
        self.witness = Some(w);
        self
    }

    fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

/// An attempted firing that would overflow a place.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsafeEdge {
    pub from: usize,
    pub violation: SafetyViolation,
}

/// Reachable markings discovered breadth first, with a BFS tree for
/// witnesses.
#[derive(Clone, Debug)]
pub struct StateGraph {
    pub states: Vec<Marking>,
    pub edges: Vec<(usize, TransitionId, usize)>,
    /// BFS parent of every state but the initial one.
    pub parent: Vec<Option<(usize, TransitionId)>>,
    pub unsafe_edges: Vec<UnsafeEdge>,
    /// False when the state budget stopped the search.
    pub exhausted: bool,
}

impl StateGraph {
    pub fn initial(&self) -> &Marking {
        &self.states[0]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Firing sequence reaching state `s` from the initial marking.
    pub fn path_to(&self, s: usize) -> Vec<TransitionId> {
        let mut path = Vec::new();
        let mut cur = s;
        while let Some((p, t)) = self.parent[cur] {
            path.push(t);
            cur = p;
        }
        path.reverse();
        path
    }

    /// [`path_to`](Self::path_to) as a trace with marking digests.
    pub fn witness(&self, net: &Net, s: usize) -> Trace {
        replay_trace(net, self.initial(), &self.path_to(s))
    }

    /// States without an enabled transition.
    pub fn dead_states(&self) -> Vec<usize> {
        let mut out_degree = vec![0usize; self.states.len()];
        for &(a, _, _) in &self.edges {
            out_degree[a] += 1;
        }
        for u in &self.unsafe_edges {
            out_degree[u.from] += 1;
        }
        (0..self.states.len()).filter(|&s| out_degree[s] == 0).collect()
    }
}

fn replay_trace(net: &Net, m0: &Marking, path: &[TransitionId]) -> Trace {
    let mut m = m0.clone();
    let mut trace = Trace::default();
    for &t in path {
        m = net.fire(&m, t).expect("witness replays");
        trace.push(t, m.digest());
    }
    trace
}

/// Breadth-first reachability from the initial marking, stopping after
/// `budget` states.
pub fn explore(net: &Net, budget: usize) -> StateGraph {
    explore_from(net, net.initial_marking(), budget)
}

pub fn explore_from(net: &Net, m0: &Marking, budget: usize) -> StateGraph {
    let mut g = StateGraph {
        states: vec![m0.clone()],
        edges: Vec::new(),
        parent: vec![None],
        unsafe_edges: Vec::new(),
        exhausted: true,
    };
    let mut index: HashMap<Marking, usize> = HashMap::new();
    index.insert(m0.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let m = g.states[s].clone();
        for t in net.enabled_transitions(&m) {
            let mut next = m.clone();
            if let Err(v) = net.fire_in_place(&mut next, t) {
                g.unsafe_edges.push(UnsafeEdge { from: s, violation: v });
                continue;
            }
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if g.states.len() >= budget {
                        g.exhausted = false;
                        continue;
                    }
                    let id = g.states.len();
                    index.insert(next.clone(), id);
                    g.states.push(next);
                    g.parent.push(Some((s, t)));
                    queue.push_back(id);
                    id
                }
            };
            g.edges.push((s, t, id));
        }
    }
    g
}

/// No reachable firing overflows a standard place or a counter's bound.
pub fn check_1safe(net: &Net, g: &StateGraph) -> PropertyReport {
    if let Some(u) = g.unsafe_edges.first() {
        let mut path = g.path_to(u.from);
        let mut w = replay_trace(net, g.initial(), &path);
        path.push(u.violation.transition);
        w.push(u.violation.transition, 0);
        return PropertyReport::new("1-safe", Verdict::Violated, g.len())
            .with_witness(w)
            .with_detail(u.violation.to_string());
    }
    let v = if g.exhausted { Verdict::Holds } else { Verdict::Inconclusive };
    PropertyReport::new("1-safe", v, g.len())
}

/// 1-safety over a simulated run.
pub fn check_1safe_run(report: &crate::engine::RunReport) -> PropertyReport {
    match &report.terminal {
        crate::engine::Terminal::SafetyViolation(v) => {
            PropertyReport::new("1-safe", Verdict::Violated, report.firings as usize)
                .with_witness(report.trace.clone())
                .with_detail(v.to_string())
        }
        _ => PropertyReport::new("1-safe", Verdict::Holds, report.firings as usize)
            .with_detail("no violation observed on the run"),
    }
}

/// Markings in the designed terminal set are not deadlocks.
pub type TerminalSet<'a> = &'a dyn Fn(&Marking) -> bool;

pub fn check_deadlock_free(net: &Net, g: &StateGraph, terminal: Option<TerminalSet>) -> PropertyReport {
    if !g.exhausted {
        return PropertyReport::new("deadlock-free", Verdict::Inconclusive, g.len());
    }
    for s in g.dead_states() {
        if terminal.is_some_and(|f| f(&g.states[s])) {
            continue;
        }
        return PropertyReport::new("deadlock-free", Verdict::Violated, g.len()).with_witness(g.witness(net, s));
    }
    PropertyReport::new("deadlock-free", Verdict::Holds, g.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReachMode {
    /// Token counts equal the target on the listed places.
    Exact,
    /// Token counts at least the target on the listed places.
    Coverable,
}

/// Some reachable marking matches `target` (place name, tokens).
pub fn check_reachable(
    net: &Net,
    g: &StateGraph,
    target: &[(&str, u32)],
    mode: ReachMode,
) -> Result<PropertyReport, VerifyError> {
    let ids: Vec<(PlaceId, u32)> = target
        .iter()
        .map(|&(n, k)| Ok((net.lookup_place(n)?, k)))
        .collect::<Result<_, VerifyError>>()?;
    let hit = g.states.iter().position(|m| {
        ids.iter().all(|&(p, k)| match mode {
            ReachMode::Exact => m.tokens(net, p) == k,
            ReachMode::Coverable => m.tokens(net, p) >= k,
        })
    });
    Ok(match hit {
        Some(s) => PropertyReport::new("reachable", Verdict::Holds, g.len()).with_witness(g.witness(net, s)),
        None if g.exhausted => PropertyReport::new("reachable", Verdict::Violated, g.len())
            .with_detail("target marking is unreachable"),
        None => PropertyReport::new("reachable", Verdict::Inconclusive, g.len()),
    })
}

/// No reachable marking marks two places of `places`.
pub fn check_mutex(net: &Net, g: &StateGraph, places: &[PlaceId]) -> PropertyReport {
    let hit = g
        .states
        .iter()
        .position(|m| places.iter().filter(|&&p| m.tokens(net, p) > 0).count() >= 2);
    match hit {
        Some(s) => PropertyReport::new("mutex", Verdict::Violated, g.len()).with_witness(g.witness(net, s)),
        None if g.exhausted => PropertyReport::new("mutex", Verdict::Holds, g.len()),
        None => PropertyReport::new("mutex", Verdict::Inconclusive, g.len()),
    }
}

/// Token count of `p` never exceeds `k` in the graph.
pub fn check_bounded(net: &Net, g: &StateGraph, p: PlaceId, k: u32) -> PropertyReport {
    match g.states.iter().position(|m| m.tokens(net, p) > k) {
        Some(s) => PropertyReport::new("bounded", Verdict::Violated, g.len()).with_witness(g.witness(net, s)),
        None if g.exhausted => PropertyReport::new("bounded", Verdict::Holds, g.len()),
        None => PropertyReport::new("bounded", Verdict::Inconclusive, g.len()),
    }
}

/// Token count of `p` never exceeds `k` along `trace` replayed from the
/// initial marking.
pub fn check_bounded_trace(net: &Net, trace: &Trace, p: PlaceId, k: u32) -> PropertyReport {
    let mut m = net.initial_marking().clone();
    let mut seen = if m.tokens(net, p) > k { Some(0) } else { None };
    for (i, t) in trace.transitions().enumerate() {
        if seen.is_some() {
            break;
        }
        match net.fire(&m, t) {
            Ok(next) => m = next,
            Err(_) => break,
        }
        if m.tokens(net, p) > k {
            seen = Some(i + 1);
        }
    }
    match seen {
        Some(n) => PropertyReport::new("bounded", Verdict::Violated, n).with_witness(Trace {
            steps: trace.steps[..n].to_vec(),
        }),
        None => PropertyReport::new("bounded", Verdict::Holds, trace.len()),
    }
}

/// Within every window closed by a `reset` firing, each firing of an
/// `after` transition is preceded by a firing of a `before` transition.
pub fn check_precedence(
    trace: &Trace,
    before: &[TransitionId],
    after: &[TransitionId],
    reset: TransitionId,
) -> PropertyReport {
    let mut seen = false;
    for (i, t) in trace.transitions().enumerate() {
        if before.contains(&t) {
            seen = true;
        }
        if after.contains(&t) && !seen {
            return PropertyReport::new("precedence", Verdict::Violated, trace.len())
                .with_witness(Trace {
                    steps: trace.steps[..=i].to_vec(),
                })
                .with_detail(format!("firing {i} has no predecessor in its window"));
        }
        if t == reset {
            seen = false;
        }
    }
    PropertyReport::new("precedence", Verdict::Holds, trace.len())
}

/// The initial marking is reachable from every state.
pub fn check_reversibility(net: &Net, g: &StateGraph) -> PropertyReport {
    if !g.exhausted {
        return PropertyReport::new("reversible", Verdict::Inconclusive, g.len());
    }
    let mut back: Vec<Vec<usize>> = vec![Vec::new(); g.len()];
    for &(a, _, b) in &g.edges {
        back[b].push(a);
    }
    let mut reach = vec![false; g.len()];
    reach[0] = true;
    let mut stack = vec![0];
    while let Some(s) = stack.pop() {
        for &a in &back[s] {
            if !reach[a] {
                reach[a] = true;
                stack.push(a);
            }
        }
    }
    match reach.iter().position(|r| !r) {
        Some(s) => PropertyReport::new("reversible", Verdict::Violated, g.len())
            .with_witness(g.witness(net, s))
            .with_detail("initial marking is unreachable from the witness marking"),
        None => PropertyReport::new("reversible", Verdict::Holds, g.len()),
    }
}

/// Reversibility along a run: violated as soon as the run reaches a marking
/// from which the initial one is provably unreachable, because a place
/// without consumers gained tokens or a place without producers lost some.
pub fn check_reversibility_trace(net: &Net, trace: &Trace) -> PropertyReport {
    let m0 = net.initial_marking();
    let sticky: Vec<PlaceId> = net
        .place_ids()
        .filter(|&p| net.consumers(p).is_empty() || net.producers(p).is_empty())
        .collect();
    let mut m = m0.clone();
    for (i, t) in trace.transitions().enumerate() {
        match net.fire(&m, t) {
            Ok(next) => m = next,
            Err(_) => break,
        }
        if let Some(&p) = sticky.iter().find(|&&p| m.tokens(net, p) != m0.tokens(net, p)) {
            return PropertyReport::new("reversible", Verdict::Violated, i + 1)
                .with_witness(Trace {
                    steps: trace.steps[..=i].to_vec(),
                })
                .with_detail(format!(
                    "place `{}` can no longer return to its initial count",
                    net.place(p).name
                ));
        }
    }
    PropertyReport::new("reversible", Verdict::Inconclusive, trace.len())
}

#[cfg(test)]
mod tests;
