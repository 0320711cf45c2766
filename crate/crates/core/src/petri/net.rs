use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::marking::Marking;
use super::NetError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlaceId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionId(pub u32);

impl PlaceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TransitionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlaceKind {
    Standard,
    /// Multi-token place exempt from the 1-safe check, never above `bound`.
    Counter { bound: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceRecord {
    pub name: String,
    pub label: String,
    pub kind: PlaceKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub name: String,
    pub label: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    Place(PlaceId),
    Transition(TransitionId),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcKind {
    Normal,
    /// Test arc: the place must be marked, firing leaves it unchanged.
    Read,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArcRecord {
    pub source: Node,
    pub target: Node,
    pub kind: ArcKind,
}

/// Per-transition arc lists, precomputed at construction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct TransitionArcs {
    pub consume: Vec<PlaceId>,
    pub produce: Vec<PlaceId>,
    pub read: Vec<PlaceId>,
}

/// Per-place adjacency, precomputed at construction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct PlaceArcs {
    pub consumers: Vec<TransitionId>,
    pub producers: Vec<TransitionId>,
    pub readers: Vec<TransitionId>,
}

/// An immutable 1-safe Petri net with read arcs and counter places.
///
/// Arc weights are always 1. A `Net` is only obtained through
/// [`NetBuilder::build`], which checks bipartiteness and name uniqueness,
/// so every `Net` value is structurally valid.
#[derive(Clone, Debug)]
pub struct Net {
    places: Vec<PlaceRecord>,
    transitions: Vec<TransitionRecord>,
    arcs: Vec<ArcRecord>,
    initial: Marking,
    place_index: HashMap<String, PlaceId>,
    transition_index: HashMap<String, TransitionId>,
    pub(crate) tarcs: Vec<TransitionArcs>,
    pub(crate) parcs: Vec<PlaceArcs>,
}

impl PartialEq for Net {
    fn eq(&self, other: &Self) -> bool {
        self.places == other.places
            && self.transitions == other.transitions
            && self.arcs == other.arcs
            && self.initial == other.initial
    }
}

impl Net {
    pub fn places(&self) -> &[PlaceRecord] {
        &self.places
    }

    pub fn transitions(&self) -> &[TransitionRecord] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[ArcRecord] {
        &self.arcs
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn place(&self, p: PlaceId) -> &PlaceRecord {
        &self.places[p.index()]
    }

    pub fn transition(&self, t: TransitionId) -> &TransitionRecord {
        &self.transitions[t.index()]
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.place_index.get(name).copied()
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transition_index.get(name).copied()
    }

    pub fn lookup_place(&self, name: &str) -> Result<PlaceId, NetError> {
        self.place_id(name)
            .ok_or_else(|| NetError::UnknownPlace(name.to_string()))
    }

    pub fn lookup_transition(&self, name: &str) -> Result<TransitionId, NetError> {
        self.transition_id(name)
            .ok_or_else(|| NetError::UnknownTransition(name.to_string()))
    }

    pub fn place_ids(&self) -> impl Iterator<Item = PlaceId> {
        (0..self.places.len() as u32).map(PlaceId)
    }

    pub fn transition_ids(&self) -> impl Iterator<Item = TransitionId> {
        (0..self.transitions.len() as u32).map(TransitionId)
    }

    pub fn num_places(&self) -> usize {
        self.places.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub(crate) fn check_transition(&self, t: TransitionId) -> Result<(), NetError> {
        if t.index() < self.transitions.len() {
            Ok(())
        } else {
            Err(NetError::UnknownTransitionId(t.0))
        }
    }

    pub(crate) fn check_node(&self, n: Node) -> Result<(), NetError> {
        match n {
            Node::Place(p) if p.index() < self.places.len() => Ok(()),
            Node::Place(p) => Err(NetError::UnknownPlaceId(p.0)),
            Node::Transition(t) => self.check_transition(t),
        }
    }

    /// Places consumed by `t` through normal arcs.
    pub fn consumed(&self, t: TransitionId) -> &[PlaceId] {
        &self.tarcs[t.index()].consume
    }

    /// Places produced by `t`.
    pub fn produced(&self, t: TransitionId) -> &[PlaceId] {
        &self.tarcs[t.index()].produce
    }

    /// Places tested by `t` through read arcs.
    pub fn readset(&self, t: TransitionId) -> Result<Vec<PlaceId>, NetError> {
        self.check_transition(t)?;
        Ok(self.tarcs[t.index()].read.clone())
    }

    /// Transitions that read `p` through a read arc.
    pub fn readers(&self, p: PlaceId) -> &[TransitionId] {
        &self.parcs[p.index()].readers
    }

    pub fn consumers(&self, p: PlaceId) -> &[TransitionId] {
        &self.parcs[p.index()].consumers
    }

    pub fn producers(&self, p: PlaceId) -> &[TransitionId] {
        &self.parcs[p.index()].producers
    }

    /// Normal-arc preset of a node. Read arcs are excluded (see [`Net::readset`]).
    pub fn preset(&self, node: Node) -> Result<Vec<Node>, NetError> {
        self.check_node(node)?;
        Ok(match node {
            Node::Transition(t) => self.tarcs[t.index()]
                .consume
                .iter()
                .map(|&p| Node::Place(p))
                .collect(),
            Node::Place(p) => self.parcs[p.index()]
                .producers
                .iter()
                .map(|&t| Node::Transition(t))
                .collect(),
        })
    }

    /// Normal-arc postset of a node.
    pub fn postset(&self, node: Node) -> Result<Vec<Node>, NetError> {
        self.check_node(node)?;
        Ok(match node {
            Node::Transition(t) => self.tarcs[t.index()]
                .produce
                .iter()
                .map(|&p| Node::Place(p))
                .collect(),
            Node::Place(p) => self.parcs[p.index()]
                .consumers
                .iter()
                .map(|&t| Node::Transition(t))
                .collect(),
        })
    }

    pub fn counter_places(&self) -> impl Iterator<Item = (PlaceId, u32)> + '_ {
        self.places
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p.kind {
                PlaceKind::Counter { bound } => Some((PlaceId(i as u32), bound)),
                PlaceKind::Standard => None,
            })
    }

    /// Rebuild a net with every place and transition name prefixed.
    pub fn namespaced(&self, prefix: &str) -> Net {
        let mut b = NetBuilder::new();
        for p in &self.places {
            b.add_place_record(PlaceRecord {
                name: format!("{prefix}{}", p.name),
                ..p.clone()
            });
        }
        for t in &self.transitions {
            b.add_transition_record(TransitionRecord {
                name: format!("{prefix}{}", t.name),
                ..t.clone()
            });
        }
        for a in &self.arcs {
            b.push_arc(*a);
        }
        b.initial = self.initial.clone();
        b.build().expect("prefixing preserves validity")
    }

    pub fn to_builder(&self) -> NetBuilder {
        NetBuilder {
            places: self.places.clone(),
            transitions: self.transitions.clone(),
            arcs: self.arcs.clone(),
            initial: self.initial.clone(),
            place_index: self.place_index.clone(),
            transition_index: self.transition_index.clone(),
        }
    }
}

impl fmt::Display for Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "net({} places, {} transitions, {} arcs)",
            self.places.len(),
            self.transitions.len(),
            self.arcs.len()
        )
    }
}

/// Incremental constructor for [`Net`].
///
/// Name lookups are available while building so generators can wire
/// places created by earlier stages.
#[derive(Clone, Debug, Default)]
pub struct NetBuilder {
    places: Vec<PlaceRecord>,
    transitions: Vec<TransitionRecord>,
    arcs: Vec<ArcRecord>,
    pub(crate) initial: Marking,
    place_index: HashMap<String, PlaceId>,
    transition_index: HashMap<String, TransitionId>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_place_record(&mut self, rec: PlaceRecord) -> PlaceId {
        let id = PlaceId(self.places.len() as u32);
        // Duplicates are reported by `build`; keep the first binding here.
        self.place_index.entry(rec.name.clone()).or_insert(id);
        self.places.push(rec);
        id
    }

    fn add_transition_record(&mut self, rec: TransitionRecord) -> TransitionId {
        let id = TransitionId(self.transitions.len() as u32);
        self.transition_index.entry(rec.name.clone()).or_insert(id);
        self.transitions.push(rec);
        id
    }

    pub fn place(&mut self, name: impl Into<String>) -> PlaceId {
        let name = name.into();
        self.add_place_record(PlaceRecord {
            label: name.clone(),
            name,
            kind: PlaceKind::Standard,
        })
    }

    /// Add a place with every attribute given.
    pub fn add_place(&mut self, rec: PlaceRecord) -> PlaceId {
        self.add_place_record(rec)
    }

    pub fn labeled_place(&mut self, name: impl Into<String>, label: impl Into<String>) -> PlaceId {
        self.add_place_record(PlaceRecord {
            name: name.into(),
            label: label.into(),
            kind: PlaceKind::Standard,
        })
    }

    pub fn counter(&mut self, name: impl Into<String>, bound: u32) -> PlaceId {
        let name = name.into();
        self.add_place_record(PlaceRecord {
            label: name.clone(),
            name,
            kind: PlaceKind::Counter { bound },
        })
    }

    /// Look up a place by name, creating a standard place if absent.
    pub fn ensure_place(&mut self, name: &str) -> PlaceId {
        match self.place_index.get(name) {
            Some(&p) => p,
            None => self.place(name),
        }
    }

    pub fn transition(&mut self, name: impl Into<String>, label: impl Into<String>) -> TransitionId {
        self.add_transition_record(TransitionRecord {
            name: name.into(),
            label: label.into(),
        })
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.place_index.get(name).copied()
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transition_index.get(name).copied()
    }

    pub fn num_places(&self) -> usize {
        self.places.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub(crate) fn place_record(&self, p: PlaceId) -> &PlaceRecord {
        &self.places[p.index()]
    }

    pub(crate) fn push_arc(&mut self, arc: ArcRecord) {
        self.arcs.push(arc);
    }

    /// Normal arc place → transition (token consumed).
    pub fn consume(&mut self, p: PlaceId, t: TransitionId) {
        self.push_arc(ArcRecord {
            source: Node::Place(p),
            target: Node::Transition(t),
            kind: ArcKind::Normal,
        });
    }

    /// Normal arc transition → place (token produced).
    pub fn produce(&mut self, t: TransitionId, p: PlaceId) {
        self.push_arc(ArcRecord {
            source: Node::Transition(t),
            target: Node::Place(p),
            kind: ArcKind::Normal,
        });
    }

    /// Read arc place ⊸ transition.
    pub fn read(&mut self, p: PlaceId, t: TransitionId) {
        self.push_arc(ArcRecord {
            source: Node::Place(p),
            target: Node::Transition(t),
            kind: ArcKind::Read,
        });
    }

    pub fn arc(&mut self, source: Node, target: Node, kind: ArcKind) {
        self.push_arc(ArcRecord {
            source,
            target,
            kind,
        });
    }

    pub fn mark(&mut self, p: PlaceId) {
        self.initial.set(p, true);
    }

    pub fn set_count(&mut self, p: PlaceId, n: u32) {
        self.initial.set_count(p, n);
    }

    pub fn build(self) -> Result<Net, NetError> {
        let np = self.places.len();
        let nt = self.transitions.len();
        if self.place_index.len() != np {
            let mut seen = std::collections::HashSet::new();
            for p in &self.places {
                if !seen.insert(&p.name) {
                    return Err(NetError::DuplicateName(p.name.clone()));
                }
            }
        }
        if self.transition_index.len() != nt {
            let mut seen = std::collections::HashSet::new();
            for t in &self.transitions {
                if !seen.insert(&t.name) {
                    return Err(NetError::DuplicateName(t.name.clone()));
                }
            }
        }
        for t in &self.transitions {
            if self.place_index.contains_key(&t.name) {
                return Err(NetError::DuplicateName(t.name.clone()));
            }
        }
        for p in &self.places {
            if let PlaceKind::Counter { bound: 0 } = p.kind {
                return Err(NetError::ZeroBound(p.name.clone()));
            }
        }

        let mut tarcs = vec![TransitionArcs::default(); nt];
        let mut parcs = vec![PlaceArcs::default(); np];
        let in_range = |n: Node| match n {
            Node::Place(p) => p.index() < np,
            Node::Transition(t) => t.index() < nt,
        };
        for arc in &self.arcs {
            if !in_range(arc.source) || !in_range(arc.target) {
                return Err(NetError::DanglingArc);
            }
            match (arc.source, arc.target, arc.kind) {
                (Node::Place(p), Node::Transition(t), ArcKind::Normal) => {
                    tarcs[t.index()].consume.push(p);
                    parcs[p.index()].consumers.push(t);
                }
                (Node::Place(p), Node::Transition(t), ArcKind::Read) => {
                    tarcs[t.index()].read.push(p);
                    parcs[p.index()].readers.push(t);
                }
                (Node::Transition(t), Node::Place(p), ArcKind::Normal) => {
                    tarcs[t.index()].produce.push(p);
                    parcs[p.index()].producers.push(t);
                }
                (Node::Transition(_), Node::Place(_), ArcKind::Read) => {
                    return Err(NetError::ReadArcDirection);
                }
                _ => return Err(NetError::NotBipartite),
            }
        }
        for (i, ta) in tarcs.iter().enumerate() {
            let name = &self.transitions[i].name;
            let dup = |v: &[PlaceId]| {
                let mut s = v.to_vec();
                s.sort();
                s.windows(2).any(|w| w[0] == w[1])
            };
            if dup(&ta.consume) || dup(&ta.produce) || dup(&ta.read) {
                return Err(NetError::ParallelArc(name.clone()));
            }
            if ta
                .read
                .iter()
                .any(|p| ta.consume.contains(p) || ta.produce.contains(p))
            {
                return Err(NetError::ParallelArc(name.clone()));
            }
        }
        let mut initial = self.initial;
        initial.resize(np);
        for (p, n) in initial.counts() {
            match self.places[p.index()].kind {
                PlaceKind::Counter { bound } if n <= bound => {}
                PlaceKind::Counter { .. } => {
                    return Err(NetError::InitialOverBound(self.places[p.index()].name.clone()))
                }
                PlaceKind::Standard => {
                    return Err(NetError::CountOnStandard(self.places[p.index()].name.clone()))
                }
            }
        }
        for p in initial.marked_places() {
            if matches!(self.places[p.index()].kind, PlaceKind::Counter { .. }) {
                return Err(NetError::CountOnStandard(self.places[p.index()].name.clone()));
            }
        }
        Ok(Net {
            places: self.places,
            transitions: self.transitions,
            arcs: self.arcs,
            initial,
            place_index: self.place_index,
            transition_index: self.transition_index,
            tarcs,
            parcs,
        })
    }
}
