//! 1-safe Petri nets with read arcs and bounded counter places.
//!
//! A transition is enabled when every normal-preset place and every
//! read-arc place holds a token. Firing consumes the normal preset, leaves
//! read-arc places untouched and produces the postset. Producing into an
//! already marked standard place (or past a counter's bound) is reported as
//! a [`SafetyViolation`] instead of silently creating a second token.

mod marking;
mod merge;
mod net;

use std::collections::BTreeMap;

use thiserror::Error;

pub use marking::{count_key, place_key, Marking, SafetyViolation, Trace, TraceStep};
pub use merge::{fuse_by_name, merge};
pub use net::{
    ArcKind, ArcRecord, Net, NetBuilder, Node, PlaceId, PlaceKind, PlaceRecord, TransitionId,
    TransitionRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown place id {0}")]
    UnknownPlaceId(u32),
    #[error("unknown transition id {0}")]
    UnknownTransitionId(u32),
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("arc does not connect a place and a transition")]
    NotBipartite,
    #[error("read arcs must go from a place to a transition")]
    ReadArcDirection,
    #[error("arc refers to a missing node")]
    DanglingArc,
    #[error("transition `{0}` has parallel arcs to the same place")]
    ParallelArc(String),
    #[error("counter place `{0}` must have a positive bound")]
    ZeroBound(String),
    #[error("initial count of `{0}` exceeds its bound")]
    InitialOverBound(String),
    #[error("place `{0}` has the wrong kind of initial marking")]
    CountOnStandard(String),
    #[error("fused places `{0}` and `{1}` have different kinds")]
    KindMismatch(String, String),
    #[error("fusing `{0}` onto `{1}` would mark a standard place twice")]
    DoubleMarkedFusion(String, String),
    #[error("name `{0}` collides after merge")]
    Collision(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("transition `{0}` is not enabled")]
    Disabled(String),
    #[error("{0}")]
    Unsafe(SafetyViolation),
    #[error(transparent)]
    Lookup(#[from] NetError),
}

impl Net {
    pub(crate) fn enabled_unchecked(&self, m: &Marking, t: TransitionId) -> bool {
        let arcs = &self.tarcs[t.index()];
        arcs.consume
            .iter()
            .chain(arcs.read.iter())
            .all(|&p| self.has_token(m, p))
    }

    #[inline]
    pub(crate) fn has_token(&self, m: &Marking, p: PlaceId) -> bool {
        match self.place(p).kind {
            PlaceKind::Standard => m.is_marked(p),
            PlaceKind::Counter { .. } => m.count(p) > 0,
        }
    }

    pub fn enabled(&self, m: &Marking, t: TransitionId) -> Result<bool, NetError> {
        self.check_transition(t)?;
        Ok(self.enabled_unchecked(m, t))
    }

    pub fn enabled_transitions(&self, m: &Marking) -> Vec<TransitionId> {
        self.transition_ids()
            .filter(|&t| self.enabled_unchecked(m, t))
            .collect()
    }

    /// Fire an enabled transition in place. On a safety violation the
    /// marking is left in its partially updated state and must be discarded.
    pub(crate) fn fire_in_place(
        &self,
        m: &mut Marking,
        t: TransitionId,
    ) -> Result<(), SafetyViolation> {
        let arcs = &self.tarcs[t.index()];
        for &p in &arcs.consume {
            match self.place(p).kind {
                PlaceKind::Standard => m.set(p, false),
                PlaceKind::Counter { .. } => m.set_count(p, m.count(p) - 1),
            }
        }
        for &p in &arcs.produce {
            let overflow = match self.place(p).kind {
                PlaceKind::Standard => {
                    let was = m.is_marked(p);
                    m.set(p, true);
                    was
                }
                PlaceKind::Counter { bound } => {
                    let n = m.count(p);
                    m.set_count(p, (n + 1).min(bound));
                    n >= bound
                }
            };
            if overflow {
                return Err(SafetyViolation {
                    place: p,
                    place_name: self.place(p).name.clone(),
                    transition: t,
                });
            }
        }
        Ok(())
    }

    pub fn fire(&self, m: &Marking, t: TransitionId) -> Result<Marking, FireError> {
        self.check_transition(t)?;
        if !self.enabled_unchecked(m, t) {
            return Err(FireError::Disabled(self.transition(t).name.clone()));
        }
        let mut next = m.clone();
        self.fire_in_place(&mut next, t).map_err(FireError::Unsafe)?;
        Ok(next)
    }

    pub fn fire_named(&self, m: &Marking, name: &str) -> Result<Marking, FireError> {
        let t = self.lookup_transition(name)?;
        self.fire(m, t)
    }

    /// Incidence matrix `C(p,t) = W(t,p) - W(p,t)`; read arcs contribute 0.
    pub fn incidence(&self) -> Incidence {
        let mut columns = Vec::with_capacity(self.num_transitions());
        for t in self.transition_ids() {
            let mut col: BTreeMap<PlaceId, i32> = BTreeMap::new();
            for &p in self.consumed(t) {
                *col.entry(p).or_default() -= 1;
            }
            for &p in self.produced(t) {
                *col.entry(p).or_default() += 1;
            }
            col.retain(|_, v| *v != 0);
            columns.push(col);
        }
        Incidence {
            places: self.num_places(),
            columns,
        }
    }
}

/// Sparse column-major incidence matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    places: usize,
    columns: Vec<BTreeMap<PlaceId, i32>>,
}

impl Incidence {
    pub fn get(&self, p: PlaceId, t: TransitionId) -> i32 {
        self.columns[t.index()].get(&p).copied().unwrap_or(0)
    }

    pub fn column(&self, t: TransitionId) -> impl Iterator<Item = (PlaceId, i32)> + '_ {
        self.columns[t.index()].iter().map(|(&p, &v)| (p, v))
    }

    pub fn rows(&self) -> usize {
        self.places
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<i32>> {
        let mut d = vec![vec![0; self.columns.len()]; self.places];
        for (t, col) in self.columns.iter().enumerate() {
            for (p, v) in col {
                d[p.index()][t] = *v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests;
