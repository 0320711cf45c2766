use std::collections::BTreeMap;

use super::net::{ArcRecord, Net, NetBuilder, Node, PlaceId, PlaceKind, TransitionId};
use super::NetError;

/// Union of two nets where each `b` place named in `fuse` is identified with
/// the `a` place it maps to. All other names must be distinct.
///
/// A fused place is initially marked iff it is marked in either net; a
/// fused pair of counters adds its initial counts.
pub fn merge(a: &Net, b: &Net, fuse: &BTreeMap<String, String>) -> Result<Net, NetError> {
    let mut builder = a.to_builder();
    for target in fuse.values() {
        a.lookup_place(target)?;
    }
    builder.absorb(b, |name| fuse.get(name).cloned())?;
    builder.build()
}

/// Fuse map identifying every place name present in both nets.
pub fn fuse_by_name(a: &Net, b: &Net) -> BTreeMap<String, String> {
    b.places()
        .iter()
        .filter(|p| a.place_id(&p.name).is_some())
        .map(|p| (p.name.clone(), p.name.clone()))
        .collect()
}

impl NetBuilder {
    /// Add `b` to the net under construction, fusing each place for which
    /// `fuse` names an existing place.
    pub fn absorb(
        &mut self,
        b: &Net,
        fuse: impl Fn(&str) -> Option<String>,
    ) -> Result<(), NetError> {
        let mut pmap: Vec<PlaceId> = Vec::with_capacity(b.num_places());
        for (i, rec) in b.places().iter().enumerate() {
            let bp = PlaceId(i as u32);
            let in_b = b.initial_marking().is_marked(bp);
            let count_b = b.initial_marking().count(bp);
            if let Some(target) = fuse(&rec.name) {
                let ap = self
                    .place_id(&target)
                    .ok_or_else(|| NetError::UnknownPlace(target.clone()))?;
                let akind = self.place_record(ap).kind;
                match (akind, rec.kind) {
                    (PlaceKind::Standard, PlaceKind::Standard) => {
                        if in_b {
                            if self.initial.is_marked(ap) {
                                return Err(NetError::DoubleMarkedFusion(rec.name.clone(), target));
                            }
                            self.mark(ap);
                        }
                    }
                    (PlaceKind::Counter { bound }, PlaceKind::Counter { .. }) => {
                        let n = self.initial.count(ap) + count_b;
                        if n > bound {
                            return Err(NetError::InitialOverBound(target));
                        }
                        self.set_count(ap, n);
                    }
                    _ => return Err(NetError::KindMismatch(rec.name.clone(), target)),
                }
                pmap.push(ap);
            } else {
                if self.place_id(&rec.name).is_some() || self.transition_id(&rec.name).is_some() {
                    return Err(NetError::Collision(rec.name.clone()));
                }
                let np = match rec.kind {
                    PlaceKind::Standard => self.labeled_place(rec.name.clone(), rec.label.clone()),
                    PlaceKind::Counter { bound } => self.counter(rec.name.clone(), bound),
                };
                if in_b {
                    self.mark(np);
                }
                if count_b > 0 {
                    self.set_count(np, count_b);
                }
                pmap.push(np);
            }
        }
        let mut tmap: Vec<TransitionId> = Vec::with_capacity(b.num_transitions());
        for rec in b.transitions() {
            if self.place_id(&rec.name).is_some() || self.transition_id(&rec.name).is_some() {
                return Err(NetError::Collision(rec.name.clone()));
            }
            tmap.push(self.transition(rec.name.clone(), rec.label.clone()));
        }
        let remap = |n: Node| match n {
            Node::Place(p) => Node::Place(pmap[p.index()]),
            Node::Transition(t) => Node::Transition(tmap[t.index()]),
        };
        for arc in b.arcs() {
            self.push_arc(ArcRecord {
                source: remap(arc.source),
                target: remap(arc.target),
                kind: arc.kind,
            });
        }
        Ok(())
    }

    /// [`absorb`](Self::absorb) fusing every place whose name already exists.
    pub fn absorb_by_name(&mut self, b: &Net) -> Result<(), NetError> {
        let existing: Vec<Option<String>> = b
            .places()
            .iter()
            .map(|p| self.place_id(&p.name).map(|_| p.name.clone()))
            .collect();
        let lookup: std::collections::HashMap<&str, String> = b
            .places()
            .iter()
            .zip(existing)
            .filter_map(|(p, e)| e.map(|e| (p.name.as_str(), e)))
            .collect();
        self.absorb(b, |name| lookup.get(name).cloned())
    }
}
