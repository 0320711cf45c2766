use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::net::{Net, PlaceId, PlaceKind, TransitionId};

/// Marked standard places (as a bitset) plus token counts of counter places.
///
/// Two markings are equal iff they mark the same places and hold the same
/// counts; zero counts are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Marking {
    bits: Vec<u64>,
    counts: BTreeMap<PlaceId, u32>,
}

impl Marking {
    pub fn empty(num_places: usize) -> Self {
        Marking {
            bits: vec![0; num_places.div_ceil(64)],
            counts: BTreeMap::new(),
        }
    }

    pub(crate) fn resize(&mut self, num_places: usize) {
        self.bits.resize(num_places.div_ceil(64), 0);
    }

    pub fn is_marked(&self, p: PlaceId) -> bool {
        let i = p.index();
        self.bits
            .get(i / 64)
            .is_some_and(|w| w & (1u64 << (i % 64)) != 0)
    }

    pub fn set(&mut self, p: PlaceId, on: bool) {
        let i = p.index();
        if i / 64 >= self.bits.len() {
            self.bits.resize(i / 64 + 1, 0);
        }
        if on {
            self.bits[i / 64] |= 1u64 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1u64 << (i % 64));
        }
    }

    pub fn count(&self, p: PlaceId) -> u32 {
        self.counts.get(&p).copied().unwrap_or(0)
    }

    pub fn set_count(&mut self, p: PlaceId, n: u32) {
        if n == 0 {
            self.counts.remove(&p);
        } else {
            self.counts.insert(p, n);
        }
    }

    pub fn counts(&self) -> impl Iterator<Item = (PlaceId, u32)> + '_ {
        self.counts.iter().map(|(&p, &n)| (p, n))
    }

    pub fn marked_places(&self) -> impl Iterator<Item = PlaceId> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros();
                word &= word - 1;
                Some(PlaceId((w * 64) as u32 + b))
            })
        })
    }

    pub fn num_marked(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Token count of `p`, interpreting the place kind from `net`.
    pub fn tokens(&self, net: &Net, p: PlaceId) -> u32 {
        match net.place(p).kind {
            PlaceKind::Standard => self.is_marked(p) as u32,
            PlaceKind::Counter { .. } => self.count(p),
        }
    }

    /// True when every marked place of `other` is marked here and every
    /// counter holds at least `other`'s count.
    pub fn covers(&self, other: &Marking) -> bool {
        other
            .bits
            .iter()
            .enumerate()
            .all(|(i, &w)| self.bits.get(i).copied().unwrap_or(0) & w == w)
            && other.counts().all(|(p, n)| self.count(p) >= n)
    }

    /// Order-independent 64-bit digest: the XOR of [`place_key`] over marked
    /// places and [`count_key`] over counter counts, so it can be maintained
    /// incrementally while firing.
    pub fn digest(&self) -> u64 {
        let mut h = 0;
        for p in self.marked_places() {
            h ^= place_key(p);
        }
        for (p, n) in self.counts() {
            h ^= count_key(p, n);
        }
        h
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Digest contribution of a marked standard place.
pub fn place_key(p: PlaceId) -> u64 {
    splitmix64(p.0 as u64)
}

/// Digest contribution of counter `p` holding `n` tokens (0 for `n == 0`).
pub fn count_key(p: PlaceId, n: u32) -> u64 {
    if n == 0 {
        0
    } else {
        splitmix64(((p.0 as u64) << 32 | n as u64) ^ 0x5555_5555_0000_0000)
    }
}

/// Outcome of an unsafe firing: the place that would overflow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyViolation {
    pub place: PlaceId,
    pub place_name: String,
    pub transition: TransitionId,
}

impl std::fmt::Display for SafetyViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "firing {} overflows place {}",
            self.transition.0, self.place_name
        )
    }
}

/// One recorded firing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: u64,
    pub transition: TransitionId,
    pub digest: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn push(&mut self, transition: TransitionId, digest: u64) {
        let index = self.steps.len() as u64;
        self.steps.push(TraceStep {
            index,
            transition,
            digest,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn transitions(&self) -> impl Iterator<Item = TransitionId> + '_ {
        self.steps.iter().map(|s| s.transition)
    }
}
