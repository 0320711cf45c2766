use std::collections::BTreeMap;

use thiserror::Error;

use crate::bitfloat::Fp32Bits;
use crate::blueprints::{parse_value, Value, EPOCH};
use crate::petri::{Marking, Net, PlaceId};
use crate::refbnn::{StepMetrics, WeightMetrics};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error("net has no recorder `{0}`")]
    Missing(String),
    #[error("recorder `{wire}` has {marked} marked places, expected exactly one")]
    OneHot { wire: String, marked: usize },
    #[error("recorder `{wire}` holds {value}, which is out of range")]
    Range { wire: String, value: String },
}

#[derive(Clone, Debug)]
struct Group {
    wire: String,
    places: Vec<(PlaceId, Value)>,
}

impl Group {
    fn read(&self, m: &Marking) -> Result<Value, InstrumentError> {
        let mut hit = None;
        let mut marked = 0;
        for (p, v) in &self.places {
            if m.is_marked(*p) {
                marked += 1;
                hit = Some(*v);
            }
        }
        match (marked, hit) {
            (1, Some(v)) => Ok(v),
            _ => Err(InstrumentError::OneHot {
                wire: self.wire.clone(),
                marked,
            }),
        }
    }

    fn int(&self, m: &Marking) -> Result<i32, InstrumentError> {
        self.scaled(m, 1)
    }

    /// Value times `scale`, which must be an integer.
    fn scaled(&self, m: &Marking, scale: i64) -> Result<i32, InstrumentError> {
        let v = self.read(m)? * scale;
        if !v.is_integer() {
            return Err(InstrumentError::Range {
                wire: self.wire.clone(),
                value: v.to_string(),
            });
        }
        i32::try_from(*v.numer()).map_err(|_| InstrumentError::Range {
            wire: self.wire.clone(),
            value: v.to_string(),
        })
    }
}

#[derive(Clone, Debug)]
struct WeightGroups {
    wb: Group,
    gb: Group,
    ste: Group,
    gr: Group,
    j: Group,
    bits: Vec<Group>,
}

/// Recorder layout of an instrumented net, resolved once to place ids.
#[derive(Clone, Debug)]
pub struct Decoder {
    vec: Group,
    y: Group,
    a: Vec<Group>,
    s: Vec<Group>,
    x: Vec<Group>,
    o: Vec<Group>,
    z: Group,
    yhat: Group,
    loss: Group,
    dldz: Group,
    weights: Vec<WeightGroups>,
    epoch: Option<PlaceId>,
}

impl Decoder {
    /// `None` when `net` has no recorder places.
    pub fn new(net: &Net) -> Option<Decoder> {
        Self::try_new(net).ok()
    }

    pub fn try_new(net: &Net) -> Result<Decoder, InstrumentError> {
        let mut wires: BTreeMap<String, Vec<(PlaceId, Value)>> = BTreeMap::new();
        for p in net.place_ids() {
            let name = &net.place(p).name;
            let Some(rest) = name.strip_prefix("rec.") else { continue };
            let Some((w, v)) = rest.split_once('=') else { continue };
            if let Some(v) = parse_value(v) {
                wires.entry(format!("rec.{w}")).or_default().push((p, v));
            }
        }
        let mut take = |wire: String| -> Result<Group, InstrumentError> {
            match wires.remove(&wire) {
                Some(places) => Ok(Group { wire, places }),
                None => Err(InstrumentError::Missing(wire)),
            }
        };
        let count = |prefix: &str| {
            (0..)
                .take_while(|i| net.place_ids().any(|p| net.place(p).name.starts_with(&format!("rec.{prefix}{i}="))))
                .count()
        };
        let (features, hidden, num_weights) = (count("a"), count("s"), count("wb"));
        if num_weights == 0 {
            return Err(InstrumentError::Missing("rec.wb0".into()));
        }
        let mut d = Decoder {
            vec: take("rec.vec".into())?,
            y: take("rec.y".into())?,
            a: (0..features).map(|j| take(format!("rec.a{j}"))).collect::<Result<_, _>>()?,
            s: Vec::new(),
            x: Vec::new(),
            o: Vec::new(),
            z: take("rec.z".into())?,
            yhat: take("rec.yhat".into())?,
            loss: take("rec.L".into())?,
            dldz: take("rec.dLdz".into())?,
            weights: Vec::new(),
            epoch: net.place_id(EPOCH),
        };
        for i in 0..hidden {
            d.s.push(take(format!("rec.s{i}"))?);
            d.x.push(take(format!("rec.x{i}"))?);
            d.o.push(take(format!("rec.o{i}"))?);
        }
        for k in 0..num_weights {
            d.weights.push(WeightGroups {
                wb: take(format!("rec.wb{k}"))?,
                gb: take(format!("rec.gb{k}"))?,
                ste: take(format!("rec.ste{k}"))?,
                gr: take(format!("rec.gr{k}"))?,
                j: take(format!("rec.J{k}"))?,
                bits: (0..32).map(|n| take(format!("rec.w{k}.b{n}"))).collect::<Result<_, _>>()?,
            });
        }
        Ok(d)
    }

    /// Read every recorder of a completed cycle.
    pub fn decode(&self, m: &Marking) -> Result<StepMetrics, InstrumentError> {
        let ints = |gs: &[Group]| gs.iter().map(|g| g.int(m)).collect::<Result<Vec<_>, _>>();
        let signs = |gs: &[Group]| -> Result<Vec<i8>, InstrumentError> { Ok(ints(gs)?.into_iter().map(|v| v as i8).collect()) };
        let mut weights = Vec::with_capacity(self.weights.len());
        for w in &self.weights {
            let mut raw = 0u32;
            for (n, g) in w.bits.iter().enumerate() {
                raw |= (g.int(m)? as u32 & 1) << n;
            }
            weights.push(WeightMetrics {
                binary: w.wb.int(m)? as i8,
                binary_grad: w.gb.int(m)? as i8,
                ste: w.ste.int(m)? as u8,
                real_grad: w.gr.int(m)? as i8,
                j: w.j.scaled(m, 10)? as i8,
                updated: Fp32Bits::new(raw).map_err(|_| InstrumentError::Range {
                    wire: w.bits[0].wire.clone(),
                    value: format!("{raw:#010x}"),
                })?,
            });
        }
        Ok(StepMetrics {
            epoch: self.epoch.map_or(0, |p| m.count(p)),
            vector_index: self.vec.int(m)? as usize,
            features: ints(&self.a)?.into_iter().map(|v| v as u8).collect(),
            y_true: self.y.int(m)? as i8,
            pre_activations: ints(&self.s)?,
            activations: signs(&self.x)?,
            neuron_outputs: signs(&self.o)?,
            output_sum: self.z.int(m)?,
            prediction: self.yhat.int(m)? as i8,
            loss: self.loss.int(m)?,
            dldz: self.dldz.int(m)? as i8,
            weights,
        })
    }
}

/// Read the recorders of an instrumented net in a post-cycle, pre-flush
/// marking.
pub fn decode_instrument(net: &Net, marking: &Marking) -> Result<StepMetrics, InstrumentError> {
    Decoder::try_new(net)?.decode(marking)
}
