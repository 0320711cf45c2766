use super::compose::Layout;
use super::inference::{bit_place, DATA_VEC};
use super::{fmt_value, value_place, BlueprintError, Category, NetworkSpec, Port, PortRole, Segment, ValueDomain};
use crate::petri::NetBuilder;

const FLUSH: &str = "flush";

/// Name of the place recording value `v` on recorder wire `wire`.
pub fn recorder_place(wire: &str, v: &super::Value) -> String {
    value_place(wire, v)
}

/// One-hot recorder wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecorderGroup {
    pub wire: String,
    pub domain: ValueDomain,
    /// Cleared by the flush stage before the next data vector.
    pub flushed: bool,
}

/// Every recorder wire of the instrumented model.
#[derive(Clone, Debug)]
pub struct InstrumentPlan {
    pub groups: Vec<RecorderGroup>,
    pub num_weights: usize,
}

impl InstrumentPlan {
    pub fn new(spec: &NetworkSpec) -> Self {
        let layout = Layout::new(spec);
        let f = layout.features as i64;
        let mut groups = Vec::new();
        let mut add = |wire: String, domain: ValueDomain| {
            groups.push(RecorderGroup {
                wire,
                domain,
                flushed: true,
            })
        };
        add("rec.vec".into(), ValueDomain::range(0, spec.dataset.len() as i64 - 1));
        add("rec.y".into(), ValueDomain::sign());
        for j in 0..layout.features {
            add(format!("rec.a{j}"), ValueDomain::bit());
        }
        for k in 0..layout.num_weights() {
            add(format!("rec.wb{k}"), ValueDomain::sign());
        }
        for i in 0..layout.hidden {
            add(format!("rec.s{i}"), ValueDomain::range(-f, f));
            add(format!("rec.x{i}"), ValueDomain::sign());
            add(format!("rec.o{i}"), ValueDomain::sign());
        }
        add("rec.z".into(), layout.z_domain());
        add("rec.yhat".into(), ValueDomain::sign());
        add("rec.L".into(), layout.loss_domain());
        add("rec.dLdz".into(), ValueDomain::ternary());
        for k in 0..layout.num_weights() {
            add(format!("rec.gb{k}"), ValueDomain::ternary());
            add(format!("rec.ste{k}"), ValueDomain::bit());
            add(format!("rec.gr{k}"), ValueDomain::ternary());
            add(format!("rec.J{k}"), layout.j_domain());
            for n in 0..32 {
                add(Self::bit_wire(k, n), ValueDomain::bit());
            }
        }
        groups.push(RecorderGroup {
            wire: "rec.lr".into(),
            domain: layout.rate_domain(),
            flushed: false,
        });
        InstrumentPlan {
            groups,
            num_weights: layout.num_weights(),
        }
    }

    /// Recorder of bit `n` of weight `k` after its update.
    pub fn bit_wire(k: usize, n: u32) -> String {
        format!("rec.w{k}.b{n}")
    }

    pub fn flush_start(&self) -> String {
        FLUSH.to_string()
    }

    pub fn group(&self, wire: &str) -> Option<&RecorderGroup> {
        self.groups.iter().find(|g| g.wire == wire)
    }
}

/// Post-update bit snapshots (`done{k}` to `ready{k}`) and the flush
/// chain that clears every flushed recorder, then releases the next data
/// vector and rebinarization.
pub fn gen_metric_instrument(spec: &NetworkSpec) -> Result<Segment, BlueprintError> {
    let plan = InstrumentPlan::new(spec);
    let mut b = NetBuilder::new();
    let mut ports = Vec::new();
    for g in &plan.groups {
        for p in g.domain.places(&g.wire) {
            b.ensure_place(&p);
        }
        ports.push(Port::value(PortRole::ValueIn, &g.wire, &g.domain));
    }

    for k in 0..plan.num_weights {
        let done = b.place(format!("done{k}"));
        let ready = b.place(format!("ready{k}"));
        let mut here = done;
        for n in 0..32u32 {
            let next = if n == 31 { ready } else { b.place(format!("snap{k}.{}", n + 1)) };
            for v in [false, true] {
                let t = b.transition(format!("snap{k}.b{n}.{}", v as u8), format!("snap b{n}={}", v as u8));
                b.consume(here, t);
                let bit = b.ensure_place(&bit_place(k, n, v));
                b.read(bit, t);
                let r = b.ensure_place(&value_place(&InstrumentPlan::bit_wire(k, n), &super::int(v as i64)));
                b.produce(t, r);
                b.produce(t, next);
            }
            here = next;
        }
        ports.push(Port::control(PortRole::ControlIn, &format!("done{k}")));
        ports.push(Port::control(PortRole::ControlOut, &format!("ready{k}")));
        let bits: Vec<String> = (0..32)
            .flat_map(|n| [bit_place(k, n, false), bit_place(k, n, true)])
            .collect();
        ports.push(Port::state(PortRole::StateShared, &format!("w{k}.bits"), bits));
    }

    let mut here = b.place(FLUSH);
    ports.push(Port::control(PortRole::ControlIn, FLUSH));
    let flushed: Vec<&super::RecorderGroup> = plan.groups.iter().filter(|g| g.flushed).collect();
    for (m, g) in flushed.iter().enumerate() {
        let next = b.place(format!("{FLUSH}.{}", m + 1));
        for v in g.domain.values() {
            let t = b.transition(
                format!("{FLUSH}.{m}[{}]", fmt_value(v)),
                format!("flush {}", g.wire),
            );
            b.consume(here, t);
            let p = b.ensure_place(&value_place(&g.wire, v));
            b.consume(p, t);
            b.produce(t, next);
        }
        here = next;
    }
    let resume = b.transition("resume", "resume");
    b.consume(here, resume);
    let dv = b.place(DATA_VEC);
    b.produce(resume, dv);
    ports.push(Port::control(PortRole::ControlOut, DATA_VEC));
    for k in 0..plan.num_weights {
        let arb = b.place(format!("w{k}.arb"));
        b.produce(resume, arb);
        ports.push(Port::control(PortRole::ControlOut, &format!("w{k}.arb")));
    }
    Segment::new("instrument", Category::Infrastructure, b.build()?, ports)
}
