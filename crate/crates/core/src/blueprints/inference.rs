use super::{
    fmt_value, int, value_place, BlueprintError, Category, DataRow, Port, PortRole, Segment,
    ValueDomain, WeightInit,
};
use crate::bitfloat::Fp32Bits;
use crate::petri::NetBuilder;

#[derive(Clone, Debug, Default)]
pub struct LoaderOptions {
    /// Consume one token of the `budget` counter (of this bound) on the
    /// first row.
    pub budget: Option<u32>,
    /// Emit recorder tokens for the row index, label, features and epoch.
    pub instrument: bool,
    /// Bound of the epoch counter when instrumented.
    pub epoch_bound: u32,
}

pub const DATA_VEC: &str = "data_vec";
pub const BUDGET: &str = "budget";
pub const EPOCH: &str = "rec.epoch";

/// Cyclic input loader. Row `k` needs `data_vec` and the ring position
/// `k`, emits every feature value onto each wire listed for that feature,
/// the label onto `y` and advances the ring.
pub fn gen_input_loader(
    dataset: &[DataRow],
    feature_wires: &[Vec<String>],
    opts: &LoaderOptions,
) -> Result<Segment, BlueprintError> {
    if dataset.is_empty() {
        return Err(BlueprintError::Argument("empty dataset".into()));
    }
    let n = dataset.len();
    let mut b = NetBuilder::new();
    let data_vec = b.place(DATA_VEC);
    b.mark(data_vec);
    let ring: Vec<_> = (0..n).map(|k| b.place(format!("load.c{k}"))).collect();
    b.mark(ring[0]);
    let budget = opts.budget.map(|n| b.counter(BUDGET, n.max(1)));
    let epoch = opts.instrument.then(|| b.counter(EPOCH, opts.epoch_bound.max(1)));
    let bit = ValueDomain::bit();
    let mut ports = vec![
        Port::control(PortRole::ControlIn, DATA_VEC),
        Port::value(PortRole::ValueOut, "y", &ValueDomain::sign()),
    ];
    for wires in feature_wires {
        for w in wires {
            ports.push(Port::value(PortRole::ValueOut, w, &bit));
        }
    }
    if opts.budget.is_some() {
        ports.push(Port::control(PortRole::ControlIn, BUDGET));
    }
    for p in ports.iter().flat_map(|p| p.places.clone()).collect::<Vec<_>>() {
        b.ensure_place(&p);
    }
    for (k, row) in dataset.iter().enumerate() {
        let key = row.key();
        let t = b.transition(format!("load[{key}]"), key.clone());
        b.consume(data_vec, t);
        b.consume(ring[k], t);
        b.produce(t, ring[(k + 1) % n]);
        if let (0, Some(bp)) = (k, budget) {
            b.consume(bp, t);
        }
        for (j, wires) in feature_wires.iter().enumerate() {
            let v = int(row.features[j] as i64);
            for w in wires {
                let p = b.ensure_place(&value_place(w, &v));
                b.produce(t, p);
            }
            if opts.instrument {
                let p = b.ensure_place(&value_place(&format!("rec.a{j}"), &v));
                b.produce(t, p);
            }
        }
        let y = b.ensure_place(&value_place("y", &int(row.label as i64)));
        b.produce(t, y);
        if opts.instrument {
            let p = b.ensure_place(&value_place("rec.vec", &int(k as i64)));
            b.produce(t, p);
            let p = b.ensure_place(&value_place("rec.y", &int(row.label as i64)));
            b.produce(t, p);
            if let (0, Some(ep)) = (k, epoch) {
                b.produce(t, ep);
            }
        }
    }
    // A one-row dataset makes ring[0] both consumed and produced, which the
    // builder accepts as a self-loop.
    Segment::new("load", Category::Inference, b.build()?, ports)
}

/// Place holding value `v` of bit `n` of weight `k`.
pub fn bit_place(k: usize, n: u32, v: bool) -> String {
    format!("w{k}.b{n}={}", v as u8)
}

/// Wires receiving the binarized weight.
#[derive(Clone, Debug, Default)]
pub struct RegisterOutputs {
    pub copies: Vec<String>,
    pub instrument: bool,
}

/// Weight register `k`: 32 two-place bit buffers, toggles guarded by `r`,
/// `set_weights` moving `r` to `arb`, and the binarization transitions that
/// consume `arb`.
///
/// With [`WeightInit::Preset`] the bits start at `initial` and `arb` is
/// marked; with [`WeightInit::FreeChoice`] `r` is marked and the toggles may
/// rewrite any bit except bit 30 before `set_weights` fires.
pub fn gen_weight_register(
    k: usize,
    initial: Fp32Bits,
    init: WeightInit,
    out: &RegisterOutputs,
) -> Result<Segment, BlueprintError> {
    let name = format!("w{k}");
    let mut b = NetBuilder::new();
    let mut bits = Vec::with_capacity(64);
    for n in 0..32u32 {
        let zero = b.place(bit_place(k, n, false));
        let one = b.place(bit_place(k, n, true));
        b.mark(if initial.bit(n) { one } else { zero });
        bits.push((zero, one));
    }
    let r = b.place(format!("{name}.r"));
    let arb = b.place(format!("{name}.arb"));
    let ste_go = b.place(format!("{name}.ste_go"));
    match init {
        WeightInit::Preset => b.mark(arb),
        WeightInit::FreeChoice => b.mark(r),
    }
    let sign = ValueDomain::sign();
    let mut wires = out.copies.clone();
    if out.instrument {
        wires.push(format!("rec.wb{k}"));
    }
    for w in &wires {
        for p in sign.places(w) {
            b.ensure_place(&p);
        }
    }
    for n in (0..32u32).filter(|&n| n != 30) {
        let (zero, one) = bits[n as usize];
        let up = b.transition(format!("{name}.set{n}"), format!("b{n}:0>1"));
        b.read(r, up);
        b.consume(zero, up);
        b.produce(up, one);
        let down = b.transition(format!("{name}.clr{n}"), format!("b{n}:1>0"));
        b.read(r, down);
        b.consume(one, down);
        b.produce(down, zero);
    }
    let set = b.transition(format!("{name}.set_weights"), "set_weights");
    b.consume(r, set);
    b.produce(set, arb);

    let emit = |b: &mut NetBuilder, tname: String, label: &str, v: i64, reads: &[(u32, bool)]| {
        let t = b.transition(tname, label);
        b.consume(arb, t);
        for &(n, val) in reads {
            let (zero, one) = bits[n as usize];
            b.read(if val { one } else { zero }, t);
        }
        for w in &wires {
            let p = b.ensure_place(&value_place(w, &int(v)));
            b.produce(t, p);
        }
        b.produce(t, ste_go);
    };
    emit(&mut b, format!("{name}.pve"), "pve", 1, &[(31, false)]);
    let mut all0 = vec![(31, true)];
    all0.extend((0..31).map(|n| (n, false)));
    emit(&mut b, format!("{name}.all_0s"), "all_0s", 1, &all0);
    // Bit 30 is always 0, so only bits 0..29 can witness a nonzero value.
    for n in 0..30u32 {
        emit(&mut b, format!("{name}.neg{n}"), "neg", -1, &[(31, true), (n, true)]);
    }

    let bit_places: Vec<String> = (0..32)
        .flat_map(|n| [bit_place(k, n, false), bit_place(k, n, true)])
        .collect();
    let mut ports = vec![
        Port::state(PortRole::StateOwned, &format!("{name}.bits"), bit_places),
        Port::control(PortRole::ControlIn, &format!("{name}.arb")),
        Port::control(PortRole::ControlOut, &format!("{name}.ste_go")),
    ];
    for w in &wires {
        ports.push(Port::value(PortRole::ValueOut, w, &sign));
    }
    Segment::new(&name, Category::Inference, b.build()?, ports)
}

/// Consumes whatever value arrives on `wire` and signals `done`.
pub fn gen_ack(name: &str, wire: &str, domain: &ValueDomain, done: &str) -> Result<Segment, BlueprintError> {
    let mut b = NetBuilder::new();
    let d = b.place(done);
    for v in domain.values() {
        let p = b.ensure_place(&value_place(wire, v));
        let t = b.transition(format!("{name}[{}]", fmt_value(v)), format!("{name}({})", fmt_value(v)));
        b.consume(p, t);
        b.produce(t, d);
    }
    Segment::new(
        name,
        Category::Infrastructure,
        b.build()?,
        vec![
            Port::value(PortRole::ValueIn, wire, domain),
            Port::control(PortRole::ControlOut, done),
        ],
    )
}
