use super::inference::{bit_place, BUDGET, DATA_VEC};
use super::mapper::{gen_function_mapper_with, MapperOptions};
use super::{
    int, tenths, value_place, BlueprintError, Category, FunctionTable, Port, PortRole, Segment,
    TableInput, ValueDomain,
};
use crate::petri::NetBuilder;

/// Straight-through estimator of weight `k`: after binarization signals
/// `w{k}.ste_go`, emit `ste{k}=1` when `|W| <= 1` and `ste{k}=0` otherwise,
/// reading the register bits.
///
/// With bit 30 clear, `|W| <= 1` iff some exponent bit 23..29 is 0, or all
/// are 1 and the mantissa is 0.
pub fn gen_ste(k: usize, instrument: bool) -> Result<Segment, BlueprintError> {
    let name = format!("ste{k}");
    let mut b = NetBuilder::new();
    let go = b.place(format!("w{k}.ste_go"));
    let mut wires = vec![name.clone()];
    if instrument {
        wires.push(format!("rec.ste{k}"));
    }
    let bit = ValueDomain::bit();
    for w in &wires {
        for p in bit.places(w) {
            b.ensure_place(&p);
        }
    }
    let emit = |b: &mut NetBuilder, tname: String, v: i64, reads: Vec<(u32, bool)>| {
        let t = b.transition(tname, format!("ste={v}"));
        b.consume(go, t);
        for (n, val) in reads {
            let p = b.ensure_place(&bit_place(k, n, val));
            b.read(p, t);
        }
        for w in &wires {
            let p = b.ensure_place(&value_place(w, &int(v)));
            b.produce(t, p);
        }
    };
    for n in 23..30u32 {
        emit(&mut b, format!("{name}.exp{n}"), 1, vec![(n, false)]);
    }
    let exp_ones: Vec<(u32, bool)> = (23..30).map(|n| (n, true)).collect();
    for n in 0..23u32 {
        let mut reads = exp_ones.clone();
        reads.push((n, true));
        emit(&mut b, format!("{name}.man{n}"), 0, reads);
    }
    let mut reads = exp_ones;
    reads.extend((0..23).map(|n| (n, false)));
    emit(&mut b, format!("{name}.one"), 1, reads);

    let bits: Vec<String> = (0..32)
        .flat_map(|n| [bit_place(k, n, false), bit_place(k, n, true)])
        .filter(|p| b.place_id(p).is_some())
        .collect();
    let mut ports = vec![
        Port::control(PortRole::ControlIn, &format!("w{k}.ste_go")),
        Port::state(PortRole::StateShared, &format!("w{k}.bits"), bits),
    ];
    for w in &wires {
        ports.push(Port::value(PortRole::ValueOut, w, &bit));
    }
    Segment::new(&name, Category::Training, b.build()?, ports)
}

/// Copy `dL/dz` to one wire per weight once the loss has been computed
/// (`loss_done`).
pub fn gen_loss_fork(outputs: &[String], instrument: bool) -> Result<Segment, BlueprintError> {
    if outputs.is_empty() {
        return Err(BlueprintError::Argument("fork needs at least one output".into()));
    }
    let mut table = FunctionTable::unary(TableInput::new("dLdz", ValueDomain::ternary()), "out", |v| v)
        .fan_out("out", outputs);
    if instrument {
        table = table.with_copy(&outputs[0], "rec.dLdz");
    }
    gen_function_mapper_with(
        "fork",
        &table,
        &MapperOptions {
            category: Category::Training,
            controls_in: vec!["loss_done".into()],
            controls_out: vec![],
        },
    )
}

/// Free choice among the given rates (in tenths); the chosen `lr=v` place
/// stays marked for the rest of the run.
pub fn gen_learning_rate(rates: &[u8], instrument: bool) -> Result<Segment, BlueprintError> {
    if rates.is_empty() || rates.iter().any(|r| !(1..=9).contains(r)) {
        return Err(BlueprintError::Argument("rates must be a nonempty subset of 1..=9 tenths".into()));
    }
    let dom = ValueDomain::new(rates.iter().map(|&r| tenths(r as i64)))?;
    let mut b = NetBuilder::new();
    let init = b.place("lr.init");
    b.mark(init);
    let mut ports = vec![Port::value(PortRole::ValueOut, "lr", &dom)];
    for v in dom.values() {
        let t = b.transition(format!("lr.choose[{}]", super::fmt_value(v)), format!("lr={}", super::fmt_value(v)));
        b.consume(init, t);
        let p = b.ensure_place(&value_place("lr", v));
        b.produce(t, p);
        if instrument {
            let p = b.ensure_place(&value_place("rec.lr", v));
            b.produce(t, p);
        }
    }
    if instrument {
        ports.push(Port::value(PortRole::ValueOut, "rec.lr", &dom));
    }
    Segment::new("lr", Category::Training, b.build()?, ports)
}

/// Join of all `inputs`; emits one token on each of `outputs`.
/// The join whose firing marks the end of a training cycle.
pub const NEXT_VECTOR: &str = "next_vector";

pub fn gen_next_vector(inputs: &[String], outputs: &[String]) -> Result<Segment, BlueprintError> {
    if inputs.is_empty() {
        return Err(BlueprintError::Argument("join needs at least one input".into()));
    }
    let mut b = NetBuilder::new();
    let t = b.transition(NEXT_VECTOR, NEXT_VECTOR);
    let mut ports = Vec::new();
    for i in inputs {
        let p = b.place(i.clone());
        b.consume(p, t);
        ports.push(Port::control(PortRole::ControlIn, i));
    }
    for o in outputs {
        let p = b.place(o.clone());
        b.produce(t, p);
        ports.push(Port::control(PortRole::ControlOut, o));
    }
    Segment::new(NEXT_VECTOR, Category::Training, b.build()?, ports)
}

/// Default outputs of the join: `data_vec` and every register's `arb`.
pub fn next_vector_outputs(num_weights: usize) -> Vec<String> {
    let mut v = vec![DATA_VEC.to_string()];
    v.extend((0..num_weights).map(|k| format!("w{k}.arb")));
    v
}

/// Counter place holding `n` tokens, one consumed per epoch.
pub fn gen_epoch_budget(n: u32) -> Result<Segment, BlueprintError> {
    if n == 0 {
        return Err(BlueprintError::Argument("epoch budget must be positive".into()));
    }
    let mut b = NetBuilder::new();
    let p = b.counter(BUDGET, n);
    b.set_count(p, n);
    Segment::new(
        "budget",
        Category::Infrastructure,
        b.build()?,
        vec![Port::control(PortRole::ControlOut, BUDGET)],
    )
}
