use super::{fmt_value, value_place, BlueprintError, Category, FunctionTable, Port, PortRole, Segment};
use crate::petri::NetBuilder;

#[derive(Clone, Debug)]
pub struct MapperOptions {
    pub category: Category,
    /// Places every transition consumes in addition to its inputs.
    pub controls_in: Vec<String>,
    /// Places every transition produces in addition to its outputs.
    pub controls_out: Vec<String>,
}

impl Default for MapperOptions {
    fn default() -> Self {
        MapperOptions {
            category: Category::Inference,
            controls_in: Vec::new(),
            controls_out: Vec::new(),
        }
    }
}

/// One transition per input combination, consuming (or reading) the input
/// value places and producing the row's output value places.
pub fn gen_function_mapper(name: &str, table: &FunctionTable) -> Result<Segment, BlueprintError> {
    gen_function_mapper_with(name, table, &MapperOptions::default())
}

pub fn gen_function_mapper_with(
    name: &str,
    table: &FunctionTable,
    opts: &MapperOptions,
) -> Result<Segment, BlueprintError> {
    table.check(name)?;
    let mut b = NetBuilder::new();
    let mut ports = Vec::new();
    for input in &table.inputs {
        for p in input.domain.places(&input.wire) {
            b.ensure_place(&p);
        }
        ports.push(Port::value(PortRole::ValueIn, &input.wire, &input.domain));
    }
    for (wire, dom) in &table.outputs {
        for p in dom.places(wire) {
            b.ensure_place(&p);
        }
        ports.push(Port::value(PortRole::ValueOut, wire, dom));
    }
    for c in &opts.controls_in {
        b.ensure_place(c);
        ports.push(Port::control(PortRole::ControlIn, c));
    }
    for c in &opts.controls_out {
        b.ensure_place(c);
        ports.push(Port::control(PortRole::ControlOut, c));
    }
    for (combo, out) in &table.rows {
        let vals: Vec<String> = combo.iter().map(fmt_value).collect();
        let t = b.transition(
            format!("{name}[{}]", vals.join(",")),
            format!("{name}({})", vals.join(",")),
        );
        for (input, v) in table.inputs.iter().zip(combo) {
            let p = b.ensure_place(&value_place(&input.wire, v));
            if input.read_only {
                b.read(p, t);
            } else {
                b.consume(p, t);
            }
        }
        for c in &opts.controls_in {
            let p = b.ensure_place(c);
            b.consume(p, t);
        }
        for ((wire, _), v) in table.outputs.iter().zip(out) {
            let p = b.ensure_place(&value_place(wire, v));
            b.produce(t, p);
        }
        for c in &opts.controls_out {
            let p = b.ensure_place(c);
            b.produce(t, p);
        }
    }
    Segment::new(name, opts.category, b.build()?, ports)
}
