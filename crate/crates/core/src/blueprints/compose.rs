use serde::{Deserialize, Serialize};

use super::inference::{gen_ack, gen_input_loader, gen_weight_register, LoaderOptions, RegisterOutputs};
use super::instrument::{gen_metric_instrument, InstrumentPlan};
use super::mapper::{gen_function_mapper, gen_function_mapper_with, MapperOptions};
use super::table::{
    table_grad, table_hardtanh, table_hinge, table_lr_product, table_product, table_sign, table_sum,
    FunctionTable, GradKind, TableInput,
};
use super::training::{gen_epoch_budget, gen_learning_rate, gen_loss_fork, gen_next_vector, gen_ste, next_vector_outputs};
use super::update::{gen_weight_update, UpdatePorts};
use super::{int, tenths, BlueprintError, Category, NetworkSpec, Segment, ValueDomain};
use crate::petri::{Net, NetBuilder};

/// How the weight registers obtain their first value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightInit {
    /// Bits start at the spec's initial weights, binarization ready.
    #[default]
    Preset,
    /// Bits start at the spec's initial weights but may be toggled freely
    /// until `set_weights` fires.
    FreeChoice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub instrument: bool,
    pub weight_init: WeightInit,
}

/// Wire names and value domains of the composed model.
#[derive(Clone, Debug)]
pub struct Layout {
    pub features: usize,
    pub hidden: usize,
    pub rates: Vec<u8>,
}

impl Layout {
    pub fn new(spec: &NetworkSpec) -> Self {
        Layout {
            features: spec.features,
            hidden: spec.hidden,
            rates: spec.rates(),
        }
    }

    pub fn num_weights(&self) -> usize {
        self.features * self.hidden + self.hidden
    }

    pub fn w_in(&self, i: usize, j: usize) -> usize {
        i * self.features + j
    }

    pub fn w_out(&self, i: usize) -> usize {
        self.features * self.hidden + i
    }

    /// `(i, Some(j))` for input-hidden weights, `(i, None)` for
    /// hidden-output weights.
    pub fn weight_role(&self, k: usize) -> (usize, Option<usize>) {
        if k < self.features * self.hidden {
            (k / self.features, Some(k % self.features))
        } else {
            (k - self.features * self.hidden, None)
        }
    }

    pub fn z_domain(&self) -> ValueDomain {
        ValueDomain::ints((0..=self.hidden as i64).map(|n| 2 * n - self.hidden as i64))
    }

    pub fn loss_domain(&self) -> ValueDomain {
        let (_, _, clip) = table_hinge(&self.z_domain());
        clip.output_domain("L").expect("clip output").clone()
    }

    pub fn rate_domain(&self) -> ValueDomain {
        ValueDomain::new(self.rates.iter().map(|&r| tenths(r as i64))).expect("validated rates")
    }

    pub fn j_domain(&self) -> ValueDomain {
        table_lr_product(&self.rate_domain())
            .output_domain("J")
            .expect("product output")
            .clone()
    }

    /// Copies of feature `j`: one per hidden product, one per input-hidden
    /// gradient.
    pub fn feature_wires(&self, j: usize) -> Vec<String> {
        let mut w: Vec<String> = (0..self.hidden).map(|i| format!("a{j}@p{i}")).collect();
        w.extend((0..self.hidden).map(|i| format!("a{j}@g{i}")));
        w
    }

    /// Copies of binary weight `k`.
    pub fn weight_wires(&self, k: usize) -> Vec<String> {
        match self.weight_role(k) {
            (_, Some(_)) => vec![format!("wb{k}@p")],
            (_, None) => std::iter::once(format!("wb{k}@o"))
                .chain((0..self.features).map(|j| format!("wb{k}@g{j}")))
                .collect(),
        }
    }
}

fn rec(instrument: bool, table: FunctionTable, wire: &str, name: &str) -> FunctionTable {
    if instrument {
        table.with_copy(wire, &format!("rec.{name}"))
    } else {
        table
    }
}

/// Left-to-right sum of `inputs` (each over `dom`) onto `out`, as a chain
/// of two-input adders named `{name}`, `{name}.1`, ...
fn sum_tree(
    name: &str,
    inputs: &[String],
    dom: &ValueDomain,
    out: &str,
    instrument: Option<&str>,
) -> Result<Vec<Segment>, BlueprintError> {
    let mut segs = Vec::new();
    if inputs.len() == 1 {
        let t = FunctionTable::unary(TableInput::new(&inputs[0], dom.clone()), out, |v| v);
        let t = rec(instrument.is_some(), t, out, instrument.unwrap_or(""));
        segs.push(gen_function_mapper(name, &t)?);
        return Ok(segs);
    }
    let mut acc = inputs[0].clone();
    let mut acc_dom = dom.clone();
    for (m, input) in inputs.iter().enumerate().skip(1) {
        let last = m + 1 == inputs.len();
        let wire = if last { out.to_string() } else { format!("{out}.{m}") };
        let t = table_sum(&[acc_dom.clone(), dom.clone()]).wired(&[&acc, input], &[&wire]);
        let next_dom = t.output_domain(&wire).expect("sum output").clone();
        let t = match (last, instrument) {
            (true, Some(r)) => rec(true, t, &wire, r),
            _ => t,
        };
        let seg_name = if last { name.to_string() } else { format!("{name}.{m}") };
        segs.push(gen_function_mapper(&seg_name, &t)?);
        acc = wire;
        acc_dom = next_dom;
    }
    Ok(segs)
}

fn register_and_ste(
    spec: &NetworkSpec,
    layout: &Layout,
    k: usize,
    opts: &BuildOptions,
) -> Result<Vec<Segment>, BlueprintError> {
    let initial = spec.resolved_weights()[k];
    let out = RegisterOutputs {
        copies: layout.weight_wires(k),
        instrument: opts.instrument,
    };
    Ok(vec![
        gen_weight_register(k, initial, opts.weight_init, &out)?,
        gen_ste(k, opts.instrument)?,
    ])
}

/// Segments of hidden neuron `i`: its weight registers and STEs, the
/// input products, the sum, hard-tanh, sign and the output product.
pub fn hidden_neuron(spec: &NetworkSpec, i: usize, opts: &BuildOptions) -> Result<Vec<Segment>, BlueprintError> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let ins = opts.instrument;
    let mut segs = Vec::new();
    for j in 0..layout.features {
        segs.extend(register_and_ste(spec, &layout, layout.w_in(i, j), opts)?);
    }
    segs.extend(register_and_ste(spec, &layout, layout.w_out(i), opts)?);

    let bit = ValueDomain::bit();
    let sign = ValueDomain::sign();
    let mut products = Vec::new();
    for j in 0..layout.features {
        let wire = format!("p{i}.{j}");
        let t = table_product(&bit, &sign).wired(
            &[&format!("a{j}@p{i}"), &format!("wb{}@p", layout.w_in(i, j))],
            &[&wire],
        );
        segs.push(gen_function_mapper(&format!("mul{i}.{j}"), &t)?);
        products.push(wire);
    }
    let s = format!("s{i}");
    let rec_s = format!("s{i}");
    segs.extend(sum_tree(&format!("sum{i}"), &products, &ValueDomain::ternary(), &s, ins.then_some(&rec_s))?);
    let sdom = ValueDomain::range(-(layout.features as i64), layout.features as i64);
    let t = table_hardtanh(&sdom).wired(&[&s], &[&format!("t{i}")]);
    segs.push(gen_function_mapper(&format!("tanh{i}"), &t)?);
    let t = table_sign(&ValueDomain::ternary())
        .wired(&[&format!("t{i}")], &[&format!("x{i}@o")])
        .with_copy(&format!("x{i}@o"), &format!("x{i}@g"));
    let t = rec(ins, t, &format!("x{i}@o"), &format!("x{i}"));
    segs.push(gen_function_mapper(&format!("sign{i}"), &t)?);
    let t = table_product(&sign, &sign).wired(
        &[&format!("x{i}@o"), &format!("wb{}@o", layout.w_out(i))],
        &[&format!("o{i}")],
    );
    let t = rec(ins, t, &format!("o{i}"), &format!("o{i}"));
    segs.push(gen_function_mapper(&format!("mulx{i}"), &t)?);
    Ok(segs)
}

/// Every segment of the training net, in composition order.
pub fn bnn_segments(spec: &NetworkSpec, opts: &BuildOptions) -> Result<Vec<Segment>, BlueprintError> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let ins = opts.instrument;
    let nw = layout.num_weights();
    let mut segs = Vec::new();

    let feature_wires: Vec<Vec<String>> = (0..layout.features).map(|j| layout.feature_wires(j)).collect();
    let loader_opts = LoaderOptions {
        budget: spec.epoch_budget,
        instrument: ins,
        epoch_bound: spec.epoch_budget.unwrap_or(u32::MAX),
    };
    segs.push(gen_input_loader(&spec.dataset, &feature_wires, &loader_opts)?);
    for i in 0..layout.hidden {
        segs.extend(hidden_neuron(spec, i, opts)?);
    }

    // Output sum, prediction and loss.
    let outs: Vec<String> = (0..layout.hidden).map(|i| format!("o{i}")).collect();
    segs.extend(sum_tree("zsum", &outs, &ValueDomain::sign(), "z", ins.then_some("z"))?);
    let zdom = layout.z_domain();
    let pred = FunctionTable::from_fn(vec![TableInput::new("z", zdom.clone())], &["yhat", "z@l"], |v| {
        vec![if v[0] >= int(0) { int(1) } else { int(-1) }, v[0]]
    });
    let pred = rec(ins, pred, "yhat", "yhat");
    segs.push(gen_function_mapper("pred", &pred)?);
    segs.push(gen_ack("pred_ack", "yhat", &ValueDomain::sign(), "pred_done")?);

    let (mul, sub, clip) = table_hinge(&zdom);
    let mul = mul.wired(&["y", "z@l"], &["yz", "dLdz"]);
    segs.push(gen_function_mapper_with(
        "hinge.mul",
        &mul,
        &MapperOptions {
            category: Category::Training,
            controls_in: vec!["pred_done".into()],
            controls_out: vec![],
        },
    )?);
    let training = MapperOptions {
        category: Category::Training,
        ..MapperOptions::default()
    };
    segs.push(gen_function_mapper_with("hinge.sub", &sub, &training)?);
    let clip = rec(ins, clip, "L", "L");
    segs.push(gen_function_mapper_with("hinge.clip", &clip, &training)?);
    segs.push(gen_ack("loss_ack", "L", &layout.loss_domain(), "loss_done")?);

    // Backward pass and updates, one chain per weight.
    let forks: Vec<String> = (0..nw).map(|k| format!("dL@{k}")).collect();
    segs.push(gen_loss_fork(&forks, ins)?);
    segs.push(gen_learning_rate(&layout.rates, ins)?);
    let j_dom = layout.j_domain();
    for (k, fork) in forks.iter().enumerate() {
        let gb = format!("gb{k}");
        let t = match layout.weight_role(k) {
            (i, Some(j)) => table_grad(GradKind::InputHidden).wired(
                &[fork, &format!("wb{}@g{j}", layout.w_out(i)), &format!("a{j}@g{i}")],
                &[&gb],
            ),
            (i, None) => table_grad(GradKind::HiddenOutput).wired(&[fork, &format!("x{i}@g")], &[&gb]),
        };
        let t = rec(ins, t, &gb, &gb);
        segs.push(gen_function_mapper_with(&format!("grad{k}"), &t, &training)?);
        let gr = format!("gr{k}");
        let t = table_grad(GradKind::Real).wired(&[&gb, &format!("ste{k}")], &[&gr]);
        let t = rec(ins, t, &gr, &gr);
        segs.push(gen_function_mapper_with(&format!("real{k}"), &t, &training)?);
        let jw = format!("J{k}");
        let t = table_lr_product(&layout.rate_domain()).wired(&["lr", &gr], &[&jw]);
        let t = rec(ins, t, &jw, &jw);
        segs.push(gen_function_mapper_with(&format!("lrg{k}"), &t, &training)?);
        segs.push(gen_weight_update(k, &UpdatePorts::for_weight(k, j_dom.clone()))?);
    }

    if ins {
        let plan = InstrumentPlan::new(spec);
        let ready: Vec<String> = (0..nw).map(|k| format!("ready{k}")).collect();
        segs.push(gen_next_vector(&ready, &[plan.flush_start()])?);
        segs.push(gen_metric_instrument(spec)?);
    } else {
        let done: Vec<String> = (0..nw).map(|k| format!("done{k}")).collect();
        segs.push(gen_next_vector(&done, &next_vector_outputs(nw))?);
    }
    if let Some(n) = spec.epoch_budget {
        segs.push(gen_epoch_budget(n)?);
    }
    Ok(segs)
}

/// Fuse segments by place name into one net.
pub fn fuse_segments(segs: &[Segment]) -> Result<Net, BlueprintError> {
    let mut b = NetBuilder::new();
    for s in segs {
        b.absorb_by_name(&s.net)?;
    }
    Ok(b.build()?)
}

/// The full training net for `spec`.
pub fn compose_bnn(spec: &NetworkSpec, opts: &BuildOptions) -> Result<Net, BlueprintError> {
    fuse_segments(&bnn_segments(spec, opts)?)
}
