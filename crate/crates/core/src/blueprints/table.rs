use super::{int, BlueprintError, Rows, Value, ValueDomain};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableInput {
    pub wire: String,
    pub domain: ValueDomain,
    /// Read through read arcs instead of being consumed.
    pub read_only: bool,
}

impl TableInput {
    pub fn new(wire: &str, domain: ValueDomain) -> Self {
        TableInput {
            wire: wire.to_string(),
            domain,
            read_only: false,
        }
    }

    pub fn read_only(wire: &str, domain: ValueDomain) -> Self {
        TableInput {
            read_only: true,
            ..Self::new(wire, domain)
        }
    }
}

/// A total function over the product of finite input domains, possibly
/// with several output wires (each with its own column).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionTable {
    pub inputs: Vec<TableInput>,
    pub outputs: Vec<(String, ValueDomain)>,
    pub rows: Rows,
}

fn product_of(domains: &[&ValueDomain]) -> Vec<Vec<Value>> {
    let mut acc: Vec<Vec<Value>> = vec![vec![]];
    for d in domains {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                d.values().iter().map(move |v| {
                    let mut row = prefix.clone();
                    row.push(*v);
                    row
                })
            })
            .collect();
    }
    acc
}

impl FunctionTable {
    /// Tabulate `f` over all input combinations; each output domain is the
    /// set of values `f` actually produces in that column.
    pub fn from_fn(
        inputs: Vec<TableInput>,
        outputs: &[&str],
        f: impl Fn(&[Value]) -> Vec<Value>,
    ) -> Self {
        let domains: Vec<&ValueDomain> = inputs.iter().map(|i| &i.domain).collect();
        let mut rows = Rows::new();
        for combo in product_of(&domains) {
            let out = f(&combo);
            assert_eq!(out.len(), outputs.len(), "output arity");
            rows.insert(combo, out);
        }
        let outputs = outputs
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let dom = ValueDomain::new(rows.values().map(|o| o[k])).expect("at least one row");
                (w.to_string(), dom)
            })
            .collect();
        FunctionTable {
            inputs,
            outputs,
            rows,
        }
    }

    pub fn unary(input: TableInput, output: &str, f: impl Fn(Value) -> Value) -> Self {
        Self::from_fn(vec![input], &[output], |v| vec![f(v[0])])
    }

    /// Rename the input and output wires, in order.
    pub fn wired(mut self, inputs: &[&str], outputs: &[&str]) -> Self {
        assert_eq!(inputs.len(), self.inputs.len(), "input arity");
        assert_eq!(outputs.len(), self.outputs.len(), "output arity");
        for (i, w) in self.inputs.iter_mut().zip(inputs) {
            i.wire = w.to_string();
        }
        for (o, w) in self.outputs.iter_mut().zip(outputs) {
            o.0 = w.to_string();
        }
        self
    }

    /// Mark input `k` as read through read arcs.
    pub fn read_only(mut self, k: usize) -> Self {
        self.inputs[k].read_only = true;
        self
    }

    /// Replace output `wire` by one output per entry of `copies`, all
    /// carrying the same column.
    pub fn fan_out(mut self, wire: &str, copies: &[String]) -> Self {
        let k = self
            .outputs
            .iter()
            .position(|(w, _)| w == wire)
            .unwrap_or_else(|| panic!("no output wire {wire}"));
        let dom = self.outputs[k].1.clone();
        let mut outputs = self.outputs[..k].to_vec();
        outputs.extend(copies.iter().map(|c| (c.clone(), dom.clone())));
        outputs.extend(self.outputs[k + 1..].iter().cloned());
        for row in self.rows.values_mut() {
            let v = row[k];
            let mut out = row[..k].to_vec();
            out.extend(std::iter::repeat_n(v, copies.len()));
            out.extend(row[k + 1..].iter().cloned());
            *row = out;
        }
        self.outputs = outputs;
        self
    }

    /// Add an extra output carrying a copy of output `wire`.
    pub fn with_copy(self, wire: &str, copy: &str) -> Self {
        self.fan_out(wire, &[wire.to_string(), copy.to_string()])
    }

    pub fn output_domain(&self, wire: &str) -> Option<&ValueDomain> {
        self.outputs.iter().find(|(w, _)| w == wire).map(|(_, d)| d)
    }

    pub fn eval(&self, inputs: &[Value]) -> Option<&[Value]> {
        self.rows.get(inputs).map(Vec::as_slice)
    }

    /// Totality over the input product and closure of every output column.
    pub fn check(&self, name: &str) -> Result<(), BlueprintError> {
        let domains: Vec<&ValueDomain> = self.inputs.iter().map(|i| &i.domain).collect();
        for combo in product_of(&domains) {
            let Some(out) = self.rows.get(&combo) else {
                let text: Vec<String> = combo.iter().map(super::fmt_value).collect();
                return Err(BlueprintError::NotTotal(name.to_string(), text.join(",")));
            };
            for (v, (w, d)) in out.iter().zip(&self.outputs) {
                if !d.contains(v) {
                    return Err(BlueprintError::OutsideDomain(
                        name.to_string(),
                        format!("{w}={}", super::fmt_value(v)),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn sign(x: Value) -> Value {
    if x >= int(0) {
        int(1)
    } else {
        int(-1)
    }
}

pub fn table_sign(domain: &ValueDomain) -> FunctionTable {
    FunctionTable::unary(TableInput::new("in", domain.clone()), "out", sign)
}

pub fn table_hardtanh(domain: &ValueDomain) -> FunctionTable {
    FunctionTable::unary(TableInput::new("in", domain.clone()), "out", |x| {
        x.clamp(int(-1), int(1))
    })
}

pub fn table_product(a: &ValueDomain, b: &ValueDomain) -> FunctionTable {
    FunctionTable::from_fn(
        vec![TableInput::new("a", a.clone()), TableInput::new("b", b.clone())],
        &["out"],
        |v| vec![v[0] * v[1]],
    )
}

pub fn table_sum(domains: &[ValueDomain]) -> FunctionTable {
    let inputs = domains
        .iter()
        .enumerate()
        .map(|(k, d)| TableInput::new(&format!("in{k}"), d.clone()))
        .collect();
    FunctionTable::from_fn(inputs, &["out"], |v| vec![v.iter().copied().sum()])
}

/// `dL/dz` for the hinge loss: `-y` when `y*z < 1`, else 0.
pub fn dloss(y: Value, z: Value) -> Value {
    if y * z < int(1) {
        -y
    } else {
        int(0)
    }
}

pub fn table_dloss(z: &ValueDomain) -> FunctionTable {
    FunctionTable::from_fn(
        vec![
            TableInput::new("y", ValueDomain::sign()),
            TableInput::new("z", z.clone()),
        ],
        &["dLdz"],
        |v| vec![dloss(v[0], v[1])],
    )
}

/// Hinge loss in three stages: `(y, z) -> (y*z, dL/dz)`, `1 - y*z`, and
/// clipping at 0.
pub fn table_hinge(z: &ValueDomain) -> (FunctionTable, FunctionTable, FunctionTable) {
    let mul = FunctionTable::from_fn(
        vec![
            TableInput::new("y", ValueDomain::sign()),
            TableInput::new("z", z.clone()),
        ],
        &["yz", "dLdz"],
        |v| vec![v[0] * v[1], dloss(v[0], v[1])],
    );
    let yz = mul.output_domain("yz").unwrap().clone();
    let sub = FunctionTable::unary(TableInput::new("yz", yz), "margin", |x| int(1) - x);
    let margin = sub.output_domain("margin").unwrap().clone();
    let clip = FunctionTable::unary(TableInput::new("margin", margin), "L", |x| x.max(int(0)));
    (mul, sub, clip)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradKind {
    /// `dL/dz * W_bx * 1 * a`
    InputHidden,
    /// `dL/dz * x`
    HiddenOutput,
    /// `dL/dW_b * STE`
    Real,
}

pub fn table_grad(kind: GradKind) -> FunctionTable {
    let t = ValueDomain::ternary;
    match kind {
        GradKind::InputHidden => FunctionTable::from_fn(
            vec![
                TableInput::new("dLdz", t()),
                TableInput::new("wbx", ValueDomain::sign()),
                TableInput::new("a", ValueDomain::bit()),
            ],
            &["g"],
            |v| vec![v[0] * v[1] * v[2]],
        ),
        GradKind::HiddenOutput => FunctionTable::from_fn(
            vec![
                TableInput::new("dLdz", t()),
                TableInput::new("x", ValueDomain::sign()),
            ],
            &["g"],
            |v| vec![v[0] * v[1]],
        ),
        GradKind::Real => FunctionTable::from_fn(
            vec![
                TableInput::new("gb", t()),
                TableInput::new("ste", ValueDomain::bit()),
            ],
            &["g"],
            |v| vec![v[0] * v[1]],
        ),
    }
}

/// `J = eta * g` with the learning rate read, not consumed.
pub fn table_lr_product(rates: &ValueDomain) -> FunctionTable {
    FunctionTable::from_fn(
        vec![
            TableInput::read_only("lr", rates.clone()),
            TableInput::new("g", ValueDomain::ternary()),
        ],
        &["J"],
        |v| vec![v[0] * v[1]],
    )
}
