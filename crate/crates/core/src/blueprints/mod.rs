//! Generators for every building block of the training net and their
//! composition into the full model.
//!
//! Values travel as one-hot tokens: a wire `w` over domain `D` is the set of
//! places `w=v` for `v` in `D`. Segments refer to the wires they share by
//! these global names and prefix everything private with their own name, so
//! composition is fusion by place name.

mod compose;
mod inference;
mod instrument;
mod mapper;
mod spec;
mod table;
mod training;
mod update;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use thiserror::Error;

use crate::petri::{Net, NetError};

pub use compose::{
    bnn_segments, compose_bnn, fuse_segments, hidden_neuron, BuildOptions, Layout, WeightInit,
};
pub use inference::{
    bit_place, gen_ack, gen_input_loader, gen_weight_register, LoaderOptions, RegisterOutputs,
    BUDGET, DATA_VEC, EPOCH,
};
pub use instrument::{gen_metric_instrument, recorder_place, InstrumentPlan, RecorderGroup};
pub use mapper::{gen_function_mapper, MapperOptions};
pub use spec::{DataRow, NetworkSpec, SpecError};
pub use table::{
    table_dloss, table_grad, table_hardtanh, table_hinge, table_lr_product, table_product,
    table_sign, table_sum, FunctionTable, GradKind, TableInput,
};
pub use training::{
    gen_epoch_budget, gen_learning_rate, gen_loss_fork, gen_next_vector, gen_ste, NEXT_VECTOR,
    next_vector_outputs,
};
pub use update::{gen_weight_update, UpdatePorts};

pub type Value = Rational64;

pub fn int(n: i64) -> Value {
    Value::from_integer(n)
}

pub fn tenths(n: i64) -> Value {
    Value::new(n, 10)
}

/// Canonical text of a value: integers plainly, terminating fractions as
/// decimals, anything else as `n/d`.
pub fn fmt_value(v: &Value) -> String {
    if v.is_integer() {
        return v.numer().to_string();
    }
    let Some(scale) = (1..=18u32).find(|&k| (v * Value::from_integer(10i64.pow(k))).is_integer())
    else {
        return format!("{}/{}", v.numer(), v.denom());
    };
    let scaled = (v * Value::from_integer(10i64.pow(scale))).to_integer();
    let neg = scaled < 0;
    let digits = format!("{:0width$}", scaled.abs(), width = scale as usize + 1);
    let (ip, fp) = digits.split_at(digits.len() - scale as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, ip, fp)
}

/// Inverse of [`fmt_value`].
pub fn parse_value(s: &str) -> Option<Value> {
    if let Some((n, d)) = s.split_once('/') {
        let d: i64 = d.parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Value::new(n.parse().ok()?, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let whole: i64 = ip.trim_start_matches('-').parse().ok()?;
        let frac: i64 = if fp.is_empty() { 0 } else { fp.parse().ok()? };
        let scale = 10i64.checked_pow(fp.len() as u32)?;
        let v = Value::from_integer(whole) + Value::new(frac, scale);
        return Some(if neg { -v } else { v });
    }
    s.parse().ok().map(Value::from_integer)
}

/// Name of the place encoding `v` on wire `wire`.
pub fn value_place(wire: &str, v: &Value) -> String {
    format!("{wire}={}", fmt_value(v))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ValueDomain {
    values: Vec<Value>,
}

impl ValueDomain {
    /// Sorted, deduplicated domain; empty input is rejected.
    pub fn new(values: impl IntoIterator<Item = Value>) -> Result<Self, BlueprintError> {
        let mut values: Vec<Value> = values.into_iter().collect();
        values.sort();
        values.dedup();
        if values.is_empty() {
            return Err(BlueprintError::EmptyDomain);
        }
        Ok(ValueDomain { values })
    }

    pub fn ints(values: impl IntoIterator<Item = i64>) -> Self {
        Self::new(values.into_iter().map(int)).expect("nonempty integer domain")
    }

    pub fn range(lo: i64, hi: i64) -> Self {
        Self::ints(lo..=hi)
    }

    pub fn bit() -> Self {
        Self::ints([0, 1])
    }

    pub fn sign() -> Self {
        Self::ints([-1, 1])
    }

    pub fn ternary() -> Self {
        Self::ints([-1, 0, 1])
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.values.binary_search(v).is_ok()
    }

    pub fn places(&self, wire: &str) -> Vec<String> {
        self.values.iter().map(|v| value_place(wire, v)).collect()
    }
}

impl fmt::Display for ValueDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(fmt_value).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PortRole {
    ValueIn,
    ValueOut,
    ControlIn,
    ControlOut,
    /// Bit buffers owned by this segment and exposed to others.
    StateOwned,
    /// Bit buffers owned by another segment and read or rewritten here.
    StateShared,
}

impl PortRole {
    /// Whether the port's places are counted as part of this segment.
    pub fn owned(self) -> bool {
        matches!(
            self,
            PortRole::ValueOut | PortRole::ControlOut | PortRole::StateOwned
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub role: PortRole,
    pub places: Vec<String>,
    pub domain: Option<ValueDomain>,
}

impl Port {
    pub fn value(role: PortRole, wire: &str, domain: &ValueDomain) -> Self {
        Port {
            name: wire.to_string(),
            role,
            places: domain.places(wire),
            domain: Some(domain.clone()),
        }
    }

    pub fn control(role: PortRole, place: &str) -> Self {
        Port {
            name: place.to_string(),
            role,
            places: vec![place.to_string()],
            domain: None,
        }
    }

    pub fn state(role: PortRole, name: &str, places: Vec<String>) -> Self {
        Port {
            name: name.to_string(),
            role,
            places,
            domain: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Category {
    Inference,
    Training,
    Infrastructure,
}

#[derive(Clone, Debug)]
pub struct Segment {
    pub name: String,
    pub category: Category,
    pub net: Net,
    pub ports: Vec<Port>,
}

impl Segment {
    pub fn new(name: &str, category: Category, net: Net, ports: Vec<Port>) -> Result<Self, BlueprintError> {
        for port in &ports {
            for p in &port.places {
                if net.place_id(p).is_none() {
                    return Err(BlueprintError::MissingPortPlace(name.to_string(), p.clone()));
                }
            }
        }
        Ok(Segment {
            name: name.to_string(),
            category,
            net,
            ports,
        })
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn ports_with(&self, role: PortRole) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(move |p| p.role == role)
    }

    /// Places counted for this segment: everything except places of ports
    /// it merely receives from other segments.
    pub fn owned_places(&self) -> usize {
        let foreign: std::collections::HashSet<&str> = self
            .ports
            .iter()
            .filter(|p| !p.role.owned())
            .flat_map(|p| p.places.iter().map(String::as_str))
            .collect();
        self.net
            .places()
            .iter()
            .filter(|p| !foreign.contains(p.name.as_str()))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlueprintError {
    #[error("value domain is empty")]
    EmptyDomain,
    #[error("function table `{0}` is not total: missing row {1}")]
    NotTotal(String, String),
    #[error("function table `{0}` maps to {1}, outside its output domain")]
    OutsideDomain(String, String),
    #[error("segment `{0}` declares port place `{1}` that is not in its net")]
    MissingPortPlace(String, String),
    #[error("invalid generator argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("port mismatch while composing: {0}")]
    Net(#[from] NetError),
}

/// Ordered map from input-value tuples to output-value tuples.
pub type Rows = BTreeMap<Vec<Value>, Vec<Value>>;

#[cfg(test)]
mod tests;
