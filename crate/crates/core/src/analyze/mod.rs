//! Size accounting for generated nets and the per-unit complexity estimator
//! for larger architectures.

use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blueprints::{bnn_segments, fuse_segments, hidden_neuron, BlueprintError, BuildOptions, NetworkSpec, Segment};
use crate::petri::Net;


#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
    #[error("architecture `{0}` has a zero dimension")]
    Shape(String),
    #[error("unit sizes need F·H > 0")]
    ZeroUnits,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRow {
    pub name: String,
    pub places: u64,
    pub transitions: u64,
    pub arcs: u64,
    pub total: u64,
}

impl SizeRow {
    pub fn new(name: impl Into<String>, places: u64, transitions: u64, arcs: u64) -> Self {
        SizeRow {
            name: name.into(),
            places,
            transitions,
            arcs,
            total: places + transitions + arcs,
        }
    }

    /// Counts of a whole net; a read arc is one arc.
    pub fn of_net(name: impl Into<String>, net: &Net) -> Self {
        SizeRow::new(
            name,
            net.num_places() as u64,
            net.num_transitions() as u64,
            net.num_arcs() as u64,
        )
    }

    /// Counts of a segment, leaving out places it only receives.
    pub fn of_segment(s: &Segment) -> Self {
        SizeRow::new(
            s.name.clone(),
            s.owned_places() as u64,
            s.net.num_transitions() as u64,
            s.net.num_arcs() as u64,
        )
    }

    /// Relative deviation of each count from `reference`, in percent:
    /// places, transitions, arcs, total.
    pub fn deviation(&self, reference: &SizeRow) -> [f64; 4] {
        let d = |a: u64, b: u64| 100.0 * (a as f64 - b as f64) / b as f64;
        [
            d(self.places, reference.places),
            d(self.transitions, reference.transitions),
            d(self.arcs, reference.arcs),
            d(self.total, reference.total),
        ]
    }
}

impl fmt::Display for SizeRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} places, {} transitions, {} arcs, total {}",
            self.name, self.places, self.transitions, self.arcs, self.total
        )
    }
}

/// One row per segment, then a `total` row counting the fused net.
pub fn size_report(segs: &[Segment]) -> Result<Vec<SizeRow>, AnalyzeError> {
    let mut rows: Vec<SizeRow> = segs.iter().map(SizeRow::of_segment).collect();
    rows.push(SizeRow::of_net("total", &fuse_segments(segs)?));
    Ok(rows)
}

fn core_spec(spec: &NetworkSpec) -> NetworkSpec {
    NetworkSpec {
        epoch_budget: None,
        ..spec.clone()
    }
}

/// The model without budget and instrument, and with the instrument.
pub fn model_sizes(spec: &NetworkSpec) -> Result<(SizeRow, SizeRow), AnalyzeError> {
    let spec = core_spec(spec);
    let core = fuse_segments(&bnn_segments(&spec, &BuildOptions::default())?)?;
    let inst = fuse_segments(&bnn_segments(
        &spec,
        &BuildOptions {
            instrument: true,
            ..BuildOptions::default()
        },
    )?)?;
    Ok((
        SizeRow::of_net("Full PN BNN Model", &core),
        SizeRow::of_net("Full model with instrument", &inst),
    ))
}

/// Segment groups in the order of the published size table, each as
/// `(row name, segment names)`; several names are fused into one row.
const TABLE_ROWS: &[(&str, &[&str])] = &[
    ("Inputs", &["load"]),
    ("Weights", &["w0"]),
    ("mult a/b", &["mul0.0"]),
    ("Sum of mult a and b", &["sum0"]),
    ("TanH function", &["tanh0"]),
    ("Sign function", &["sign0"]),
    ("mult x", &["mulx0"]),
    ("STE", &["ste0"]),
    ("Hidden Neuron", &[]),
    ("Output Sum", &["zsum"]),
    ("Prediction", &["pred", "pred_ack"]),
    ("Hinge Loss", &["hinge.mul", "hinge.sub", "hinge.clip", "loss_ack"]),
    ("Loss derivative", &["fork"]),
    ("gradient w.r.t W_bA/B", &["grad0"]),
    ("gradient w.r.t W_bX", &[]),
    ("gradient w.r.t W_r", &["real0"]),
    ("Learning rate", &["lr"]),
    ("LR*gradient", &["lrg0"]),
    ("Weight update", &["u0"]),
    ("Next vector", &["next_vector"]),
];

fn group_row(name: &str, segs: &[&Segment]) -> Result<SizeRow, AnalyzeError> {
    if let [s] = segs {
        return Ok(SizeRow {
            name: name.to_string(),
            ..SizeRow::of_segment(s)
        });
    }
    let owned: Vec<Segment> = segs.iter().map(|&s| s.clone()).collect();
    let net = fuse_segments(&owned)?;
    Ok(SizeRow::of_net(name, &net))
}

/// Rows shaped like the published per-segment size table for `spec`,
/// ending with the core model row.
pub fn table1_report(spec: &NetworkSpec) -> Result<Vec<SizeRow>, AnalyzeError> {
    let spec = core_spec(spec);
    let opts = BuildOptions::default();
    let segs = bnn_segments(&spec, &opts)?;
    let by_name = |n: &str| segs.iter().find(|s| s.name == n);
    let first_output_grad = format!("grad{}", spec.features * spec.hidden);
    let mut rows = Vec::new();
    for &(row, names) in TABLE_ROWS {
        let group: Vec<&Segment> = match row {
            "Hidden Neuron" => {
                let h = hidden_neuron(&spec, 0, &opts)?;
                rows.push(group_row(row, &h.iter().collect::<Vec<_>>())?);
                continue;
            }
            "gradient w.r.t W_bX" => by_name(&first_output_grad).into_iter().collect(),
            _ => names.iter().filter_map(|n| by_name(n)).collect(),
        };
        if !group.is_empty() {
            rows.push(group_row(row, &group)?);
        }
    }
    rows.push(SizeRow::of_net("Full PN BNN Model", &fuse_segments(&segs)?));
    Ok(rows)
}

/// A feed-forward architecture: `layer_sizes` lists the hidden layers and
/// then the output layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub name: String,
    pub input_features: u64,
    pub layer_sizes: Vec<u64>,
}

impl ArchitectureSpec {
    pub fn new(name: impl Into<String>, input_features: u64, layer_sizes: &[u64]) -> Self {
        ArchitectureSpec {
            name: name.into(),
            input_features,
            layer_sizes: layer_sizes.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), AnalyzeError> {
        if self.input_features == 0 || self.layer_sizes.is_empty() || self.layer_sizes.contains(&0) {
            return Err(AnalyzeError::Shape(self.name.clone()));
        }
        Ok(())
    }

    /// Hidden plus output neurons.
    pub fn neurons(&self) -> u64 {
        self.layer_sizes.iter().sum()
    }

    /// Number of (input, neuron) connections over all layers.
    pub fn unit_count(&self) -> u64 {
        let mut fan_in = self.input_features;
        let mut n = 0;
        for &l in &self.layer_sizes {
            n += fan_in * l;
            fan_in = l;
        }
        n
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}x{}", self.name, self.neurons(), self.input_features)
    }
}

/// Hidden layer shapes of the published estimates.
pub const PRESET_HIDDEN: [&[u64]; 3] = [&[128], &[256], &[256, 128]];

/// Datasets of the published estimates as `(name, inputs, outputs)`.
pub const PRESET_DATASETS: [(&str, u64, u64); 3] = [("KWS6", 377, 6), ("CIFAR2", 1024, 2), ("MNIST", 784, 10)];

/// The nine preset architectures, grouped by hidden shape.
pub fn table3_presets() -> Vec<ArchitectureSpec> {
    PRESET_HIDDEN
        .iter()
        .flat_map(|hidden| {
            PRESET_DATASETS.iter().map(move |&(name, inputs, outputs)| {
                let mut layers = hidden.to_vec();
                layers.push(outputs);
                ArchitectureSpec::new(name, inputs, &layers)
            })
        })
        .collect()
}

/// Model size per (input feature, neuron) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitSizes {
    pub places: Ratio<u64>,
    pub transitions: Ratio<u64>,
    pub arcs: Ratio<u64>,
    pub total: Ratio<u64>,
}

/// The published full-model size of the two-feature, two-neuron net.
pub fn published_full_model() -> SizeRow {
    SizeRow::new("Full PN BNN Model", 8243, 12598, 71370)
}

/// Divide a full-model row by `features · neurons`.
pub fn unit_sizes(row: &SizeRow, features: u64, neurons: u64) -> Result<UnitSizes, AnalyzeError> {
    let n = features * neurons;
    if n == 0 {
        return Err(AnalyzeError::ZeroUnits);
    }
    let r = |x: u64| Ratio::new(x, n);
    Ok(UnitSizes {
        places: r(row.places),
        transitions: r(row.transitions),
        arcs: r(row.arcs),
        total: r(row.places) + r(row.transitions) + r(row.arcs),
    })
}

fn scale(units: u64, per: &Ratio<u64>) -> u64 {
    (Ratio::from_integer(units) * per).round().to_integer()
}

/// Scale unit sizes by the architecture's unit count. Counts are rounded to
/// whole elements; `total` is the sum of the three rounded counts.
pub fn estimate(arch: &ArchitectureSpec, u: &UnitSizes) -> Result<SizeRow, AnalyzeError> {
    arch.validate()?;
    let n = arch.unit_count();
    Ok(SizeRow::new(
        arch.to_string(),
        scale(n, &u.places),
        scale(n, &u.transitions),
        scale(n, &u.arcs),
    ))
}

/// `x` in units of 10⁹ with three decimals.
pub fn billions(x: u64) -> String {
    format!("{:.3}", x as f64 / 1e9)
}

/// Ratio as a float, for display.
pub fn ratio_f64(r: &Ratio<u64>) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
