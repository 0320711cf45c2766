//! Per-cycle metrics as CSV and JSON.
//!
//! CSV columns, in this order, for `F` features, `H` hidden neurons and
//! `K = F·H + H` weights:
//!
//! | column | meaning |
//! |---|---|
//! | `epoch` | 1-based epoch |
//! | `vector` | index of the data row |
//! | `x0`..`x{F-1}` | input features |
//! | `y` | expected label |
//! | `s0`..`s{H-1}` | pre-activations |
//! | `a0`..`a{H-1}` | hard-tanh outputs |
//! | `o0`..`o{H-1}` | neuron outputs |
//! | `z` | output sum |
//! | `yhat` | prediction |
//! | `loss` | hinge loss |
//! | `dldz` | loss derivative |
//! | per weight `k`: `wb{k}`, `gb{k}`, `ste{k}`, `gr{k}`, `j{k}`, `w{k}` | binarized weight, binary gradient, STE mask, real gradient, update in tenths, updated weight as 8 hex digits |
//!
//! The JSON form mirrors [`StepMetrics`] with weights as `0x`-prefixed hex.

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::bitfloat::Fp32Bits;
use crate::refbnn::{StepMetrics, WeightMetrics};

pub fn csv_header(features: usize, hidden: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_string(), "vector".to_string()];
    h.extend((0..features).map(|j| format!("x{j}")));
    h.push("y".into());
    for p in ["s", "a", "o"] {
        h.extend((0..hidden).map(|i| format!("{p}{i}")));
    }
    h.extend(["z", "yhat", "loss", "dldz"].map(String::from));
    for k in 0..features * hidden + hidden {
        for p in ["wb", "gb", "ste", "gr", "j", "w"] {
            h.push(format!("{p}{k}"));
        }
    }
    h
}

fn record(m: &StepMetrics) -> Vec<String> {
    let mut r = vec![m.epoch.to_string(), m.vector_index.to_string()];
    r.extend(m.features.iter().map(u8::to_string));
    r.push(m.y_true.to_string());
    r.extend(m.pre_activations.iter().map(i32::to_string));
    r.extend(m.activations.iter().map(i8::to_string));
    r.extend(m.neuron_outputs.iter().map(i8::to_string));
    r.extend([m.output_sum.to_string(), m.prediction.to_string(), m.loss.to_string(), m.dldz.to_string()]);
    for w in &m.weights {
        r.extend([
            w.binary.to_string(),
            w.binary_grad.to_string(),
            w.ste.to_string(),
            w.real_grad.to_string(),
            w.j.to_string(),
            w.updated.to_string(),
        ]);
    }
    r
}

fn csv_err(e: impl std::fmt::Display) -> IoError {
    IoError::Csv(e.to_string())
}

pub fn write_csv(steps: &[StepMetrics], features: usize, hidden: usize) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header(features, hidden)).map_err(csv_err)?;
    for m in steps {
        w.write_record(record(m)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

pub fn read_csv(text: &str, features: usize, hidden: usize) -> Result<Vec<StepMetrics>, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != csv_header(features, hidden) {
        return Err(IoError::Csv("header does not match the network shape".into()));
    }
    let nw = features * hidden + hidden;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let mut it = rec.iter();
        let mut next = || it.next().ok_or_else(|| IoError::Csv("short row".into()));
        macro_rules! num {
            () => {
                next()?.parse().map_err(csv_err)?
            };
        }
        let epoch = num!();
        let vector_index = num!();
        let xs = (0..features).map(|_| Ok(num!())).collect::<Result<Vec<u8>, IoError>>()?;
        let y_true = num!();
        let s = (0..hidden).map(|_| Ok(num!())).collect::<Result<Vec<i32>, IoError>>()?;
        let a = (0..hidden).map(|_| Ok(num!())).collect::<Result<Vec<i8>, IoError>>()?;
        let o = (0..hidden).map(|_| Ok(num!())).collect::<Result<Vec<i8>, IoError>>()?;
        let (output_sum, prediction, loss, dldz) = (num!(), num!(), num!(), num!());
        let mut weights = Vec::with_capacity(nw);
        for _ in 0..nw {
            let (binary, binary_grad, ste, real_grad, j) = (num!(), num!(), num!(), num!(), num!());
            let raw = u32::from_str_radix(next()?, 16).map_err(csv_err)?;
            weights.push(WeightMetrics {
                binary,
                binary_grad,
                ste,
                real_grad,
                j,
                updated: Fp32Bits::new(raw).map_err(csv_err)?,
            });
        }
        out.push(StepMetrics {
            epoch,
            vector_index,
            features: xs,
            y_true,
            pre_activations: s,
            activations: a,
            neuron_outputs: o,
            output_sum,
            prediction,
            loss,
            dldz,
            weights,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonWeight {
    binary: i8,
    binary_grad: i8,
    ste: u8,
    real_grad: i8,
    j: i8,
    updated: String,
}

#[derive(Serialize, Deserialize)]
struct JsonStep {
    epoch: u32,
    vector_index: usize,
    features: Vec<u8>,
    y_true: i8,
    pre_activations: Vec<i32>,
    activations: Vec<i8>,
    neuron_outputs: Vec<i8>,
    output_sum: i32,
    prediction: i8,
    loss: i32,
    dldz: i8,
    weights: Vec<JsonWeight>,
}

pub fn write_json(steps: &[StepMetrics]) -> String {
    let rows: Vec<JsonStep> = steps
        .iter()
        .map(|m| JsonStep {
            epoch: m.epoch,
            vector_index: m.vector_index,
            features: m.features.clone(),
            y_true: m.y_true,
            pre_activations: m.pre_activations.clone(),
            activations: m.activations.clone(),
            neuron_outputs: m.neuron_outputs.clone(),
            output_sum: m.output_sum,
            prediction: m.prediction,
            loss: m.loss,
            dldz: m.dldz,
            weights: m
                .weights
                .iter()
                .map(|w| JsonWeight {
                    binary: w.binary,
                    binary_grad: w.binary_grad,
                    ste: w.ste,
                    real_grad: w.real_grad,
                    j: w.j,
                    updated: format!("0x{}", w.updated),
                })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("metrics serialize")
}

pub fn read_json(text: &str) -> Result<Vec<StepMetrics>, IoError> {
    let rows: Vec<JsonStep> = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    rows.into_iter()
        .map(|r| {
            let weights = r
                .weights
                .into_iter()
                .map(|w| {
                    let hex = w.updated.strip_prefix("0x").unwrap_or(&w.updated);
                    let raw = u32::from_str_radix(hex, 16).map_err(|e| IoError::Json(e.to_string()))?;
                    Ok(WeightMetrics {
                        binary: w.binary,
                        binary_grad: w.binary_grad,
                        ste: w.ste,
                        real_grad: w.real_grad,
                        j: w.j,
                        updated: Fp32Bits::new(raw).map_err(|e| IoError::Json(e.to_string()))?,
                    })
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            Ok(StepMetrics {
                epoch: r.epoch,
                vector_index: r.vector_index,
                features: r.features,
                y_true: r.y_true,
                pre_activations: r.pre_activations,
                activations: r.activations,
                neuron_outputs: r.neuron_outputs,
                output_sum: r.output_sum,
                prediction: r.prediction,
                loss: r.loss,
                dldz: r.dldz,
                weights,
            })
        })
        .collect()
}
