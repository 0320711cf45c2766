//! File formats: native net text, PNML, DOT, TOML configuration and
//! metrics CSV/JSON.

use thiserror::Error;

use crate::petri::NetError;

mod config;
mod dot;
mod metrics;
mod native;
mod pnml;


pub use config::{parse_weight, Config, NetworkConfig, PolicyKind, RowConfig, RunConfig};
pub use dot::write_dot;
pub use metrics::{csv_header, read_csv, read_json, write_csv, write_json};
pub use native::{read_native, role_name, write_native};
pub use pnml::{read_pnml, write_pnml, PNML_NS, PTNET_TYPE, TOOL};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("name `{0}` is empty or contains whitespace")]
    Name(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("xml: {0}")]
    Xml(String),
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
}
