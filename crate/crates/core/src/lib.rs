//! Binarized neural network training modelled as a 1-safe Petri net.

pub mod analyze;
pub mod bitfloat;
pub mod engine;
pub mod io;
pub mod blueprints;
pub mod petri;
pub mod refbnn;
pub mod verify;
