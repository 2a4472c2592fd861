//! Model files, data formats, synthetic generators and experiment drivers for `rnmrf`.

pub mod data;
pub mod dsl;
pub mod params;
pub mod commands;
pub mod experiments;
pub mod metrics;
pub mod synth;
