//! Library side of the `twinopt` binary: scenario files, experiment
//! orchestration, bundled examples, and chart rendering.

pub mod examples;
pub mod experiment;
pub mod scenario_file;
pub mod svg;
