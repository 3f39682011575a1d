//! Run configuration, dataset files and SVG plots.

pub mod config;
pub mod dataset;
pub mod svg;

pub use config::{GridSize, Overrides, RunConfig};
pub use dataset::{serialize_dataset, Format, Record};
pub use svg::{emit_scatter_svg, Style};
