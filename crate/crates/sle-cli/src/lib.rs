//! Batch pipeline around `sle-core`: configuration, ensemble generation,
//! verification reports, file formats and SVG rendering.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod svg;
