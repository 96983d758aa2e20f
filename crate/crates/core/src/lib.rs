//! Synthesis, segmentation, tracking and evaluation of fast-moving objects:
//! small objects that travel farther than their own size within one exposure
//! and show up as blurred streaks.

pub mod bbox;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod pipeline;
pub mod renderer;
pub mod segment;
pub mod synthgen;
pub mod tracker;
