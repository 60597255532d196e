//! Public-transit accessibility and equity scoring.
//!
//! The crate takes a GTFS feed and a population raster, lays a hexagonal
//! grid over the study area and computes, for every hexagon, how many
//! residents can be reached by transit and walking within a time budget.
//! The spread of that accessibility over the population is summarised by a
//! Lorenz curve and its Gini index, and every transit line is scored by its
//! contribution to equity in two ways:
//!
//! * [`equity::exact_scores`]: the Gini change when the line is removed,
//!   which needs one full accessibility pass per line;
//! * [`importance::fast_scores`]: distances travelled on each line inside
//!   the earliest-arrival trees, accumulated over the least accessible
//!   hexagons, obtained from a single accessibility pass.
//!
//! [`stats`] compares the two rankings, and [`workspace`] wires everything
//! into the on-disk pipeline behind the `transit-equity` binary.

// `!(x >= 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accessibility;
pub mod config;
pub mod equity;
mod error;
pub mod geodata;
pub mod gtfs;
pub mod importance;
pub mod router;
pub mod stats;
pub mod workspace;

pub use error::{Error, Result};

/// Seconds since midnight of the service day. GTFS allows values past 24h.
pub type Seconds = u32;
