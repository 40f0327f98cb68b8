//! Planning toolkit for zero-emission neighborhoods.
//!
//! The pipeline: load or synthesize hourly energy time series
//! ([`timeseries`]), reduce them to representative days or hours by
//! clustering ([`cluster`]), measure the reduction error ([`metrics`]),
//! build the neighborhood investment-and-operation MILP on the reduced
//! horizon ([`milp`]), and solve it with the embedded simplex /
//! branch-and-bound or export it as MPS ([`solve`]). The [`experiment`]
//! module wires the whole chain into the deviation/runtime protocol the
//! CLI exposes.

pub mod cluster;
pub mod experiment;
pub mod metrics;
pub mod milp;
pub mod solve;
pub mod timeseries;
