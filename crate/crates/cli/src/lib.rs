//! Configuration-driven experiment runner for derivative-free
//! superiorization.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod commands;
pub mod config;
pub mod pgm;
pub mod svg;
pub mod trace_csv;
