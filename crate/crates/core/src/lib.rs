//! Instrumental-variable adjustment for unmeasured spatial confounding.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod numkernel;
pub mod spatialdata;
pub mod basisdecomp;
pub mod linear_iv;
pub mod gpsim;
pub mod dr_effects;
