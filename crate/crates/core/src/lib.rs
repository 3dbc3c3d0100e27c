#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod assemble;
pub mod delineate;
pub mod error;
pub mod features;
pub mod gbdt;
pub mod hrv;
pub mod labels;
pub mod metrics;
pub mod pipeline;
pub mod record_io;
pub mod rng;
pub mod signal_prep;
pub mod synth;

pub use error::{Error, Result};
