#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allpole;
pub mod dnn;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod gci;
pub mod peaks;
pub mod pipeline;
pub mod poly;
pub mod qcp;
pub mod refine;
pub mod synth;
pub mod tracker;
pub mod wav;

pub use error::{Error, Result};
