#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dissemination;
pub mod generator;
pub mod kernel;
pub mod metrics;
pub mod mobility;
pub mod model;
pub mod output;
pub mod reaction;
pub mod scenario_file;
pub mod sim;
