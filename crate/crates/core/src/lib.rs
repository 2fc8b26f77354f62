// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alvns;
pub mod baselines;
pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod risk;
pub mod rng;
pub mod search;
pub mod sim;
pub mod space;
