//! Small-time asymptotics of leveraged ETF options under local volatility Lévy models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod asymptotics;
pub mod error;
pub mod errorbounds;
pub mod impliedvol;
pub mod levy;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
