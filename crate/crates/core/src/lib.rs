#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod cli;
pub mod config;
pub mod counterexamples;
pub mod degiorgi;
pub mod dirichlet;
pub mod error;
pub mod geometry;
pub mod orlicz;
pub mod plot;
pub mod quadrature;
pub mod report;
pub mod sobolev;
pub mod young;

pub use error::{Error, Result};
