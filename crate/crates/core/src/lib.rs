// SPDX-License-Identifier: Apache-2.0

//! Sideband-driven nonlinear phase gates on a trapped-ion motional mode.

pub mod config;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod optimizer;
pub mod protocol;
pub mod sideband;
pub mod study;

pub use error::{Error, Result};
