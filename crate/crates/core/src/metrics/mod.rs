// SPDX-License-Identifier: Apache-2.0

//! Figures of merit for generated states.

mod analysis;
mod fidelity;
mod variance;
mod wigner;

pub use analysis::*;
pub use fidelity::*;
pub use variance::*;
pub use wigner::*;
