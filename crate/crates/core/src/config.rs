// SPDX-License-Identifier: Apache-2.0

//! Versioned JSON description of a gate sequence and its simulation settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{HilbertConfig, QubitInit};
use crate::noise::NoiseModel;
use crate::protocol::{
    build_cubic_protocol, build_quartic_protocol, build_simultaneous_variant, CubicParams, CubicRound, Omegas, Phases,
    ProtocolSpec, QuarticParams, RoundOrder, SimultaneousParams, TargetGate, SCHEMA_VERSION,
};
use crate::sideband::{HamiltonianMode, HamiltonianOptions, SystemParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDoc {
    pub schema_version: u32,
    pub eta: f64,
    /// Trap frequency in rad/us.
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub omegas: Omegas,
    #[serde(default)]
    pub phases: Phases,
    #[serde(default)]
    pub mode: HamiltonianMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<bool>,
    #[serde(default = "one")]
    pub omega_scale: f64,
    #[serde(default)]
    pub round_order: RoundOrder,
    #[serde(default)]
    pub rounds: Vec<CubicRound>,
    #[serde(default)]
    pub pre_squeeze: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quartic: Option<QuarticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simultaneous: Option<SimultaneousParams>,
    pub target: TargetGate,
    #[serde(default)]
    pub qubit: QubitInit,
    #[serde(default)]
    pub displacement_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default = "default_hilbert")]
    pub hilbert: HilbertConfig,
}

fn default_nu() -> f64 {
    std::f64::consts::TAU
}

fn one() -> f64 {
    1.0
}

pub const DEFAULT_DIM: usize = 120;

fn default_hilbert() -> HilbertConfig {
    HilbertConfig::with_dim(DEFAULT_DIM).expect("default truncation is valid")
}

impl ProtocolDoc {
    /// Cubic sequence document with default drive settings.
    pub fn cubic(eta: f64, rounds: Vec<CubicRound>, zeta: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            eta,
            nu: default_nu(),
            omegas: Omegas::default(),
            phases: Phases::default(),
            mode: HamiltonianMode::Full,
            prefactor: None,
            omega_scale: 1.0,
            round_order: RoundOrder::Forward,
            rounds,
            pre_squeeze: 0.0,
            quartic: None,
            simultaneous: None,
            target: TargetGate::cubic(zeta),
            qubit: QubitInit::PlusY,
            displacement_cost: 0.0,
            noise: None,
            hilbert: default_hilbert(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let kinds = [!self.rounds.is_empty(), self.quartic.is_some(), self.simultaneous.is_some()];
        if kinds.iter().filter(|k| **k).count() != 1 {
            return Err(Error::Config(
                "exactly one of rounds, quartic or simultaneous must be given".into(),
            ));
        }
        SystemParams::new(self.eta).validate()?;
        self.hilbert.validate()?;
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }

    pub fn system(&self) -> SystemParams {
        SystemParams {
            eta: self.eta,
            nu: self.nu,
        }
    }

    pub fn options(&self) -> HamiltonianOptions {
        HamiltonianOptions {
            mode: self.mode,
            prefactor: self.prefactor,
            omega_scale: self.omega_scale,
        }
    }

    pub fn cubic_params(&self) -> CubicParams {
        CubicParams {
            params: self.system(),
            options: self.options(),
            omegas: self.omegas,
            phases: self.phases,
            rounds: self.rounds.clone(),
            round_order: self.round_order,
            qubit: self.qubit,
            displacement_cost: self.displacement_cost,
        }
    }

    pub fn spec(&self) -> Result<ProtocolSpec> {
        self.validate()?;
        let mut spec = if let Some(q) = &self.quartic {
            build_quartic_protocol(self.system(), self.options(), q)?
        } else if let Some(s) = &self.simultaneous {
            build_simultaneous_variant(self.system(), self.options(), s)?
        } else {
            build_cubic_protocol(&self.cubic_params(), self.pre_squeeze)?
        };
        spec.qubit = self.qubit;
        spec.displacement_cost = self.displacement_cost;
        Ok(spec)
    }
}
