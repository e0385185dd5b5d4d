// SPDX-License-Identifier: Apache-2.0

//! Motional heating and dephasing, interleaved with the coherent blocks by time splitting.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{JointState, ModeState, YState};
use crate::linalg::{CMat, C64};
use crate::protocol::{conjugate_blocks, y_leakage, ProtocolSpec, Simulator};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatingMode {
    /// `K0 = sqrt(1 - r dt) I`, `K1 = sqrt(r dt) a^dagger`, followed by trace renormalisation.
    #[default]
    Kraus,
    /// Thermal-type channel with `a` and `a^dagger` jumps at equal rate.
    TwoJump,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephaseMode {
    PerStep,
    #[default]
    EndOfBlock,
}

/// Rates are per second, times in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub heating_rate: f64,
    /// Motional coherence time in ms; `None` disables dephasing.
    #[serde(default)]
    pub coherence_time: Option<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub heating_mode: HeatingMode,
    #[serde(default)]
    pub dephase_mode: DephaseMode,
}

fn default_step() -> f64 {
    1.0
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            heating_rate: 0.0,
            coherence_time: None,
            step: default_step(),
            heating_mode: HeatingMode::Kraus,
            dephase_mode: DephaseMode::EndOfBlock,
        }
    }
}

pub const MAX_HEATING_PER_STEP: f64 = 0.1;

impl NoiseModel {
    pub fn heating(rate: f64) -> Self {
        Self {
            heating_rate: rate,
            ..Self::default()
        }
    }

    pub fn dephasing(coherence_time_ms: f64) -> Self {
        Self {
            coherence_time: Some(coherence_time_ms),
            ..Self::default()
        }
    }

    /// Dephasing rate in 1/s.
    pub fn dephase_rate(&self) -> f64 {
        self.coherence_time.map_or(0.0, |t| 1e3 / t)
    }

    /// Heating probability per step, `rate * dt`.
    pub fn heating_per_step(&self) -> f64 {
        self.heating_rate * self.step * 1e-6
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heating_rate >= 0.0) {
            return Err(Error::Config("heating rate must be nonnegative".into()));
        }
        if let Some(t) = self.coherence_time {
            if !(t > 0.0) {
                return Err(Error::Config("coherence time must be positive".into()));
            }
        }
        if !(self.step > 0.0) {
            return Err(Error::Config("noise step must be positive".into()));
        }
        if self.heating_per_step() >= MAX_HEATING_PER_STEP {
            return Err(Error::Config(format!(
                "heating per step {:.3e} is not small; reduce the step",
                self.heating_per_step()
            )));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.heating_rate == 0.0 && self.coherence_time.is_none()
    }
}

/// Applies the same mode channel to every qubit block; `blocks` need not have unit trace.
fn heat_matrix(rho: &CMat, p: f64, mode: HeatingMode) -> CMat {
    let d = rho.nrows();
    let sq = |k: usize| (k as f64).sqrt();
    match mode {
        HeatingMode::Kraus => Mat::from_fn(d, d, |i, j| {
            let mut v = rho[(i, j)] * (1.0 - p);
            if i > 0 && j > 0 {
                v += rho[(i - 1, j - 1)] * (p * sq(i) * sq(j));
            }
            v
        }),
        HeatingMode::TwoJump => {
            // K0 = I - (p/2)(2n + 1), K_up = sqrt(p) a^dagger, K_down = sqrt(p) a
            let k0 = |n: usize| 1.0 - 0.5 * p * (2.0 * n as f64 + 1.0);
            Mat::from_fn(d, d, |i, j| {
                let mut v = rho[(i, j)] * (k0(i) * k0(j));
                if i > 0 && j > 0 {
                    v += rho[(i - 1, j - 1)] * (p * sq(i) * sq(j));
                }
                if i + 1 < d && j + 1 < d {
                    v += rho[(i + 1, j + 1)] * (p * sq(i + 1) * sq(j + 1));
                }
                v
            })
        }
    }
}

fn dephase_matrix(rho: &CMat, gamma_t: f64) -> CMat {
    let d = rho.nrows();
    Mat::from_fn(d, d, |i, j| {
        let k = i as f64 - j as f64;
        rho[(i, j)] * (-0.5 * gamma_t * k * k).exp()
    })
}

/// One heating step on a motional density matrix, renormalised to unit trace.
pub fn heating_step(rho: &CMat, model: &NoiseModel) -> Result<CMat> {
    model.validate()?;
    let out = heat_matrix(rho, model.heating_per_step(), model.heating_mode);
    let tr: f64 = (0..out.nrows()).map(|i| out[(i, i)].re).sum();
    let s = C64::new(1.0 / tr, 0.0);
    Ok(Mat::from_fn(out.nrows(), out.ncols(), |i, j| out[(i, j)] * s))
}

/// `rho_nm -> rho_nm exp(-gamma t (n - m)^2 / 2)` with `elapsed` in microseconds.
pub fn dephasing_step(rho: &CMat, model: &NoiseModel, elapsed: f64) -> Result<CMat> {
    if !(elapsed >= 0.0) {
        return Err(Error::Config("elapsed time must be nonnegative".into()));
    }
    Ok(dephase_matrix(rho, model.dephase_rate() * elapsed * 1e-6))
}

fn map_blocks(blocks: [[CMat; 2]; 2], f: impl Fn(&CMat) -> CMat) -> [[CMat; 2]; 2] {
    let [[a, b], [c, d]] = blocks;
    [[f(&a), f(&b)], [f(&c), f(&d)]]
}

fn renormalize(blocks: [[CMat; 2]; 2]) -> [[CMat; 2]; 2] {
    let d = blocks[0][0].nrows();
    let tr: f64 = (0..d).map(|i| blocks[0][0][(i, i)].re + blocks[1][1][(i, i)].re).sum();
    let s = C64::new(1.0 / tr, 0.0);
    map_blocks(blocks, |m| Mat::from_fn(d, d, |i, j| m[(i, j)] * s))
}

/// Noisy evolution of a joint state through a sequence.
///
/// Each coupled block of length `T` is cut into `ceil(T / dt)` equal sub-steps; every sub-step applies the
/// block propagator and then one heating step. Dephasing acts once per block with the block duration, or
/// after every sub-step. Instantaneous classical blocks are applied without noise.
pub fn noisy_evolution(sim: &Simulator, spec: &ProtocolSpec, input: &JointState, model: &NoiseModel) -> Result<JointState> {
    model.validate()?;
    if input.dim_fock != sim.dim() {
        return Err(Error::Dimension {
            expected: sim.dim(),
            got: input.dim_fock,
        });
    }
    if model.is_noiseless() {
        let out = sim.apply(spec, input)?;
        return Ok(out.to_mixed());
    }
    let p = model.heating_per_step();
    let gamma = model.dephase_rate() * 1e-6;
    let mut blocks = match input.to_mixed().to_y_basis() {
        YState::Mixed(b) => b,
        YState::Pure { .. } => unreachable!("mixed input"),
    };
    for block in &spec.blocks {
        let total = block.duration();
        if !block.is_coupled() || total == 0.0 {
            let (up, um) = sim.block_unitaries(spec, block, total)?;
            blocks = conjugate_blocks(blocks, &up, &um);
            continue;
        }
        let steps = (total / model.step).ceil().max(1.0) as usize;
        let h = total / steps as f64;
        let (up, um) = sim.block_unitaries(spec, block, h)?;
        for _ in 0..steps {
            blocks = conjugate_blocks(blocks, &up, &um);
            if p > 0.0 {
                blocks = renormalize(map_blocks(blocks, |m| heat_matrix(m, p, model.heating_mode)));
            }
            if gamma > 0.0 && model.dephase_mode == DephaseMode::PerStep {
                blocks = map_blocks(blocks, |m| dephase_matrix(m, gamma * h));
            }
        }
        if gamma > 0.0 && model.dephase_mode == DephaseMode::EndOfBlock {
            blocks = map_blocks(blocks, |m| dephase_matrix(m, gamma * total));
        }
        let y = YState::Mixed(blocks);
        sim.cfg.check_leakage(&block.label(), y_leakage(&y, sim.cfg.leakage_buffer))?;
        blocks = match y {
            YState::Mixed(b) => b,
            YState::Pure { .. } => unreachable!(),
        };
    }
    Ok(JointState::from_y_basis(YState::Mixed(blocks)))
}

/// Noisy run from a motional input with the sequence's qubit preparation; returns the reduced mode state.
pub fn noisy_mode_output(sim: &Simulator, spec: &ProtocolSpec, mode: &ModeState, model: &NoiseModel) -> Result<ModeState> {
    let input = JointState::product(spec.qubit, mode);
    Ok(noisy_evolution(sim, spec, &input, model)?.reduced_mode())
}
