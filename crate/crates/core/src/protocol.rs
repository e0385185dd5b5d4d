// SPDX-License-Identifier: Apache-2.0

//! Gate sequences built from sideband pulses and ideal Gaussian operations.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, RwLock};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{HilbertConfig, JointState, ModeState, OperatorSet, Quadrature, QubitInit, YState};
use crate::linalg::{self, CMat, HermitianEigen, C64};
use crate::sideband::{self, HamiltonianMode, HamiltonianOptions, SystemParams, TwoToneDrive};

pub const SCHEMA_VERSION: u32 = 1;

/// One element of a gate sequence. Sideband blocks act as `exp(i t sigma_y (x) M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateBlock {
    Sideband {
        label: String,
        drive: TwoToneDrive,
        duration: f64,
    },
    /// Several drives applied at once.
    Simultaneous {
        label: String,
        drives: Vec<TwoToneDrive>,
        duration: f64,
    },
    Displace {
        re: f64,
        im: f64,
    },
    Squeeze {
        r: f64,
    },
    Rotate {
        theta: f64,
    },
}

impl GateBlock {
    pub fn duration(&self) -> f64 {
        match self {
            GateBlock::Sideband { duration, .. } | GateBlock::Simultaneous { duration, .. } => *duration,
            _ => 0.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GateBlock::Sideband { label, .. } | GateBlock::Simultaneous { label, .. } => label.clone(),
            GateBlock::Displace { re, im } => format!("D({re}{im:+}i)"),
            GateBlock::Squeeze { r } => format!("S({r})"),
            GateBlock::Rotate { theta } => format!("R({theta})"),
        }
    }

    pub fn is_coupled(&self) -> bool {
        matches!(self, GateBlock::Sideband { .. } | GateBlock::Simultaneous { .. })
    }
}

/// A fully specified gate sequence, blocks in application order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub params: SystemParams,
    pub options: HamiltonianOptions,
    pub blocks: Vec<GateBlock>,
    pub qubit: QubitInit,
    /// Time charged per ideal displacement, in us.
    pub displacement_cost: f64,
}

impl ProtocolSpec {
    pub fn total_time(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                GateBlock::Displace { .. } => self.displacement_cost,
                other => other.duration(),
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetGate {
    /// Polynomial order `j` of `exp(i zeta Q^j)`.
    pub j: u32,
    pub zeta: f64,
    #[serde(default = "default_basis")]
    pub basis: Quadrature,
}

fn default_basis() -> Quadrature {
    Quadrature::P
}

impl TargetGate {
    pub fn cubic(zeta: f64) -> Self {
        Self {
            j: 3,
            zeta,
            basis: Quadrature::P,
        }
    }
}

/// `exp(i zeta Q^j)` on the truncated space, through the spectral decomposition of `Q`.
pub fn ideal_gate(ops: &OperatorSet, target: &TargetGate) -> CMat {
    let e = ops.quadrature_eigen(target.basis);
    e.func(|q| C64::from_polar(1.0, target.zeta * q.powi(target.j as i32)))
}

pub fn apply_ideal(ops: &OperatorSet, target: &TargetGate, state: &ModeState) -> ModeState {
    let e = ops.quadrature_eigen(target.basis);
    let f = |q: f64| C64::from_polar(1.0, target.zeta * q.powi(target.j as i32));
    match state {
        ModeState::Pure(v) => ModeState::Pure(e.apply_fn(f, v)),
        ModeState::Mixed(m) => {
            let u = e.func(f);
            ModeState::Mixed(&(&u * m) * u.adjoint())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicRound {
    /// First-order pulse before the cubic pulse; zero when an ideal displacement is used.
    #[serde(default)]
    pub t1: f64,
    pub t3: f64,
    #[serde(default)]
    pub t1p: f64,
    #[serde(default)]
    pub t2: f64,
    #[serde(default)]
    pub beta: f64,
    /// Ideal squeezing closing the round.
    #[serde(default)]
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Omegas {
    #[serde(default = "default_omega")]
    pub u1: f64,
    #[serde(default = "default_omega")]
    pub u2: f64,
    #[serde(default = "default_omega")]
    pub u3: f64,
    #[serde(default = "default_omega")]
    pub u4: f64,
}

fn default_omega() -> f64 {
    0.3
}

impl Default for Omegas {
    fn default() -> Self {
        Self {
            u1: 0.3,
            u2: 0.3,
            u3: 0.3,
            u4: 0.3,
        }
    }
}

/// Drive phases. The second-order default `pi/2` makes `U2` a squeezer along the quadrature axes; the odd
/// orders default to `U1 = D(+Omega eta t/4)` and a cubic pulse that generates `exp(+i zeta P^3)` with `zeta > 0`
/// from negative displacements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phases {
    #[serde(default = "pi")]
    pub u1: f64,
    #[serde(default = "pi")]
    pub u1p: f64,
    #[serde(default = "half_pi")]
    pub u2: f64,
    #[serde(default)]
    pub u3: f64,
    #[serde(default)]
    pub u4: f64,
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

fn pi() -> f64 {
    PI
}

impl Default for Phases {
    fn default() -> Self {
        Self {
            u1: PI,
            u1p: PI,
            u2: FRAC_PI_2,
            u3: 0.0,
            u4: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundOrder {
    /// Round 1 acts first.
    #[default]
    Forward,
    /// The last listed round acts first.
    Reversed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicParams {
    pub params: SystemParams,
    pub options: HamiltonianOptions,
    pub omegas: Omegas,
    pub phases: Phases,
    pub rounds: Vec<CubicRound>,
    pub round_order: RoundOrder,
    pub qubit: QubitInit,
    pub displacement_cost: f64,
}

impl CubicParams {
    pub fn new(eta: f64, rounds: Vec<CubicRound>) -> Self {
        Self {
            params: SystemParams::new(eta),
            options: HamiltonianOptions::default(),
            omegas: Omegas::default(),
            phases: Phases::default(),
            rounds,
            round_order: RoundOrder::Forward,
            qubit: QubitInit::PlusY,
            displacement_cost: 0.0,
        }
    }
}

/// Reference three-round parameter set (times in us), with `eta = 0.3` and all Rabi frequencies `0.3` MHz.
pub fn table1_rounds() -> Vec<CubicRound> {
    let rows = [
        (92.35, 88.75, 13.6, -2.84),
        (77.58, 119.63, 83.9, 2.00),
        (25.99, 157.65, 137.5, -2.54),
    ];
    rows.iter()
        .map(|&(t1p, t3, t2, beta)| CubicRound {
            t1: 0.0,
            t3,
            t1p,
            t2,
            beta,
            r: 0.0,
        })
        .collect()
}

fn sideband(label: &str, k: u32, omega: f64, phi: f64, duration: f64) -> GateBlock {
    GateBlock::Sideband {
        label: label.to_string(),
        drive: TwoToneDrive::new(k, omega, phi),
        duration,
    }
}

/// Round-based cubic sequence `S(-r) [G_N ... G_1] S(r)`, each round
/// `D(beta) -> U1(t1) -> U3(t3) -> U1'(t1') -> U2(t2) -> S(r_k)`; zero-length pieces are omitted.
pub fn build_cubic_protocol(p: &CubicParams, pre_squeeze: f64) -> Result<ProtocolSpec> {
    if p.rounds.is_empty() {
        return Err(Error::Config("a cubic protocol needs at least one round".into()));
    }
    let mut blocks = Vec::new();
    if pre_squeeze != 0.0 {
        blocks.push(GateBlock::Squeeze { r: pre_squeeze });
    }
    let order: Vec<usize> = match p.round_order {
        RoundOrder::Forward => (0..p.rounds.len()).collect(),
        RoundOrder::Reversed => (0..p.rounds.len()).rev().collect(),
    };
    for idx in order {
        let r = &p.rounds[idx];
        for (name, t) in [("t1", r.t1), ("t3", r.t3), ("t1p", r.t1p), ("t2", r.t2)] {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("round {}: {name} must be a non-negative time", idx + 1)));
            }
        }
        let n = idx + 1;
        if r.beta != 0.0 {
            blocks.push(GateBlock::Displace { re: r.beta, im: 0.0 });
        }
        if r.t1 > 0.0 {
            blocks.push(sideband(&format!("U1[{n}]"), 1, p.omegas.u1, p.phases.u1, r.t1));
        }
        if r.t3 > 0.0 {
            blocks.push(sideband(&format!("U3[{n}]"), 3, p.omegas.u3, p.phases.u3, r.t3));
        }
        if r.t1p > 0.0 {
            blocks.push(sideband(&format!("U1'[{n}]"), 1, p.omegas.u1, p.phases.u1p, r.t1p));
        }
        if r.t2 > 0.0 {
            blocks.push(sideband(&format!("U2[{n}]"), 2, p.omegas.u2, p.phases.u2, r.t2));
        }
        if r.r != 0.0 {
            blocks.push(GateBlock::Squeeze { r: r.r });
        }
    }
    if pre_squeeze != 0.0 {
        blocks.push(GateBlock::Squeeze { r: -pre_squeeze });
    }
    Ok(ProtocolSpec {
        params: p.params,
        options: p.options,
        blocks,
        qubit: p.qubit,
        displacement_cost: p.displacement_cost,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarticParams {
    #[serde(default)]
    pub r_pre: f64,
    pub t2: f64,
    #[serde(default = "half_pi")]
    pub phi2: f64,
    pub t4: f64,
    #[serde(default)]
    pub phi4: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub r_post: f64,
    #[serde(default = "quartic_omega2")]
    pub omega2: f64,
    #[serde(default = "quartic_omega4")]
    pub omega4: f64,
}

fn quartic_omega2() -> f64 {
    0.2
}

fn quartic_omega4() -> f64 {
    0.8
}

/// `S(r_post) R(theta) U4 U2 S(r_pre)`.
pub fn build_quartic_protocol(
    params: SystemParams,
    options: HamiltonianOptions,
    q: &QuarticParams,
) -> Result<ProtocolSpec> {
    if q.t2 < 0.0 || q.t4 < 0.0 {
        return Err(Error::Config("pulse durations must be non-negative".into()));
    }
    let mut blocks = Vec::new();
    if q.r_pre != 0.0 {
        blocks.push(GateBlock::Squeeze { r: q.r_pre });
    }
    if q.t2 > 0.0 {
        blocks.push(sideband("U2", 2, q.omega2, q.phi2, q.t2));
    }
    if q.t4 > 0.0 {
        blocks.push(sideband("U4", 4, q.omega4, q.phi4, q.t4));
    }
    if q.theta != 0.0 {
        blocks.push(GateBlock::Rotate { theta: q.theta });
    }
    if q.r_post != 0.0 {
        blocks.push(GateBlock::Squeeze { r: q.r_post });
    }
    Ok(ProtocolSpec {
        params,
        options,
        blocks,
        qubit: QubitInit::PlusY,
        displacement_cost: 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimultaneousParams {
    #[serde(default)]
    pub beta: f64,
    pub t: f64,
    #[serde(default)]
    pub t2: f64,
    #[serde(default = "default_omega")]
    pub omega1: f64,
    #[serde(default = "default_omega")]
    pub omega3: f64,
    #[serde(default = "pi")]
    pub phi1: f64,
    #[serde(default)]
    pub phi3: f64,
    #[serde(default = "default_omega")]
    pub omega2: f64,
    #[serde(default = "half_pi")]
    pub phi2: f64,
}

/// One round with `H1 + H3` applied together for time `t`, closed by `U2`.
pub fn build_simultaneous_variant(
    params: SystemParams,
    options: HamiltonianOptions,
    s: &SimultaneousParams,
) -> Result<ProtocolSpec> {
    if !(s.t > 0.0) {
        return Err(Error::Config("simultaneous pulse needs a positive duration".into()));
    }
    let mut blocks = Vec::new();
    if s.beta != 0.0 {
        blocks.push(GateBlock::Displace { re: s.beta, im: 0.0 });
    }
    blocks.push(GateBlock::Simultaneous {
        label: "U1+U3".into(),
        drives: vec![
            TwoToneDrive::new(1, s.omega1, s.phi1),
            TwoToneDrive::new(3, s.omega3, s.phi3),
        ],
        duration: s.t,
    });
    if s.t2 > 0.0 {
        blocks.push(sideband("U2", 2, s.omega2, s.phi2, s.t2));
    }
    Ok(ProtocolSpec {
        params,
        options,
        blocks,
        qubit: QubitInit::PlusY,
        displacement_cost: 0.0,
    })
}

/// Conjugate a sequence by the rotation that maps `P` onto `X`, so a P-native gate is compared to an X target.
pub fn rotate_to_x_basis(mut spec: ProtocolSpec) -> ProtocolSpec {
    spec.blocks.insert(0, GateBlock::Rotate { theta: FRAC_PI_2 });
    spec.blocks.push(GateBlock::Rotate { theta: -FRAC_PI_2 });
    spec
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct SpectralKey {
    drives: Vec<(u32, u64, u64)>,
    eta: u64,
    mode: HamiltonianMode,
    prefactor: bool,
}

/// Motional propagator of one block, `exp(i s t M)` on the `sigma_y = s` branch.
enum BlockAction {
    /// `R(theta) V exp(i s scale lambda) V^dagger R(theta)^dagger`.
    Spectral {
        eig: Arc<HermitianEigen>,
        scale: f64,
        theta: f64,
    },
    Displace(C64),
    Squeeze(f64),
    Rotate(f64),
}

/// Simulation context: operators for one truncation and a cache of spectral decompositions.
pub struct Simulator {
    pub cfg: HilbertConfig,
    pub ops: OperatorSet,
    cache: RwLock<HashMap<SpectralKey, Arc<HermitianEigen>>>,
}

impl Simulator {
    pub fn new(cfg: HilbertConfig) -> Result<Self> {
        Ok(Self {
            ops: OperatorSet::for_config(&cfg)?,
            cfg,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim_fock
    }

    fn spectral(&self, key: SpectralKey, build: impl FnOnce() -> Result<CMat>) -> Result<Arc<HermitianEigen>> {
        if let Some(e) = self.cache.read().expect("cache poisoned").get(&key) {
            return Ok(e.clone());
        }
        let e = Arc::new(HermitianEigen::new(&build()?)?);
        self.cache
            .write()
            .expect("cache poisoned")
            .entry(key)
            .or_insert_with(|| e.clone());
        Ok(e)
    }

    fn action(&self, spec: &ProtocolSpec, block: &GateBlock, duration: f64) -> Result<BlockAction> {
        let opts = &spec.options;
        let pref = if opts.uses_prefactor() {
            (-spec.params.eta.powi(2) / 2.0).exp()
        } else {
            1.0
        };
        match block {
            GateBlock::Sideband { drive, .. } => {
                if drive.k == 0 {
                    return Err(Error::Config("drive order must be at least 1".into()));
                }
                // M_k(phi) = R(phi/k) M_k(0) R(phi/k)^dagger, and M_k(0) scales with the amplitude
                let key = SpectralKey {
                    drives: vec![(drive.k, 0, 0)],
                    eta: spec.params.eta.to_bits(),
                    mode: opts.mode,
                    prefactor: false,
                };
                let unit = TwoToneDrive::new(drive.k, 4.0, 0.0);
                let unit_opts = HamiltonianOptions {
                    mode: opts.mode,
                    prefactor: Some(false),
                    omega_scale: 1.0,
                };
                let params = spec.params;
                let dim = self.dim();
                let eig = self.spectral(key, || sideband::mode_hamiltonian(&unit, &params, &unit_opts, dim))?;
                let amp = drive.omega * opts.omega_scale / 4.0 * pref;
                Ok(BlockAction::Spectral {
                    eig,
                    scale: amp * duration,
                    theta: drive.phi / drive.k as f64,
                })
            }
            GateBlock::Simultaneous { drives, .. } => {
                let key = SpectralKey {
                    drives: drives
                        .iter()
                        .map(|d| (d.k, (d.omega * opts.omega_scale).to_bits(), d.phi.to_bits()))
                        .collect(),
                    eta: spec.params.eta.to_bits(),
                    mode: opts.mode,
                    prefactor: opts.uses_prefactor(),
                };
                let dim = self.dim();
                let eig = self.spectral(key, || {
                    let mut m = Mat::zeros(dim, dim);
                    for d in drives {
                        m = &m + &sideband::mode_hamiltonian(d, &spec.params, opts, dim)?;
                    }
                    Ok(m)
                })?;
                Ok(BlockAction::Spectral {
                    eig,
                    scale: duration,
                    theta: 0.0,
                })
            }
            GateBlock::Displace { re, im } => Ok(BlockAction::Displace(C64::new(*re, *im))),
            GateBlock::Squeeze { r } => Ok(BlockAction::Squeeze(*r)),
            GateBlock::Rotate { theta } => Ok(BlockAction::Rotate(*theta)),
        }
    }

    fn act_vec(&self, action: &BlockAction, sign: f64, psi: &[C64]) -> Vec<C64> {
        match action {
            BlockAction::Spectral { eig, scale, theta } => {
                if *theta == 0.0 {
                    return eig.apply_exp_i(sign * scale, psi);
                }
                let back = self.ops.apply_rotation(-theta, psi);
                let moved = eig.apply_exp_i(sign * scale, &back);
                self.ops.apply_rotation(*theta, &moved)
            }
            BlockAction::Displace(b) => self.ops.apply_displacement(*b, psi),
            BlockAction::Squeeze(r) => self.ops.apply_squeezing(*r, psi),
            BlockAction::Rotate(t) => self.ops.apply_rotation(*t, psi),
        }
    }

    fn act_dense(&self, action: &BlockAction, sign: f64) -> CMat {
        match action {
            BlockAction::Spectral { eig, scale, theta } => {
                let u = eig.exp_i(sign * scale);
                if *theta == 0.0 {
                    return u;
                }
                let ph = self.ops.rotation_phases(*theta);
                Mat::from_fn(self.dim(), self.dim(), |i, j| ph[i] * u[(i, j)] * ph[j].conj())
            }
            BlockAction::Displace(b) => self.ops.displacement(*b),
            BlockAction::Squeeze(r) => self.ops.squeezing(*r),
            BlockAction::Rotate(t) => self.ops.rotation(*t),
        }
    }

    /// Motional propagators `(U_+, U_-)` of one block over `duration`, for the two `sigma_y` branches.
    pub fn block_unitaries(&self, spec: &ProtocolSpec, block: &GateBlock, duration: f64) -> Result<(CMat, CMat)> {
        let action = self.action(spec, block, duration)?;
        let plus = self.act_dense(&action, 1.0);
        let minus = if block.is_coupled() {
            self.act_dense(&action, -1.0)
        } else {
            plus.clone()
        };
        Ok((plus, minus))
    }

    /// Net motional operator on one `sigma_y` branch (`sign = +1` for a `|+y>` qubit).
    pub fn branch_unitary(&self, spec: &ProtocolSpec, sign: f64) -> Result<CMat> {
        let mut u = linalg::identity(self.dim());
        for b in &spec.blocks {
            let action = self.action(spec, b, b.duration())?;
            u = &self.act_dense(&action, sign) * &u;
        }
        Ok(u)
    }

    /// Full unitary on qubit (x) oscillator.
    pub fn joint_unitary(&self, spec: &ProtocolSpec) -> Result<CMat> {
        let up = self.branch_unitary(spec, 1.0)?;
        let um = self.branch_unitary(spec, -1.0)?;
        let d = self.dim();
        let h = 1.0 / 2.0;
        // U = |+y><+y| (x) U_+ + |-y><-y| (x) U_-
        let py = [[C64::new(h, 0.0), C64::new(0.0, -h)], [C64::new(0.0, h), C64::new(h, 0.0)]];
        let my = [[C64::new(h, 0.0), C64::new(0.0, h)], [C64::new(0.0, -h), C64::new(h, 0.0)]];
        Ok(Mat::from_fn(2 * d, 2 * d, |r, c| {
            let (qa, i) = (r / d, r % d);
            let (qb, j) = (c / d, c % d);
            py[qa][qb] * up[(i, j)] + my[qa][qb] * um[(i, j)]
        }))
    }

    /// Noise-free evolution of a joint state through the sequence.
    pub fn apply(&self, spec: &ProtocolSpec, input: &JointState) -> Result<JointState> {
        if input.dim_fock != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: input.dim_fock,
            });
        }
        let buffer = self.cfg.leakage_buffer;
        let mut y = input.to_y_basis();
        for b in &spec.blocks {
            let action = self.action(spec, b, b.duration())?;
            let coupled = b.is_coupled();
            y = match y {
                YState::Pure { plus, minus } => {
                    let plus = if linalg::norm_sqr(&plus) > 0.0 {
                        self.act_vec(&action, 1.0, &plus)
                    } else {
                        plus
                    };
                    let minus = if linalg::norm_sqr(&minus) > 0.0 {
                        self.act_vec(&action, if coupled { -1.0 } else { 1.0 }, &minus)
                    } else {
                        minus
                    };
                    YState::Pure { plus, minus }
                }
                YState::Mixed(blocks) => {
                    let up = self.act_dense(&action, 1.0);
                    let um = if coupled { self.act_dense(&action, -1.0) } else { up.clone() };
                    YState::Mixed(conjugate_blocks(blocks, &up, &um))
                }
            };
            self.cfg.check_leakage(&b.label(), y_leakage(&y, buffer))?;
        }
        Ok(JointState::from_y_basis(y))
    }

    /// Output state for a motional input with the sequence's qubit preparation.
    pub fn run(&self, spec: &ProtocolSpec, mode: &ModeState) -> Result<JointState> {
        self.apply(spec, &JointState::product(spec.qubit, mode))
    }
}

pub(crate) fn conjugate_blocks(blocks: [[CMat; 2]; 2], up: &CMat, um: &CMat) -> [[CMat; 2]; 2] {
    let u = [up, um];
    let [[b00, b01], [b10, b11]] = blocks;
    let mut out = [[b00, b01], [b10, b11]];
    for a in 0..2 {
        for b in 0..2 {
            if linalg::max_abs(&out[a][b]) == 0.0 {
                continue;
            }
            out[a][b] = &(u[a] * &out[a][b]) * u[b].adjoint();
        }
    }
    out
}

pub(crate) fn y_leakage(y: &YState, buffer: usize) -> f64 {
    match y {
        YState::Pure { plus, minus } => {
            let d = plus.len();
            (d - buffer..d).map(|n| plus[n].norm_sqr() + minus[n].norm_sqr()).sum()
        }
        YState::Mixed(b) => {
            let d = b[0][0].nrows();
            (d - buffer..d).map(|n| b[0][0][(n, n)].re + b[1][1][(n, n)].re).sum()
        }
    }
}

/// Polynomial decomposition of the phase and log-amplitude of `psi_gen / psi_target` along a quadrature.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub basis: Quadrature,
    /// Coefficients of `q^0 .. q^6` of the residual phase.
    pub phase: Vec<f64>,
    /// Coefficients of `q^0 .. q^6` of the log-amplitude ratio.
    pub log_amplitude: Vec<f64>,
    /// Squeezing parameter implied by the quadratic log-amplitude term.
    pub squeezing: f64,
    pub quadratic: f64,
    pub quintic: f64,
    pub fit_window: (f64, f64),
    pub condition: f64,
}

pub const RESIDUAL_ORDER: usize = 6;

/// Compare two motional states in the representation of `basis` (the target gate's quadrature).
pub fn residual_report(
    ops: &OperatorSet,
    generated: &[C64],
    target: &[C64],
    basis: Quadrature,
) -> Result<ResidualReport> {
    let e = ops.quadrature_eigen(basis);
    // wavefunction values at the quadrature nodes, up to a common node weight
    let g = linalg::adjoint_matvec(&e.vectors, generated);
    let t = linalg::adjoint_matvec(&e.vectors, target);
    let d = e.dim();
    let weights: Vec<f64> = t.iter().map(|c| c.norm_sqr()).collect();
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..d)
        .filter(|&i| weights[i] > 1e-3 * wmax && g[i].norm_sqr() > 1e-3 * wmax)
        .collect();
    idx.sort_by(|&a, &b| e.values[a].total_cmp(&e.values[b]));
    if idx.len() <= RESIDUAL_ORDER {
        return Err(Error::Degenerate("too few quadrature nodes carry weight".into()));
    }
    // eigenvector phases are arbitrary; the ratio cancels them node by node
    let ratio: Vec<C64> = idx.iter().map(|&i| g[i] / t[i]).collect();
    let qs: Vec<f64> = idx.iter().map(|&i| e.values[i]).collect();
    let centre = qs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let mut phase = vec![0.0; ratio.len()];
    phase[centre] = ratio[centre].arg();
    for k in centre + 1..ratio.len() {
        phase[k] = unwrap(phase[k - 1], ratio[k].arg());
    }
    for k in (0..centre).rev() {
        phase[k] = unwrap(phase[k + 1], ratio[k].arg());
    }
    let logamp: Vec<f64> = ratio.iter().map(|c| c.norm().ln()).collect();
    let w: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
    let (pc, cond) = weighted_polyfit(&qs, &phase, &w, RESIDUAL_ORDER)?;
    let (ac, _) = weighted_polyfit(&qs, &logamp, &w, RESIDUAL_ORDER)?;
    // |psi| ratio of S(r) applied to a minimum-uncertainty state: exp(-(e^{-2r} - 1) q^2 / 2) in P
    let squeezing = match basis {
        Quadrature::P => -0.5 * (1.0 - 2.0 * ac[2]).max(1e-300).ln(),
        Quadrature::X => 0.5 * (1.0 - 2.0 * ac[2]).max(1e-300).ln(),
    };
    Ok(ResidualReport {
        basis,
        quadratic: pc[2],
        quintic: pc[5],
        phase: pc,
        log_amplitude: ac,
        squeezing,
        fit_window: (qs[0], qs[qs.len() - 1]),
        condition: cond,
    })
}

fn unwrap(prev: f64, next: f64) -> f64 {
    let mut v = next;
    while v - prev > PI {
        v -= 2.0 * PI;
    }
    while v - prev < -PI {
        v += 2.0 * PI;
    }
    v
}

/// Weighted least squares in a scaled monomial basis; returns coefficients and the scaled condition number.
pub fn weighted_polyfit(x: &[f64], y: &[f64], w: &[f64], order: usize) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    let m = order + 1;
    let s = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let a = Mat::<f64>::from_fn(n, m, |i, j| w[i].sqrt() * (x[i] / s).powi(j as i32));
    let b = Mat::<f64>::from_fn(n, 1, |i, _| w[i].sqrt() * y[i]);
    let svd = a.thin_svd().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let sv = svd.S().column_vector();
    let smax = (0..m).map(|i| sv[i]).fold(0.0f64, f64::max);
    let smin = (0..m).map(|i| sv[i]).fold(f64::INFINITY, f64::min);
    let cond = smax / smin.max(1e-300);
    if cond > 1e12 {
        return Err(Error::IllConditioned(cond));
    }
    let utb = svd.U().transpose() * &b;
    let coef_scaled = Mat::<f64>::from_fn(m, 1, |i, _| utb[(i, 0)] / sv[i]);
    let c = svd.V() * &coef_scaled;
    Ok(((0..m).map(|j| c[(j, 0)] / s.powi(j as i32)).collect(), cond))
}
