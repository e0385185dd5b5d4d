// SPDX-License-Identifier: Apache-2.0

//! Sideband operators and the two-tone drive Hamiltonians built from them.
//!
//! `D_k = sum_n (i eta)^(2n+k) / (n! (n+k)!) a^dagger^(n+k) a^n` is the normal-ordered
//! coefficient of `exp(i k nu t)` in `exp(i eta (a e^{-i nu t} + a^dagger e^{i nu t}))`,
//! up to the global factor `exp(-eta^2/2)`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::OperatorSet;
use crate::linalg::{self, CMat, HermitianEigen, C64, I, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Trap frequency in rad/us.
    #[serde(default = "default_nu")]
    pub nu: f64,
}

fn default_nu() -> f64 {
    std::f64::consts::TAU
}

impl SystemParams {
    pub fn new(eta: f64) -> Self {
        Self { eta, nu: default_nu() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("invalid Lamb-Dicke parameter {}", self.eta)));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::Config(format!("invalid trap frequency {}", self.nu)));
        }
        Ok(())
    }
}

/// Which part of the sideband series enters the Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianMode {
    /// Every term the truncated space supports.
    Full,
    /// The first `order` terms of the series (`order = 1` keeps only `eta^k`).
    Ld(usize),
}

impl Default for HamiltonianMode {
    fn default() -> Self {
        HamiltonianMode::Full
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianOptions {
    #[serde(default)]
    pub mode: HamiltonianMode,
    /// Multiply by `exp(-eta^2/2)`; defaults to on for the full series and off otherwise.
    #[serde(default)]
    pub prefactor: Option<bool>,
    /// Multiplies every Rabi frequency before use.
    #[serde(default = "one")]
    pub omega_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        Self {
            mode: HamiltonianMode::Full,
            prefactor: None,
            omega_scale: 1.0,
        }
    }
}

impl HamiltonianOptions {
    pub fn with_mode(mode: HamiltonianMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn uses_prefactor(&self) -> bool {
        self.prefactor
            .unwrap_or(matches!(self.mode, HamiltonianMode::Full))
    }
}

/// Two-tone bichromatic drive detuned by `±k nu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoToneDrive {
    pub k: u32,
    /// Rabi frequency in MHz.
    pub omega: f64,
    #[serde(default)]
    pub phi: f64,
}

impl TwoToneDrive {
    pub fn new(k: u32, omega: f64, phi: f64) -> Self {
        Self { k, omega, phi }
    }

    pub fn detuning(&self, params: &SystemParams) -> f64 {
        self.k as f64 * params.nu
    }
}

fn series_terms(mode: HamiltonianMode, dim: usize) -> usize {
    match mode {
        HamiltonianMode::Full => dim,
        HamiltonianMode::Ld(order) => order.min(dim),
    }
}

/// `D_k` for any integer order; `D_{-k} = (-1)^k D_k^dagger`.
pub fn sideband_operator(k: i32, eta: f64, dim: usize, mode: HamiltonianMode) -> Result<CMat> {
    let ka = k.unsigned_abs() as usize;
    if ka >= dim {
        return Err(Error::Config(format!(
            "sideband order {k} is not representable in dimension {dim}"
        )));
    }
    if let HamiltonianMode::Ld(0) = mode {
        return Err(Error::Config("series order must be at least 1".into()));
    }
    if eta < 0.0 || !eta.is_finite() {
        return Err(Error::Config(format!("invalid Lamb-Dicke parameter {eta}")));
    }
    let terms = series_terms(mode, dim);
    let lf: Vec<f64> = (0..=dim).map(linalg::ln_factorial).collect();
    let ik = I.powi(ka as i32);
    let mut out = Mat::zeros(dim, dim);
    // element <j + k| D_k |j> for k >= 0, otherwise <j - |k|| D_k |j>
    for j in 0..dim {
        let (row, low, high) = if k >= 0 {
            if j + ka >= dim {
                continue;
            }
            (j + ka, j, j + ka)
        } else {
            if j < ka {
                continue;
            }
            (j - ka, j - ka, j)
        };
        let mut s = ZERO;
        for n in 0..terms.min(low + 1) {
            let ln_mag = (2 * n + ka) as f64 * eta.ln() + 0.5 * (lf[low] + lf[high])
                - lf[n]
                - lf[n + ka]
                - lf[low - n];
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            if eta == 0.0 {
                if n == 0 && ka == 0 {
                    s += 1.0;
                }
                continue;
            }
            s += ik * (sign * ln_mag.exp());
        }
        out[(row, j)] = s;
    }
    Ok(out)
}

/// Motional factor `M_k(phi)` of the rotating-frame Hamiltonian `H_k = sigma_y (x) M_k(phi)`.
pub fn mode_hamiltonian(
    drive: &TwoToneDrive,
    params: &SystemParams,
    opts: &HamiltonianOptions,
    dim: usize,
) -> Result<CMat> {
    if drive.k == 0 {
        return Err(Error::Config("drive order must be at least 1".into()));
    }
    let dk = sideband_operator(drive.k as i32, params.eta, dim, opts.mode)?;
    let mut amp = drive.omega * opts.omega_scale / 4.0;
    if opts.uses_prefactor() {
        amp *= (-params.eta * params.eta / 2.0).exp();
    }
    let ph = C64::from_polar(amp, drive.phi);
    Ok(Mat::from_fn(dim, dim, |i, j| {
        ph * dk[(i, j)] + ph.conj() * dk[(j, i)].conj()
    }))
}

/// `sigma_y (x) M`, the joint-space Hamiltonian, qubit-major.
pub fn joint_from_mode(m: &CMat) -> CMat {
    let sy = Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => -I,
        (1, 0) => I,
        _ => ZERO,
    });
    linalg::kron(&sy, m)
}

/// Rotating-frame Hamiltonian `H_k` on qubit (x) oscillator.
pub fn rotating_hamiltonian(
    drive: &TwoToneDrive,
    params: &SystemParams,
    opts: &HamiltonianOptions,
    dim: usize,
) -> Result<CMat> {
    let h = joint_from_mode(&mode_hamiltonian(drive, params, opts, dim)?);
    linalg::ensure_hermitian(&h)?;
    Ok(h)
}

/// `exp(i eta (a + a^dagger))` assembled from the exact sideband matrix elements.
pub fn coupling_operator(eta: f64, dim: usize) -> Result<CMat> {
    let mut e = Mat::zeros(dim, dim);
    for k in -(dim as i32 - 1)..=(dim as i32 - 1) {
        e = &e + &sideband_operator(k, eta, dim, HamiltonianMode::Full)?;
    }
    Ok(linalg::scale(&e, C64::new((-eta * eta / 2.0).exp(), 0.0)))
}

/// Options for the time-dependent validation integrator.
#[derive(Clone, Copy, Debug)]
pub struct DirectOptions {
    pub initial_steps: usize,
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            initial_steps: 2000,
            tolerance: 1e-6,
            max_steps: 1 << 18,
        }
    }
}

/// Result of the direct integration.
#[derive(Clone, Debug)]
pub struct DirectPropagator {
    pub unitary: CMat,
    pub steps: usize,
    /// Max-abs change of the propagator under the last step halving.
    pub halving_change: f64,
}

/// Lab-frame drive `H(t) = sigma_+ (x) F(t) + h.c.` whose time average is the
/// rotating-frame `H_k`, with `F(t) = c (e^{i(delta t - phi)} + (-1)^k e^{-i(delta t - phi)}) E(t)`,
/// `c = -i (-1)^k Omega/4`, and `E(t)_{mn} = E(0)_{mn} e^{i nu t (m - n)}`.
struct LabDrive {
    dim: usize,
    e0: CMat,
    c: C64,
    k: u32,
    delta: f64,
    phi: f64,
    nu: f64,
}

impl LabDrive {
    fn new(drive: &TwoToneDrive, params: &SystemParams, omega_scale: f64, dim: usize) -> Result<Self> {
        let sign = if drive.k % 2 == 0 { 1.0 } else { -1.0 };
        Ok(Self {
            dim,
            e0: coupling_operator(params.eta, dim)?,
            c: -I * sign * drive.omega * omega_scale / 4.0,
            k: drive.k,
            delta: drive.detuning(params),
            phi: drive.phi,
            nu: params.nu,
        })
    }

    fn hamiltonian(&self, t: f64) -> CMat {
        let d = self.dim;
        let sign = if self.k % 2 == 0 { 1.0 } else { -1.0 };
        let arg = self.delta * t - self.phi;
        let f = self.c * (C64::from_polar(1.0, arg) + sign * C64::from_polar(1.0, -arg));
        let ph: Vec<C64> = (0..d).map(|m| C64::from_polar(1.0, self.nu * t * m as f64)).collect();
        let ft = Mat::from_fn(d, d, |m, n| f * self.e0[(m, n)] * ph[m] * ph[n].conj());
        Mat::from_fn(2 * d, 2 * d, |r, c| {
            let (qa, i) = (r / d, r % d);
            let (qb, j) = (c / d, c % d);
            match (qa, qb) {
                (0, 1) => ft[(i, j)],
                (1, 0) => ft[(j, i)].conj(),
                _ => ZERO,
            }
        })
    }

    fn propagate(&self, t: f64, steps: usize) -> Result<CMat> {
        let dt = t / steps as f64;
        let mut u = linalg::identity(2 * self.dim);
        for s in 0..steps {
            let h = self.hamiltonian((s as f64 + 0.5) * dt);
            let step = HermitianEigen::new_unchecked(&h)?.exp_i(dt);
            u = &step * &u;
        }
        Ok(u)
    }
}

/// Time-ordered propagator `T exp(i int_0^t H(s) ds)` of the lab-frame drive, by
/// exponential midpoint steps, halving the step until the change drops below tolerance.
pub fn direct_propagator(
    drive: &TwoToneDrive,
    params: &SystemParams,
    opts: &HamiltonianOptions,
    t: f64,
    ops: &OperatorSet,
    direct: &DirectOptions,
) -> Result<DirectPropagator> {
    if drive.k == 0 {
        return Err(Error::Config("drive order must be at least 1".into()));
    }
    let lab = LabDrive::new(drive, params, opts.omega_scale, ops.dim)?;
    let mut steps = direct.initial_steps.max(1);
    let mut u = lab.propagate(t, steps)?;
    loop {
        let finer = lab.propagate(t, steps * 2)?;
        let change = linalg::max_abs_diff(&finer, &u);
        steps *= 2;
        u = finer;
        if change < direct.tolerance {
            return Ok(DirectPropagator {
                unitary: u,
                steps,
                halving_change: change,
            });
        }
        if steps * 2 > direct.max_steps {
            return Err(Error::NotConverged { change });
        }
    }
}

/// `e^{-eta^2/2} sum_{|k| <= kmax} D_k e^{i k nu t}`.
pub fn sideband_series(eta: f64, nu_t: f64, kmax: usize, dim: usize) -> Result<CMat> {
    let mut s = Mat::zeros(dim, dim);
    let kmax = kmax.min(dim - 1) as i32;
    for k in -kmax..=kmax {
        let dk = sideband_operator(k, eta, dim, HamiltonianMode::Full)?;
        s = &s + &linalg::scale(&dk, C64::from_polar(1.0, k as f64 * nu_t));
    }
    Ok(linalg::scale(&s, C64::new((-eta * eta / 2.0).exp(), 0.0)))
}
