// SPDX-License-Identifier: Apache-2.0

//! Truncated Fock space of one motional mode, optionally paired with a qubit.
//!
//! Joint states are stored qubit-major: index `q * d + n`, with `q = 0` the
//! excited level `|e>` and `q = 1` the ground level `|g>`.

use std::f64::consts::SQRT_2;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, HermitianEigen, C64, I, ONE, ZERO};

pub const MIN_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertConfig {
    pub dim_fock: usize,
    #[serde(default = "default_buffer")]
    pub leakage_buffer: usize,
    #[serde(default = "default_leakage_tol")]
    pub leakage_tol: f64,
}

fn default_buffer() -> usize {
    20
}

fn default_leakage_tol() -> f64 {
    1e-4
}

impl Default for HilbertConfig {
    fn default() -> Self {
        Self {
            dim_fock: 120,
            leakage_buffer: 20,
            leakage_tol: 1e-4,
        }
    }
}

impl HilbertConfig {
    pub fn new(dim_fock: usize, leakage_buffer: usize, leakage_tol: f64) -> Result<Self> {
        let cfg = Self {
            dim_fock,
            leakage_buffer,
            leakage_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with the default buffer and tolerance.
    pub fn with_dim(dim_fock: usize) -> Result<Self> {
        Self::new(dim_fock, default_buffer().min(dim_fock / 4), default_leakage_tol())
    }

    /// Larger default used for fourth-order gates.
    pub fn quartic() -> Self {
        Self {
            dim_fock: 160,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_fock < MIN_DIM {
            return Err(Error::Config(format!(
                "dim_fock must be at least {MIN_DIM}, got {}",
                self.dim_fock
            )));
        }
        if 2 * self.leakage_buffer >= self.dim_fock {
            return Err(Error::Config(format!(
                "leakage buffer {} must be below half of dim_fock {}",
                self.leakage_buffer, self.dim_fock
            )));
        }
        if !(self.leakage_tol > 0.0) {
            return Err(Error::Config("leakage tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn check_leakage(&self, block: &str, population: f64) -> Result<()> {
        if population > self.leakage_tol {
            return Err(Error::Leakage {
                block: block.to_string(),
                population,
                buffer: self.leakage_buffer,
                tolerance: self.leakage_tol,
            });
        }
        Ok(())
    }
}

/// Ladder and quadrature operators with cached spectral data.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub dim: usize,
    pub a: CMat,
    pub ad: CMat,
    pub n: CMat,
    pub x: CMat,
    pub p: CMat,
    pub x_eig: HermitianEigen,
    pub p_eig: HermitianEigen,
    /// Eigenbasis of `K = i(a^2 - a^dagger^2)/2`, so that `S(r) = exp(-i r K)`.
    pub k_eig: HermitianEigen,
}

impl OperatorSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config("dimension must be at least 2".into()));
        }
        let a = annihilation(dim);
        let ad = linalg::adjoint(&a);
        let n = Mat::from_fn(dim, dim, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO });
        let x = linalg::scale(&(&a + &ad), C64::new(1.0 / SQRT_2, 0.0));
        let p = linalg::scale(&(&a - &ad), C64::new(0.0, -1.0 / SQRT_2));
        let a2 = &a * &a;
        let ad2 = &ad * &ad;
        let k = linalg::scale(&(&a2 - &ad2), C64::new(0.0, 0.5));
        Ok(Self {
            dim,
            x_eig: HermitianEigen::new(&x)?,
            p_eig: HermitianEigen::new(&p)?,
            k_eig: HermitianEigen::new(&k)?,
            a,
            ad,
            n,
            x,
            p,
        })
    }

    pub fn for_config(cfg: &HilbertConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(cfg.dim_fock)
    }

    /// `R(theta) = exp(i theta n)`, which maps `|alpha>` to `|alpha e^{i theta}>`.
    pub fn rotation_phases(&self, theta: f64) -> Vec<C64> {
        (0..self.dim)
            .map(|k| C64::from_polar(1.0, theta * k as f64))
            .collect()
    }

    pub fn rotation(&self, theta: f64) -> CMat {
        linalg::diag(&self.rotation_phases(theta))
    }

    /// `D(beta) = exp(beta a^dagger - beta^* a)`.
    pub fn displacement(&self, beta: C64) -> CMat {
        let (r, th) = beta.to_polar();
        let d = self.p_eig.exp_i(-SQRT_2 * r);
        if th == 0.0 {
            return d;
        }
        let ph = self.rotation_phases(th);
        Mat::from_fn(self.dim, self.dim, |i, j| ph[i] * d[(i, j)] * ph[j].conj())
    }

    /// `S(r) = exp(r (a^2 - a^dagger^2) / 2)`.
    pub fn squeezing(&self, r: f64) -> CMat {
        self.k_eig.exp_i(-r)
    }

    pub fn apply_rotation(&self, theta: f64, psi: &[C64]) -> Vec<C64> {
        psi.iter()
            .zip(self.rotation_phases(theta))
            .map(|(c, ph)| c * ph)
            .collect()
    }

    pub fn apply_displacement(&self, beta: C64, psi: &[C64]) -> Vec<C64> {
        let (r, th) = beta.to_polar();
        if th == 0.0 {
            return self.p_eig.apply_exp_i(-SQRT_2 * r, psi);
        }
        let back = self.apply_rotation(-th, psi);
        let moved = self.p_eig.apply_exp_i(-SQRT_2 * r, &back);
        self.apply_rotation(th, &moved)
    }

    pub fn apply_squeezing(&self, r: f64, psi: &[C64]) -> Vec<C64> {
        self.k_eig.apply_exp_i(-r, psi)
    }

    pub fn quadrature(&self, basis: Quadrature) -> &CMat {
        match basis {
            Quadrature::X => &self.x,
            Quadrature::P => &self.p,
        }
    }

    pub fn quadrature_eigen(&self, basis: Quadrature) -> &HermitianEigen {
        match basis {
            Quadrature::X => &self.x_eig,
            Quadrature::P => &self.p_eig,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

pub fn annihilation(dim: usize) -> CMat {
    Mat::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// `exp(sign * i * t * H)` for a Hermitian generator.
pub fn evolve_unitary(h: &CMat, t: f64, sign: f64) -> Result<CMat> {
    let e = HermitianEigen::new(h)?;
    Ok(e.exp_i(sign * t))
}

/// State of the motional mode alone.
#[derive(Clone, Debug)]
pub enum ModeState {
    Pure(Vec<C64>),
    Mixed(CMat),
}

impl ModeState {
    pub fn dim(&self) -> usize {
        match self {
            ModeState::Pure(v) => v.len(),
            ModeState::Mixed(m) => m.nrows(),
        }
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::Config(format!("Fock level {n} outside dimension {dim}")));
        }
        let mut v = vec![ZERO; dim];
        v[n] = ONE;
        Ok(ModeState::Pure(v))
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut v = vec![ZERO; dim];
        v[0] = ONE;
        ModeState::Pure(v)
    }

    pub fn density(&self) -> CMat {
        match self {
            ModeState::Pure(v) => linalg::outer(v, v),
            ModeState::Mixed(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            ModeState::Pure(v) => linalg::norm_sqr(v),
            ModeState::Mixed(m) => linalg::trace(m).re,
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            ModeState::Pure(v) => v.iter().map(|c| c.norm_sqr()).collect(),
            ModeState::Mixed(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    /// Population in the top `buffer` Fock levels.
    pub fn leakage(&self, buffer: usize) -> f64 {
        let pops = self.populations();
        let d = pops.len();
        pops[d.saturating_sub(buffer)..].iter().sum()
    }

    pub fn purity(&self) -> f64 {
        match self {
            ModeState::Pure(v) => linalg::norm_sqr(v).powi(2),
            ModeState::Mixed(m) => {
                let mut s = 0.0;
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        s += m[(i, j)].norm_sqr();
                    }
                }
                s
            }
        }
    }

    pub fn expect(&self, op: &CMat) -> C64 {
        match self {
            ModeState::Pure(v) => linalg::dot(v, &linalg::matvec(op, v)),
            ModeState::Mixed(m) => linalg::trace(&(op * m)),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, ModeState::Pure(_))
    }
}

/// Coherent state `|alpha>` from exact Poisson amplitudes, renormalised after truncation.
pub fn coherent_state(alpha: C64, cfg: &HilbertConfig) -> Result<ModeState> {
    cfg.validate()?;
    let d = cfg.dim_fock;
    let mut v = vec![ZERO; d];
    v[0] = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for k in 1..d {
        v[k] = v[k - 1] * alpha / (k as f64).sqrt();
    }
    let state = ModeState::Pure(v);
    cfg.check_leakage("coherent state", state.leakage(cfg.leakage_buffer))?;
    Ok(normalized(state))
}

/// Thermal state with mean occupation `nbar`.
pub fn thermal_state(nbar: f64, cfg: &HilbertConfig) -> Result<ModeState> {
    cfg.validate()?;
    if !(nbar >= 0.0) {
        return Err(Error::Config(format!("mean occupation must be non-negative, got {nbar}")));
    }
    let d = cfg.dim_fock;
    let q = nbar / (1.0 + nbar);
    let pops: Vec<f64> = (0..d).map(|k| q.powi(k as i32) / (1.0 + nbar)).collect();
    let m = linalg::diag(&pops.iter().map(|&p| C64::new(p, 0.0)).collect::<Vec<_>>());
    let state = ModeState::Mixed(m);
    cfg.check_leakage("thermal state", state.leakage(cfg.leakage_buffer))?;
    Ok(normalized(state))
}

pub fn normalized(state: ModeState) -> ModeState {
    let t = state.trace();
    match state {
        ModeState::Pure(v) => {
            let s = 1.0 / t.sqrt();
            ModeState::Pure(v.into_iter().map(|c| c * s).collect())
        }
        ModeState::Mixed(m) => ModeState::Mixed(linalg::scale(&m, C64::new(1.0 / t, 0.0))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitInit {
    /// `(|e> + i|g>)/sqrt(2)`, the `+1` eigenstate of `sigma_y`.
    #[default]
    PlusY,
    MinusY,
    Excited,
    Ground,
}

impl QubitInit {
    /// Amplitudes on `(|e>, |g>)`.
    pub fn amplitudes(self) -> [C64; 2] {
        let h = 1.0 / SQRT_2;
        match self {
            QubitInit::PlusY => [C64::new(h, 0.0), C64::new(0.0, h)],
            QubitInit::MinusY => [C64::new(h, 0.0), C64::new(0.0, -h)],
            QubitInit::Excited => [ONE, ZERO],
            QubitInit::Ground => [ZERO, ONE],
        }
    }
}

/// Qubit (x) oscillator state.
#[derive(Clone, Debug)]
pub struct JointState {
    pub dim_fock: usize,
    pub data: ModeState,
}

impl JointState {
    pub fn product(qubit: QubitInit, mode: &ModeState) -> Self {
        let d = mode.dim();
        let q = qubit.amplitudes();
        let data = match mode {
            ModeState::Pure(v) => {
                let mut out = Vec::with_capacity(2 * d);
                for amp in q {
                    out.extend(v.iter().map(|c| amp * c));
                }
                ModeState::Pure(out)
            }
            ModeState::Mixed(m) => {
                let qm = Mat::from_fn(2, 2, |i, j| q[i] * q[j].conj());
                ModeState::Mixed(linalg::kron(&qm, m))
            }
        };
        Self { dim_fock: d, data }
    }

    pub fn is_pure(&self) -> bool {
        self.data.is_pure()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn density(&self) -> CMat {
        self.data.density()
    }

    pub fn to_mixed(&self) -> Self {
        Self {
            dim_fock: self.dim_fock,
            data: ModeState::Mixed(self.density()),
        }
    }

    /// Oscillator state after tracing out the qubit.
    pub fn reduced_mode(&self) -> ModeState {
        let d = self.dim_fock;
        match &self.data {
            ModeState::Pure(v) => {
                let (e, g) = v.split_at(d);
                let m = &linalg::outer(e, e) + &linalg::outer(g, g);
                ModeState::Mixed(m)
            }
            ModeState::Mixed(m) => ModeState::Mixed(Mat::from_fn(d, d, |i, j| {
                m[(i, j)] + m[(i + d, j + d)]
            })),
        }
    }

    /// Qubit state after tracing out the oscillator, in the `(|e>, |g>)` basis.
    pub fn reduced_qubit(&self) -> [[C64; 2]; 2] {
        let d = self.dim_fock;
        let mut out = [[ZERO; 2]; 2];
        for qa in 0..2 {
            for qb in 0..2 {
                out[qa][qb] = match &self.data {
                    ModeState::Pure(v) => (0..d).map(|n| v[qa * d + n] * v[qb * d + n].conj()).sum(),
                    ModeState::Mixed(m) => (0..d).map(|n| m[(qa * d + n, qb * d + n)]).sum(),
                };
            }
        }
        out
    }

    /// Population in the top `buffer` Fock levels, summed over the qubit.
    pub fn leakage(&self, buffer: usize) -> f64 {
        let d = self.dim_fock;
        let pops = self.data.populations();
        (d.saturating_sub(buffer)..d)
            .map(|n| pops[n] + pops[n + d])
            .sum()
    }

    /// Split into `sigma_y` eigencomponents.
    pub(crate) fn to_y_basis(&self) -> YState {
        let d = self.dim_fock;
        let h = 1.0 / SQRT_2;
        match &self.data {
            ModeState::Pure(v) => {
                let (e, g) = v.split_at(d);
                let plus = e.iter().zip(g).map(|(a, b)| (a - I * b) * h).collect();
                let minus = e.iter().zip(g).map(|(a, b)| (a + I * b) * h).collect();
                YState::Pure { plus, minus }
            }
            ModeState::Mixed(m) => {
                // rho_{ab} = <a| rho |b> for a, b in {+y, -y}
                let w = [[C64::new(h, 0.0), -I * h], [C64::new(h, 0.0), I * h]];
                let block = |a: usize, b: usize| {
                    Mat::from_fn(d, d, |i, j| {
                        let mut s = ZERO;
                        for qa in 0..2 {
                            for qb in 0..2 {
                                s += w[a][qa] * m[(qa * d + i, qb * d + j)] * w[b][qb].conj();
                            }
                        }
                        s
                    })
                };
                let blocks = [[block(0, 0), block(0, 1)], [block(1, 0), block(1, 1)]];
                YState::Mixed(blocks)
            }
        }
    }

    pub(crate) fn from_y_basis(y: YState) -> Self {
        let h = 1.0 / SQRT_2;
        match y {
            YState::Pure { plus, minus } => {
                let d = plus.len();
                let mut v = Vec::with_capacity(2 * d);
                v.extend(plus.iter().zip(&minus).map(|(p, m)| (p + m) * h));
                v.extend(plus.iter().zip(&minus).map(|(p, m)| I * (p - m) * h));
                Self {
                    dim_fock: d,
                    data: ModeState::Pure(v),
                }
            }
            YState::Mixed(blocks) => {
                let d = blocks[0][0].nrows();
                // column q of the basis change: |+y>, |-y> amplitudes on (e, g)
                let u = [[C64::new(h, 0.0), C64::new(h, 0.0)], [I * h, -I * h]];
                let m = Mat::from_fn(2 * d, 2 * d, |r, c| {
                    let (qa, i) = (r / d, r % d);
                    let (qb, j) = (c / d, c % d);
                    let mut s = ZERO;
                    for a in 0..2 {
                        for b in 0..2 {
                            s += u[qa][a] * blocks[a][b][(i, j)] * u[qb][b].conj();
                        }
                    }
                    s
                });
                Self {
                    dim_fock: d,
                    data: ModeState::Mixed(m),
                }
            }
        }
    }
}

/// Joint state in the `sigma_y` eigenbasis of the qubit.
#[derive(Clone, Debug)]
pub(crate) enum YState {
    Pure { plus: Vec<C64>, minus: Vec<C64> },
    Mixed([[CMat; 2]; 2]),
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ops(d: usize) -> OperatorSet {
        OperatorSet::new(d).unwrap()
    }

    #[test]
    fn config_rejects_small_dimension() {
        assert!(HilbertConfig::new(8, 2, 1e-4).is_err());
        assert!(HilbertConfig::new(40, 20, 1e-4).is_err());
        assert!(HilbertConfig::new(40, 10, 1e-4).is_ok());
    }

    #[test]
    fn commutator_is_identity_away_from_edge() {
        let o = ops(30);
        let c = &(&o.a * &o.ad) - &(&o.ad * &o.a);
        for i in 0..29 {
            assert_abs_diff_eq!(c[(i, i)].re, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(c[(29, 29)].re, -29.0, epsilon = 1e-12);
    }

    #[test]
    fn displaced_vacuum_matches_poisson_amplitudes() {
        let cfg = HilbertConfig::new(60, 10, 1e-6).unwrap();
        let o = OperatorSet::for_config(&cfg).unwrap();
        for beta in [C64::new(1.5, 0.0), C64::new(-0.7, 1.1), C64::new(0.0, -2.0)] {
            let vac = ModeState::vacuum(60);
            let ModeState::Pure(v) = vac else { unreachable!() };
            let moved = o.apply_displacement(beta, &v);
            let ModeState::Pure(c) = coherent_state(beta, &cfg).unwrap() else { unreachable!() };
            let f = linalg::dot(&c, &moved).norm_sqr();
            assert!((1.0 - f).abs() < 1e-8, "beta {beta}: fidelity {f}");
            let dense = linalg::matvec(&o.displacement(beta), &v);
            for (a, b) in dense.iter().zip(&moved) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn squeezed_vacuum_variances() {
        let o = ops(80);
        let r = 0.5;
        let ModeState::Pure(vac) = ModeState::vacuum(80) else { unreachable!() };
        let s = ModeState::Pure(o.apply_squeezing(r, &vac));
        let x2 = s.expect(&(&o.x * &o.x)).re;
        let p2 = s.expect(&(&o.p * &o.p)).re;
        assert_abs_diff_eq!(x2, 0.5 * (-2.0 * r).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(p2, 0.5 * (2.0 * r).exp(), epsilon = 1e-9);
    }

    #[test]
    fn rotation_moves_coherent_amplitude() {
        let cfg = HilbertConfig::new(40, 8, 1e-6).unwrap();
        let o = OperatorSet::for_config(&cfg).unwrap();
        let ModeState::Pure(c) = coherent_state(C64::new(1.0, 0.0), &cfg).unwrap() else { unreachable!() };
        let r = ModeState::Pure(o.apply_rotation(std::f64::consts::FRAC_PI_2, &c));
        let a = r.expect(&o.a);
        assert!((a - C64::new(0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn thermal_occupation() {
        let cfg = HilbertConfig::new(80, 10, 1e-4).unwrap();
        let o = OperatorSet::for_config(&cfg).unwrap();
        let t = thermal_state(1.3, &cfg).unwrap();
        assert_abs_diff_eq!(t.trace(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.expect(&o.n).re, 1.3, epsilon = 1e-4);
    }

    #[test]
    fn coherent_state_reports_leakage() {
        let cfg = HilbertConfig::new(20, 4, 1e-6).unwrap();
        assert!(matches!(
            coherent_state(C64::new(4.0, 0.0), &cfg),
            Err(Error::Leakage { .. })
        ));
    }

    #[test]
    fn y_basis_round_trip() {
        let cfg = HilbertConfig::new(20, 4, 1e-4).unwrap();
        let m = coherent_state(C64::new(0.3, -0.2), &cfg).unwrap();
        for q in [QubitInit::PlusY, QubitInit::Ground] {
            let j = JointState::product(q, &m);
            let back = JointState::from_y_basis(j.to_y_basis());
            assert!(linalg::max_abs_diff(&back.density(), &j.density()) < 1e-13);
            let jm = j.to_mixed();
            let backm = JointState::from_y_basis(jm.to_y_basis());
            assert!(linalg::max_abs_diff(&backm.density(), &j.density()) < 1e-13);
        }
        let j = JointState::product(QubitInit::PlusY, &m);
        let YState::Pure { minus, .. } = j.to_y_basis() else { unreachable!() };
        assert!(linalg::norm_sqr(&minus) < 1e-30);
    }

    #[test]
    fn reduced_states_of_product() {
        let cfg = HilbertConfig::new(20, 4, 1e-4).unwrap();
        let m = coherent_state(C64::new(0.5, 0.0), &cfg).unwrap();
        let j = JointState::product(QubitInit::PlusY, &m);
        let q = j.reduced_qubit();
        assert!((q[0][1] - C64::new(0.0, -0.5)).norm() < 1e-12);
        let r = j.reduced_mode();
        assert!(linalg::max_abs_diff(&r.density(), &m.density()) < 1e-13);
    }
}
