// SPDX-License-Identifier: Apache-2.0

//! Wigner function of a motional state, normalised so that `int W dq dp = 1`.
//!
//! Grid values come from the Laguerre expansion of `W` in the Fock basis, summed with a
//! normalised three-term recurrence that stays finite for large `|alpha|`. A displaced-parity
//! evaluation in an enlarged space is kept as an independent point check.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeState, OperatorSet};
use crate::linalg::{self, CMat, HermitianEigen, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
    /// Grow the window until `|W|` on its boundary falls below `1e-6`.
    #[serde(default)]
    pub auto_extend: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(10.0, 301)
    }
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            q_min: -half_width,
            q_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            nq: n,
            np: n,
            auto_extend: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nq < 2 || self.np < 2 || !(self.q_max > self.q_min) || !(self.p_max > self.p_min) {
            return Err(Error::Config("Wigner grid needs at least 2x2 points and a positive extent".into()));
        }
        Ok(())
    }

    fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        let lin = |a: f64, b: f64, n: usize| (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        (lin(self.q_min, self.q_max, self.nq), lin(self.p_min, self.p_max, self.np))
    }
}

pub const BOUNDARY_TOL: f64 = 1e-6;
const MAX_EXTENT: f64 = 40.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Row-major by momentum: `values[ip * nq + iq]`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn nq(&self) -> usize {
        self.q.len()
    }

    pub fn np(&self) -> usize {
        self.p.len()
    }

    pub fn at(&self, iq: usize, ip: usize) -> f64 {
        self.values[ip * self.nq() + iq]
    }

    pub fn cell_area(&self) -> f64 {
        (self.q[1] - self.q[0]) * (self.p[1] - self.p[0])
    }

    /// `sum W dq dp` by the trapezoidal rule.
    pub fn integral(&self) -> f64 {
        let (nq, np) = (self.nq(), self.np());
        let mut s = 0.0;
        for ip in 0..np {
            let wp = if ip == 0 || ip == np - 1 { 0.5 } else { 1.0 };
            for iq in 0..nq {
                let wq = if iq == 0 || iq == nq - 1 { 0.5 } else { 1.0 };
                s += wp * wq * self.at(iq, ip);
            }
        }
        s * self.cell_area()
    }

    pub fn normalization_defect(&self) -> f64 {
        (self.integral() - 1.0).abs()
    }

    pub fn boundary_max(&self) -> f64 {
        let (nq, np) = (self.nq(), self.np());
        let mut m = 0.0f64;
        for iq in 0..nq {
            m = m.max(self.at(iq, 0).abs()).max(self.at(iq, np - 1).abs());
        }
        for ip in 0..np {
            m = m.max(self.at(0, ip).abs()).max(self.at(nq - 1, ip).abs());
        }
        m
    }

    /// Bilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, q: f64, p: f64) -> Option<f64> {
        let locate = |axis: &[f64], x: f64| -> Option<(usize, f64)> {
            let n = axis.len();
            if x < axis[0] || x > axis[n - 1] {
                return None;
            }
            let h = axis[1] - axis[0];
            let i = (((x - axis[0]) / h).floor() as usize).min(n - 2);
            Some((i, (x - axis[i]) / h))
        };
        let (iq, tq) = locate(&self.q, q)?;
        let (ip, tp) = locate(&self.p, p)?;
        let v00 = self.at(iq, ip);
        let v10 = self.at(iq + 1, ip);
        let v01 = self.at(iq, ip + 1);
        let v11 = self.at(iq + 1, ip + 1);
        Some(v00 * (1.0 - tq) * (1.0 - tp) + v10 * tq * (1.0 - tp) + v01 * (1.0 - tq) * tp + v11 * tq * tp)
    }

    /// CSV with header `q,p,w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,p,w\n");
        for (ip, p) in self.p.iter().enumerate() {
            for (iq, q) in self.q.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", fmt12(*q), fmt12(*p), fmt12(self.at(iq, ip))));
            }
        }
        out
    }
}

/// Twelve significant digits.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.11e}", x);
    let v: f64 = s.parse().unwrap_or(x);
    format!("{v}")
}

/// Precomputed diagonals `c_L[n] = (-1)^n rho_{n+L, n}` and recurrence coefficients.
struct LaguerreSeries {
    dim: usize,
    diagonals: Vec<Vec<C64>>,
    ln_fact: Vec<f64>,
}

impl LaguerreSeries {
    fn new(rho: &CMat) -> Self {
        let d = rho.nrows();
        let diagonals = (0..d)
            .map(|l| {
                (0..d - l)
                    .map(|n| {
                        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                        rho[(n + l, n)] * s
                    })
                    .collect()
            })
            .collect();
        Self {
            dim: d,
            diagonals,
            ln_fact: (0..=d).map(linalg::ln_factorial).collect(),
        }
    }

    /// `W(q, p)`, using `f_n^L(z) = sqrt(n!/(n+L)!) z^{L/2} e^{-z/2} L_n^L(z)` with `z = 4|alpha|^2`.
    fn eval(&self, q: f64, p: f64) -> f64 {
        let alpha = C64::new(q, p) * FRAC_1_SQRT_2;
        let z = 4.0 * alpha.norm_sqr();
        let theta = alpha.arg();
        let mut w = 0.0;
        for l in 0..self.dim {
            let c = &self.diagonals[l];
            let lf = l as f64;
            let f0 = if z == 0.0 {
                if l == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (0.5 * lf * z.ln() - 0.5 * z - 0.5 * self.ln_fact[l]).exp()
            };
            if f0 == 0.0 && z != 0.0 {
                continue;
            }
            let mut prev = 0.0;
            let mut cur = f0;
            let mut acc = c[0] * cur;
            for n in 0..c.len() - 1 {
                let nf = n as f64;
                let s = ((nf + 1.0) * (nf + lf + 1.0)).sqrt();
                let next = ((2.0 * nf + 1.0 + lf - z) * cur - (nf * (nf + lf)).sqrt() * prev) / s;
                prev = cur;
                cur = next;
                acc += c[n + 1] * cur;
            }
            let weight = if l == 0 { 1.0 } else { 2.0 };
            w += weight * (C64::from_polar(1.0, -lf * theta) * acc).re;
        }
        w / PI
    }
}

fn density_of(state: &ModeState) -> CMat {
    state.density()
}

fn compute_grid(series: &LaguerreSeries, spec: &GridSpec) -> WignerGrid {
    let (q, p) = spec.axes();
    let rows: Vec<Vec<f64>> = p
        .par_iter()
        .map(|&pv| q.iter().map(|&qv| series.eval(qv, pv)).collect())
        .collect();
    WignerGrid {
        q,
        p,
        values: rows.into_iter().flatten().collect(),
    }
}

/// Wigner function on a grid.
pub fn wigner(state: &ModeState, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let series = LaguerreSeries::new(&density_of(state));
    let mut spec = *spec;
    loop {
        let grid = compute_grid(&series, &spec);
        if !spec.auto_extend || grid.boundary_max() < BOUNDARY_TOL {
            return Ok(grid);
        }
        let grow = |a: f64, b: f64| {
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a) * 1.25;
            (c - h, c + h)
        };
        let (q0, q1) = grow(spec.q_min, spec.q_max);
        let (p0, p1) = grow(spec.p_min, spec.p_max);
        if q1 - q0 > 2.0 * MAX_EXTENT || p1 - p0 > 2.0 * MAX_EXTENT {
            return Ok(grid);
        }
        let scale_n = |n: usize| ((n - 1) as f64 * 1.25).round() as usize + 1;
        spec = GridSpec {
            q_min: q0,
            q_max: q1,
            p_min: p0,
            p_max: p1,
            nq: scale_n(spec.nq),
            np: scale_n(spec.np),
            auto_extend: true,
        };
    }
}

/// Single Wigner value from the series.
pub fn wigner_point(state: &ModeState, q: f64, p: f64) -> f64 {
    LaguerreSeries::new(&density_of(state)).eval(q, p)
}

/// `W = (1/pi) Tr[D(alpha)^dagger rho D(alpha) Pi]`, evaluated after embedding into `dim + pad` levels.
pub fn wigner_parity_point(state: &ModeState, q: f64, p: f64, pad: usize) -> Result<f64> {
    let d = state.dim();
    let ops = OperatorSet::new(d + pad)?;
    let rho = density_of(state);
    let big = Mat::from_fn(d + pad, d + pad, |i, j| if i < d && j < d { rho[(i, j)] } else { C64::new(0.0, 0.0) });
    let alpha = C64::new(q, p) * FRAC_1_SQRT_2;
    let dm = ops.displacement(-alpha);
    let moved = &(&dm * &big) * dm.adjoint();
    let mut s = 0.0;
    for k in 0..d + pad {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * moved[(k, k)].re;
    }
    Ok(s / PI)
}

/// `V_- = (1/2) sum (|W| - W) dq dp`.
pub fn negativity_volume(grid: &WignerGrid) -> f64 {
    let s: f64 = grid.values.iter().map(|w| w.abs() - w).sum();
    0.5 * s * grid.cell_area()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LineCut {
    /// `p = slope * q + intercept` for `q` in `[from, to]`.
    Line { slope: f64, intercept: f64, from: f64, to: f64, samples: usize },
    /// Fixed `q`, `p` in `[from, to]`.
    Vertical { q: f64, from: f64, to: f64, samples: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutSample {
    pub s: f64,
    pub q: f64,
    pub p: f64,
    pub w: f64,
}

/// Wigner values along a line, parametrised by arc length from the start point.
pub fn wigner_cut(state: &ModeState, cut: &LineCut) -> Result<Vec<CutSample>> {
    let pts: Vec<(f64, f64)> = match *cut {
        LineCut::Line { slope, intercept, from, to, samples } => {
            if samples < 2 {
                return Err(Error::Config("a cut needs at least two samples".into()));
            }
            (0..samples)
                .map(|i| {
                    let q = from + (to - from) * i as f64 / (samples - 1) as f64;
                    (q, slope * q + intercept)
                })
                .collect()
        }
        LineCut::Vertical { q, from, to, samples } => {
            if samples < 2 {
                return Err(Error::Config("a cut needs at least two samples".into()));
            }
            (0..samples)
                .map(|i| (q, from + (to - from) * i as f64 / (samples - 1) as f64))
                .collect()
        }
    };
    let series = LaguerreSeries::new(&density_of(state));
    let (q0, p0) = pts[0];
    Ok(pts
        .par_iter()
        .map(|&(q, p)| CutSample {
            s: ((q - q0).powi(2) + (p - p0).powi(2)).sqrt(),
            q,
            p,
            w: series.eval(q, p),
        })
        .collect())
}

pub fn cuts_to_csv(cuts: &[(String, Vec<CutSample>)]) -> String {
    let mut out = String::from("cut,s,q,p,w\n");
    for (name, samples) in cuts {
        for c in samples {
            out.push_str(&format!("{name},{},{},{},{}\n", fmt12(c.s), fmt12(c.q), fmt12(c.p), fmt12(c.w)));
        }
    }
    out
}

/// Wigner function of `exp(i zeta P^3)|0>` from its momentum wavefunction, by direct quadrature.
///
/// `W(q, p) = (1/pi) int phi*(p + y) phi(p - y) e^{-2 i q y} dy`, `phi(p) = pi^{-1/4} e^{-p^2/2 + i zeta p^3}`.
pub fn cubic_phase_vacuum_wigner(zeta: f64, q: f64, p: f64) -> f64 {
    // phase difference zeta((p-y)^3 - (p+y)^3) = -zeta(6 p^2 y + 2 y^3)
    let n = 4001;
    let ymax = 9.0;
    let h = 2.0 * ymax / (n - 1) as f64;
    let mut s = 0.0;
    for i in 0..n {
        let y = -ymax + h * i as f64;
        let env = (-(p * p + y * y)).exp();
        let phase = -zeta * (6.0 * p * p * y + 2.0 * y.powi(3)) - 2.0 * q * y;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        s += w * env * phase.cos();
    }
    s * h / (PI * PI.sqrt())
}

/// Eigen-decomposition based rank of a density matrix, kept for diagnostics.
pub fn effective_rank(state: &ModeState, cutoff: f64) -> Result<usize> {
    let e = HermitianEigen::new_unchecked(&state.density())?;
    Ok(e.values.iter().filter(|v| **v > cutoff).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, thermal_state, HilbertConfig};
    use crate::protocol::{apply_ideal, TargetGate};

    fn laguerre(n: usize, x: f64) -> f64 {
        let (mut a, mut b) = (1.0, 1.0 - x);
        if n == 0 {
            return a;
        }
        for m in 1..n {
            let m = m as f64;
            let c = ((2.0 * m + 1.0 - x) * b - m * a) / (m + 1.0);
            a = b;
            b = c;
        }
        b
    }

    #[test]
    fn fock_states_match_closed_form() {
        for n in [0usize, 1, 2, 5, 12] {
            let s = ModeState::fock(n, 30).unwrap();
            for &(q, p) in &[(0.0, 0.0), (0.7, -0.3), (2.1, 1.4), (-3.0, 0.5)] {
                let r2: f64 = q * q + p * p;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let expect = sign / PI * (-r2).exp() * laguerre(n, 2.0 * r2);
                assert!((wigner_point(&s, q, p) - expect).abs() < 1e-12, "n {n} at ({q},{p})");
            }
        }
    }

    #[test]
    fn vacuum_peak_and_coherent_shift() {
        let cfg = HilbertConfig::new(40, 8, 1e-6).unwrap();
        let vac = ModeState::vacuum(40);
        assert!((wigner_point(&vac, 0.0, 0.0) - 1.0 / PI).abs() < 1e-14);
        let a = C64::new(1.0, -0.5);
        let c = coherent_state(a, &cfg).unwrap();
        let (q0, p0) = (2f64.sqrt() * a.re, 2f64.sqrt() * a.im);
        let expect = (-(0.3f64.powi(2) + 0.2f64.powi(2))).exp() / PI;
        assert!((wigner_point(&c, q0 + 0.3, p0 - 0.2) - expect).abs() < 1e-10);
    }

    #[test]
    fn grid_normalization_and_positivity_of_gaussian_states() {
        let cfg = HilbertConfig::new(40, 8, 1e-4).unwrap();
        let t = thermal_state(0.8, &cfg).unwrap();
        let g = wigner(&t, &GridSpec::square(8.0, 161)).unwrap();
        assert!(g.normalization_defect() < 1e-6);
        assert!(negativity_volume(&g) < 1e-12);
    }

    #[test]
    fn parity_route_agrees_with_series() {
        let cfg = HilbertConfig::new(30, 6, 1e-4).unwrap();
        let s = apply_ideal(&OperatorSet::new(30).unwrap(), &TargetGate::cubic(0.1), &ModeState::vacuum(30));
        let _ = cfg;
        for &(q, p) in &[(0.0, 0.0), (-1.0, 0.8), (0.5, -1.5)] {
            let a = wigner_point(&s, q, p);
            let b = wigner_parity_point(&s, q, p, 60).unwrap();
            assert!((a - b).abs() < 1e-9, "({q},{p}): {a} vs {b}");
        }
    }

    #[test]
    fn cubic_phase_state_matches_wavefunction_integral() {
        let ops = OperatorSet::new(120).unwrap();
        let s = apply_ideal(&ops, &TargetGate::cubic(0.2), &ModeState::vacuum(120));
        for &(q, p) in &[(0.0, 0.0), (-1.5, 0.5), (-3.0, 1.2), (0.8, -0.4)] {
            let a = wigner_point(&s, q, p);
            let b = cubic_phase_vacuum_wigner(0.2, q, p);
            assert!((a - b).abs() < 1e-6, "({q},{p}): {a} vs {b}");
        }
    }

    #[test]
    fn interpolation_reproduces_cut() {
        let s = ModeState::fock(2, 20).unwrap();
        let g = wigner(&s, &GridSpec::square(4.0, 201)).unwrap();
        let cut = wigner_cut(&s, &LineCut::Line { slope: 0.5, intercept: 0.1, from: -2.0, to: 2.0, samples: 41 }).unwrap();
        for c in &cut {
            let i = g.interpolate(c.q, c.p).unwrap();
            assert!((i - c.w).abs() < 5e-3);
        }
    }

    #[test]
    fn auto_extend_reaches_quiet_boundary() {
        let cfg = HilbertConfig::new(40, 8, 1e-4).unwrap();
        let c = coherent_state(C64::new(2.5, 0.0), &cfg).unwrap();
        let mut spec = GridSpec::square(3.0, 61);
        spec.auto_extend = true;
        let g = wigner(&c, &spec).unwrap();
        assert!(g.boundary_max() < BOUNDARY_TOL);
    }

    #[test]
    fn twelve_digit_format() {
        assert_eq!(fmt12(0.1234567890123456), "0.123456789012");
        assert_eq!(fmt12(-2.5), "-2.5");
    }
}
