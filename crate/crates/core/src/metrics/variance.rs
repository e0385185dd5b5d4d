// SPDX-License-Identifier: Apache-2.0

//! Nonlinear quadrature variances and the thresholds they are compared against.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeState, OperatorSet, Quadrature};
use crate::linalg::{self, CMat, C64};

/// `Var(O)` with `O = X - j xi P^{j-1}` for a `P`-basis gate, `O = P + j xi X^{j-1}` for an `X`-basis gate.
///
/// Moments are taken after embedding the state into `dim + j` levels so that they are exact for
/// the truncated state.
pub fn nonlinear_variance(state: &ModeState, j: u32, xi: f64, basis: Quadrature) -> Result<f64> {
    Ok(VarianceQuadratic::new(state, j, basis)?.eval(xi))
}

/// `Var(O)(xi) = c0 + c1 xi + c2 xi^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceQuadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl VarianceQuadratic {
    pub fn new(state: &ModeState, j: u32, basis: Quadrature) -> Result<Self> {
        if j < 2 {
            return Err(Error::Config("nonlinear variance needs gate order j >= 2".into()));
        }
        let d = state.dim();
        let ops = OperatorSet::new(d + j as usize)?;
        let (lin, nl, sign) = match basis {
            Quadrature::P => (&ops.x, &ops.p, -1.0),
            Quadrature::X => (&ops.p, &ops.x, 1.0),
        };
        let mut pow = linalg::identity(ops.dim);
        for _ in 0..j - 1 {
            pow = &pow * nl;
        }
        // O = A + xi B
        let b = linalg::scale(&pow, C64::new(sign * j as f64, 0.0));
        let embed = |v: &[C64]| {
            let mut out = vec![C64::new(0.0, 0.0); ops.dim];
            out[..d].copy_from_slice(v);
            out
        };
        let (aa, ab, bb, ma, mb) = match state {
            ModeState::Pure(v) => {
                let psi = embed(v);
                let av = linalg::matvec(lin, &psi);
                let bv = linalg::matvec(&b, &psi);
                (
                    linalg::norm_sqr(&av),
                    linalg::dot(&av, &bv).re,
                    linalg::norm_sqr(&bv),
                    linalg::dot(&psi, &av).re,
                    linalg::dot(&psi, &bv).re,
                )
            }
            ModeState::Mixed(rho) => {
                let big: CMat = Mat::from_fn(ops.dim, ops.dim, |r, c| {
                    if r < d && c < d {
                        rho[(r, c)]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                let ra = &big * lin;
                let rb = &big * &b;
                let tr = |m: &CMat| linalg::trace(m).re;
                (
                    tr(&(&ra * lin)),
                    0.5 * (tr(&(&ra * &b)) + tr(&(&rb * lin))),
                    tr(&(&rb * &b)),
                    tr(&ra),
                    tr(&rb),
                )
            }
        };
        Ok(Self {
            c0: aa - ma * ma,
            c1: 2.0 * (ab - ma * mb),
            c2: bb - mb * mb,
        })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.c0 + xi * (self.c1 + xi * self.c2)
    }

    /// Stationary point of the parabola, `None` when it is not a minimum.
    pub fn argmin(&self) -> Option<f64> {
        (self.c2 > 0.0).then(|| -self.c1 / (2.0 * self.c2))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    pub j: u32,
    pub basis: Quadrature,
    pub xi_values: Vec<f64>,
    pub variances: Vec<f64>,
    pub xi_min: f64,
    pub v_min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub points: usize,
    pub xi_tol: f64,
    pub max_widenings: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            xi_lo: -2.0,
            xi_hi: 2.0,
            points: 81,
            xi_tol: 1e-4,
            max_widenings: 6,
        }
    }
}

/// Coarse scan over `xi`, then golden-section refinement on the bracketing triple.
pub fn minimize_variance(state: &ModeState, j: u32, basis: Quadrature, settings: &ScanSettings) -> Result<VarianceScan> {
    let quad = VarianceQuadratic::new(state, j, basis)?;
    minimize_with(|x| quad.eval(x), j, basis, settings)
}

pub(crate) fn minimize_with(
    f: impl Fn(f64) -> f64,
    j: u32,
    basis: Quadrature,
    settings: &ScanSettings,
) -> Result<VarianceScan> {
    if settings.points < 3 || !(settings.xi_hi > settings.xi_lo) {
        return Err(Error::Config("variance scan needs >= 3 points on a nonempty interval".into()));
    }
    let (mut lo, mut hi) = (settings.xi_lo, settings.xi_hi);
    for _ in 0..=settings.max_widenings {
        let n = settings.points;
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let k = vs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if k == 0 || k == n - 1 {
            let w = hi - lo;
            lo -= w;
            hi += w;
            continue;
        }
        let (xi_min, v_min) = golden_section(&f, xs[k - 1], xs[k + 1], settings.xi_tol);
        return Ok(VarianceScan {
            j,
            basis,
            xi_values: xs,
            variances: vs,
            xi_min,
            v_min,
        });
    }
    Err(Error::NotConverged { change: hi - lo })
}

pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Lowest cubic nonlinear variance reachable by Gaussian states.
pub fn qng_threshold(xi: f64) -> f64 {
    3.0 / 2f64.powf(5.0 / 3.0) * (3.0 * xi.abs()).powf(2.0 / 3.0)
}

/// `Var(X - 3 xi P^2)` for a coherent state, `1/2 + 9 xi^2 (1/2 + 4 Im(alpha)^2)`.
pub fn classical_variance(alpha: C64, xi: f64) -> f64 {
    0.5 + 9.0 * xi * xi * (0.5 + 4.0 * alpha.im * alpha.im)
}

/// Coherent-state reference at `xi = 1`.
pub fn classical_threshold(alpha: C64) -> f64 {
    classical_variance(alpha, 1.0)
}
