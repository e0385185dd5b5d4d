// SPDX-License-Identifier: Apache-2.0

//! Density-matrix comparison maps and the effective-cubicity model fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::ModeState;
use crate::metrics::wigner::fmt12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffMap {
    pub n_max: usize,
    /// `values[m][n] = |<m|rho_a - rho_b|n>|`.
    pub values: Vec<Vec<f64>>,
}

impl DiffMap {
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }

    /// CSV matrix in units of `1e-3`, with a header row of column indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m");
        for n in 0..self.n_max {
            out.push_str(&format!(",{n}"));
        }
        out.push('\n');
        for (m, row) in self.values.iter().enumerate() {
            out.push_str(&m.to_string());
            for v in row {
                out.push(',');
                out.push_str(&fmt12(v * 1e3));
            }
            out.push('\n');
        }
        out
    }
}

/// Elementwise `|rho_a - rho_b|` over the first `n_max` Fock levels.
pub fn density_diff_map(a: &ModeState, b: &ModeState, n_max: usize) -> Result<DiffMap> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let n_max = n_max.min(a.dim());
    let (ra, rb) = (a.density(), b.density());
    let values = (0..n_max)
        .map(|m| (0..n_max).map(|n| (ra[(m, n)] - rb[(m, n)]).norm()).collect())
        .collect();
    Ok(DiffMap { n_max, values })
}

/// Least-squares `gamma` in `zeta_eff = zeta (1 + gamma eta^2 |alpha|^2)`.
pub fn effective_cubicity_fit(samples: &[(f64, f64)], eta: f64, zeta: f64) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::Degenerate("effective-cubicity fit needs at least three samples with nonzero |alpha|".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(a, xi) in samples {
        let x = zeta * eta * eta * a * a;
        num += x * (xi - zeta);
        den += x * x;
    }
    if den <= f64::EPSILON {
        return Err(Error::Degenerate("effective-cubicity fit needs at least three samples with nonzero |alpha|".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::OperatorSet;
    use crate::protocol::{apply_ideal, TargetGate};

    #[test]
    fn recovers_synthetic_gamma() {
        let eta = 0.3;
        let s: Vec<(f64, f64)> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&a| (a, 1.0 * (1.0 + 0.25 * eta * eta * a * a)))
            .collect();
        assert!((effective_cubicity_fit(&s, eta, 1.0).unwrap() - 0.25).abs() < 1e-12);
        assert!(effective_cubicity_fit(&s[..1], eta, 1.0).is_err());
        assert!(effective_cubicity_fit(&[(0.0, 1.0); 4], eta, 1.0).is_err());
    }

    #[test]
    fn diff_map_basics() {
        let ops = OperatorSet::new(30).unwrap();
        let s = apply_ideal(&ops, &TargetGate::cubic(0.2), &ModeState::vacuum(30));
        let m = density_diff_map(&s, &s, 10).unwrap();
        assert_eq!(m.max(), 0.0);
        let v = ModeState::vacuum(30);
        let m = density_diff_map(&s, &v, 8).unwrap();
        assert!(m.max() > 0.0);
        assert_eq!(m.to_csv().lines().count(), 9);
        assert!(density_diff_map(&s, &ModeState::vacuum(20), 5).is_err());
    }
}
