// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::fock::{JointState, ModeState};
use crate::linalg::{self, HermitianEigen, C64};

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clipped to `[0, 1]`.
pub fn fidelity(a: &ModeState, b: &ModeState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let f = match (a, b) {
        (ModeState::Pure(x), ModeState::Pure(y)) => linalg::dot(x, y).norm_sqr(),
        (ModeState::Pure(x), ModeState::Mixed(m)) | (ModeState::Mixed(m), ModeState::Pure(x)) => {
            linalg::dot(x, &linalg::matvec(m, x)).re
        }
        (ModeState::Mixed(r), ModeState::Mixed(s)) => {
            let sr = linalg::psd_sqrt(r)?;
            let inner = &(&sr * s) * &sr;
            let e = HermitianEigen::new_unchecked(&inner)?;
            e.values.iter().map(|l| l.max(0.0).sqrt()).sum::<f64>().powi(2)
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity of the oscillator part of a joint state with a pure target, qubit traced out.
pub fn mode_fidelity(output: &JointState, target: &[C64]) -> Result<f64> {
    let d = output.dim_fock;
    if target.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: target.len(),
        });
    }
    let f = match &output.data {
        ModeState::Pure(v) => {
            let (e, g) = v.split_at(d);
            linalg::dot(target, e).norm_sqr() + linalg::dot(target, g).norm_sqr()
        }
        ModeState::Mixed(_) => {
            let r = output.reduced_mode();
            return fidelity(&ModeState::Pure(target.to_vec()), &r);
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Infidelity of the reduced qubit state with a pure qubit state.
pub fn qubit_infidelity(output: &JointState, qubit: [C64; 2]) -> f64 {
    let r = output.reduced_qubit();
    let mut f = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            f += (qubit[a].conj() * r[a][b] * qubit[b]).re;
        }
    }
    (1.0 - f / output.trace()).abs()
}

/// Trace distance `||rho - sigma||_1 / 2`.
pub fn trace_distance(a: &ModeState, b: &ModeState) -> Result<f64> {
    let diff = &a.density() - &b.density();
    let e = HermitianEigen::new_unchecked(&diff)?;
    Ok(0.5 * e.values.iter().map(|l| l.abs()).sum::<f64>())
}
