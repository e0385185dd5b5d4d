// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra helpers on top of `faer`.

use faer::{ColRef, Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance used when validating Hermiticity of generators.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diag(values: &[C64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn scale(m: &CMat, s: C64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn frobenius(m: &CMat) -> f64 {
    m.norm_l2()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `max |A - A^dagger|` relative to `max(1, max|A|)`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev / max_abs(m).max(1.0)
}

pub fn ensure_hermitian(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let deviation = hermiticity_defect(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Distance of `U^dagger U` from the identity, in max-abs norm.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let p = u.adjoint() * u;
    max_abs_diff(&p, &identity(u.nrows()))
}

pub fn matvec(m: &CMat, v: &[C64]) -> Vec<C64> {
    let y = m * ColRef::from_slice(v);
    y.iter().copied().collect()
}

pub fn adjoint_matvec(m: &CMat, v: &[C64]) -> Vec<C64> {
    let y = m.adjoint() * ColRef::from_slice(v);
    y.iter().copied().collect()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn outer(a: &[C64], b: &[C64]) -> CMat {
    Mat::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Cached spectral decomposition `H = V diag(lambda) V^dagger` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(h: &CMat) -> Result<Self> {
        ensure_hermitian(h)?;
        Self::new_unchecked(h)
    }

    pub fn new_unchecked(h: &CMat) -> Result<Self> {
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let values = (0..h.nrows()).map(|i| s[i].re).collect();
        Ok(Self {
            values,
            vectors: evd.U().to_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn func(&self, f: impl Fn(f64) -> C64) -> CMat {
        let n = self.dim();
        let v = &self.vectors;
        let fv: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * fv[j]);
        &scaled * v.adjoint()
    }

    /// `exp(i s H)`.
    pub fn exp_i(&self, s: f64) -> CMat {
        self.func(|l| C64::from_polar(1.0, s * l))
    }

    pub fn apply_fn(&self, f: impl Fn(f64) -> C64, psi: &[C64]) -> Vec<C64> {
        let mut c = adjoint_matvec(&self.vectors, psi);
        for (ci, &l) in c.iter_mut().zip(&self.values) {
            *ci *= f(l);
        }
        matvec(&self.vectors, &c)
    }

    /// `exp(i s H) psi` without forming the propagator.
    pub fn apply_exp_i(&self, s: f64, psi: &[C64]) -> Vec<C64> {
        self.apply_fn(|l| C64::from_polar(1.0, s * l), psi)
    }
}

/// Square root of a positive semidefinite Hermitian matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let e = HermitianEigen::new_unchecked(m)?;
    Ok(e.func(|l| C64::new(l.max(0.0).sqrt(), 0.0)))
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| C64::new(next(), next()));
        let ah = adjoint(&a);
        &a + &ah
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let h = random_hermitian(12, 7);
        let e = HermitianEigen::new(&h).unwrap();
        let back = e.func(|l| C64::new(l, 0.0));
        assert!(max_abs_diff(&back, &h) < 1e-12);
    }

    #[test]
    fn exp_i_is_unitary_and_matches_taylor() {
        let h = random_hermitian(8, 3);
        let e = HermitianEigen::new(&h).unwrap();
        let u = e.exp_i(0.01);
        assert!(unitarity_defect(&u) < 1e-12);
        // second-order Taylor, error O(s^3 |H|^3)
        let ih = scale(&h, C64::new(0.0, 0.01));
        let taylor = &(&identity(8) + &ih) + &scale(&(&ih * &ih), C64::new(0.5, 0.0));
        assert!(max_abs_diff(&u, &taylor) < 1e-5);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = random_hermitian(4, 1);
        h[(0, 1)] += C64::new(0.0, 1.0);
        assert!(matches!(HermitianEigen::new(&h), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn apply_matches_dense() {
        let h = random_hermitian(6, 11);
        let e = HermitianEigen::new(&h).unwrap();
        let psi: Vec<C64> = (0..6).map(|k| C64::new(k as f64, 1.0)).collect();
        let a = e.apply_exp_i(0.7, &psi);
        let b = matvec(&e.exp_i(0.7), &psi);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = diag(&[ONE, C64::new(2.0, 0.0)]);
        let b = identity(3);
        let k = kron(&a, &b);
        assert_eq!(k.nrows(), 6);
        assert_eq!(k[(4, 4)], C64::new(2.0, 0.0));
        assert_eq!(k[(0, 3)], ZERO);
    }
}
