//! Small dense complex matrix kernels.
//!
//! Every group element and Lie-algebra value in this crate is a 1×1 (circle
//! factors) or 2×2 (SU(2), U(2) and PU(2) representatives) complex matrix,
//! stored inline. The exponential uses the closed form for 2×2 matrices
//! (trace/traceless split plus `cosh`/`sinhc` of the discriminant) instead of
//! a truncated series, so displaced group points stay on the group to
//! machine precision.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

/// The imaginary unit.
pub const IM: Complex64 = Complex64::new(0.0, 1.0);

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 1×1 or 2×2 complex matrix, stored row-major in a fixed array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat {
    dim: usize,
    a: [Complex64; 4],
}

impl CMat {
    pub fn new1(z: Complex64) -> Self {
        CMat {
            dim: 1,
            a: [z, ZERO, ZERO, ZERO],
        }
    }

    pub fn new2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        CMat {
            dim: 2,
            a: [a, b, c, d],
        }
    }

    pub fn zero(dim: usize) -> Self {
        CMat {
            dim,
            a: [ZERO; 4],
        }
    }

    pub fn identity(dim: usize) -> Self {
        match dim {
            1 => CMat::new1(ONE),
            2 => CMat::new2(ONE, ZERO, ZERO, ONE),
            _ => panic!("unsupported matrix dimension {dim}"),
        }
    }

    /// Scalar multiple of the identity, `z·I`.
    pub fn scalar(dim: usize, z: Complex64) -> Self {
        CMat::identity(dim) * z
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.dim + j]
    }

    pub fn trace(&self) -> Complex64 {
        match self.dim {
            1 => self.a[0],
            _ => self.a[0] + self.a[3],
        }
    }

    pub fn det(&self) -> Complex64 {
        match self.dim {
            1 => self.a[0],
            _ => self.a[0] * self.a[3] - self.a[1] * self.a[2],
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        match self.dim {
            1 => CMat::new1(self.a[0].conj()),
            _ => CMat::new2(
                self.a[0].conj(),
                self.a[2].conj(),
                self.a[1].conj(),
                self.a[3].conj(),
            ),
        }
    }

    /// True inverse via the adjugate. Panics on a singular matrix; group
    /// elements here are always unitary so this never triggers in practice.
    pub fn inverse(&self) -> Self {
        match self.dim {
            1 => CMat::new1(ONE / self.a[0]),
            _ => {
                let d = self.det();
                assert!(d.norm() > 1e-300, "singular 2x2 matrix");
                CMat::new2(self.a[3] / d, -self.a[1] / d, -self.a[2] / d, self.a[0] / d)
            }
        }
    }

    pub fn commutator(&self, other: &CMat) -> CMat {
        *self * *other - *other * *self
    }

    /// Matrix exponential.
    ///
    /// For dim 2 uses the exact decomposition `M = μI + N` with `N` traceless
    /// and `N² = −det(N)·I`: `exp(M) = e^μ (cosh(δ)·I + sinhc(δ)·N)` where
    /// `δ² = −det N`.
    pub fn exp(&self) -> Self {
        match self.dim {
            1 => CMat::new1(self.a[0].exp()),
            _ => {
                let mu = self.trace() * 0.5;
                let n = *self - CMat::scalar(2, mu);
                let delta_sq = -n.det();
                let (ch, shc) = cosh_sinhc(delta_sq);
                (CMat::scalar(2, ch) + n * shc) * mu.exp()
            }
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let k = self.dim * self.dim;
        self.a[..k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &CMat) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        let k = self.dim * self.dim;
        self.a[..k].iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// ‖M + M†‖ — zero for anti-Hermitian matrices.
    pub fn anti_hermitian_residual(&self) -> f64 {
        (*self + self.dagger()).norm()
    }

    /// ‖M†M − I‖ — zero for unitary matrices.
    pub fn unitarity_residual(&self) -> f64 {
        (self.dagger() * *self - CMat::identity(self.dim)).norm()
    }
}

/// `(cosh δ, sinh δ / δ)` given `δ²`, with a series branch near zero.
fn cosh_sinhc(delta_sq: Complex64) -> (Complex64, Complex64) {
    if delta_sq.norm() < 1e-10 {
        // cosh δ = 1 + δ²/2 + δ⁴/24, sinhc δ = 1 + δ²/6 + δ⁴/120
        let d2 = delta_sq;
        let d4 = d2 * d2;
        (
            ONE + d2 * 0.5 + d4 / 24.0,
            ONE + d2 / 6.0 + d4 / 120.0,
        )
    } else {
        let delta = delta_sq.sqrt();
        (delta.cosh(), delta.sinh() / delta)
    }
}

impl Add for CMat {
    type Output = CMat;
    fn add(self, rhs: CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let mut out = self;
        for k in 0..self.dim * self.dim {
            out.a[k] = self.a[k] + rhs.a[k];
        }
        out
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(self, rhs: CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let mut out = self;
        for k in 0..self.dim * self.dim {
            out.a[k] = self.a[k] - rhs.a[k];
        }
        out
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        let mut out = self;
        for k in 0..self.dim * self.dim {
            out.a[k] = -self.a[k];
        }
        out
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, rhs: CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        match self.dim {
            1 => CMat::new1(self.a[0] * rhs.a[0]),
            _ => CMat::new2(
                self.a[0] * rhs.a[0] + self.a[1] * rhs.a[2],
                self.a[0] * rhs.a[1] + self.a[1] * rhs.a[3],
                self.a[2] * rhs.a[0] + self.a[3] * rhs.a[2],
                self.a[2] * rhs.a[1] + self.a[3] * rhs.a[3],
            ),
        }
    }
}

impl Mul<Complex64> for CMat {
    type Output = CMat;
    fn mul(self, rhs: Complex64) -> CMat {
        let mut out = self;
        for k in 0..self.dim * self.dim {
            out.a[k] = self.a[k] * rhs;
        }
        out
    }
}

impl Mul<f64> for CMat {
    type Output = CMat;
    fn mul(self, rhs: f64) -> CMat {
        self * Complex64::new(rhs, 0.0)
    }
}

/// Pauli matrix σ_k, k ∈ {1, 2, 3}.
pub fn pauli(k: usize) -> CMat {
    match k {
        1 => CMat::new2(ZERO, ONE, ONE, ZERO),
        2 => CMat::new2(ZERO, -IM, IM, ZERO),
        3 => CMat::new2(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index must be 1, 2 or 3"),
    }
}

/// iσ_k — the su(2) basis used throughout.
pub fn i_pauli(k: usize) -> CMat {
    pauli(k) * IM
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scaling-and-squaring series exponential, used as an independent oracle
    /// for the closed-form `exp`.
    fn exp_series(m: &CMat) -> CMat {
        let mut scaled = *m;
        let mut squarings = 0;
        while scaled.norm() > 0.5 {
            scaled = scaled * 0.5;
            squarings += 1;
        }
        let mut sum = CMat::identity(m.dim());
        let mut term = CMat::identity(m.dim());
        for k in 1..30 {
            term = term * scaled * (1.0 / k as f64);
            sum = sum + term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn pauli_algebra() {
        // σ1σ2 = iσ3 and cyclic
        assert!((pauli(1) * pauli(2)).dist(&(pauli(3) * IM)) < 1e-15);
        assert!((pauli(2) * pauli(3)).dist(&(pauli(1) * IM)) < 1e-15);
        assert!((pauli(3) * pauli(1)).dist(&(pauli(2) * IM)) < 1e-15);
        for k in 1..=3 {
            assert!((pauli(k) * pauli(k)).dist(&CMat::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn exp_matches_series_oracle() {
        let samples = [
            i_pauli(1) * 0.7,
            i_pauli(2) * 2.3 + i_pauli(3) * 0.4,
            i_pauli(1) * 0.1 + i_pauli(2) * 0.2 + i_pauli(3) * 0.3 + CMat::scalar(2, IM * 1.1),
            CMat::scalar(2, IM * 1e-9) + i_pauli(2) * 1e-8,
            CMat::new1(IM * 0.9),
        ];
        for m in samples {
            let closed = m.exp();
            let series = exp_series(&m);
            assert!(
                closed.dist(&series) < 1e-12,
                "exp mismatch: closed {closed:?} vs series {series:?}"
            );
        }
    }

    #[test]
    fn exp_of_antihermitian_is_unitary() {
        let m = i_pauli(1) * 0.3 + i_pauli(2) * 1.7 + i_pauli(3) * 0.2;
        let u = m.exp();
        assert!(u.unitarity_residual() < 1e-14);
        assert!((u.det() - ONE).norm() < 1e-14);
    }

    #[test]
    fn inverse_roundtrip() {
        let u = (i_pauli(2) * 0.8 + CMat::scalar(2, IM * 0.3)).exp();
        assert!((u * u.inverse()).dist(&CMat::identity(2)) < 1e-14);
        let z = CMat::new1((IM * 2.0).exp());
        assert!((z * z.inverse()).dist(&CMat::identity(1)) < 1e-15);
    }

    #[test]
    fn trace_of_commutator_vanishes() {
        let a = i_pauli(1) * 0.5 + i_pauli(3) * 0.1;
        let b = i_pauli(2) * 1.2;
        assert!(a.commutator(&b).trace().norm() < 1e-15);
    }
}
