//! Matrix groups, their Lie algebras, Haar-like sampling and the adjoint
//! circle action.
//!
//! Points of a product group are tuples of complex matrices, one per factor:
//! SU(2), U(2) and PU(2) factors are 2×2, circle factors are 1×1. A PU(2)
//! point is carried as a unit-determinant representative with a leftover ±
//! ambiguity; everything downstream is required to be invariant under
//! flipping the sign of a representative together with its attached
//! tangents, which is checked by tests rather than enforced by a (would-be
//! discontinuous) canonical section.
//!
//! Tangent vectors at `g` are carried in ambient form `X = g·A` with `A` in
//! the factor's Lie algebra: anti-Hermitian, traceless for SU(2)/PU(2), a
//! purely imaginary scalar for circles.

use crate::cmat::{i_pauli, CMat, IM, ONE, ZERO};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;
use thiserror::Error;

/// Tolerance for membership tests (unitarity, determinant conditions).
pub const MEMBERSHIP_TOL: f64 = 1e-12;
/// Tolerance for tangent-in-algebra tests.
pub const TANGENT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("group spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("matrix fails {factor:?} membership test (residual {residual:.3e})")]
    Membership { factor: Factor, residual: f64 },
}

/// One factor of a product group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    SU2,
    U2,
    PU2,
    U1,
}

impl Factor {
    pub fn matrix_dim(self) -> usize {
        match self {
            Factor::U1 => 1,
            _ => 2,
        }
    }

    /// Basis of the factor's Lie algebra: iσ₁, iσ₂, iσ₃ for su(2) and the
    /// PU(2) representative algebra, plus iI for u(2); i for the circle.
    pub fn algebra_basis(self) -> Vec<CMat> {
        match self {
            Factor::SU2 | Factor::PU2 => vec![i_pauli(1), i_pauli(2), i_pauli(3)],
            Factor::U2 => vec![i_pauli(1), i_pauli(2), i_pauli(3), CMat::scalar(2, IM)],
            Factor::U1 => vec![CMat::new1(IM)],
        }
    }

    /// Residual of the membership test: unitarity plus, where applicable,
    /// the unit-determinant condition.
    pub fn membership_residual(self, m: &CMat) -> f64 {
        if m.dim() != self.matrix_dim() {
            return f64::INFINITY;
        }
        let unit = m.unitarity_residual();
        match self {
            Factor::SU2 | Factor::PU2 => unit + (m.det() - ONE).norm(),
            Factor::U2 => unit,
            Factor::U1 => (m.get(0, 0).norm() - 1.0).abs(),
        }
    }

    /// Residual of `A` lying in the factor's Lie algebra.
    pub fn algebra_residual(self, a: &CMat) -> f64 {
        if a.dim() != self.matrix_dim() {
            return f64::INFINITY;
        }
        let anti = a.anti_hermitian_residual();
        match self {
            Factor::SU2 | Factor::PU2 => anti + a.trace().norm(),
            Factor::U2 => anti,
            Factor::U1 => a.get(0, 0).re.abs(),
        }
    }

    /// One Haar-like sample. SU(2) is uniform via normalized 4-Gaussians
    /// (unit quaternions); U(2) multiplies an SU(2) sample by a uniform
    /// phase; PU(2) reuses the SU(2) representative; the circle is a
    /// uniform angle.
    pub fn haar_sample(self, rng: &mut impl Rng) -> CMat {
        match self {
            Factor::SU2 | Factor::PU2 => sample_su2(rng),
            Factor::U2 => {
                let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                sample_su2(rng) * Complex64::from_polar(1.0, phase)
            }
            Factor::U1 => {
                let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                CMat::new1(Complex64::from_polar(1.0, phase))
            }
        }
    }
}

fn sample_su2(rng: &mut impl Rng) -> CMat {
    // Unit quaternion q = q0 + q1·iσ1 + q2·iσ2 + q3·iσ3.
    let q: [f64; 4] = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    let n = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
    if n < 1e-12 {
        return CMat::identity(2);
    }
    CMat::scalar(2, Complex64::new(q[0] / n, 0.0))
        + i_pauli(1) * (q[1] / n)
        + i_pauli(2) * (q[2] / n)
        + i_pauli(3) * (q[3] / n)
}

/// An ordered list of factors; the domain of points, tangents and forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    pub factors: Vec<Factor>,
}

impl GroupSpec {
    pub fn single(f: Factor) -> Self {
        GroupSpec { factors: vec![f] }
    }

    pub fn power(f: Factor, n: usize) -> Self {
        GroupSpec {
            factors: vec![f; n],
        }
    }

    pub fn concat(&self, other: &GroupSpec) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        GroupSpec { factors }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint {
            spec: self.clone(),
            mats: self
                .factors
                .iter()
                .map(|f| CMat::identity(f.matrix_dim()))
                .collect(),
        }
    }
}

/// An element of a product group: one matrix per factor.
#[derive(Clone, Debug)]
pub struct GroupPoint {
    pub spec: GroupSpec,
    pub mats: Vec<CMat>,
}

impl GroupPoint {
    pub fn new(spec: GroupSpec, mats: Vec<CMat>) -> Self {
        debug_assert_eq!(spec.len(), mats.len());
        GroupPoint { spec, mats }
    }

    pub fn membership_residual(&self) -> f64 {
        self.spec
            .factors
            .iter()
            .zip(&self.mats)
            .map(|(f, m)| f.membership_residual(m))
            .fold(0.0, f64::max)
    }

    pub fn multiply(&self, other: &GroupPoint) -> Result<GroupPoint, GroupError> {
        if self.spec != other.spec {
            return Err(GroupError::SpecMismatch(
                "multiply requires matching specs".into(),
            ));
        }
        Ok(GroupPoint {
            spec: self.spec.clone(),
            mats: self
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| *a * *b)
                .collect(),
        })
    }

    pub fn inverse(&self) -> GroupPoint {
        GroupPoint {
            spec: self.spec.clone(),
            mats: self.mats.iter().map(|m| m.inverse()).collect(),
        }
    }
}

/// True iff the two points agree factor-wise up to a unit scalar, within
/// `TANGENT_TOL`. This is equality in PU(2) for representatives.
pub fn projective_equal(a: &GroupPoint, b: &GroupPoint) -> bool {
    if a.spec != b.spec {
        return false;
    }
    a.mats.iter().zip(&b.mats).all(|(ma, mb)| {
        let c = mb.inverse() * *ma;
        let lambda = c.trace() / (c.dim() as f64);
        (c - CMat::scalar(c.dim(), lambda)).norm() < TANGENT_TOL
            && (lambda.norm() - 1.0).abs() < TANGENT_TOL
    })
}

/// Exact (non-projective) distance between two points.
pub fn point_dist(a: &GroupPoint, b: &GroupPoint) -> f64 {
    a.mats
        .iter()
        .zip(&b.mats)
        .map(|(x, y)| x.dist(y))
        .fold(0.0, f64::max)
}

/// A tangent vector in ambient form: one matrix `X_i = g_i·A_i` per factor.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub mats: Vec<CMat>,
}

impl Tangent {
    pub fn zero(spec: &GroupSpec) -> Self {
        Tangent {
            mats: spec
                .factors
                .iter()
                .map(|f| CMat::zero(f.matrix_dim()))
                .collect(),
        }
    }

    pub fn add(&self, other: &Tangent) -> Tangent {
        Tangent {
            mats: self
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tangent {
        Tangent {
            mats: self.mats.iter().map(|m| *m * s).collect(),
        }
    }

    pub fn scale_c(&self, s: Complex64) -> Tangent {
        Tangent {
            mats: self.mats.iter().map(|m| *m * s).collect(),
        }
    }

    /// Residual of `g⁻¹X` lying in the Lie algebra, factor-wise max.
    pub fn algebra_residual(&self, at: &GroupPoint) -> f64 {
        at.spec
            .factors
            .iter()
            .zip(at.mats.iter().zip(&self.mats))
            .map(|(f, (g, x))| f.algebra_residual(&(g.inverse() * *x)))
            .fold(0.0, f64::max)
    }
}

/// Seeded sample of a group point (one Haar-like draw per factor).
pub fn sample_point(spec: &GroupSpec, rng: &mut impl Rng) -> GroupPoint {
    GroupPoint {
        spec: spec.clone(),
        mats: spec.factors.iter().map(|f| f.haar_sample(rng)).collect(),
    }
}

/// Seeded tangent at `at`: Gaussian coefficients of unit variance in the
/// algebra basis, pushed to ambient form `g·A`.
pub fn sample_tangent(at: &GroupPoint, rng: &mut impl Rng) -> Tangent {
    let mats = at
        .spec
        .factors
        .iter()
        .zip(&at.mats)
        .map(|(f, g)| {
            let mut a = CMat::zero(f.matrix_dim());
            for b in f.algebra_basis() {
                let c: f64 = rng.sample(StandardNormal);
                a = a + b * c;
            }
            *g * a
        })
        .collect();
    Tangent { mats }
}

/// Left-trivialized coordinates of a tangent: `A_i = g_i⁻¹ X_i` per factor.
pub fn tangent_algebra(at: &GroupPoint, x: &Tangent) -> Vec<CMat> {
    at.mats
        .iter()
        .zip(&x.mats)
        .map(|(g, xm)| g.inverse() * *xm)
        .collect()
}

/// Ambient tangent `g·A` from left-trivialized coordinates.
pub fn algebra_tangent(at: &GroupPoint, algs: &[CMat]) -> Tangent {
    Tangent {
        mats: at
            .mats
            .iter()
            .zip(algs)
            .map(|(g, a)| *g * *a)
            .collect(),
    }
}

/// Factor-wise displacement `g·exp(s·A)` — the flow of the left-invariant
/// field with value `g·A`.
pub fn displace(at: &GroupPoint, algs: &[CMat], s: f64) -> GroupPoint {
    GroupPoint {
        spec: at.spec.clone(),
        mats: at
            .mats
            .iter()
            .zip(algs)
            .map(|(g, a)| *g * (*a * s).exp())
            .collect(),
    }
}

/// Factor-wise Lie bracket of left-trivialized tangents. Circle factors are
/// abelian so their component is automatically zero.
pub fn algebra_bracket(a: &[CMat], b: &[CMat]) -> Vec<CMat> {
    a.iter().zip(b).map(|(x, y)| x.commutator(y)).collect()
}

/// RNG stream for probe `stream` of a suite seeded with `seed`. Streams are
/// independent, so probes may be evaluated in any order (or in parallel)
/// with identical results.
pub fn probe_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The embedded maximal-torus circle `z ↦ diag(z, z̄)` in SU(2).
pub fn embed_circle(z: Complex64) -> CMat {
    CMat::new2(z, ZERO, ZERO, z.conj())
}

/// Algebra element of the embedded circle direction with rate `t`:
/// `d/ds diag(e^{ist}, e^{-ist})|₀ = it·σ₃`.
pub fn embed_circle_rate(t: f64) -> CMat {
    i_pauli(3) * t
}

/// A circle action on a product group together with its exact differential.
///
/// `act(z, g)` acts factor-wise; 2×2 factors are conjugated by the embedded
/// circle element, 1×1 factors are left untouched. The differential takes a
/// circle rate `t` (the tangent `z·it` at `z`) plus a tangent at `g` and
/// returns the exact tangent at `act(z, g)`:
/// `ẑ(â·g − g·â + X)ẑ⁻¹` per conjugated factor, with `â = it·σ₃`.
#[derive(Clone)]
pub struct CircleAction {
    pub act: Arc<dyn Fn(Complex64, &GroupPoint) -> GroupPoint + Send + Sync>,
    pub push: Arc<dyn Fn(Complex64, &GroupPoint, f64, &Tangent) -> Tangent + Send + Sync>,
}

/// The adjoint action of the circle through `z ↦ diag(z, z̄)`.
pub fn adjoint_circle_action() -> CircleAction {
    let act = Arc::new(|z: Complex64, g: &GroupPoint| {
        let zh = embed_circle(z);
        let zh_inv = zh.inverse();
        GroupPoint {
            spec: g.spec.clone(),
            mats: g
                .spec
                .factors
                .iter()
                .zip(&g.mats)
                .map(|(f, m)| match f {
                    Factor::U1 => *m,
                    _ => zh * *m * zh_inv,
                })
                .collect(),
        }
    });
    let push = Arc::new(|z: Complex64, g: &GroupPoint, rate: f64, x: &Tangent| {
        let zh = embed_circle(z);
        let zh_inv = zh.inverse();
        let ah = embed_circle_rate(rate);
        Tangent {
            mats: g
                .spec
                .factors
                .iter()
                .zip(g.mats.iter().zip(&x.mats))
                .map(|(f, (gm, xm))| match f {
                    Factor::U1 => *xm,
                    _ => zh * (ah * *gm - *gm * ah + *xm) * zh_inv,
                })
                .collect(),
        }
    });
    CircleAction { act, push }
}
