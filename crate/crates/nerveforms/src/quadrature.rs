//! Numerical integration: top-degree forms over SU(2) ≅ S³, forms over
//! cylinders I^a × S¹, and the degree-3 integrality experiments.
//!
//! Two independent parametrizations of SU(2) are available — ZYZ Euler
//! angles `exp(iσ₃φ/2)·exp(iσ₂θ/2)·exp(iσ₃ψ/2)` with φ∈[0,2π), θ∈[0,π],
//! ψ∈[0,4π), and the quaternion polar chart
//! `cos χ·I + sin χ·(n̂(θ,φ)·iσ⃗)` — both with closed-form partials, so a
//! 3-form is integrated as `Σ ω(g(u); ∂₁g, ∂₂g, ∂₃g)·Δu` on midpoint grids.
//! The orientation is fixed by the axis order; only |∫| is asserted.
//!
//! Cylinder sheets (path families, quaternion-slerp homotopies, the
//! degree-one wrap factor, null-homotopic bumps) carry exact partials and
//! are integrated with Gauss–Legendre × trapezoid rules. Every integral is
//! cross-checked against its half-resolution value and reported as
//! non-convergent when the two disagree badly.

use crate::cmat::{i_pauli, CMat, IM, ONE, ZERO};
use crate::forms::Form;
use crate::groups::{Factor, GroupPoint, GroupSpec, Tangent};
use crate::loops::TrigPoly;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge: coarse {coarse:.6e}, fine {fine:.6e}, allowed drift {allowed:.3e}")]
    NonConvergence {
        coarse: f64,
        fine: f64,
        allowed: f64,
    },
    #[error("sheet boundary mismatch: residual {0:.3e}")]
    BoundaryMismatch(f64),
}

/// Pairwise (cascade) summation for reproducible, accurate accumulation.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration from the Chebyshev initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre_and_derivative(n, x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dpn) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dpn * dpn);
        nodes.push(0.5 * (x + 1.0));
        weights.push(0.5 * w);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Parametrization of SU(2) with exact partials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    /// ZYZ Euler angles, ranges [0,2π) × [0,π] × [0,4π).
    EulerZyz,
    /// Quaternion polar coordinates, ranges [0,π] × [0,π] × [0,2π).
    QuaternionPolar,
}

impl ChartKind {
    pub fn ranges(self) -> [f64; 3] {
        match self {
            ChartKind::EulerZyz => [TAU, PI, 2.0 * TAU],
            ChartKind::QuaternionPolar => [PI, PI, TAU],
        }
    }

    /// Point and the three coordinate partials at `u`.
    pub fn point_and_partials(self, u: [f64; 3]) -> (CMat, [CMat; 3]) {
        match self {
            ChartKind::EulerZyz => {
                let half3 = i_pauli(3) * 0.5;
                let half2 = i_pauli(2) * 0.5;
                let e1 = (i_pauli(3) * (u[0] * 0.5)).exp();
                let e2 = (i_pauli(2) * (u[1] * 0.5)).exp();
                let e3 = (i_pauli(3) * (u[2] * 0.5)).exp();
                let g = e1 * e2 * e3;
                let d_phi = half3 * g;
                let d_theta = e1 * half2 * e2 * e3;
                let d_psi = g * half3;
                (g, [d_phi, d_theta, d_psi])
            }
            ChartKind::QuaternionPolar => {
                let (chi, theta, phi) = (u[0], u[1], u[2]);
                let n_hat = i_pauli(1) * (theta.sin() * phi.cos())
                    + i_pauli(2) * (theta.sin() * phi.sin())
                    + i_pauli(3) * theta.cos();
                let dn_dtheta = i_pauli(1) * (theta.cos() * phi.cos())
                    + i_pauli(2) * (theta.cos() * phi.sin())
                    + i_pauli(3) * (-theta.sin());
                let dn_dphi = i_pauli(1) * (-theta.sin() * phi.sin())
                    + i_pauli(2) * (theta.sin() * phi.cos());
                let g = CMat::scalar(2, Complex64::new(chi.cos(), 0.0)) + n_hat * chi.sin();
                let d_chi = CMat::scalar(2, Complex64::new(-chi.sin(), 0.0)) + n_hat * chi.cos();
                let d_theta = dn_dtheta * chi.sin();
                let d_phi = dn_dphi * chi.sin();
                (g, [d_chi, d_theta, d_phi])
            }
        }
    }
}

fn su2_riemann_sum(omega: &Form, chart: ChartKind, nodes: usize) -> Complex64 {
    let ranges = chart.ranges();
    let steps = [
        ranges[0] / nodes as f64,
        ranges[1] / nodes as f64,
        ranges[2] / nodes as f64,
    ];
    let cell = steps[0] * steps[1] * steps[2];
    let spec = GroupSpec::single(Factor::SU2);
    let values: Vec<Complex64> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let mut local = Vec::with_capacity(nodes * nodes);
            let u0 = (i as f64 + 0.5) * steps[0];
            for j in 0..nodes {
                let u1 = (j as f64 + 0.5) * steps[1];
                for k in 0..nodes {
                    let u2 = (k as f64 + 0.5) * steps[2];
                    let (g, partials) = chart.point_and_partials([u0, u1, u2]);
                    let point = GroupPoint::new(spec.clone(), vec![g]);
                    let xs: Vec<Tangent> = partials
                        .iter()
                        .map(|m| Tangent { mats: vec![*m] })
                        .collect();
                    local.push(omega.eval(&point, &xs));
                }
            }
            pairwise_sum(&local)
        })
        .collect();
    pairwise_sum(&values) * cell
}

/// Integrate a degree-3 form over SU(2) on a midpoint grid, with an
/// internal half-resolution convergence check (drift beyond `10·tol` is an
/// error).
pub fn integrate_top_form_su2(
    omega: &Form,
    chart: ChartKind,
    nodes: usize,
    tol: f64,
) -> Result<Complex64, QuadratureError> {
    let fine = su2_riemann_sum(omega, chart, nodes);
    let coarse = su2_riemann_sum(omega, chart, nodes / 2);
    let drift = (fine - coarse).norm();
    if drift > 10.0 * tol {
        return Err(QuadratureError::NonConvergence {
            coarse: coarse.norm(),
            fine: fine.norm(),
            allowed: 10.0 * tol,
        });
    }
    Ok(fine)
}

type SheetEval = dyn Fn(&[f64], f64) -> (CMat, Vec<CMat>) + Send + Sync;

/// A map I^a × S¹ → SU(2) with exact partials: `eval(u, z)` returns the
/// point and its a+1 partials (the I-directions first, the circle last).
#[derive(Clone)]
pub struct Sheet {
    pub i_dims: usize,
    eval: Arc<SheetEval>,
}

impl Sheet {
    pub fn new(
        i_dims: usize,
        eval: impl Fn(&[f64], f64) -> (CMat, Vec<CMat>) + Send + Sync + 'static,
    ) -> Self {
        Sheet {
            i_dims,
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, u: &[f64], z: f64) -> (CMat, Vec<CMat>) {
        (self.eval)(u, z)
    }

    /// Pointwise product of sheets with product-rule partials.
    pub fn product(&self, other: &Sheet) -> Sheet {
        assert_eq!(self.i_dims, other.i_dims);
        let a = self.eval.clone();
        let b = other.eval.clone();
        Sheet::new(self.i_dims, move |u, z| {
            let (ga, da) = a(u, z);
            let (gb, db) = b(u, z);
            let partials = da
                .iter()
                .zip(&db)
                .map(|(xa, xb)| *xa * gb + ga * *xb)
                .collect();
            (ga * gb, partials)
        })
    }
}

/// Ramp functions for path families: a(0) = 0, a(1) = 1.
#[derive(Clone, Copy, Debug)]
pub enum Ramp {
    Linear,
    /// 3t² − 2t³
    Smoothstep,
}

impl Ramp {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Ramp::Linear => t,
            Ramp::Smoothstep => t * t * (3.0 - 2.0 * t),
        }
    }

    pub fn deriv(self, t: f64) -> f64 {
        match self {
            Ramp::Linear => 1.0,
            Ramp::Smoothstep => 6.0 * t * (1.0 - t),
        }
    }
}

/// A path family σ(t)(z) = Π_k exp(a(t)·f_k(z)·B_k) from the constant loop
/// at the identity to the loop generated by `terms`, as an I¹×S¹ sheet.
#[derive(Clone)]
pub struct PathFamily {
    pub terms: Vec<(TrigPoly, CMat)>,
    pub ramp: Ramp,
}

impl PathFamily {
    /// Value plus (∂t, ∂z) at (t, z).
    pub fn eval(&self, t: f64, z: f64) -> (CMat, CMat, CMat) {
        let a = self.ramp.eval(t);
        let da = self.ramp.deriv(t);
        let mut value = CMat::identity(2);
        let mut dt = CMat::zero(2);
        let mut dz = CMat::zero(2);
        for (f, b) in &self.terms {
            let fv = f.eval(z);
            let dfv = f.deriv().eval(z);
            let e = (*b * (a * fv)).exp();
            // d/dt exp(a f B) = (a' f) B e;  d/dz = (a f') B e
            let e_dt = *b * e * (da * fv);
            let e_dz = *b * e * (a * dfv);
            dt = dt * e + value * e_dt;
            dz = dz * e + value * e_dz;
            value = value * e;
        }
        (value, dt, dz)
    }

    pub fn sheet(&self) -> Sheet {
        let fam = self.clone();
        Sheet::new(1, move |u, z| {
            let (v, dt, dz) = fam.eval(u[0], z);
            (v, vec![dt, dz])
        })
    }
}

/// Quaternion slerp `F(s) = q₁·exp(s·log(q₁⁻¹q₂))` with the antipodal-safe
/// branch (flip q₂ when Re tr(q₁⁻¹q₂) < 0) and exact partials in s and in
/// any parameter the endpoints depend on.
///
/// Everything is expressed through Chebyshev-like scalar functions of
/// `p = tr(Q)/2`:  `E = C·I + S·T` with `T = Q − p·I`,
/// `C = cos(s·arccos p)`, `S = sin(s·arccos p)/√(1−p²)`,
/// `∂C/∂p = s·S`, `∂S/∂p = (p·S − s·C)/(1−p²)` (series near p = 1).
pub fn slerp_with_partials(
    q1: &CMat,
    dq1: &[CMat],
    q2: &CMat,
    dq2: &[CMat],
    s: f64,
) -> (CMat, CMat, Vec<CMat>) {
    let q1_inv = q1.inverse();
    let mut q2c = *q2;
    let mut dq2c: Vec<CMat> = dq2.to_vec();
    let mut q = q1_inv * q2c;
    if q.trace().re < 0.0 {
        q2c = -q2c;
        for d in &mut dq2c {
            *d = -*d;
        }
        q = q1_inv * q2c;
    }
    let p = q.trace() * 0.5;
    let t = q - CMat::scalar(2, p);
    let (c, s_fn, c_p, s_p, a, sn) = chebyshev_scalars(p, s);

    let e = CMat::scalar(2, c) + t * s_fn;
    let value = *q1 * e;

    // ∂/∂s: dE/ds = −a·sin(sa)·I + a·cos(sa)/sn·T
    let de_ds = CMat::scalar(2, -a * (s * a).sin()) + t * (a * (s * a).cos() / sn);
    let d_s = *q1 * de_ds;

    let mut d_params = Vec::with_capacity(dq1.len());
    for (d1, d2) in dq1.iter().zip(&dq2c) {
        // Q_w = q₁⁻¹·q₂_w − q₁⁻¹·q₁_w·Q
        let q_w = q1_inv * *d2 - q1_inv * *d1 * q;
        let p_w = q_w.trace() * 0.5;
        let t_w = q_w - CMat::scalar(2, p_w);
        let de = CMat::scalar(2, c_p * p_w) + t * (s_p * p_w) + t_w * s_fn;
        d_params.push(*d1 * e + *q1 * de);
    }
    (value, d_s, d_params)
}

/// (C, S, ∂C/∂p, ∂S/∂p, arccos p, √(1−p²)) with a series branch at p → 1.
#[allow(clippy::type_complexity)]
fn chebyshev_scalars(
    p: Complex64,
    s: f64,
) -> (Complex64, Complex64, Complex64, Complex64, Complex64, Complex64) {
    let delta = Complex64::new(1.0, 0.0) - p;
    if delta.norm() < 1e-6 {
        // a² = 2δ(1 + δ/6 + ...)
        let a2 = delta * 2.0 * (ONE + delta / 6.0);
        let s2 = s * s;
        let c = ONE - a2 * (s2 / 2.0) + a2 * a2 * (s2 * s2 / 24.0);
        let s_fn = (ONE + a2 * ((1.0 - s2) / 6.0)) * s;
        let c_p = s_fn * s;
        let s_p = Complex64::new(s * (s2 - 1.0) / 3.0, 0.0);
        let a = a2.sqrt();
        let sn = a * (ONE - a2 / 6.0);
        (c, s_fn, c_p, s_p, a, sn)
    } else {
        let a = p.acos();
        let sn = (ONE - p * p).sqrt();
        let c = (a * s).cos();
        let s_fn = (a * s).sin() / sn;
        let c_p = s_fn * s;
        let s_p = (p * s_fn - c * s) / (ONE - p * p);
        (c, s_fn, c_p, s_p, a, sn)
    }
}

/// The I²×S¹ homotopy sheet slerping between two path families in s:
/// `F(s,t,z) = slerp(σ(t)(z) → σ′(t)(z); s)`. Partials: (∂s, ∂t, ∂z).
pub fn slerp_sheet(sigma: &PathFamily, sigma2: &PathFamily) -> Sheet {
    let sigma = sigma.clone();
    let sigma2 = sigma2.clone();
    Sheet::new(2, move |u, z| {
        let (q1, q1t, q1z) = sigma.eval(u[1], z);
        let (q2, q2t, q2z) = sigma2.eval(u[1], z);
        let (value, d_s, d_params) =
            slerp_with_partials(&q1, &[q1t, q1z], &q2, &[q2t, q2z], u[0]);
        (value, vec![d_s, d_params[0], d_params[1]])
    })
}

/// Residual of the sheet boundary conditions `F(0,t,z) = σ(t)(z)`,
/// `F(1,t,z) = σ′(t)(z)` over a probe grid.
pub fn sheet_boundary_residual(sheet: &Sheet, sigma: &PathFamily, sigma2: &PathFamily) -> f64 {
    let mut worst: f64 = 0.0;
    for it in 0..7 {
        let t = it as f64 / 6.0;
        for iz in 0..7 {
            let z = TAU * iz as f64 / 7.0;
            let (a, _) = sheet.eval(&[0.0, t], z);
            let (b, _) = sheet.eval(&[1.0, t], z);
            worst = worst.max(a.dist(&sigma.eval(t, z).0));
            worst = worst.max(b.dist(&sigma2.eval(t, z).0));
        }
    }
    worst
}

/// The degree-±1 wrap factor W: I²×S¹ → SU(2), identity on the boundary.
///
/// A degree-one collapse `p(s,t): I²/∂I² → S²` (boundary to the north pole
/// n̂₀, center to the south pole) followed by the half-angle smash
///
///   W(s,t,z) = exp((z/2)·P̂) · exp(−(z/2)·iσ₃),   P̂ = p·iσ⃗.
///
/// Each factor alone is 4π-periodic, but both flip sign together at
/// z = 2π so the product is 2π-periodic and C¹ everywhere; it is exactly I
/// wherever p = n̂₀ (the whole boundary and the z = 0 slice). The only
/// preimage of −I is (south pole, z = π) — a single regular point, so the
/// mapping degree is ±1 (validated numerically by integrating the degree-3
/// trace form over the sheet; full angles would give degree ±2).
///
/// Concretely, with (x, y) = (2s−1, 2t−1), v = (x²+y²)/R², R = 0.95 and the
/// profile g = π(1−v)² inside the disk (0 outside):
/// p = (sin g·x/ρ, sin g·y/ρ, cos g).
pub fn wrap_sheet() -> Sheet {
    const R: f64 = 0.95;
    Sheet::new(2, move |u, z| {
        let sigma3 = i_pauli(3);
        let b = (sigma3 * (-z * 0.5)).exp();
        let db = sigma3 * b * (-0.5);
        let x = 2.0 * u[0] - 1.0;
        let y = 2.0 * u[1] - 1.0;
        let rho_sq = x * x + y * y;
        let v = rho_sq / (R * R);
        if v >= 1.0 {
            // p = n̂₀: the two exponentials cancel identically
            return (
                CMat::identity(2),
                vec![CMat::zero(2), CMat::zero(2), CMat::zero(2)],
            );
        }
        let rho = rho_sq.sqrt().max(1e-150);
        let one_m_v = 1.0 - v;
        let g = PI * one_m_v * one_m_v;
        let g_v = -2.0 * PI * one_m_v;
        let v_s = 4.0 * x / (R * R);
        let v_t = 4.0 * y / (R * R);
        let (sg, cg) = (g.sin(), g.cos());
        let (cx, cy) = (x / rho, y / rho);
        let p_hat = i_pauli(1) * (sg * cx) + i_pauli(2) * (sg * cy) + i_pauli(3) * cg;
        // ∂(x/ρ)/∂s = 2y²/ρ³, ∂(x/ρ)/∂t = −2xy/ρ³ and symmetrically for y/ρ
        let r3 = rho * rho * rho;
        let dcx = [2.0 * y * y / r3, -2.0 * x * y / r3];
        let dcy = [-2.0 * x * y / r3, 2.0 * x * x / r3];
        let dp = |gv_chain: f64, dcx_i: f64, dcy_i: f64| -> CMat {
            i_pauli(1) * (cg * gv_chain * cx + sg * dcx_i)
                + i_pauli(2) * (cg * gv_chain * cy + sg * dcy_i)
                + i_pauli(3) * (-sg * gv_chain)
        };
        let dp_ds = dp(g_v * v_s, dcx[0], dcy[0]);
        let dp_dt = dp(g_v * v_t, dcx[1], dcy[1]);

        // A = cos(z/2)·I + sin(z/2)·P̂ (P̂² = −I since |p| = 1)
        let (sz, cz) = ((z * 0.5).sin(), (z * 0.5).cos());
        let a = CMat::scalar(2, Complex64::new(cz, 0.0)) + p_hat * sz;
        let da_dz = CMat::scalar(2, Complex64::new(-0.5 * sz, 0.0)) + p_hat * (0.5 * cz);
        let value = a * b;
        let d_s = dp_ds * sz * b;
        let d_t = dp_dt * sz * b;
        let d_z = da_dz * b + a * db;
        (value, vec![d_s, d_t, d_z])
    })
}

/// A null-homotopic perturbation sheet: `exp(b(s,t)·amp·N̂(z))` with
/// `b = sin²(πs)·sin²(πt)` vanishing with its first derivatives on ∂I².
pub fn bump_sheet(amp: f64) -> Sheet {
    Sheet::new(2, move |u, z| {
        let (s, t) = (u[0], u[1]);
        let bs = (PI * s).sin().powi(2);
        let bt = (PI * t).sin().powi(2);
        let dbs = 2.0 * (PI * s).sin() * (PI * s).cos() * PI;
        let dbt = 2.0 * (PI * t).sin() * (PI * t).cos() * PI;
        let b = bs * bt * amp;
        let b_s = dbs * bt * amp;
        let b_t = bs * dbt * amp;
        let n_hat = i_pauli(1) * z.cos() + i_pauli(2) * z.sin();
        let dn_dz = i_pauli(1) * (-z.sin()) + i_pauli(2) * z.cos();
        // N̂² = −I so exp(bN̂) = cos b·I + sin b·N̂
        let value = CMat::scalar(2, Complex64::new(b.cos(), 0.0)) + n_hat * b.sin();
        let d_of = |db: f64| -> CMat {
            CMat::scalar(2, Complex64::new(-b.sin() * db, 0.0)) + n_hat * (b.cos() * db)
        };
        let d_z = dn_dz * b.sin();
        (value, vec![d_of(b_s), d_of(b_t), d_z])
    })
}

fn cylinder_sum(omega: &Form, sheet: &Sheet, n_i: usize, n_z: usize) -> Complex64 {
    assert_eq!(omega.degree, sheet.i_dims + 1);
    let (nodes, weights) = gauss_legendre(n_i);
    let spec = GroupSpec::single(Factor::SU2);
    let wz = TAU / n_z as f64;
    let outer: Vec<Complex64> = (0..n_i)
        .into_par_iter()
        .map(|i| {
            let mut local = Vec::new();
            match sheet.i_dims {
                1 => {
                    for k in 0..n_z {
                        let z = TAU * k as f64 / n_z as f64;
                        let (g, partials) = sheet.eval(&[nodes[i]], z);
                        let point = GroupPoint::new(spec.clone(), vec![g]);
                        let xs: Vec<Tangent> = partials
                            .iter()
                            .map(|m| Tangent { mats: vec![*m] })
                            .collect();
                        local.push(omega.eval(&point, &xs) * (weights[i] * wz));
                    }
                }
                2 => {
                    for j in 0..n_i {
                        for k in 0..n_z {
                            let z = TAU * k as f64 / n_z as f64;
                            let (g, partials) = sheet.eval(&[nodes[i], nodes[j]], z);
                            let point = GroupPoint::new(spec.clone(), vec![g]);
                            let xs: Vec<Tangent> = partials
                                .iter()
                                .map(|m| Tangent { mats: vec![*m] })
                                .collect();
                            local.push(omega.eval(&point, &xs) * (weights[i] * weights[j] * wz));
                        }
                    }
                }
                other => panic!("unsupported cylinder dimension {other}"),
            }
            pairwise_sum(&local)
        })
        .collect();
    pairwise_sum(&outer)
}

/// Integrate a form of matching degree over a cylinder sheet
/// (Gauss–Legendre in the I-directions, trapezoid on the circle), with the
/// half-resolution convergence control.
pub fn integrate_form_over_cylinder(
    omega: &Form,
    sheet: &Sheet,
    n_i: usize,
    n_z: usize,
    tol: f64,
) -> Result<Complex64, QuadratureError> {
    let fine = cylinder_sum(omega, sheet, n_i, n_z);
    let coarse = cylinder_sum(omega, sheet, n_i / 2, n_z / 2);
    let drift = (fine - coarse).norm();
    if drift > 10.0 * tol {
        return Err(QuadratureError::NonConvergence {
            coarse: coarse.norm(),
            fine: fine.norm(),
            allowed: 10.0 * tol,
        });
    }
    Ok(fine)
}

/// Distance of `∫F*ν − ∫F′*ν` to the nearest integer, and that integer.
pub fn homotopy_integrality_check(
    nu: &Form,
    f: &Sheet,
    f2: &Sheet,
    n_i: usize,
    n_z: usize,
    tol: f64,
) -> Result<(f64, i64), QuadratureError> {
    let a = integrate_form_over_cylinder(nu, f, n_i, n_z, tol)?;
    let b = integrate_form_over_cylinder(nu, f2, n_i, n_z, tol)?;
    let diff = (a - b).re;
    let nearest = diff.round();
    Ok(((diff - nearest).abs(), nearest as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{exterior_derivative, trace_cubed_form, FdScheme, SmoothMap};
    use crate::groups::probe_rng;
    use crate::nerve::random_form;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (nodes, weights) = gauss_legendre(8);
        // ∫₀¹ x^k dx = 1/(k+1), exact up to degree 15
        for k in 0..12 {
            let got: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * x.powi(k))
                .sum();
            let expect = 1.0 / (k as f64 + 1.0);
            assert!((got - expect).abs() < 1e-13, "k={k}: {got} vs {expect}");
        }
    }

    #[test]
    fn charts_land_on_su2() {
        for chart in [ChartKind::EulerZyz, ChartKind::QuaternionPolar] {
            let r = chart.ranges();
            for i in 0..5 {
                for j in 0..5 {
                    for k in 0..5 {
                        let u = [
                            r[0] * (i as f64 + 0.5) / 5.0,
                            r[1] * (j as f64 + 0.5) / 5.0,
                            r[2] * (k as f64 + 0.5) / 5.0,
                        ];
                        let (g, partials) = chart.point_and_partials(u);
                        assert!(Factor::SU2.membership_residual(&g) < 1e-13);
                        // partials are tangent: g⁻¹∂g anti-Hermitian traceless
                        for d in partials {
                            let a = g.inverse() * d;
                            assert!(Factor::SU2.algebra_residual(&a) < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn chart_partials_match_finite_differences() {
        for chart in [ChartKind::EulerZyz, ChartKind::QuaternionPolar] {
            let u = [0.7, 1.1, 2.3];
            let h = 1e-6;
            let (_, partials) = chart.point_and_partials(u);
            for axis in 0..3 {
                let mut up = u;
                up[axis] += h;
                let mut um = u;
                um[axis] -= h;
                let fd = (chart.point_and_partials(up).0 - chart.point_and_partials(um).0)
                    * (1.0 / (2.0 * h));
                assert!(
                    fd.dist(&partials[axis]) < 1e-8,
                    "{chart:?} axis {axis} mismatch"
                );
            }
        }
    }

    #[test]
    fn zero_form_integrates_to_zero() {
        let zero = Form::zero(GroupSpec::single(Factor::SU2), 3);
        let v = integrate_top_form_su2(&zero, ChartKind::EulerZyz, 16, 1e-3).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn c13_integrates_to_unit_magnitude() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let euler = integrate_top_form_su2(&c13, ChartKind::EulerZyz, 48, 1e-3).unwrap();
        assert!(
            (euler.norm() - 1.0).abs() < 1e-3,
            "|∫C13| = {} (euler)",
            euler.norm()
        );
        let quat = integrate_top_form_su2(&c13, ChartKind::QuaternionPolar, 48, 1e-3).unwrap();
        assert!(
            (quat.norm() - 1.0).abs() < 1e-3,
            "|∫C13| = {} (quaternion)",
            quat.norm()
        );
        // the two parametrizations agree up to orientation
        assert!(
            (euler.norm() - quat.norm()).abs() < 1e-4,
            "parametrization mismatch {} vs {}",
            euler.norm(),
            quat.norm()
        );
        assert!(euler.re.abs() > 0.999 && euler.im.abs() < 1e-6);
    }

    #[test]
    fn stokes_control_vanishes() {
        let spec = GroupSpec::single(Factor::SU2);
        let mut rng = probe_rng(80, 0);
        let beta = random_form(&spec, 2, &mut rng, FdScheme::default());
        let dbeta = exterior_derivative(&beta, FdScheme::default());
        let v = integrate_top_form_su2(&dbeta, ChartKind::EulerZyz, 32, 1e-3).unwrap();
        assert!(v.norm() < 1e-3, "∫dβ = {v}");
    }

    #[test]
    fn left_translation_invariance() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let spec = GroupSpec::single(Factor::SU2);
        let mut rng = probe_rng(81, 0);
        let h = Factor::SU2.haar_sample(&mut rng);
        // integrate the pulled-back form along left translation
        let h_c = h;
        let translate = SmoothMap::new(
            spec.clone(),
            spec.clone(),
            move |p: &GroupPoint| GroupPoint::new(p.spec.clone(), vec![h_c * p.mats[0]]),
            move |_p: &GroupPoint, x: &Tangent| Tangent {
                mats: vec![h_c * x.mats[0]],
            },
        );
        let pulled = crate::forms::pullback(&translate, &c13).unwrap();
        let a = integrate_top_form_su2(&c13, ChartKind::EulerZyz, 24, 1e-3).unwrap();
        let b = integrate_top_form_su2(&pulled, ChartKind::EulerZyz, 24, 1e-3).unwrap();
        assert!((a - b).norm() < 1e-3, "translation moved ∫C13: {a} vs {b}");
    }

    #[test]
    fn resolution_convergence_ratio() {
        // beyond the knee the midpoint error shrinks by ≥ 3 per doubling
        let c13 = trace_cubed_form(Factor::SU2, None);
        let reference = su2_riemann_sum(&c13, ChartKind::EulerZyz, 96).norm();
        let e12 = (su2_riemann_sum(&c13, ChartKind::EulerZyz, 12).norm() - reference).abs();
        let e24 = (su2_riemann_sum(&c13, ChartKind::EulerZyz, 24).norm() - reference).abs();
        let e48 = (su2_riemann_sum(&c13, ChartKind::EulerZyz, 48).norm() - reference).abs();
        assert!(e12 / e24 >= 3.0, "12→24 ratio {}", e12 / e24);
        assert!(e24 / e48 >= 3.0, "24→48 ratio {}", e24 / e48);
    }

    fn test_family(rng: &mut impl rand::Rng, ramp: Ramp) -> PathFamily {
        let terms = vec![
            (
                TrigPoly {
                    c0: 0.0,
                    a: vec![0.5, 0.2],
                    b: vec![0.3, -0.1],
                },
                i_pauli(1),
            ),
            (
                TrigPoly {
                    c0: 0.2,
                    a: vec![-0.3],
                    b: vec![0.4],
                },
                i_pauli(2) * (0.8 + 0.1 * rng.gen::<f64>()),
            ),
        ];
        PathFamily { terms, ramp }
    }

    #[test]
    fn slerp_boundary_and_partials() {
        let mut rng = probe_rng(82, 0);
        let sigma = test_family(&mut rng, Ramp::Linear);
        let sigma2 = PathFamily {
            terms: sigma.terms.clone(),
            ramp: Ramp::Smoothstep,
        };
        let sheet = slerp_sheet(&sigma, &sigma2);
        assert!(sheet_boundary_residual(&sheet, &sigma, &sigma2) < 1e-12);
        // partials vs finite differences
        let h = 1e-6;
        for (s, t, z) in [(0.33, 0.48, 1.2), (0.71, 0.9, 4.0), (0.05, 0.02, 0.3)] {
            let (_, partials) = sheet.eval(&[s, t], z);
            let fd_s = (sheet.eval(&[s + h, t], z).0 - sheet.eval(&[s - h, t], z).0)
                * (1.0 / (2.0 * h));
            let fd_t = (sheet.eval(&[s, t + h], z).0 - sheet.eval(&[s, t - h], z).0)
                * (1.0 / (2.0 * h));
            let fd_z = (sheet.eval(&[s, t], z + h).0 - sheet.eval(&[s, t], z - h).0)
                * (1.0 / (2.0 * h));
            assert!(fd_s.dist(&partials[0]) < 1e-7, "s-partial at ({s},{t},{z})");
            assert!(fd_t.dist(&partials[1]) < 1e-7, "t-partial at ({s},{t},{z})");
            assert!(fd_z.dist(&partials[2]) < 1e-7, "z-partial at ({s},{t},{z})");
        }
        // sheet values stay on the group
        for (s, t, z) in [(0.5, 0.5, 2.0), (0.9, 0.26, 5.1)] {
            let (g, _) = sheet.eval(&[s, t], z);
            assert!(Factor::SU2.membership_residual(&g) < 1e-12);
        }
    }

    #[test]
    fn wrap_sheet_is_unitary_with_exact_partials() {
        // (the exact disk center is only C¹ and is avoided; it has measure
        // zero and bounded partials, so quadrature never sees it)
        let w = wrap_sheet();
        for (s, t, z) in [(0.54, 0.47, 1.0), (0.31, 0.62, 3.3), (0.02, 0.5, 0.2)] {
            let (g, partials) = w.eval(&[s, t], z);
            assert!(Factor::SU2.membership_residual(&g) < 1e-12);
            let h = 1e-6;
            let fd_s = (w.eval(&[s + h, t], z).0 - w.eval(&[s - h, t], z).0) * (1.0 / (2.0 * h));
            let fd_t = (w.eval(&[s, t + h], z).0 - w.eval(&[s, t - h], z).0) * (1.0 / (2.0 * h));
            let fd_z = (w.eval(&[s, t], z + h).0 - w.eval(&[s, t], z - h).0) * (1.0 / (2.0 * h));
            assert!(fd_s.dist(&partials[0]) < 1e-6);
            assert!(fd_t.dist(&partials[1]) < 1e-6);
            assert!(fd_z.dist(&partials[2]) < 1e-6);
        }
        // identity on the boundary
        for edge in [0.0, 1.0] {
            let (g, _) = w.eval(&[edge, 0.37], 2.0);
            assert!(g.dist(&CMat::identity(2)) < 1e-14);
            let (g2, _) = w.eval(&[0.81, edge], 0.4);
            assert!(g2.dist(&CMat::identity(2)) < 1e-14);
        }
    }

    #[test]
    fn wrap_sheet_has_unit_degree() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let w = wrap_sheet();
        let v = integrate_form_over_cylinder(&c13, &w, 48, 32, 1e-2).unwrap();
        assert!(
            (v.re.abs() - 1.0).abs() < 1e-2 && v.im.abs() < 1e-6,
            "wrap degree integral {v}"
        );
    }

    #[test]
    fn constant_sheet_integrates_to_zero() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let constant = Sheet::new(2, |_u, _z| {
            (
                CMat::identity(2),
                vec![CMat::zero(2), CMat::zero(2), CMat::zero(2)],
            )
        });
        let v = integrate_form_over_cylinder(&c13, &constant, 8, 8, 1e-3).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn z_independent_sheet_kills_top_forms() {
        // degenerate pullback: no z-dependence means the three partials are
        // linearly dependent on a 2-parameter family
        let c13 = trace_cubed_form(Factor::SU2, None);
        let mut rng = probe_rng(83, 0);
        let fam = test_family(&mut rng, Ramp::Linear);
        let sheet = Sheet::new(2, move |u, _z| {
            let (g, dt, _) = fam.eval(u[0] * u[1], 0.77);
            (g, vec![dt * u[1], dt * u[0], CMat::zero(2)])
        });
        let v = integrate_form_over_cylinder(&c13, &sheet, 12, 6, 1e-3).unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn band_limited_cylinder_integral_is_resolution_stable() {
        let mut rng = probe_rng(84, 0);
        let fam = test_family(&mut rng, Ramp::Smoothstep);
        let sheet = fam.sheet();
        let spec = GroupSpec::single(Factor::SU2);
        let beta = random_form(&spec, 2, &mut rng, FdScheme::default());
        let a = cylinder_sum(&beta, &sheet, 24, 32);
        let b = cylinder_sum(&beta, &sheet, 48, 64);
        assert!((a - b).norm() < 1e-8, "resolution drift {}", (a - b).norm());
    }

    #[test]
    fn identical_sheets_have_zero_difference() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let mut rng = probe_rng(85, 0);
        let sigma = test_family(&mut rng, Ramp::Linear);
        let sigma2 = PathFamily {
            terms: sigma.terms.clone(),
            ramp: Ramp::Smoothstep,
        };
        let f = slerp_sheet(&sigma, &sigma2);
        let (dist, int) = homotopy_integrality_check(&c13, &f, &f, 32, 32, 1e-2).unwrap();
        assert_eq!(int, 0);
        assert!(dist < 1e-14);
    }

    #[test]
    fn null_homotopic_perturbation_gives_integer_zero() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let mut rng = probe_rng(86, 0);
        let sigma = test_family(&mut rng, Ramp::Linear);
        let sigma2 = PathFamily {
            terms: sigma.terms.clone(),
            ramp: Ramp::Smoothstep,
        };
        let f = slerp_sheet(&sigma, &sigma2);
        let f2 = f.product(&bump_sheet(0.8));
        let (dist, int) = homotopy_integrality_check(&c13, &f, &f2, 32, 48, 1e-2).unwrap();
        assert_eq!(int, 0, "null-homotopic perturbation moved the class");
        assert!(dist < 1e-2, "distance to integer {dist}");
    }

    #[test]
    fn wrap_insertion_shifts_by_unit() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let mut rng = probe_rng(87, 0);
        let sigma = test_family(&mut rng, Ramp::Linear);
        let sigma2 = PathFamily {
            terms: sigma.terms.clone(),
            ramp: Ramp::Smoothstep,
        };
        let f = slerp_sheet(&sigma, &sigma2);
        let f2 = f.product(&wrap_sheet());
        let (dist, int) = homotopy_integrality_check(&c13, &f, &f2, 48, 48, 1e-2).unwrap();
        assert_eq!(int.abs(), 1, "wrap factor should shift by ±1 (got {int})");
        assert!(dist < 1e-2, "distance to integer {dist}");
    }
}
