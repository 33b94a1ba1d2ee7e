//! Central U(1)-extensions with connections: the desk-scale testbed is
//! U(2) → PU(2), flat or twisted.
//!
//! A model carries a deterministic lift G → Ĝ (a right inverse of π, not a
//! homomorphism), exact projection differential, the center action and a
//! connection θ normalized to `θ(ĝ·iI) = i` on the vertical generator.
//! Every quantity defined "via lifts" — the curvature on the base, the
//! natural-section pullback
//!
//!   ŝ_nt*(δθ)((g₁,g₂); v) = θ_{ĝ₂}(v̂₂) − θ_{ĝ₁ĝ₂}(v̂₁ĝ₂ + ĝ₁v̂₂) + θ_{ĝ₁}(v̂₁),
//!
//! the degree-3 cocycle (c₁(θ), −(−1/2πi)ŝ*(δθ)), the section-change and
//! connection-change coboundaries, and the equivariant 1-form τ on G⋊S¹ —
//! is invariant under center shifts of the point lifts and vertical shifts
//! of the tangent lifts, which is what makes the finite-difference exterior
//! derivative of these forms legitimate.

use crate::cmat::{pauli, CMat, IM, ONE};
use crate::forms::{
    exterior_derivative, inv_2pii, pullback, FdScheme, Form, SmoothMap,
};
use crate::groups::{
    adjoint_circle_action, probe_rng, sample_point, sample_tangent, CircleAction, Factor,
    GroupPoint, GroupSpec, Tangent,
};
use crate::nerve::{
    check_zero, d_total, CochainLayer, Nerve, ProbeCfg, TotalCochain,
};
use crate::residual::{
    probe_choice, probe_sign, residual_max, FrozenSign, IdentityResidual, ResidualReport,
    SignProbeError,
};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtensionError {
    #[error("twist 1-form rejected: {0}")]
    TwistRejected(String),
    #[error("θ is not a connection: {0}")]
    NotAConnection(String),
    #[error(transparent)]
    SignProbe(#[from] SignProbeError),
}

type LiftFn = dyn Fn(&GroupPoint) -> GroupPoint + Send + Sync;
type LiftTangentFn = dyn Fn(&GroupPoint, &GroupPoint, &Tangent) -> Tangent + Send + Sync;
type ThetaFn = dyn Fn(&GroupPoint, &Tangent) -> Complex64 + Send + Sync;
type CenterMulFn = dyn Fn(&GroupPoint, Complex64) -> GroupPoint + Send + Sync;
type CenterShiftTanFn = dyn Fn(&Tangent, Complex64) -> Tangent + Send + Sync;
type VerticalFn = dyn Fn(&GroupPoint, f64) -> Tangent + Send + Sync;

/// A concrete central U(1)-extension π : Ĝ → G with connection.
#[derive(Clone)]
pub struct CentralExtension {
    pub total: GroupSpec,
    pub base: GroupSpec,
    /// π with its exact differential.
    pub project: SmoothMap,
    /// Deterministic right inverse of π on points.
    pub lift: Arc<LiftFn>,
    /// `(g, ĝ = lift(g), v) ↦ v̂` with `dπ(v̂) = v`.
    pub lift_tangent: Arc<LiftTangentFn>,
    /// Connection evaluator, purely imaginary valued.
    pub theta: Arc<ThetaFn>,
    /// Right action of the central circle on points of Ĝ.
    pub center_mul: Arc<CenterMulFn>,
    /// Right translation of tangents under the center action.
    pub center_shift_tangent: Arc<CenterShiftTanFn>,
    /// Fundamental vertical tangent at ĝ with rate t (the iI-direction).
    pub vertical_tangent: Arc<VerticalFn>,
}

impl CentralExtension {
    /// The connection as a 1-form on Ĝ.
    pub fn theta_form(&self) -> Form {
        let theta = self.theta.clone();
        Form::new(self.total.clone(), 1, move |p, xs| theta(p, &xs[0]))
    }
}

/// Deterministic sign canonicalization of a unit-determinant 2×2
/// representative: the largest-modulus entry gets positive real part
/// (positive imaginary part on the tie-break). Discontinuous only on a
/// measure-zero set, and nothing downstream differentiates the lift itself.
fn canonical_sign(m: &CMat) -> CMat {
    let mut best = m.get(0, 0);
    let mut best_norm = best.norm();
    for (i, j) in [(0, 1), (1, 0), (1, 1)] {
        let e = m.get(i, j);
        if e.norm() > best_norm {
            best_norm = e.norm();
            best = e;
        }
    }
    let flip = if best.re.abs() > 1e-12 {
        best.re < 0.0
    } else {
        best.im < 0.0
    };
    if flip {
        -*m
    } else {
        *m
    }
}

/// The U(2) → PU(2) model. `twist` adds `π*α` to the flat connection
/// `θ_ĝ(X) = ½ tr(ĝ⁻¹X)`; the 1-form α on PU(2) must be representative-flip
/// invariant with dα ≠ 0.
pub fn build_u2_over_pu2(twist: Option<Form>) -> Result<CentralExtension, ExtensionError> {
    let total = GroupSpec::single(Factor::U2);
    let base = GroupSpec::single(Factor::PU2);

    let project_apply = |pt: &GroupPoint| {
        let g = pt.mats[0];
        let root = g.det().sqrt();
        GroupPoint::new(
            GroupSpec::single(Factor::PU2),
            vec![g * (ONE / root)],
        )
    };
    let project = SmoothMap::new(
        total.clone(),
        base.clone(),
        project_apply,
        |pt: &GroupPoint, x: &Tangent| {
            // dπ(X) = det^{-1/2}·X − ½ tr(ĝ⁻¹X)·π(ĝ)
            let g = pt.mats[0];
            let root = g.det().sqrt();
            let tr = (g.inverse() * x.mats[0]).trace();
            let rep = g * (ONE / root);
            Tangent {
                mats: vec![x.mats[0] * (ONE / root) - rep * (tr * 0.5)],
            }
        },
    );

    if let Some(alpha) = &twist {
        validate_twist(alpha)?;
    }

    let theta: Arc<ThetaFn> = match twist {
        None => Arc::new(|p: &GroupPoint, x: &Tangent| {
            (p.mats[0].inverse() * x.mats[0]).trace() * 0.5
        }),
        Some(alpha) => {
            let proj_apply = project.apply.clone();
            let proj_push = project.push.clone();
            Arc::new(move |p: &GroupPoint, x: &Tangent| {
                let flat = (p.mats[0].inverse() * x.mats[0]).trace() * 0.5;
                let down = proj_apply(p);
                let pushed = proj_push(p, x);
                flat + alpha.eval(&down, &[pushed])
            })
        }
    };

    Ok(CentralExtension {
        total,
        base: base.clone(),
        project,
        lift: Arc::new(move |g: &GroupPoint| {
            GroupPoint::new(
                GroupSpec::single(Factor::U2),
                vec![canonical_sign(&g.mats[0])],
            )
        }),
        lift_tangent: Arc::new(|g: &GroupPoint, lifted: &GroupPoint, v: &Tangent| {
            // carry A = g⁻¹v over to the canonical representative
            let a = g.mats[0].inverse() * v.mats[0];
            Tangent {
                mats: vec![lifted.mats[0] * a],
            }
        }),
        theta,
        center_mul: Arc::new(|p: &GroupPoint, u: Complex64| {
            GroupPoint::new(p.spec.clone(), vec![p.mats[0] * u])
        }),
        center_shift_tangent: Arc::new(|x: &Tangent, u: Complex64| x.scale_c(u)),
        vertical_tangent: Arc::new(|p: &GroupPoint, rate: f64| Tangent {
            mats: vec![p.mats[0] * (IM * rate)],
        }),
    })
}

/// The trivial extension G × U(1) with the product connection; useful as a
/// degenerate control (its natural-section pullback vanishes identically).
pub fn build_trivial(base: GroupSpec) -> CentralExtension {
    let total = base.concat(&GroupSpec::single(Factor::U1));
    let n = base.len();
    let base_c = base.clone();
    let project = SmoothMap::new(
        total.clone(),
        base.clone(),
        move |pt: &GroupPoint| GroupPoint::new(base_c.clone(), pt.mats[..n].to_vec()),
        move |_pt: &GroupPoint, x: &Tangent| Tangent {
            mats: x.mats[..n].to_vec(),
        },
    );
    let total_c = total.clone();
    CentralExtension {
        total: total.clone(),
        base,
        project,
        lift: Arc::new(move |g: &GroupPoint| {
            let mut mats = g.mats.clone();
            mats.push(CMat::identity(1));
            GroupPoint::new(total_c.clone(), mats)
        }),
        lift_tangent: Arc::new(|_g, _lifted, v: &Tangent| {
            let mut mats = v.mats.clone();
            mats.push(CMat::zero(1));
            Tangent { mats }
        }),
        theta: Arc::new(|p: &GroupPoint, x: &Tangent| {
            let k = p.mats.len() - 1;
            (p.mats[k].inverse() * x.mats[k]).get(0, 0)
        }),
        center_mul: Arc::new(|p: &GroupPoint, u: Complex64| {
            let mut mats = p.mats.clone();
            let k = mats.len() - 1;
            mats[k] = mats[k] * u;
            GroupPoint::new(p.spec.clone(), mats)
        }),
        center_shift_tangent: Arc::new(|x: &Tangent, u: Complex64| {
            let mut mats = x.mats.clone();
            let k = mats.len() - 1;
            mats[k] = mats[k] * u;
            Tangent { mats }
        }),
        vertical_tangent: Arc::new(|p: &GroupPoint, rate: f64| {
            let mut mats: Vec<CMat> = p
                .mats
                .iter()
                .map(|m| CMat::zero(m.dim()))
                .collect();
            let k = mats.len() - 1;
            mats[k] = p.mats[k] * (IM * rate);
            Tangent { mats }
        }),
    }
}

/// The default twist 1-form on PU(2):
/// `α_g(gA) = i/2 · [Re tr(σ₃ g σ₃ g⁻¹) Im tr(σ₃ A) + 0.7·Re tr(σ₁ g σ₁ g⁻¹) Im tr(σ₁ A)]`
/// — smooth, iℝ-valued, invariant under representative flips, with dα ≠ 0.
/// The σ₁ word breaks invariance under conjugation by the embedded circle,
/// which the τ orientation probe needs to discriminate.
pub fn default_twist_form() -> Form {
    let spec = GroupSpec::single(Factor::PU2);
    Form::new(spec, 1, |p: &GroupPoint, xs: &[Tangent]| {
        let g = p.mats[0];
        let a = g.inverse() * xs[0].mats[0];
        let g_inv = g.inverse();
        let f3 = (pauli(3) * g * pauli(3) * g_inv).trace().re;
        let f1 = (pauli(1) * g * pauli(1) * g_inv).trace().re;
        let lam3 = (pauli(3) * a).trace().im;
        let lam1 = (pauli(1) * a).trace().im;
        IM * (0.5 * (f3 * lam3 + 0.7 * f1 * lam1))
    })
}

fn validate_twist(alpha: &Form) -> Result<(), ExtensionError> {
    let spec = GroupSpec::single(Factor::PU2);
    if alpha.domain != spec || alpha.degree != 1 {
        return Err(ExtensionError::TwistRejected(
            "twist must be a 1-form on PU(2)".into(),
        ));
    }
    let mut max_flip: f64 = 0.0;
    let mut max_dalpha: f64 = 0.0;
    let dalpha = exterior_derivative(alpha, FdScheme::default());
    for k in 0..32u64 {
        let mut rng = probe_rng(0x7751, k);
        let p = sample_point(&spec, &mut rng);
        let x = sample_tangent(&p, &mut rng);
        let y = sample_tangent(&p, &mut rng);
        let mut fp = p.clone();
        fp.mats[0] = -fp.mats[0];
        let fx = Tangent {
            mats: vec![-x.mats[0]],
        };
        max_flip = max_flip.max((alpha.eval(&p, &[x.clone()]) - alpha.eval(&fp, &[fx])).norm());
        max_dalpha = max_dalpha.max(dalpha.eval(&p, &[x, y]).norm());
    }
    if max_flip > 1e-10 {
        return Err(ExtensionError::TwistRejected(format!(
            "representative-flip residual {max_flip:.3e}"
        )));
    }
    if max_dalpha < 1e-6 {
        return Err(ExtensionError::TwistRejected(format!(
            "dα ≈ 0 (max |dα| = {max_dalpha:.3e})"
        )));
    }
    Ok(())
}

/// Optional lift deformations used by the independence probes.
#[derive(Clone, Copy, Default)]
struct Gauge {
    /// Central phase shifts of the two point lifts.
    u1: Option<Complex64>,
    u2: Option<Complex64>,
    /// Vertical rates added to the two tangent lifts.
    w1: f64,
    w2: f64,
}

fn split_tangent(b: usize, x: &Tangent) -> (Tangent, Tangent) {
    (
        Tangent {
            mats: x.mats[..b].to_vec(),
        },
        Tangent {
            mats: x.mats[b..].to_vec(),
        },
    )
}

fn split_point(base: &GroupSpec, p: &GroupPoint) -> (GroupPoint, GroupPoint) {
    let b = base.len();
    (
        GroupPoint::new(base.clone(), p.mats[..b].to_vec()),
        GroupPoint::new(base.clone(), p.mats[b..].to_vec()),
    )
}

/// Product-rule tangent of a factor-wise product: `X·b + a·Y`.
fn product_tangent(a: &GroupPoint, x: &Tangent, b: &GroupPoint, y: &Tangent) -> Tangent {
    Tangent {
        mats: a
            .mats
            .iter()
            .zip(&x.mats)
            .zip(b.mats.iter().zip(&y.mats))
            .map(|((ga, xa), (gb, yb))| *xa * *gb + *ga * *yb)
            .collect(),
    }
}

fn s_nt_value(ext: &CentralExtension, p: &GroupPoint, x: &Tangent, gauge: &Gauge) -> Complex64 {
    let (g1, g2) = split_point(&ext.base, p);
    let (v1, v2) = split_tangent(ext.base.len(), x);
    let mut l1 = (ext.lift)(&g1);
    let mut l2 = (ext.lift)(&g2);
    let mut v1h = (ext.lift_tangent)(&g1, &l1, &v1);
    let mut v2h = (ext.lift_tangent)(&g2, &l2, &v2);
    if let Some(u) = gauge.u1 {
        l1 = (ext.center_mul)(&l1, u);
        v1h = (ext.center_shift_tangent)(&v1h, u);
    }
    if let Some(u) = gauge.u2 {
        l2 = (ext.center_mul)(&l2, u);
        v2h = (ext.center_shift_tangent)(&v2h, u);
    }
    if gauge.w1 != 0.0 {
        v1h = v1h.add(&(ext.vertical_tangent)(&l1, gauge.w1));
    }
    if gauge.w2 != 0.0 {
        v2h = v2h.add(&(ext.vertical_tangent)(&l2, gauge.w2));
    }
    let l12 = l1.multiply(&l2).expect("matching total specs");
    let mid = product_tangent(&l1, &v1h, &l2, &v2h);
    (ext.theta)(&l2, &v2h) - (ext.theta)(&l12, &mid) + (ext.theta)(&l1, &v1h)
}

/// The 1-form `ŝ_nt*(δθ)` on G×G, evaluated through arbitrary lifts.
pub fn nat_section_delta_pullback(ext: &CentralExtension) -> Form {
    let ext = ext.clone();
    let domain = ext.base.concat(&ext.base);
    Form::new(domain, 1, move |p, xs| {
        s_nt_value(&ext, p, &xs[0], &Gauge::default())
    })
}

/// The curvature 2-form c₁(θ) on the base: lift, evaluate `(−1/2πi)dθ`.
///
/// The inner dθ always uses the Richardson stencil: the curvature layer is
/// routinely differentiated again (closedness, coboundary identities), and
/// an inner plain-h truncation would bleed into those outer derivatives.
pub fn curvature_on_base(ext: &CentralExtension, scheme: FdScheme) -> Form {
    let dtheta = exterior_derivative(
        &ext.theta_form(),
        FdScheme {
            richardson: true,
            ..scheme
        },
    );
    let ext = ext.clone();
    Form::new(ext.base.clone(), 2, move |p, xs| {
        let l = (ext.lift)(p);
        let v1 = (ext.lift_tangent)(p, &l, &xs[0]);
        let v2 = (ext.lift_tangent)(p, &l, &xs[1]);
        inv_2pii() * dtheta.eval(&l, &[v1, v2])
    })
}

/// The degree-3 cocycle: layer (1,2) = c₁(θ), layer (2,1) = −(−1/2πi)ŝ*(δθ).
pub fn dd_cocycle(ext: &CentralExtension, scheme: FdScheme) -> TotalCochain {
    let curv = CochainLayer::new(1, 0, 2, curvature_on_base(ext, scheme)).fd_tainted();
    let s_layer = CochainLayer::new(
        2,
        0,
        1,
        nat_section_delta_pullback(ext).scale(-inv_2pii()),
    );
    TotalCochain::new(vec![curv, s_layer]).expect("degree-3 layers")
}

/// Slot labels for the degree-3 cocycle check.
pub fn dd_cocycle_labels(p: usize, q: usize, r: usize) -> Option<(String, String)> {
    match (p, q, r) {
        (1, 0, 3) => Some((
            "curvature_closed".into(),
            "d c1(theta) = 0 on G".into(),
        )),
        (2, 0, 2) => Some((
            "curvature_coboundary".into(),
            "(e0* - e1* + e2*) c1(theta) = (-1/2 pi i) d(s_nt*(delta theta)) on G^2".into(),
        )),
        (3, 0, 1) => Some((
            "section_simplicial_cocycle".into(),
            "(e0* - e1* + e2* - e3*)(s_nt*(delta theta)) = 0 on G^3".into(),
        )),
        _ => None,
    }
}

/// Max residual of lift independence: center shifts of point lifts and
/// vertical shifts of tangent lifts must not move the value.
pub fn lift_independence_residuals(ext: &CentralExtension, cfg: &ProbeCfg) -> (f64, f64) {
    let domain = ext.base.concat(&ext.base);
    let results: Vec<(f64, f64)> = (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0xA100 + k as u64);
            let p = sample_point(&domain, &mut rng);
            let x = sample_tangent(&p, &mut rng);
            let base_val = s_nt_value(ext, &p, &x, &Gauge::default());
            use rand::Rng;
            let u1 = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
            let u2 = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
            let center = s_nt_value(
                ext,
                &p,
                &x,
                &Gauge {
                    u1: Some(u1),
                    u2: Some(u2),
                    ..Default::default()
                },
            );
            let w1 = rng.gen::<f64>() * 2.0 - 1.0;
            let w2 = rng.gen::<f64>() * 2.0 - 1.0;
            let vert = s_nt_value(
                ext,
                &p,
                &x,
                &Gauge {
                    w1,
                    w2,
                    ..Default::default()
                },
            );
            ((center - base_val).norm(), (vert - base_val).norm())
        })
        .collect();
    results
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (residual_max(a, c), residual_max(b, d)))
}

/// The four-fold alternating tensor of ŝ_nt over G³, evaluated in the
/// canonical trivialization of δ(δĜ).
///
/// Each of the 12 slots is a point of Ĝ over a composite face value; the
/// simplicial identities pair the slots with opposite signs, each pair
/// contributing the central ratio of its two points. The product over all
/// six pairs is the discrepancy, and it must be exactly 1 ∈ U(1).
pub fn delta_s_nt_discrepancy(
    ext: &CentralExtension,
    g1: &GroupPoint,
    g2: &GroupPoint,
    g3: &GroupPoint,
) -> Complex64 {
    // outer face of G³ → G²
    let outer = |i: usize| -> (GroupPoint, GroupPoint) {
        match i {
            0 => (g2.clone(), g3.clone()),
            1 => (g1.multiply(g2).unwrap(), g3.clone()),
            2 => (g1.clone(), g2.multiply(g3).unwrap()),
            _ => (g1.clone(), g2.clone()),
        }
    };
    // inner slot j of ŝ_nt(a, b): lift(b) | lift(a)·lift(b) | lift(a)
    let slot = |i: usize, j: usize| -> GroupPoint {
        let (a, b) = outer(i);
        match j {
            0 => (ext.lift)(&b),
            1 => (ext.lift)(&a).multiply(&(ext.lift)(&b)).unwrap(),
            _ => (ext.lift)(&a),
        }
    };
    let mut product = ONE;
    for i in 0..=3usize {
        for j in 0..=2usize {
            if j < i {
                // pairs with (i', j') = (j, i−1) of opposite sign
                let x = slot(i, j);
                let y = slot(j, i - 1);
                let ratio = central_ratio(&y, &x);
                let sign_positive = (i + j) % 2 == 0;
                product *= if sign_positive { ratio } else { ONE / ratio };
            }
        }
    }
    product
}

/// Central element u with x = y·u; panics if x and y do not lie in the same
/// fiber (their quotient is not scalar).
fn central_ratio(y: &GroupPoint, x: &GroupPoint) -> Complex64 {
    let mut ratio = ONE;
    for (my, mx) in y.mats.iter().zip(&x.mats) {
        let q = my.inverse() * *mx;
        let lambda = q.trace() / (q.dim() as f64);
        let scalar_residual = (q - CMat::scalar(q.dim(), lambda)).norm();
        assert!(
            scalar_residual < 1e-9,
            "points not in the same fiber (residual {scalar_residual:.3e})"
        );
        ratio *= lambda;
    }
    ratio
}

/// A smooth U(1)-valued function ψ on G with its induced coboundary
/// φ = δψ, φ(g₁,g₂) = ψ(g₂)·ψ(g₁g₂)⁻¹·ψ(g₁).
#[derive(Clone)]
pub struct SectionTwist {
    pub psi: Arc<dyn Fn(&GroupPoint) -> Complex64 + Send + Sync>,
}

impl SectionTwist {
    pub fn new(psi: impl Fn(&GroupPoint) -> Complex64 + Send + Sync + 'static) -> Self {
        SectionTwist { psi: Arc::new(psi) }
    }

    /// A representative-flip-safe smooth character-like twist on PU(2). The
    /// phase amplitude is kept small so its high-order derivatives stay well
    /// inside the finite-difference budget.
    pub fn default_pu2() -> Self {
        SectionTwist::new(|g: &GroupPoint| {
            let m = g.mats[0];
            let f = (pauli(3) * m * pauli(3) * m.inverse()).trace().re;
            Complex64::from_polar(1.0, 0.25 * f)
        })
    }

    pub fn phi(&self, g1: &GroupPoint, g2: &GroupPoint) -> Complex64 {
        let psi = &self.psi;
        let g12 = g1.multiply(g2).unwrap();
        psi(g2) * psi(&g12).inv() * psi(g1)
    }

    /// φ as a 0-form on G².
    pub fn phi_form(&self, base: &GroupSpec) -> Form {
        let twist = self.clone();
        let b = base.len();
        let base_c = base.clone();
        Form::scalar(base.concat(base), move |p| {
            let g1 = GroupPoint::new(base_c.clone(), p.mats[..b].to_vec());
            let g2 = GroupPoint::new(base_c.clone(), p.mats[b..].to_vec());
            twist.phi(&g1, &g2)
        })
    }

    /// `ψ⁻¹dψ` as an iℝ-valued 1-form on G (through the FD engine, treating
    /// the U(1) target as 1×1 matrix curves — no branch cuts). Richardson
    /// stencil: this form feeds coboundary layers that are differentiated
    /// again.
    pub fn d_log_psi(&self, base: &GroupSpec, scheme: FdScheme) -> Form {
        let psi = self.psi.clone();
        let f = Form::scalar(base.clone(), move |p| psi(p));
        let df = exterior_derivative(
            &f,
            FdScheme {
                richardson: true,
                ..scheme
            },
        );
        let psi2 = self.psi.clone();
        Form::new(base.clone(), 1, move |p, xs| df.eval(p, xs) / psi2(p))
    }
}

/// `d log φ = φ⁻¹dφ` on G² (Richardson, same reason as `d_log_psi`).
pub fn d_log_phi(twist: &SectionTwist, base: &GroupSpec, scheme: FdScheme) -> Form {
    let phi = twist.phi_form(base);
    let dphi = exterior_derivative(
        &phi,
        FdScheme {
            richardson: true,
            ..scheme
        },
    );
    let phi2 = twist.phi_form(base);
    Form::new(phi.domain.clone(), 1, move |p, xs| {
        dphi.eval(p, xs) / phi2.eval(p, &[])
    })
}

/// Direct evaluation of `ŝ*(δθ)` for the twisted section ŝ = ŝ_nt·φ: the
/// ε₀-slot lift is multiplied by φ and its tangent picks up the exact
/// `φ⁻¹dφ` vertical term through the FD engine.
pub fn twisted_section_delta_pullback(
    ext: &CentralExtension,
    twist: &SectionTwist,
    scheme: FdScheme,
) -> Form {
    let ext_c = ext.clone();
    let domain = ext.base.concat(&ext.base);
    let phi = twist.phi_form(&ext.base);
    let dphi = exterior_derivative(&phi, scheme);
    Form::new(domain, 1, move |p, xs| {
        let x = &xs[0];
        let (g1, g2) = split_point(&ext_c.base, p);
        let (v1, v2) = split_tangent(ext_c.base.len(), x);
        let l1 = (ext_c.lift)(&g1);
        let l2 = (ext_c.lift)(&g2);
        let v1h = (ext_c.lift_tangent)(&g1, &l1, &v1);
        let v2h = (ext_c.lift_tangent)(&g2, &l2, &v2);
        // ε₀ slot carries the φ factor
        let u = phi.eval(p, &[]);
        let l2p = (ext_c.center_mul)(&l2, u);
        let rate = (dphi.eval(p, std::slice::from_ref(x)) / u).im;
        let v2p = (ext_c.center_shift_tangent)(&v2h, u)
            .add(&(ext_c.vertical_tangent)(&l2p, rate));
        let l12 = l1.multiply(&l2).unwrap();
        let mid = product_tangent(&l1, &v1h, &l2, &v2h);
        (ext_c.theta)(&l2p, &v2p) - (ext_c.theta)(&l12, &mid) + (ext_c.theta)(&l1, &v1h)
    })
}

/// Section-change suite: δφ = 1, the `ŝ*(δθ) = ŝ_nt*(δθ) + d log φ`
/// identity, and the total-coboundary comparison with the (1,1) layer
/// `(−1/2πi)·ψ⁻¹dψ` (relative sign frozen by probe).
pub fn twist_section_check(
    ext: &CentralExtension,
    twist: &SectionTwist,
    scheme: FdScheme,
    cfg: &ProbeCfg,
) -> Result<ResidualReport, ExtensionError> {
    let mut report = ResidualReport::default();
    let base = &ext.base;

    // δφ = 1 on G³
    let delta_phi_max = (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0xB200 + k as u64);
            let g1 = sample_point(base, &mut rng);
            let g2 = sample_point(base, &mut rng);
            let g3 = sample_point(base, &mut rng);
            let phi = |a: &GroupPoint, b: &GroupPoint| twist.phi(a, b);
            let value = phi(&g2, &g3)
                * phi(&g1.multiply(&g2).unwrap(), &g3).inv()
                * phi(&g1, &g2.multiply(&g3).unwrap())
                * phi(&g1, &g2).inv();
            (value - ONE).norm()
        })
        .reduce(|| 0.0, residual_max);
    report.push(IdentityResidual::new(
        "twist_delta_phi",
        "delta(delta psi) = 1 on G^3",
        cfg.samples,
        delta_phi_max,
        1e-12,
    ));

    // ŝ*(δθ) = ŝ_nt*(δθ) + d log φ
    let lhs = twisted_section_delta_pullback(ext, twist, scheme);
    let rhs = nat_section_delta_pullback(ext)
        .add(&d_log_phi(twist, base, scheme))
        .expect("same domain");
    let diff = lhs.add(&rhs.neg()).unwrap();
    let max = crate::nerve::probe_form_max(&diff, cfg, 0xB300);
    report.push(IdentityResidual::new(
        "twist_section_change",
        "s*(delta theta) = s_nt*(delta theta) + d log phi on G^2",
        cfg.samples,
        max,
        cfg.tol_fd,
    ));

    // cocycle(ŝ) − cocycle(ŝ_nt) = ±D[(−1/2πi)ψ⁻¹dψ]
    let nerve = Nerve::simplicial(base.clone());
    let delta_layer = CochainLayer::new(
        2,
        0,
        1,
        d_log_phi(twist, base, scheme).scale(-inv_2pii()),
    )
    .fd_tainted();
    let lambda = CochainLayer::new(
        1,
        0,
        1,
        twist.d_log_psi(base, scheme).scale(inv_2pii()),
    )
    .fd_tainted();
    let d_lambda = d_total(
        &nerve,
        &TotalCochain::new(vec![lambda]).unwrap(),
        scheme,
    );
    let probe_cfg = ProbeCfg {
        samples: cfg.samples.min(40),
        ..*cfg
    };
    let residual_for = |sign: f64| -> f64 {
        coboundary_residual(&[delta_layer.clone()], &d_lambda, sign, &probe_cfg)
    };
    let (sign, frozen) = probe_sign("twist_coboundary_sign", cfg.tol_fd, residual_for)?;
    let final_res = residual_for(sign);
    report.push(
        IdentityResidual::new(
            "twist_total_coboundary",
            "cocycle(s_nt phi) - cocycle(s_nt) = ± D[(-1/2 pi i) psi^{-1} d psi]",
            probe_cfg.samples,
            final_res,
            cfg.tol_fd,
        )
        .with_signs(&[&frozen]),
    );
    report.push_sign(frozen);
    Ok(report)
}

/// Worst residual of `delta + sign·d_lambda` over all slots.
fn coboundary_residual(
    delta: &[CochainLayer],
    d_lambda: &TotalCochain,
    sign: f64,
    cfg: &ProbeCfg,
) -> f64 {
    let mut slots: Vec<CochainLayer> = Vec::new();
    let mut add = |layer: CochainLayer| {
        if let Some(existing) = slots
            .iter_mut()
            .find(|l| (l.p, l.q, l.r) == (layer.p, layer.q, layer.r))
        {
            existing.form = existing.form.add(&layer.form).unwrap();
            existing.fd |= layer.fd;
        } else {
            slots.push(layer);
        }
    };
    for l in delta {
        add(l.clone());
    }
    for l in &d_lambda.layers {
        let mut scaled = l.clone();
        scaled.form = scaled.form.scale(Complex64::new(sign, 0.0));
        add(scaled);
    }
    slots
        .iter()
        .enumerate()
        .map(|(i, l)| crate::nerve::probe_form_max(&l.form, cfg, 0xC000 + ((i as u64) << 24)))
        .fold(0.0, residual_max)
}

/// Connection-change suite (θ′ = θ + π*α): the cocycle difference is the
/// total differential of the (1,1) layer `(−1/2πi)α`, up to a frozen sign,
/// and doubling the simplicial difference layer is a failing control.
pub fn connection_independence_check(
    flat: &CentralExtension,
    twisted: &CentralExtension,
    alpha: &Form,
    scheme: FdScheme,
    cfg: &ProbeCfg,
) -> Result<ResidualReport, ExtensionError> {
    let mut report = ResidualReport::default();
    let base = &flat.base;
    let curv_diff = curvature_on_base(twisted, scheme)
        .add(&curvature_on_base(flat, scheme).neg())
        .unwrap();
    let s_diff = nat_section_delta_pullback(twisted)
        .add(&nat_section_delta_pullback(flat).neg())
        .unwrap()
        .scale(-inv_2pii());
    let delta = vec![
        CochainLayer::new(1, 0, 2, curv_diff).fd_tainted(),
        CochainLayer::new(2, 0, 1, s_diff.clone()),
    ];
    let nerve = Nerve::simplicial(base.clone());
    let m_layer = CochainLayer::new(1, 0, 1, alpha.scale(inv_2pii()));
    let dm = d_total(&nerve, &TotalCochain::new(vec![m_layer]).unwrap(), scheme);
    let probe_cfg = ProbeCfg {
        samples: cfg.samples.min(40),
        ..*cfg
    };
    let residual_for = |sign: f64| coboundary_residual(&delta, &dm, sign, &probe_cfg);
    let (sign, frozen) = probe_sign("connection_coboundary_sign", cfg.tol_fd, residual_for)?;
    let final_res = residual_for(sign);
    report.push(
        IdentityResidual::new(
            "connection_change_coboundary",
            "cocycle(theta + pi* alpha) - cocycle(theta) = ± D[(-1/2 pi i) alpha]",
            probe_cfg.samples,
            final_res,
            cfg.tol_fd,
        )
        .with_signs(&[&frozen]),
    );

    // negative control: double the simplicial difference layer
    let doubled = vec![
        delta[0].clone(),
        CochainLayer::new(2, 0, 1, s_diff.scale(Complex64::new(2.0, 0.0))),
    ];
    let control = coboundary_residual(&doubled, &dm, sign, &probe_cfg);
    let gap = 100.0 * cfg.tol_fd / control.max(f64::MIN_POSITIVE);
    report.push(
        IdentityResidual::new(
            "connection_change_negative_control",
            "doubling the delta-alpha layer must break the coboundary identity (gap = 100·tol/residual)",
            probe_cfg.samples,
            gap,
            1.0,
        )
        .with_signs(&[&frozen]),
    );
    report.push_sign(frozen);
    Ok(report)
}

/// An extension together with compatible circle actions on base and total.
#[derive(Clone)]
pub struct EquivariantExtension {
    pub ext: CentralExtension,
    pub base_action: CircleAction,
    pub total_action: CircleAction,
}

/// The U(2) → PU(2) model with the adjoint action of the embedded circle.
pub fn build_equivariant_u2_over_pu2(
    twist: Option<Form>,
) -> Result<EquivariantExtension, ExtensionError> {
    Ok(EquivariantExtension {
        ext: build_u2_over_pu2(twist)?,
        base_action: adjoint_circle_action(),
        total_action: adjoint_circle_action(),
    })
}

/// Conjugation direction of the section slot of τ; the face convention is
/// fixed by the nerve (`z γ z⁻¹`), the section's is probed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConjOrientation {
    /// section slot `ẑ γ̂ ẑ⁻¹`
    Forward,
    /// section slot `ẑ⁻¹ γ̂ ẑ`
    Reverse,
}

/// τ = (−1/2πi)·s_⋊*(δ_⋊θ) on G⋊S¹:
/// `τ((g,z);(v,w)) = (−1/2πi)[ −θ_γ̂(v̂) + θ_{conj γ̂}(conj-push of (v̂,w)) ]`.
pub fn tau_form(eqext: &EquivariantExtension, orientation: ConjOrientation) -> Form {
    let ext = eqext.ext.clone();
    let action = eqext.total_action.clone();
    let domain = ext.base.concat(&GroupSpec::single(Factor::U1));
    let b = ext.base.len();
    Form::new(domain, 1, move |p, xs| {
        let g = GroupPoint::new(ext.base.clone(), p.mats[..b].to_vec());
        let z = p.mats[b].get(0, 0);
        let v = Tangent {
            mats: xs[0].mats[..b].to_vec(),
        };
        let w = xs[0].mats[b].get(0, 0);
        let rate = (w / z).im;
        let l = (ext.lift)(&g);
        let vh = (ext.lift_tangent)(&g, &l, &v);
        let slot0 = (ext.theta)(&l, &vh);
        let (zc, rc) = match orientation {
            ConjOrientation::Forward => (z, rate),
            ConjOrientation::Reverse => (z.conj(), -rate),
        };
        let lc = (action.act)(zc, &l);
        let vc = (action.push)(zc, &l, rc, &vh);
        let slot1 = (ext.theta)(&lc, &vc);
        inv_2pii() * (-slot0 + slot1)
    })
}

/// Slot labels for the triple-complex cocycle built around τ.
pub fn tau_chain_labels(p: usize, q: usize, r: usize) -> Option<(String, String)> {
    match (p, q, r) {
        (1, 0, 3) => Some(("curvature_closed".into(), "d c1(theta) = 0 on G".into())),
        (2, 0, 2) => Some((
            "curvature_coboundary".into(),
            "(e0* - e1* + e2*) c1(theta) = (-1/2 pi i) d(s_nt*(delta theta))".into(),
        )),
        (3, 0, 1) => Some((
            "section_simplicial_cocycle".into(),
            "(e0* - e1* + e2* - e3*)(s_nt*(delta theta)) = 0".into(),
        )),
        (1, 1, 2) => Some((
            "tau_condition_i".into(),
            "d tau = (-e0^v* + e1^v*) c1(theta) on G x S1".into(),
        )),
        (2, 1, 1) => Some((
            "tau_condition_ii".into(),
            "(e0* - e1* + e2*) tau = ± (e0^v* - e1^v*)(-1/2 pi i) s_nt*(delta theta) on G^2 x S1"
                .into(),
        )),
        (1, 2, 1) => Some((
            "tau_condition_iii".into(),
            "(-e0^v* + e1^v* - e2^v*) tau = 0 on G x S1 x S1".into(),
        )),
        _ => None,
    }
}

/// The triple-complex total cochain around τ: layers (1,0,2) = c₁(θ),
/// (2,0,1) = −(−1/2πi)ŝ_nt*(δθ), (1,1,1) = sign·τ.
pub fn tau_chain(
    eqext: &EquivariantExtension,
    orientation: ConjOrientation,
    sign: f64,
    scheme: FdScheme,
) -> TotalCochain {
    let curv = CochainLayer::new(1, 0, 2, curvature_on_base(&eqext.ext, scheme)).fd_tainted();
    let s_layer = CochainLayer::new(
        2,
        0,
        1,
        nat_section_delta_pullback(&eqext.ext).scale(-inv_2pii()),
    );
    let tau = CochainLayer::new(
        1,
        1,
        1,
        tau_form(eqext, orientation).scale(Complex64::new(sign, 0.0)),
    );
    TotalCochain::new(vec![curv, s_layer, tau]).unwrap()
}

/// Probe the section orientation and the τ-layer sign against the three
/// τ-involving slots. Needs a model with nonvanishing curvature to
/// discriminate — the flat connection makes τ vanish identically and every
/// candidate passes.
pub fn probe_tau_orientation(
    eqext: &EquivariantExtension,
    scheme: FdScheme,
    cfg: &ProbeCfg,
) -> Result<(ConjOrientation, f64, FrozenSign), ExtensionError> {
    let nerve = Nerve::bisimplicial(eqext.ext.base.clone(), eqext.base_action.clone());
    let probe_cfg = ProbeCfg {
        samples: cfg.samples.min(12),
        ..*cfg
    };
    let tau_slots_residual = |orientation: ConjOrientation, sign: f64| -> f64 {
        let d = d_total(&nerve, &tau_chain(eqext, orientation, sign, scheme), scheme);
        d.layers
            .iter()
            .filter(|l| l.q > 0)
            .enumerate()
            .map(|(i, l)| {
                crate::nerve::probe_form_max(&l.form, &probe_cfg, 0xD000 + ((i as u64) << 24))
            })
            .fold(0.0, residual_max)
    };
    let variants = [
        (ConjOrientation::Forward, 1.0, "forward,+1"),
        (ConjOrientation::Forward, -1.0, "forward,-1"),
        (ConjOrientation::Reverse, 1.0, "reverse,+1"),
        (ConjOrientation::Reverse, -1.0, "reverse,-1"),
    ];
    let candidates = variants
        .iter()
        .map(|(o, s, label)| (label.to_string(), tau_slots_residual(*o, *s)))
        .collect();
    let (idx, frozen) = probe_choice("tau_orientation", cfg.tol_fd, candidates)?;
    Ok((variants[idx].0, variants[idx].1, frozen))
}

/// Run the full six-slot triple-complex cocycle check around τ with the
/// given frozen orientation (or probe it here when `frozen` is None).
pub fn equivariant_tau_check(
    eqext: &EquivariantExtension,
    scheme: FdScheme,
    cfg: &ProbeCfg,
    frozen: Option<(ConjOrientation, f64)>,
) -> Result<(ResidualReport, Form), ExtensionError> {
    let nerve = Nerve::bisimplicial(eqext.ext.base.clone(), eqext.base_action.clone());
    let (orientation, sign, frozen_sign) = match frozen {
        Some((o, s)) => (o, s, None),
        None => {
            let (o, s, f) = probe_tau_orientation(eqext, scheme, cfg)?;
            (o, s, Some(f))
        }
    };
    let chain = tau_chain(eqext, orientation, sign, scheme);
    let mut report = check_zero(&d_total(&nerve, &chain, scheme), cfg, tau_chain_labels);
    if let Some(f) = frozen_sign {
        for entry in &mut report.entries {
            entry.signs_used.push(f.name.clone());
        }
        report.push_sign(f);
    }
    Ok((report, tau_form(eqext, orientation)))
}

/// The Behrend–Xu 1-form `(ε̂₀* − ε̂₁* + ε̂₂*)θ` on Ĝ×Ĝ, by exact face
/// pullbacks upstairs.
pub fn behrend_xu_direct(ext: &CentralExtension) -> Form {
    let nerve = Nerve::simplicial(ext.total.clone());
    let layer = CochainLayer::new(1, 0, 1, ext.theta_form());
    crate::nerve::d_horizontal(&nerve, &layer).form
}

/// The comparison suite: `(π×π)* ŝ_nt*(δθ)` equals the direct alternating
/// pullback of θ; the direct form is horizontal and center-invariant.
pub fn behrend_xu_check(ext: &CentralExtension, cfg: &ProbeCfg) -> ResidualReport {
    let mut report = ResidualReport::default();
    let direct = behrend_xu_direct(ext);
    let chi = nat_section_delta_pullback(ext);
    let total2 = ext.total.concat(&ext.total);
    let b = ext.total.len();
    let proj_apply = ext.project.apply.clone();
    let proj_push = ext.project.push.clone();
    let base = ext.base.clone();
    let pi_x_pi = SmoothMap::new(
        total2.clone(),
        ext.base.concat(&ext.base),
        move |p: &GroupPoint| {
            let h1 = GroupPoint::new(GroupSpec { factors: p.spec.factors[..b].to_vec() }, p.mats[..b].to_vec());
            let h2 = GroupPoint::new(GroupSpec { factors: p.spec.factors[b..].to_vec() }, p.mats[b..].to_vec());
            let d1 = proj_apply(&h1);
            let d2 = proj_apply(&h2);
            let mut mats = d1.mats;
            mats.extend(d2.mats);
            GroupPoint::new(base.concat(&base), mats)
        },
        {
            let spec_total = ext.total.clone();
            move |p: &GroupPoint, x: &Tangent| {
                let h1 = GroupPoint::new(spec_total.clone(), p.mats[..b].to_vec());
                let h2 = GroupPoint::new(spec_total.clone(), p.mats[b..].to_vec());
                let x1 = Tangent { mats: x.mats[..b].to_vec() };
                let x2 = Tangent { mats: x.mats[b..].to_vec() };
                let mut mats = proj_push(&h1, &x1).mats;
                mats.extend(proj_push(&h2, &x2).mats);
                Tangent { mats }
            }
        },
    );
    let pulled = pullback(&pi_x_pi, &chi).expect("domains match");
    let diff = direct.add(&pulled.neg()).unwrap();
    let equality_max = crate::nerve::probe_form_max(&diff, cfg, 0xE000);
    report.push(IdentityResidual::new(
        "behrend_xu_equality",
        "(pi x pi)* s_nt*(delta theta) = (e0^* - e1^* + e2^*) theta on Ghat^2",
        cfg.samples,
        equality_max,
        1e-9,
    ));

    // horizontality: vertical insertions do not move the direct form
    let vertical = ext.vertical_tangent.clone();
    let horiz_max = (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0xE100 + k as u64);
            let p = sample_point(&total2, &mut rng);
            let x = sample_tangent(&p, &mut rng);
            use rand::Rng;
            let h1 = GroupPoint::new(ext.total.clone(), p.mats[..b].to_vec());
            let h2 = GroupPoint::new(ext.total.clone(), p.mats[b..].to_vec());
            let r1 = rng.gen::<f64>() * 2.0 - 1.0;
            let r2 = rng.gen::<f64>() * 2.0 - 1.0;
            let mut vert_mats = vertical(&h1, r1).mats;
            vert_mats.extend(vertical(&h2, r2).mats);
            let shifted = x.add(&Tangent { mats: vert_mats });
            (direct.eval(&p, &[shifted]) - direct.eval(&p, &[x])).norm()
        })
        .reduce(|| 0.0, residual_max);
    report.push(IdentityResidual::new(
        "behrend_xu_horizontality",
        "vertical insertions leave (e0^* - e1^* + e2^*) theta unchanged",
        cfg.samples,
        horiz_max,
        1e-9,
    ));

    // (U(1)×U(1))-invariance: central shifts of both points
    let center_mul = ext.center_mul.clone();
    let center_shift = ext.center_shift_tangent.clone();
    let invariance_max = (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0xE200 + k as u64);
            let p = sample_point(&total2, &mut rng);
            let x = sample_tangent(&p, &mut rng);
            use rand::Rng;
            let u1 = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
            let u2 = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
            let h1 = GroupPoint::new(ext.total.clone(), p.mats[..b].to_vec());
            let h2 = GroupPoint::new(ext.total.clone(), p.mats[b..].to_vec());
            let x1 = Tangent { mats: x.mats[..b].to_vec() };
            let x2 = Tangent { mats: x.mats[b..].to_vec() };
            let mut mats = (center_mul)(&h1, u1).mats;
            mats.extend((center_mul)(&h2, u2).mats);
            let shifted_p = GroupPoint::new(total2.clone(), mats);
            let mut tmats = (center_shift)(&x1, u1).mats;
            tmats.extend((center_shift)(&x2, u2).mats);
            let shifted_x = Tangent { mats: tmats };
            (direct.eval(&shifted_p, &[shifted_x]) - direct.eval(&p, &[x])).norm()
        })
        .reduce(|| 0.0, residual_max);
    report.push(IdentityResidual::new(
        "behrend_xu_center_invariance",
        "central shifts of both arguments leave the direct 1-form unchanged",
        cfg.samples,
        invariance_max,
        1e-12,
    ));
    report
}
