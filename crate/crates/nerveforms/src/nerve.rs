//! Simplicial and bisimplicial nerve combinatorics.
//!
//! For a group G the nerve level p is the product G^p with face maps
//!
//!   ε_i(g₁,…,g_p) = (g₂,…) | (g₁,…,g_i g_{i+1},…) | (g₁,…,g_{p−1})
//!
//! carrying exact differentials (deletion projects tangents, multiplication
//! uses the product rule). A bisimplicial nerve adds circle levels with
//! vertical faces; the i = q face conjugates every group entry through a
//! [`CircleAction`] and drops the last circle.
//!
//! Cochains are families of form layers indexed by (p [, q], r) of constant
//! total degree. The differentials are
//!
//!   d′  = Σ (−1)^i ε_i*                       (group direction)
//!   d″  = Σ (−1)^i (ε_i^{S¹})* × (−1)^p       (circle direction)
//!   d‴  = (−1)^{p(+q)} × exterior derivative
//!
//! and `check_cocycle` evaluates the total differential slot by slot at
//! seeded random probes, reporting the worst residual per target slot.

use crate::forms::{exterior_derivative, pullback, Form, FdScheme, SmoothMap};
use crate::groups::{
    probe_rng, sample_point, sample_tangent, CircleAction, Factor, GroupPoint, GroupSpec, Tangent,
};
use crate::residual::{residual_max, IdentityResidual, ResidualReport};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NerveError {
    #[error("face index {index} out of range at level {level}")]
    IndexOutOfRange { index: usize, level: usize },
    #[error("cochain layers have inconsistent degrees")]
    InconsistentDegrees,
    #[error("duplicate cochain layer at (p={0}, q={1}, r={2})")]
    DuplicateLayer(usize, usize, usize),
    #[error("operation requires a circle action")]
    MissingAction,
}

/// A nerve: levels are powers of `base`, optionally crossed with circle
/// levels acted on through `action`.
#[derive(Clone)]
pub struct Nerve {
    pub base: GroupSpec,
    pub action: Option<CircleAction>,
}

impl Nerve {
    pub fn simplicial(base: GroupSpec) -> Self {
        Nerve { base, action: None }
    }

    pub fn bisimplicial(base: GroupSpec, action: CircleAction) -> Self {
        Nerve {
            base,
            action: Some(action),
        }
    }

    /// The underlying group of level (p, q): base^p × (S¹)^q.
    pub fn space(&self, p: usize, q: usize) -> GroupSpec {
        let mut factors = Vec::with_capacity(p * self.base.len() + q);
        for _ in 0..p {
            factors.extend_from_slice(&self.base.factors);
        }
        factors.extend(std::iter::repeat(Factor::U1).take(q));
        GroupSpec { factors }
    }

    fn block(&self) -> usize {
        self.base.len()
    }

    /// Horizontal face ε_i : level (p, q) → level (p−1, q), exact differential.
    pub fn horizontal_face(&self, p: usize, q: usize, i: usize) -> Result<SmoothMap, NerveError> {
        if p == 0 || i > p {
            return Err(NerveError::IndexOutOfRange { index: i, level: p });
        }
        let b = self.block();
        let source = self.space(p, q);
        let target = self.space(p - 1, q);
        let apply_spec = target.clone();
        let apply = move |pt: &GroupPoint| {
            let mut mats = Vec::with_capacity(apply_spec.len());
            if i == 0 {
                mats.extend_from_slice(&pt.mats[b..]);
            } else if i == p {
                mats.extend_from_slice(&pt.mats[..(p - 1) * b]);
                mats.extend_from_slice(&pt.mats[p * b..]);
            } else {
                mats.extend_from_slice(&pt.mats[..(i - 1) * b]);
                for k in 0..b {
                    mats.push(pt.mats[(i - 1) * b + k] * pt.mats[i * b + k]);
                }
                mats.extend_from_slice(&pt.mats[(i + 1) * b..]);
            }
            GroupPoint::new(apply_spec.clone(), mats)
        };
        let push = move |pt: &GroupPoint, x: &Tangent| {
            let mut mats = Vec::new();
            if i == 0 {
                mats.extend_from_slice(&x.mats[b..]);
            } else if i == p {
                mats.extend_from_slice(&x.mats[..(p - 1) * b]);
                mats.extend_from_slice(&x.mats[p * b..]);
            } else {
                mats.extend_from_slice(&x.mats[..(i - 1) * b]);
                for k in 0..b {
                    // d(g_i g_{i+1}) = X_i g_{i+1} + g_i X_{i+1}
                    mats.push(
                        x.mats[(i - 1) * b + k] * pt.mats[i * b + k]
                            + pt.mats[(i - 1) * b + k] * x.mats[i * b + k],
                    );
                }
                mats.extend_from_slice(&x.mats[(i + 1) * b..]);
            }
            Tangent { mats }
        };
        Ok(SmoothMap::new(source, target, apply, push))
    }

    /// Vertical face ε_i^{S¹} : level (p, q) → level (p, q−1). The i = q
    /// face conjugates the group part through the circle action and drops
    /// the last circle entry.
    pub fn vertical_face(&self, p: usize, q: usize, i: usize) -> Result<SmoothMap, NerveError> {
        let action = self.action.clone().ok_or(NerveError::MissingAction)?;
        if q == 0 || i > q {
            return Err(NerveError::IndexOutOfRange { index: i, level: q });
        }
        let b = self.block() * p;
        let source = self.space(p, q);
        let target = self.space(p, q - 1);
        let group_spec = self.space(p, 0);
        let act = action.act.clone();
        let push_action = action.push.clone();
        let apply_spec = target.clone();
        let gs_apply = group_spec.clone();
        let apply = move |pt: &GroupPoint| {
            let mut mats = Vec::with_capacity(apply_spec.len());
            if i == q {
                let z = pt.mats[b + q - 1].get(0, 0);
                let gpart = GroupPoint::new(gs_apply.clone(), pt.mats[..b].to_vec());
                mats.extend_from_slice(&act(z, &gpart).mats);
                mats.extend_from_slice(&pt.mats[b..b + q - 1]);
            } else if i == 0 {
                mats.extend_from_slice(&pt.mats[..b]);
                mats.extend_from_slice(&pt.mats[b + 1..]);
            } else {
                mats.extend_from_slice(&pt.mats[..b + i - 1]);
                mats.push(pt.mats[b + i - 1] * pt.mats[b + i]);
                mats.extend_from_slice(&pt.mats[b + i + 1..]);
            }
            GroupPoint::new(apply_spec.clone(), mats)
        };
        let gs_push = group_spec;
        let push = move |pt: &GroupPoint, x: &Tangent| {
            let mut mats = Vec::new();
            if i == q {
                let z = pt.mats[b + q - 1].get(0, 0);
                let w = x.mats[b + q - 1].get(0, 0);
                // circle tangent w = z·(it) has rate t
                let rate = (w / z).im;
                let gpart = GroupPoint::new(gs_push.clone(), pt.mats[..b].to_vec());
                let xpart = Tangent {
                    mats: x.mats[..b].to_vec(),
                };
                mats.extend_from_slice(&push_action(z, &gpart, rate, &xpart).mats);
                mats.extend_from_slice(&x.mats[b..b + q - 1]);
            } else if i == 0 {
                mats.extend_from_slice(&x.mats[..b]);
                mats.extend_from_slice(&x.mats[b + 1..]);
            } else {
                mats.extend_from_slice(&x.mats[..b + i - 1]);
                mats.push(x.mats[b + i - 1] * pt.mats[b + i] + pt.mats[b + i - 1] * x.mats[b + i]);
                mats.extend_from_slice(&x.mats[b + i + 1..]);
            }
            Tangent { mats }
        };
        Ok(SmoothMap::new(source, target, apply, push))
    }
}

/// One form layer of a total cochain.
#[derive(Clone)]
pub struct CochainLayer {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub form: Form,
    /// Whether evaluating this layer involves finite differences anywhere.
    pub fd: bool,
}

impl CochainLayer {
    pub fn new(p: usize, q: usize, r: usize, form: Form) -> Self {
        CochainLayer {
            p,
            q,
            r,
            form,
            fd: false,
        }
    }

    pub fn fd_tainted(mut self) -> Self {
        self.fd = true;
        self
    }

    pub fn total_degree(&self) -> usize {
        self.p + self.q + self.r
    }
}

/// A finite family of layers of constant total degree, at most one per slot.
#[derive(Clone)]
pub struct TotalCochain {
    pub layers: Vec<CochainLayer>,
}

impl TotalCochain {
    pub fn new(layers: Vec<CochainLayer>) -> Result<Self, NerveError> {
        if let Some(first) = layers.first() {
            let n = first.total_degree();
            if layers.iter().any(|l| l.total_degree() != n) {
                return Err(NerveError::InconsistentDegrees);
            }
        }
        for (a, la) in layers.iter().enumerate() {
            for lb in layers.iter().skip(a + 1) {
                if (la.p, la.q, la.r) == (lb.p, lb.q, lb.r) {
                    return Err(NerveError::DuplicateLayer(la.p, la.q, la.r));
                }
            }
        }
        Ok(TotalCochain { layers })
    }
}

/// d′: alternating sum of exact pullbacks along the (p+1)-level faces.
pub fn d_horizontal(nerve: &Nerve, layer: &CochainLayer) -> CochainLayer {
    let mut terms = Vec::new();
    for i in 0..=layer.p + 1 {
        let face = nerve
            .horizontal_face(layer.p + 1, layer.q, i)
            .expect("face index in range");
        let pulled = pullback(&face, &layer.form).expect("matching domains");
        terms.push(if i % 2 == 0 { pulled } else { pulled.neg() });
    }
    CochainLayer {
        p: layer.p + 1,
        q: layer.q,
        r: layer.r,
        form: Form::sum(terms),
        fd: layer.fd,
    }
}

/// d″ (circle direction): alternating vertical-face pullbacks times (−1)^p.
pub fn d_circle(nerve: &Nerve, layer: &CochainLayer) -> CochainLayer {
    let mut terms = Vec::new();
    for i in 0..=layer.q + 1 {
        let face = nerve
            .vertical_face(layer.p, layer.q + 1, i)
            .expect("vertical face of a bisimplicial nerve");
        let pulled = pullback(&face, &layer.form).expect("matching domains");
        let s = (i + layer.p) % 2 == 0;
        terms.push(if s { pulled } else { pulled.neg() });
    }
    CochainLayer {
        p: layer.p,
        q: layer.q + 1,
        r: layer.r,
        form: Form::sum(terms),
        fd: layer.fd,
    }
}

/// The de Rham direction: (−1)^p (simplicial) or (−1)^{p+q} (bisimplicial)
/// times the exterior derivative. Layers whose evaluation already involves
/// finite differences get the Richardson stencil on the outer derivative,
/// which keeps nested-difference truncation within the FD tolerance.
pub fn d_derham(nerve: &Nerve, layer: &CochainLayer, scheme: FdScheme) -> CochainLayer {
    let parity = if nerve.action.is_some() {
        layer.p + layer.q
    } else {
        layer.p
    };
    let outer = if layer.fd {
        FdScheme {
            richardson: true,
            ..scheme
        }
    } else {
        scheme
    };
    let d = exterior_derivative(&layer.form, outer);
    let form = if parity % 2 == 0 { d } else { d.neg() };
    CochainLayer {
        p: layer.p,
        q: layer.q,
        r: layer.r + 1,
        form,
        fd: true,
    }
}

/// The full differential of a cochain: every layer's d′ (+ d″) + d‴
/// contributions, merged per target slot.
pub fn d_total(nerve: &Nerve, chain: &TotalCochain, scheme: FdScheme) -> TotalCochain {
    let mut out: Vec<CochainLayer> = Vec::new();
    let mut add = |layer: CochainLayer| {
        if let Some(existing) = out
            .iter_mut()
            .find(|l| (l.p, l.q, l.r) == (layer.p, layer.q, layer.r))
        {
            existing.form = existing.form.add(&layer.form).expect("slot domains agree");
            existing.fd |= layer.fd;
        } else {
            out.push(layer);
        }
    };
    for layer in &chain.layers {
        add(d_horizontal(nerve, layer));
        if nerve.action.is_some() {
            add(d_circle(nerve, layer));
        }
        add(d_derham(nerve, layer, scheme));
    }
    out.sort_by_key(|l| (l.p, l.q, l.r));
    TotalCochain { layers: out }
}

/// Probe configuration shared by the residual checkers.
#[derive(Clone, Copy, Debug)]
pub struct ProbeCfg {
    pub seed: u64,
    pub samples: usize,
    pub tol_algebraic: f64,
    pub tol_fd: f64,
}

impl Default for ProbeCfg {
    fn default() -> Self {
        ProbeCfg {
            seed: 20240801,
            samples: 200,
            tol_algebraic: 1e-10,
            tol_fd: 1e-6,
        }
    }
}

/// Worst |value| of a form over seeded probes (point plus `degree` Gaussian
/// tangents per probe, split RNG streams so order does not matter).
pub fn probe_form_max(form: &Form, cfg: &ProbeCfg, stream_base: u64) -> f64 {
    (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, stream_base.wrapping_add(k as u64));
            let p = sample_point(&form.domain, &mut rng);
            let xs: Vec<Tangent> = (0..form.degree)
                .map(|_| sample_tangent(&p, &mut rng))
                .collect();
            form.eval(&p, &xs).norm()
        })
        .reduce(|| 0.0, residual_max)
}

/// Check that every layer of `chain` vanishes at random probes. One report
/// row per slot; tolerance is the FD tolerance when the layer's evaluation
/// involves finite differences and the algebraic tolerance otherwise.
pub fn check_zero(
    chain: &TotalCochain,
    cfg: &ProbeCfg,
    label: impl Fn(usize, usize, usize) -> Option<(String, String)>,
) -> ResidualReport {
    let mut report = ResidualReport::default();
    for (idx, layer) in chain.layers.iter().enumerate() {
        let (name, anchor) = label(layer.p, layer.q, layer.r).unwrap_or_else(|| {
            (
                format!("slot_p{}q{}r{}", layer.p, layer.q, layer.r),
                format!(
                    "total differential vanishes at (p,q,r) = ({},{},{})",
                    layer.p, layer.q, layer.r
                ),
            )
        });
        let tol = if layer.fd { cfg.tol_fd } else { cfg.tol_algebraic };
        let max = probe_form_max(&layer.form, cfg, (idx as u64) << 32);
        report.push(IdentityResidual::new(name, anchor, cfg.samples, max, tol));
    }
    report
}

/// Evaluate the total differential of `chain` and check it vanishes slot by
/// slot.
pub fn check_cocycle(
    nerve: &Nerve,
    chain: &TotalCochain,
    scheme: FdScheme,
    cfg: &ProbeCfg,
    label: impl Fn(usize, usize, usize) -> Option<(String, String)>,
) -> ResidualReport {
    check_zero(&d_total(nerve, chain, scheme), cfg, label)
}

/// A smooth scalar function safe on every factor kind (PU(2) factors only
/// enter through conjugation words, so representative flips cancel).
pub fn random_scalar_function(spec: &GroupSpec, rng: &mut impl Rng) -> Form {
    let coeffs: Vec<(Complex64, crate::cmat::CMat, crate::cmat::CMat)> = spec
        .factors
        .iter()
        .map(|f| {
            let dim = f.matrix_dim();
            let c = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.6;
            let p = random_fixed_matrix(dim, rng);
            let q = random_fixed_matrix(dim, rng);
            (c, p, q)
        })
        .collect();
    Form::scalar(spec.clone(), move |pt| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (c, p, q)) in coeffs.iter().enumerate() {
            let g = pt.mats[i];
            let word = match g.dim() {
                1 => g.get(0, 0),
                _ => (*p * g * *q * g.inverse()).trace(),
            };
            acc += *c * word;
        }
        acc
    })
}

fn random_fixed_matrix(dim: usize, rng: &mut impl Rng) -> crate::cmat::CMat {
    let mut entries = [Complex64::new(0.0, 0.0); 4];
    for e in entries.iter_mut().take(dim * dim) {
        *e = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    }
    match dim {
        1 => crate::cmat::CMat::new1(entries[0]),
        _ => crate::cmat::CMat::new2(entries[0], entries[1], entries[2], entries[3]),
    }
}

/// A smooth algebraic 1-form: per factor `c·tr(P·(g⁻¹X)·W(g))` with
/// `W(g) = QgQg⁻¹` an even word (so PU(2) representative flips cancel);
/// circle factors contribute `c·z⁻¹w`. No finite differences anywhere.
pub fn random_one_form(spec: &GroupSpec, rng: &mut impl Rng) -> Form {
    let coeffs: Vec<(Complex64, crate::cmat::CMat, crate::cmat::CMat)> = spec
        .factors
        .iter()
        .map(|f| {
            let dim = f.matrix_dim();
            let c = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.6;
            let p = random_fixed_matrix(dim, rng);
            let q = random_fixed_matrix(dim, rng);
            (c, p, q)
        })
        .collect();
    Form::new(spec.clone(), 1, move |pt, xs| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (c, p, q)) in coeffs.iter().enumerate() {
            let g = pt.mats[i];
            let a = g.inverse() * xs[0].mats[i];
            let word = match g.dim() {
                1 => a.get(0, 0),
                _ => (*p * a * (*q * g * *q * g.inverse())).trace(),
            };
            acc += *c * word;
        }
        acc
    })
}

/// A generic smooth degree-r form `f₀ · β₁ ∧ … ∧ β_r` built from algebraic
/// pieces only, so nested exterior derivatives of it stay one FD level
/// deep. Not closed for r ≥ 1 in general.
pub fn random_form(spec: &GroupSpec, degree: usize, rng: &mut impl Rng, _scheme: FdScheme) -> Form {
    let f0 = random_scalar_function(spec, rng);
    let mut acc = f0;
    for _ in 0..degree {
        let beta = random_one_form(spec, rng);
        acc = crate::forms::wedge(&acc, &beta).expect("same domain");
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmat::CMat;
    use crate::forms::{chern_c22, trace_cubed_form, ChernVariant};
    use crate::groups::{adjoint_circle_action, point_dist};

    fn tangent_dist(a: &Tangent, b: &Tangent) -> f64 {
        a.mats
            .iter()
            .zip(&b.mats)
            .map(|(x, y)| x.dist(y))
            .fold(0.0, f64::max)
    }

    #[test]
    fn multiplication_face_at_identity() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let face = nerve.horizontal_face(2, 0, 1).unwrap();
        let space = nerve.space(2, 0);
        let id = space.identity();
        let mut rng = probe_rng(30, 0);
        let x = sample_tangent(&id, &mut rng);
        let pushed = (face.push)(&id, &x);
        // at (I, I): push (X₁, X₂) = X₁ + X₂
        assert!(pushed.mats[0].dist(&(x.mats[0] + x.mats[1])) < 1e-15);
    }

    #[test]
    fn simplicial_identities_hold_exactly() {
        // ε_i ∘ ε_j = ε_{j−1} ∘ ε_i for i < j (apply ε_j at the deeper level
        // first), on points and pushforwards.
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        for p in 2..=3usize {
            for j in 0..=p {
                for i in 0..j {
                    let first = nerve.horizontal_face(p, 0, j).unwrap();
                    let lhs = first.then(&nerve.horizontal_face(p - 1, 0, i).unwrap()).unwrap();
                    let second = nerve.horizontal_face(p, 0, i).unwrap();
                    let rhs = second
                        .then(&nerve.horizontal_face(p - 1, 0, j - 1).unwrap())
                        .unwrap();
                    let space = nerve.space(p, 0);
                    for k in 0..100 {
                        let mut rng = probe_rng(31, (p * 100 + j * 10 + i) as u64 * 1000 + k);
                        let pt = sample_point(&space, &mut rng);
                        let x = sample_tangent(&pt, &mut rng);
                        assert!(point_dist(&(lhs.apply)(&pt), &(rhs.apply)(&pt)) < 1e-12);
                        assert!(tangent_dist(&(lhs.push)(&pt, &x), &(rhs.push)(&pt, &x)) < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn d_horizontal_of_constant_zero_form() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let c = Complex64::new(0.7, -0.2);
        let layer = CochainLayer::new(1, 0, 0, Form::scalar(nerve.space(1, 0), move |_| c));
        let d = d_horizontal(&nerve, &layer);
        let pt = nerve.space(2, 0).identity();
        // c − c + c = c
        assert!((d.form.eval(&pt, &[]) - c).norm() < 1e-15);
    }

    #[test]
    fn d_horizontal_squares_to_zero() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let mut rng = probe_rng(32, 0);
        let f = random_scalar_function(&nerve.space(1, 0), &mut rng);
        let layer = CochainLayer::new(1, 0, 0, f);
        let dd = d_horizontal(&nerve, &d_horizontal(&nerve, &layer));
        let cfg = ProbeCfg {
            samples: 100,
            ..Default::default()
        };
        let max = probe_form_max(&dd.form, &cfg, 0);
        assert!(max < 1e-12, "d'd' residual {max}");
    }

    #[test]
    fn d_horizontal_kills_c22() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let layer = CochainLayer::new(2, 0, 2, chern_c22(ChernVariant::Su2));
        let d = d_horizontal(&nerve, &layer);
        let cfg = ProbeCfg {
            samples: 200,
            ..Default::default()
        };
        let max = probe_form_max(&d.form, &cfg, 0);
        assert!(max < 1e-10, "d'C22 residual {max}");
    }

    #[test]
    fn derham_sign_follows_level_parity() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let mut rng = probe_rng(33, 0);
        let f1 = random_scalar_function(&nerve.space(1, 0), &mut rng);
        let f2 = random_scalar_function(&nerve.space(2, 0), &mut rng);
        let scheme = FdScheme::default();
        let cfg = ProbeCfg {
            samples: 20,
            ..Default::default()
        };
        // p odd: d″ = −d; p even: d″ = +d
        let l1 = CochainLayer::new(1, 0, 0, f1.clone());
        let diff1 = d_derham(&nerve, &l1, scheme)
            .form
            .add(&exterior_derivative(&f1, scheme))
            .unwrap();
        assert!(probe_form_max(&diff1, &cfg, 0) < 1e-12);
        let l2 = CochainLayer::new(2, 0, 0, f2.clone());
        let diff2 = d_derham(&nerve, &l2, scheme)
            .form
            .add(&exterior_derivative(&f2, scheme).neg())
            .unwrap();
        assert!(probe_form_max(&diff2, &cfg, 0) < 1e-12);
    }

    #[test]
    fn su2_cocycle_identities() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let chain = TotalCochain::new(vec![
            CochainLayer::new(1, 0, 3, trace_cubed_form(Factor::SU2, None)),
            CochainLayer::new(2, 0, 2, chern_c22(ChernVariant::Su2)),
        ])
        .unwrap();
        let cfg = ProbeCfg {
            samples: 60,
            ..Default::default()
        };
        let report = check_cocycle(&nerve, &chain, FdScheme::default(), &cfg, |_, _, _| None);
        assert_eq!(report.entries.len(), 3);
        for e in &report.entries {
            assert!(e.pass, "{} residual {} ≥ {}", e.name, e.max_residual, e.tolerance);
        }
    }

    #[test]
    fn negative_control_fails() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let mut rng = probe_rng(34, 0);
        let bad = random_form(&nerve.space(2, 0), 2, &mut rng, FdScheme::default());
        let c22_perturbed = chern_c22(ChernVariant::Su2).add(&bad).unwrap();
        let chain = TotalCochain::new(vec![
            CochainLayer::new(1, 0, 3, trace_cubed_form(Factor::SU2, None)),
            CochainLayer::new(2, 0, 2, c22_perturbed).fd_tainted(),
        ])
        .unwrap();
        let cfg = ProbeCfg {
            samples: 40,
            ..Default::default()
        };
        let report = check_cocycle(&nerve, &chain, FdScheme::default(), &cfg, |_, _, _| None);
        assert!(
            report.entries.iter().any(|e| e.max_residual > 100.0 * e.tolerance),
            "perturbed cochain should fail loudly"
        );
    }

    #[test]
    fn vertical_faces_commute_with_horizontal() {
        let nerve = Nerve::bisimplicial(GroupSpec::single(Factor::SU2), adjoint_circle_action());
        for p in 1..=2usize {
            for q in 1..=2usize {
                for i in 0..=p {
                    for j in 0..=q {
                        let h_then_v = nerve
                            .horizontal_face(p, q, i)
                            .unwrap()
                            .then(&nerve.vertical_face(p - 1, q, j).unwrap())
                            .unwrap();
                        let v_then_h = nerve
                            .vertical_face(p, q, j)
                            .unwrap()
                            .then(&nerve.horizontal_face(p, q - 1, i).unwrap())
                            .unwrap();
                        let space = nerve.space(p, q);
                        for k in 0..50 {
                            let mut rng =
                                probe_rng(35, ((p * 10 + q) * 100 + i * 10 + j) as u64 * 100 + k);
                            let pt = sample_point(&space, &mut rng);
                            let x = sample_tangent(&pt, &mut rng);
                            assert!(
                                point_dist(&(h_then_v.apply)(&pt), &(v_then_h.apply)(&pt)) < 1e-12
                            );
                            assert!(
                                tangent_dist(&(h_then_v.push)(&pt, &x), &(v_then_h.push)(&pt, &x))
                                    < 1e-12
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn vertical_conjugation_face_matches_action() {
        let nerve = Nerve::bisimplicial(GroupSpec::single(Factor::PU2), adjoint_circle_action());
        let face = nerve.vertical_face(1, 1, 1).unwrap();
        let mut rng = probe_rng(36, 0);
        let space = nerve.space(1, 1);
        let pt = sample_point(&space, &mut rng);
        let out = (face.apply)(&pt);
        // first component conjugated, circle dropped
        let z = pt.mats[1].get(0, 0);
        let zh = crate::groups::embed_circle(z);
        assert!(out.mats[0].dist(&(zh * pt.mats[0] * zh.inverse())) < 1e-13);
        assert_eq!(out.mats.len(), 1);
        // z = 1 conjugation face is the plain projection
        let mut pt1 = pt.clone();
        pt1.mats[1] = CMat::new1(Complex64::new(1.0, 0.0));
        let out1 = (face.apply)(&pt1);
        assert!(out1.mats[0].dist(&pt1.mats[0]) < 1e-15);
    }

    #[test]
    fn d_circle_squares_to_zero() {
        let nerve = Nerve::bisimplicial(GroupSpec::single(Factor::SU2), adjoint_circle_action());
        let mut rng = probe_rng(37, 0);
        let f = random_scalar_function(&nerve.space(1, 1), &mut rng);
        let layer = CochainLayer::new(1, 1, 0, f);
        let dd = d_circle(&nerve, &d_circle(&nerve, &layer));
        let cfg = ProbeCfg {
            samples: 80,
            ..Default::default()
        };
        let max = probe_form_max(&dd.form, &cfg, 0);
        assert!(max < 1e-12, "d″d″ residual {max}");
    }

    #[test]
    fn total_differential_squares_to_zero_bisimplicial() {
        let nerve = Nerve::bisimplicial(GroupSpec::single(Factor::SU2), adjoint_circle_action());
        let scheme = FdScheme::default();
        let mut rng = probe_rng(38, 0);
        let layer = CochainLayer::new(
            1,
            1,
            1,
            random_form(&nerve.space(1, 1), 1, &mut rng, scheme),
        )
        .fd_tainted();
        let chain = TotalCochain::new(vec![layer]).unwrap();
        let dd = d_total(&nerve, &d_total(&nerve, &chain, scheme), scheme);
        let cfg = ProbeCfg {
            samples: 25,
            ..Default::default()
        };
        let report = check_zero(&dd, &cfg, |_, _, _| None);
        for e in &report.entries {
            assert!(
                e.max_residual < 1e-5,
                "D² residual {} at {}",
                e.max_residual,
                e.name
            );
        }
    }

    #[test]
    fn duplicate_layers_rejected() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let f = Form::zero(nerve.space(1, 0), 1);
        let res = TotalCochain::new(vec![
            CochainLayer::new(1, 0, 1, f.clone()),
            CochainLayer::new(1, 0, 1, f),
        ]);
        assert!(res.is_err());
    }

    #[test]
    fn inconsistent_degrees_rejected() {
        let nerve = Nerve::simplicial(GroupSpec::single(Factor::SU2));
        let res = TotalCochain::new(vec![
            CochainLayer::new(1, 0, 1, Form::zero(nerve.space(1, 0), 1)),
            CochainLayer::new(2, 0, 2, Form::zero(nerve.space(2, 0), 2)),
        ]);
        assert!(res.is_err());
    }
}
