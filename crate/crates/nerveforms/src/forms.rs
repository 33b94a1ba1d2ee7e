//! Differential-form calculus on product matrix groups.
//!
//! A form of degree k is an alternating multilinear evaluator on a point
//! plus k tangents, returning a complex scalar. Forms compose through exact
//! pullbacks (maps carry their own differential), a determinant-convention
//! wedge (shuffle sums with no 1/k! factor), and an exterior derivative in
//! the left-invariant-extension formula
//!
//!   dω(X₀..X_k) = Σᵢ (−1)ⁱ Dᵢ ω(..X̂ᵢ..) + Σ_{i<j} (−1)^{i+j} ω([Xᵢ,Xⱼ], ..)
//!
//! where each tangent `g·A` extends to the left-invariant field and `Dᵢ` is
//! a central finite difference along `t ↦ p·exp(tAᵢ)`.  The bracket terms
//! are exact, so only one-dimensional finite differences remain.
//!
//! The explicit trace forms of the second-Chern cocycle live here:
//!
//!   C₁,₃ = (1/2πi)² (−1/6) tr((h⁻¹dh)³)
//!   C₂,₂ = (1/2πi)² (1/2)  tr(h₂⁻¹h₁⁻¹ dh₁ dh₂)     (− the tr·tr term on U(2))

use crate::cmat::CMat;
use crate::groups::{
    algebra_bracket, algebra_tangent, displace, tangent_algebra, Factor, GroupPoint, GroupSpec,
    Tangent,
};
use itertools::Itertools;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormError {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("degree/arity mismatch: {0}")]
    DegreeMismatch(String),
}

/// Normalization (1/2πi)² (−1/6) of the degree-3 trace form.
pub fn c13_normalization() -> Complex64 {
    Complex64::new(1.0 / (24.0 * PI * PI), 0.0)
}

/// Normalization (1/2πi)² (1/2) of the degree-2 trace form.
pub fn c22_normalization() -> Complex64 {
    Complex64::new(-1.0 / (8.0 * PI * PI), 0.0)
}

/// −1/(2πi) = i/(2π), the curvature normalization.
pub fn inv_2pii() -> Complex64 {
    Complex64::new(0.0, 1.0 / (2.0 * PI))
}

type EvalFn = dyn Fn(&GroupPoint, &[Tangent]) -> Complex64 + Send + Sync;

/// A degree-k alternating multilinear evaluator.
#[derive(Clone)]
pub struct Form {
    pub domain: GroupSpec,
    pub degree: usize,
    eval: Arc<EvalFn>,
}

impl Form {
    pub fn new(
        domain: GroupSpec,
        degree: usize,
        eval: impl Fn(&GroupPoint, &[Tangent]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Form {
            domain,
            degree,
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, p: &GroupPoint, xs: &[Tangent]) -> Complex64 {
        assert_eq!(
            xs.len(),
            self.degree,
            "form of degree {} evaluated on {} tangents",
            self.degree,
            xs.len()
        );
        (self.eval)(p, xs)
    }

    pub fn zero(domain: GroupSpec, degree: usize) -> Self {
        Form::new(domain, degree, |_, _| Complex64::new(0.0, 0.0))
    }

    /// A 0-form from a scalar function.
    pub fn scalar(domain: GroupSpec, f: impl Fn(&GroupPoint) -> Complex64 + Send + Sync + 'static) -> Self {
        Form::new(domain, 0, move |p, _| f(p))
    }

    pub fn add(&self, other: &Form) -> Result<Form, FormError> {
        if self.domain != other.domain {
            return Err(FormError::DomainMismatch("add".into()));
        }
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch("add".into()));
        }
        let a = self.eval.clone();
        let b = other.eval.clone();
        Ok(Form::new(self.domain.clone(), self.degree, move |p, xs| {
            a(p, xs) + b(p, xs)
        }))
    }

    pub fn scale(&self, c: Complex64) -> Form {
        let e = self.eval.clone();
        Form::new(self.domain.clone(), self.degree, move |p, xs| c * e(p, xs))
    }

    pub fn neg(&self) -> Form {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    /// Sum of forms on a shared domain and degree.
    pub fn sum(terms: Vec<Form>) -> Form {
        assert!(!terms.is_empty());
        let domain = terms[0].domain.clone();
        let degree = terms[0].degree;
        for t in &terms {
            assert_eq!(t.domain, domain);
            assert_eq!(t.degree, degree);
        }
        Form::new(domain, degree, move |p, xs| {
            terms.iter().map(|t| t.eval(p, xs)).sum()
        })
    }
}

type ApplyFn = dyn Fn(&GroupPoint) -> GroupPoint + Send + Sync;
type PushFn = dyn Fn(&GroupPoint, &Tangent) -> Tangent + Send + Sync;

/// A smooth map between product groups carrying its exact differential.
#[derive(Clone)]
pub struct SmoothMap {
    pub source: GroupSpec,
    pub target: GroupSpec,
    pub apply: Arc<ApplyFn>,
    pub push: Arc<PushFn>,
}

impl SmoothMap {
    pub fn new(
        source: GroupSpec,
        target: GroupSpec,
        apply: impl Fn(&GroupPoint) -> GroupPoint + Send + Sync + 'static,
        push: impl Fn(&GroupPoint, &Tangent) -> Tangent + Send + Sync + 'static,
    ) -> Self {
        SmoothMap {
            source,
            target,
            apply: Arc::new(apply),
            push: Arc::new(push),
        }
    }

    pub fn identity(spec: GroupSpec) -> Self {
        SmoothMap::new(
            spec.clone(),
            spec,
            |p| p.clone(),
            |_, x| x.clone(),
        )
    }

    /// `other ∘ self` (apply `self` first).
    pub fn then(&self, other: &SmoothMap) -> Result<SmoothMap, FormError> {
        if self.target != other.source {
            return Err(FormError::DomainMismatch("map composition".into()));
        }
        let (a1, p1) = (self.apply.clone(), self.push.clone());
        let (a2, p2) = (other.apply.clone(), other.push.clone());
        let a1_push = a1.clone();
        Ok(SmoothMap::new(
            self.source.clone(),
            other.target.clone(),
            move |p| a2(&a1(p)),
            move |p, x| {
                let mid = a1_push(p);
                p2(&mid, &p1(p, x))
            },
        ))
    }

    /// Conjugation `g ↦ h g h⁻¹` on a single-kind spec, with exact push
    /// `X ↦ h X h⁻¹`.
    pub fn conjugation(spec: GroupSpec, h: CMat) -> SmoothMap {
        let h_inv = h.inverse();
        SmoothMap::new(
            spec.clone(),
            spec,
            move |p| GroupPoint {
                spec: p.spec.clone(),
                mats: p.mats.iter().map(|m| h * *m * h_inv).collect(),
            },
            move |_, x| Tangent {
                mats: x.mats.iter().map(|m| h * *m * h_inv).collect(),
            },
        )
    }
}

/// Exact pullback: `(f*ω)(p; X₁..X_k) = ω(f(p); push X₁ .. push X_k)`.
pub fn pullback(f: &SmoothMap, omega: &Form) -> Result<Form, FormError> {
    if omega.domain != f.target {
        return Err(FormError::DomainMismatch(
            "pullback requires ω.domain = f.target".into(),
        ));
    }
    let apply = f.apply.clone();
    let push = f.push.clone();
    let omega = omega.clone();
    Ok(Form::new(f.source.clone(), omega.degree, move |p, xs| {
        let q = apply(p);
        let pushed: Vec<Tangent> = xs.iter().map(|x| push(p, x)).collect();
        omega.eval(&q, &pushed)
    }))
}

/// Matrix-valued 1-form, e.g. the Maurer–Cartan form `h⁻¹dh`.
#[derive(Clone)]
pub struct MatrixOneForm {
    pub domain: GroupSpec,
    eval: Arc<dyn Fn(&GroupPoint, &Tangent) -> CMat + Send + Sync>,
}

impl MatrixOneForm {
    pub fn eval(&self, p: &GroupPoint, x: &Tangent) -> CMat {
        (self.eval)(p, x)
    }
}

/// The Maurer–Cartan form on one factor: `eval(g, X) = g_f⁻¹ X_f`.
pub fn maurer_cartan(domain: GroupSpec, factor: usize) -> MatrixOneForm {
    assert!(factor < domain.len());
    MatrixOneForm {
        domain,
        eval: Arc::new(move |p, x| p.mats[factor].inverse() * x.mats[factor]),
    }
}

/// The degree-3 trace form `normalization · tr((h⁻¹dh)³)` on a single factor,
/// in the determinant convention: the full signed sum over S₃ with no 1/3!.
///
/// With the default normalization this is C₁,₃ (and C^U₁,₃ on U(2)).
pub fn trace_cubed_form(factor: Factor, normalization: Option<Complex64>) -> Form {
    let norm = normalization.unwrap_or_else(c13_normalization);
    let domain = GroupSpec::single(factor);
    Form::new(domain, 3, move |p, xs| {
        let g_inv = p.mats[0].inverse();
        let a: Vec<CMat> = xs.iter().map(|x| g_inv * x.mats[0]).collect();
        // Σ_{σ∈S₃} sgn(σ) tr(A_{σ1} A_{σ2} A_{σ3}) = 3 [tr(A₀A₁A₂) − tr(A₀A₂A₁)]
        let even = (a[0] * a[1] * a[2]).trace();
        let odd = (a[0] * a[2] * a[1]).trace();
        norm * (even - odd) * 3.0
    })
}

/// Which of the two explicit degree-2 trace forms to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChernVariant {
    /// SU(2): `(1/2πi)² (1/2) tr(h₂⁻¹h₁⁻¹ dh₁ dh₂)`.
    Su2,
    /// U(2): the same minus `(1/2πi)² (1/2) tr(h₁⁻¹dh₁) tr(h₂⁻¹dh₂)`.
    U2,
}

/// The degree-2 form C₂,₂ (resp. C^U₂,₂) on G×G.
pub fn chern_c22(variant: ChernVariant) -> Form {
    let factor = match variant {
        ChernVariant::Su2 => Factor::SU2,
        ChernVariant::U2 => Factor::U2,
    };
    let domain = GroupSpec::power(factor, 2);
    let norm = c22_normalization();
    Form::new(domain, 2, move |p, xs| {
        let h1_inv = p.mats[0].inverse();
        let h2_inv = p.mats[1].inverse();
        let pre = h2_inv * h1_inv;
        // dh₁ picks the factor-1 component, dh₂ the factor-2 component.
        let u = [xs[0].mats[0], xs[1].mats[0]];
        let v = [xs[0].mats[1], xs[1].mats[1]];
        let mut val = norm * (pre * (u[0] * v[1] - u[1] * v[0])).trace();
        if variant == ChernVariant::U2 {
            let t1 = [(h1_inv * u[0]).trace(), (h1_inv * u[1]).trace()];
            let t2 = [(h2_inv * v[0]).trace(), (h2_inv * v[1]).trace()];
            val -= norm * (t1[0] * t2[1] - t1[1] * t2[0]);
        }
        val
    })
}

/// Wedge in the determinant convention: a sum over (a,b)-shuffles with
/// permutation signs and no factorial normalization.
pub fn wedge(alpha: &Form, beta: &Form) -> Result<Form, FormError> {
    if alpha.domain != beta.domain {
        return Err(FormError::DomainMismatch("wedge".into()));
    }
    let a = alpha.degree;
    let b = beta.degree;
    let alpha = alpha.clone();
    let beta = beta.clone();
    Ok(Form::new(alpha.domain.clone(), a + b, move |p, xs| {
        if a == 0 {
            return alpha.eval(p, &[]) * beta.eval(p, xs);
        }
        if b == 0 {
            return alpha.eval(p, xs) * beta.eval(p, &[]);
        }
        let mut total = Complex64::new(0.0, 0.0);
        for sel in (0..a + b).combinations(a) {
            let rest: Vec<usize> = (0..a + b).filter(|i| !sel.contains(i)).collect();
            let sign = shuffle_sign(&sel, &rest);
            let left: Vec<Tangent> = sel.iter().map(|&i| xs[i].clone()).collect();
            let right: Vec<Tangent> = rest.iter().map(|&i| xs[i].clone()).collect();
            total += sign * alpha.eval(p, &left) * beta.eval(p, &right);
        }
        total
    }))
}

fn shuffle_sign(sel: &[usize], rest: &[usize]) -> f64 {
    let perm: Vec<usize> = sel.iter().chain(rest.iter()).copied().collect();
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Finite-difference scheme for the exterior derivative. `richardson`
/// replaces the plain central difference at step h by the extrapolation of
/// the h and h/2 stencils.
#[derive(Clone, Copy, Debug)]
pub struct FdScheme {
    pub step: f64,
    pub richardson: bool,
}

impl Default for FdScheme {
    fn default() -> Self {
        FdScheme {
            step: 1e-4,
            richardson: false,
        }
    }
}

impl FdScheme {
    fn diff(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        let h = self.step;
        let central = |h: f64| (f(h) - f(-h)) / (2.0 * h);
        if self.richardson {
            (central(h / 2.0) * 4.0 - central(h)) / 3.0
        } else {
            central(h)
        }
    }
}

/// Exterior derivative by left-invariant extension.
pub fn exterior_derivative(omega: &Form, scheme: FdScheme) -> Form {
    let omega = omega.clone();
    let k = omega.degree;
    Form::new(omega.domain.clone(), k + 1, move |p, xs| {
        let algs: Vec<Vec<CMat>> = xs.iter().map(|x| tangent_algebra(p, x)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        // derivative terms: Dᵢ of ω evaluated on the other left-invariant fields
        for i in 0..=k {
            let others: Vec<usize> = (0..=k).filter(|&j| j != i).collect();
            let d = scheme.diff(|s| {
                let q = displace(p, &algs[i], s);
                let moved: Vec<Tangent> =
                    others.iter().map(|&j| algebra_tangent(&q, &algs[j])).collect();
                omega.eval(&q, &moved)
            });
            total += sign(i) * d;
        }
        // bracket terms, exact: [g·A, g·B] = g·[A,B] factor-wise
        for i in 0..=k {
            for j in i + 1..=k {
                let br = algebra_bracket(&algs[i], &algs[j]);
                let mut args = vec![algebra_tangent(p, &br)];
                for l in 0..=k {
                    if l != i && l != j {
                        args.push(xs[l].clone());
                    }
                }
                total += sign(i + j) * omega.eval(p, &args);
            }
        }
        total
    })
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmat::{i_pauli, pauli, IM, ONE};
    use crate::groups::{probe_rng, sample_point, sample_tangent};

    fn su2_point_tangents(
        seed: u64,
        stream: u64,
        n: usize,
        k: usize,
    ) -> (GroupPoint, Vec<Tangent>) {
        let spec = GroupSpec::power(Factor::SU2, n);
        let mut rng = probe_rng(seed, stream);
        let p = sample_point(&spec, &mut rng);
        let xs = (0..k).map(|_| sample_tangent(&p, &mut rng)).collect();
        (p, xs)
    }

    #[test]
    fn maurer_cartan_left_translation() {
        let spec = GroupSpec::single(Factor::SU2);
        let mc = maurer_cartan(spec.clone(), 0);
        let mut rng = probe_rng(10, 0);
        let g = sample_point(&spec, &mut rng);
        let a = i_pauli(2) * 0.3 + i_pauli(1) * 0.1;
        // (g, gA) ↦ A
        let x = Tangent {
            mats: vec![g.mats[0] * a],
        };
        assert!(mc.eval(&g, &x).dist(&a) < 1e-13);
        // at the identity (I, A) ↦ A
        let id = spec.identity();
        let xa = Tangent { mats: vec![a] };
        assert!(mc.eval(&id, &xa).dist(&a) < 1e-15);
    }

    #[test]
    fn trace_cubed_reference_value() {
        // hand expansion of the six permutations at (I; iσ₁, iσ₂, iσ₃):
        // Σ = 3(tr A₁A₂A₃ − tr A₁A₃A₂) = 3(2 − (−2)) = 12, so the value is
        // 12/(24π²) = 1/(2π²).
        let c13 = trace_cubed_form(Factor::SU2, None);
        let id = GroupSpec::single(Factor::SU2).identity();
        let xs: Vec<Tangent> = (1..=3)
            .map(|k| Tangent {
                mats: vec![i_pauli(k)],
            })
            .collect();
        let expected = 1.0 / (2.0 * PI * PI);
        let got = c13.eval(&id, &xs);
        assert!((got - Complex64::new(expected, 0.0)).norm() < 1e-15, "got {got}");
    }

    #[test]
    fn trace_cubed_alternation_and_invariance() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let spec = GroupSpec::single(Factor::SU2);
        let mut rng = probe_rng(11, 0);
        for _ in 0..50 {
            let g = sample_point(&spec, &mut rng);
            let x1 = sample_tangent(&g, &mut rng);
            let x2 = sample_tangent(&g, &mut rng);
            // repeated argument kills the value
            let rep = c13.eval(&g, &[x1.clone(), x1.clone(), x2.clone()]);
            assert!(rep.norm() < 1e-13);
            // left translation h·g with tangents h·X leaves A unchanged
            let h = sample_point(&spec, &mut rng);
            let hg = h.multiply(&g).unwrap();
            let x3 = sample_tangent(&g, &mut rng);
            let push = |x: &Tangent| Tangent {
                mats: vec![h.mats[0] * x.mats[0]],
            };
            let a = c13.eval(&g, &[x1.clone(), x2.clone(), x3.clone()]);
            let b = c13.eval(&hg, &[push(&x1), push(&x2), push(&x3)]);
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn trace_cubed_ad_invariance() {
        let c13 = trace_cubed_form(Factor::SU2, None);
        let spec = GroupSpec::single(Factor::SU2);
        let mut rng = probe_rng(12, 0);
        let h = Factor::SU2.haar_sample(&mut rng);
        let conj = SmoothMap::conjugation(spec.clone(), h);
        let pulled = pullback(&conj, &c13).unwrap();
        for _ in 0..50 {
            let g = sample_point(&spec, &mut rng);
            let xs: Vec<Tangent> = (0..3).map(|_| sample_tangent(&g, &mut rng)).collect();
            let a = c13.eval(&g, &xs);
            let b = pulled.eval(&g, &xs);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn c22_reference_values() {
        let c22 = chern_c22(ChernVariant::Su2);
        let id = GroupSpec::power(Factor::SU2, 2).identity();
        let z2 = CMat::zero(2);
        let t = |a: CMat, b: CMat| Tangent { mats: vec![a, b] };
        // ((I,I); (iσ₁,0),(0,iσ₁)) → 1/(4π²) by direct substitution, tr(−I) = −2
        let got = c22.eval(&id, &[t(i_pauli(1), z2), t(z2, i_pauli(1))]);
        let expected = 1.0 / (4.0 * PI * PI);
        assert!((got - Complex64::new(expected, 0.0)).norm() < 1e-15, "got {got}");
        // ((I,I); (iσ₁,0),(0,iσ₂)) → 0 since tr(σ₁σ₂) = 0
        let zero = c22.eval(&id, &[t(i_pauli(1), z2), t(z2, i_pauli(2))]);
        assert!(zero.norm() < 1e-15);
        // swapping the tangent pair negates
        let a = c22.eval(&id, &[t(i_pauli(1), i_pauli(3)), t(i_pauli(2), i_pauli(1))]);
        let b = c22.eval(&id, &[t(i_pauli(2), i_pauli(1)), t(i_pauli(1), i_pauli(3))]);
        assert!((a + b).norm() < 1e-15);
    }

    #[test]
    fn forms_are_multilinear_and_alternating() {
        let c22 = chern_c22(ChernVariant::U2);
        let spec = GroupSpec::power(Factor::U2, 2);
        let mut rng = probe_rng(13, 0);
        for _ in 0..50 {
            let p = sample_point(&spec, &mut rng);
            let x = sample_tangent(&p, &mut rng);
            let y = sample_tangent(&p, &mut rng);
            let z = sample_tangent(&p, &mut rng);
            let (a, b) = (1.7, -0.4);
            let lin = c22.eval(&p, &[x.scale(a).add(&y.scale(b)), z.clone()]);
            let split = a * c22.eval(&p, &[x.clone(), z.clone()]) + b * c22.eval(&p, &[y.clone(), z.clone()]);
            assert!(
                (lin - split).norm() < 1e-9 * (1.0 + lin.norm()),
                "linearity residual {}",
                (lin - split).norm()
            );
            let swap = c22.eval(&p, &[z.clone(), x.clone()]);
            let orig = c22.eval(&p, &[x.clone(), z.clone()]);
            assert!((swap + orig).norm() < 1e-12);
        }
    }

    #[test]
    fn pullback_functoriality() {
        let spec = GroupSpec::single(Factor::SU2);
        let mut rng = probe_rng(14, 0);
        let h1 = Factor::SU2.haar_sample(&mut rng);
        let h2 = Factor::SU2.haar_sample(&mut rng);
        let f = SmoothMap::conjugation(spec.clone(), h1);
        let g = SmoothMap::conjugation(spec.clone(), h2);
        let c13 = trace_cubed_form(Factor::SU2, None);
        // (g∘f)*ω = f*(g*ω)
        let gf = f.then(&g).unwrap();
        let lhs = pullback(&gf, &c13).unwrap();
        let rhs = pullback(&f, &pullback(&g, &c13).unwrap()).unwrap();
        for _ in 0..30 {
            let p = sample_point(&spec, &mut rng);
            let xs: Vec<Tangent> = (0..3).map(|_| sample_tangent(&p, &mut rng)).collect();
            assert!((lhs.eval(&p, &xs) - rhs.eval(&p, &xs)).norm() < 1e-12);
        }
        // identity pullback is the identity
        let idm = SmoothMap::identity(spec.clone());
        let same = pullback(&idm, &c13).unwrap();
        let p = sample_point(&spec, &mut rng);
        let xs: Vec<Tangent> = (0..3).map(|_| sample_tangent(&p, &mut rng)).collect();
        assert!((same.eval(&p, &xs) - c13.eval(&p, &xs)).norm() < 1e-15);
    }

    #[test]
    fn wedge_of_one_forms() {
        let spec = GroupSpec::single(Factor::SU2);
        let alpha = Form::new(spec.clone(), 1, |p: &GroupPoint, xs: &[Tangent]| {
            (pauli(1) * (p.mats[0].inverse() * xs[0].mats[0])).trace()
        });
        let beta = Form::new(spec.clone(), 1, |p: &GroupPoint, xs: &[Tangent]| {
            (pauli(3) * (p.mats[0].inverse() * xs[0].mats[0])).trace()
        });
        let w = wedge(&alpha, &beta).unwrap();
        let aa = wedge(&alpha, &alpha).unwrap();
        let mut rng = probe_rng(15, 0);
        for _ in 0..30 {
            let p = sample_point(&spec, &mut rng);
            let x = sample_tangent(&p, &mut rng);
            let y = sample_tangent(&p, &mut rng);
            let direct = alpha.eval(&p, &[x.clone()]) * beta.eval(&p, &[y.clone()])
                - alpha.eval(&p, &[y.clone()]) * beta.eval(&p, &[x.clone()]);
            assert!((w.eval(&p, &[x.clone(), y.clone()]) - direct).norm() < 1e-14);
            assert!(aa.eval(&p, &[x.clone(), y.clone()]).norm() < 1e-14);
        }
    }

    #[test]
    fn wedge_graded_commutativity() {
        // 1-form against 2-form: α∧β = (−1)^{1·2} β∧α = β∧α
        let spec = GroupSpec::single(Factor::SU2);
        let alpha = Form::new(spec.clone(), 1, |p: &GroupPoint, xs: &[Tangent]| {
            (pauli(2) * (p.mats[0].inverse() * xs[0].mats[0])).trace()
        });
        let a2 = Form::new(spec.clone(), 1, |p: &GroupPoint, xs: &[Tangent]| {
            (pauli(1) * (p.mats[0].inverse() * xs[0].mats[0])).trace() * IM
        });
        let beta = wedge(&alpha, &a2).unwrap();
        let ab = wedge(&alpha, &beta).unwrap();
        let ba = wedge(&beta, &alpha).unwrap();
        let mut rng = probe_rng(16, 0);
        let p = sample_point(&spec, &mut rng);
        let xs: Vec<Tangent> = (0..3).map(|_| sample_tangent(&p, &mut rng)).collect();
        let u = ab.eval(&p, &xs);
        let v = ba.eval(&p, &xs);
        assert!((u - v).norm() < 1e-13, "graded commutativity {u} vs {v}");
    }

    #[test]
    fn exterior_derivative_of_scalar() {
        // f(g) = Im tr(σ₁ g): at I along iσ₁ the derivative is Im tr(iσ₁σ₁) = 2.
        let spec = GroupSpec::single(Factor::SU2);
        let f = Form::scalar(spec.clone(), |p| {
            Complex64::new((pauli(1) * p.mats[0]).trace().im, 0.0)
        });
        let df = exterior_derivative(&f, FdScheme::default());
        let id = spec.identity();
        let x = Tangent {
            mats: vec![i_pauli(1)],
        };
        let got = df.eval(&id, &[x]);
        assert!((got - Complex64::new(2.0, 0.0)).norm() < 1e-8, "got {got}");
    }

    #[test]
    fn trace_of_maurer_cartan_is_closed() {
        // d tr(ω) = 0: the derivative terms vanish on left-invariant fields
        // and tr[A,B] = 0.
        let spec = GroupSpec::single(Factor::U2);
        let tr_mc = Form::new(spec.clone(), 1, |p: &GroupPoint, xs: &[Tangent]| {
            (p.mats[0].inverse() * xs[0].mats[0]).trace()
        });
        let d = exterior_derivative(&tr_mc, FdScheme::default());
        let mut rng = probe_rng(17, 0);
        for _ in 0..50 {
            let p = sample_point(&spec, &mut rng);
            let xs: Vec<Tangent> = (0..2).map(|_| sample_tangent(&p, &mut rng)).collect();
            assert!(d.eval(&p, &xs).norm() < 1e-8);
        }
    }

    #[test]
    fn d_squared_vanishes_on_scalars() {
        // nested derivatives take the Richardson stencil at both levels;
        // plain central differences leave the inner truncation field in the
        // outer derivative and stall near the tolerance
        let spec = GroupSpec::single(Factor::SU2);
        let rich = FdScheme {
            richardson: true,
            ..FdScheme::default()
        };
        for stream in 0..4 {
            let mut rng = probe_rng(18, stream);
            let f = crate::nerve::random_scalar_function(&spec, &mut rng);
            let ddf = exterior_derivative(&exterior_derivative(&f, rich), rich);
            for _ in 0..20 {
                let p = sample_point(&spec, &mut rng);
                let xs: Vec<Tangent> = (0..2).map(|_| sample_tangent(&p, &mut rng)).collect();
                let r = ddf.eval(&p, &xs).norm();
                assert!(r < 1e-6, "d² residual {r}");
            }
        }
    }

    #[test]
    fn d_squared_residual_scales_quadratically() {
        // at fd steps large enough for truncation to dominate roundoff,
        // halving the step shrinks the d² residual by roughly 4.
        // (tr(σ₁g) is purely imaginary on SU(2), so use its Im part.)
        let spec = GroupSpec::single(Factor::SU2);
        let f = Form::scalar(spec.clone(), |p| {
            Complex64::new((pauli(1) * p.mats[0]).trace().im.powi(2), 0.0)
        });
        let resid = |h: f64| {
            let sch = FdScheme {
                step: h,
                richardson: false,
            };
            let ddf = exterior_derivative(&exterior_derivative(&f, sch), sch);
            let mut rng = probe_rng(19, 0);
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let p = sample_point(&spec, &mut rng);
                let xs: Vec<Tangent> = (0..2).map(|_| sample_tangent(&p, &mut rng)).collect();
                worst = worst.max(ddf.eval(&p, &xs).norm());
            }
            worst
        };
        let coarse = resid(2e-2);
        let fine = resid(1e-2);
        let ratio = coarse / fine;
        assert!(
            (2.5..8.0).contains(&ratio),
            "expected ≈4x reduction, got ratio {ratio} ({coarse} vs {fine})"
        );
    }

    #[test]
    fn dc13_vanishes_on_su2_and_u2() {
        for factor in [Factor::SU2, Factor::U2] {
            let c13 = trace_cubed_form(factor, None);
            let d = exterior_derivative(&c13, FdScheme::default());
            let spec = GroupSpec::single(factor);
            let mut rng = probe_rng(20, 0);
            for _ in 0..200 {
                let p = sample_point(&spec, &mut rng);
                let xs: Vec<Tangent> = (0..4).map(|_| sample_tangent(&p, &mut rng)).collect();
                let r = d.eval(&p, &xs).norm();
                assert!(r < 1e-6, "dC₁,₃ residual {r} on {factor:?}");
            }
        }
    }

    #[test]
    fn pu2_representative_flip_invariance() {
        let c13 = trace_cubed_form(Factor::PU2, None);
        let spec = GroupSpec::single(Factor::PU2);
        let mut rng = probe_rng(21, 0);
        for _ in 0..50 {
            let p = sample_point(&spec, &mut rng);
            let xs: Vec<Tangent> = (0..3).map(|_| sample_tangent(&p, &mut rng)).collect();
            let mut fp = p.clone();
            fp.mats[0] = -fp.mats[0];
            let fxs: Vec<Tangent> = xs
                .iter()
                .map(|x| Tangent {
                    mats: vec![-x.mats[0]],
                })
                .collect();
            let a = c13.eval(&p, &xs);
            let b = c13.eval(&fp, &fxs);
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn normalization_constants() {
        assert!((c13_normalization().re * 24.0 * PI * PI - 1.0).abs() < 1e-15);
        // −1/(2πi) = i/(2π)
        assert!((inv_2pii() + ONE / Complex64::new(0.0, 2.0 * PI)).norm() < 1e-18);
    }
}
