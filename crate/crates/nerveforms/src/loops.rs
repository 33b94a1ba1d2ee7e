//! Discretized free loop groups and the circle transgression.
//!
//! Loops are carried as closed-form generators
//!
//!   γ(t) = g₀ · Π_k exp(f_k(t)·B_k)
//!
//! with trigonometric-polynomial exponents, so samples lie exactly on the
//! group, derivatives come from the product rule (`d/dt exp(fB) = f′B·exp(fB)`)
//! and the uniform trapezoid rule is spectrally accurate. Loop tangents are
//! generators too: `u(t) = γ(t)·A(t)` with `A(t) = Σ h_m(t)·C_m`; pushing a
//! tangent through a face map degrades it to grid samples, which is all the
//! transgressed forms need.
//!
//! The transgression of a degree-k form ω on G^p is
//!
//!   (∫_{S¹} ev*ω)(γ⃗; u₁..u_{k−1}) = Σ_j (2π/N) ω(γ⃗(t_j); γ⃗′(t_j), u₁(t_j), …)
//!
//! with the fiber slot first; the relative sign between d and transgression
//! is probed and frozen, not assumed. The loop-space exterior derivative
//! reuses the left-invariant-extension formula pointwise: displacement
//! appends generator terms, brackets are pointwise brackets.

use crate::cmat::CMat;
use crate::forms::{exterior_derivative, FdScheme, Form};
use crate::groups::{embed_circle, embed_circle_rate, probe_rng, Factor, GroupPoint, GroupSpec, Tangent};
use crate::residual::{probe_sign, residual_max, IdentityResidual, ResidualReport, SignProbeError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("sample grids do not match ({0} vs {1})")]
    GridMismatch(usize, usize),
    #[error("operation requires generator-form tangents")]
    NeedsGenerator,
    #[error(transparent)]
    SignProbe(#[from] SignProbeError),
}

/// A real trigonometric polynomial `c₀ + Σ_m a_m cos(mt) + b_m sin(mt)`.
#[derive(Clone, Debug, Default)]
pub struct TrigPoly {
    pub c0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        TrigPoly {
            c0: c,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    pub fn band(&self) -> usize {
        self.a.len().max(self.b.len())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.c0;
        for (m, &am) in self.a.iter().enumerate() {
            v += am * ((m + 1) as f64 * t).cos();
        }
        for (m, &bm) in self.b.iter().enumerate() {
            v += bm * ((m + 1) as f64 * t).sin();
        }
        v
    }

    pub fn deriv(&self) -> TrigPoly {
        let band = self.band();
        let mut a = vec![0.0; band];
        let mut b = vec![0.0; band];
        for (m, &am) in self.a.iter().enumerate() {
            // d/dt a cos(kt) = -a k sin(kt)
            b[m] -= am * (m + 1) as f64;
        }
        for (m, &bm) in self.b.iter().enumerate() {
            a[m] += bm * (m + 1) as f64;
        }
        TrigPoly { c0: 0.0, a, b }
    }

    /// The rotated polynomial `t ↦ f(t + c)`.
    pub fn shift(&self, c: f64) -> TrigPoly {
        let band = self.band();
        let mut a = vec![0.0; band];
        let mut b = vec![0.0; band];
        for m in 0..band {
            let k = (m + 1) as f64;
            let am = self.a.get(m).copied().unwrap_or(0.0);
            let bm = self.b.get(m).copied().unwrap_or(0.0);
            // cos(k(t+c)) = cos kc cos kt − sin kc sin kt, etc.
            a[m] = am * (k * c).cos() + bm * (k * c).sin();
            b[m] = bm * (k * c).cos() - am * (k * c).sin();
        }
        TrigPoly { c0: self.c0, a, b }
    }

    pub fn scale(&self, s: f64) -> TrigPoly {
        TrigPoly {
            c0: self.c0 * s,
            a: self.a.iter().map(|x| x * s).collect(),
            b: self.b.iter().map(|x| x * s).collect(),
        }
    }

    /// Product of trig polynomials (bands add).
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        // multiply in coefficient space via sampled FFT-free convolution:
        // expand both into (cos, sin) coefficient arrays indexed from 0
        let band = self.band() + other.band();
        let n = 2 * band + 4;
        // sample-and-project: exact for trig polynomials when n > 2·band
        let samples: Vec<f64> = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                self.eval(t) * other.eval(t)
            })
            .collect();
        let mut out = TrigPoly {
            c0: samples.iter().sum::<f64>() / n as f64,
            a: vec![0.0; band],
            b: vec![0.0; band],
        };
        for m in 1..=band {
            let (mut ca, mut cb) = (0.0, 0.0);
            for (j, &s) in samples.iter().enumerate() {
                let t = TAU * j as f64 / n as f64;
                ca += s * (m as f64 * t).cos();
                cb += s * (m as f64 * t).sin();
            }
            out.a[m - 1] = 2.0 * ca / n as f64;
            out.b[m - 1] = 2.0 * cb / n as f64;
        }
        out
    }

    pub fn random(rng: &mut impl Rng, band: usize, amplitude: f64) -> TrigPoly {
        let mut gauss = |scale: f64| -> f64 {
            let x: f64 = rng.sample(StandardNormal);
            x * scale
        };
        let mut a = Vec::with_capacity(band);
        let mut b = Vec::with_capacity(band);
        for m in 1..=band {
            let scale = amplitude / (1.0 + m as f64);
            a.push(gauss(scale));
            b.push(gauss(scale));
        }
        TrigPoly {
            c0: gauss(amplitude * 0.5),
            a,
            b,
        }
    }
}

/// A loop in generator form with cached exact samples and derivatives on a
/// fixed uniform grid of `n` points.
#[derive(Clone)]
pub struct LoopPoint {
    pub base: CMat,
    pub terms: Vec<(TrigPoly, CMat)>,
    pub n: usize,
    samples: Vec<CMat>,
    derivs: Vec<CMat>,
}

impl LoopPoint {
    pub fn new(base: CMat, terms: Vec<(TrigPoly, CMat)>, n: usize) -> Self {
        let mut lp = LoopPoint {
            base,
            terms,
            n,
            samples: Vec::new(),
            derivs: Vec::new(),
        };
        lp.recache();
        lp
    }

    pub fn constant(base: CMat, n: usize) -> Self {
        LoopPoint::new(base, Vec::new(), n)
    }

    fn recache(&mut self) {
        let n = self.n;
        self.samples = Vec::with_capacity(n);
        self.derivs = Vec::with_capacity(n);
        for j in 0..n {
            let t = TAU * j as f64 / n as f64;
            let (value, deriv) = self.eval_exact(t);
            self.samples.push(value);
            self.derivs.push(deriv);
        }
    }

    /// Exact value and t-derivative via the product rule.
    pub fn eval_exact(&self, t: f64) -> (CMat, CMat) {
        let dim = self.base.dim();
        let mut value = self.base;
        let mut deriv = CMat::zero(dim);
        for (f, b) in &self.terms {
            let e = (*b * f.eval(t)).exp();
            let de = *b * e * f.deriv().eval(t);
            deriv = deriv * e + value * de;
            value = value * e;
        }
        (value, deriv)
    }

    pub fn sample(&self, j: usize) -> CMat {
        self.samples[j]
    }

    pub fn deriv_sample(&self, j: usize) -> CMat {
        self.derivs[j]
    }

    /// Pointwise product of loops, exactly in generator form:
    /// `g₀E · h₀F = g₀h₀ · (h₀⁻¹Eh₀) F`.
    pub fn multiply(&self, other: &LoopPoint) -> LoopPoint {
        assert_eq!(self.n, other.n);
        let h0_inv = other.base.inverse();
        let mut terms: Vec<(TrigPoly, CMat)> = self
            .terms
            .iter()
            .map(|(f, b)| (f.clone(), h0_inv * *b * other.base))
            .collect();
        terms.extend(other.terms.iter().cloned());
        LoopPoint::new(self.base * other.base, terms, self.n)
    }

    /// Pointwise inverse, exactly in generator form.
    pub fn inverse(&self) -> LoopPoint {
        let terms: Vec<(TrigPoly, CMat)> = self
            .terms
            .iter()
            .rev()
            .map(|(f, b)| (f.scale(-1.0), self.base * *b * self.base.inverse()))
            .collect();
        LoopPoint::new(self.base.inverse(), terms, self.n)
    }

    /// Pointwise conjugation by a constant group element.
    pub fn conjugate(&self, c: &CMat) -> LoopPoint {
        let c_inv = c.inverse();
        LoopPoint::new(
            *c * self.base * c_inv,
            self.terms
                .iter()
                .map(|(f, b)| (f.clone(), *c * *b * c_inv))
                .collect(),
            self.n,
        )
    }

    /// The curve `s ↦ γ · Π_m exp(s·h_m(t)·C_m)` through γ with velocity
    /// `γ·A`; exactly representable, used by the loop-space FD engine.
    pub fn displace(&self, alg: &LoopAlg, s: f64) -> LoopPoint {
        let mut terms = self.terms.clone();
        for (h, c) in &alg.terms {
            terms.push((h.scale(s), *c));
        }
        LoopPoint::new(self.base, terms, self.n)
    }

    /// The reparametrized loop `t ↦ γ(t + c)`. The base point moves into the
    /// generator data through a constant offset of each exponent.
    pub fn rotate(&self, c: f64) -> LoopPoint {
        LoopPoint::new(
            self.base,
            self.terms
                .iter()
                .map(|(f, b)| (f.shift(c), *b))
                .collect(),
            self.n,
        )
    }

    pub fn membership_residual(&self, factor: Factor) -> f64 {
        self.samples
            .iter()
            .map(|m| factor.membership_residual(m))
            .fold(0.0, f64::max)
    }
}

/// A loop-algebra element `A(t) = Σ_m h_m(t)·C_m` (a loop tangent is
/// `u(t) = γ(t)·A(t)`).
#[derive(Clone)]
pub struct LoopAlg {
    pub terms: Vec<(TrigPoly, CMat)>,
}

impl LoopAlg {
    pub fn eval(&self, t: f64) -> CMat {
        let dim = self.terms.first().map_or(2, |(_, c)| c.dim());
        let mut a = CMat::zero(dim);
        for (h, c) in &self.terms {
            a = a + *c * h.eval(t);
        }
        a
    }

    /// Pointwise bracket `[A, B](t) = Σ h_m k_l [C_m, D_l]` — stays in
    /// generator form, bands add.
    pub fn bracket(&self, other: &LoopAlg) -> LoopAlg {
        let mut terms = Vec::new();
        for (h, c) in &self.terms {
            for (k, d) in &other.terms {
                let br = c.commutator(d);
                if br.norm() > 1e-300 {
                    terms.push((h.mul(k), br));
                }
            }
        }
        LoopAlg { terms }
    }

    pub fn rotate(&self, c: f64) -> LoopAlg {
        LoopAlg {
            terms: self
                .terms
                .iter()
                .map(|(h, m)| (h.shift(c), *m))
                .collect(),
        }
    }
}

/// A point of the discretized level `NLG(p) ⋊ NS¹(q)`.
#[derive(Clone)]
pub struct LoopTuple {
    pub loops: Vec<LoopPoint>,
    pub circles: Vec<Complex64>,
    pub n: usize,
}

impl LoopTuple {
    pub fn new(loops: Vec<LoopPoint>, circles: Vec<Complex64>) -> Result<Self, LoopError> {
        let n = loops.first().map_or(64, |l| l.n);
        for l in &loops {
            if l.n != n {
                return Err(LoopError::GridMismatch(l.n, n));
            }
        }
        Ok(LoopTuple { loops, circles, n })
    }
}

/// One tangent component of a loop factor: generator form when available,
/// grid samples after a face-map push.
#[derive(Clone)]
pub enum TangentRep {
    Gen(LoopAlg),
    Samples(Vec<CMat>),
}

impl TangentRep {
    /// Ambient value `u(t_j)` at the j-th grid node of the given loop.
    pub fn sample(&self, lp: &LoopPoint, j: usize) -> CMat {
        match self {
            TangentRep::Gen(alg) => {
                let t = TAU * j as f64 / lp.n as f64;
                lp.sample(j) * alg.eval(t)
            }
            TangentRep::Samples(v) => v[j],
        }
    }
}

/// A tangent at a [`LoopTuple`]: one rep per loop factor plus one rate per
/// circle factor.
#[derive(Clone)]
pub struct LoopTangent {
    pub parts: Vec<TangentRep>,
    pub rates: Vec<f64>,
}

impl LoopTangent {
    fn gen_parts(&self) -> Result<Vec<&LoopAlg>, LoopError> {
        self.parts
            .iter()
            .map(|p| match p {
                TangentRep::Gen(a) => Ok(a),
                TangentRep::Samples(_) => Err(LoopError::NeedsGenerator),
            })
            .collect()
    }
}

/// A form on loop tuples with `p` loop factors and `q` circle factors.
#[derive(Clone)]
pub struct LoopForm {
    pub p: usize,
    pub q: usize,
    pub degree: usize,
    eval: Arc<dyn Fn(&LoopTuple, &[LoopTangent]) -> Complex64 + Send + Sync>,
}

impl LoopForm {
    pub fn new(
        p: usize,
        q: usize,
        degree: usize,
        eval: impl Fn(&LoopTuple, &[LoopTangent]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        LoopForm {
            p,
            q,
            degree,
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, pt: &LoopTuple, xs: &[LoopTangent]) -> Complex64 {
        assert_eq!(xs.len(), self.degree);
        (self.eval)(pt, xs)
    }

    pub fn add(&self, other: &LoopForm) -> LoopForm {
        assert_eq!((self.p, self.q, self.degree), (other.p, other.q, other.degree));
        let a = self.eval.clone();
        let b = other.eval.clone();
        LoopForm::new(self.p, self.q, self.degree, move |pt, xs| a(pt, xs) + b(pt, xs))
    }

    pub fn scale(&self, c: Complex64) -> LoopForm {
        let e = self.eval.clone();
        LoopForm::new(self.p, self.q, self.degree, move |pt, xs| c * e(pt, xs))
    }

    pub fn neg(&self) -> LoopForm {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Transgression `∫_{S¹} ev*ω` of a degree-k form on G^p: a degree-(k−1)
/// form on p-tuples of loops. Fiber slot first, uniform trapezoid weights
/// `2π/N` (spectrally accurate on trig-generated data).
pub fn transgress(omega: &Form, p: usize) -> LoopForm {
    assert!(omega.degree >= 1);
    assert_eq!(omega.domain.len(), p);
    let omega = omega.clone();
    LoopForm::new(p, 0, omega.degree - 1, move |pt: &LoopTuple, xs: &[LoopTangent]| {
        let n = pt.n;
        let w = TAU / n as f64;
        let spec = omega.domain.clone();
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let point = GroupPoint::new(
                spec.clone(),
                pt.loops.iter().map(|l| l.sample(j)).collect(),
            );
            let fiber = Tangent {
                mats: pt.loops.iter().map(|l| l.deriv_sample(j)).collect(),
            };
            let mut args = Vec::with_capacity(omega.degree);
            args.push(fiber);
            for x in xs {
                args.push(Tangent {
                    mats: x
                        .parts
                        .iter()
                        .zip(&pt.loops)
                        .map(|(part, l)| part.sample(l, j))
                        .collect(),
                });
            }
            total += omega.eval(&point, &args);
        }
        total * w
    })
}

/// Displace every factor of the tuple along a generator tangent:
/// loops get appended generator terms, circles rotate at their rates.
pub fn displace_tuple(pt: &LoopTuple, x: &LoopTangent, s: f64) -> Result<LoopTuple, LoopError> {
    let algs = x.gen_parts()?;
    let loops = pt
        .loops
        .iter()
        .zip(&algs)
        .map(|(l, a)| l.displace(a, s))
        .collect();
    let circles = pt
        .circles
        .iter()
        .zip(&x.rates)
        .map(|(z, rate)| *z * Complex64::from_polar(1.0, rate * s))
        .collect();
    LoopTuple::new(loops, circles)
}

/// Loop-space exterior derivative: the left-invariant-extension formula
/// with pointwise brackets and generator displacements.
pub fn d_loop(form: &LoopForm, scheme: FdScheme) -> LoopForm {
    let form = form.clone();
    let k = form.degree;
    LoopForm::new(form.p, form.q, k + 1, move |pt, xs| {
        let h = scheme.step;
        let central = |x: &LoopTangent, others: &[&LoopTangent], step: f64| -> Complex64 {
            let plus = displace_tuple(pt, x, step).expect("generator tangents");
            let minus = displace_tuple(pt, x, -step).expect("generator tangents");
            let args: Vec<LoopTangent> = others.iter().map(|o| (*o).clone()).collect();
            (form.eval(&plus, &args) - form.eval(&minus, &args)) / (2.0 * step)
        };
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..=k {
            let others: Vec<&LoopTangent> = (0..=k).filter(|&j| j != i).map(|j| &xs[j]).collect();
            let d = if scheme.richardson {
                (central(&xs[i], &others, h / 2.0) * 4.0 - central(&xs[i], &others, h)) / 3.0
            } else {
                central(&xs[i], &others, h)
            };
            total += if i % 2 == 0 { d } else { -d };
        }
        for i in 0..=k {
            for j in i + 1..=k {
                let ai = xs[i].gen_parts().expect("generator tangents");
                let aj = xs[j].gen_parts().expect("generator tangents");
                let bracket = LoopTangent {
                    parts: ai
                        .iter()
                        .zip(&aj)
                        .map(|(a, b)| TangentRep::Gen(a.bracket(b)))
                        .collect(),
                    rates: vec![0.0; xs[i].rates.len()],
                };
                let mut args = vec![bracket];
                for l in 0..=k {
                    if l != i && l != j {
                        args.push(xs[l].clone());
                    }
                }
                let sgn = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                total += form.eval(pt, &args) * sgn;
            }
        }
        total
    })
}

/// Horizontal face ε_i on loop tuples: pointwise deletion/multiplication on
/// the loop factors, exact on points, sample-level on pushed tangents.
pub fn loop_face_apply(pt: &LoopTuple, i: usize) -> LoopTuple {
    let p = pt.loops.len();
    assert!(i <= p && p >= 1);
    let mut loops = Vec::with_capacity(p - 1);
    if i == 0 {
        loops.extend(pt.loops[1..].iter().cloned());
    } else if i == p {
        loops.extend(pt.loops[..p - 1].iter().cloned());
    } else {
        loops.extend(pt.loops[..i - 1].iter().cloned());
        loops.push(pt.loops[i - 1].multiply(&pt.loops[i]));
        loops.extend(pt.loops[i + 1..].iter().cloned());
    }
    LoopTuple::new(loops, pt.circles.clone()).expect("shared grid")
}

pub fn loop_face_push(pt: &LoopTuple, x: &LoopTangent, i: usize) -> LoopTangent {
    let p = pt.loops.len();
    let n = pt.n;
    let mut parts = Vec::with_capacity(p - 1);
    if i == 0 {
        parts.extend(x.parts[1..].iter().cloned());
    } else if i == p {
        parts.extend(x.parts[..p - 1].iter().cloned());
    } else {
        parts.extend(x.parts[..i - 1].iter().cloned());
        let merged: Vec<CMat> = (0..n)
            .map(|j| {
                // d(γ_{i-1} γ_i) = u_{i-1} γ_i + γ_{i-1} u_i pointwise
                x.parts[i - 1].sample(&pt.loops[i - 1], j) * pt.loops[i].sample(j)
                    + pt.loops[i - 1].sample(j) * x.parts[i].sample(&pt.loops[i], j)
            })
            .collect();
        parts.push(TangentRep::Samples(merged));
        parts.extend(x.parts[i + 1..].iter().cloned());
    }
    LoopTangent {
        parts,
        rates: x.rates.clone(),
    }
}

/// Vertical face ε_i^{S¹} on loop tuples: circle deletion/multiplication;
/// the last face conjugates every loop by the embedded z_q, acting
/// sample-wise on pushed tangents.
pub fn loop_vertical_face_apply(pt: &LoopTuple, i: usize) -> LoopTuple {
    let q = pt.circles.len();
    assert!(i <= q && q >= 1);
    if i == q {
        let z = pt.circles[q - 1];
        let zh = embed_circle(z);
        let loops = pt.loops.iter().map(|l| l.conjugate(&zh)).collect();
        LoopTuple::new(loops, pt.circles[..q - 1].to_vec()).expect("shared grid")
    } else if i == 0 {
        LoopTuple::new(pt.loops.clone(), pt.circles[1..].to_vec()).expect("shared grid")
    } else {
        let mut circles = pt.circles[..i - 1].to_vec();
        circles.push(pt.circles[i - 1] * pt.circles[i]);
        circles.extend_from_slice(&pt.circles[i + 1..]);
        LoopTuple::new(pt.loops.clone(), circles).expect("shared grid")
    }
}

pub fn loop_vertical_face_push(pt: &LoopTuple, x: &LoopTangent, i: usize) -> LoopTangent {
    let q = pt.circles.len();
    if i == q {
        let z = pt.circles[q - 1];
        let zh = embed_circle(z);
        let zh_inv = zh.inverse();
        let ah = embed_circle_rate(x.rates[q - 1]);
        let parts = x
            .parts
            .iter()
            .zip(&pt.loops)
            .map(|(part, l)| {
                let pushed: Vec<CMat> = (0..pt.n)
                    .map(|j| {
                        let g = l.sample(j);
                        let u = part.sample(l, j);
                        zh * (ah * g - g * ah + u) * zh_inv
                    })
                    .collect();
                TangentRep::Samples(pushed)
            })
            .collect();
        LoopTangent {
            parts,
            rates: x.rates[..q - 1].to_vec(),
        }
    } else if i == 0 {
        LoopTangent {
            parts: x.parts.clone(),
            rates: x.rates[1..].to_vec(),
        }
    } else {
        let mut rates = x.rates[..i - 1].to_vec();
        rates.push(x.rates[i - 1] + x.rates[i]);
        rates.extend_from_slice(&x.rates[i + 1..]);
        LoopTangent {
            parts: x.parts.clone(),
            rates,
        }
    }
}

/// Pullback along the horizontal face ε_i.
pub fn loop_face_pullback(form: &LoopForm, i: usize) -> LoopForm {
    let form = form.clone();
    LoopForm::new(form.p + 1, form.q, form.degree, move |pt, xs| {
        let target = loop_face_apply(pt, i);
        let pushed: Vec<LoopTangent> = xs.iter().map(|x| loop_face_push(pt, x, i)).collect();
        form.eval(&target, &pushed)
    })
}

/// `d′ = Σ (−1)^i ε_i*` into level p+1.
pub fn d_loop_horizontal(form: &LoopForm) -> LoopForm {
    let p1 = form.p + 1;
    let mut acc: Option<LoopForm> = None;
    for i in 0..=p1 {
        let term = loop_face_pullback(form, i);
        let term = if i % 2 == 0 { term } else { term.neg() };
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term),
        });
    }
    acc.unwrap()
}

/// A random band-limited loop: Haar base point times a few generator terms.
pub fn random_loop(rng: &mut impl Rng, band: usize, amplitude: f64, n: usize) -> LoopPoint {
    let base = Factor::SU2.haar_sample(rng);
    let terms = (0..2)
        .map(|_| {
            (
                TrigPoly::random(rng, band, amplitude),
                random_su2_direction(rng),
            )
        })
        .collect();
    LoopPoint::new(base, terms, n)
}

/// A random band-limited loop-algebra element.
pub fn random_loop_alg(rng: &mut impl Rng, band: usize, amplitude: f64) -> LoopAlg {
    let terms = (0..2)
        .map(|_| {
            (
                TrigPoly::random(rng, band, amplitude),
                random_su2_direction(rng),
            )
        })
        .collect();
    LoopAlg { terms }
}

fn random_su2_direction(rng: &mut impl Rng) -> CMat {
    let c: [f64; 3] = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    let norm = (c.iter().map(|x| x * x).sum::<f64>()).sqrt().max(1e-9);
    crate::cmat::i_pauli(1) * (c[0] / norm)
        + crate::cmat::i_pauli(2) * (c[1] / norm)
        + crate::cmat::i_pauli(3) * (c[2] / norm)
}

/// Configuration of the loop-level checks.
#[derive(Clone, Copy, Debug)]
pub struct LoopCfg {
    pub seed: u64,
    pub samples: usize,
    pub n: usize,
    pub band: usize,
    pub amplitude: f64,
    pub fd: FdScheme,
    pub tol_algebraic: f64,
    pub tol_fd: f64,
}

impl Default for LoopCfg {
    fn default() -> Self {
        LoopCfg {
            seed: 20240801,
            samples: 60,
            n: 64,
            band: 4,
            amplitude: 0.4,
            fd: FdScheme::default(),
            tol_algebraic: 1e-10,
            tol_fd: 1e-5,
        }
    }
}

fn random_tuple(cfg: &LoopCfg, p: usize, q: usize, rng: &mut impl Rng) -> LoopTuple {
    let loops = (0..p)
        .map(|_| random_loop(rng, cfg.band, cfg.amplitude, cfg.n))
        .collect();
    let circles = (0..q)
        .map(|_| Complex64::from_polar(1.0, rng.gen::<f64>() * TAU))
        .collect();
    LoopTuple::new(loops, circles).unwrap()
}

fn random_gen_tangent(cfg: &LoopCfg, p: usize, q: usize, rng: &mut impl Rng) -> LoopTangent {
    LoopTangent {
        parts: (0..p)
            .map(|_| TangentRep::Gen(random_loop_alg(rng, cfg.band, cfg.amplitude)))
            .collect(),
        rates: (0..q).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
    }
}

/// Worst |value| of a loop form over seeded probes.
pub fn probe_loop_form_max(form: &LoopForm, cfg: &LoopCfg, stream_base: u64) -> f64 {
    (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, stream_base.wrapping_add(k as u64));
            let pt = random_tuple(cfg, form.p, form.q, &mut rng);
            let xs: Vec<LoopTangent> = (0..form.degree)
                .map(|_| random_gen_tangent(cfg, form.p, form.q, &mut rng))
                .collect();
            form.eval(&pt, &xs).norm()
        })
        .reduce(|| 0.0, residual_max)
}

/// The loop-level cocycle identities for the transgressed pair
/// (∫ev*C₁,₃, ∫ev*C₂,₂):
///
///   (i)   d(∫ev*C₁,₃) = 0 on LG
///   (ii)  d′(∫ev*C₁,₃) ± d(∫ev*C₂,₂) = 0 on LG² (sign frozen by probe)
///   (iii) d′(∫ev*C₂,₂) = 0 on LG³ (exact algebra + quadrature only)
///
/// plus the d-vs-transgression commutation sign, naturality of the
/// transgression under face maps, reparametrization invariance and the
/// spectral-resolution control, with a failing negative control.
pub fn loop_nerve_cocycle_check(cfg: &LoopCfg) -> Result<ResidualReport, LoopError> {
    let mut report = ResidualReport::default();
    let c13 = crate::forms::trace_cubed_form(Factor::SU2, None);
    let c22 = crate::forms::chern_c22(crate::forms::ChernVariant::Su2);
    let phi13 = transgress(&c13, 1);
    let phi22 = transgress(&c22, 2);

    // (i) d Φ₁₃ = 0
    let d_phi13 = d_loop(&phi13, cfg.fd);
    let max_i = probe_loop_form_max(&d_phi13, cfg, 0x1000_0000);
    report.push(IdentityResidual::new(
        "loop_identity_i",
        "d(int ev* C13) = 0 on LG",
        cfg.samples,
        max_i,
        cfg.tol_fd,
    ));

    // transgression-vs-d commutation sign on C₂,₂ (degree 2 → both routes live)
    let d_then = d_loop(&transgress(&c22, 2), cfg.fd);
    let then_d = transgress(&exterior_derivative(&c22, cfg.fd), 2);
    let trans_cfg = LoopCfg {
        samples: cfg.samples.min(20),
        ..*cfg
    };
    let (t_sign, t_frozen) = probe_sign("transgression_d_sign", cfg.tol_fd, |s| {
        let combo = d_then.add(&then_d.scale(Complex64::new(-s, 0.0)));
        probe_loop_form_max(&combo, &trans_cfg, 0x2000_0000)
    })?;
    let commute_res = {
        let combo = d_then.add(&then_d.scale(Complex64::new(-t_sign, 0.0)));
        probe_loop_form_max(&combo, &trans_cfg, 0x2000_0000)
    };
    report.push(
        IdentityResidual::new(
            "transgression_d_commutation",
            "d(int ev* w) = ± int ev*(dw) with the frozen sign",
            trans_cfg.samples,
            commute_res,
            cfg.tol_fd,
        )
        .with_signs(&[&t_frozen]),
    );

    // (ii) d′Φ₁₃ ± dΦ₂₂ = 0 with frozen sign
    let dprime_phi13 = d_loop_horizontal(&phi13);
    let d_phi22 = d_loop(&phi22, cfg.fd);
    let ii_cfg = LoopCfg {
        samples: cfg.samples.min(30),
        ..*cfg
    };
    let (ii_sign, ii_frozen) = probe_sign("loop_cocycle_relative_sign", cfg.tol_fd, |s| {
        let combo = dprime_phi13.add(&d_phi22.scale(Complex64::new(s, 0.0)));
        probe_loop_form_max(&combo, &ii_cfg, 0x3000_0000)
    })?;
    let combo_ii = dprime_phi13.add(&d_phi22.scale(Complex64::new(ii_sign, 0.0)));
    let max_ii = probe_loop_form_max(&combo_ii, cfg, 0x3100_0000);
    report.push(
        IdentityResidual::new(
            "loop_identity_ii",
            "d'(int ev* C13) ± d(int ev* C22) = 0 on LG^2",
            cfg.samples,
            max_ii,
            cfg.tol_fd,
        )
        .with_signs(&[&ii_frozen]),
    );

    // negative control: drop the C₂,₂ layer entirely
    let control = probe_loop_form_max(&dprime_phi13, &ii_cfg, 0x3200_0000);
    let gap = 100.0 * cfg.tol_fd / control.max(f64::MIN_POSITIVE);
    report.push(IdentityResidual::new(
        "loop_negative_control",
        "dropping the C22 layer must break identity (ii) (gap = 100·tol/residual)",
        ii_cfg.samples,
        gap,
        1.0,
    ));

    // (iii) d′Φ₂₂ = 0, exact algebra and quadrature only
    let dprime_phi22 = d_loop_horizontal(&phi22);
    let max_iii = probe_loop_form_max(&dprime_phi22, cfg, 0x4000_0000);
    report.push(IdentityResidual::new(
        "loop_identity_iii",
        "d'(int ev* C22) = 0 on LG^3",
        cfg.samples,
        max_iii,
        cfg.tol_algebraic,
    ));

    // naturality: transgression commutes with the pointwise face maps
    let max_nat = naturality_residual(cfg);
    report.push(IdentityResidual::new(
        "transgression_naturality",
        "int ev*(e_i* w) = e_i*(int ev* w) for the multiplication/deletion faces",
        cfg.samples,
        max_nat,
        1e-10,
    ));

    // reparametrization invariance of transgressed values
    let max_rot = reparametrization_residual(cfg, &phi22);
    report.push(IdentityResidual::new(
        "loop_reparametrization",
        "rotating the loop parameter leaves transgressed values unchanged",
        cfg.samples,
        max_rot,
        1e-10,
    ));

    // spectral resolution control: N and 2N agree on band-limited data
    let max_res = resolution_residual(cfg);
    report.push(IdentityResidual::new(
        "transgression_resolution",
        "doubling the sample count moves band-limited transgressed values by < 1e-10",
        cfg.samples.min(20),
        max_res,
        1e-10,
    ));

    report.push_sign(t_frozen);
    report.push_sign(ii_frozen);
    Ok(report)
}

fn naturality_residual(cfg: &LoopCfg) -> f64 {
    let c13 = crate::forms::trace_cubed_form(Factor::SU2, None);
    let nerve = crate::nerve::Nerve::simplicial(GroupSpec::single(Factor::SU2));
    (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0x5000_0000 + k as u64);
            let pt = random_tuple(cfg, 2, 0, &mut rng);
            let xs: Vec<LoopTangent> = (0..2)
                .map(|_| random_gen_tangent(cfg, 2, 0, &mut rng))
                .collect();
            let mut worst: f64 = 0.0;
            for i in 0..=2usize {
                // ε_i*(∫ev*ω)
                let pulled = loop_face_pullback(&transgress(&c13, 1), i);
                let lhs = pulled.eval(&pt, &xs);
                // ∫ev*(ε_i*ω)
                let face = nerve.horizontal_face(2, 0, i).unwrap();
                let omega_pulled = crate::forms::pullback(&face, &c13).unwrap();
                let rhs = transgress(&omega_pulled, 2).eval(&pt, &xs);
                worst = worst.max((lhs - rhs).norm());
            }
            worst
        })
        .reduce(|| 0.0, residual_max)
}

fn reparametrization_residual(cfg: &LoopCfg, phi22: &LoopForm) -> f64 {
    (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0x6000_0000 + k as u64);
            let pt = random_tuple(cfg, 2, 0, &mut rng);
            let xs: Vec<LoopTangent> = (0..1)
                .map(|_| random_gen_tangent(cfg, 2, 0, &mut rng))
                .collect();
            let c = rng.gen::<f64>() * TAU;
            let rotated_pt = LoopTuple::new(
                pt.loops.iter().map(|l| l.rotate(c)).collect(),
                pt.circles.clone(),
            )
            .unwrap();
            let rotated_xs: Vec<LoopTangent> = xs
                .iter()
                .map(|x| LoopTangent {
                    parts: x
                        .parts
                        .iter()
                        .map(|p| match p {
                            TangentRep::Gen(a) => TangentRep::Gen(a.rotate(c)),
                            TangentRep::Samples(_) => unreachable!(),
                        })
                        .collect(),
                    rates: x.rates.clone(),
                })
                .collect();
            (phi22.eval(&pt, &xs) - phi22.eval(&rotated_pt, &rotated_xs)).norm()
        })
        .reduce(|| 0.0, residual_max)
}

fn resolution_residual(cfg: &LoopCfg) -> f64 {
    let c13 = crate::forms::trace_cubed_form(Factor::SU2, None);
    let fine_band = 8;
    let amplitude = 0.25;
    (0..cfg.samples.min(20))
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0x7000_0000 + k as u64);
            let base = Factor::SU2.haar_sample(&mut rng);
            let terms: Vec<(TrigPoly, CMat)> = (0..2)
                .map(|_| {
                    (
                        TrigPoly::random(&mut rng, fine_band, amplitude),
                        random_su2_direction(&mut rng),
                    )
                })
                .collect();
            let alg_terms: Vec<(TrigPoly, CMat)> = (0..2)
                .map(|_| {
                    (
                        TrigPoly::random(&mut rng, fine_band, amplitude),
                        random_su2_direction(&mut rng),
                    )
                })
                .collect();
            let mut values = Vec::new();
            for n in [cfg.n, cfg.n * 2] {
                let lp = LoopPoint::new(base, terms.clone(), n);
                let tuple = LoopTuple::new(vec![lp], vec![]).unwrap();
                let tangent = LoopTangent {
                    parts: vec![TangentRep::Gen(LoopAlg {
                        terms: alg_terms.clone(),
                    })],
                    rates: vec![],
                };
                let phi = transgress(&c13, 1);
                values.push(phi.eval(&tuple, &[tangent.clone(), tangent_second(&alg_terms)]));
            }
            (values[0] - values[1]).norm()
        })
        .reduce(|| 0.0, residual_max)
}

fn tangent_second(terms: &[(TrigPoly, CMat)]) -> LoopTangent {
    // a deterministic second tangent built from the same data, reordered
    let swapped: Vec<(TrigPoly, CMat)> = terms
        .iter()
        .rev()
        .map(|(f, b)| (f.clone(), *b * Complex64::new(0.0, 1.0)))
        .collect();
    LoopTangent {
        parts: vec![TangentRep::Gen(LoopAlg { terms: swapped })],
        rates: vec![],
    }
}

/// Bisimplicial commutation of the semidirect loop faces at sampled probes.
pub fn semidirect_commutation_residual(cfg: &LoopCfg) -> f64 {
    (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(cfg.seed, 0x8000_0000 + k as u64);
            let pt = random_tuple(cfg, 2, 1, &mut rng);
            let x = random_gen_tangent(cfg, 2, 1, &mut rng);
            let mut worst: f64 = 0.0;
            for i in 0..=2usize {
                for jv in 0..=1usize {
                    // horizontal then vertical
                    let a_pt = loop_vertical_face_apply(&loop_face_apply(&pt, i), jv);
                    let a_x = loop_vertical_face_push(
                        &loop_face_apply(&pt, i),
                        &loop_face_push(&pt, &x, i),
                        jv,
                    );
                    // vertical then horizontal
                    let b_mid = loop_vertical_face_apply(&pt, jv);
                    let b_pt = loop_face_apply(&b_mid, i);
                    let b_x = loop_face_push(&b_mid, &loop_vertical_face_push(&pt, &x, jv), i);
                    worst = worst.max(tuple_dist(&a_pt, &b_pt));
                    worst = worst.max(tangent_sample_dist(&a_pt, &a_x, &b_pt, &b_x));
                }
            }
            worst
        })
        .reduce(|| 0.0, residual_max)
}

fn tuple_dist(a: &LoopTuple, b: &LoopTuple) -> f64 {
    let mut worst: f64 = 0.0;
    for (la, lb) in a.loops.iter().zip(&b.loops) {
        for j in 0..a.n {
            worst = worst.max(la.sample(j).dist(&lb.sample(j)));
            worst = worst.max(la.deriv_sample(j).dist(&lb.deriv_sample(j)));
        }
    }
    for (za, zb) in a.circles.iter().zip(&b.circles) {
        worst = worst.max((za - zb).norm());
    }
    worst
}

fn tangent_sample_dist(
    apt: &LoopTuple,
    a: &LoopTangent,
    bpt: &LoopTuple,
    b: &LoopTangent,
) -> f64 {
    let mut worst: f64 = 0.0;
    for ((pa, la), (pb, lb)) in a
        .parts
        .iter()
        .zip(&apt.loops)
        .zip(b.parts.iter().zip(&bpt.loops))
    {
        for j in 0..apt.n {
            worst = worst.max(pa.sample(la, j).dist(&pb.sample(lb, j)));
        }
    }
    for (ra, rb) in a.rates.iter().zip(&b.rates) {
        worst = worst.max((ra - rb).abs());
    }
    worst
}
