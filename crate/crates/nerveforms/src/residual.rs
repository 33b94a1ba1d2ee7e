//! Residual reports and the sign-probe mechanism.
//!
//! Every verified identity produces one [`IdentityResidual`] row: the
//! identity's name, a human-readable anchor stating the identity itself, the
//! probe count, the worst absolute residual seen, the tolerance it is held
//! to, and the pass/fail verdict (`pass ⇔ max_residual < tolerance`; NaN
//! never passes).
//!
//! Relative sign conventions that the source formulas leave ambiguous are
//! not guessed: [`probe_choice`] evaluates the residual for every candidate,
//! keeps the unique one under tolerance, and freezes it together with the
//! evidence for all rejected candidates. Ambiguous or empty outcomes are a
//! hard failure with their own exit code.

use serde::Serialize;
use thiserror::Error;

/// A frozen convention choice with the residual evidence for each candidate.
#[derive(Clone, Debug, Serialize)]
pub struct FrozenSign {
    pub name: String,
    pub choice: String,
    /// (candidate label, residual) for every candidate that was probed.
    pub evidence: Vec<(String, f64)>,
}

/// One verified identity.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityResidual {
    pub name: String,
    /// The identity being checked, stated as a formula.
    pub anchor: String,
    pub probes: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Names of frozen sign choices this identity depends on.
    pub signs_used: Vec<String>,
}

impl IdentityResidual {
    pub fn new(
        name: impl Into<String>,
        anchor: impl Into<String>,
        probes: usize,
        max_residual: f64,
        tolerance: f64,
    ) -> Self {
        IdentityResidual {
            name: name.into(),
            anchor: anchor.into(),
            probes,
            max_residual,
            tolerance,
            pass: max_residual < tolerance,
            signs_used: Vec::new(),
        }
    }

    pub fn with_signs(mut self, signs: &[&FrozenSign]) -> Self {
        self.signs_used = signs.iter().map(|s| s.name.clone()).collect();
        self
    }
}

/// A bundle of identity rows plus the sign conventions they used.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<IdentityResidual>,
    pub signs: Vec<FrozenSign>,
}

impl ResidualReport {
    pub fn push(&mut self, entry: IdentityResidual) {
        self.entries.push(entry);
    }

    pub fn push_sign(&mut self, sign: FrozenSign) {
        self.signs.push(sign);
    }

    pub fn merge(&mut self, other: ResidualReport) {
        self.entries.extend(other.entries);
        self.signs.extend(other.signs);
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

#[derive(Debug, Error)]
#[error("sign probe '{name}' found no unique consistent choice: {evidence:?}")]
pub struct SignProbeError {
    pub name: String,
    pub evidence: Vec<(String, f64)>,
}

/// Pick the unique candidate whose residual is below `tol`. Fails loudly if
/// none or several qualify.
pub fn probe_choice(
    name: &str,
    tol: f64,
    candidates: Vec<(String, f64)>,
) -> Result<(usize, FrozenSign), SignProbeError> {
    let hits: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.is_finite() && *r < tol)
        .map(|(i, _)| i)
        .collect();
    if hits.len() != 1 {
        return Err(SignProbeError {
            name: name.to_string(),
            evidence: candidates,
        });
    }
    let idx = hits[0];
    let frozen = FrozenSign {
        name: name.to_string(),
        choice: candidates[idx].0.clone(),
        evidence: candidates,
    };
    Ok((idx, frozen))
}

/// Probe a ±1 relative sign: `residual_of(+1)` vs `residual_of(−1)`.
pub fn probe_sign(
    name: &str,
    tol: f64,
    mut residual_of: impl FnMut(f64) -> f64,
) -> Result<(f64, FrozenSign), SignProbeError> {
    let plus = residual_of(1.0);
    let minus = residual_of(-1.0);
    let (idx, frozen) = probe_choice(
        name,
        tol,
        vec![("+1".to_string(), plus), ("-1".to_string(), minus)],
    )?;
    Ok((if idx == 0 { 1.0 } else { -1.0 }, frozen))
}

/// Max-reduction that propagates NaN instead of silently dropping it.
pub fn residual_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}
