//! Uncertainty relations for pairs of non-Hermitian operators, evaluated
//! directly from states and operators or from the Gram matrix `T`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmath::{
    expectation, gram_matrix, variance, OperatorMatrix, StateVector, TMagnitudes, TMatrix,
};

/// Additive tolerance on the slack of every relation.
pub const SLACK_TOL: f64 = 1e-10;
/// Below this magnitude the triple product `T_23 T_12 T_31` has no phase.
pub const TRIPLE_PRODUCT_FLOOR: f64 = 1e-14;
/// Below this `|T_22 T_33|` the normalized relation is undefined.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
    /// Phase Φ of `T_23 T_12 T_31` in (−π, π]; `None` when the product vanishes.
    pub phase: Option<f64>,
    pub equality_expected: bool,
}

impl RelationReport {
    fn new(lhs: f64, rhs: f64, slack: f64, phase: Option<f64>, equality_expected: bool) -> Self {
        Self {
            lhs,
            rhs,
            slack,
            satisfied: slack >= -SLACK_TOL,
            phase,
            equality_expected,
        }
    }

    /// True when the triple product is real and negative, where the
    /// absolute-value form of the real-case equality no longer applies.
    pub fn phase_is_pi(&self) -> bool {
        self.phase.is_some_and(|p| p.cos() < 0.0 && p.sin().abs() < 1e-9)
    }
}

/// Maps `atan2` output into (−π, π].
fn principal(phi: f64) -> f64 {
    if phi <= -PI {
        phi + 2.0 * PI
    } else {
        phi
    }
}

fn phase_of(t: &TMatrix) -> Option<f64> {
    let tp = t.triple_product();
    (tp.norm() > TRIPLE_PRODUCT_FLOOR).then(|| principal(tp.arg()))
}

/// Product relation `|⟨A†B⟩ − ⟨A†⟩⟨B⟩|² ≤ ⟨(ΔA)²⟩⟨(ΔB)²⟩`.
pub fn check_product_relation(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    state: &StateVector,
) -> Result<RelationReport> {
    let t = gram_matrix(a, b, state)?;
    let mean_a = expectation(a, state)?;
    let mean_b = expectation(b, state)?;
    let cross = expectation(&a.adjoint().mul(b), state)?;
    let lhs = (cross - mean_a.conj() * mean_b).norm_sqr();
    let rhs = variance(a, state)? * variance(b, state)?;
    Ok(RelationReport::new(
        lhs,
        rhs,
        rhs - lhs,
        phase_of(&t),
        state.dim() == 2,
    ))
}

/// Normalized relation
/// `|T12|²/|T22| + |T31|²/|T33| + |T23|²/|T22 T33| − 2|T23 T12 T31|/|T22 T33| ≤ 1`.
pub fn check_qubit_relation(t: &TMatrix) -> Result<RelationReport> {
    let (t22, t33) = (t.abs(2, 2), t.abs(3, 3));
    let den = t22 * t33;
    if !(den > DENOMINATOR_FLOOR) {
        return Err(Error::RelationUndefined(format!(
            "|T22 T33| = {den:e} is zero"
        )));
    }
    let lhs = t.abs(1, 2).powi(2) / t22 + t.abs(3, 1).powi(2) / t33 + t.abs(2, 3).powi(2) / den
        - 2.0 * t.triple_product().norm() / den;
    let phase = phase_of(t);
    let qubit = t.source().is_some_and(|s| s.state.dim() == 2);
    let tight = phase.is_some_and(|p| p.cos() >= 1.0 - SLACK_TOL);
    Ok(RelationReport::new(lhs, 1.0, 1.0 - lhs, phase, qubit && tight))
}

/// Real-case equality
/// `|T12|²|T33| + |T13|²|T22| + |T23|² − 2|T23 T12 T31| = |T22 T33|`.
///
/// Only defined when the source operators and state are real within 1e-12.
/// Instances whose triple product is negative (Φ = π) are reported with
/// `equality_expected = false`.
pub fn check_real_equality(t: &TMatrix) -> Result<RelationReport> {
    const REAL_TOL: f64 = 1e-12;
    let src = t
        .source()
        .ok_or_else(|| Error::NotReal("no source operators to validate".into()))?;
    if !src.state.is_real(REAL_TOL) {
        return Err(Error::NotReal("input state has complex amplitudes".into()));
    }
    if !src.a.is_real_within(REAL_TOL) || !src.b.is_real_within(REAL_TOL) {
        return Err(Error::NotReal("operator has complex entries".into()));
    }
    if src.state.dim() != 2 {
        return Err(Error::UnsupportedDimension(src.state.dim()));
    }
    let lhs = t.abs(1, 2).powi(2) * t.abs(3, 3)
        + t.abs(1, 3).powi(2) * t.abs(2, 2)
        + t.abs(2, 3).powi(2)
        - 2.0 * t.triple_product().norm();
    let rhs = t.abs(2, 2) * t.abs(3, 3);
    let phase = phase_of(t);
    let mut report = RelationReport::new(lhs, rhs, rhs - lhs, phase, true);
    report.equality_expected = !report.phase_is_pi();
    Ok(report)
}

/// Real-case equality evaluated on measured magnitudes, `(lhs, rhs)`.
pub fn real_equality_terms(m: &TMagnitudes) -> (f64, f64) {
    let lhs = m.t12 * m.t12 * m.t33 + m.t13 * m.t13 * m.t22 + m.t23 * m.t23
        - 2.0 * m.t23 * m.t12 * m.t13;
    (lhs, m.t22 * m.t33)
}

/// Left side of the normalized qubit relation on measured magnitudes.
pub fn qubit_relation_lhs(m: &TMagnitudes) -> Result<f64> {
    let den = m.t22 * m.t33;
    if !(den > DENOMINATOR_FLOOR) {
        return Err(Error::RelationUndefined(format!(
            "|T22 T33| = {den:e} is zero"
        )));
    }
    Ok(m.t12 * m.t12 / m.t22 + m.t13 * m.t13 / m.t33 + m.t23 * m.t23 / den
        - 2.0 * m.t23 * m.t12 * m.t13 / den)
}

/// Φ = arg(T_23 T_12 T_31).
pub fn equality_phase(t: &TMatrix) -> Result<f64> {
    let tp = t.triple_product();
    phase_of(t).ok_or(Error::PhaseUndefined {
        magnitude: tp.norm(),
    })
}

/// The three terms of the chain
/// `(|T12|²|T33| + |T13|²|T22| + |T23|² − |T22 T33|) ≤ 2|T23T12T31| cosΦ ≤ 2|T23T12T31|`.
pub fn equality_chain(t: &TMatrix) -> [f64; 3] {
    let tp = t.triple_product();
    let head = t.abs(1, 2).powi(2) * t.abs(3, 3) + t.abs(1, 3).powi(2) * t.abs(2, 2)
        + t.abs(2, 3).powi(2)
        - t.abs(2, 2) * t.abs(3, 3);
    [head, 2.0 * tp.re, 2.0 * tp.norm()]
}
