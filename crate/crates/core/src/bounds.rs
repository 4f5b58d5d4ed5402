//! Certificates for a candidate state `ρ` against the maximum-entropy state
//! `σ`: the entropy-gap identity for relative entropy, Pinsker-type trace
//! distance bounds, observable deviations on `V = span{I, X_i}`, and the
//! Fannes–Audenaert entropy continuity bound.

use crate::dual::{norm, GibbsSolution};
use crate::error::{Error, Result};
use crate::linalg::{
    relative_entropy, trace_norm_distance, von_neumann_entropy, DensityMatrix, HermitianOperator,
};
use crate::moments::{moment_map, ConstraintSet, MomentVector};

/// Slack added to every bound comparison.
pub const BOUND_SLACK: f64 = 1e-8;
/// A state counts as reproducing the target moments within this distance.
pub const FEASIBLE_MOMENT_TOL: f64 = 1e-8;
/// Residual allowed when testing `A ∈ V`.
pub const SPAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `D(ρ‖σ)`.
    pub lhs: f64,
    /// `S(σ) − S(ρ) + λ·Δm`.
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableCheck {
    /// `|tr((ρ − σ) A)|`.
    pub lhs: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FannesCheck {
    /// `|S(ρ) − S(σ)|`.
    pub entropy_diff: f64,
    /// `δ ln(d − 1) + h₂(δ)` with `δ = ½‖ρ − σ‖₁`.
    pub bound: f64,
    pub delta: f64,
}

fn require_interior(solution: &GibbsSolution) -> Result<()> {
    if solution.is_interior() {
        Ok(())
    } else {
        Err(Error::IdentityUnavailable)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sqrt_clamped(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

/// Binary entropy in nats, `h₂(0) = h₂(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Both sides of `D(ρ‖σ) = S(σ) − S(ρ) + Σ λ_i (tr(ρ X_i) − m_i)`.
pub fn entropy_gap_identity(
    constraints: &ConstraintSet,
    rho: &DensityMatrix,
    solution: &GibbsSolution,
    m: &MomentVector,
) -> Result<IdentityCheck> {
    require_interior(solution)?;
    constraints.check_len(m.len())?;
    let lhs = relative_entropy(rho, &solution.sigma)?;
    let delta_m = moment_map(rho, constraints)?.difference(m);
    let rhs = solution.entropy - von_neumann_entropy(rho) + dot(&solution.lambda, &delta_m);
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// `√(2(S(σ) − S(ρ)))` for a state reproducing the target moments.
pub fn pinsker_exact_rate(
    constraints: &ConstraintSet,
    rho: &DensityMatrix,
    solution: &GibbsSolution,
) -> Result<f64> {
    let mismatch = moment_map(rho, constraints)?.distance(&solution.target);
    if mismatch > FEASIBLE_MOMENT_TOL {
        return Err(Error::Precondition(format!(
            "state misses the target moments by {mismatch:e}"
        )));
    }
    Ok(sqrt_clamped(2.0 * (solution.entropy - von_neumann_entropy(rho))))
}

/// `√(2|S(σ) − S(ρ)|) + √(2‖λ‖‖Δm‖)` with Euclidean norms.
pub fn pinsker_mixed_rate(
    constraints: &ConstraintSet,
    rho: &DensityMatrix,
    solution: &GibbsSolution,
    m: &MomentVector,
) -> Result<f64> {
    require_interior(solution)?;
    constraints.check_len(m.len())?;
    let gap = solution.entropy - von_neumann_entropy(rho);
    let delta_m = moment_map(rho, constraints)?.difference(m);
    Ok(sqrt_clamped(2.0 * gap.abs()) + sqrt_clamped(2.0 * solution.lambda_norm() * norm(&delta_m)))
}

/// `|tr((ρ − σ) A)|` and `√(2(S(σ) − S(ρ) + λ·Δm))` for `A ∈ V`, `‖A‖ ≤ 1`.
pub fn observable_rate(
    constraints: &ConstraintSet,
    rho: &DensityMatrix,
    solution: &GibbsSolution,
    m: &MomentVector,
    a: &HermitianOperator,
) -> Result<ObservableCheck> {
    require_interior(solution)?;
    if a.dim() != constraints.dim() {
        return Err(Error::DimensionMismatch {
            expected: constraints.dim(),
            got: a.dim(),
        });
    }
    let (_, residual) = constraints.project_onto_span(a);
    if residual > SPAN_TOL * a.frobenius_norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "observable lies outside span{{I, X_i}} (residual {residual:e})"
        )));
    }
    let op_norm = a.operator_norm()?;
    if op_norm > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "observable norm {op_norm} exceeds one"
        )));
    }
    let lhs = (rho.expectation(a) - solution.sigma.expectation(a)).abs();
    let bound = identity_bound(constraints, rho, solution, m)?;
    Ok(ObservableCheck { lhs, bound })
}

fn identity_bound(
    constraints: &ConstraintSet,
    rho: &DensityMatrix,
    solution: &GibbsSolution,
    m: &MomentVector,
) -> Result<f64> {
    let gap = solution.entropy - von_neumann_entropy(rho);
    let delta_m = moment_map(rho, constraints)?.difference(m);
    Ok(sqrt_clamped(2.0 * (gap + dot(&solution.lambda, &delta_m))))
}

/// Fannes–Audenaert continuity bound on `|S(ρ) − S(σ)|`.
pub fn fannes_audenaert(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<FannesCheck> {
    let delta = 0.5 * trace_norm_distance(rho, sigma)?;
    let delta = delta.min(1.0);
    let d = rho.dim();
    let dimension_term = if d > 2 { delta * ((d - 1) as f64).ln() } else { 0.0 };
    Ok(FannesCheck {
        entropy_diff: (von_neumann_entropy(rho) - von_neumann_entropy(sigma)).abs(),
        bound: dimension_term + binary_entropy(delta),
        delta,
    })
}

/// Every certificate quantity for `ρ` against a solved maximum-entropy state.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// `D(ρ‖σ)`, possibly `+∞`.
    pub relative_entropy: f64,
    /// `S(σ) − S(ρ)`.
    pub entropy_gap: f64,
    /// `m(ρ) − m`.
    pub moment_mismatch: Vec<f64>,
    /// `|D − (gap + λ·Δm)|`; interior solutions with finite `D` only.
    pub identity_residual: Option<f64>,
    /// Present when `ρ` reproduces the target moments.
    pub pinsker_exact_bound: Option<f64>,
    /// Interior solutions only.
    pub pinsker_mixed_bound: Option<f64>,
    pub trace_distance: f64,
    pub entropy_difference: f64,
    pub fannes_bound: f64,
    /// Interior solutions only.
    pub observable_rate_bound: Option<f64>,
    pub interior: bool,
}

impl CertificateReport {
    /// Bound contracts that fail on this report. Empty for a sound report.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(r) = self.identity_residual {
            if self.relative_entropy.is_finite() && !(r <= BOUND_SLACK) {
                out.push(format!("identity residual {r:e} exceeds {BOUND_SLACK:e}"));
            }
        }
        let mut check = |name: &str, bound: Option<f64>| {
            if let Some(b) = bound {
                if !(self.trace_distance <= b + BOUND_SLACK) {
                    out.push(format!(
                        "trace distance {} exceeds {name} bound {b}",
                        self.trace_distance
                    ));
                }
            }
        };
        check("exact Pinsker", self.pinsker_exact_bound);
        check("mixed Pinsker", self.pinsker_mixed_bound);
        check("observable-rate", self.observable_rate_bound);
        if !(self.entropy_difference <= self.fannes_bound + BOUND_SLACK) {
            out.push(format!(
                "entropy difference {} exceeds Fannes-Audenaert bound {}",
                self.entropy_difference, self.fannes_bound
            ));
        }
        out
    }
}

/// Fills a [`CertificateReport`]; quantities needing finite multipliers are
/// `None` for boundary-limit solutions.
pub fn certify(
    constraints: &ConstraintSet,
    rho: &DensityMatrix,
    solution: &GibbsSolution,
    m: &MomentVector,
) -> Result<CertificateReport> {
    constraints.check_len(m.len())?;
    if rho.dim() != constraints.dim() {
        return Err(Error::DimensionMismatch {
            expected: constraints.dim(),
            got: rho.dim(),
        });
    }
    let sigma = &solution.sigma;
    let d = relative_entropy(rho, sigma)?;
    let entropy_gap = solution.entropy - von_neumann_entropy(rho);
    let rho_moments = moment_map(rho, constraints)?;
    let moment_mismatch = rho_moments.difference(m);
    let feasible = rho_moments.distance(m) <= FEASIBLE_MOMENT_TOL;
    let interior = solution.is_interior();
    let lambda_term = dot(&solution.lambda, &moment_mismatch);

    let identity_residual = (interior && d.is_finite()).then(|| (d - (entropy_gap + lambda_term)).abs());
    let pinsker_exact_bound = feasible.then(|| sqrt_clamped(2.0 * entropy_gap));
    let pinsker_mixed_bound = interior.then(|| {
        sqrt_clamped(2.0 * entropy_gap.abs())
            + sqrt_clamped(2.0 * solution.lambda_norm() * norm(&moment_mismatch))
    });
    let observable_rate_bound = interior.then(|| sqrt_clamped(2.0 * (entropy_gap + lambda_term)));
    let fannes = fannes_audenaert(rho, sigma)?;

    Ok(CertificateReport {
        relative_entropy: d,
        entropy_gap,
        moment_mismatch,
        identity_residual,
        pinsker_exact_bound,
        pinsker_mixed_bound,
        trace_distance: trace_norm_distance(rho, sigma)?,
        entropy_difference: fannes.entropy_diff,
        fannes_bound: fannes.bound,
        observable_rate_bound,
        interior,
    })
}
