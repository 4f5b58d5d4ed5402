//! State sequences with prescribed moment and entropy limits, and the
//! per-step records used to watch them converge to the maximum-entropy
//! state in trace norm.

use std::fmt::Write as _;
use std::io;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::{fannes_audenaert, BOUND_SLACK};
use crate::dual::{follow_path, gibbs_state, max_entropy, GibbsSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{relative_entropy, trace_norm_distance, von_neumann_entropy, DensityMatrix};
use crate::moments::{moment_map, ConstraintSet, MomentVector};
use crate::random;

/// Draws allowed per step before a jittered target is declared unusable.
pub const JITTER_RESAMPLES: usize = 50;
/// Slack in the moment-continuity inequality `|Δm_i| ≤ ‖ρ − σ‖₁‖X_i‖`.
pub const MOMENT_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// `ρ_n = (1 − t_n)σ + t_n τ_n` with Ginibre `τ_n`, `t_n = noise/n`.
    MixToSigma,
    /// Maximum-entropy states at `m + δ_n`, `‖δ_n‖ = noise/n`.
    MomentJitter,
    /// Gibbs states along the path `m_j = (1 − 2^{−j}) m + 2^{−j} m_anchor`.
    BoundaryApproach,
}

impl SequenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SequenceKind::MixToSigma => "mix",
            SequenceKind::MomentJitter => "jitter",
            SequenceKind::BoundaryApproach => "boundary",
        }
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mix" | "mix-to-sigma" => Ok(SequenceKind::MixToSigma),
            "jitter" | "moment-jitter" => Ok(SequenceKind::MomentJitter),
            "boundary" | "boundary-approach" => Ok(SequenceKind::BoundaryApproach),
            other => Err(Error::InvalidInput(format!("unknown sequence kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceConfig {
    pub kind: SequenceKind,
    pub length: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SequenceConfig {
    pub fn new(kind: SequenceKind, length: usize, noise_scale: f64, seed: u64) -> Self {
        Self {
            kind,
            length,
            noise_scale,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidInput("sequence length must be at least 1".into()));
        }
        if !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise scale must be finite and nonnegative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }

    /// Mixing weight `t_n = min(noise/n, 1)` of a mix-to-sigma sequence.
    pub fn mixing_weight(&self, n: usize) -> f64 {
        (self.noise_scale / n as f64).min(1.0)
    }
}

/// Builds `ρ_1, …, ρ_N`. Deterministic for a fixed seed.
pub fn generate_sequence(
    solution: &GibbsSolution,
    constraints: &ConstraintSet,
    config: &SequenceConfig,
    opts: &SolverOptions,
) -> Result<Vec<DensityMatrix>> {
    config.validate()?;
    let sigma = &solution.sigma;
    if sigma.dim() != constraints.dim() {
        return Err(Error::DimensionMismatch {
            expected: constraints.dim(),
            got: sigma.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.kind {
        SequenceKind::MixToSigma => (1..=config.length)
            .map(|n| {
                let tau = random::state(sigma.dim(), &mut rng);
                sigma.mix(&tau, config.mixing_weight(n))
            })
            .collect(),
        SequenceKind::MomentJitter => (1..=config.length)
            .map(|n| jittered_state(solution, constraints, config.noise_scale / n as f64, opts, &mut rng))
            .collect(),
        SequenceKind::BoundaryApproach => {
            let (_, trace) = follow_path(constraints, &solution.target, config.length, false, opts)?;
            trace.iter().map(|step| gibbs_state(constraints, &step.lambda)).collect()
        }
    }
}

fn jittered_state(
    solution: &GibbsSolution,
    constraints: &ConstraintSet,
    radius: f64,
    opts: &SolverOptions,
    rng: &mut ChaCha8Rng,
) -> Result<DensityMatrix> {
    for _ in 0..JITTER_RESAMPLES {
        let u = random::real_unit_vector(constraints.len(), rng);
        let target: MomentVector = solution
            .target
            .values()
            .iter()
            .zip(&u)
            .map(|(m, u)| m + radius * u)
            .collect::<Vec<_>>()
            .into();
        match max_entropy(constraints, &target, opts) {
            Ok(sol) => return Ok(sol.sigma),
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Precondition(format!(
        "no feasible jittered target at radius {radius:e} after {JITTER_RESAMPLES} draws"
    )))
}

/// One row of a [`ConvergenceRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `‖m(ρ_n) − m‖₂`.
    pub moment_error: f64,
    /// `S(σ) − S(ρ_n)`.
    pub entropy_gap: f64,
    /// `D(ρ_n‖σ)`, possibly `+∞`.
    pub relative_entropy: f64,
    pub trace_distance: f64,
    /// Interior solutions only.
    pub pinsker_mixed_bound: Option<f64>,
    /// `|D − (gap + λ·Δm)|`; interior solutions with finite `D` only.
    pub identity_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub kind: SequenceKind,
    pub rows: Vec<ConvergenceRow>,
    /// Constructive bound on the final trace distance, when one is known.
    pub threshold: Option<f64>,
}

pub const CSV_HEADER: &str =
    "n,moment_error,entropy_gap,relative_entropy,trace_distance,pinsker_mixed_bound,identity_residual";

/// Shortest decimal that parses back to the same double; `inf`/`-inf`/`nan`
/// for the non-finite values.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), format_f64)
}

impl ConvergenceRecord {
    pub fn final_row(&self) -> Option<&ConvergenceRow> {
        self.rows.last()
    }

    /// Rows whose trace distance exceeds the mixed Pinsker bound.
    pub fn domination_violations(&self) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| {
                r.pinsker_mixed_bound
                    .is_some_and(|b| b.is_finite() && !(r.trace_distance <= b + BOUND_SLACK))
            })
            .map(|r| r.n)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n,
                format_f64(r.moment_error),
                format_f64(r.entropy_gap),
                format_f64(r.relative_entropy),
                format_f64(r.trace_distance),
                format_opt(r.pinsker_mixed_bound),
                format_opt(r.identity_residual),
            );
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Record columns for an arbitrary sequence against `solution`.
pub fn sequence_rows(
    solution: &GibbsSolution,
    constraints: &ConstraintSet,
    m: &MomentVector,
    states: &[DensityMatrix],
) -> Result<Vec<ConvergenceRow>> {
    constraints.check_len(m.len())?;
    let sigma = &solution.sigma;
    let interior = solution.is_interior();
    let lambda_norm = solution.lambda_norm();
    states
        .iter()
        .enumerate()
        .map(|(i, rho)| {
            let moments = moment_map(rho, constraints)?;
            let delta_m = moments.difference(m);
            let moment_error = moments.distance(m);
            let entropy_gap = solution.entropy - von_neumann_entropy(rho);
            let d = relative_entropy(rho, sigma)?;
            let lambda_term: f64 = solution.lambda.iter().zip(&delta_m).map(|(l, x)| l * x).sum();
            let pinsker_mixed_bound = interior.then(|| {
                (2.0 * entropy_gap.abs()).sqrt() + (2.0 * lambda_norm * moment_error).max(0.0).sqrt()
            });
            let identity_residual =
                (interior && d.is_finite()).then(|| (d - (entropy_gap + lambda_term)).abs());
            Ok(ConvergenceRow {
                n: i + 1,
                moment_error,
                entropy_gap,
                relative_entropy: d,
                trace_distance: trace_norm_distance(rho, sigma)?,
                pinsker_mixed_bound,
                identity_residual,
            })
        })
        .collect()
}

/// Generates the sequence, evaluates every column and enforces rowwise
/// Pinsker domination plus the constructive final-distance bound where one
/// is available (mix-to-sigma: `2 t_N`).
pub fn run_convergence(
    solution: &GibbsSolution,
    constraints: &ConstraintSet,
    m: &MomentVector,
    config: &SequenceConfig,
    opts: &SolverOptions,
) -> Result<ConvergenceRecord> {
    let states = generate_sequence(solution, constraints, config, opts)?;
    let rows = sequence_rows(solution, constraints, m, &states)?;
    let threshold = match config.kind {
        SequenceKind::MixToSigma => Some(2.0 * config.mixing_weight(config.length) + 1e-12),
        SequenceKind::MomentJitter => rows.last().and_then(|r| r.pinsker_mixed_bound).map(|b| b + BOUND_SLACK),
        SequenceKind::BoundaryApproach => None,
    };
    let record = ConvergenceRecord {
        kind: config.kind,
        rows,
        threshold,
    };
    let bad = record.domination_violations();
    if !bad.is_empty() {
        return Err(Error::ThresholdExceeded(format!(
            "trace distance exceeds the mixed Pinsker bound at rows {bad:?}"
        )));
    }
    if let (Some(t), Some(last)) = (threshold, record.final_row()) {
        if !(last.trace_distance <= t) {
            return Err(Error::ThresholdExceeded(format!(
                "final trace distance {} exceeds {t}",
                last.trace_distance
            )));
        }
    }
    Ok(record)
}

/// Rowwise outcome of the forward continuity inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceVerdict {
    pub rows: usize,
    /// Rows violating `|tr(ρ_n X_i) − tr(σ X_i)| ≤ ‖ρ_n − σ‖₁‖X_i‖`.
    pub moment_violations: Vec<usize>,
    /// Rows violating the Fannes–Audenaert bound.
    pub entropy_violations: Vec<usize>,
}

impl EquivalenceVerdict {
    pub fn holds(&self) -> bool {
        self.moment_violations.is_empty() && self.entropy_violations.is_empty()
    }
}

/// Checks that trace-norm closeness forces moment and entropy closeness on
/// every state of `states`.
pub fn equivalence_on(
    solution: &GibbsSolution,
    constraints: &ConstraintSet,
    states: &[DensityMatrix],
) -> Result<EquivalenceVerdict> {
    let sigma = &solution.sigma;
    let sigma_moments = moment_map(sigma, constraints)?;
    let norms = constraints
        .observables()
        .iter()
        .map(|x| x.operator_norm())
        .collect::<Result<Vec<_>>>()?;
    let mut verdict = EquivalenceVerdict {
        rows: states.len(),
        moment_violations: Vec::new(),
        entropy_violations: Vec::new(),
    };
    for (i, rho) in states.iter().enumerate() {
        let dist = trace_norm_distance(rho, sigma)?;
        let moments = moment_map(rho, constraints)?;
        let moment_ok = moments
            .values()
            .iter()
            .zip(sigma_moments.values())
            .zip(&norms)
            .all(|((a, b), x)| (a - b).abs() <= dist * x + MOMENT_SLACK);
        if !moment_ok {
            verdict.moment_violations.push(i + 1);
        }
        let f = fannes_audenaert(rho, sigma)?;
        if !(f.entropy_diff <= f.bound + BOUND_SLACK) {
            verdict.entropy_violations.push(i + 1);
        }
    }
    Ok(verdict)
}

pub fn equivalence_check(
    solution: &GibbsSolution,
    constraints: &ConstraintSet,
    config: &SequenceConfig,
    opts: &SolverOptions,
) -> Result<EquivalenceVerdict> {
    let states = generate_sequence(solution, constraints, config, opts)?;
    equivalence_on(solution, constraints, &states)
}

/// A sequence inside `C(m)` whose moments are exact but whose entropy stays
/// below `S(σ)`: `ρ_n = (1 − 1/n)A + B/n` with `A`, `B` displaced from `σ`
/// along one moment-preserving direction by a half and nine tenths of the
/// admissible step. `None` when `C(m)` is a single point or `σ` is not
/// full rank.
pub fn adversarial_sequence(
    solution: &GibbsSolution,
    constraints: &ConstraintSet,
    length: usize,
    seed: u64,
) -> Result<Option<Vec<DensityMatrix>>> {
    if length == 0 {
        return Err(Error::InvalidInput("sequence length must be at least 1".into()));
    }
    if !solution.is_interior() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some(dir) = constraints.moment_preserving_direction(&mut rng) else {
        return Ok(None);
    };
    let sigma = &solution.sigma;
    let (Ok(a), Ok(b)) = (
        constraints.displace(sigma, &dir, 0.5),
        constraints.displace(sigma, &dir, 0.9),
    ) else {
        return Ok(None);
    };
    (1..=length)
        .map(|n| a.mix(&b, 1.0 / n as f64))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}
