//! Maximum-entropy states through the dual potential
//! `F(λ) = φ(λ) + ⟨λ, m⟩` with `φ(λ) = ln tr exp(−Σ λ_i X_i)`.
//!
//! For interior targets `F` has a finite minimizer and the maximizer of the
//! entropy is the Gibbs state `σ_λ = exp(−H_λ)/tr exp(−H_λ)`. Boundary
//! targets are approached along `m_j = (1 − ε_j)·m + ε_j·m_anchor`,
//! `ε_j = 2^{−j}`, warm-starting each Newton solve from the previous
//! multipliers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{
    entropy_of_spectrum, trace_norm_distance, CMatrix, DensityMatrix, SpectralDecomposition,
};
use crate::moments::{
    classify, moment_map, ConstraintSet, FeasibilityOptions, FeasibilityStatus, MomentVector,
};

/// Eigenvalues of a boundary limit below this, and still decaying along the
/// path, are set to zero.
pub const VANISHING_TOL: f64 = 1e-6;
/// Largest ratio to the previous path state at which an eigenvalue counts
/// as decaying; halving `ε` roughly halves a vanishing weight.
pub const VANISHING_RATIO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Newton stops once `‖m − m(σ_λ)‖₂` falls to this.
    pub grad_tol: f64,
    pub max_newton_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    pub backtrack: f64,
    /// Multiplier norm treated as divergence toward the boundary.
    pub lambda_norm_cap: f64,
    /// Number of halvings `ε_j = 2^{−j}` on the boundary path.
    pub path_steps: usize,
    /// Path-following stops once consecutive states are this close in trace norm.
    pub path_tol: f64,
    /// Interior point the boundary path starts from; moments of `I/d` when `None`.
    pub interior_anchor: Option<MomentVector>,
    pub feasibility: FeasibilityOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-9,
            max_newton_iters: 200,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            lambda_norm_cap: 1e3,
            path_steps: 40,
            path_tol: 1e-7,
            interior_anchor: None,
            feasibility: FeasibilityOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.grad_tol,
            self.armijo_c1,
            self.backtrack,
            self.lambda_norm_cap,
            self.path_tol,
            self.feasibility.feas_tol,
            self.feasibility.step_scale,
            self.feasibility.witness_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite())
            || self.backtrack >= 1.0
            || self.armijo_c1 >= 1.0
            || self.max_newton_iters == 0
            || self.path_steps == 0
            || self.feasibility.max_iter == 0
        {
            return Err(Error::InvalidInput("solver options must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    InteriorConverged,
    BoundaryLimit,
}

impl SolutionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolutionKind::InteriorConverged => "interior-converged",
            SolutionKind::BoundaryLimit => "boundary-limit",
        }
    }
}

/// One solve along the boundary path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub epsilon: f64,
    pub moments: MomentVector,
    pub lambda: Vec<f64>,
    pub lambda_norm: f64,
    /// `‖σ^(j) − σ^(j−1)‖₁`; `None` on the first step.
    pub step_distance: Option<f64>,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct GibbsSolution {
    pub lambda: Vec<f64>,
    pub sigma: DensityMatrix,
    pub log_partition: f64,
    pub target: MomentVector,
    pub achieved_moments: MomentVector,
    /// `‖m(σ) − m‖₂` against the target.
    pub moment_residual: f64,
    pub entropy: f64,
    pub classification: SolutionKind,
    pub iterations: usize,
    pub path_trace: Vec<PathStep>,
    /// Multiplier norms grew monotonically along the path past a tenth of the cap.
    pub lambda_diverging: bool,
}

impl GibbsSolution {
    pub fn is_interior(&self) -> bool {
        self.classification == SolutionKind::InteriorConverged
    }

    pub fn lambda_norm(&self) -> f64 {
        norm(&self.lambda)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Everything derived from one eigendecomposition of `H_λ`.
struct GibbsEval {
    lambda: Vec<f64>,
    spectrum: SpectralDecomposition,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    log_partition: f64,
    /// Observables in the eigenbasis of `H_λ`.
    rotated: Vec<CMatrix>,
    moments: Vec<f64>,
}

impl GibbsEval {
    fn new(constraints: &ConstraintSet, lambda: &[f64]) -> Result<Self> {
        constraints.check_len(lambda.len())?;
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite);
        }
        let h = constraints.assemble(lambda);
        let spectrum = h.spectrum()?;
        let shift = spectrum.min();
        let shifted: Vec<f64> = spectrum.eigenvalues.iter().map(|v| -(v - shift)).collect();
        let log_z_shifted = shifted.iter().map(|x| x.exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = shifted.iter().map(|x| x - log_z_shifted).collect();
        let probs: Vec<f64> = log_probs.iter().map(|x| x.exp()).collect();
        let rotated: Vec<CMatrix> = constraints
            .observables()
            .iter()
            .map(|x| spectrum.in_eigenbasis(x.matrix()))
            .collect();
        let moments = rotated
            .iter()
            .map(|xt| probs.iter().enumerate().map(|(a, p)| p * xt[(a, a)].re).sum())
            .collect();
        Ok(Self {
            lambda: lambda.to_vec(),
            spectrum,
            probs,
            log_probs,
            log_partition: -shift + log_z_shifted,
            rotated,
            moments,
        })
    }

    fn objective(&self, target: &[f64]) -> f64 {
        self.log_partition + dot(&self.lambda, target)
    }

    /// `∇F = m − m(σ_λ)`.
    fn residual(&self, target: &[f64]) -> Vec<f64> {
        target.iter().zip(&self.moments).map(|(t, m)| t - m).collect()
    }

    fn hessian(&self) -> DMatrix<f64> {
        let k = self.rotated.len();
        let d = self.probs.len();
        let mut lm = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                lm[(a, b)] = log_mean(self.probs[a], self.log_probs[a], self.probs[b], self.log_probs[b]);
            }
        }
        let mut hess = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let (xi, xj) = (&self.rotated[i], &self.rotated[j]);
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += lm[(a, b)] * (xi[(a, b)] * xj[(b, a)]).re;
                    }
                }
                let v = acc - self.moments[i] * self.moments[j];
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        hess
    }

    fn state(&self) -> DensityMatrix {
        DensityMatrix::from_spectrum(SpectralDecomposition {
            eigenvalues: DVector::from_vec(self.probs.clone()),
            eigenvectors: self.spectrum.eigenvectors.clone(),
        })
    }

    fn into_solution(
        self,
        constraints: &ConstraintSet,
        target: &MomentVector,
        classification: SolutionKind,
        iterations: usize,
    ) -> Result<GibbsSolution> {
        let sigma = self.state();
        let achieved = moment_map(&sigma, constraints)?;
        let entropy = entropy_of_spectrum(sigma.eigenvalues().iter().copied());
        Ok(GibbsSolution {
            moment_residual: achieved.distance(target),
            lambda: self.lambda,
            sigma,
            log_partition: self.log_partition,
            target: target.clone(),
            achieved_moments: achieved,
            entropy,
            classification,
            iterations,
            path_trace: Vec::new(),
            lambda_diverging: false,
        })
    }
}

/// Logarithmic mean `(p − q)/(ln p − ln q)` with `L(p, p) = p`, evaluated from
/// the larger argument to avoid `0·∞` when the smaller one underflows.
fn log_mean(p: f64, lp: f64, q: f64, lq: f64) -> f64 {
    let (hi, lhi, llo) = if lp >= lq { (p, lp, lq) } else { (q, lq, lp) };
    let x = lhi - llo;
    if x == 0.0 {
        hi
    } else {
        hi * (-(-x).exp_m1()) / x
    }
}

/// `φ(λ) = ln tr exp(−Σ λ_i X_i)`, evaluated with a spectral shift.
pub fn log_partition(constraints: &ConstraintSet, lambda: &[f64]) -> Result<f64> {
    Ok(GibbsEval::new(constraints, lambda)?.log_partition)
}

/// `∇φ(λ) = −m(σ_λ)`.
pub fn dual_gradient(constraints: &ConstraintSet, lambda: &[f64]) -> Result<Vec<f64>> {
    Ok(GibbsEval::new(constraints, lambda)?
        .moments
        .into_iter()
        .map(|m| -m)
        .collect())
}

/// Kubo–Mori covariance of the observables in `σ_λ`, the Hessian of `φ`.
pub fn dual_hessian(constraints: &ConstraintSet, lambda: &[f64]) -> Result<DMatrix<f64>> {
    Ok(GibbsEval::new(constraints, lambda)?.hessian())
}

/// `σ_λ = exp(−H_λ)/tr exp(−H_λ)`.
pub fn gibbs_state(constraints: &ConstraintSet, lambda: &[f64]) -> Result<DensityMatrix> {
    Ok(GibbsEval::new(constraints, lambda)?.state())
}

/// Minimum-norm Newton step `−H⁺ g`; eigenvalues below a relative cutoff are
/// treated as null directions.
fn newton_step(hess: DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let k = grad.len();
    let eig = SymmetricEigen::new(hess);
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-12 * top.max(f64::MIN_POSITIVE);
    let g = DVector::from_column_slice(grad);
    let mut step = DVector::<f64>::zeros(k);
    for (idx, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu > cutoff {
            let v = eig.eigenvectors.column(idx);
            step -= v * (v.dot(&g) / mu);
        }
    }
    step.iter().cloned().collect()
}

/// Newton iteration with Armijo backtracking from `lambda0`.
fn newton(
    constraints: &ConstraintSet,
    m: &MomentVector,
    lambda0: &[f64],
    opts: &SolverOptions,
) -> Result<GibbsSolution> {
    let target = m.values();
    let mut eval = GibbsEval::new(constraints, lambda0)?;
    let mut grad = eval.residual(target);
    let mut gnorm = norm(&grad);
    for iter in 0..opts.max_newton_iters {
        if gnorm <= opts.grad_tol {
            return eval.into_solution(constraints, m, SolutionKind::InteriorConverged, iter);
        }
        let step = newton_step(eval.hessian(), &grad);
        let slope = dot(&grad, &step);
        let f0 = eval.objective(target);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let trial: Vec<f64> = eval.lambda.iter().zip(&step).map(|(l, s)| l + t * s).collect();
            let next = GibbsEval::new(constraints, &trial)?;
            let f1 = next.objective(target);
            let g1 = next.residual(target);
            let n1 = norm(&g1);
            let armijo = f1 <= f0 + opts.armijo_c1 * t * slope;
            // Near the optimum F changes below its float resolution; fall back
            // on a decrease of the gradient norm.
            let flat = (f1 - f0).abs() <= 1e-13 * (1.0 + f0.abs()) && n1 < gnorm;
            if armijo || flat {
                accepted = Some((next, g1, n1));
                break;
            }
            t *= opts.backtrack;
        }
        let Some((next, g1, n1)) = accepted else {
            let best = eval.into_solution(constraints, m, SolutionKind::InteriorConverged, iter)?;
            return Err(Error::NonConvergence {
                iterations: iter,
                grad_norm: gnorm,
                best: Box::new(best),
            });
        };
        eval = next;
        grad = g1;
        gnorm = n1;
        let lnorm = norm(&eval.lambda);
        if lnorm > opts.lambda_norm_cap {
            return Err(Error::BoundarySuspected {
                norm: lnorm,
                lambda: eval.lambda,
            });
        }
    }
    if gnorm <= opts.grad_tol {
        return eval.into_solution(
            constraints,
            m,
            SolutionKind::InteriorConverged,
            opts.max_newton_iters,
        );
    }
    let best = eval.into_solution(
        constraints,
        m,
        SolutionKind::InteriorConverged,
        opts.max_newton_iters,
    )?;
    Err(Error::NonConvergence {
        iterations: opts.max_newton_iters,
        grad_norm: gnorm,
        best: Box::new(best),
    })
}

/// Newton solve from `λ = 0` for a target in the interior of the moment body.
pub fn solve_interior(
    constraints: &ConstraintSet,
    m: &MomentVector,
    opts: &SolverOptions,
) -> Result<GibbsSolution> {
    constraints.check_len(m.len())?;
    newton(constraints, m, &vec![0.0; constraints.len()], opts)
}

/// Newton solve warm-started from `lambda0`.
pub fn solve_interior_from(
    constraints: &ConstraintSet,
    m: &MomentVector,
    lambda0: &[f64],
    opts: &SolverOptions,
) -> Result<GibbsSolution> {
    constraints.check_len(m.len())?;
    newton(constraints, m, lambda0, opts)
}

fn anchor_moments(constraints: &ConstraintSet, opts: &SolverOptions) -> Result<MomentVector> {
    match &opts.interior_anchor {
        Some(a) => {
            constraints.check_len(a.len())?;
            Ok(a.clone())
        }
        None => moment_map(&DensityMatrix::maximally_mixed(constraints.dim()), constraints),
    }
}

/// Solves along `m_j = (1 − ε_j) m + ε_j m_anchor` for `j = 1..=steps`.
/// With `stop_early`, stops once consecutive states are within `path_tol`.
pub(crate) fn follow_path(
    constraints: &ConstraintSet,
    m: &MomentVector,
    steps: usize,
    stop_early: bool,
    opts: &SolverOptions,
) -> Result<(GibbsSolution, Vec<PathStep>)> {
    let anchor = anchor_moments(constraints, opts)?;
    let start = solve_interior(constraints, &anchor, opts).map_err(|e| {
        Error::Precondition(format!("boundary path anchor is not an interior point: {e}"))
    })?;
    let mut lambda = start.lambda.clone();
    let mut prev: Option<DensityMatrix> = None;
    let mut trace: Vec<PathStep> = Vec::new();
    let mut last: Option<GibbsSolution> = None;
    let mut total_iters = start.iterations;
    for j in 1..=steps {
        let epsilon = 0.5f64.powi(j as i32);
        let mj = m.lerp(&anchor, epsilon);
        let sol = match newton(constraints, &mj, &lambda, opts) {
            Ok(s) => s,
            Err(e) => {
                return Err(Error::PathFailure {
                    step: j,
                    path_trace: trace,
                    source: Box::new(e),
                })
            }
        };
        total_iters += sol.iterations;
        let step_distance = match &prev {
            Some(p) => Some(trace_norm_distance(&sol.sigma, p)?),
            None => None,
        };
        trace.push(PathStep {
            epsilon,
            moments: mj,
            lambda: sol.lambda.clone(),
            lambda_norm: sol.lambda_norm(),
            step_distance,
            entropy: sol.entropy,
        });
        lambda = sol.lambda.clone();
        prev = Some(sol.sigma.clone());
        last = Some(sol);
        if stop_early && step_distance.is_some_and(|d| d <= opts.path_tol) {
            break;
        }
    }
    let mut last = last.expect("at least one path step");
    last.iterations = total_iters;
    Ok((last, trace))
}

/// Maximum-entropy state for a boundary target, as the limit of interior
/// Gibbs states along a geometric path toward the anchor.
pub fn solve_boundary(
    constraints: &ConstraintSet,
    m: &MomentVector,
    opts: &SolverOptions,
) -> Result<GibbsSolution> {
    constraints.check_len(m.len())?;
    let anchor = anchor_moments(constraints, opts)?;
    if m.distance(&anchor) <= opts.grad_tol {
        return solve_interior(constraints, m, opts);
    }
    let (last, trace) = follow_path(constraints, m, opts.path_steps, true, opts)?;
    let norms: Vec<f64> = trace.iter().map(|s| s.lambda_norm).collect();
    let monotone = norms.windows(2).all(|w| w[1] >= w[0]);
    let final_norm = norms.last().copied().unwrap_or(0.0);
    // Convergent multipliers change by O(ε_j) per step, divergent ones by
    // a roughly constant amount.
    let steady_growth = norms.len() >= 6 && {
        let n = norms.len();
        let (late, early) = (norms[n - 1] - norms[n - 2], norms[n - 5] - norms[n - 6]);
        late > 0.0 && late >= 0.5 * early
    };
    let sigma = match trace.len().checked_sub(2).map(|i| &trace[i]) {
        Some(prev) => drop_vanishing(&last.sigma, &gibbs_state(constraints, &prev.lambda)?),
        None => last.sigma.clone(),
    };
    let achieved = moment_map(&sigma, constraints)?;
    Ok(GibbsSolution {
        moment_residual: achieved.distance(m),
        entropy: entropy_of_spectrum(sigma.eigenvalues().iter().copied()),
        sigma,
        target: m.clone(),
        achieved_moments: achieved,
        classification: SolutionKind::BoundaryLimit,
        lambda_diverging: monotone && (final_norm > opts.lambda_norm_cap / 10.0 || steady_growth),
        path_trace: trace,
        ..last
    })
}

/// Zeroes the eigenvalues of the last path state that are below
/// [`VANISHING_TOL`] and still shrinking geometrically relative to the
/// previous state; those weights tend to zero along the path.
fn drop_vanishing(last: &DensityMatrix, prev: &DensityMatrix) -> DensityMatrix {
    let (p, q) = (last.eigenvalues(), prev.eigenvalues());
    let mut probs: Vec<f64> = p.iter().copied().collect();
    let mut changed = false;
    for (i, w) in probs.iter_mut().enumerate() {
        if *w <= VANISHING_TOL && *w <= VANISHING_RATIO * q[i] {
            *w = 0.0;
            changed = true;
        }
    }
    if !changed || probs.iter().all(|&w| w == 0.0) {
        return last.clone();
    }
    DensityMatrix::from_spectrum(SpectralDecomposition {
        eigenvalues: DVector::from_vec(probs),
        eigenvectors: last.spectrum().eigenvectors.clone(),
    })
}

/// Dispatches on a known feasibility status.
pub(crate) fn solve_classified(
    constraints: &ConstraintSet,
    m: &MomentVector,
    status: FeasibilityStatus,
    opts: &SolverOptions,
) -> Result<GibbsSolution> {
    match status {
        FeasibilityStatus::Interior => match solve_interior(constraints, m, opts) {
            Err(Error::BoundarySuspected { .. }) => solve_boundary(constraints, m, opts),
            other => other,
        },
        FeasibilityStatus::Boundary => solve_boundary(constraints, m, opts),
        FeasibilityStatus::Infeasible => Err(Error::Precondition(
            "cannot solve for infeasible moments".into(),
        )),
    }
}

/// The unique entropy maximizer among states with moments `m`.
pub fn max_entropy(
    constraints: &ConstraintSet,
    m: &MomentVector,
    opts: &SolverOptions,
) -> Result<GibbsSolution> {
    opts.validate()?;
    let class = classify(constraints, m, &opts.feasibility)?;
    if class.status == FeasibilityStatus::Infeasible {
        return Err(Error::Infeasible {
            witness: class.direction,
            margin: class.margin,
        });
    }
    solve_classified(constraints, m, class.status, opts)
}
