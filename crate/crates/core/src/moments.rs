//! Constraint observables, the moment map, and feasibility of moment data.
//!
//! A target `m` is attainable by some state iff `⟨λ, m⟩ ≤ λ_max(Σ λ_i X_i)`
//! for every direction `λ`. Both sides are positively homogeneous in `λ`, so
//! feasibility reduces to the sign of
//!
//! ```text
//! g* = min_{‖λ‖₂ = 1}  λ_max(Σ λ_i X_i) − ⟨λ, m⟩
//! ```
//!
//! which is the signed Euclidean distance from `m` to the boundary of the
//! moment body (negative outside). `g*` is found by projected subgradient
//! descent on the sphere followed by a line-searched Riemannian gradient
//! polish.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{self, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{trace_of_product, CMatrix, DensityMatrix, HermitianOperator};
use crate::random;

/// Relative rank tolerance for the Gram matrix of `{I, X_1, …, X_k}`.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalues within this of `λ_max` belong to the top eigenspace.
pub const TOP_EIGENSPACE_TOL: f64 = 1e-9;

/// An ordered list of observables `X_1 … X_k` on a common space.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    dim: usize,
    observables: Vec<HermitianOperator>,
    names: Vec<String>,
    gram_rank: usize,
    /// Unit directions `λ` with `Σ λ_i X_i ∝ I`.
    null_directions: Vec<Vec<f64>>,
}

impl ConstraintSet {
    pub fn new(observables: Vec<HermitianOperator>) -> Result<Self> {
        let names = (1..=observables.len()).map(|i| format!("X{i}")).collect();
        Self::with_names(observables, names)
    }

    pub fn with_names(observables: Vec<HermitianOperator>, names: Vec<String>) -> Result<Self> {
        let first = observables
            .first()
            .ok_or_else(|| Error::InvalidInput("at least one observable is required".into()))?;
        let dim = first.dim();
        for x in &observables {
            if x.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.dim(),
                });
            }
        }
        if names.len() != observables.len() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} observables",
                names.len(),
                observables.len()
            )));
        }
        let (gram_rank, null_directions) = gram_analysis(dim, &observables)?;
        Ok(Self {
            dim,
            observables,
            names,
            gram_rank,
            null_directions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn observables(&self) -> &[HermitianOperator] {
        &self.observables
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Rank of the trace-inner-product Gram matrix of `{I, X_1, …, X_k}`.
    pub fn gram_rank(&self) -> usize {
        self.gram_rank
    }

    /// Whether `{I, X_1, …, X_k}` is linearly independent.
    pub fn is_independent(&self) -> bool {
        self.gram_rank == self.len() + 1
    }

    /// `H_λ = Σ λ_i X_i`.
    pub fn assemble(&self, lambda: &[f64]) -> HermitianOperator {
        HermitianOperator::linear_combination(lambda, &self.observables, self.dim)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    /// Orthonormal (Hilbert–Schmidt) basis of `V = span{I, X_1, …, X_k}`.
    fn span_basis(&self) -> Vec<CMatrix> {
        let mut basis: Vec<CMatrix> = Vec::new();
        let candidates = std::iter::once(CMatrix::identity(self.dim, self.dim))
            .chain(self.observables.iter().map(|x| x.matrix().clone()));
        for c in candidates {
            let scale = c.norm().max(1.0);
            let mut v = c;
            for _ in 0..2 {
                for b in &basis {
                    let coeff = trace_of_product(&b.adjoint(), &v);
                    v -= b * coeff;
                }
            }
            let n = v.norm();
            if n > RANK_TOL * scale {
                basis.push(v / Complex64::new(n, 0.0));
            }
        }
        basis
    }

    /// Orthogonal projection of `a` onto `V`, returning the projection and the
    /// Frobenius norm of the residual.
    pub fn project_onto_span(&self, a: &HermitianOperator) -> (HermitianOperator, f64) {
        let mut proj = CMatrix::zeros(self.dim, self.dim);
        for b in self.span_basis() {
            let coeff = trace_of_product(&b.adjoint(), a.matrix());
            proj += b * coeff;
        }
        let residual = (a.matrix() - &proj).norm();
        (HermitianOperator::from_matrix_unchecked(proj), residual)
    }

    /// A unit-Frobenius Hermitian, traceless direction orthogonal to every
    /// `X_i`. Moving a state along it leaves all moments unchanged. `None`
    /// when `V` is the whole operator space.
    pub fn moment_preserving_direction<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Option<HermitianOperator> {
        let basis = self.span_basis();
        if basis.len() >= self.dim * self.dim {
            return None;
        }
        for _ in 0..16 {
            let g = random::hermitian(self.dim, rng);
            let mut v = g.matrix().clone();
            for _ in 0..2 {
                for b in &basis {
                    let coeff = trace_of_product(&b.adjoint(), &v);
                    v -= b * coeff;
                }
            }
            let n = v.norm();
            if n > 1e-8 * g.frobenius_norm() {
                return Some(HermitianOperator::from_matrix_unchecked(
                    v / Complex64::new(n, 0.0),
                ));
            }
        }
        None
    }

    /// A state with the same moments as `state`, displaced along a random
    /// moment-preserving direction. `strength ∈ (0, 1]` is the fraction of the
    /// largest displacement that keeps the result positive semidefinite.
    pub fn perturb_within<R: Rng + ?Sized>(
        &self,
        state: &DensityMatrix,
        strength: f64,
        rng: &mut R,
    ) -> Option<DensityMatrix> {
        let dir = self.moment_preserving_direction(rng)?;
        self.displace(state, &dir, strength).ok()
    }

    pub(crate) fn displace(
        &self,
        state: &DensityMatrix,
        dir: &HermitianOperator,
        strength: f64,
    ) -> Result<DensityMatrix> {
        let floor = state.spectrum().min();
        let dir_min = dir.spectrum()?.min();
        if dir_min >= 0.0 || floor <= 0.0 {
            return Err(Error::Precondition(
                "state must be full rank to displace it".into(),
            ));
        }
        // state + t·dir ≥ 0 holds for t ≤ floor / |λ_min(dir)|.
        let t = strength.clamp(0.0, 1.0) * floor / (-dir_min);
        DensityMatrix::new(state.matrix() + dir.matrix() * Complex64::new(t, 0.0))
    }
}

fn gram_analysis(dim: usize, observables: &[HermitianOperator]) -> Result<(usize, Vec<Vec<f64>>)> {
    let k = observables.len();
    let mut ops: Vec<CMatrix> = Vec::with_capacity(k + 1);
    ops.push(CMatrix::identity(dim, dim));
    ops.extend(observables.iter().map(|x| x.matrix().clone()));
    let gram = DMatrix::from_fn(k + 1, k + 1, |i, j| trace_of_product(&ops[i], &ops[j]).re);
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = RANK_TOL * top.max(1.0);
    let mut rank = 0;
    let mut nulls = Vec::new();
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            rank += 1;
        } else {
            let v = eig.eigenvectors.column(idx);
            let lam: Vec<f64> = v.iter().skip(1).cloned().collect();
            let n = lam.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                nulls.push(lam.into_iter().map(|x| x / n).collect());
            }
        }
    }
    Ok((rank, nulls))
}

/// Expectation values `m_i` of the constraint observables.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector(pub Vec<f64>);

impl MomentVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, other: &MomentVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self − other`.
    pub fn difference(&self, other: &MomentVector) -> Vec<f64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }

    /// `(1 − t)·self + t·other`.
    pub fn lerp(&self, other: &MomentVector, t: f64) -> MomentVector {
        MomentVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for MomentVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `m_i(ρ) = tr(ρ X_i)`.
pub fn moment_map(rho: &DensityMatrix, constraints: &ConstraintSet) -> Result<MomentVector> {
    if rho.dim() != constraints.dim() {
        return Err(Error::DimensionMismatch {
            expected: constraints.dim(),
            got: rho.dim(),
        });
    }
    let values = constraints
        .observables()
        .iter()
        .map(|x| {
            let z = trace_of_product(rho.matrix(), x.matrix());
            debug_assert!(z.im.abs() < 1e-10 * (1.0 + z.re.abs()));
            z.re
        })
        .collect();
    Ok(MomentVector(values))
}

/// Support function of the moment body, `λ_max(Σ λ_i X_i)`.
pub fn support_function(constraints: &ConstraintSet, lambda: &[f64]) -> Result<f64> {
    constraints.check_len(lambda.len())?;
    crate::linalg::lambda_max(&constraints.assemble(lambda))
}

/// Knobs for the sphere minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOptions {
    /// Half-width of the boundary band on the margin.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// `c` in the subgradient step `c/√t`.
    pub step_scale: f64,
    /// Admissible moment error of a feasible witness state.
    pub witness_tol: f64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            max_iter: 5000,
            step_scale: 0.5,
            witness_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Interior,
    Boundary,
    Infeasible,
}

impl FeasibilityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FeasibilityStatus::Interior => "interior",
            FeasibilityStatus::Boundary => "boundary",
            FeasibilityStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Witness {
    /// Direction `λ*` with `⟨λ*, m⟩ > λ_max(Σ λ*_i X_i)`.
    Direction(Vec<f64>),
    /// State reproducing the target moments.
    State(DensityMatrix),
}

#[derive(Debug, Clone)]
pub struct FeasibilityVerdict {
    pub status: FeasibilityStatus,
    /// Minimal slack `λ_max(Σ λ_i X_i) − ⟨λ, m⟩` over unit `λ`.
    pub margin: f64,
    /// Minimizing unit direction.
    pub direction: Vec<f64>,
    pub witness: Witness,
    /// Set when `{I, X_i}` is linearly dependent, in which case the moment
    /// body is lower dimensional and every feasible point tests as boundary.
    pub linearly_dependent: bool,
    pub iterations: usize,
}

/// Result of the sphere minimization without a witness.
#[derive(Debug, Clone)]
pub struct Classification {
    pub status: FeasibilityStatus,
    pub margin: f64,
    pub direction: Vec<f64>,
    pub iterations: usize,
}

fn status_of(margin: f64, tol: f64) -> FeasibilityStatus {
    if margin < -tol {
        FeasibilityStatus::Infeasible
    } else if margin <= tol {
        FeasibilityStatus::Boundary
    } else {
        FeasibilityStatus::Interior
    }
}

/// Slack `g(λ)` and a subgradient, the moment vector of the normalized top
/// eigenprojector minus `m`.
fn slack(constraints: &ConstraintSet, m: &[f64], lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
    let h = constraints.assemble(lambda);
    let eig = h.spectrum()?;
    let top = eig.max();
    let d = eig.dim();
    let cutoff = top - TOP_EIGENSPACE_TOL * top.abs().max(1.0);
    let members: Vec<usize> = (0..d).filter(|&a| eig.eigenvalues[a] >= cutoff).collect();
    let weight = 1.0 / members.len() as f64;
    let mut sub = Vec::with_capacity(constraints.len());
    for (x, mi) in constraints.observables().iter().zip(m) {
        let xt = eig.in_eigenbasis(x.matrix());
        let avg: f64 = members.iter().map(|&a| xt[(a, a)].re).sum::<f64>() * weight;
        sub.push(avg - mi);
    }
    let dot: f64 = lambda.iter().zip(m).map(|(l, mi)| l * mi).sum();
    Ok((top - dot, sub))
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

struct Best {
    value: f64,
    lambda: Vec<f64>,
}

impl Best {
    fn offer(&mut self, value: f64, lambda: &[f64]) {
        if value < self.value {
            self.value = value;
            self.lambda = lambda.to_vec();
        }
    }
}

/// Minimizes the slack over the unit sphere and classifies `m`.
pub fn classify(
    constraints: &ConstraintSet,
    m: &MomentVector,
    opts: &FeasibilityOptions,
) -> Result<Classification> {
    constraints.check_len(m.len())?;
    if m.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let k = constraints.len();
    let target = m.values();
    let mut best = Best {
        value: f64::INFINITY,
        lambda: vec![0.0; k],
    };

    if k == 1 {
        // The sphere is {−1, +1}.
        for s in [1.0, -1.0] {
            let (g, _) = slack(constraints, target, &[s])?;
            best.offer(g, &[s]);
        }
        return Ok(Classification {
            status: status_of(best.value, opts.feas_tol),
            margin: best.value,
            direction: best.lambda,
            iterations: 2,
        });
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; k];
            e[i] = s;
            starts.push(e);
        }
    }
    let center = moment_map(&DensityMatrix::maximally_mixed(constraints.dim()), constraints)?;
    let mut outward = m.difference(&center);
    if normalize(&mut outward) {
        starts.push(outward.iter().map(|x| -x).collect());
        starts.push(outward);
    }
    for n in &constraints.null_directions {
        starts.push(n.clone());
        starts.push(n.iter().map(|x| -x).collect());
    }

    let mut iterations = 0;
    let budget = opts.max_iter.max(1);
    let warmup = (budget / (4 * starts.len())).clamp(1, 50);

    // Global phase: short projected-subgradient runs from every start.
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for start in &starts {
        let mut lam = start.clone();
        let mut local = Best {
            value: f64::INFINITY,
            lambda: lam.clone(),
        };
        for t in 1..=warmup {
            let (g, sub) = slack(constraints, target, &lam)?;
            iterations += 1;
            local.offer(g, &lam);
            let step = opts.step_scale / (t as f64).sqrt();
            let mut next: Vec<f64> = lam.iter().zip(&sub).map(|(l, s)| l - step * s).collect();
            if !normalize(&mut next) {
                break;
            }
            lam = next;
        }
        best.offer(local.value, &local.lambda);
        candidates.push((local.value, local.lambda));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Local phase: polish the most promising basins.
    let mut converged = false;
    let per_candidate = (budget.saturating_sub(iterations) / 3).max(20);
    for (_, start) in candidates.iter().take(3) {
        let (value, lam, ok, used) = polish(constraints, target, start, per_candidate, opts)?;
        iterations += used;
        best.offer(value, &lam);
        converged |= ok && value <= best.value;
    }

    if !converged {
        let status = status_of(best.value, opts.feas_tol);
        // A decisive margin far from the band needs no stationarity certificate.
        if best.value.abs() < 1e3 * opts.feas_tol && status != FeasibilityStatus::Infeasible {
            return Err(Error::Indeterminate {
                best_margin: best.value,
                iterations,
            });
        }
    }

    Ok(Classification {
        status: status_of(best.value, opts.feas_tol),
        margin: best.value,
        direction: best.lambda,
        iterations,
    })
}

/// Riemannian gradient descent with Armijo backtracking, falling back to
/// diminishing subgradient steps once the line search stalls at a kink.
/// Returns (best value, best point, converged, iterations).
fn polish(
    constraints: &ConstraintSet,
    target: &[f64],
    start: &[f64],
    budget: usize,
    opts: &FeasibilityOptions,
) -> Result<(f64, Vec<f64>, bool, usize)> {
    let mut lam = start.to_vec();
    let (mut g, mut sub) = slack(constraints, target, &lam)?;
    let mut best = Best {
        value: g,
        lambda: lam.clone(),
    };
    let mut eta: f64 = 1.0;
    let mut used = 1;
    let mut kink_steps = 0usize;
    let mut last_improvement = 0usize;
    while used < budget {
        let along: f64 = sub.iter().zip(&lam).map(|(s, l)| s * l).sum();
        let tangent: Vec<f64> = sub.iter().zip(&lam).map(|(s, l)| s - along * l).collect();
        let tnorm2: f64 = tangent.iter().map(|x| x * x).sum();
        if tnorm2.sqrt() <= 1e-11 {
            return Ok((best.value, best.lambda, true, used));
        }
        if kink_steps == 0 {
            let mut step = (eta * 2.0).min(1e3);
            let mut accepted = None;
            while step > 1e-14 {
                let mut trial: Vec<f64> =
                    lam.iter().zip(&tangent).map(|(l, t)| l - step * t).collect();
                if normalize(&mut trial) {
                    let (gt, st) = slack(constraints, target, &trial)?;
                    used += 1;
                    if gt <= g - 1e-4 * step * tnorm2 {
                        accepted = Some((trial, gt, st));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((trial, gt, st)) => {
                    let gain = g - gt;
                    lam = trial;
                    g = gt;
                    sub = st;
                    eta = step;
                    best.offer(g, &lam);
                    if gain <= 1e-15 * g.abs().max(1.0) {
                        // Progress below float resolution.
                        return Ok((best.value, best.lambda, true, used));
                    }
                }
                None => {
                    if tnorm2.sqrt() < 1e-7 {
                        // Minimum reached to within float noise.
                        return Ok((best.value, best.lambda, true, used));
                    }
                    // Stalled at a kink of λ_max.
                    kink_steps = 1;
                    last_improvement = used;
                }
            }
        } else {
            let step = opts.step_scale * eta.min(1.0) / (kink_steps as f64).sqrt();
            let mut next: Vec<f64> = lam.iter().zip(&sub).map(|(l, s)| l - step * s).collect();
            if !normalize(&mut next) {
                break;
            }
            lam = next;
            let (gt, st) = slack(constraints, target, &lam)?;
            used += 1;
            kink_steps += 1;
            g = gt;
            sub = st;
            if g < best.value - 0.01 * opts.feas_tol {
                last_improvement = used;
            }
            best.offer(g, &lam);
            if used - last_improvement >= 500 {
                return Ok((best.value, best.lambda, true, used));
            }
        }
    }
    Ok((best.value, best.lambda, false, used))
}

/// Decides whether `m` is attainable and classifies it as interior, boundary
/// or infeasible, attaching a witness.
pub fn check_feasibility(
    constraints: &ConstraintSet,
    m: &MomentVector,
    opts: &SolverOptions,
) -> Result<FeasibilityVerdict> {
    let class = classify(constraints, m, &opts.feasibility)?;
    let linearly_dependent = !constraints.is_independent();
    let witness = match class.status {
        FeasibilityStatus::Infeasible => Witness::Direction(class.direction.clone()),
        status => {
            let solution = dual::solve_classified(constraints, m, status, opts)?;
            if solution.moment_residual > opts.feasibility.witness_tol {
                return Err(Error::Indeterminate {
                    best_margin: class.margin,
                    iterations: class.iterations,
                });
            }
            Witness::State(solution.sigma)
        }
    };
    Ok(FeasibilityVerdict {
        status: class.status,
        margin: class.margin,
        direction: class.direction,
        witness,
        linearly_dependent,
        iterations: class.iterations,
    })
}

/// Moment vectors of Haar-random pure states, an inner approximation of the
/// moment body. Deterministic for a fixed seed.
pub fn pure_state_moment_cloud(
    constraints: &ConstraintSet,
    samples: usize,
    seed: u64,
) -> Result<Vec<MomentVector>> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = constraints.dim();
    Ok((0..samples)
        .map(|_| {
            let psi: DVector<Complex64> = random::unit_vector(d, &mut rng);
            MomentVector(
                constraints
                    .observables()
                    .iter()
                    .map(|x| (psi.adjoint() * x.matrix() * &psi)[(0, 0)].re)
                    .collect(),
            )
        })
        .collect())
}
