//! Hermitian operators, density matrices, and the entropy functionals built
//! on their spectra.
//!
//! All logarithms are natural. Every derived quantity (matrix exponentials,
//! entropies, distances) goes through a single spectral decomposition so that
//! the conventions below apply uniformly:
//!
//! - eigenvalues of a density matrix below [`ENTROPY_CUTOFF`] contribute
//!   nothing to `-Σ p ln p`;
//! - the kernel of the second argument of the relative entropy is the span of
//!   eigenvectors with eigenvalue below [`KERNEL_TOL`], and mass above
//!   [`SUPPORT_MASS_TOL`] on that kernel yields `+∞`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance applied when constructing operators.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted (and clamped to zero) for a state.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
/// Admissible deviation of a state's trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues below this are treated as exact zeros in `p ln p`.
pub const ENTROPY_CUTOFF: f64 = 1e-14;
/// Eigenvalues of `σ` below this span its numerical kernel.
pub const KERNEL_TOL: f64 = 1e-12;
/// Mass of `ρ` on the kernel of `σ` above this makes `D(ρ‖σ)` infinite.
pub const SUPPORT_MASS_TOL: f64 = 1e-10;

/// Largest matrix entry magnitude accepted anywhere in the library.
pub const MAX_ENTRY: f64 = 1e100;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Decomposes a Hermitian matrix. The input is not checked for hermiticity;
    /// only its lower triangle is read.
    pub fn of(matrix: &CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let eig = SymmetricEigen::try_new(matrix.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or(Error::EigenFailure)?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenFailure);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `U f(Λ) U†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let u = &self.eigenvectors;
        let scaled = DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&v| Complex64::new(f(v), 0.0)),
        );
        let mut left = u.clone();
        for (j, mut col) in left.column_iter_mut().enumerate() {
            col *= scaled[j];
        }
        left * u.adjoint()
    }

    /// Matrix of `op` in the eigenbasis, `U† op U`.
    pub fn in_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * op * &self.eigenvectors
    }
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    Ok(m.nrows())
}

fn check_entries(m: &CMatrix) -> Result<()> {
    let ok = m.iter().all(|z| {
        z.re.is_finite() && z.im.is_finite() && z.re.abs() <= MAX_ENTRY && z.im.abs() <= MAX_ENTRY
    });
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// A d×d complex self-adjoint matrix, stored exactly symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, HERMITIAN_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        check_square(&matrix)?;
        check_entries(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > tol {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self {
            matrix: symmetrize(&matrix),
        })
    }

    /// Builds from real and imaginary parts given row-major.
    pub fn from_parts(re: &[f64], im: &[f64], dim: usize) -> Result<Self> {
        Self::new(matrix_from_parts(re, im, dim)?)
    }

    /// Builds from a real symmetric matrix given row-major.
    pub fn from_real(re: &[f64], dim: usize) -> Result<Self> {
        Self::from_parts(re, &vec![0.0; re.len()], dim)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self {
            matrix: symmetrize(&matrix),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn pauli_x() -> Self {
        Self::from_real(&[0.0, 1.0, 1.0, 0.0], 2).unwrap()
    }

    pub fn pauli_y() -> Self {
        Self::from_parts(&[0.0; 4], &[0.0, -1.0, 1.0, 0.0], 2).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_real(&[1.0, 0.0, 0.0, -1.0], 2).unwrap()
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> Result<SpectralDecomposition> {
        SpectralDecomposition::of(&self.matrix)
    }

    /// Real linear combination `Σ c_i A_i`.
    pub fn linear_combination(coeffs: &[f64], ops: &[HermitianOperator], dim: usize) -> Self {
        let mut acc = CMatrix::zeros(dim, dim);
        for (c, op) in coeffs.iter().zip(ops) {
            acc += op.matrix() * Complex64::new(*c, 0.0);
        }
        Self { matrix: acc }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            matrix: &self.matrix * Complex64::new(c, 0.0),
        }
    }

    /// `tr(A)`, real for a Hermitian matrix.
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Operator norm, the largest absolute eigenvalue.
    pub fn operator_norm(&self) -> Result<f64> {
        let s = self.spectrum()?;
        Ok(s.min().abs().max(s.max().abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert–Schmidt inner product `tr(A B)`, real for Hermitian arguments.
    pub fn hs_inner(&self, other: &HermitianOperator) -> f64 {
        trace_of_product(&self.matrix, &other.matrix).re
    }
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn matrix_from_parts(re: &[f64], im: &[f64], dim: usize) -> Result<CMatrix> {
    if re.len() != dim * dim || im.len() != dim * dim {
        return Err(Error::InvalidInput(format!(
            "expected {} entries per part, got {} and {}",
            dim * dim,
            re.len(),
            im.len()
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(re[i * dim + j], im[i * dim + j])
    }))
}

/// A positive semidefinite unit-trace matrix together with its spectrum.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
    spectrum: SpectralDecomposition,
}

impl DensityMatrix {
    /// Validates hermiticity, positivity and unit trace. Slightly negative
    /// eigenvalues are clamped to zero and the trace renormalized exactly.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        check_entries(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let matrix = symmetrize(&matrix);
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(trace));
        }
        let spectrum = SpectralDecomposition::of(&matrix)?;
        if spectrum.min() < -NEGATIVE_EIGEN_TOL {
            return Err(Error::NotPositive(spectrum.min()));
        }
        Ok(Self::from_spectrum(spectrum))
    }

    /// Builds `U diag(p) U†` from (possibly unnormalized) nonnegative weights.
    pub(crate) fn from_spectrum(spectrum: SpectralDecomposition) -> Self {
        let n = spectrum.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| spectrum.eigenvalues[a].total_cmp(&spectrum.eigenvalues[b]));
        let clamped: Vec<f64> = order.iter().map(|&i| spectrum.eigenvalues[i].max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let eigenvalues = DVector::from_iterator(n, clamped.iter().map(|p| p / total));
        let mut eigenvectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &spectrum.eigenvectors.column(src));
        }
        let spectrum = SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        };
        let matrix = symmetrize(&spectrum.reconstruct_with(|p| p));
        Self { matrix, spectrum }
    }

    /// Normalizes an arbitrary positive semidefinite matrix, e.g. `G G†`.
    pub fn from_positive(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let matrix = symmetrize(&matrix);
        let trace = matrix.trace().re;
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(Error::InvalidTrace(trace));
        }
        Self::new(matrix / Complex64::new(trace, 0.0))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let spectrum = SpectralDecomposition {
            eigenvalues: DVector::from_element(dim, 1.0 / dim as f64),
            eigenvectors: CMatrix::identity(dim, dim),
        };
        Self::from_spectrum(spectrum)
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("zero or non-finite state vector".into()));
        }
        let v = v / Complex64::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    /// Computational basis projector `|i⟩⟨i|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut p = vec![0.0; dim];
        p[index] = 1.0;
        Self::diagonal(&p).expect("basis projector is a valid state")
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let op = HermitianOperator::diagonal(probs)?;
        Self::new(op.matrix().clone())
    }

    /// Convex combination `(1 − t)·self + t·other`.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("mixing weight {t} outside [0, 1]")));
        }
        let m = &self.matrix * Complex64::new(1.0 - t, 0.0) + &other.matrix * Complex64::new(t, 0.0);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.spectrum.eigenvalues
    }

    /// `tr(ρ A)`.
    pub fn expectation(&self, op: &HermitianOperator) -> f64 {
        trace_of_product(&self.matrix, op.matrix()).re
    }

    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator {
            matrix: self.matrix.clone(),
        }
    }
}

/// `G = exp(−H + sI)` with `s = λ_min(H)`, so the largest eigenvalue of `G`
/// is exactly one and `exp(−H) = e^{−s} G`.
pub fn matrix_exp_shifted(h: &HermitianOperator) -> Result<(HermitianOperator, f64)> {
    let eig = h.spectrum()?;
    let shift = eig.min();
    let g = eig.reconstruct_with(|v| (-(v - shift)).exp());
    Ok((HermitianOperator::from_matrix_unchecked(g), shift))
}

/// `−Σ p ln p` over the spectrum, in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(rho.eigenvalues().iter().copied())
}

pub(crate) fn entropy_of_spectrum(probs: impl Iterator<Item = f64>) -> f64 {
    let s: f64 = probs
        .filter(|&p| p >= ENTROPY_CUTOFF)
        .map(|p| -p * p.ln())
        .sum();
    s.max(0.0)
}

fn ensure_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// `D(ρ‖σ) = tr ρ ln ρ − tr ρ ln σ`, or `f64::INFINITY` when the support of
/// `ρ` is not contained in the support of `σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    ensure_same_dim(rho.dim(), sigma.dim())?;
    let neg_entropy = -von_neumann_entropy(rho);
    let rho_in_sigma = sigma.spectrum().in_eigenbasis(rho.matrix());
    let mut cross = 0.0;
    let mut kernel_mass = 0.0;
    for (b, &q) in sigma.eigenvalues().iter().enumerate() {
        let weight = rho_in_sigma[(b, b)].re;
        if q < KERNEL_TOL {
            kernel_mass += weight.max(0.0);
        } else {
            cross += weight * q.ln();
        }
    }
    if kernel_mass > SUPPORT_MASS_TOL {
        return Ok(f64::INFINITY);
    }
    Ok((neg_entropy - cross).max(0.0))
}

/// `‖ρ − σ‖₁`, the sum of absolute eigenvalues of the difference.
pub fn trace_norm_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    ensure_same_dim(rho.dim(), sigma.dim())?;
    trace_norm(&(rho.matrix() - sigma.matrix()))
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(diff: &CMatrix) -> Result<f64> {
    let eig = SpectralDecomposition::of(&symmetrize(diff))?;
    Ok(eig.eigenvalues.iter().map(|v| v.abs()).sum())
}

pub fn lambda_max(h: &HermitianOperator) -> Result<f64> {
    Ok(h.spectrum()?.max())
}
