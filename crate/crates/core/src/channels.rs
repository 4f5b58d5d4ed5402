//! CPTP maps in Kraus form, their Heisenberg-picture adjoints, and the
//! trace-norm / operator-norm contraction checks they satisfy.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{trace_norm, CMatrix, DensityMatrix, HermitianOperator};
use crate::random;

/// Admissible deviation of `Σ K†K` from the identity.
pub const COMPLETENESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<CMatrix>,
}

fn completeness_residual(dim_in: usize, kraus: &[CMatrix]) -> f64 {
    let mut acc = CMatrix::zeros(dim_in, dim_in);
    for k in kraus {
        acc += k.adjoint() * k;
    }
    (acc - CMatrix::identity(dim_in, dim_in))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

impl KrausChannel {
    /// Validates shapes and trace preservation `Σ K_j† K_j = I`.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidInput("a channel needs at least one Kraus operator".into()))?;
        let (dim_out, dim_in) = first.shape();
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::InvalidInput("Kraus operators must be nonempty".into()));
        }
        for k in &kraus {
            if k.shape() != (dim_out, dim_in) {
                return Err(Error::InvalidInput(format!(
                    "Kraus shapes differ: {:?} vs {:?}",
                    k.shape(),
                    (dim_out, dim_in)
                )));
            }
            if k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let residual = completeness_residual(dim_in, &kraus);
        if !(residual <= COMPLETENESS_TOL) {
            return Err(Error::InvalidInput(format!(
                "Kraus operators are not trace preserving (residual {residual:e})"
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            kraus,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![CMatrix::identity(dim, dim)]).expect("identity is trace preserving")
    }

    /// Completely depolarizing qubit channel, `ρ ↦ I/2`, via the four
    /// Pauli Kraus operators scaled by ½.
    pub fn depolarizing_qubit() -> Self {
        let half = Complex64::new(0.5, 0.0);
        let ops = [
            HermitianOperator::identity(2),
            HermitianOperator::pauli_x(),
            HermitianOperator::pauli_y(),
            HermitianOperator::pauli_z(),
        ];
        Self::new(ops.iter().map(|p| p.matrix() * half).collect()).expect("Pauli twirl")
    }

    /// Partial trace over the second factor of `C^a ⊗ C^b`.
    pub fn partial_trace_second(a: usize, b: usize) -> Self {
        let kraus = (0..b)
            .map(|j| {
                CMatrix::from_fn(a, a * b, |row, col| {
                    if col == row * b + j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Self::new(kraus).expect("partial trace is trace preserving")
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus_ops(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn completeness_residual(&self) -> f64 {
        completeness_residual(self.dim_in, &self.kraus)
    }

    fn map(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    fn adjoint_map(&self, b: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            out += k.adjoint() * b * k;
        }
        out
    }
}

fn expect_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `Φ(ρ) = Σ K_j ρ K_j†`.
pub fn apply(channel: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    expect_dim(channel.dim_in, rho.dim())?;
    DensityMatrix::from_positive(channel.map(rho.matrix()))
}

/// Image of an observable under the adjoint map, with a unitality flag.
#[derive(Debug, Clone)]
pub struct AdjointImage {
    pub operator: HermitianOperator,
    /// Whether `Φ*(I) = I` within the completeness tolerance.
    pub unital: bool,
}

/// `Φ*(B) = Σ K_j† B K_j`.
pub fn adjoint_apply(channel: &KrausChannel, b: &HermitianOperator) -> Result<AdjointImage> {
    expect_dim(channel.dim_out, b.dim())?;
    Ok(AdjointImage {
        operator: HermitianOperator::from_matrix_unchecked(channel.adjoint_map(b.matrix())),
        unital: channel.completeness_residual() <= COMPLETENESS_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPair {
    pub lhs: f64,
    pub rhs: f64,
}

impl NormPair {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// `‖Φ(ρ) − Φ(σ)‖₁` against `‖ρ − σ‖₁`.
pub fn contraction_check(
    channel: &KrausChannel,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<NormPair> {
    expect_dim(channel.dim_in, rho.dim())?;
    expect_dim(channel.dim_in, sigma.dim())?;
    let diff = rho.matrix() - sigma.matrix();
    Ok(NormPair {
        lhs: trace_norm(&channel.map(&diff))?,
        rhs: trace_norm(&diff)?,
    })
}

/// `‖Φ*(B)‖` against `‖B‖` in operator norm.
pub fn adjoint_norm_check(channel: &KrausChannel, b: &HermitianOperator) -> Result<NormPair> {
    let image = adjoint_apply(channel, b)?;
    Ok(NormPair {
        lhs: image.operator.operator_norm()?,
        rhs: b.operator_norm()?,
    })
}

/// Channel from a Haar-random isometry `W: C^d → C^r ⊗ C^e` with
/// `K_j = (I_r ⊗ ⟨j|) W`. Deterministic for a fixed seed.
pub fn random_channel(dim_in: usize, dim_out: usize, env_dim: usize, seed: u64) -> Result<KrausChannel> {
    if dim_in == 0 || dim_out == 0 || env_dim == 0 {
        return Err(Error::Precondition("dimensions must be positive".into()));
    }
    if dim_out * env_dim < dim_in {
        return Err(Error::Precondition(format!(
            "no isometry from dimension {dim_in} into {dim_out}x{env_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random::ginibre(dim_out * env_dim, dim_in, &mut rng);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column phases so that Q is Haar distributed.
    let mut w = q;
    for c in 0..dim_in {
        let diag = r[(c, c)];
        let phase = if diag.norm() > 0.0 {
            diag / Complex64::new(diag.norm(), 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..w.nrows() {
            w[(row, c)] *= phase;
        }
    }
    let kraus = (0..env_dim)
        .map(|j| DMatrix::from_fn(dim_out, dim_in, |a, b| w[(a * env_dim + j, b)]))
        .collect();
    KrausChannel::new(kraus)
}
