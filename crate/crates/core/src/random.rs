//! Seeded random generators for operators, states and vectors.
//!
//! Everything here draws from a caller-supplied RNG, so runs are
//! reproducible when the caller seeds a portable generator such as
//! `ChaCha8Rng`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, DensityMatrix, HermitianOperator};

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// GUE-style Hermitian matrix `(G + G†)/2`.
pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    HermitianOperator::from_matrix_unchecked(ginibre(dim, dim, rng))
}

/// Ginibre-ensemble state `G G† / tr(G G†)`; full rank with probability one.
pub fn state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, dim, rng);
    DensityMatrix::from_positive(&g * g.adjoint()).expect("Ginibre product is positive")
}

/// Haar-random unit vector (normalized complex Gaussian).
pub fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<Complex64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| complex_gaussian(rng));
        let n = v.norm();
        if n > 1e-300 {
            return v / Complex64::new(n, 0.0);
        }
    }
}

pub fn pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let v = unit_vector(dim, rng);
    DensityMatrix::pure(v.as_slice()).expect("unit vector")
}

/// Uniformly distributed direction on the real unit sphere in `R^k`.
pub fn real_unit_vector<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random Hermitian contraction, scaled so that `‖B‖ = scale`.
pub fn contraction<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> HermitianOperator {
    let h = hermitian(dim, rng);
    let norm = h.operator_norm().unwrap_or(1.0);
    if norm > 0.0 {
        h.scale(scale / norm)
    } else {
        h
    }
}
