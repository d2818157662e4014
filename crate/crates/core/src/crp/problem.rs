//! Assembly of the two half-step generalized eigenproblems.
//!
//! With `V` fixed, `Tr(Uᵀ A V) = vec(U)ᵀ vec(A V)`, so every bilinear trace in
//! the objective becomes an inner product with `u = vec(U)`. The quadratic
//! forms then collect into `M = Σ g gᵀ` (between-class terms), the within-class
//! analogue, and the constraint metric `D = (VᵀV) ⊗ I`, which satisfies
//! `uᵀ D u = Tr(UᵀU VᵀV)`. The `V` side mirrors this with every deviation
//! transposed.

use nalgebra::SymmetricEigen;

use crate::error::{CrpError, Result};
use crate::kronlin::{eye, kron, trace_bilinear_unchecked, Matrix, SymmetricProblem};
use crate::stats::{between_deviations, compute_class_stats, within_deviations, Dataset};

use super::ProjectionPair;

/// Between-class and within-class deviation matrices of one (possibly
/// deflated) dataset.
#[derive(Debug, Clone)]
pub struct Deviations {
    pub between: Vec<Matrix>,
    pub within: Vec<Matrix>,
    dims: (usize, usize),
}

impl Deviations {
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        let stats = compute_class_stats(d)?;
        Ok(Self {
            between: between_deviations(&stats),
            within: within_deviations(d, &stats),
            dims: d.dims(),
        })
    }

    pub fn from_parts(between: Vec<Matrix>, within: Vec<Matrix>) -> Result<Self> {
        let dims = between
            .first()
            .or(within.first())
            .map(|m| m.shape())
            .ok_or(CrpError::EmptyDataset)?;
        if between.iter().chain(&within).any(|m| m.shape() != dims) {
            return Err(CrpError::Dimension(
                "deviation matrices differ in shape".into(),
            ));
        }
        Ok(Self {
            between,
            within,
            dims,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// `Σ_i ‖X̄_i − X̄‖²_F`; zero when there is no between-class spread left.
    pub fn between_energy(&self) -> f64 {
        self.between.iter().map(|b| b.norm_squared()).sum()
    }
}

/// `(D, M, N)` for one half-step: maximize `xᵀMx / xᵀNx` subject to `xᵀDx = 1`.
#[derive(Debug, Clone)]
pub struct SideProblem {
    pub d: Matrix,
    pub m: Matrix,
    pub n: Matrix,
}

impl SideProblem {
    pub fn to_symmetric(&self) -> Result<SymmetricProblem> {
        SymmetricProblem::new(self.m.clone(), self.n.clone())
    }

    pub fn rayleigh(&self, x: &nalgebra::DVector<f64>) -> f64 {
        (&self.m * x).dot(x) / (&self.n * x).dot(x)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    U,
    V,
}

/// Problem in `u = vec(U)` with `V` held fixed.
pub fn assemble_u_problem(devs: &Deviations, v: &Matrix, lambda: f64) -> Result<SideProblem> {
    assemble(devs, v, lambda, Side::U)
}

/// Problem in `v = vec(V)` with `U` held fixed.
pub fn assemble_v_problem(devs: &Deviations, u: &Matrix, lambda: f64) -> Result<SideProblem> {
    assemble(devs, u, lambda, Side::V)
}

fn assemble(devs: &Deviations, fixed: &Matrix, lambda: f64, side: Side) -> Result<SideProblem> {
    let (l1, l2) = devs.dims;
    let (free_rows, fixed_rows) = match side {
        Side::U => (l1, l2),
        Side::V => (l2, l1),
    };
    if fixed.nrows() != fixed_rows || fixed.ncols() == 0 {
        return Err(CrpError::Dimension(format!(
            "fixed factor is {:?}, expected {fixed_rows}xk",
            fixed.shape()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(CrpError::IllPosed(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let k = fixed.ncols();
    let gram = fixed.transpose() * fixed;
    if lambda == 0.0 && is_singular(&gram) {
        return Err(CrpError::IllPosed(
            "Gram matrix of the fixed factor is singular and lambda = 0".into(),
        ));
    }

    // columns g = vec(A V) (u side) or vec(Aᵀ U) (v side)
    let stack = |mats: &[Matrix]| -> Matrix {
        let mut g = Matrix::zeros(free_rows * k, mats.len());
        for (j, a) in mats.iter().enumerate() {
            let prod = match side {
                Side::U => a * fixed,
                Side::V => a.tr_mul(fixed),
            };
            g.column_mut(j).copy_from_slice(prod.as_slice());
        }
        g
    };
    let g = stack(&devs.between);
    let w = stack(&devs.within);

    let d = kron(&gram, &eye(free_rows));
    let m = &g * g.transpose();
    let n = &w * w.transpose() + &d * lambda;
    Ok(SideProblem { d, m, n })
}

fn is_singular(gram: &Matrix) -> bool {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    max.is_nan() || max <= 0.0 || min <= 1e-12 * max
}

/// Regularized trace-ratio objective of one pair:
///
/// `Σ_i Tr(Uᵀ(X̄_i−X̄)V)² / (Σ_j Tr(Uᵀ(X_j−X̄_i)V)² + λ·Tr(UᵀU VᵀV))`.
pub fn objective_pair(pair: &ProjectionPair, devs: &Deviations, lambda: f64) -> Result<f64> {
    let (l1, l2) = devs.dims;
    if pair.u.nrows() != l1 || pair.v.nrows() != l2 || pair.u.ncols() != pair.v.ncols() {
        return Err(CrpError::Dimension(format!(
            "pair ({:?}, {:?}) does not fit {l1}x{l2} data",
            pair.u.shape(),
            pair.v.shape()
        )));
    }
    let sq = |a: &Matrix| trace_bilinear_unchecked(&pair.u, a, &pair.v).powi(2);
    let num: f64 = devs.between.iter().map(sq).sum();
    let den: f64 = devs.within.iter().map(sq).sum::<f64>() + lambda * pair.constraint_value();
    if den.is_nan() || den <= 0.0 {
        return Err(CrpError::IllPosed(format!(
            "objective denominator is {den:e}"
        )));
    }
    Ok(num / den)
}
