//! Dense Kronecker/vectorization kernels and a symmetric-definite generalized
//! eigensolver.
//!
//! `vec` stacks columns, so that `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. nalgebra
//! stores matrices column-major, which makes `vec`/`unvec` plain copies of
//! the backing slice.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{CrpError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance for the symmetry check on generalized eigenproblem inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    let mut out = Matrix::zeros(m * p, n * q);
    for j in 0..n {
        for i in 0..m {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * p, j * q), (p, q));
            block.zip_apply(b, |o, x| *o = s * x);
        }
    }
    out
}

/// Column-stacking vectorization.
pub fn vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`]: fills an `rows × cols` matrix column by column.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if rows == 0 || cols == 0 || v.len() != rows * cols {
        return Err(CrpError::Dimension(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v))
}

/// `Tr(Uᵀ X V)` in `O(l1·l2·k)`, without forming any Kronecker product.
pub fn trace_bilinear(u: &Matrix, x: &Matrix, v: &Matrix) -> Result<f64> {
    if u.nrows() != x.nrows() || v.nrows() != x.ncols() || u.ncols() != v.ncols() {
        return Err(CrpError::Dimension(format!(
            "Tr(UᵀXV) with U {:?}, X {:?}, V {:?}",
            u.shape(),
            x.shape(),
            v.shape()
        )));
    }
    Ok(trace_bilinear_unchecked(u, x, v))
}

pub(crate) fn trace_bilinear_unchecked(u: &Matrix, x: &Matrix, v: &Matrix) -> f64 {
    let xv = x * v;
    u.iter().zip(xv.iter()).map(|(a, b)| a * b).sum()
}

/// `Tr(AᵀB)`, the Frobenius inner product.
pub fn frobenius_dot(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// A pair `(M, N)` for the problem `M q = λ N q`, with `M` symmetric PSD and
/// `N` symmetric PD. Both are stored symmetrized.
#[derive(Debug, Clone)]
pub struct SymmetricProblem {
    m: Matrix,
    n: Matrix,
}

impl SymmetricProblem {
    pub fn new(m: Matrix, n: Matrix) -> Result<Self> {
        if !m.is_square() || !n.is_square() || m.nrows() != n.nrows() || m.nrows() == 0 {
            return Err(CrpError::Dimension(format!(
                "generalized eigenproblem needs equal square matrices, got {:?} and {:?}",
                m.shape(),
                n.shape()
            )));
        }
        Ok(Self {
            m: symmetrize_checked(m, "M")?,
            n: symmetrize_checked(n, "N")?,
        })
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn n(&self) -> &Matrix {
        &self.n
    }

    /// Generalized Rayleigh quotient `qᵀMq / qᵀNq`.
    pub fn rayleigh(&self, q: &Vector) -> f64 {
        (&self.m * q).dot(q) / (&self.n * q).dot(q)
    }
}

fn symmetrize_checked(a: Matrix, name: &str) -> Result<Matrix> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(CrpError::NumericalFailure(format!(
            "{name} has non-finite entries"
        )));
    }
    let scale = a.amax();
    let asym = (&a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(CrpError::Precondition(format!(
            "{name} is not symmetric (max asymmetry {asym:e}, scale {scale:e})"
        )));
    }
    Ok((&a + a.transpose()) * 0.5)
}

/// How to handle a Cholesky failure of `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jitter {
    /// Fail immediately.
    Never,
    /// Add `1e-12·tr(N)/n` to the diagonal, escalating ×10, up to 3 retries.
    Escalating,
}

/// Generalized eigenpair; `vector` has unit Euclidean norm and its
/// largest-magnitude component is positive.
#[derive(Debug, Clone)]
pub struct GenEigenpair {
    pub vector: Vector,
    pub value: f64,
}

fn factor(n: &Matrix, jitter: Jitter) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(n.clone()) {
        return Ok(chol);
    }
    if jitter == Jitter::Never {
        return Err(CrpError::Singular(format!(
            "Cholesky factorization of {}x{} matrix failed",
            n.nrows(),
            n.ncols()
        )));
    }
    let order = n.nrows() as f64;
    let base = 1e-12 * n.trace() / order;
    if base > 0.0 && base.is_finite() {
        let mut eps = base;
        for attempt in 1..=3 {
            let mut shifted = n.clone();
            for i in 0..n.nrows() {
                shifted[(i, i)] += eps;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                log::debug!("Cholesky succeeded after jitter {eps:e} (attempt {attempt})");
                return Ok(chol);
            }
            eps *= 10.0;
        }
    }
    Err(CrpError::Singular(format!(
        "Cholesky factorization of {}x{} matrix failed after jitter",
        n.nrows(),
        n.ncols()
    )))
}

/// Makes the largest-magnitude entry positive (first one wins on ties).
pub fn fix_sign(v: &mut Vector) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Top `count` generalized eigenpairs, ordered by non-increasing eigenvalue.
///
/// Solved by whitening: with `N = LLᵀ`, the symmetric matrix `L⁻¹ M L⁻ᵀ`
/// shares the generalized eigenvalues and its eigenvectors `y` map back via
/// `q = L⁻ᵀ y`.
pub fn solve_gen_eig(
    p: &SymmetricProblem,
    count: usize,
    jitter: Jitter,
) -> Result<Vec<GenEigenpair>> {
    let order = p.order();
    if count == 0 || count > order {
        return Err(CrpError::Dimension(format!(
            "requested {count} eigenpairs from a problem of order {order}"
        )));
    }
    let l = factor(&p.n, jitter)?.unpack();
    let singular = || CrpError::Singular("triangular solve failed".into());
    let y = l.solve_lower_triangular(&p.m).ok_or_else(singular)?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(singular)?;
    let c = (&c + c.transpose()) * 0.5;
    if c.iter().any(|x| !x.is_finite()) {
        return Err(CrpError::NumericalFailure(
            "whitened matrix is not finite".into(),
        ));
    }

    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..order).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    idx.into_iter()
        .take(count)
        .map(|i| {
            let y = eig.eigenvectors.column(i).into_owned();
            let mut q = l.tr_solve_lower_triangular(&y).ok_or_else(singular)?;
            let norm = q.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(CrpError::NumericalFailure(
                    "eigenvector back-substitution failed".into(),
                ));
            }
            q /= norm;
            fix_sign(&mut q);
            Ok(GenEigenpair {
                vector: q,
                value: eig.eigenvalues[i],
            })
        })
        .collect()
}

/// Dominant generalized eigenpair; the eigenvalue is clamped at zero since
/// `M` is PSD.
pub fn solve_largest_gen_eig(p: &SymmetricProblem) -> Result<GenEigenpair> {
    let mut top = solve_gen_eig(p, 1, Jitter::Escalating)?;
    let mut pair = top.pop().expect("one eigenpair requested");
    pair.value = pair.value.max(0.0);
    Ok(pair)
}

/// Rescales `q` so that `qᵀ D q = 1`.
pub fn d_normalize(q: &Vector, d: &Matrix) -> Result<Vector> {
    if d.nrows() != q.len() || !d.is_square() {
        return Err(CrpError::Dimension(format!(
            "d_normalize with q of length {} and D {:?}",
            q.len(),
            d.shape()
        )));
    }
    let s = (d * q).dot(q);
    let floor = 1e-14 * q.norm_squared() * d.amax();
    if !s.is_finite() || s <= floor {
        return Err(CrpError::DegenerateDirection(s));
    }
    Ok(q / s.sqrt())
}

/// Identity matrix of order `n`.
pub fn eye(n: usize) -> Matrix {
    Matrix::identity(n, n)
}
