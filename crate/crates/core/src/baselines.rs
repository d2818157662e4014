//! Reference methods: classical LDA on vectorized samples, and the
//! alternating two-sided 2DLDA.

use serde::{Deserialize, Serialize};

use crate::error::{CrpError, Result};
use crate::kronlin::{solve_gen_eig, vec, Jitter, Matrix, SymmetricProblem, Vector};
use crate::stats::{between_deviations, compute_class_stats, within_deviations, Dataset};

/// Auto ridge is this fraction of the average within-class scatter diagonal.
pub const AUTO_RIDGE_FACTOR: f64 = 1e-3;

fn resolve_ridge(ridge: Option<f64>, scatter: &Matrix) -> Result<f64> {
    match ridge {
        Some(r) if r >= 0.0 && r.is_finite() => Ok(r),
        Some(r) => Err(CrpError::Config(format!(
            "ridge must be finite and non-negative, got {r}"
        ))),
        None => Ok(AUTO_RIDGE_FACTOR * scatter.trace() / scatter.nrows() as f64),
    }
}

/// Top `count` generalized eigenvectors of `(sb, sw + ridge·I)` as columns.
fn top_directions(
    sb: Matrix,
    mut sw: Matrix,
    ridge: f64,
    count: usize,
) -> Result<(Matrix, Vec<f64>)> {
    let n = sw.nrows();
    for i in 0..n {
        sw[(i, i)] += ridge;
    }
    let jitter = if ridge > 0.0 {
        Jitter::Escalating
    } else {
        Jitter::Never
    };
    let pairs = solve_gen_eig(&SymmetricProblem::new(sb, sw)?, count, jitter)?;
    let mut w = Matrix::zeros(n, count);
    let mut values = Vec::with_capacity(count);
    for (j, p) in pairs.into_iter().enumerate() {
        w.set_column(j, &p.vector);
        values.push(p.value.max(0.0));
    }
    Ok((w, values))
}

/// Linear map `x ↦ Wᵀ(vec(x) − mean)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    #[serde(with = "crate::dense")]
    pub w: Matrix,
    pub eigenvalues: Vec<f64>,
    pub ridge: f64,
    #[serde(with = "crate::dense::vector")]
    pub mean: Vector,
    pub data_dims: (usize, usize),
}

/// Classical LDA on column-stacked samples.
///
/// `ridge = None` picks `1e-3·tr(S_w)/dim`; `Some(0.0)` requires `S_w` to be
/// positive definite.
pub fn fit_lda(d: &Dataset, dims: usize, ridge: Option<f64>) -> Result<LdaModel> {
    let (l1, l2) = d.dims();
    let dim = l1 * l2;
    if dims == 0 || dims > dim {
        return Err(CrpError::Config(format!(
            "LDA dims {dims} must lie in 1..={dim}"
        )));
    }
    let stats = compute_class_stats(d)?;

    let between = between_deviations(&stats);
    let mut b = Matrix::zeros(dim, between.len());
    for (i, (dev, &n)) in between.iter().zip(&stats.counts).enumerate() {
        b.set_column(i, &(vec(dev) * (n as f64).sqrt()));
    }
    let within = within_deviations(d, &stats);
    let mut w = Matrix::zeros(dim, within.len());
    for (j, dev) in within.iter().enumerate() {
        w.set_column(j, &vec(dev));
    }
    let sb = &b * b.transpose();
    let sw = &w * w.transpose();
    let ridge = resolve_ridge(ridge, &sw)?;
    let (w, eigenvalues) = top_directions(sb, sw, ridge, dims)?;
    Ok(LdaModel {
        w,
        eigenvalues,
        ridge,
        mean: vec(&stats.global_mean),
        data_dims: (l1, l2),
    })
}

impl LdaModel {
    pub fn embed(&self, x: &Matrix) -> Result<Vector> {
        if x.shape() != self.data_dims {
            return Err(CrpError::Dimension(format!(
                "input is {:?}, model expects {:?}",
                x.shape(),
                self.data_dims
            )));
        }
        Ok(self.w.tr_mul(&(vec(x) - &self.mean)))
    }
}

pub fn embed_lda(m: &LdaModel, x: &Matrix) -> Result<Vector> {
    m.embed(x)
}

/// Two-sided projection `X ↦ Uᵀ X V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoDldaModel {
    #[serde(with = "crate::dense")]
    pub u: Matrix,
    #[serde(with = "crate::dense")]
    pub v: Matrix,
    pub iterations: usize,
    /// `Tr(S̃_w⁻¹ S̃_b)` after each iteration. Not guaranteed monotone.
    pub objective_trace: Vec<f64>,
}

struct SideScatter {
    within: Matrix,
    between: Matrix,
}

/// Row-side (`transpose = false`) or column-side scatter with the other
/// factor fixed: `Σ A P Pᵀ Aᵀ` or `Σ Aᵀ P Pᵀ A`.
fn side_scatter(
    within: &[Matrix],
    between: &[Matrix],
    counts: &[usize],
    fixed: &Matrix,
    transpose: bool,
) -> SideScatter {
    let project = |a: &Matrix| {
        if transpose {
            a.tr_mul(fixed)
        } else {
            a * fixed
        }
    };
    let size = if transpose {
        within[0].ncols()
    } else {
        within[0].nrows()
    };
    let mut sw = Matrix::zeros(size, size);
    for a in within {
        let p = project(a);
        sw += &p * p.transpose();
    }
    let mut sb = Matrix::zeros(size, size);
    for (a, &n) in between.iter().zip(counts) {
        let p = project(a);
        sb += (&p * p.transpose()) * n as f64;
    }
    SideScatter {
        within: sw,
        between: sb,
    }
}

fn trace_ratio(sw: &Matrix, sb: &Matrix) -> f64 {
    match nalgebra::Cholesky::new(sw.clone()) {
        Some(chol) => chol.solve(sb).trace(),
        None => f64::NAN,
    }
}

/// Alternating 2DLDA starting from `V = [I; 0]`, `iters` sweeps of
/// (update U, update V).
pub fn fit_2dlda(
    d: &Dataset,
    d1: usize,
    d2: usize,
    iters: usize,
    ridge: Option<f64>,
) -> Result<TwoDldaModel> {
    let (l1, l2) = d.dims();
    if d1 == 0 || d1 > l1 || d2 == 0 || d2 > l2 {
        return Err(CrpError::Config(format!(
            "2DLDA dims ({d1}, {d2}) must lie within ({l1}, {l2})"
        )));
    }
    if iters == 0 {
        return Err(CrpError::Config(
            "2DLDA needs at least one iteration".into(),
        ));
    }
    let stats = compute_class_stats(d)?;
    let between = between_deviations(&stats);
    let within = within_deviations(d, &stats);

    let mut v = Matrix::zeros(l2, d2);
    for i in 0..d2 {
        v[(i, i)] = 1.0;
    }
    let mut u = Matrix::zeros(l1, d1);
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let rows = side_scatter(&within, &between, &stats.counts, &v, false);
        let r = resolve_ridge(ridge, &rows.within)?;
        u = top_directions(rows.between, rows.within, r, d1)?.0;

        let cols = side_scatter(&within, &between, &stats.counts, &u, true);
        let r = resolve_ridge(ridge, &cols.within)?;
        v = top_directions(cols.between.clone(), cols.within.clone(), r, d2)?.0;

        let sw = v.tr_mul(&cols.within) * &v + v.tr_mul(&v) * r;
        let sb = v.tr_mul(&cols.between) * &v;
        trace.push(trace_ratio(&sw, &sb));
    }
    Ok(TwoDldaModel {
        u,
        v,
        iterations: iters,
        objective_trace: trace,
    })
}

impl TwoDldaModel {
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        if x.nrows() != self.u.nrows() || x.ncols() != self.v.nrows() {
            return Err(CrpError::Dimension(format!(
                "input is {:?}, model expects {}x{}",
                x.shape(),
                self.u.nrows(),
                self.v.nrows()
            )));
        }
        Ok(self.u.tr_mul(x) * &self.v)
    }

    /// Column-stacked `Uᵀ x V`, of length `d1·d2`.
    pub fn embed(&self, x: &Matrix) -> Result<Vector> {
        Ok(vec(&self.project(x)?))
    }
}

pub fn embed_2dlda(m: &TwoDldaModel, x: &Matrix) -> Result<Matrix> {
    m.project(x)
}
