//! Compound rank-k projections.
//!
//! A model is an ordered list of `h` pairs `(U_p, V_p)`, `U_p: l1×k`,
//! `V_p: l2×k`. Pair `p` maximizes a regularized ratio of between-class to
//! within-class energy of the feature `Tr(U_pᵀ X V_p)`, under the scale
//! constraint `Tr(U_pᵀU_p V_pᵀV_p) = 1`, on data from which the directions of
//! pairs `1..p−1` have been removed. Each pair is fit by alternating two
//! generalized eigenproblems (see [`problem`]); every half-step maximizes the
//! objective in one factor, so the per-iteration objective never decreases.

pub mod problem;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CrpError, Result};
use crate::kronlin::{d_normalize, frobenius_dot, solve_largest_gen_eig, unvec, Matrix, Vector};
use crate::stats::Dataset;

pub use problem::{
    assemble_u_problem, assemble_v_problem, objective_pair, Deviations, SideProblem,
};

/// Final objective at or below this marks a pair as degenerate.
pub const DEGENERATE_OBJECTIVE: f64 = 1e-12;

/// Deflation refuses pairs whose constraint residual exceeds this.
pub const DEFLATION_CONSTRAINT_TOL: f64 = 1e-6;

/// One rank-k bilinear projection `X ↦ Tr(Uᵀ X V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPair {
    #[serde(with = "crate::dense")]
    pub u: Matrix,
    #[serde(with = "crate::dense")]
    pub v: Matrix,
}

impl ProjectionPair {
    /// `Tr(UᵀU VᵀV)`, which equals `‖vec(UVᵀ)‖²`.
    pub fn constraint_value(&self) -> f64 {
        frobenius_dot(
            &(self.u.transpose() * &self.u),
            &(self.v.transpose() * &self.v),
        )
    }

    pub fn constraint_residual(&self) -> f64 {
        (self.constraint_value() - 1.0).abs()
    }

    /// `U Vᵀ`, the direction removed by deflation.
    pub fn direction(&self) -> Matrix {
        &self.u * self.v.transpose()
    }

    pub fn feature(&self, x: &Matrix) -> f64 {
        crate::kronlin::trace_bilinear_unchecked(&self.u, x, &self.v)
    }
}

/// Starting value of `V` for each pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Init {
    /// `l2×k` matrix with `value·I_k` in its top block, zeros below.
    Diagonal { value: f64 },
    /// Standard normal entries; pair `p` draws from stream `p` of `seed`.
    Random { seed: u64 },
}

impl Default for Init {
    fn default() -> Self {
        Init::Diagonal { value: 1.0 }
    }
}

impl Init {
    pub fn initial_v(&self, l2: usize, k: usize, pair_index: usize) -> Matrix {
        match *self {
            Init::Diagonal { value } => {
                let mut v = Matrix::zeros(l2, k);
                for i in 0..k.min(l2) {
                    v[(i, i)] = value;
                }
                v
            }
            Init::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(pair_index as u64);
                Matrix::from_fn(l2, k, |_, _| StandardNormal.sample(&mut rng))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Init::Diagonal { value } => format!("diag{value}"),
            Init::Random { seed } => format!("random{seed}"),
        }
    }
}

fn default_k() -> usize {
    2
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    50
}
fn default_replay() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpConfig {
    /// Number of pairs.
    pub h: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub lambda: f64,
    /// Stop once the relative objective change falls below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub init: Init,
    /// Deflate inputs by earlier pairs before extracting each feature.
    #[serde(default = "default_replay")]
    pub replay: bool,
}

impl CrpConfig {
    pub fn new(h: usize, lambda: f64) -> Self {
        Self {
            h,
            k: default_k(),
            lambda,
            tol: default_tol(),
            max_iter: default_max_iter(),
            init: Init::default(),
            replay: default_replay(),
        }
    }

    /// `(c−1)²` pairs.
    pub fn for_classes(classes: usize, lambda: f64) -> Self {
        let c = classes.saturating_sub(1).max(1);
        Self::new(c * c, lambda)
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self, dims: (usize, usize)) -> Result<()> {
        let (l1, l2) = dims;
        let fail = |msg: String| Err(CrpError::Config(msg));
        if self.h == 0 {
            return fail("h must be at least 1".into());
        }
        if self.k == 0 || self.k > l1.min(l2) {
            return fail(format!("k = {} must lie in 1..={}", self.k, l1.min(l2)));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return fail(format!(
                "lambda = {} must be finite and non-negative",
                self.lambda
            ));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return fail(format!("tol = {} must be positive", self.tol));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".into());
        }
        if let Init::Diagonal { value } = self.init {
            if value == 0.0 || !value.is_finite() {
                return fail(format!(
                    "diagonal init value {value} must be finite and non-zero"
                ));
            }
        }
        Ok(())
    }
}

/// Result of fitting one pair.
#[derive(Debug, Clone)]
pub struct PairFit {
    pub pair: ProjectionPair,
    /// Objective after each full (u then v) iteration.
    pub trace: Vec<f64>,
    /// `|Tr(UᵀU VᵀV) − 1|` after each v half-step.
    pub constraint_residuals: Vec<f64>,
    pub converged: bool,
    pub degenerate: bool,
}

impl PairFit {
    pub fn objective(&self) -> f64 {
        self.trace.last().copied().unwrap_or(0.0)
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

fn relative_change(new: f64, old: f64) -> f64 {
    let scale = new.abs().max(old.abs());
    if scale == 0.0 {
        0.0
    } else {
        (new - old).abs() / scale
    }
}

/// Solves one half-step and returns the constraint-normalized factor.
fn half_step(problem: &SideProblem, rows: usize, k: usize, lambda: f64) -> Result<Matrix> {
    let sym = problem.to_symmetric()?;
    if lambda == 0.0 && nalgebra::Cholesky::new(sym.n().clone()).is_none() {
        return Err(CrpError::IllPosed(
            "within-class scatter is singular with lambda = 0; use lambda > 0".into(),
        ));
    }
    let eig = solve_largest_gen_eig(&sym)?;
    let x = d_normalize(&eig.vector, &problem.d)?;
    unvec(x.as_slice(), rows, k)
}

/// Alternating maximization of one pair on fixed deviations.
pub fn fit_pair(devs: &Deviations, cfg: &CrpConfig, pair_index: usize) -> Result<PairFit> {
    let (l1, l2) = devs.dims();
    cfg.validate((l1, l2))?;
    let k = cfg.k;
    let mut v = cfg.init.initial_v(l2, k, pair_index);
    let mut u = Matrix::zeros(l1, k);
    let mut trace = Vec::new();
    let mut residuals = Vec::new();
    let mut prev = f64::NAN;
    let mut converged = false;

    for iter in 0..cfg.max_iter {
        let up = assemble_u_problem(devs, &v, cfg.lambda)?;
        u = half_step(&up, l1, k, cfg.lambda)?;
        if iter == 0 {
            prev = objective_pair(
                &ProjectionPair {
                    u: u.clone(),
                    v: v.clone(),
                },
                devs,
                cfg.lambda,
            )?;
        }

        let vp = assemble_v_problem(devs, &u, cfg.lambda)?;
        v = half_step(&vp, l2, k, cfg.lambda)?;

        let pair = ProjectionPair {
            u: u.clone(),
            v: v.clone(),
        };
        residuals.push(pair.constraint_residual());
        let f = objective_pair(&pair, devs, cfg.lambda)?;
        if !f.is_finite() {
            return Err(CrpError::NumericalFailure(format!(
                "objective became {f} at iteration {} of pair {pair_index}",
                iter + 1
            )));
        }
        trace.push(f);
        let change = relative_change(f, prev);
        prev = f;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    let objective = trace.last().copied().unwrap_or(0.0);
    Ok(PairFit {
        pair: ProjectionPair { u, v },
        degenerate: objective <= DEGENERATE_OBJECTIVE,
        trace,
        constraint_residuals: residuals,
        converged,
    })
}

/// Removes from every sample its component along `vec(UVᵀ)`:
/// `X ← X − Tr(UᵀXV)·UVᵀ`.
pub fn deflate(d: &Dataset, pair: &ProjectionPair) -> Result<Dataset> {
    let (l1, l2) = d.dims();
    if pair.u.nrows() != l1 || pair.v.nrows() != l2 {
        return Err(CrpError::Dimension(format!(
            "pair ({:?}, {:?}) does not fit {l1}x{l2} data",
            pair.u.shape(),
            pair.v.shape()
        )));
    }
    let residual = pair.constraint_residual();
    if residual > DEFLATION_CONSTRAINT_TOL {
        return Err(CrpError::Precondition(format!(
            "deflation needs Tr(UᵀU VᵀV) = 1, off by {residual:e}"
        )));
    }
    let dir = pair.direction();
    d.map_samples(|x| x - &dir * frobenius_dot(&dir, x))
}

/// One step of [`fit_crp_observed`], handed to the observer after pair
/// `index` has been fit.
pub struct Stage<'a> {
    pub index: usize,
    /// Data the pair was fit on.
    pub data: &'a Dataset,
    pub fit: &'a PairFit,
    /// `data` deflated by the new pair; the input to the next stage.
    pub deflated: &'a Dataset,
}

/// A fitted compound projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpModel {
    pub config: CrpConfig,
    pub data_dims: (usize, usize),
    pub pairs: Vec<ProjectionPair>,
    pub objective_traces: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
    pub degenerate: Vec<bool>,
}

pub fn fit_crp(d: &Dataset, cfg: &CrpConfig) -> Result<CrpModel> {
    fit_crp_observed(d, cfg, |_| {})
}

/// Fits `cfg.h` pairs, deflating the training data after each one.
pub fn fit_crp_observed(
    d: &Dataset,
    cfg: &CrpConfig,
    mut observer: impl FnMut(&Stage<'_>),
) -> Result<CrpModel> {
    let (l1, l2) = d.dims();
    cfg.validate((l1, l2))?;
    if d.classes() < 2 {
        return Err(CrpError::TooFewClasses(d.classes()));
    }
    if cfg.h >= l1 * l2 {
        log::warn!(
            "h = {} reaches the sample dimension {}; late pairs may be degenerate",
            cfg.h,
            l1 * l2
        );
    }

    let mut current = d.clone();
    let mut model = CrpModel {
        config: cfg.clone(),
        data_dims: (l1, l2),
        pairs: Vec::with_capacity(cfg.h),
        objective_traces: Vec::with_capacity(cfg.h),
        converged: Vec::with_capacity(cfg.h),
        degenerate: Vec::with_capacity(cfg.h),
    };
    for p in 0..cfg.h {
        let devs = Deviations::from_dataset(&current)?;
        let fit = fit_pair(&devs, cfg, p)?;
        let next = deflate(&current, &fit.pair)?;
        observer(&Stage {
            index: p,
            data: &current,
            fit: &fit,
            deflated: &next,
        });
        if fit.degenerate {
            log::debug!("pair {p} is degenerate (objective {:e})", fit.objective());
        }
        model.objective_traces.push(fit.trace);
        model.converged.push(fit.converged);
        model.degenerate.push(fit.degenerate);
        model.pairs.push(fit.pair);
        current = next;
    }
    Ok(model)
}

impl CrpModel {
    pub fn h(&self) -> usize {
        self.pairs.len()
    }

    fn check_dims(&self, x: &Matrix) -> Result<()> {
        if x.shape() != self.data_dims {
            return Err(CrpError::Dimension(format!(
                "input is {:?}, model expects {:?}",
                x.shape(),
                self.data_dims
            )));
        }
        Ok(())
    }

    fn embed_with(&self, x: &Matrix, directions: &[Matrix]) -> Vector {
        let mut out = Vector::zeros(directions.len());
        if self.config.replay {
            let mut rest = x.clone();
            for (p, dir) in directions.iter().enumerate() {
                let f = frobenius_dot(dir, &rest);
                out[p] = f;
                rest -= dir * f;
            }
        } else {
            for (p, dir) in directions.iter().enumerate() {
                out[p] = frobenius_dot(dir, x);
            }
        }
        out
    }

    fn directions(&self) -> Vec<Matrix> {
        self.pairs.iter().map(ProjectionPair::direction).collect()
    }

    /// `h` features; feature `p` is `Tr(U_pᵀ X' V_p)` with `X'` the input
    /// deflated by pairs `1..p−1` (or the raw input when replay is off).
    pub fn embed(&self, x: &Matrix) -> Result<Vector> {
        self.check_dims(x)?;
        Ok(self.embed_with(x, &self.directions()))
    }

    pub fn embed_dataset(&self, d: &Dataset) -> Result<Vec<(Vector, usize)>> {
        if !d.is_empty() && d.dims() != self.data_dims {
            return Err(CrpError::Dimension(format!(
                "dataset is {:?}, model expects {:?}",
                d.dims(),
                self.data_dims
            )));
        }
        let dirs = self.directions();
        Ok(d.samples()
            .iter()
            .map(|s| (self.embed_with(&s.data, &dirs), s.label))
            .collect())
    }
}

#[cfg(test)]
mod tests;
