//! Numerical verification of the Kronecker/vec/trace identities the solver
//! relies on.
//!
//! Each identity is evaluated on random conformable shapes. The error is
//! `|lhs − rhs|` divided by the natural magnitude of the expression (the
//! product of the input norms), so near-zero traces do not inflate it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CrpError, Result};
use crate::kronlin::{eye, kron, vec, Matrix};

pub const LEMMA_TOL: f64 = 1e-9;
const MAX_SIDE: usize = 6;

pub type KronFn = dyn Fn(&Matrix, &Matrix) -> Matrix + Sync;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaResult {
    pub lemma: usize,
    pub statement: String,
    pub max_rel_error: f64,
    /// Operand shapes of the worst trial.
    pub worst_shapes: Vec<(usize, usize)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub lemmas: Vec<LemmaResult>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.lemmas.iter().all(|l| l.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LemmaResult> {
        self.lemmas.iter().filter(|l| !l.passed)
    }
}

impl std::fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for l in &self.lemmas {
            writeln!(
                f,
                "Lemma {}  {:<44} max_rel_error={:.3e}  {}",
                l.lemma,
                l.statement,
                l.max_rel_error,
                if l.passed { "PASS" } else { "FAIL" }
            )?;
            if !l.passed {
                writeln!(f, "  worst shapes: {:?}", l.worst_shapes)?;
            }
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn side(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(1..=MAX_SIDE)
}

fn rel(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `(relative error, operand shapes)` of one random instance of lemma `n`.
fn instance(n: usize, rng: &mut ChaCha8Rng, kron: &KronFn) -> (f64, Vec<(usize, usize)>) {
    match n {
        1 => {
            let (l1, l2, k) = (side(rng), side(rng), side(rng));
            let (u, v, x) = (
                gaussian(rng, l1, k),
                gaussian(rng, l2, k),
                gaussian(rng, l1, l2),
            );
            let w = vec(&(&u * v.transpose()));
            let lhs = &w * w.transpose() * vec(&x);
            let rhs = &w * (u.transpose() * &x * &v).trace();
            (
                rel((lhs - rhs).norm(), w.norm_squared() * x.norm()),
                vec![u.shape(), v.shape(), x.shape()],
            )
        }
        2 => {
            let (l1, l2, k) = (side(rng), side(rng), side(rng));
            let (u, v) = (gaussian(rng, l1, k), gaussian(rng, l2, k));
            let lhs = vec(&(&u * v.transpose()));
            let mut rhs = Matrix::zeros(l1 * l2, 1);
            for i in 0..k {
                rhs += kron(&v.columns(i, 1).into_owned(), &u.columns(i, 1).into_owned());
            }
            let diff = (lhs - rhs.column(0)).norm();
            (rel(diff, u.norm() * v.norm()), vec![u.shape(), v.shape()])
        }
        3 => {
            let (l1, l2, k) = (side(rng), side(rng), side(rng));
            let (u, v) = (gaussian(rng, l1, k), gaussian(rng, l2, k));
            let w = vec(&(&u * v.transpose()));
            let lhs = w.dot(&w);
            let rhs = (u.transpose() * &u * v.transpose() * &v).trace();
            (
                rel((lhs - rhs).abs(), u.norm_squared() * v.norm_squared()),
                vec![u.shape(), v.shape()],
            )
        }
        4 => {
            let (m, p, q) = (side(rng), side(rng), side(rng));
            let (a, b, c) = (
                gaussian(rng, m, q),
                gaussian(rng, m, p),
                gaussian(rng, p, q),
            );
            let lhs = (a.transpose() * &b * &c).trace();
            let rhs = vec(&a).dot(&(kron(&eye(q), &b) * vec(&c)));
            let scale = a.norm() * b.norm() * c.norm();
            (
                rel((lhs - rhs).abs(), scale),
                vec![a.shape(), b.shape(), c.shape()],
            )
        }
        5 => {
            let (m, p, q, r) = (side(rng), side(rng), side(rng), side(rng));
            let (a, x, b) = (
                gaussian(rng, m, p),
                gaussian(rng, p, q),
                gaussian(rng, q, r),
            );
            let lhs = vec(&(&a * &x * &b));
            let rhs = kron(&b.transpose(), &a) * vec(&x);
            let scale = a.norm() * x.norm() * b.norm();
            (
                rel((lhs - rhs).norm(), scale),
                vec![a.shape(), x.shape(), b.shape()],
            )
        }
        6 => {
            let (m, p, q) = (side(rng), side(rng), side(rng));
            let (a, b, c) = (
                gaussian(rng, m, q),
                gaussian(rng, m, p),
                gaussian(rng, p, q),
            );
            let lhs = (a.transpose() * &b * &c).trace();
            let rhs = vec(&a).dot(&(kron(&c.transpose(), &eye(m)) * vec(&b)));
            let scale = a.norm() * b.norm() * c.norm();
            (
                rel((lhs - rhs).abs(), scale),
                vec![a.shape(), b.shape(), c.shape()],
            )
        }
        _ => unreachable!("lemmas are numbered 1..=6"),
    }
}

const STATEMENTS: [&str; 6] = [
    "vec(UVᵀ)vec(UVᵀ)ᵀvec(X) = Tr(UᵀXV)vec(UVᵀ)",
    "vec(UVᵀ) = Σ_i v_i ⊗ u_i",
    "vec(UVᵀ)ᵀvec(UVᵀ) = Tr(UᵀUVᵀV)",
    "Tr(AᵀBC) = vec(A)ᵀ(I ⊗ B)vec(C)",
    "vec(AXB) = (Bᵀ ⊗ A)vec(X)",
    "Tr(AᵀBC) = vec(A)ᵀ(Cᵀ ⊗ I)vec(B)",
];

fn default_trials() -> usize {
    200
}

/// Optional `check-lemmas` config file: `{"trials": 200, "seed": 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: 0,
        }
    }
}

impl LemmaConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CrpError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CrpError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn check_lemmas(trials: usize, seed: u64) -> Result<LemmaReport> {
    check_lemmas_with(trials, seed, &kron)
}

/// As [`check_lemmas`] with a substitute Kronecker product, so tests can
/// confirm that a broken implementation is caught.
pub fn check_lemmas_with(trials: usize, seed: u64, kron: &KronFn) -> Result<LemmaReport> {
    if trials == 0 {
        return Err(CrpError::Config("lemma trials must be at least 1".into()));
    }
    let lemmas = (1..=6)
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let mut worst = (0.0f64, Vec::new());
            for _ in 0..trials {
                let (err, shapes) = instance(n, &mut rng, kron);
                // NaN must register as a failure
                if err.is_nan() || err > worst.0 || worst.1.is_empty() {
                    worst = (if err.is_nan() { f64::INFINITY } else { err }, shapes);
                }
            }
            LemmaResult {
                lemma: n,
                statement: STATEMENTS[n - 1].to_string(),
                max_rel_error: worst.0,
                worst_shapes: worst.1,
                passed: worst.0 <= LEMMA_TOL,
            }
        })
        .collect();
    Ok(LemmaReport {
        trials,
        seed,
        tolerance: LEMMA_TOL,
        lemmas,
    })
}
