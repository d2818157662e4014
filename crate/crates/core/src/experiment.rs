//! Config-driven experiment runner behind the `crp` command line.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "dataset": { "format": "pgm_dir", "path": "coil20", "downsample": [4, 4] },
//!   "method": "crp",
//!   "split": { "mode": { "per_class": 10 }, "repetitions": 5, "seed": 0 },
//!   "crp": { "lambda_grid": [1e-6, 1e-4, 0.01, 1, 100, 1e4, 1e6] }
//! }
//! ```
//!
//! Relative dataset paths resolve against the config file's directory.
//! Every output except the `timings` block of `summary.json` is a pure
//! function of the config, independent of thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_2dlda, fit_lda};
use crate::classify::{run_trial, Embedder, EvalResult, RawPixels, SplitSpec, TrialOutcome};
use crate::crp::{deflate, fit_crp, fit_pair, problem::Deviations, CrpConfig, Init};
use crate::dataio::{downsample_dataset, load_matrix_csv, load_pgm_dir, synth_dataset, SynthSpec};
use crate::error::{CrpError, Result};
use crate::kronlin::{Matrix, Vector};
use crate::model::SavedModel;
use crate::stats::Dataset;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `{1e-6, 1e-4, …, 1e4, 1e6}`.
pub fn default_lambda_grid() -> Vec<f64> {
    vec![1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        downsample: Option<[usize; 2]>,
    },
    PgmDir {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        downsample: Option<[usize; 2]>,
    },
    Synthetic {
        spec: SynthSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Crp,
    Lda,
    Twodlda,
    Raw,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [
        MethodKind::Crp,
        MethodKind::Lda,
        MethodKind::Twodlda,
        MethodKind::Raw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Crp => "crp",
            MethodKind::Lda => "lda",
            MethodKind::Twodlda => "twodlda",
            MethodKind::Raw => "raw",
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
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrpSection {
    /// Number of pairs; `(c−1)²` when absent.
    #[serde(default)]
    pub h: Option<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "default_true")]
    pub replay: bool,
    /// Extra runs at the best λ, one per listed `k`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_sweep: Vec<usize>,
    /// Extra runs at the best λ, one per listed initialization.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init_sweep: Vec<Init>,
}

impl Default for CrpSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn default_iters() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// LDA output dimension (default `min((c−1)², l1·l2)`); for 2DLDA the
    /// per-side dimension (default `c−1`, capped by each side).
    #[serde(default)]
    pub dims: Option<usize>,
    /// `None` selects the automatic ridge.
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default = "default_iters")]
    pub iters: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            dims: None,
            ridge: None,
            iters: default_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub method: MethodKind,
    pub split: SplitSpec,
    #[serde(default)]
    pub crp: CrpSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    /// Default output directory when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Directory relative dataset paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CrpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CrpError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            CrpError::Config(msg) => CrpError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.repetitions == 0 {
            return Err(CrpError::Config(
                "split.repetitions must be at least 1".into(),
            ));
        }
        if self.method == MethodKind::Crp {
            let c = &self.crp;
            if c.lambda_grid.is_empty() {
                return Err(CrpError::Config("crp.lambda_grid must not be empty".into()));
            }
            if let Some(l) = c
                .lambda_grid
                .iter()
                .find(|l| !(l.is_finite() && **l >= 0.0))
            {
                return Err(CrpError::Config(format!(
                    "lambda {l} must be finite and non-negative"
                )));
            }
            if c.k_sweep.contains(&0) {
                return Err(CrpError::Config(
                    "crp.k_sweep entries must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.base_dir.join(p)
            }
        };
        let (d, downsample) = match &self.dataset {
            DatasetSource::Csv { path, downsample } => {
                (load_matrix_csv(resolve(path))?, *downsample)
            }
            DatasetSource::PgmDir { path, downsample } => {
                (load_pgm_dir(resolve(path))?, *downsample)
            }
            DatasetSource::Synthetic { spec } => (synth_dataset(spec)?, None),
        };
        match downsample {
            Some([r1, r2]) => downsample_dataset(&d, r1, r2),
            None => Ok(d),
        }
    }

    fn crp_config(&self, classes: usize, lambda: f64) -> CrpConfig {
        let c = &self.crp;
        CrpConfig {
            h: c.h.unwrap_or((classes.saturating_sub(1)).pow(2)),
            k: c.k,
            lambda,
            tol: c.tol,
            max_iter: c.max_iter,
            init: c.init,
            replay: c.replay,
        }
    }

    /// The config with every defaulted field made explicit.
    pub fn resolved(&self, d: &Dataset) -> Self {
        let mut out = self.clone();
        let c = d.classes();
        let (l1, l2) = d.dims();
        out.crp.h = Some(self.crp_config(c, 0.0).h);
        out.baseline.dims = Some(match self.method {
            MethodKind::Twodlda => self.baseline.dims.unwrap_or(c.saturating_sub(1)),
            _ => self
                .baseline
                .dims
                .unwrap_or((c.saturating_sub(1)).pow(2).min(l1 * l2)),
        });
        out
    }
}

/// Any fitted model, including the parameter-free raw-pixel map.
#[derive(Debug, Clone)]
pub enum Fitted {
    Raw,
    Model(SavedModel),
}

impl Embedder for Fitted {
    fn embed(&self, x: &Matrix) -> Result<Vector> {
        match self {
            Fitted::Raw => RawPixels.embed(x),
            Fitted::Model(m) => m.embed(x),
        }
    }

    fn traces(&self) -> Vec<Vec<f64>> {
        match self {
            Fitted::Raw => Vec::new(),
            Fitted::Model(m) => m.traces(),
        }
    }

    fn embed_dataset(&self, d: &Dataset) -> Result<Vec<(Vector, usize)>> {
        match self {
            Fitted::Raw => RawPixels.embed_dataset(d),
            Fitted::Model(m) => m.embed_dataset(d),
        }
    }
}

/// Settings for one fit: the method plus the CRP knobs that sweeps vary.
#[derive(Debug, Clone)]
struct FitPlan<'a> {
    cfg: &'a ExperimentConfig,
    method: MethodKind,
    classes: usize,
    lambda: f64,
    k: Option<usize>,
    init: Option<Init>,
}

impl FitPlan<'_> {
    fn fit(&self, train: &Dataset) -> Result<Fitted> {
        let (l1, l2) = train.dims();
        let b = &self.cfg.baseline;
        let c = self.classes;
        Ok(match self.method {
            MethodKind::Raw => Fitted::Raw,
            MethodKind::Crp => {
                let mut crp = self.cfg.crp_config(c, self.lambda);
                if let Some(k) = self.k {
                    crp.k = k;
                }
                if let Some(init) = self.init {
                    crp.init = init;
                }
                Fitted::Model(SavedModel::Crp(fit_crp(train, &crp)?))
            }
            MethodKind::Lda => {
                let dims = b.dims.unwrap_or((c.saturating_sub(1)).pow(2).min(l1 * l2));
                Fitted::Model(SavedModel::Lda(fit_lda(train, dims, b.ridge)?))
            }
            MethodKind::Twodlda => {
                let side = b.dims.unwrap_or(c.saturating_sub(1)).max(1);
                Fitted::Model(SavedModel::TwoDlda(fit_2dlda(
                    train,
                    side.min(l1),
                    side.min(l2),
                    b.iters,
                    b.ridge,
                )?))
            }
        })
    }
}

/// Results for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// `None` for methods without a regularization parameter.
    pub lambda: Option<f64>,
    pub result: EvalResult,
    #[serde(skip)]
    pub outcomes: Vec<TrialOutcome>,
    /// Summed per-trial wall-clock seconds.
    #[serde(skip)]
    pub seconds: f64,
}

fn run_jobs(
    d: &Dataset,
    spec: &SplitSpec,
    plans: &[FitPlan<'_>],
) -> Result<Vec<(Vec<TrialOutcome>, f64)>> {
    let jobs: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|p| (0..spec.repetitions).map(move |t| (p, t)))
        .collect();
    let done: Vec<(TrialOutcome, f64)> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let start = Instant::now();
            let plan = &plans[p];
            let out = run_trial(d, &|train: &Dataset| plan.fit(train), spec, t)?;
            Ok((out, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let mut grouped = Vec::with_capacity(plans.len());
    let mut it = done.into_iter();
    for _ in plans {
        let chunk: Vec<_> = it.by_ref().take(spec.repetitions).collect();
        let seconds = chunk.iter().map(|(_, s)| s).sum();
        grouped.push((chunk.into_iter().map(|(o, _)| o).collect(), seconds));
    }
    Ok(grouped)
}

/// Evaluates `method` at every grid point (λ values for CRP, a single point
/// otherwise). Trials across all grid points run concurrently.
pub fn evaluate_grid(
    cfg: &ExperimentConfig,
    d: &Dataset,
    method: MethodKind,
) -> Result<Vec<GridPoint>> {
    let lambdas: Vec<Option<f64>> = if method == MethodKind::Crp {
        cfg.crp.lambda_grid.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let plans: Vec<FitPlan<'_>> = lambdas
        .iter()
        .map(|l| FitPlan {
            cfg,
            method,
            classes: d.classes(),
            lambda: l.unwrap_or(0.0),
            k: None,
            init: None,
        })
        .collect();
    let results = run_jobs(d, &cfg.split, &plans)?;
    Ok(lambdas
        .into_iter()
        .zip(results)
        .map(|(lambda, (outcomes, seconds))| GridPoint {
            lambda,
            result: EvalResult::from_accuracies(outcomes.iter().map(|o| o.accuracy).collect()),
            outcomes,
            seconds,
        })
        .collect())
}

/// Highest mean accuracy; ties go to the smaller λ.
pub fn best_index(grid: &[GridPoint]) -> usize {
    let mut best = 0;
    for (i, g) in grid.iter().enumerate().skip(1) {
        let b = &grid[best];
        let better = g.result.mean > b.result.mean
            || (g.result.mean == b.result.mean
                && g.lambda.unwrap_or(0.0) < b.lambda.unwrap_or(0.0));
        if better {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep: String,
    pub value: String,
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub samples: usize,
    pub classes: usize,
    pub dims: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPoint {
    pub lambda: Option<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    /// Summed trial seconds per grid point, in grid order.
    pub grid_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub grid: Vec<GridPoint>,
    pub best: BestPoint,
    /// Objective traces at the best grid point, indexed `[trial][pair]`.
    pub traces: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepPoint>,
    pub timings: Timings,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CrpError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CrpError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CrpError::NumericalFailure(format!("serialization: {e}")))
}

fn fmt_lambda(l: Option<f64>) -> String {
    l.map(|l| l.to_string()).unwrap_or_default()
}

fn results_csv(grid: &[GridPoint]) -> String {
    let mut s = String::from("lambda,trial,accuracy\n");
    for g in grid {
        for o in &g.outcomes {
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_lambda(g.lambda),
                o.trial,
                o.accuracy
            ));
        }
    }
    s
}

fn run_sweeps(
    cfg: &ExperimentConfig,
    d: &Dataset,
    lambda: f64,
) -> Result<(Vec<SweepPoint>, String)> {
    let base = FitPlan {
        cfg,
        method: MethodKind::Crp,
        classes: d.classes(),
        lambda,
        k: None,
        init: None,
    };
    let mut labels = Vec::new();
    let mut plans = Vec::new();
    for &k in &cfg.crp.k_sweep {
        labels.push(("k".to_string(), k.to_string()));
        plans.push(FitPlan {
            k: Some(k),
            ..base.clone()
        });
    }
    for &init in &cfg.crp.init_sweep {
        labels.push(("init".to_string(), init.label()));
        plans.push(FitPlan {
            init: Some(init),
            ..base.clone()
        });
    }
    let results = run_jobs(d, &cfg.split, &plans)?;
    let mut csv = String::from("sweep,value,trial,accuracy\n");
    let mut points = Vec::new();
    for ((sweep, value), (outcomes, _)) in labels.into_iter().zip(results) {
        for o in &outcomes {
            csv.push_str(&format!("{sweep},{value},{},{}\n", o.trial, o.accuracy));
        }
        points.push(SweepPoint {
            sweep,
            value,
            result: EvalResult::from_accuracies(outcomes.iter().map(|o| o.accuracy).collect()),
        });
    }
    Ok((points, csv))
}

/// `eval`: the full protocol. Writes `results.csv`, `summary.json` and, when
/// sweeps are configured, `sweep.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let start = Instant::now();
    cfg.validate()?;
    let d = cfg.load_dataset()?;
    log::info!(
        "{} samples, {} classes, {}x{}",
        d.len(),
        d.classes(),
        d.dims().0,
        d.dims().1
    );
    let grid = evaluate_grid(cfg, &d, cfg.method)?;
    let best = best_index(&grid);
    let b = &grid[best];
    log::info!(
        "best: lambda={} mean={:.4} std={:.4}",
        fmt_lambda(b.lambda),
        b.result.mean,
        b.result.std
    );

    let mut sweeps = Vec::new();
    if cfg.method == MethodKind::Crp
        && !(cfg.crp.k_sweep.is_empty() && cfg.crp.init_sweep.is_empty())
    {
        let (points, csv) = run_sweeps(cfg, &d, b.lambda.unwrap_or(0.0))?;
        write_file(&out.join("sweep.csv"), &csv)?;
        sweeps = points;
    }

    write_file(&out.join("results.csv"), &results_csv(&grid))?;
    let summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.resolved(&d),
        dataset: DatasetInfo {
            samples: d.len(),
            classes: d.classes(),
            dims: d.dims(),
        },
        best: BestPoint {
            lambda: b.lambda,
            mean: b.result.mean,
            std: b.result.std,
        },
        traces: b.outcomes.iter().map(|o| o.traces.clone()).collect(),
        sweeps,
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            grid_seconds: grid.iter().map(|g| g.seconds).collect(),
        },
        grid,
    };
    write_file(&out.join("summary.json"), &to_json(&summary)?)?;
    Ok(summary)
}

/// `fit`: selects λ by the protocol when the grid has several values, then
/// fits on the whole dataset and writes `model.json` (nothing for `raw`).
pub fn run_fit(cfg: &ExperimentConfig, out: &Path) -> Result<Option<SavedModel>> {
    cfg.validate()?;
    let lambda = if cfg.method == MethodKind::Crp && cfg.crp.lambda_grid.len() > 1 {
        run_experiment(cfg, out)?.best.lambda.unwrap_or(0.0)
    } else {
        cfg.crp.lambda_grid.first().copied().unwrap_or(0.0)
    };
    let d = cfg.load_dataset()?;
    let plan = FitPlan {
        cfg,
        method: cfg.method,
        classes: d.classes(),
        lambda,
        k: None,
        init: None,
    };
    match plan.fit(&d)? {
        Fitted::Raw => {
            log::info!("raw pixels have no parameters; no model written");
            Ok(None)
        }
        Fitted::Model(m) => {
            let path = out.join("model.json");
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| CrpError::io(parent, e))?;
            }
            m.save(&path)?;
            Ok(Some(m))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: MethodKind,
    pub lambda: Option<f64>,
    pub result: EvalResult,
}

/// `bench`: every method on the same splits (CRP at its best λ). Writes
/// `bench.csv` (`method,lambda,trial,accuracy`) and `bench.json`.
pub fn run_bench(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<BenchRow>> {
    let start = Instant::now();
    let mut crp_cfg = cfg.clone();
    crp_cfg.method = MethodKind::Crp;
    crp_cfg.validate()?;
    let d = cfg.load_dataset()?;
    let mut csv = String::from("method,lambda,trial,accuracy\n");
    let mut rows = Vec::new();
    for method in MethodKind::ALL {
        let grid = evaluate_grid(&crp_cfg, &d, method)?;
        let b = &grid[best_index(&grid)];
        for o in &b.outcomes {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                method.name(),
                fmt_lambda(b.lambda),
                o.trial,
                o.accuracy
            ));
        }
        log::info!(
            "{}: mean={:.4} std={:.4}",
            method.name(),
            b.result.mean,
            b.result.std
        );
        rows.push(BenchRow {
            method,
            lambda: b.lambda,
            result: b.result.clone(),
        });
    }
    write_file(&out.join("bench.csv"), &csv)?;
    let doc = serde_json::json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "config": crp_cfg.resolved(&d),
        "methods": rows,
        "timings": { "total_seconds": start.elapsed().as_secs_f64() },
    });
    write_file(&out.join("bench.json"), &to_json(&doc)?)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub pair_index: usize,
    pub lambda: f64,
    pub objective: Vec<f64>,
    pub converged: bool,
}

/// `trace`: fits the pairs up to one seeded random index on the full dataset
/// (first λ of the grid) and writes that pair's objective per iteration to
/// `trace.csv`.
pub fn run_trace(cfg: &ExperimentConfig, out: &Path) -> Result<TraceResult> {
    let mut crp_cfg = cfg.clone();
    crp_cfg.method = MethodKind::Crp;
    crp_cfg.validate()?;
    let d = cfg.load_dataset()?;
    let lambda = cfg.crp.lambda_grid[0];
    let mut pair_cfg = cfg.crp_config(d.classes(), lambda);
    pair_cfg.h = pair_cfg.h.max(1);
    pair_cfg.validate(d.dims())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.split.seed);
    let pair_index = rng.random_range(0..pair_cfg.h);
    // Walk the deflation sequence directly rather than through fit_crp so a
    // single-class dataset still yields its (flat) trace.
    let mut current = d;
    let mut fit = fit_pair(&Deviations::from_dataset(&current)?, &pair_cfg, 0)?;
    for p in 1..=pair_index {
        current = deflate(&current, &fit.pair)?;
        fit = fit_pair(&Deviations::from_dataset(&current)?, &pair_cfg, p)?;
    }

    let mut csv = String::from("iteration,objective\n");
    for (i, v) in fit.trace.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, v));
    }
    write_file(&out.join("trace.csv"), &csv)?;
    Ok(TraceResult {
        pair_index,
        lambda,
        converged: fit.converged,
        objective: fit.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_cfg(method: &str, classes: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "dataset": {{ "format": "synthetic",
                    "spec": {{ "classes": {classes}, "per_class": 12, "l1": 6, "l2": 5,
                               "pattern_rank": 2, "noise_sigma": 0.4, "seed": 3 }} }},
                "method": "{method}",
                "split": {{ "mode": {{ "per_class": 4 }}, "repetitions": 3, "seed": 11 }},
                "crp": {{ "lambda_grid": [0.01, 1.0] }}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn raw_writes_one_row_per_trial_and_no_model() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synth_cfg("raw", 3);
        run_experiment(&cfg, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3);
        assert!(csv.starts_with("lambda,trial,accuracy\n,0,"));
        assert!(run_fit(&cfg, dir.path()).unwrap().is_none());
        assert!(!dir.path().join("model.json").exists());
    }

    #[test]
    fn crp_grid_summary_and_model() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synth_cfg("crp", 3);
        let s = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(s.grid.len(), 2);
        assert_eq!(s.config.crp.h, Some(4));
        assert_eq!(s.traces.len(), 3);
        assert!(s.traces.iter().all(|t| t.len() == 4));
        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 3);
        let m = run_fit(&cfg, dir.path()).unwrap().unwrap();
        assert_eq!(SavedModel::load(dir.path().join("model.json")).unwrap(), m);
    }

    #[test]
    fn best_lambda_ties_prefer_smaller() {
        let point = |l: f64, acc: f64| GridPoint {
            lambda: Some(l),
            result: EvalResult::from_accuracies(vec![acc]),
            outcomes: vec![],
            seconds: 0.0,
        };
        let grid = [
            point(1.0, 0.5),
            point(0.1, 0.9),
            point(1e-3, 0.9),
            point(10.0, 0.2),
        ];
        assert_eq!(best_index(&grid), 2);
    }

    #[test]
    fn sweeps_write_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synth_cfg("crp", 2);
        cfg.crp.k_sweep = vec![1, 2];
        cfg.crp.init_sweep = vec![Init::Diagonal { value: 0.5 }, Init::Random { seed: 1 }];
        let s = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(s.sweeps.len(), 4);
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 4 * 3);
        assert!(csv.contains("init,diag0.5,0,"));
    }

    #[test]
    fn trace_single_class_is_flat_zero() {
        let dir = tempfile::tempdir().unwrap();
        let t = run_trace(&synth_cfg("crp", 1), dir.path()).unwrap();
        assert!(t.objective.iter().all(|&v| v == 0.0));
        assert!(t.objective.len() <= 50);
    }

    #[test]
    fn trace_three_class_is_monotone_and_converges() {
        let dir = tempfile::tempdir().unwrap();
        let t = run_trace(&synth_cfg("crp", 3), dir.path()).unwrap();
        assert!(t.converged);
        assert!(t.objective.len() <= 50);
        for w in t.objective.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
        let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + t.objective.len());
    }

    #[test]
    fn bench_covers_every_method() {
        let dir = tempfile::tempdir().unwrap();
        let rows = run_bench(&synth_cfg("raw", 3), dir.path()).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].lambda.is_some() && rows[1].lambda.is_none());
    }

    #[test]
    fn config_errors() {
        let bad = [
            "{",
            r#"{"dataset":{"format":"csv","path":"x"},"method":"svm","split":{"mode":{"per_class":1}}}"#,
            r#"{"dataset":{"format":"csv","path":"x"},"method":"crp","split":{"mode":{"per_class":1}},"crp":{"lambda_grid":[]}}"#,
            r#"{"dataset":{"format":"csv","path":"x"},"method":"crp","split":{"mode":{"per_class":1}},"crp":{"lamda":1}}"#,
        ];
        for text in bad {
            let e = ExperimentConfig::from_json(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
        let missing = ExperimentConfig::from_json(
            r#"{"dataset":{"format":"csv","path":"/nonexistent.csv"},"method":"raw","split":{"mode":{"per_class":1}}}"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            run_experiment(&missing, dir.path())
                .unwrap_err()
                .exit_code(),
            3
        );
    }
}
