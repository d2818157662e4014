//! Stratified splits, 1-nearest-neighbor classification and repeated-trial
//! evaluation.
//!
//! Every trial draws from its own ChaCha stream selected by the trial index,
//! so trials can run in any order or in parallel and still reproduce exactly.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CrpError, Result};
use crate::kronlin::{Matrix, Vector};
use crate::stats::Dataset;

/// How many samples of each class go to the training side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    PerClass(usize),
    Fraction(f64),
}

fn default_repetitions() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SplitSpec {
    pub fn per_class(n: usize, repetitions: usize, seed: u64) -> Self {
        Self {
            mode: SplitMode::PerClass(n),
            repetitions,
            seed,
        }
    }

    pub fn fraction(f: f64, repetitions: usize, seed: u64) -> Self {
        Self {
            mode: SplitMode::Fraction(f),
            repetitions,
            seed,
        }
    }

    fn train_count(&self, class: usize, available: usize) -> Result<usize> {
        match self.mode {
            SplitMode::PerClass(n) => {
                if n == 0 {
                    return Err(CrpError::Config(
                        "per-class training count must be positive".into(),
                    ));
                }
                if n > available {
                    return Err(CrpError::InsufficientSamples {
                        class,
                        available,
                        requested: n,
                    });
                }
                Ok(n)
            }
            SplitMode::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(CrpError::Config(format!(
                        "train fraction {f} must lie in (0, 1)"
                    )));
                }
                if available < 2 {
                    return Err(CrpError::InsufficientSamples {
                        class,
                        available,
                        requested: 2,
                    });
                }
                Ok(((f * available as f64).round() as usize).clamp(1, available - 1))
            }
        }
    }
}

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Splits every class independently; both sides keep dataset order.
pub fn stratified_split(d: &Dataset, spec: &SplitSpec, trial: usize) -> Result<(Dataset, Dataset)> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.classes()];
    for (i, s) in d.samples().iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut rng = trial_rng(spec.seed, trial);
    let mut in_train = vec![false; d.len()];
    for (class, members) in by_class.iter_mut().enumerate() {
        let count = spec.train_count(class, members.len())?;
        members.shuffle(&mut rng);
        for &i in &members[..count] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| in_train[i]);
    Ok((d.select(&train), d.select(&test)))
}

/// Label of the Euclidean-nearest training vector; the lowest index wins ties.
pub fn nn_classify(train: &[(Vector, usize)], query: &Vector) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (x, label) in train {
        if x.len() != query.len() {
            return Err(CrpError::Dimension(format!(
                "query has length {}, training vector {}",
                query.len(),
                x.len()
            )));
        }
        let dist = (x - query).norm_squared();
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, *label));
        }
    }
    best.map(|(_, label)| label)
        .ok_or_else(|| CrpError::Precondition("1-NN needs a non-empty training set".into()))
}

/// Fraction of `test` whose 1-NN label in `train` is correct.
pub fn nn_accuracy(train: &[(Vector, usize)], test: &[(Vector, usize)]) -> Result<f64> {
    if test.is_empty() {
        return Err(CrpError::Precondition("empty test set".into()));
    }
    let mut correct = 0usize;
    for (x, label) in test {
        if nn_classify(train, x)? == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// A fitted feature map.
pub trait Embedder {
    fn embed(&self, x: &Matrix) -> Result<Vector>;

    /// Per-pair objective traces, for methods that have them.
    fn traces(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }

    fn embed_dataset(&self, d: &Dataset) -> Result<Vec<(Vector, usize)>> {
        d.samples()
            .iter()
            .map(|s| Ok((self.embed(&s.data)?, s.label)))
            .collect()
    }
}

/// Something that fits an [`Embedder`] on training data.
pub trait Method: Sync {
    type Model: Embedder;

    fn fit(&self, train: &Dataset) -> Result<Self::Model>;
}

impl<F, M> Method for F
where
    F: Fn(&Dataset) -> Result<M> + Sync,
    M: Embedder,
{
    type Model = M;

    fn fit(&self, train: &Dataset) -> Result<M> {
        self(train)
    }
}

/// Column-stacked raw pixels.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawPixels;

impl Embedder for RawPixels {
    fn embed(&self, x: &Matrix) -> Result<Vector> {
        Ok(crate::kronlin::vec(x))
    }
}

impl Method for RawPixels {
    type Model = RawPixels;

    fn fit(&self, _train: &Dataset) -> Result<RawPixels> {
        Ok(RawPixels)
    }
}

impl Embedder for crate::crp::CrpModel {
    fn embed(&self, x: &Matrix) -> Result<Vector> {
        crate::crp::CrpModel::embed(self, x)
    }

    fn traces(&self) -> Vec<Vec<f64>> {
        self.objective_traces.clone()
    }

    fn embed_dataset(&self, d: &Dataset) -> Result<Vec<(Vector, usize)>> {
        crate::crp::CrpModel::embed_dataset(self, d)
    }
}

impl Embedder for crate::baselines::LdaModel {
    fn embed(&self, x: &Matrix) -> Result<Vector> {
        crate::baselines::LdaModel::embed(self, x)
    }
}

impl Embedder for crate::baselines::TwoDldaModel {
    fn embed(&self, x: &Matrix) -> Result<Vector> {
        crate::baselines::TwoDldaModel::embed(self, x)
    }

    fn traces(&self) -> Vec<Vec<f64>> {
        vec![self.objective_trace.clone()]
    }
}

/// One trial: accuracy plus whatever convergence traces the model exposes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub accuracy: f64,
    pub traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_trial_accuracy: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over trials.
    pub std: f64,
}

impl EvalResult {
    pub fn from_accuracies(per_trial_accuracy: Vec<f64>) -> Self {
        let n = per_trial_accuracy.len() as f64;
        let mean = per_trial_accuracy.iter().sum::<f64>() / n;
        let var = per_trial_accuracy
            .iter()
            .map(|a| (a - mean).powi(2))
            .sum::<f64>()
            / n;
        Self {
            per_trial_accuracy,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Split, fit on train, embed both sides, 1-NN classify the test side.
pub fn run_trial<M: Method>(
    d: &Dataset,
    method: &M,
    spec: &SplitSpec,
    trial: usize,
) -> Result<TrialOutcome> {
    let inner = || -> Result<TrialOutcome> {
        let (train, test) = stratified_split(d, spec, trial)?;
        let model = method.fit(&train)?;
        let train_emb = model.embed_dataset(&train)?;
        let test_emb = model.embed_dataset(&test)?;
        Ok(TrialOutcome {
            trial,
            accuracy: nn_accuracy(&train_emb, &test_emb)?,
            traces: model.traces(),
        })
    };
    inner().map_err(|e| CrpError::Trial {
        trial,
        source: Box::new(e),
    })
}

/// All trials of `spec`, in trial order.
pub fn evaluate_trials<M: Method>(
    d: &Dataset,
    method: &M,
    spec: &SplitSpec,
) -> Result<Vec<TrialOutcome>> {
    if spec.repetitions == 0 {
        return Err(CrpError::Config("repetitions must be at least 1".into()));
    }
    (0..spec.repetitions)
        .into_par_iter()
        .map(|t| run_trial(d, method, spec, t))
        .collect()
}

pub fn evaluate_protocol<M: Method>(
    d: &Dataset,
    method: &M,
    spec: &SplitSpec,
) -> Result<EvalResult> {
    let outcomes = evaluate_trials(d, method, spec)?;
    Ok(EvalResult::from_accuracies(
        outcomes.iter().map(|o| o.accuracy).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::LabeledMatrix;
    use rand::Rng;

    fn labeled(values: &[(f64, usize)]) -> Dataset {
        let samples = values
            .iter()
            .map(|&(x, c)| LabeledMatrix::new(Matrix::from_element(1, 1, x), c))
            .collect();
        Dataset::from_samples(1, 1, samples).unwrap()
    }

    fn grid_dataset(classes: usize, per: usize) -> Dataset {
        let mut values = Vec::new();
        for c in 0..classes {
            for j in 0..per {
                values.push((c as f64 * 100.0 + j as f64, c));
            }
        }
        labeled(&values)
    }

    #[test]
    fn forced_split() {
        let d = labeled(&[(0.0, 0), (1.0, 1), (2.0, 2), (3.0, 1)]);
        let (train, test) = stratified_split(&d, &SplitSpec::per_class(1, 1, 0), 0).unwrap();
        assert_eq!(train.class_counts(), vec![1, 1, 1]);
        assert_eq!(test.len(), 1);
        assert_eq!(test.samples()[0].label, 1);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let d = grid_dataset(4, 9);
        let spec = SplitSpec::per_class(3, 5, 42);
        let a = stratified_split(&d, &spec, 2).unwrap();
        let b = stratified_split(&d, &spec, 2).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&d, &spec, 3).unwrap();
        assert_ne!(a.0, c.0);

        let key = |x: &LabeledMatrix| x.data[(0, 0)] as i64;
        let mut all: Vec<i64> = a.0.samples().iter().chain(a.1.samples()).map(key).collect();
        all.sort();
        let mut orig: Vec<i64> = d.samples().iter().map(key).collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn per_class_three_of_ten_classes() {
        let d = grid_dataset(10, 7);
        let (train, test) = stratified_split(&d, &SplitSpec::per_class(3, 1, 7), 0).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(train.class_counts(), vec![3; 10]);
        assert_eq!(test.class_counts(), vec![4; 10]);
    }

    #[test]
    fn fraction_split_leaves_test_samples() {
        let d = grid_dataset(3, 5);
        let (train, test) = stratified_split(&d, &SplitSpec::fraction(0.8, 1, 1), 0).unwrap();
        assert_eq!(train.class_counts(), vec![4; 3]);
        assert_eq!(test.class_counts(), vec![1; 3]);
        let tiny = grid_dataset(2, 1);
        assert!(stratified_split(&tiny, &SplitSpec::fraction(0.5, 1, 1), 0).is_err());
    }

    #[test]
    fn too_small_class() {
        let d = grid_dataset(2, 2);
        let err = stratified_split(&d, &SplitSpec::per_class(3, 1, 0), 0).unwrap_err();
        assert!(matches!(
            err,
            CrpError::InsufficientSamples {
                requested: 3,
                available: 2,
                ..
            }
        ));
    }

    #[test]
    fn nn_exact_match_and_ties() {
        let train = vec![
            (Vector::from_vec(vec![0.0, 0.0]), 4),
            (Vector::from_vec(vec![2.0, 0.0]), 7),
            (Vector::from_vec(vec![5.0, 5.0]), 1),
        ];
        assert_eq!(
            nn_classify(&train, &Vector::from_vec(vec![5.0, 5.0])).unwrap(),
            1
        );
        assert_eq!(
            nn_classify(&train, &Vector::from_vec(vec![1.0, 0.0])).unwrap(),
            4
        );
        assert!(nn_classify(&[], &Vector::from_vec(vec![1.0])).is_err());
        assert!(nn_classify(&train, &Vector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn nn_matches_exhaustive_search() {
        let mut rng = trial_rng(9, 0);
        let train: Vec<(Vector, usize)> = (0..100)
            .map(|_| {
                (
                    Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)),
                    rng.random_range(0..5),
                )
            })
            .collect();
        for _ in 0..20 {
            let q = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let dists: Vec<f64> = train.iter().map(|(x, _)| (x - &q).norm()).collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let idx = dists.iter().position(|&d| d == min).unwrap();
            assert_eq!(nn_classify(&train, &q).unwrap(), train[idx].1);
        }
    }

    struct Constant;
    impl Embedder for Constant {
        fn embed(&self, _x: &Matrix) -> Result<Vector> {
            Ok(Vector::zeros(2))
        }
    }

    #[test]
    fn separable_data_is_perfect() {
        let d = grid_dataset(3, 6);
        let r = evaluate_protocol(&d, &RawPixels, &SplitSpec::per_class(2, 4, 5)).unwrap();
        assert_eq!(r.per_trial_accuracy, vec![1.0; 4]);
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn constant_embedder_predicts_first_training_label() {
        let d = grid_dataset(3, 5);
        let spec = SplitSpec::per_class(2, 3, 11);
        let method = |_: &Dataset| -> Result<Constant> { Ok(Constant) };
        let r = evaluate_protocol(&d, &method, &spec).unwrap();
        for (t, acc) in r.per_trial_accuracy.iter().enumerate() {
            let (train, test) = stratified_split(&d, &spec, t).unwrap();
            let first = train.samples()[0].label;
            let expected = test.samples().iter().filter(|s| s.label == first).count() as f64
                / test.len() as f64;
            assert_eq!(*acc, expected);
        }
        assert_eq!(r, evaluate_protocol(&d, &method, &spec).unwrap());
    }

    #[test]
    fn eval_result_statistics() {
        let r = EvalResult::from_accuracies(vec![0.5, 1.0]);
        assert_eq!(r.mean, 0.75);
        assert_eq!(r.std, 0.25);
    }

    #[test]
    fn failing_trial_is_named() {
        let d = grid_dataset(2, 4);
        let method =
            |_: &Dataset| -> Result<RawPixels> { Err(CrpError::NumericalFailure("boom".into())) };
        let err = evaluate_protocol(&d, &method, &SplitSpec::per_class(2, 2, 0)).unwrap_err();
        assert!(matches!(err, CrpError::Trial { trial: 0, .. }), "{err}");
        assert_eq!(err.exit_code(), 4);
    }
}
