//! Small classifiers over feature vectors and a stratified k-fold evaluation
//! harness reporting true/false positive rates.
//!
//! Features are min-max rescaled per dimension to `[0, 1]` using the training
//! split only. Both classifiers are deterministic; all randomness in the
//! harness comes from the fold-assignment seed.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::rng_for;
use crate::features::{FeatureKind, FeatureVector};

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("linear SVM needs exactly two classes, got {0}")]
    NotBinary(usize),
    #[error("class '{0}' has no examples")]
    EmptyClass(String),
    #[error("k = {k} exceeds the {n} training examples")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    TooFewExamples(String),
    #[error("feature vector {0} has no label")]
    Unlabeled(usize),
    #[error("dataset mixes feature kinds")]
    MixedKinds,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),
}

/// Labeled vectors of uniform length and kind.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    /// Index into `class_names` per example.
    pub labels: Vec<usize>,
    /// Sorted class names.
    pub class_names: Vec<String>,
    pub kind: FeatureKind,
    /// Class treated as "positive" in TPR/FPR: `gunshot` when present,
    /// otherwise the first class.
    pub positive: usize,
}

impl LabeledDataset {
    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self, ClassifyError> {
        let first = vectors.first().ok_or(ClassifyError::EmptyDataset)?;
        let mut names = BTreeSet::new();
        for (i, v) in vectors.iter().enumerate() {
            if v.kind != first.kind {
                return Err(ClassifyError::MixedKinds);
            }
            if v.dim() != first.dim() {
                return Err(ClassifyError::DimensionMismatch {
                    expected: first.dim(),
                    got: v.dim(),
                });
            }
            names.insert(v.label.clone().ok_or(ClassifyError::Unlabeled(i))?);
        }
        let class_names: Vec<String> = names.into_iter().collect();
        let labels = vectors
            .iter()
            .map(|v| {
                let l = v.label.as_deref().unwrap_or_default();
                class_names.iter().position(|c| c == l).unwrap_or(0)
            })
            .collect();
        let positive = class_names.iter().position(|c| c == "gunshot").unwrap_or(0);
        Ok(Self {
            features: vectors.iter().map(|v| v.values.clone()).collect(),
            labels,
            class_names,
            kind: first.kind,
            positive,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// The examples at `indices`, keeping the class list.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            kind: self.kind,
            positive: self.positive,
        }
    }
}

/// Per-dimension min-max rescaling to `[0, 1]`; constant dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub ranges: Vec<(f64, f64)>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let ranges = (0..dim)
            .map(|d| {
                rows.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[d]), hi.max(r[d])))
            })
            .collect();
        Self { ranges }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.ranges)
            .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

pub trait Classifier {
    fn class_names(&self) -> &[String];
    fn dim(&self) -> usize;
    /// Predicted class index for a raw (unscaled) feature row.
    fn predict_index(&self, x: &[f64]) -> usize;

    fn predict(&self, fv: &FeatureVector) -> Result<&str, ClassifyError> {
        if fv.dim() != self.dim() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim(),
                got: fv.dim(),
            });
        }
        Ok(&self.class_names()[self.predict_index(&fv.values)])
    }
}

/// Linear SVM; class 1 on the positive side of `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_param: f64,
    pub scale: MinMaxScaler,
    pub class_names: Vec<String>,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let z = self.scale.transform(x);
        self.weights.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

impl Classifier for LinearSvmModel {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn predict_index(&self, x: &[f64]) -> usize {
        usize::from(self.decision(x) > 0.0)
    }
}

pub const DEFAULT_SVM_C: f64 = 100.0;
pub const DEFAULT_SVM_EPOCHS: usize = 2_000;

/// Fits a linear SVM by full-batch subgradient descent on
/// `λ/2·|w|² + mean(hinge)`, with `λ = 1/c_param`.
///
/// The bias is folded in as a constant feature. Steps follow `1/(λt)` with
/// projection onto the ball of radius `1/√λ`; the returned weights are the
/// average of the second half of the iterates.
pub fn train_linear_svm(
    data: &LabeledDataset,
    c_param: f64,
    epochs: usize,
) -> Result<LinearSvmModel, ClassifyError> {
    if data.class_names.len() != 2 {
        return Err(ClassifyError::NotBinary(data.class_names.len()));
    }
    if let Some(i) = data.class_counts().iter().position(|&c| c == 0) {
        return Err(ClassifyError::EmptyClass(data.class_names[i].clone()));
    }
    let scale = MinMaxScaler::fit(&data.features);
    let rows: Vec<Vec<f64>> = data
        .features
        .iter()
        .map(|x| {
            let mut z = scale.transform(x);
            z.push(1.0);
            z
        })
        .collect();
    let signs: Vec<f64> = data.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let n = rows.len() as f64;
    let dim = data.dim() + 1;
    let lambda = 1.0 / c_param;
    let radius = 1.0 / lambda.sqrt();
    let epochs = epochs.max(2);
    let mut w = vec![0.0; dim];
    let mut avg = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let average_from = epochs / 2;
    for t in 1..=epochs {
        grad.iter_mut().zip(&w).for_each(|(g, wi)| *g = lambda * wi);
        for (z, &y) in rows.iter().zip(&signs) {
            let margin = y * z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            if margin < 1.0 {
                for (g, zi) in grad.iter_mut().zip(z) {
                    *g -= y * zi / n;
                }
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= eta * g);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
        if t > average_from {
            avg.iter_mut().zip(&w).for_each(|(a, wi)| *a += wi);
        }
    }
    let count = (epochs - average_from) as f64;
    avg.iter_mut().for_each(|a| *a /= count);
    let bias = avg.pop().unwrap_or(0.0);
    Ok(LinearSvmModel {
        weights: avg,
        bias,
        c_param,
        scale,
        class_names: data.class_names.clone(),
    })
}

/// k-nearest-neighbour classifier over rescaled features.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub scale: MinMaxScaler,
    pub examples: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

pub fn train_knn(data: &LabeledDataset, k: usize) -> Result<KnnModel, ClassifyError> {
    if k == 0 {
        return Err(ClassifyError::ZeroK);
    }
    if k > data.len() {
        return Err(ClassifyError::KTooLarge { k, n: data.len() });
    }
    let scale = MinMaxScaler::fit(&data.features);
    Ok(KnnModel {
        k,
        examples: data.features.iter().map(|x| scale.transform(x)).collect(),
        scale,
        labels: data.labels.clone(),
        class_names: data.class_names.clone(),
    })
}

impl Classifier for KnnModel {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn dim(&self) -> usize {
        self.scale.ranges.len()
    }

    /// Majority vote of the `k` nearest examples (distance ties resolved by
    /// training order), vote ties going to the smallest class index.
    fn predict_index(&self, x: &[f64]) -> usize {
        let q = self.scale.transform(x);
        let mut dist: Vec<(f64, usize)> = self
            .examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; self.class_names.len()];
        for &(_, i) in &dist[..self.k] {
            votes[self.labels[i]] += 1;
        }
        let best = votes.iter().copied().max().unwrap_or(0);
        votes.iter().position(|&v| v == best).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    LinearSvm { c: f64, epochs: usize },
    Knn { k: usize },
}

impl Algorithm {
    pub fn svm() -> Self {
        Algorithm::LinearSvm {
            c: DEFAULT_SVM_C,
            epochs: DEFAULT_SVM_EPOCHS,
        }
    }

    pub fn knn() -> Self {
        Algorithm::Knn { k: 3 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::LinearSvm { .. } => "linear_svm",
            Algorithm::Knn { .. } => "knn",
        }
    }

    pub fn fit(&self, data: &LabeledDataset) -> Result<Box<dyn Classifier + Send + Sync>, ClassifyError> {
        Ok(match *self {
            Algorithm::LinearSvm { c, epochs } => Box::new(train_linear_svm(data, c, epochs)?),
            Algorithm::Knn { k } => Box::new(train_knn(data, k)?),
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svm" | "linear_svm" => Ok(Algorithm::svm()),
            "knn" => Ok(Algorithm::knn()),
            other => Err(ClassifyError::UnknownAlgorithm(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl FoldCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn add(&mut self, other: &FoldCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Cross-validation result. Rates are micro-averaged: counts are summed over
/// folds before dividing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: usize,
    pub per_fold: Vec<FoldCounts>,
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
    pub feature_kind: FeatureKind,
    pub algorithm_name: String,
    pub positive_class: String,
    pub seed: u64,
}

impl EvalReport {
    pub fn totals(&self) -> FoldCounts {
        let mut t = FoldCounts::default();
        self.per_fold.iter().for_each(|f| t.add(f));
        t
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Seeded stratified fold id for every example.
///
/// Each class is shuffled independently, the classes are concatenated and
/// positions are dealt round-robin, so every fold gets `len/folds ± 1`
/// examples and each class is spread as evenly as possible.
pub fn stratified_folds(data: &LabeledDataset, folds: usize, seed: u64) -> Result<Vec<usize>, ClassifyError> {
    if folds < 2 {
        return Err(ClassifyError::TooFewExamples("need at least 2 folds".into()));
    }
    for (name, count) in data.class_names.iter().zip(data.class_counts()) {
        if count < folds {
            return Err(ClassifyError::TooFewExamples(format!(
                "class '{name}' has {count} examples, fewer than {folds} folds"
            )));
        }
    }
    let mut rng = rng_for(seed);
    let mut order = Vec::with_capacity(data.len());
    for class in 0..data.class_names.len() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut assignment = vec![0; data.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    Ok(assignment)
}

/// Stratified k-fold cross-validation of `algorithm` on `data`.
pub fn cross_validate(
    data: &LabeledDataset,
    algorithm: &Algorithm,
    folds: usize,
    seed: u64,
) -> Result<EvalReport, ClassifyError> {
    let assignment = stratified_folds(data, folds, seed)?;
    let per_fold = (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignment[i] == f);
            let model = algorithm.fit(&data.subset(&train))?;
            let mut c = FoldCounts::default();
            for &i in &test {
                let predicted_pos = model.predict_index(&data.features[i]) == data.positive;
                let actual_pos = data.labels[i] == data.positive;
                match (actual_pos, predicted_pos) {
                    (true, true) => c.tp += 1,
                    (false, true) => c.fp += 1,
                    (false, false) => c.tn += 1,
                    (true, false) => c.fn_ += 1,
                }
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>, ClassifyError>>()?;
    let mut t = FoldCounts::default();
    per_fold.iter().for_each(|f| t.add(f));
    Ok(EvalReport {
        folds,
        per_fold,
        tpr: ratio(t.tp, t.tp + t.fn_),
        fpr: ratio(t.fp, t.fp + t.tn),
        accuracy: ratio(t.tp + t.tn, t.total()),
        feature_kind: data.kind,
        algorithm_name: algorithm.name().to_string(),
        positive_class: data.class_names[data.positive].clone(),
        seed,
    })
}

/// Text table with one row per report: feature, algorithm, TPR, FPR.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:<12} {:>7} {:>7}", "Feature", "Algorithm", "TPR", "FPR");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} {:<12} {:>7.3} {:>7.3}",
            r.feature_kind.to_string(),
            r.algorithm_name,
            r.tpr,
            r.fpr
        );
    }
    out
}
