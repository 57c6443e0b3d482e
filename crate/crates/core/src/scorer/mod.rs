//! Reference-less simplicity scoring.
//!
//! A sentence gets a real-valued simplicity estimate (higher = simpler),
//! either from the built-in baseline — a ridge regressor over six surface
//! features, trained on softened labels — or from an external scorer process
//! speaking the newline-delimited JSON protocol (see [`external`]).
//!
//! Score arithmetic on top of the estimate:
//! * [`delta_sle`] — simplicity gain of an output over its input;
//! * [`eps_sle`] — absolute error against a target simplicity level.
//!
//! Training solves the normal equations in closed form for each candidate
//! ridge penalty and keeps the model with the lowest document-level MAE on
//! the dev set (the document estimate being the mean of its sentence
//! predictions). Features are z-scored with training-set statistics before
//! the solve; the bias is never penalized.
//!
//! One wrinkle is inherent to the feature schema: FKGL is an exact affine
//! combination of words-per-sentence and syllables-per-word, so on
//! text-derived features the lambda = 0 system is always rank-deficient.
//! The solver falls back to the minimum-norm least-squares solution in that
//! case, which leaves fitted values (and predictions on any real sentence,
//! which satisfies the same affine relation) well defined.

pub mod external;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRecord;
use crate::error::{Error, Result};
use crate::evaluation;
use crate::readability;

pub use external::ExternalScorer;

/// Bumped whenever the feature definition changes; serialized models carry it
/// and refuse to load across versions.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

/// Number of surface features.
pub const FEATURE_COUNT: usize = 6;

/// Ridge penalties tried when no grid is given.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];

/// Surface features of one sentence, in schema order:
/// words/sentence, mean chars/word, mean syllables/word, FKGL,
/// long-word ratio (>= 7 chars), ln(1 + words).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

/// Compute the feature vector for one sentence.
pub fn extract_features(text: &str) -> Result<FeatureVector> {
    let stats = readability::analyze(text)?;
    let tokens = readability::word_tokens(text);
    let words = stats.word_count as f64;
    let chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
    let long_words = tokens.iter().filter(|t| t.chars().count() >= 7).count();
    Ok(FeatureVector([
        words / stats.sentence_count as f64,
        chars as f64 / words,
        stats.syllable_count as f64 / words,
        readability::fkgl(&stats),
        long_words as f64 / words,
        (1.0 + words).ln(),
    ]))
}

/// Which label the regressor trains against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// Softened real-valued labels (`soft_label` must be present).
    Soft,
    /// The quantized document reading level.
    Quantized,
}

impl LabelSource {
    fn label(self, record: &SentenceRecord) -> Result<f64> {
        match self {
            LabelSource::Soft => record.soft_label.ok_or_else(|| {
                Error::Invalid(format!(
                    "record in doc {:?} has no soft_label; run soften first",
                    record.doc_id
                ))
            }),
            LabelSource::Quantized => Ok(f64::from(record.level)),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            LabelSource::Soft => "soft",
            LabelSource::Quantized => "quantized",
        }
    }
}

/// Trained baseline regressor: weights over z-scored features plus an
/// unpenalized bias, with the standardization statistics baked in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineModel {
    pub feature_schema_version: u32,
    pub provenance: String,
    pub ridge_lambda: f64,
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub feature_means: [f64; FEATURE_COUNT],
    pub feature_stds: [f64; FEATURE_COUNT],
    pub label_source: String,
    pub dev_doc_mae: f64,
}

impl BaselineModel {
    /// Score pre-extracted features.
    pub fn score_features(&self, features: &FeatureVector) -> f64 {
        let mut acc = self.bias;
        for j in 0..FEATURE_COUNT {
            let z = (features.0[j] - self.feature_means[j]) / self.feature_stds[j];
            acc += self.weights[j] * z;
        }
        acc
    }

    /// Extract features and score one sentence.
    pub fn score_text(&self, text: &str) -> Result<f64> {
        Ok(self.score_features(&extract_features(text)?))
    }

    fn validate(&self) -> Result<()> {
        if self.feature_schema_version != FEATURE_SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "model feature schema version {} does not match this build ({}); \
                 refusing to score with misaligned features",
                self.feature_schema_version, FEATURE_SCHEMA_VERSION
            )));
        }
        let finite = self.weights.iter().all(|w| w.is_finite())
            && self.bias.is_finite()
            && self.feature_means.iter().all(|m| m.is_finite())
            && self.feature_stds.iter().all(|s| s.is_finite() && *s > 0.0);
        if !finite {
            return Err(Error::Invalid("model contains non-finite parameters".into()));
        }
        Ok(())
    }
}

/// Write a model as pretty JSON.
pub fn save_model(path: impl AsRef<Path>, model: &BaselineModel) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(model)
        .map_err(|e| Error::Invalid(format!("serialize model: {e}")))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Load and validate a model; a schema-version mismatch is a hard error.
pub fn load_model(path: impl AsRef<Path>) -> Result<BaselineModel> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: BaselineModel = serde_json::from_str(&raw)
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?;
    model.validate()?;
    Ok(model)
}

/// Per-lambda outcome of the training grid.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaTrial {
    pub lambda: f64,
    /// Dev document-level MAE; `None` when the solve was skipped.
    pub dev_doc_mae: Option<f64>,
    pub skipped: Option<String>,
}

/// Result of [`train_baseline`]: the selected model plus the full grid trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BaselineModel,
    pub trials: Vec<LambdaTrial>,
}

struct Standardization {
    means: [f64; FEATURE_COUNT],
    stds: [f64; FEATURE_COUNT],
}

fn standardization(features: &[FeatureVector]) -> Standardization {
    let n = features.len() as f64;
    let mut means = [0.0; FEATURE_COUNT];
    let mut stds = [0.0; FEATURE_COUNT];
    for f in features {
        for j in 0..FEATURE_COUNT {
            means[j] += f.0[j];
        }
    }
    for m in &mut means {
        *m /= n;
    }
    for f in features {
        for j in 0..FEATURE_COUNT {
            stds[j] += (f.0[j] - means[j]).powi(2);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        // constant feature: leave it at zero after centering
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Standardization { means, stds }
}

/// Solve `a * w = b` for SPD-or-PSD `a`. Cholesky on the well-conditioned
/// path; minimum-norm SVD solution when `a` is (numerically) rank-deficient.
fn solve_normal_equations(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let diag = chol.l().diagonal();
        let max_d = diag.iter().cloned().fold(0.0f64, f64::max);
        let min_d = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_d > 0.0 && (min_d / max_d).powi(2) > 1e-10 {
            return Ok(chol.solve(b));
        }
    }
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let solution = svd
        .solve(b, max_sv * 1e-12)
        .map_err(|e| Error::Numeric(format!("normal equations solve failed: {e}")))?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("normal equations produced non-finite weights".into()));
    }
    Ok(solution.column(0).into_owned())
}

/// Closed-form ridge fit against raw feature rows. Features are z-scored
/// internally; the bias is unpenalized. Exposed for direct use on synthetic
/// systems; [`train_baseline`] drives it from sentence records.
pub fn fit_ridge(
    features: &[FeatureVector],
    labels: &[f64],
    lambda: f64,
) -> Result<BaselineModel> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "feature/label counts differ or are empty: {} vs {}",
            features.len(),
            labels.len()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Invalid(format!("ridge lambda must be >= 0, got {lambda}")));
    }

    let n = features.len();
    let std = standardization(features);
    let mut z = DMatrix::zeros(n, FEATURE_COUNT);
    for (i, f) in features.iter().enumerate() {
        for j in 0..FEATURE_COUNT {
            z[(i, j)] = (f.0[j] - std.means[j]) / std.stds[j];
        }
    }
    // center columns and the target so the bias stays unpenalized
    let z_mean: Vec<f64> = (0..FEATURE_COUNT).map(|j| z.column(j).mean()).collect();
    for j in 0..FEATURE_COUNT {
        let m = z_mean[j];
        for i in 0..n {
            z[(i, j)] -= m;
        }
    }
    let y_mean = labels.iter().sum::<f64>() / n as f64;
    let y = DVector::from_iterator(n, labels.iter().map(|&l| l - y_mean));

    let mut gram = z.transpose() * &z;
    for j in 0..FEATURE_COUNT {
        gram[(j, j)] += lambda;
    }
    let rhs = z.transpose() * y;
    let w = solve_normal_equations(&gram, &rhs)?;

    let mut weights = [0.0; FEATURE_COUNT];
    for j in 0..FEATURE_COUNT {
        weights[j] = w[j];
    }
    let bias = y_mean - weights.iter().zip(&z_mean).map(|(w, m)| w * m).sum::<f64>();

    let model = BaselineModel {
        feature_schema_version: FEATURE_SCHEMA_VERSION,
        provenance: "baseline".to_string(),
        ridge_lambda: lambda,
        weights,
        bias,
        feature_means: std.means,
        feature_stds: std.stds,
        label_source: String::new(),
        dev_doc_mae: f64::NAN,
    };
    if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
        return Err(Error::Numeric("ridge fit produced non-finite weights".into()));
    }
    Ok(model)
}

fn doc_levels(records: &[SentenceRecord]) -> Result<BTreeMap<String, u8>> {
    let mut levels = BTreeMap::new();
    for record in records {
        match levels.insert(record.doc_id.clone(), record.level) {
            Some(prev) if prev != record.level => {
                return Err(Error::Invalid(format!(
                    "doc {:?} appears with levels {prev} and {}",
                    record.doc_id, record.level
                )));
            }
            _ => {}
        }
    }
    Ok(levels)
}

/// Train the baseline over a lambda grid, selecting by dev document-MAE.
///
/// The grid is deduplicated and tried in ascending order; ties on dev
/// Doc-MAE therefore resolve to the smallest lambda. Lambdas whose solve
/// fails are recorded as skipped; if every lambda fails, training errors.
pub fn train_baseline(
    train: &[SentenceRecord],
    dev: &[SentenceRecord],
    lambda_grid: &[f64],
    label_source: LabelSource,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    if dev.is_empty() {
        return Err(Error::Invalid("dev set is empty; cannot select lambda".into()));
    }
    if lambda_grid.is_empty() {
        return Err(Error::Invalid("lambda grid is empty".into()));
    }
    let mut grid: Vec<f64> = lambda_grid.to_vec();
    for l in &grid {
        if !(l.is_finite() && *l >= 0.0) {
            return Err(Error::Invalid(format!("ridge lambda must be >= 0, got {l}")));
        }
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();

    let mut train_features = Vec::with_capacity(train.len());
    let mut train_labels = Vec::with_capacity(train.len());
    for record in train {
        train_features.push(extract_features(&record.text).map_err(|e| {
            Error::Invalid(format!("train doc {:?}: {e}", record.doc_id))
        })?);
        train_labels.push(label_source.label(record)?);
    }
    let mut dev_features = Vec::with_capacity(dev.len());
    for record in dev {
        dev_features.push(extract_features(&record.text).map_err(|e| {
            Error::Invalid(format!("dev doc {:?}: {e}", record.doc_id))
        })?);
    }
    let dev_levels = doc_levels(dev)?;

    let mut trials = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, BaselineModel)> = None;
    for &lambda in &grid {
        let mut model = match fit_ridge(&train_features, &train_labels, lambda) {
            Ok(model) => model,
            Err(e) => {
                trials.push(LambdaTrial {
                    lambda,
                    dev_doc_mae: None,
                    skipped: Some(e.to_string()),
                });
                continue;
            }
        };
        let predictions: Vec<(String, f64)> = dev
            .iter()
            .zip(&dev_features)
            .map(|(record, f)| (record.doc_id.clone(), model.score_features(f)))
            .collect();
        let mae = evaluation::doc_mae(&predictions, &dev_levels)?;
        trials.push(LambdaTrial {
            lambda,
            dev_doc_mae: Some(mae),
            skipped: None,
        });
        model.label_source = label_source.as_str().to_string();
        model.dev_doc_mae = mae;
        if best.as_ref().is_none_or(|(best_mae, _)| mae < *best_mae) {
            best = Some((mae, model));
        }
    }

    match best {
        Some((_, model)) => Ok(TrainOutcome { model, trials }),
        None => Err(Error::Numeric(format!(
            "every lambda in the grid failed: {:?}",
            trials
                .iter()
                .filter_map(|t| t.skipped.as_deref())
                .collect::<Vec<_>>()
        ))),
    }
}

/// Simplicity gain of a system output over its input.
pub fn delta_sle(score_output: f64, score_input: f64) -> f64 {
    score_output - score_input
}

/// Absolute error of a score against a target simplicity level.
pub fn eps_sle(score_output: f64, target_level: f64) -> f64 {
    (score_output - target_level).abs()
}

/// A scoring backend: the built-in baseline or an external process.
pub enum Scorer {
    Baseline(BaselineModel),
    External(ExternalScorer),
}

impl Scorer {
    /// Score a batch, preserving input order.
    pub fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        match self {
            Scorer::Baseline(model) => texts.iter().map(|t| model.score_text(t)).collect(),
            Scorer::External(external) => external.score_batch(texts),
        }
    }

    pub fn score(&self, text: &str) -> Result<f64> {
        Ok(self.score_batch(std::slice::from_ref(&text.to_string()))?[0])
    }
}
