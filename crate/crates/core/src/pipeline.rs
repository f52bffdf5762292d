//! Batch orchestration: manifest → preprocessed images → feature table →
//! model → predictions / cross-validated evaluation.
//!
//! Work is spread over a rayon pool of `jobs` threads; results are always
//! collected in input order, so outputs do not depend on scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bayes::{self, BayesError, GaussianNbModel};
use crate::config::{ConfigError, PipelineConfig};
use crate::eval::{self, ConfusionMatrix, EvalError, RocCurve};
use crate::features::{extract_features, feature_names, select_features, FeatureError, FeatureTable, FeatureVector};
use crate::imgio::{read_pgm_file, to_gray, GrayImage, ImageError};
use crate::label::Label;
use crate::phantom::{ManifestEntry, PhantomError};
use crate::preprocess::{preprocess_pipeline, PreprocessError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("cannot build a pool of {0} worker threads")]
    Pool(usize),
}

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R, PipelineError> {
    let jobs = jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|_| PipelineError::Pool(jobs))?;
    Ok(pool.install(f))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    let err = |message: String| PipelineError::Manifest { path: path.display().to_string(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let header = reader.headers().map_err(|e| err(e.to_string()))?;
    if header.len() != 2 || &header[0] != "path" || &header[1] != "label" {
        return Err(err("header must be `path,label`".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let label = rec[1].parse::<Label>().map_err(|e| err(format!("row {}: {e}", i + 1)))?;
        out.push(ManifestEntry { path: rec[0].to_string(), label });
    }
    Ok(out)
}

/// Resolves a manifest path relative to the manifest's own directory.
pub fn resolve(base_dir: &Path, entry: &ManifestEntry) -> PathBuf {
    let p = Path::new(&entry.path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Preprocessing followed by feature extraction for one image.
pub fn image_features(img: &GrayImage, cfg: &PipelineConfig) -> Result<FeatureVector, PipelineError> {
    let clean = preprocess_pipeline(img, &cfg.preprocess)?;
    Ok(extract_features(&clean, &cfg.features)?)
}

#[derive(Debug, Clone)]
pub struct ExtractFailure {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub table: FeatureTable,
    pub failures: Vec<ExtractFailure>,
}

fn assemble(
    cfg: &PipelineConfig,
    results: Vec<(String, Label, Result<FeatureVector, PipelineError>)>,
) -> Result<Extraction, PipelineError> {
    let mut table = FeatureTable::new(feature_names(&cfg.features))?;
    let mut failures = Vec::new();
    for (id, label, result) in results {
        match result {
            Ok(v) => table.push(id, label, v)?,
            Err(e) => failures.push(ExtractFailure { id, message: e.to_string() }),
        }
    }
    Ok(Extraction { table, failures })
}

/// One table row per readable manifest entry, in manifest order; entries that
/// fail are reported in `failures` instead.
pub fn extract_manifest(
    entries: &[ManifestEntry],
    base_dir: &Path,
    cfg: &PipelineConfig,
    jobs: usize,
) -> Result<Extraction, PipelineError> {
    let results = with_pool(jobs, || {
        entries
            .par_iter()
            .map(|e| {
                let result = read_pgm_file(resolve(base_dir, e))
                    .map_err(PipelineError::from)
                    .and_then(|raw| image_features(&to_gray(&raw), cfg));
                (e.path.clone(), e.label, result)
            })
            .collect()
    })?;
    assemble(cfg, results)
}

pub fn extract_images(
    images: &[(String, Label, GrayImage)],
    cfg: &PipelineConfig,
    jobs: usize,
) -> Result<Extraction, PipelineError> {
    let results = with_pool(jobs, || {
        images
            .par_iter()
            .map(|(id, label, img)| (id.clone(), *label, image_features(img, cfg)))
            .collect()
    })?;
    assemble(cfg, results)
}

/// Optional Fisher-ratio selection (`cfg.select_k`), then Naive Bayes training.
pub fn train_model(table: &FeatureTable, cfg: &PipelineConfig) -> Result<GaussianNbModel, PipelineError> {
    let table = match cfg.select_k {
        Some(k) => table.select(&select_features(table, k)?)?,
        None => table.clone(),
    };
    Ok(bayes::train(&table)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub score: f64,
    pub label: Label,
}

/// Scores every row with the model's own feature subset.
pub fn predict(
    table: &FeatureTable,
    model: &GaussianNbModel,
    threshold: f64,
) -> Result<Vec<Prediction>, PipelineError> {
    let projected = table.select(model.feature_names()).map_err(|_| BayesError::FeatureMismatch {
        expected: model.feature_names().to_vec(),
        got: table.names().to_vec(),
    })?;
    (0..projected.len())
        .map(|i| {
            let c = bayes::classify(model, &projected.vector(i), threshold)?;
            Ok(Prediction { id: projected.rows()[i].id.clone(), score: c.score, label: c.label })
        })
        .collect()
}

/// CSV `id,score,label`.
pub fn predictions_csv(predictions: &[Prediction]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["id", "score", "label"]).expect("in-memory write");
    for p in predictions {
        w.write_record([p.id.clone(), format!("{:?}", p.score), p.label.to_string()]).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub k: usize,
    pub threshold: f64,
    /// Out-of-fold `P(suspicious)` per table row.
    pub scores: Vec<f64>,
    pub truth: Vec<Label>,
    pub confusion: ConfusionMatrix,
    pub sensitivity: f64,
    pub specificity: f64,
    pub roc: RocCurve,
}

impl EvaluationReport {
    pub fn summary(&self) -> String {
        let cm = &self.confusion;
        let mut s = String::new();
        let _ = writeln!(s, "cases: {} ({}-fold stratified cross-validation)", cm.total(), self.k);
        let _ = writeln!(s, "threshold: {}", self.threshold);
        let _ = writeln!(s, "confusion matrix (positive = suspicious):");
        let _ = writeln!(s, "                  pred suspicious  pred normal");
        let _ = writeln!(s, "  true suspicious {:>16}  {:>11}", cm.tp, cm.fn_);
        let _ = writeln!(s, "  true normal     {:>16}  {:>11}", cm.fp, cm.tn);
        let _ = writeln!(s, "sensitivity: {:.6}", self.sensitivity);
        let _ = writeln!(s, "specificity: {:.6}", self.specificity);
        let _ = writeln!(s, "auc: {:.6}", self.roc.auc);
        s
    }
}

/// Stratified k-fold cross-validation with out-of-fold scores pooled into a
/// single ROC curve. Feature selection (if configured) runs inside each
/// training fold.
pub fn cross_validate(table: &FeatureTable, cfg: &PipelineConfig, jobs: usize) -> Result<EvaluationReport, PipelineError> {
    let folds = eval::kfold(table, cfg.cv_k, cfg.cv_seed)?;
    let per_fold: Vec<Result<Vec<(usize, f64)>, PipelineError>> = with_pool(jobs, || {
        folds
            .par_iter()
            .map(|fold| {
                let model = train_model(&table.subset(&fold.train), cfg)?;
                let preds = predict(&table.subset(&fold.test), &model, cfg.classifier_threshold)?;
                Ok(fold.test.iter().copied().zip(preds.into_iter().map(|p| p.score)).collect())
            })
            .collect()
    })?;

    let mut scores = vec![f64::NAN; table.len()];
    for fold in per_fold {
        for (i, s) in fold? {
            scores[i] = s;
        }
    }
    let truth: Vec<Label> = table.rows().iter().map(|r| r.label).collect();
    let pred: Vec<Label> = scores
        .iter()
        .map(|&s| if s >= cfg.classifier_threshold { Label::Suspicious } else { Label::Normal })
        .collect();
    let confusion = eval::confusion(&pred, &truth)?;
    Ok(EvaluationReport {
        k: cfg.cv_k,
        threshold: cfg.classifier_threshold,
        sensitivity: eval::sensitivity(&confusion)?,
        specificity: eval::specificity(&confusion)?,
        roc: eval::roc(&scores, &truth)?,
        confusion,
        scores,
        truth,
    })
}
