//! Gaussian Naive Bayes over the two screening classes.
//!
//! The posterior is evaluated in log space: each class accumulates
//! `ln prior + sum_f ln N(x_f; mu, sigma^2)` (every per-feature term floored at
//! [`LOG_DENSITY_FLOOR`]), and the two joint log-probabilities are normalized
//! through their log-odds, which play the role of the evidence term.

use std::fmt::Write as _;

use thiserror::Error;

use crate::features::{FeatureTable, FeatureVector, Moments};
use crate::label::Label;

pub const MODEL_VERSION: u32 = 1;

/// Per-feature log-density floor, close to `ln(f64::MIN_POSITIVE)`.
pub const LOG_DENSITY_FLOOR: f64 = -745.0;

/// Posterior log-odds are clamped to this magnitude so that neither class
/// probability rounds to exactly 0 or 1.
pub const MAX_LOG_ODDS: f64 = 36.0;

/// Relative and absolute components of the variance floor.
pub const VARIANCE_FLOOR_RELATIVE: f64 = 1e-9;
pub const VARIANCE_FLOOR_ABSOLUTE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("training table is empty")]
    EmptyTable,
    #[error("no training rows for class {0}")]
    MissingClass(Label),
    #[error("feature names {got:?} do not match model features {expected:?}")]
    FeatureMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("unsupported model version {0:?}")]
    UnknownVersion(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNbModel {
    feature_names: Vec<String>,
    /// Indexed by [`Label::index`].
    priors: [f64; 2],
    means: [Vec<f64>; 2],
    variances: [Vec<f64>; 2],
    /// Per-feature variance floor.
    floors: Vec<f64>,
}

/// Class probabilities, indexed by [`Label::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior(pub [f64; 2]);

impl Posterior {
    pub fn get(&self, label: Label) -> f64 {
        self.0[label.index()]
    }

    pub fn suspicious(&self) -> f64 {
        self.get(Label::Suspicious)
    }

    pub fn argmax(&self) -> Label {
        if self.0[1] >= self.0[0] {
            Label::Suspicious
        } else {
            Label::Normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: Label,
    /// `P(suspicious | x)`.
    pub score: f64,
}

impl GaussianNbModel {
    pub fn from_parameters(
        feature_names: Vec<String>,
        priors: [f64; 2],
        means: [Vec<f64>; 2],
        variances: [Vec<f64>; 2],
        floors: Vec<f64>,
    ) -> Result<Self, BayesError> {
        let model = GaussianNbModel { feature_names, priors, means, variances, floors };
        model.validate().map_err(BayesError::InvalidModel)?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), String> {
        let n = self.feature_names.len();
        if self.floors.len() != n || self.means.iter().chain(&self.variances).any(|v| v.len() != n) {
            return Err(format!("parameter lengths do not match {n} features"));
        }
        for (i, name) in self.feature_names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(format!("bad feature name {name:?}"));
            }
            if self.feature_names[..i].contains(name) {
                return Err(format!("duplicate feature {name:?}"));
            }
        }
        if !self.priors.iter().all(|p| p.is_finite() && *p > 0.0) {
            return Err(format!("priors {:?} must be positive", self.priors));
        }
        if (self.priors[0] + self.priors[1] - 1.0).abs() > 1e-12 {
            return Err(format!("priors {:?} do not sum to 1", self.priors));
        }
        for f in 0..n {
            let floor = self.floors[f];
            if !(floor.is_finite() && floor > 0.0) {
                return Err(format!("variance floor {floor} for {} must be positive", self.feature_names[f]));
            }
            for c in 0..2 {
                let (m, v) = (self.means[c][f], self.variances[c][f]);
                if !m.is_finite() || !v.is_finite() || v < floor {
                    return Err(format!(
                        "{} / {}: mean {m}, variance {v} (floor {floor})",
                        Label::ALL[c],
                        self.feature_names[f]
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn prior(&self, label: Label) -> f64 {
        self.priors[label.index()]
    }

    pub fn mean(&self, label: Label) -> &[f64] {
        &self.means[label.index()]
    }

    pub fn variance(&self, label: Label) -> &[f64] {
        &self.variances[label.index()]
    }

    pub fn floors(&self) -> &[f64] {
        &self.floors
    }

    fn check_features(&self, x: &FeatureVector) -> Result<(), BayesError> {
        if x.names() != self.feature_names.as_slice() {
            return Err(BayesError::FeatureMismatch {
                expected: self.feature_names.clone(),
                got: x.names().to_vec(),
            });
        }
        Ok(())
    }

    /// Unnormalized `ln P(c) + sum_f ln p(x_f | c)` per class.
    pub fn log_joint(&self, x: &FeatureVector) -> Result<[f64; 2], BayesError> {
        self.check_features(x)?;
        Ok(std::array::from_fn(|c| {
            let terms = x.values().iter().zip(&self.means[c]).zip(&self.variances[c]);
            terms.fold(self.priors[c].ln(), |acc, ((&v, &m), &var)| {
                acc + log_gaussian(v, m, var).max(LOG_DENSITY_FLOOR)
            })
        }))
    }
}

/// `ln N(x; mean, var)`
pub fn log_gaussian(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
}

/// Normalizes per-class log joints into probabilities.
pub fn posterior_from_log_joint(log_joint: [f64; 2]) -> Posterior {
    let odds = (log_joint[1] - log_joint[0]).clamp(-MAX_LOG_ODDS, MAX_LOG_ODDS);
    let suspicious = 1.0 / (1.0 + (-odds).exp());
    let normal = 1.0 / (1.0 + odds.exp());
    Posterior([normal, suspicious])
}

pub fn train(table: &FeatureTable) -> Result<GaussianNbModel, BayesError> {
    if table.is_empty() {
        return Err(BayesError::EmptyTable);
    }
    for label in Label::ALL {
        if table.count(label) == 0 {
            return Err(BayesError::MissingClass(label));
        }
    }
    let n_features = table.names().len();
    let total = table.len() as f64;
    let mut priors = [0.0; 2];
    for label in Label::ALL {
        priors[label.index()] = table.count(label) as f64 / total;
    }

    let column = |f: usize, label: Option<Label>| -> Vec<f64> {
        table
            .rows()
            .iter()
            .filter(|r| label.is_none_or(|l| r.label == l))
            .map(|r| r.values[f])
            .collect()
    };
    let mut floors = Vec::with_capacity(n_features);
    let mut means = [Vec::with_capacity(n_features), Vec::with_capacity(n_features)];
    let mut variances = [Vec::with_capacity(n_features), Vec::with_capacity(n_features)];
    for f in 0..n_features {
        let global = Moments::of(&column(f, None)).expect("table is non-empty");
        let floor = (VARIANCE_FLOOR_RELATIVE * global.std * global.std).max(VARIANCE_FLOOR_ABSOLUTE);
        floors.push(floor);
        for label in Label::ALL {
            let m = Moments::of(&column(f, Some(label))).expect("class is non-empty");
            means[label.index()].push(m.mean);
            variances[label.index()].push((m.std * m.std).max(floor));
        }
    }
    GaussianNbModel::from_parameters(table.names().to_vec(), priors, means, variances, floors)
}

pub fn posterior(model: &GaussianNbModel, x: &FeatureVector) -> Result<Posterior, BayesError> {
    Ok(posterior_from_log_joint(model.log_joint(x)?))
}

/// Suspicious iff `P(suspicious | x) >= threshold`.
pub fn classify(model: &GaussianNbModel, x: &FeatureVector, threshold: f64) -> Result<Classification, BayesError> {
    let score = posterior(model, x)?.suspicious();
    let label = if score >= threshold { Label::Suspicious } else { Label::Normal };
    Ok(Classification { label, score })
}

/// Line-oriented model file:
///
/// ```text
/// nbmodel v1
/// prior <class> <value>                      (one per class)
/// floor <feature> <variance floor>           (per feature, then its two gauss lines)
/// gauss <class> <feature> <mean> <variance>
/// end
/// ```
///
/// Numbers use the shortest representation that parses back exactly.
pub fn save_model(model: &GaussianNbModel) -> Vec<u8> {
    let mut s = format!("nbmodel v{MODEL_VERSION}\n");
    for label in Label::ALL {
        let _ = writeln!(s, "prior {label} {:?}", model.priors[label.index()]);
    }
    for (f, name) in model.feature_names.iter().enumerate() {
        let _ = writeln!(s, "floor {name} {:?}", model.floors[f]);
        for label in Label::ALL {
            let c = label.index();
            let _ = writeln!(s, "gauss {label} {name} {:?} {:?}", model.means[c][f], model.variances[c][f]);
        }
    }
    s.push_str("end\n");
    s.into_bytes()
}

pub fn load_model(bytes: &[u8]) -> Result<GaussianNbModel, BayesError> {
    let corrupt = |msg: String| BayesError::CorruptModel(msg);
    let text = std::str::from_utf8(bytes).map_err(|_| corrupt("not UTF-8".into()))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines.next().ok_or_else(|| corrupt("empty file".into()))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("nbmodel") {
        return Err(corrupt(format!("bad header line {header:?}")));
    }
    let version = head.next().unwrap_or("");
    if version != format!("v{MODEL_VERSION}") {
        return Err(BayesError::UnknownVersion(version.to_string()));
    }
    if head.next().is_some() {
        return Err(corrupt(format!("bad header line {header:?}")));
    }

    let num = |tok: &str, line: usize| -> Result<f64, BayesError> {
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| corrupt(format!("line {}: bad number {tok:?}", line + 1)))
    };
    let label = |tok: &str, line: usize| -> Result<Label, BayesError> {
        tok.parse::<Label>().map_err(|e| corrupt(format!("line {}: {e}", line + 1)))
    };

    let mut priors: [Option<f64>; 2] = [None, None];
    let mut names: Vec<String> = Vec::new();
    let mut floors: Vec<f64> = Vec::new();
    let mut params: Vec<[Option<(f64, f64)>; 2]> = Vec::new();
    let mut ended = false;

    for (i, line) in lines {
        if ended {
            return Err(corrupt(format!("line {}: content after `end`", i + 1)));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["prior", class, value] => {
                let c = label(class, i)?.index();
                if priors[c].replace(num(value, i)?).is_some() {
                    return Err(corrupt(format!("line {}: duplicate prior", i + 1)));
                }
            }
            ["floor", name, value] => {
                if names.iter().any(|n| n == name) {
                    return Err(corrupt(format!("line {}: duplicate feature {name:?}", i + 1)));
                }
                names.push(name.to_string());
                floors.push(num(value, i)?);
                params.push([None, None]);
            }
            ["gauss", class, name, mean, var] => {
                let c = label(class, i)?.index();
                let f = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| corrupt(format!("line {}: gauss before floor for {name:?}", i + 1)))?;
                if params[f][c].replace((num(mean, i)?, num(var, i)?)).is_some() {
                    return Err(corrupt(format!("line {}: duplicate gauss record", i + 1)));
                }
            }
            ["end"] => ended = true,
            _ => return Err(corrupt(format!("line {}: unrecognized record {line:?}", i + 1))),
        }
    }
    if !ended {
        return Err(corrupt("missing `end` record (truncated file?)".into()));
    }
    let priors = match priors {
        [Some(a), Some(b)] => [a, b],
        _ => return Err(corrupt("missing prior record".into())),
    };
    let mut means = [Vec::new(), Vec::new()];
    let mut variances = [Vec::new(), Vec::new()];
    for (f, p) in params.iter().enumerate() {
        for c in 0..2 {
            let (m, v) = p[c].ok_or_else(|| {
                corrupt(format!("missing gauss record for {} / {}", Label::ALL[c], names[f]))
            })?;
            means[c].push(m);
            variances[c].push(v);
        }
    }
    GaussianNbModel::from_parameters(names, priors, means, variances, floors).map_err(|e| match e {
        BayesError::InvalidModel(msg) => corrupt(msg),
        other => other,
    })
}
