//! Flat `section.key = value` configuration shared by every command.
//!
//! Blank lines are ignored and `#` starts a comment that runs to the end of
//! the line. Every key is optional; unknown keys, repeated keys and
//! out-of-range values are errors.
//!
//! | key                          | default   |
//! |------------------------------|-----------|
//! | `preprocess.threshold`       | 0.1       |
//! | `preprocess.orient`          | on        |
//! | `preprocess.artifact_removal`| on        |
//! | `wavelet.filter`             | daub4     |
//! | `wavelet.levels`             | 3         |
//! | `features.mode`              | default8  |
//! | `features.select_k`          | none      |
//! | `classifier.threshold`       | 0.5       |
//! | `cv.k`                       | 5         |
//! | `cv.seed`                    | 7         |
//! | `phantom.*`                  | see [`PhantomConfig::default`] |

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::features::{FeatureConfig, FeatureMode};
use crate::phantom::PhantomConfig;
use crate::preprocess::PreprocessConfig;
use crate::wavelet::FilterId;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for `{key}`: {reason}")]
    InvalidValue { line: usize, key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    /// Keep only the top-k features by Fisher ratio before training.
    pub select_k: Option<usize>,
    pub classifier_threshold: f64,
    pub cv_k: usize,
    pub cv_seed: u64,
    pub phantom: PhantomConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            select_k: None,
            classifier_threshold: 0.5,
            cv_k: 5,
            cv_seed: 7,
            phantom: PhantomConfig::default(),
        }
    }
}

fn parse_switch(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err("expected on/off".into()),
    }
}

fn parse_num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

fn switch(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.split_once('#').map_or(raw, |(content, _)| content).trim();
            if trimmed.is_empty() {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found {trimmed:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            cfg.set(key, value).map_err(|reason| match reason {
                None => ConfigError::UnknownKey { line, key: key.into() },
                Some(reason) => ConfigError::InvalidValue { line, key: key.into(), value: value.into(), reason },
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// `Err(None)` for an unknown key, `Err(Some(reason))` for a bad value.
    fn set(&mut self, key: &str, v: &str) -> Result<(), Option<String>> {
        let p = &mut self.phantom;
        match key {
            "preprocess.threshold" => self.preprocess.threshold = parse_num(v)?,
            "preprocess.orient" => self.preprocess.orient = parse_switch(v)?,
            "preprocess.artifact_removal" => self.preprocess.artifact_removal = parse_switch(v)?,
            "wavelet.filter" => self.features.filter = v.parse::<FilterId>().map_err(|e| e.to_string())?,
            "wavelet.levels" => self.features.levels = parse_num(v)?,
            "features.mode" => self.features.mode = v.parse::<FeatureMode>()?,
            "features.select_k" => {
                self.select_k = match v {
                    "none" | "all" => None,
                    _ => Some(parse_num(v)?),
                }
            }
            "classifier.threshold" => self.classifier_threshold = parse_num(v)?,
            "cv.k" => self.cv_k = parse_num(v)?,
            "cv.seed" => self.cv_seed = parse_num(v)?,
            "phantom.size" => p.size = parse_num(v)?,
            "phantom.count_per_class" => p.count_per_class = parse_num(v)?,
            "phantom.seed" => p.seed = parse_num(v)?,
            "phantom.noise_sigma" => p.noise_sigma = parse_num(v)?,
            "phantom.mass_amplitude" => p.mass_amplitude = parse_num(v)?,
            "phantom.mass_radius" => p.mass_radius = parse_num(v)?,
            "phantom.microcalc_count" => p.microcalc_count = parse_num(v)?,
            "phantom.microcalc_amplitude" => p.microcalc_amplitude = parse_num(v)?,
            "phantom.artifact_label" => p.artifact_label = parse_switch(v)?,
            _ => return Err(None),
        }
        Ok(())
    }

    /// Checks cross-field constraints that do not depend on the data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let t = self.preprocess.threshold;
        if !(0.0..=1.0).contains(&t) {
            return bad(format!("preprocess.threshold {t} must lie in [0, 1]"));
        }
        if self.features.levels == 0 {
            return bad("wavelet.levels must be at least 1".into());
        }
        let ct = self.classifier_threshold;
        if !(ct > 0.0 && ct < 1.0) {
            return bad(format!("classifier.threshold {ct} must lie in (0, 1)"));
        }
        if self.cv_k < 2 {
            return bad(format!("cv.k {} must be at least 2", self.cv_k));
        }
        if self.select_k == Some(0) {
            return bad("features.select_k must be at least 1".into());
        }
        Ok(())
    }

    /// Renders every key; `parse(render())` reproduces the config.
    pub fn render(&self) -> String {
        let p = &self.phantom;
        let mut s = String::new();
        let _ = writeln!(s, "preprocess.threshold = {:?}", self.preprocess.threshold);
        let _ = writeln!(s, "preprocess.orient = {}", switch(self.preprocess.orient));
        let _ = writeln!(s, "preprocess.artifact_removal = {}", switch(self.preprocess.artifact_removal));
        let _ = writeln!(s, "wavelet.filter = {}", self.features.filter);
        let _ = writeln!(s, "wavelet.levels = {}", self.features.levels);
        let _ = writeln!(s, "features.mode = {}", self.features.mode);
        match self.select_k {
            Some(k) => {
                let _ = writeln!(s, "features.select_k = {k}");
            }
            None => s.push_str("features.select_k = none\n"),
        }
        let _ = writeln!(s, "classifier.threshold = {:?}", self.classifier_threshold);
        let _ = writeln!(s, "cv.k = {}", self.cv_k);
        let _ = writeln!(s, "cv.seed = {}", self.cv_seed);
        let _ = writeln!(s, "phantom.size = {}", p.size);
        let _ = writeln!(s, "phantom.count_per_class = {}", p.count_per_class);
        let _ = writeln!(s, "phantom.seed = {}", p.seed);
        let _ = writeln!(s, "phantom.noise_sigma = {:?}", p.noise_sigma);
        let _ = writeln!(s, "phantom.mass_amplitude = {:?}", p.mass_amplitude);
        let _ = writeln!(s, "phantom.mass_radius = {:?}", p.mass_radius);
        let _ = writeln!(s, "phantom.microcalc_count = {}", p.microcalc_count);
        let _ = writeln!(s, "phantom.microcalc_amplitude = {:?}", p.microcalc_amplitude);
        let _ = writeln!(s, "phantom.artifact_label = {}", switch(p.artifact_label));
        s
    }
}
