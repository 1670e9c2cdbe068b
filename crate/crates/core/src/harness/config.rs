use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::descriptor::{FeatureParams, DEFAULT_K_COEFF, DEFAULT_SLOTS, DEFAULT_TAU_REL};
use crate::error::{Error, Result};
use crate::lda::{Prior, DEFAULT_EPSILON_REL};
use crate::matcher::LdaReference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatcherKind {
    /// Point-count matching on fused descriptors.
    Direct,
    /// Fused descriptors projected by LDA, Euclidean nearest neighbour.
    #[default]
    HffdLda,
    /// LDA on single-pose frequency features, no fusion.
    LdaRawBaseline,
}

impl MatcherKind {
    pub fn name(self) -> &'static str {
        match self {
            MatcherKind::Direct => "direct",
            MatcherKind::HffdLda => "hffd_lda",
            MatcherKind::LdaRawBaseline => "lda_raw_baseline",
        }
    }
}

impl fmt::Display for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MatcherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" | "hffd" => Ok(MatcherKind::Direct),
            "hffd_lda" => Ok(MatcherKind::HffdLda),
            "lda_raw_baseline" | "lda" => Ok(MatcherKind::LdaRawBaseline),
            _ => Err(Error::Config(format!(
                "unknown matcher {s:?} (direct | hffd_lda | lda_raw_baseline)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" | "json-lines" | "json_lines" => Ok(ReportFormat::JsonLines),
            _ => Err(Error::Config(format!("unknown report format {s:?} (csv | jsonl)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_root: PathBuf,
    pub k_train: usize,
    pub k_coeff: usize,
    pub wavelet_levels: usize,
    pub n_p: usize,
    pub tau_rel: f64,
    /// Absolute point tolerance; `None` derives one per coefficient index
    /// from the gallery range.
    pub tau_m: Option<f64>,
    pub matcher: MatcherKind,
    pub m_requested: Option<usize>,
    pub epsilon_rel: f64,
    pub prior: Prior,
    pub lda_reference: LdaReference,
    /// Also enroll every training pose as a single-slot descriptor for the
    /// `hffd_lda` matcher, so the LDA sees probe-shaped samples.
    pub single_views: bool,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
    /// Reserved; splits are deterministic.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset_root: PathBuf::new(),
            k_train: 5,
            k_coeff: DEFAULT_K_COEFF,
            wavelet_levels: 1,
            n_p: DEFAULT_SLOTS,
            tau_rel: DEFAULT_TAU_REL,
            tau_m: None,
            matcher: MatcherKind::default(),
            m_requested: None,
            epsilon_rel: DEFAULT_EPSILON_REL,
            prior: Prior::OverN,
            lda_reference: LdaReference::Samples,
            single_views: true,
            output: None,
            format: ReportFormat::Csv,
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {value:?} for {key} (true | false)"))),
    }
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "auto" | "none" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

/// Every key accepted by [`ExperimentConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "dataset",
    "k_train",
    "k_coeff",
    "wavelet_levels",
    "n_p",
    "tau_rel",
    "tau_m",
    "matcher",
    "m",
    "epsilon_rel",
    "prior",
    "lda_reference",
    "single_views",
    "output",
    "format",
    "seed",
];

impl ExperimentConfig {
    pub fn feature_params(&self) -> FeatureParams {
        FeatureParams {
            k_coeff: self.k_coeff,
            wavelet_levels: self.wavelet_levels,
        }
    }

    /// Sets one field by key. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "dataset" | "dataset_root" => self.dataset_root = PathBuf::from(value),
            "k_train" => self.k_train = parse(&key, value)?,
            "k_coeff" => self.k_coeff = parse(&key, value)?,
            "wavelet_levels" => self.wavelet_levels = parse(&key, value)?,
            "n_p" => self.n_p = parse(&key, value)?,
            "tau_rel" => self.tau_rel = parse(&key, value)?,
            "tau_m" => self.tau_m = optional(&key, value)?,
            "matcher" => self.matcher = value.parse()?,
            "m" | "m_requested" => self.m_requested = optional(&key, value)?,
            "epsilon_rel" => self.epsilon_rel = parse(&key, value)?,
            "prior" => self.prior = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "lda_reference" => {
                self.lda_reference = match value {
                    "samples" => LdaReference::Samples,
                    "class_means" | "means" => LdaReference::ClassMeans,
                    _ => {
                        return Err(Error::Config(format!(
                            "invalid lda_reference {value:?} (samples | class_means)"
                        )))
                    }
                }
            }
            "single_views" => self.single_views = parse_bool(&key, value)?,
            "output" | "out" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "seed" => self.seed = parse(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_config(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k_train == 0 {
            return bad("k_train must be at least 1".into());
        }
        if self.n_p == 0 {
            return bad("n_p must be at least 1".into());
        }
        if self.k_train > self.n_p && self.matcher != MatcherKind::LdaRawBaseline {
            return bad(format!(
                "k_train = {} training poses do not fit in n_p = {} descriptor slots",
                self.k_train, self.n_p
            ));
        }
        if self.k_coeff == 0 {
            return bad("k_coeff must be at least 1".into());
        }
        if self.wavelet_levels == 0 {
            return bad("wavelet_levels must be at least 1".into());
        }
        if self.tau_rel.is_nan() || self.tau_rel < 0.0 {
            return bad(format!("tau_rel must be >= 0, got {}", self.tau_rel));
        }
        if let Some(t) = self.tau_m {
            if t.is_nan() || t < 0.0 {
                return bad(format!("tau_m must be >= 0, got {t}"));
            }
        }
        if !(self.epsilon_rel.is_finite() && self.epsilon_rel >= 0.0) {
            return bad(format!("epsilon_rel must be >= 0, got {}", self.epsilon_rel));
        }
        if self.m_requested == Some(0) {
            return bad("m must be positive".into());
        }
        Ok(())
    }

    /// Field echo in a fixed order, for reports.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".to_string());
        vec![
            ("dataset", self.dataset_root.display().to_string()),
            ("k_train", self.k_train.to_string()),
            ("k_coeff", self.k_coeff.to_string()),
            ("wavelet_levels", self.wavelet_levels.to_string()),
            ("n_p", self.n_p.to_string()),
            ("tau_rel", self.tau_rel.to_string()),
            ("tau_m", opt(self.tau_m.map(|t| t.to_string()))),
            ("matcher", self.matcher.name().to_string()),
            ("m", opt(self.m_requested.map(|m| m.to_string()))),
            ("epsilon_rel", self.epsilon_rel.to_string()),
            ("prior", self.prior.name().to_string()),
            (
                "lda_reference",
                match self.lda_reference {
                    LdaReference::Samples => "samples",
                    LdaReference::ClassMeans => "class_means",
                }
                .to_string(),
            ),
            ("single_views", self.single_views.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got {line:?}", lineno + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}
