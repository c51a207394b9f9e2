//! Tracker configuration and its flat `key = value` file format.
//!
//! ```text
//! # defaults shown
//! lambda = 0.0001
//! xi = 0.4
//! theta = 0.7
//! n_max = 3
//! a = 1.02
//! s = 5
//! tau = 0.05
//! eta_base = 0.01
//! history_window = 5
//! patch_size = 224
//! search_factor = 2
//! extractors = gray-cells:cell=4; grad-hist:bins=9,cell=4
//! redetect_enabled = true
//! adaptive_update_enabled = true
//! ```
//!
//! Every field has exactly one key; unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::adaptive::ScoreHistory;
use crate::error::{Error, Result};
use crate::features::{ExtractorKind, ExtractorSpec, DEFAULT_BINS, DEFAULT_CELL};
use crate::redetection::RedetectConfig;
use crate::scale::ScaleConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub lambda: f64,
    pub xi: f64,
    pub theta: f64,
    pub n_max: usize,
    pub a: f64,
    pub s: usize,
    pub tau: f64,
    pub eta_base: f64,
    pub history_window: usize,
    pub patch_size: usize,
    pub search_factor: f64,
    /// One extractor per feature level.
    pub extractors: Vec<ExtractorSpec>,
    pub redetect_enabled: bool,
    pub adaptive_update_enabled: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            lambda: 1e-4,
            xi: 0.4,
            theta: 0.7,
            n_max: 3,
            a: 1.02,
            s: 5,
            tau: 0.05,
            eta_base: 0.01,
            history_window: 5,
            patch_size: 224,
            search_factor: 2.0,
            extractors: vec![
                ExtractorSpec::gray_cells(DEFAULT_CELL),
                ExtractorSpec::grad_hist(DEFAULT_CELL, DEFAULT_BINS),
            ],
            redetect_enabled: true,
            adaptive_update_enabled: true,
        }
    }
}

const KEYS: &[&str] = &[
    "lambda",
    "xi",
    "theta",
    "n_max",
    "a",
    "s",
    "tau",
    "eta_base",
    "history_window",
    "patch_size",
    "search_factor",
    "extractors",
    "redetect_enabled",
    "adaptive_update_enabled",
];

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Format(format!("line {line}: invalid boolean '{value}' for {key}"))),
    }
}

impl TrackerConfig {
    pub fn redetect(&self) -> RedetectConfig {
        RedetectConfig {
            xi: self.xi,
            theta: self.theta,
            n_max: self.n_max,
            enabled: self.redetect_enabled,
        }
    }

    pub fn scale(&self) -> ScaleConfig {
        ScaleConfig {
            a: self.a,
            s: self.s,
            current_scale: 1.0,
        }
    }

    pub fn history(&self) -> Result<ScoreHistory> {
        ScoreHistory::new(self.history_window, self.tau, self.eta_base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        self.redetect().validate()?;
        self.scale().validate()?;
        self.history()?;
        if self.patch_size == 0 {
            return Err(Error::invalid("patch_size must be positive"));
        }
        if !(self.search_factor >= 1.0) || !self.search_factor.is_finite() {
            return Err(Error::invalid(format!(
                "search_factor must be at least 1, got {}",
                self.search_factor
            )));
        }
        if self.extractors.is_empty() {
            return Err(Error::invalid("at least one extractor is required"));
        }
        for e in &self.extractors {
            e.validate()?;
        }
        Ok(())
    }

    /// Point every deep-client extractor at `addr`.
    pub fn override_service_addr(&mut self, addr: &str) {
        for e in &mut self.extractors {
            if e.kind == ExtractorKind::DeepClient {
                e.params.insert("addr".to_string(), addr.to_string());
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrackerConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {line}: expected 'key = value'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Format(format!("line {line}: unknown key '{key}'")));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Format(format!("line {line}: duplicate key '{key}'")));
            }
            match key {
                "lambda" => cfg.lambda = parse_value(key, value, line)?,
                "xi" => cfg.xi = parse_value(key, value, line)?,
                "theta" => cfg.theta = parse_value(key, value, line)?,
                "n_max" => cfg.n_max = parse_value(key, value, line)?,
                "a" => cfg.a = parse_value(key, value, line)?,
                "s" => cfg.s = parse_value(key, value, line)?,
                "tau" => cfg.tau = parse_value(key, value, line)?,
                "eta_base" => cfg.eta_base = parse_value(key, value, line)?,
                "history_window" => cfg.history_window = parse_value(key, value, line)?,
                "patch_size" => cfg.patch_size = parse_value(key, value, line)?,
                "search_factor" => cfg.search_factor = parse_value(key, value, line)?,
                "extractors" => {
                    cfg.extractors = value
                        .split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().map_err(|e| Error::Format(format!("line {line}: {e}"))))
                        .collect::<Result<_>>()?;
                }
                "redetect_enabled" => cfg.redetect_enabled = parse_bool(key, value, line)?,
                "adaptive_update_enabled" => cfg.adaptive_update_enabled = parse_bool(key, value, line)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrackerConfig::parse(&text)
    }

    /// Render in the file format; `parse(to_text())` yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lambda = {:?}", self.lambda);
        let _ = writeln!(out, "xi = {:?}", self.xi);
        let _ = writeln!(out, "theta = {:?}", self.theta);
        let _ = writeln!(out, "n_max = {}", self.n_max);
        let _ = writeln!(out, "a = {:?}", self.a);
        let _ = writeln!(out, "s = {}", self.s);
        let _ = writeln!(out, "tau = {:?}", self.tau);
        let _ = writeln!(out, "eta_base = {:?}", self.eta_base);
        let _ = writeln!(out, "history_window = {}", self.history_window);
        let _ = writeln!(out, "patch_size = {}", self.patch_size);
        let _ = writeln!(out, "search_factor = {:?}", self.search_factor);
        let specs: Vec<String> = self.extractors.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(out, "extractors = {}", specs.join("; "));
        let _ = writeln!(out, "redetect_enabled = {}", self.redetect_enabled);
        let _ = writeln!(out, "adaptive_update_enabled = {}", self.adaptive_update_enabled);
        out
    }
}
