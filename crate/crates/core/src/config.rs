//! Run configuration: tracker settings, interpolation, evaluation threshold
//! and class handling, resolved from defaults, an optional TOML file and
//! `key=value` overrides (in that order of precedence, lowest first).
//!
//! The file is flat; every key is also accepted as an override:
//!
//! ```toml
//! high_thresh = 0.6
//! low_thresh = 0.1
//! tau_a = 0.25
//! tau_eiou = 0.5
//! e_initial = 0.7
//! step = 0.1
//! t_total = 2
//! e_low = 0.7
//! e_unconfirmed = 0.5
//! max_lost = 60
//! new_track_thresh = 0.7
//! stage1_reject = 0.8
//! stage2_reject = 0.5
//! unconfirmed_reject = 0.7
//! ema_alpha = 0.9
//! emit_unconfirmed = true
//! max_gap = 20          # 0 disables interpolation
//! iou_threshold = 0.5
//! class_mode = "single" # or "per_class"
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EvalConfig;
use crate::postprocess::DEFAULT_MAX_GAP;
use crate::tracker::TrackerConfig;

/// Every key understood by [`RunConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "high_thresh",
    "low_thresh",
    "tau_a",
    "tau_eiou",
    "e_initial",
    "step",
    "t_total",
    "e_low",
    "e_unconfirmed",
    "max_lost",
    "new_track_thresh",
    "stage1_reject",
    "stage2_reject",
    "unconfirmed_reject",
    "ema_alpha",
    "emit_unconfirmed",
    "max_gap",
    "iou_threshold",
    "class_mode",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMode {
    /// Every detection goes to one tracker regardless of class.
    #[default]
    Single,
    /// One tracker per class, sharing a single id counter.
    PerClass,
}

impl FromStr for ClassMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(ClassMode::Single),
            "per_class" | "per-class" => Ok(ClassMode::PerClass),
            other => Err(format!("unknown class mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    /// Longest gap bridged by interpolation; 0 turns it off.
    pub max_gap: u32,
    pub eval: EvalConfig,
    pub class_mode: ClassMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tracker: TrackerConfig::default(),
            max_gap: DEFAULT_MAX_GAP,
            eval: EvalConfig::default(),
            class_mode: ClassMode::Single,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

impl RunConfig {
    /// Sets one key from its textual value. Range checks happen in
    /// [`RunConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.tracker;
        match key {
            "high_thresh" => t.high_thresh = parse(key, value)?,
            "low_thresh" => t.low_thresh = parse(key, value)?,
            "tau_a" => t.tau_a = parse(key, value)?,
            "tau_eiou" => t.tau_eiou = parse(key, value)?,
            "e_initial" => t.schedule.e_initial = parse(key, value)?,
            "step" => t.schedule.step = parse(key, value)?,
            "t_total" => t.schedule.t_total = parse(key, value)?,
            "e_low" => t.e_low = parse(key, value)?,
            "e_unconfirmed" => t.e_unconfirmed = parse(key, value)?,
            "max_lost" => t.max_lost = parse(key, value)?,
            "new_track_thresh" => t.new_track_thresh = parse(key, value)?,
            "stage1_reject" => t.stage1_reject = parse(key, value)?,
            "stage2_reject" => t.stage2_reject = parse(key, value)?,
            "unconfirmed_reject" => t.unconfirmed_reject = parse(key, value)?,
            "ema_alpha" => t.ema_alpha = parse(key, value)?,
            "emit_unconfirmed" => t.emit_unconfirmed = parse(key, value)?,
            "max_gap" => self.max_gap = parse(key, value)?,
            "iou_threshold" => self.eval.iou_threshold = parse(key, value)?,
            "class_mode" => self.class_mode = value.trim().parse()?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.tracker.problems();
        let thr = self.eval.iou_threshold;
        if !(thr > 0.0 && thr < 1.0) {
            out.push(format!("iou_threshold = {thr} must lie in (0, 1)"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    /// Applies a flat TOML document on top of the current values.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(vec![e.to_string()]))?;
        let mut problems = Vec::new();
        for (key, value) in &table {
            let text = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    problems.push(format!("{key}: unsupported value {other}"));
                    continue;
                }
            };
            if let Err(e) = self.set(key, &text) {
                problems.push(e);
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Resolves a run configuration: defaults, then the optional file, then the
/// overrides. The result is validated.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_toml(&text)?;
    }
    let problems: Vec<String> = overrides
        .iter()
        .filter_map(|(k, v)| cfg.set(k, v).err())
        .collect();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    cfg.validate()?;
    Ok(cfg)
}
