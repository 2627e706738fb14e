//! Simulation configuration, read from a single TOML file.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::assessment::ExamSchedule;
use crate::gateway::{ModelSettings, ProviderProfile};
use crate::sensing::ActivityLabels;
use crate::student::InitialStatus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaScale {
    pub min: f64,
    pub max: f64,
}

impl Default for EmaScale {
    fn default() -> Self {
        Self { min: 1.0, max: 5.0 }
    }
}

impl EmaScale {
    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmaScales {
    pub stress: EmaScale,
    pub sleep: EmaScale,
    pub social: EmaScale,
}

impl EmaScales {
    pub fn iter(&self) -> [(&'static str, EmaScale); 3] {
        [
            ("stress", self.stress),
            ("sleep", self.sleep),
            ("social", self.social),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockExamPolicy {
    #[default]
    Knowledge,
    AlwaysCorrect,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    /// Name of the live profile to use when `kind = "live"`.
    pub profile: Option<String>,
    pub mock_exam_policy: MockExamPolicy,
    pub profiles: Vec<ProviderProfile>,
}

impl ProviderSettings {
    pub fn active_profile(&self) -> Result<&ProviderProfile, EngineError> {
        let name = self
            .profile
            .as_deref()
            .ok_or_else(|| EngineError::Config("live provider selected without a profile name".into()))?;
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| EngineError::Config(format!("no provider profile named `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_weeks: u32,
    pub exam_weeks: Vec<u32>,
    /// Week of the final project; 0 runs no project.
    pub project_week: u32,
    pub seed: u64,
    pub ema_scales: EmaScales,
    pub initial_status: InitialStatus,
    pub model: ModelSettings,
    pub provider: ProviderSettings,
    /// Students simulated at once.
    pub max_concurrency: usize,
    /// Wall-clock timestamps in run metadata. Off keeps mock runs byte-identical.
    pub record_timestamps: bool,
    pub activity_labels: ActivityLabels,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_weeks: 10,
            exam_weeks: (2..=7).collect(),
            project_week: 10,
            seed: 42,
            ema_scales: EmaScales::default(),
            initial_status: InitialStatus::default(),
            model: ModelSettings::default(),
            provider: ProviderSettings::default(),
            max_concurrency: 4,
            record_timestamps: false,
            activity_labels: ActivityLabels::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, EngineError> {
        let mut cfg: SimConfig = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        cfg.validate()?;
        cfg.sync_model_id();
        Ok(cfg)
    }

    /// With a live provider selected, takes the model id from its profile so
    /// transcripts and run metadata name the model actually called.
    pub fn sync_model_id(&mut self) {
        if self.provider.kind == ProviderKind::Live {
            if let Ok(p) = self.provider.active_profile() {
                self.model.model_id = p.model_id.clone();
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.n_weeks < 1 {
            return bad("n_weeks must be at least 1".into());
        }
        if self.project_week > self.n_weeks {
            return bad(format!(
                "project_week {} outside 1..={} (0 disables the project)",
                self.project_week, self.n_weeks
            ));
        }
        if let Some(w) = self.exam_weeks.iter().find(|w| **w < 1 || **w > self.n_weeks) {
            return bad(format!("exam week {w} outside 1..={}", self.n_weeks));
        }
        if self.exam_weeks.iter().collect::<BTreeSet<_>>().len() != self.exam_weeks.len() {
            return bad("exam_weeks contains duplicates".into());
        }
        self.exam_schedule()?;
        for (name, s) in self.ema_scales.iter() {
            if !(s.min < s.max) {
                return bad(format!("ema scale for {name}: min must be below max"));
            }
        }
        crate::student::default_status(&self.initial_status)
            .map_err(|e| EngineError::Config(format!("initial_status: {e}")))?;
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be positive".into());
        }
        if self.provider.kind == ProviderKind::Live {
            self.provider.active_profile()?;
        }
        Ok(())
    }

    pub fn exam_schedule(&self) -> Result<ExamSchedule, EngineError> {
        ExamSchedule::new(&self.exam_weeks).map_err(|e| EngineError::Config(e.to_string()))
    }

    pub fn is_exam_week(&self, week: u32) -> bool {
        self.exam_weeks.contains(&week)
    }

    pub fn is_project_week(&self, week: u32) -> bool {
        week >= 1 && week == self.project_week
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = SimConfig::from_toml_str("n_weeks = 3\nexam_weeks = [2]\nproject_week = 3\n").unwrap();
        assert_eq!(cfg.seed, 42);
        let one = SimConfig::from_toml_str("n_weeks = 1\nexam_weeks = []\nproject_week = 0\n").unwrap();
        assert!(!one.is_project_week(1));
        assert_eq!(cfg.ema_scales.sleep, EmaScale { min: 1.0, max: 5.0 });
    }

    #[test]
    fn invalid_configs() {
        for text in [
            "n_weeks = 0",
            "project_week = 11",
            "exam_weeks = [0]",
            "exam_weeks = [2, 2]",
            "exam_weeks = [1, 2, 3, 4, 5, 6, 7]",
            "[ema_scales.stress]\nmin = 5.0\nmax = 1.0",
            "max_concurrency = 0",
            "[provider]\nkind = \"live\"\nprofile = \"nope\"",
            "[initial_status.overrides]\nmood = 3",
        ] {
            assert!(SimConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn live_profile_supplies_the_model_id() {
        let cfg = SimConfig::from_toml_str(
            "[provider]\nkind = \"live\"\nprofile = \"p\"\n\n[[provider.profiles]]\nname = \"p\"\n\
             style = \"openai\"\nendpoint = \"http://x/v1\"\nmodel_id = \"gpt-4o-mini\"\napi_key = \"${K}\"\n",
        )
        .unwrap();
        assert_eq!(cfg.model.model_id, "gpt-4o-mini");
    }

    #[test]
    fn hash_tracks_changes() {
        let a = SimConfig::default();
        let b = SimConfig { seed: 7, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
