//! Layered settings: built-in defaults, then a TOML file, then `CADENCE_*`
//! environment variables. Request bodies override per call on top.

use std::path::{Path, PathBuf};

use cadence_core::dsp::AnalysisConfig;
use cadence_core::labeler::ThresholdConfig;
use cadence_core::recommend::{IndexConfig, RecommendParams};
use cadence_core::Execution;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {name}: cannot parse `{value}`")]
    Env { name: String, value: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Corpus JSONL file.
    pub corpus: Option<PathBuf>,
    /// Index file; defaults to `<corpus>.index.json`.
    pub index: Option<PathBuf>,
    pub bind: String,
    pub admin_token: Option<String>,
    pub max_upload_bytes: usize,
    pub analysis_ttl_secs: u64,
    pub thresholds: ThresholdConfig,
    pub analysis: AnalysisConfig,
    pub search: IndexConfig,
    /// Defaults for `/recommend` and `cadence recommend`. Labeling
    /// thresholds come from `thresholds`.
    pub recommend: RecommendParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            corpus: None,
            index: None,
            bind: "127.0.0.1:8080".into(),
            admin_token: None,
            max_upload_bytes: 50 * 1024 * 1024,
            analysis_ttl_secs: 3600,
            thresholds: ThresholdConfig::default(),
            analysis: AnalysisConfig::default(),
            search: IndexConfig::default(),
            recommend: RecommendParams::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        name: name.to_string(),
        value: value.to_string(),
    })
}

impl Config {
    /// Defaults, then the file (if any), then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        macro_rules! set {
            ($name:literal, $field:expr) => {
                if let Some(v) = var($name) {
                    $field = parse_env($name, &v)?;
                }
            };
        }
        if let Some(v) = var("CADENCE_CORPUS") {
            self.corpus = Some(v.into());
        }
        if let Some(v) = var("CADENCE_INDEX") {
            self.index = Some(v.into());
        }
        if let Some(v) = var("CADENCE_ADMIN_TOKEN") {
            self.admin_token = (!v.is_empty()).then_some(v);
        }
        set!("CADENCE_BIND", self.bind);
        set!("CADENCE_MAX_UPLOAD_BYTES", self.max_upload_bytes);
        set!("CADENCE_ANALYSIS_TTL_SECS", self.analysis_ttl_secs);
        set!("CADENCE_K", self.recommend.k);
        set!("CADENCE_K_TABLE", self.recommend.k_table);
        set!("CADENCE_MIN_SUPPORT", self.recommend.min_support);
        set!("CADENCE_MAX_N", self.recommend.max_n);
        set!("CADENCE_DIM", self.search.dim);
        set!("CADENCE_NUM_TREES", self.search.forest.num_trees);
        set!("CADENCE_LEAF_CAPACITY", self.search.forest.leaf_capacity);
        set!("CADENCE_SEED", self.search.forest.seed);
        if let Some(v) = var("CADENCE_EXECUTION") {
            let exec: Execution = serde_json::from_value(Value::String(v.trim().to_lowercase()))
                .map_err(|_| ConfigError::Env {
                    name: "CADENCE_EXECUTION".into(),
                    value: v.clone(),
                })?;
            self.set_execution(exec);
        }
        Ok(())
    }

    pub fn set_execution(&mut self, exec: Execution) {
        self.analysis.execution = exec;
        self.search.forest.execution = exec;
    }

    pub fn execution(&self) -> Execution {
        self.analysis.execution
    }

    pub fn index_path(&self) -> Option<PathBuf> {
        self.index.clone().or_else(|| {
            self.corpus
                .as_deref()
                .map(cadence_core::recommend::default_index_path)
        })
    }

    pub fn recommend_params(&self) -> RecommendParams {
        RecommendParams {
            thresholds: self.thresholds.clone(),
            ..self.recommend.clone()
        }
    }
}

/// Deep-merges `overlay` into `base`: objects merge key by key, anything
/// else replaces.
pub fn merge_json(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies a partial JSON object on top of `base`.
pub fn overlay<T>(base: &T, partial: Value) -> Result<T, serde_json::Error>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut v = serde_json::to_value(base)?;
    merge_json(&mut v, partial);
    serde_json::from_value(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::collections::HashMap;

    #[test]
    fn file_then_env_layering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "corpus = \"talks.jsonl\"\n[recommend]\nk = 10\nmin_support = 0.2\n[thresholds]\npitch_ratio = 1.3\n",
        )
        .unwrap();
        let mut cfg = Config::from_file(&path).unwrap();
        assert_eq!(cfg.recommend.k, 10);
        assert_eq!(cfg.recommend.k_table, 20);
        assert_eq!(cfg.thresholds.pitch_ratio, 1.3);
        assert_eq!(
            cfg.index_path().unwrap(),
            PathBuf::from("talks.jsonl.index.json")
        );
        let env: HashMap<&str, &str> =
            [("CADENCE_K", "7"), ("CADENCE_EXECUTION", "Sequential")].into();
        cfg.apply_env(|k| env.get(k).map(|s| s.to_string()))
            .unwrap();
        assert_eq!(cfg.recommend.k, 7);
        assert_eq!(cfg.recommend.min_support, 0.2);
        assert_eq!(cfg.execution(), Execution::Sequential);
        assert_eq!(cfg.recommend_params().thresholds.pitch_ratio, 1.3);
        let bad = cfg.apply_env(|k| (k == "CADENCE_K").then(|| "many".to_string()));
        assert!(matches!(bad, Err(ConfigError::Env { .. })));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(matches!(
            Config::from_file(&path),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn request_overlay_is_deep() {
        let base = Config::default().recommend_params();
        let p: RecommendParams =
            overlay(&base, json!({"k": 3, "thresholds": {"pitch_ratio": 1.5}})).unwrap();
        assert_eq!(p.k, 3);
        assert_eq!(p.thresholds.pitch_ratio, 1.5);
        assert_eq!(
            p.thresholds.vol_louder_ratio,
            base.thresholds.vol_louder_ratio
        );
        assert_eq!(p.min_support, base.min_support);
    }
}
