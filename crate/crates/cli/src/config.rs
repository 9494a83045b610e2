//! Experiment configuration: one TOML or JSON file with optional sections,
//! overridden by command-line flags.

use std::path::Path;

use jpa_core::affinity::TrainConfig;
use jpa_core::eval::EvalConfig;
use jpa_core::pipeline::SolveConfig;
use jpa_core::synth::SynthConfig;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const DEFAULT_PRESET: &str = "occluded";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// `preset` plus any `SynthConfig` fields to override.
    pub synth: Map<String, Value>,
    pub train: TrainConfig,
    pub solve: SolveConfig,
    pub eval: EvalConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }

    /// The preset named by `preset` (flag first, then file), with the file's
    /// field overrides applied on top.
    pub fn synth_config(&self, preset: Option<&str>) -> Result<SynthConfig, CliError> {
        let mut fields = self.synth.clone();
        let file_preset = match fields.remove("preset") {
            Some(Value::String(s)) => Some(s),
            Some(other) => return Err(CliError::usage(format!("synth.preset must be a string, got {other}"))),
            None => None,
        };
        let name = preset
            .map(str::to_string)
            .or(file_preset)
            .unwrap_or_else(|| DEFAULT_PRESET.to_string());
        let base = SynthConfig::preset(&name).map_err(CliError::from)?;
        let Value::Object(mut merged) = serde_json::to_value(&base).expect("config serializes") else {
            unreachable!()
        };
        for (k, v) in fields {
            if !merged.contains_key(&k) {
                return Err(CliError::usage(format!("unknown synth field {k:?}")));
            }
            merged.insert(k, v);
        }
        let cfg: SynthConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::usage(format!("invalid synth config: {e}")))?;
        cfg.validate().map_err(CliError::from)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn toml_sections_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "c.toml",
            "[synth]\npreset = \"crowded\"\nsigma = 4.0\n\n[solve]\ntau = 0.3\n\n[train]\nmax_per_class = 50\n",
        );
        let c = FileConfig::load(&p).unwrap();
        let s = c.synth_config(None).unwrap();
        assert_eq!(s.sigma, 4.0);
        assert_eq!(s.persons, SynthConfig::preset("crowded").unwrap().persons);
        assert_eq!(c.solve.tau, 0.3);
        assert_eq!(c.train.max_per_class, 50);
        // the flag wins over the file
        assert_eq!(c.synth_config(Some("clean")).unwrap().persons, (1, 1));
    }

    #[test]
    fn json_config_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.json", r#"{"solve": {"mode": "argmax"}}"#);
        let c = FileConfig::load(&p).unwrap();
        assert_eq!(c.solve.mode, jpa_core::pipeline::Mode::Argmax);
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.toml", "[synth]\nwobble = 3\n");
        let c = FileConfig::load(&p).unwrap();
        assert_eq!(c.synth_config(None).unwrap_err().code, 2);
        let p = write(dir.path(), "d.toml", "[nonsense]\n");
        assert_eq!(FileConfig::load(&p).unwrap_err().code, 2);
        assert_eq!(FileConfig::default().synth_config(Some("busy")).unwrap_err().code, 2);
    }
}
