//! Scene directories and their manifests.

use std::path::{Path, PathBuf};

use jpa_core::model::Scene;
use jpa_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: &str = "jpa-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub count: usize,
    pub config_hash: String,
    pub config: SynthConfig,
    pub scenes: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &SynthConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

pub fn scene_file_name(index: usize) -> String {
    format!("scene_{index:05}.json")
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))
}

/// Writes the scenes (without maps) and the manifest into `dir`.
pub fn write_scene_dir(dir: &Path, cfg: &SynthConfig, scenes: &[Scene]) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    let mut entries = Vec::with_capacity(scenes.len());
    for (i, s) in scenes.iter().enumerate() {
        let name = scene_file_name(i);
        let text = s.without_maps().to_json()?;
        write_file(&dir.join(&name), text.as_bytes())?;
        entries.push(ManifestEntry {
            file: name,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION.to_string(),
        count: scenes.len(),
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        scenes: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

fn scene_paths(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::usage(format!(
            "scene directory {} does not exist",
            dir.display()
        )));
    }
    let rd = std::fs::read_dir(dir).map_err(|e| CliError::io(&format!("cannot list {}", dir.display()), e))?;
    let mut paths = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| CliError::io("cannot list directory", e))?.path();
        let is_scene = p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n != MANIFEST);
        if is_scene {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!("no scene files in {}", dir.display())));
    }
    Ok(paths)
}

/// All scenes of a directory, sorted by file name; ids are the file stems.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<(String, Scene)>, CliError> {
    scene_paths(dir)?
        .into_iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let scene = Scene::load(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            Ok((id, scene))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use jpa_core::synth::generate_scenes;

    #[test]
    fn round_trip_through_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::preset("crowded").unwrap();
        let scenes = generate_scenes(&cfg, 3).unwrap();
        let m = write_scene_dir(dir.path(), &cfg, &scenes).unwrap();
        assert_eq!(m.scenes.len(), 3);
        let loaded = load_scene_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded[2].0, "scene_00002");
        assert_eq!(loaded[1].1, scenes[1].without_maps());
    }

    #[test]
    fn missing_and_empty_directories() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(load_scene_dir(&dir.path().join("nope")).unwrap_err().code, 2);
        assert_eq!(load_scene_dir(dir.path()).unwrap_err().code, 3);
    }
}
