use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use subprobe::run::RunManifest;

use crate::config::Failure;

/// Artifacts held in memory until the run has fully succeeded.
pub struct Staged {
    manifest: RunManifest,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn new<T: Serialize>(workflow: &str, config: &T) -> Result<Self, Failure> {
        Ok(Staged {
            manifest: RunManifest::new(workflow, config)?,
            files: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), Failure> {
        self.manifest.add_input(path)?;
        Ok(())
    }

    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.manifest.add_artifact(&path, &bytes);
        self.files.push((path, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.add(path, text.into_bytes());
        Ok(())
    }

    /// Write every artifact and then the manifest. Files go to temporary
    /// names first and are renamed only once all of them are on disk.
    pub fn commit(mut self, manifest_path: PathBuf) -> Result<(), Failure> {
        let manifest = self.manifest.to_json()?;
        self.files.push((manifest_path, manifest.into_bytes()));
        let mut written: Vec<(PathBuf, PathBuf)> = Vec::new();
        let result = (|| -> Result<(), Failure> {
            for (path, bytes) in &self.files {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                let mut tmp = path.clone().into_os_string();
                tmp.push(".partial");
                let tmp = PathBuf::from(tmp);
                fs::write(&tmp, bytes)?;
                written.push((tmp, path.clone()));
            }
            Ok(())
        })();
        if let Err(e) = result {
            for (tmp, _) in &written {
                let _ = fs::remove_file(tmp);
            }
            return Err(e);
        }
        for (tmp, path) in written {
            fs::rename(tmp, path)?;
        }
        Ok(())
    }
}

/// `results.json` gets `results.manifest.json` next to it.
pub fn manifest_beside(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}
