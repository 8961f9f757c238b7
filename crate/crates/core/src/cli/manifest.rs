use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use mmtwin::{Error, Result};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Reproduction record written next to every run's outputs. Wall-clock
/// timings go to a separate file so the manifest itself is reproducible.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    pub flags: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub struct Recorder {
    pub manifest: RunManifest,
    out_dir: PathBuf,
    started: Instant,
    stages: Vec<(String, Duration)>,
    stage_start: Instant,
}

impl Recorder {
    pub fn new(command: &str, seed: u64, threads: Option<usize>, config: serde_json::Value, out_dir: &Path) -> Self {
        let now = Instant::now();
        Self {
            manifest: RunManifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION"),
                seed,
                threads,
                config,
                flags: BTreeMap::new(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
            out_dir: out_dir.to_path_buf(),
            started: now,
            stages: Vec::new(),
            stage_start: now,
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.manifest.flags.insert(name.into(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Path of an output file inside the run directory.
    pub fn output_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn output(&mut self, name: &str) -> Result<()> {
        let digest = sha256_file(&self.out_dir.join(name))?;
        self.manifest.outputs.insert(name.into(), digest);
        Ok(())
    }

    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push((name.into(), now - self.stage_start));
        self.stage_start = now;
    }

    pub fn finish(mut self) -> Result<()> {
        self.stage("finish");
        let write = |name: &str, value: &dyn erased::Json| -> Result<()> {
            let path = self.out_dir.join(name);
            let mut text = value.to_json();
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
        };
        write("manifest.json", &self.manifest)?;
        let timings: BTreeMap<String, f64> = self
            .stages
            .iter()
            .map(|(k, d)| (k.clone(), d.as_secs_f64()))
            .chain(std::iter::once(("total".to_string(), self.started.elapsed().as_secs_f64())))
            .collect();
        write("timings.json", &timings)
    }
}

mod erased {
    pub trait Json {
        fn to_json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn to_json(&self) -> String {
            serde_json::to_string_pretty(self).expect("serialisable")
        }
    }
}
