use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use projmatch::loss::LossConfig;
use projmatch::optimize::{run_with, OptimConfig, RunOptions};
use projmatch::sampling::{derive_seed, SamplerConfig};
use projmatch::{Camera, OptimTrace, PointCloud, Silhouette};
use serde::{Deserialize, Serialize};

/// Seed streams fanned out from the run seed.
const SAMPLER_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RECON_FILE: &str = "recon.xyz";
pub const TRACE_FILE: &str = "trace.csv";

/// Everything that determines a reconstruction besides the scene files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub points: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub loss: LossConfig,
    pub optim: OptimConfig,
}

impl RunSettings {
    /// Applies `seed` to every component, each on its own stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sampler.seed = derive_seed(seed, SAMPLER_STREAM);
        self.optim.seed = derive_seed(seed, INIT_STREAM);
        self
    }

    pub fn run(&self, pairs: &[(Camera, Silhouette)], gt: Option<&PointCloud>) -> Result<(PointCloud, OptimTrace)> {
        let opts = RunOptions { initial: None, reference: gt };
        Ok(run_with(pairs, self.points, &self.sampler, &self.loss, &self.optim, opts)?)
    }
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            points: 2048,
            seed: 0,
            sampler: SamplerConfig::default(),
            loss: LossConfig::default(),
            optim: OptimConfig::default(),
        }
        .with_seed(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub recon: PathBuf,
    pub trace: PathBuf,
}

impl Outputs {
    pub fn in_dir(dir: &Path) -> Self {
        Self { recon: dir.join(RECON_FILE), trace: dir.join(TRACE_FILE) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scene: PathBuf,
    pub run: RunSettings,
    pub outputs: Outputs,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let m = RunManifest {
            scene: "scene".into(),
            run: RunSettings::default().with_seed(9),
            outputs: Outputs::in_dir(Path::new("out")),
        };
        let back: RunManifest = toml::from_str(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn seed_streams_differ() {
        let s = RunSettings::default().with_seed(3);
        assert_eq!(s.seed, 3);
        assert_ne!(s.sampler.seed, s.optim.seed);
        assert_eq!(s, RunSettings::default().with_seed(3));
    }
}
