//! Pipeline configuration: desk defaults, a TOML file on top, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chunkwise::chunking::SearchConfig;
use chunkwise::corpus::{TaskConfig, TaskKind};
use chunkwise::store::sha256_hex;
use chunkwise::train::{Regime, RunConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding one subdirectory per dataset configuration.
    pub root: PathBuf,
    pub train_size: usize,
    pub dev_size: usize,
    pub task: TaskConfig,
    pub run: RunConfig,
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub regime: Option<Regime>,
    pub eta: Option<f64>,
    pub chunks: Option<usize>,
}

impl PipelineConfig {
    pub fn desk(kind: TaskKind, seed: u64) -> Self {
        PipelineConfig {
            root: PathBuf::from("runs"),
            train_size: 2000,
            dev_size: 200,
            task: TaskConfig::new(kind, seed),
            run: RunConfig::desk(Regime::Baseline, kind, seed),
        }
    }

    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let file: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        let kind = match file.get("task").and_then(|t| t.get("task_kind")).and_then(|k| k.as_str()) {
            Some(k) => k.parse::<TaskKind>()?,
            None => TaskKind::ObjectSwap,
        };
        let seed = o
            .seed
            .or_else(|| file.get("task").and_then(|t| t.get("seed")).and_then(|s| s.as_integer()).map(|s| s as u64))
            .unwrap_or(0);
        let mut base = toml::Table::try_from(Self::desk(kind, seed))?;
        if let Some(r) = file.get("run").and_then(|r| r.get("regime")).and_then(|r| r.as_str()) {
            let regime: Regime = r.parse()?;
            let run = toml::Table::try_from(RunConfig::desk(regime, kind, seed))?;
            base.insert("run".into(), toml::Value::Table(run));
        }
        merge(&mut base, file);
        let mut cfg: PipelineConfig = toml::Value::Table(base).try_into().context("invalid configuration")?;
        cfg.apply(o);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.task.seed = seed;
            self.run.train.seed = seed;
        }
        if let Some(c) = o.chunks {
            self.run.chunks = c;
        }
        if let Some(r) = o.regime {
            self.run.regime = r;
        }
        let needs_search = matches!(self.run.regime, Regime::CwtSbc | Regime::Stt);
        match (&mut self.run.search, needs_search) {
            (None, true) => self.run.search = Some(SearchConfig::new(self.run.chunks)),
            (Some(_), false) => self.run.search = None,
            _ => {}
        }
        if let Some(s) = self.run.search.as_mut() {
            s.chunks = self.run.chunks;
            if let Some(eta) = o.eta {
                s.eta = eta;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.run.validate()?;
        if self.train_size == 0 || self.dev_size == 0 {
            bail!("train_size and dev_size must be positive");
        }
        Ok(())
    }

    /// Hash of everything that determines the datasets.
    pub fn data_hash(&self) -> String {
        let key = serde_json::json!({
            "task": self.task,
            "train_size": self.train_size,
            "dev_size": self.dev_size,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    /// Hash of the whole resolved configuration.
    pub fn hash(&self) -> String {
        sha256_hex(toml::to_string(self).expect("config serializes").as_bytes())
    }

    /// Directory of the datasets and everything derived from them.
    pub fn data_dir(&self, out: Option<&Path>) -> PathBuf {
        match out {
            Some(p) => p.to_path_buf(),
            None => self.root.join(format!("run-{}", &self.data_hash()[..12])),
        }
    }

    /// Subdirectory of one training run.
    pub fn run_dir_name(run: &RunConfig) -> String {
        format!("{}-{}", run.regime, &run.hash()[..10])
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
