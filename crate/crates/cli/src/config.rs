use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use irrobust_core::ParamSchedule;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1234;
pub const SCHEDULE_ENV: &str = "ROBUST_OD_SCHEDULE";

/// Settings that may come from a TOML file; flags override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub schedule: Option<PathBuf>,
    pub threads: Option<usize>,
    pub log_level: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| irrobust_core::Error::Domain(format!("config {}: {e}", path.display())).into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalConfig {
    pub schedule: Option<PathBuf>,
    pub threads: Option<usize>,
    pub log_level: String,
    pub seed: u64,
}

impl GlobalConfig {
    /// Flags, then the config file, then the environment (schedule only), then defaults.
    pub fn resolve(
        flag_schedule: Option<PathBuf>,
        flag_threads: Option<usize>,
        flag_log: Option<String>,
        flag_seed: Option<u64>,
        file: FileConfig,
    ) -> Result<Self> {
        let schedule = flag_schedule
            .or(file.schedule)
            .or_else(|| std::env::var_os(SCHEDULE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let threads = flag_threads.or(file.threads);
        if threads == Some(0) {
            bail!(irrobust_core::Error::Domain("thread count must be at least 1".into()));
        }
        Ok(Self {
            schedule,
            threads,
            log_level: flag_log.or(file.log_level).unwrap_or_else(|| "info".into()),
            seed: flag_seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        })
    }

    pub fn load_schedule(&self) -> Result<ParamSchedule> {
        match &self.schedule {
            Some(p) => Ok(ParamSchedule::from_file(p)?),
            None => Ok(ParamSchedule::default()),
        }
    }
}
