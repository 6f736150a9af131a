//! Run configuration: key = value files, flag overrides, and the thread-count variable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_BIN_WIDTH;
use crate::blocked::DEFAULT_TILE;
use crate::circuit::RuleSet;
use crate::dense::DEFAULT_QUBIT_CAP;
use crate::error::{Error, Result};
use crate::path::SimParams;

pub const THREADS_ENV: &str = "SFSIM_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub qubit_cap: usize,
    pub n_local: usize,
    pub workers: usize,
    pub node_memory_exponent: u32,
    pub seed: u64,
    pub amp_tol: f64,
    pub norm_tol: f64,
    pub rules: RuleSet,
    pub bin_width: f64,
    pub tile: usize,
    /// Worker threads for the rayon pool; 0 leaves the pool default.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            qubit_cap: default_qubit_cap(),
            n_local: 10,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            node_memory_exponent: 28,
            seed: 0,
            amp_tol: 1e-10,
            norm_tol: 1e-9,
            rules: RuleSet::PaperSimple,
            bin_width: DEFAULT_BIN_WIDTH,
            tile: DEFAULT_TILE,
            threads: 0,
        }
    }
}

/// Bytes reported as MemAvailable, if the platform exposes it.
pub fn available_memory() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn default_qubit_cap() -> usize {
    match available_memory() {
        Some(bytes) => {
            let fit = (63 - (bytes / 16).max(1).leading_zeros()) as usize;
            fit.min(DEFAULT_QUBIT_CAP)
        }
        None => DEFAULT_QUBIT_CAP,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value '{v}' for {k}")))
        }
        match key {
            "qubit_cap" => self.qubit_cap = num(key, value)?,
            "n_local" => self.n_local = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "node_memory_exponent" => self.node_memory_exponent = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "amp_tol" => self.amp_tol = num(key, value)?,
            "norm_tol" => self.norm_tol = num(key, value)?,
            "rules" => self.rules = value.parse()?,
            "bin_width" => self.bin_width = num(key, value)?,
            "tile" => self.tile = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides; later ones win.
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(self)
    }

    pub fn with_env(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            self.threads = v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}='{v}' is not a count")))?;
        }
        Ok(self)
    }

    /// Fails when a vector at the cap would not fit in available memory.
    pub fn check_memory(&self) -> Result<()> {
        if self.qubit_cap >= 60 {
            return Err(Error::Config(format!("qubit cap {} is unreasonable", self.qubit_cap)));
        }
        let need = 16u64 << self.qubit_cap;
        match available_memory() {
            Some(have) if need > have => Err(Error::Config(format!(
                "qubit cap {} needs {need} bytes per vector, {have} available",
                self.qubit_cap
            ))),
            _ => Ok(()),
        }
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            qubit_cap: self.qubit_cap,
            n_local: self.n_local,
            tile: self.tile,
            workers: self.workers,
            node_memory_exponent: self.node_memory_exponent,
        }
    }
}
