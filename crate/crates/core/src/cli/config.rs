use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flows::FlowFamily;
use crate::kernels::{hmc_kernel, mala_kernel, rwmh_kernel, InvolutiveKernel};
use crate::reference::AdviConfig;
use crate::targets::{self, Target};

/// One experiment, read from a TOML file. Every table is optional; empty
/// lists fall back to the defaults of the subcommand that reads them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub targets: Vec<String>,
    /// Master seed; run `r` uses `seed + r` unless `seeds` is given.
    pub seed: u64,
    pub replicates: Option<usize>,
    pub seeds: Vec<u64>,
    /// CSV destination; stdout when absent.
    pub output: Option<PathBuf>,
    pub kernel: Vec<KernelConfig>,
    pub flow: FlowConfig,
    pub reference: ReferenceConfig,
    pub metrics: MetricsConfig,
    pub grid: GridConfig,
    pub stability: StabilityConfig,
    pub sweep: SweepConfig,
    pub diagnostics: DiagnosticsConfig,
    pub tune: TuneConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub name: String,
    pub eps: f64,
    #[serde(default = "default_leapfrog")]
    pub leapfrog: usize,
    /// `false` drops the accept/reject step (inversion curves only).
    #[serde(default = "yes")]
    pub corrected: bool,
}

fn default_leapfrog() -> usize {
    50
}

fn yes() -> bool {
    true
}

impl KernelConfig {
    pub fn rwmh(eps: f64) -> Self {
        KernelConfig { name: "rwmh".into(), eps, leapfrog: default_leapfrog(), corrected: true }
    }

    pub fn mala(eps: f64) -> Self {
        KernelConfig { name: "mala".into(), eps, leapfrog: default_leapfrog(), corrected: true }
    }

    pub fn hmc(eps: f64, leapfrog: usize) -> Self {
        KernelConfig { name: "hmc".into(), eps, leapfrog, corrected: true }
    }

    pub fn uncorrected(mut self) -> Self {
        self.corrected = false;
        self
    }

    pub fn build(&self, target: std::sync::Arc<dyn Target>) -> Result<InvolutiveKernel> {
        self.build_with_eps(target, self.eps)
    }

    pub fn build_with_eps(&self, target: std::sync::Arc<dyn Target>, eps: f64) -> Result<InvolutiveKernel> {
        match self.name.as_str() {
            "rwmh" => rwmh_kernel(target, eps),
            "mala" => mala_kernel(target, eps),
            "hmc" => hmc_kernel(target, eps, self.leapfrog),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }

    /// `hmc(0.02,50)`, `uncorrected-hmc(0.02,50)`, `rwmh(0.3)`.
    pub fn label(&self) -> String {
        let prefix = if self.corrected { "" } else { "uncorrected-" };
        match self.name.as_str() {
            "hmc" => format!("{prefix}hmc({},{})", self.eps, self.leapfrog),
            n => format!("{prefix}{n}({})", self.eps),
        }
    }

    fn validate(&self) -> Result<()> {
        if !["rwmh", "mala", "hmc"].contains(&self.name.as_str()) {
            return Err(Error::Config(format!("unknown kernel `{}`", self.name)));
        }
        positive("kernel.eps", self.eps)?;
        if self.name == "hmc" && self.leapfrog == 0 {
            return Err(Error::Config("kernel.leapfrog must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub families: Vec<FlowFamily>,
    pub lengths: Vec<usize>,
    /// `M` for the ensemble family.
    pub ensemble: usize,
    /// Constant `θ*` coordinates; the defaults are `π/8` and `π/7`.
    pub theta_v: Option<f64>,
    pub theta_a: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { families: vec![], lengths: vec![], ensemble: 30, theta_v: None, theta_a: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Directory of `<target>-seed<seed>.json` records. Other subcommands
    /// reuse a record found there and fit in memory otherwise.
    pub dir: Option<PathBuf>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        let a = AdviConfig::default();
        ReferenceConfig { steps: a.steps, batch: a.batch, lr: a.lr, seed: a.seed, dir: None }
    }
}

impl ReferenceConfig {
    pub fn advi(&self) -> AdviConfig {
        AdviConfig { steps: self.steps, batch: self.batch, lr: self.lr, seed: self.seed }
    }

    pub fn record_path(&self, target: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{target}-seed{}.json", self.seed)))
    }
}

pub const METRICS: [&str; 3] = ["elbo", "log_z", "ess"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub samples: usize,
    pub list: Vec<String>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { samples: 64, list: METRICS.iter().map(|m| m.to_string()).collect() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Flow draws per TV estimate.
    pub samples: usize,
    /// Bins per axis; `round(samples^{1/4})` when absent.
    pub bins: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { samples: 512, bins: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub starts: usize,
    pub lengths: Vec<usize>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { starts: 32, lengths: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Step sizes replacing each kernel's own `eps` in `tv-sweep`.
    pub eps: Vec<f64>,
    /// `T` values of the ensemble sweep at fixed `M`.
    pub ensemble_lengths: Vec<usize>,
    pub fixed_ensemble: usize,
    /// `M` values of the ensemble sweep at fixed `T`.
    pub ensemble_sizes: Vec<usize>,
    pub fixed_length: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps: vec![],
            ensemble_lengths: vec![1, 2, 5, 10, 20, 50, 100, 200],
            fixed_ensemble: 30,
            ensemble_sizes: vec![1, 2, 5, 10, 20, 30, 50],
            fixed_length: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub length: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { length: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub lo: f64,
    pub hi: f64,
    pub target_acceptance: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub max_probes: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { lo: 0.001, hi: 10.0, target_acceptance: 0.8, tolerance: 0.05, iterations: 5000, max_probes: 40 }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

fn nonzero(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config(format!("{name} must be positive")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.targets {
            targets::by_name(t).map_err(|_| Error::Config(format!("unknown target `{t}`")))?;
        }
        for k in &self.kernel {
            k.validate()?;
        }
        if self.replicates == Some(0) {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if self.flow.lengths.contains(&0) {
            return Err(Error::Config("flow.lengths must be positive".into()));
        }
        nonzero("flow.ensemble", self.flow.ensemble)?;
        for th in [self.flow.theta_v, self.flow.theta_a].into_iter().flatten() {
            if !(0.0..1.0).contains(&th) {
                return Err(Error::Config(format!("θ* coordinates must lie in [0, 1), got {th}")));
            }
        }
        nonzero("reference.batch", self.reference.batch)?;
        positive("reference.lr", self.reference.lr)?;
        if self.metrics.samples < 2 {
            return Err(Error::Config("metrics.samples must be at least 2".into()));
        }
        for m in &self.metrics.list {
            if !METRICS.contains(&m.as_str()) {
                return Err(Error::Config(format!("unknown metric `{m}`")));
            }
        }
        nonzero("grid.samples", self.grid.samples)?;
        if self.grid.bins.is_some_and(|b| b < 1) {
            return Err(Error::Config("grid.bins must be positive".into()));
        }
        if self.stability.starts < 2 {
            return Err(Error::Config("stability.starts must be at least 2".into()));
        }
        if self.stability.lengths.contains(&0) {
            return Err(Error::Config("stability.lengths must be positive".into()));
        }
        for &e in &self.sweep.eps {
            positive("sweep.eps", e)?;
        }
        nonzero("sweep.fixed_ensemble", self.sweep.fixed_ensemble)?;
        nonzero("sweep.fixed_length", self.sweep.fixed_length)?;
        if self.sweep.ensemble_lengths.contains(&0) || self.sweep.ensemble_sizes.contains(&0) {
            return Err(Error::Config("ensemble sweep values must be positive".into()));
        }
        nonzero("diagnostics.length", self.diagnostics.length)?;
        let t = &self.tune;
        positive("tune.lo", t.lo)?;
        positive("tune.hi", t.hi)?;
        if t.lo >= t.hi {
            return Err(Error::Config("tune.lo must be below tune.hi".into()));
        }
        if !(t.target_acceptance > 0.0 && t.target_acceptance < 1.0) {
            return Err(Error::Config("tune.target_acceptance must lie in (0, 1)".into()));
        }
        positive("tune.tolerance", t.tolerance)?;
        nonzero("tune.iterations", t.iterations)?;
        nonzero("tune.max_probes", t.max_probes)?;
        Ok(())
    }

    pub fn target_names(&self) -> Vec<String> {
        if self.targets.is_empty() {
            vec!["banana".into()]
        } else {
            self.targets.clone()
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if !self.seeds.is_empty() {
            return self.seeds.clone();
        }
        let n = self.replicates.unwrap_or(32) as u64;
        (0..n).map(|r| self.seed.wrapping_add(r)).collect()
    }

    /// The value written in every row's `seed` column.
    pub fn seed_label(&self) -> String {
        if self.seeds.is_empty() {
            self.seed.to_string()
        } else {
            self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";")
        }
    }

    pub fn kernels_or(&self, default: Vec<KernelConfig>) -> Vec<KernelConfig> {
        if self.kernel.is_empty() {
            default
        } else {
            self.kernel.clone()
        }
    }

    /// First 16 hex digits of SHA-256 over the resolved config as JSON, so
    /// comments and key order in the file do not change it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
