//! The reference distribution: a mean-field Gaussian fitted by Adam on the
//! reparameterized ELBO, and its augmentation to the full state space.

use std::path::Path;

use rand::Rng;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irf::AugmentedState;
use crate::kernels::InvolutiveKernel;
use crate::numerics::{normal_log_pdf, HALF_LN_2PI};
use crate::targets::Target;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldGaussian {
    pub mean: Vec<f64>,
    pub log_sd: Vec<f64>,
}

impl MeanFieldGaussian {
    pub fn new(mean: Vec<f64>, log_sd: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_sd.len(), "mean and log_sd lengths differ");
        MeanFieldGaussian { mean, log_sd }
    }

    /// Mean 0, log-sd 0.
    pub fn standard(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sd(&self) -> Vec<f64> {
        self.log_sd.iter().map(|l| l.exp()).collect()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(&self.log_sd)
            .map(|((&xi, &m), &ls)| normal_log_pdf((xi - m) * (-ls).exp()) - ls)
            .sum()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_sd)
            .map(|(&m, &ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Entropy `Σ log_sd + d (1 + ln 2π) / 2`.
    pub fn entropy(&self) -> f64 {
        self.log_sd.iter().sum::<f64>() + self.dim() as f64 * (0.5 + HALF_LN_2PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdviConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AdviConfig {
    fn default() -> Self {
        AdviConfig { steps: 10_000, batch: 10, lr: 1e-3, seed: 1 }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Batch ELBO `(1/B) Σ ln γ(μ + σ ⊙ zᵦ) + H(q)` for fixed standard-normal
/// noise `zᵦ`.
pub fn batch_elbo(target: &dyn Target, q: &MeanFieldGaussian, noise: &[Vec<f64>]) -> f64 {
    let sd = q.sd();
    let mean_lg = noise
        .iter()
        .map(|z| {
            let x: Vec<f64> = z.iter().zip(&q.mean).zip(&sd).map(|((&zi, &m), &s)| m + s * zi).collect();
            target.log_density(&x)
        })
        .sum::<f64>()
        / noise.len() as f64;
    mean_lg + q.entropy()
}

/// Reparameterized gradient of [`batch_elbo`] with respect to
/// `(mean, log_sd)`.
pub fn batch_elbo_grad(target: &dyn Target, q: &MeanFieldGaussian, noise: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = q.dim();
    let sd = q.sd();
    let mut g_mean = vec![0.0; d];
    let mut g_log_sd = vec![1.0; d];
    let mut grad = vec![0.0; d];
    let w = 1.0 / noise.len() as f64;
    for z in noise {
        let x: Vec<f64> = z.iter().zip(&q.mean).zip(&sd).map(|((&zi, &m), &s)| m + s * zi).collect();
        target.grad_log_density(&x, &mut grad);
        for i in 0..d {
            g_mean[i] += w * grad[i];
            g_log_sd[i] += w * grad[i] * sd[i] * z[i];
        }
    }
    (g_mean, g_log_sd)
}

/// `cfg.steps` Adam ascent steps on the ELBO from mean 0, log-sd 0.
pub fn fit_advi(target: &dyn Target, cfg: &AdviConfig) -> Result<MeanFieldGaussian> {
    let d = target.dim();
    if cfg.batch == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Domain("ADVI needs batch >= 1 and a positive learning rate".into()));
    }
    let mut q = MeanFieldGaussian::standard(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut m = vec![0.0; 2 * d];
    let mut v = vec![0.0; 2 * d];
    for step in 1..=cfg.steps {
        let noise: Vec<Vec<f64>> = (0..cfg.batch)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let (gm, gs) = batch_elbo_grad(target, &q, &noise);
        let g: Vec<f64> = gm.into_iter().chain(gs).collect();
        if g.iter().any(|c| !c.is_finite()) {
            return Err(Error::OptimizerDiverged { step });
        }
        let bc1 = 1.0 - BETA1.powi(step as i32);
        let bc2 = 1.0 - BETA2.powi(step as i32);
        for i in 0..2 * d {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let delta = cfg.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + ADAM_EPS);
            if i < d {
                q.mean[i] += delta;
            } else {
                q.log_sd[i - d] += delta;
            }
        }
    }
    Ok(q)
}

/// `q̄₀(s) = q₀(x) ρ(v | x) 1[u_v ∈ [0,1)^d] 1[u_a ∈ [0,1)]`.
#[derive(Debug, Clone)]
pub struct AugmentedReference {
    pub base: MeanFieldGaussian,
    pub kernel: InvolutiveKernel,
}

impl AugmentedReference {
    pub fn new(base: MeanFieldGaussian, kernel: InvolutiveKernel) -> Self {
        assert_eq!(base.dim(), kernel.dim(), "reference and kernel dimensions differ");
        AugmentedReference { base, kernel }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> AugmentedState {
        let x = self.base.sample(rng);
        let v = self.kernel.conditional(&x).sample(rng);
        let u_v = (0..x.len()).map(|_| rng.random::<f64>()).collect();
        let u_a = rng.random::<f64>();
        AugmentedState { x, v, u_v, u_a }
    }

    pub fn log_density(&self, s: &AugmentedState) -> f64 {
        let in_cube = s.u_v.iter().chain(std::iter::once(&s.u_a)).all(|u| (0.0..1.0).contains(u));
        if !in_cube || s.x.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        let l = self.base.log_pdf(&s.x) + self.kernel.conditional(&s.x).log_pdf(&s.v);
        if l.is_nan() {
            f64::NEG_INFINITY
        } else {
            l
        }
    }

    /// `ln q̄₀(s) − ln γ̄(s)`. Zero target density is an error; a state off
    /// the reference support gives `-inf`.
    pub fn log_ratio(&self, s: &AugmentedState) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::NonFinite { stage: "reference ratio" });
        }
        let lg = self.kernel.log_joint(&s.x, &s.v);
        if lg == f64::NEG_INFINITY {
            return Err(Error::ZeroDensity);
        }
        Ok(self.log_density(s) - lg)
    }
}

/// A fitted reference as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub target: String,
    pub mean: Vec<f64>,
    pub log_sd: Vec<f64>,
    pub seed: u64,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
}

impl ReferenceRecord {
    pub fn new(target: &str, q: &MeanFieldGaussian, cfg: &AdviConfig) -> Self {
        ReferenceRecord {
            target: target.to_string(),
            mean: q.mean.clone(),
            log_sd: q.log_sd.clone(),
            seed: cfg.seed,
            steps: cfg.steps,
            batch: cfg.batch,
            lr: cfg.lr,
        }
    }

    pub fn gaussian(&self) -> MeanFieldGaussian {
        MeanFieldGaussian::new(self.mean.clone(), self.log_sd.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
