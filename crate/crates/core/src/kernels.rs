//! Involutive MCMC kernels: an auxiliary conditional `ρ(v | x)`, an
//! involution `g` with its log-Jacobian, and the plain accept/reject
//! transition built from them.
//!
//! Every auxiliary conditional here is a diagonal Gaussian, so the
//! coordinatewise CDF/quantile pair used by the IRF map is exact.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::RngCore;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{normal_cdf, normal_log_pdf, normal_quantile};
use crate::targets::Target;

/// `ρ(· | x)` for a fixed `x`: independent `N(locᵢ, scale²)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalNormal {
    pub loc: Vec<f64>,
    pub scale: f64,
}

impl DiagonalNormal {
    pub fn log_pdf(&self, v: &[f64]) -> f64 {
        let n = v.len() as f64;
        v.iter()
            .zip(&self.loc)
            .map(|(&vi, &m)| normal_log_pdf((vi - m) / self.scale))
            .sum::<f64>()
            - n * self.scale.ln()
    }

    pub fn cdf(&self, i: usize, vi: f64) -> f64 {
        normal_cdf((vi - self.loc[i]) / self.scale)
    }

    pub fn quantile(&self, i: usize, p: f64) -> Result<f64> {
        Ok(self.loc[i] + self.scale * normal_quantile(p)?)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.loc
            .iter()
            .map(|&m| m + self.scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Family of auxiliary conditionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxiliaryConditional {
    /// `ρ(v | x) = N(0, I)`, independent of `x`.
    StandardNormal,
    /// Langevin proposal `N(x + (ε²/2) ∇ ln γ(x), ε² I)`.
    Langevin { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Involution {
    /// `(x, v) ↦ (x + ε v, −v)`.
    RandomWalk { step: f64 },
    /// `k` leapfrog steps of size `ε` followed by a momentum flip.
    Leapfrog { step: f64, n_steps: usize },
    /// `(x, v) ↦ (v, x)`.
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Rwmh,
    Mala,
    Hmc,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Rwmh => "rwmh",
            KernelKind::Mala => "mala",
            KernelKind::Hmc => "hmc",
        })
    }
}

/// A proposal `(x', v') = g(x, v)` with its log MH ratio. A proposal that
/// diverged has `log_ratio = -inf` and empty vectors.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub log_ratio: f64,
}

impl Proposal {
    pub fn diverged(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Clone)]
pub struct InvolutiveKernel {
    target: Arc<dyn Target>,
    aux: AuxiliaryConditional,
    involution: Involution,
    kind: KernelKind,
}

impl fmt::Debug for InvolutiveKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InvolutiveKernel")
            .field("target", &self.target.name())
            .field("aux", &self.aux)
            .field("involution", &self.involution)
            .finish()
    }
}

fn check_step(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("step size must be positive, got {eps}")))
    }
}

/// Random-walk Metropolis: `ρ = N(0, I)`, `g(x, v) = (x + εv, −v)`.
pub fn rwmh_kernel(target: Arc<dyn Target>, eps: f64) -> Result<InvolutiveKernel> {
    check_step(eps)?;
    Ok(InvolutiveKernel {
        target,
        aux: AuxiliaryConditional::StandardNormal,
        involution: Involution::RandomWalk { step: eps },
        kind: KernelKind::Rwmh,
    })
}

/// HMC with identity mass: `k` leapfrog steps then a momentum flip.
pub fn hmc_kernel(target: Arc<dyn Target>, eps: f64, k: usize) -> Result<InvolutiveKernel> {
    check_step(eps)?;
    if k == 0 {
        return Err(Error::Domain("HMC needs at least one leapfrog step".into()));
    }
    Ok(InvolutiveKernel {
        target,
        aux: AuxiliaryConditional::StandardNormal,
        involution: Involution::Leapfrog { step: eps, n_steps: k },
        kind: KernelKind::Hmc,
    })
}

/// MALA as an MH sampler with the swap involution.
pub fn mala_kernel(target: Arc<dyn Target>, eps: f64) -> Result<InvolutiveKernel> {
    check_step(eps)?;
    Ok(InvolutiveKernel {
        target,
        aux: AuxiliaryConditional::Langevin { step: eps },
        involution: Involution::Swap,
        kind: KernelKind::Mala,
    })
}

impl InvolutiveKernel {
    pub fn target(&self) -> &Arc<dyn Target> {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn auxiliary(&self) -> AuxiliaryConditional {
        self.aux
    }

    pub fn involution(&self) -> Involution {
        self.involution
    }

    /// Step size of the underlying move.
    pub fn step_size(&self) -> f64 {
        match self.involution {
            Involution::RandomWalk { step } | Involution::Leapfrog { step, .. } => step,
            Involution::Swap => match self.aux {
                AuxiliaryConditional::Langevin { step } => step,
                AuxiliaryConditional::StandardNormal => f64::NAN,
            },
        }
    }

    /// Same kernel with a different step size.
    pub fn with_step_size(&self, eps: f64) -> Result<Self> {
        match self.kind {
            KernelKind::Rwmh => rwmh_kernel(self.target.clone(), eps),
            KernelKind::Mala => mala_kernel(self.target.clone(), eps),
            KernelKind::Hmc => match self.involution {
                Involution::Leapfrog { n_steps, .. } => hmc_kernel(self.target.clone(), eps, n_steps),
                _ => unreachable!("HMC kernels carry a leapfrog involution"),
            },
        }
    }

    /// `ρ(· | x)`.
    pub fn conditional(&self, x: &[f64]) -> DiagonalNormal {
        match self.aux {
            AuxiliaryConditional::StandardNormal => DiagonalNormal { loc: vec![0.0; x.len()], scale: 1.0 },
            AuxiliaryConditional::Langevin { step } => {
                let mut grad = vec![0.0; x.len()];
                self.target.grad_log_density(x, &mut grad);
                let loc = x.iter().zip(&grad).map(|(&xi, &g)| xi + 0.5 * step * step * g).collect();
                DiagonalNormal { loc, scale: step }
            }
        }
    }

    /// `ln γ̄(x, v) = ln γ(x) + ln ρ(v | x)`; NaN is mapped to `-inf`.
    pub fn log_joint(&self, x: &[f64], v: &[f64]) -> f64 {
        let lg = self.target.log_density(x);
        if !lg.is_finite() {
            return f64::NEG_INFINITY;
        }
        let l = lg + self.conditional(x).log_pdf(v);
        if l.is_nan() {
            f64::NEG_INFINITY
        } else {
            l
        }
    }

    /// Applies the involution.
    pub fn involute(&self, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.involution {
            Involution::RandomWalk { step } => Ok((
                x.iter().zip(v).map(|(&xi, &vi)| xi + step * vi).collect(),
                v.iter().map(|&vi| -vi).collect(),
            )),
            Involution::Swap => Ok((v.to_vec(), x.to_vec())),
            Involution::Leapfrog { step, n_steps } => {
                let (x, mut v) = leapfrog(self.target.as_ref(), x, v, step, n_steps)?;
                v.iter_mut().for_each(|vi| *vi = -*vi);
                Ok((x, v))
            }
        }
    }

    /// `ln |J_g(x, v)|`. Zero for every involution provided here.
    pub fn log_abs_jacobian(&self, _x: &[f64], _v: &[f64]) -> f64 {
        0.0
    }

    /// Computes `g(x, v)` and `ln r = ln γ̄(g(x,v)) − ln γ̄(x,v) + ln J_g(x,v)`.
    ///
    /// A diverging involution, a proposal outside the support, or a
    /// current state with `γ̄(x, v) = 0` yields `ln r = -inf`, i.e. certain
    /// rejection.
    pub fn propose(&self, x: &[f64], v: &[f64]) -> Proposal {
        let rejected = Proposal { x: Vec::new(), v: Vec::new(), log_ratio: f64::NEG_INFINITY };
        let (xp, vp) = match self.involute(x, v) {
            Ok(p) => p,
            Err(_) => return rejected,
        };
        if xp.iter().chain(&vp).any(|c| !c.is_finite()) {
            return rejected;
        }
        let den = self.log_joint(x, v);
        if den == f64::NEG_INFINITY {
            return rejected;
        }
        let num = self.log_joint(&xp, &vp);
        let log_ratio = num - den + self.log_abs_jacobian(x, v);
        if num == f64::NEG_INFINITY || log_ratio.is_nan() {
            return rejected;
        }
        Proposal { x: xp, v: vp, log_ratio }
    }
}

/// `n_steps` leapfrog steps of size `eps` on `H(x, v) = −ln γ(x) + |v|²/2`.
pub fn leapfrog(
    target: &dyn Target,
    x: &[f64],
    v: &[f64],
    eps: f64,
    n_steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = x.to_vec();
    let mut v = v.to_vec();
    let mut grad = vec![0.0; x.len()];
    target.grad_log_density(&x, &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::LeapfrogDiverged { step: 0 });
    }
    for step in 0..n_steps {
        for (vi, gi) in v.iter_mut().zip(&grad) {
            *vi += 0.5 * eps * gi;
        }
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += eps * vi;
        }
        target.grad_log_density(&x, &mut grad);
        if grad.iter().chain(&x).any(|g| !g.is_finite()) {
            return Err(Error::LeapfrogDiverged { step: step + 1 });
        }
        for (vi, gi) in v.iter_mut().zip(&grad) {
            *vi += 0.5 * eps * gi;
        }
    }
    Ok((x, v))
}

/// One involutive MCMC transition from `x`. Returns the new position and
/// whether the proposal was accepted.
pub fn mcmc_step(kernel: &InvolutiveKernel, x: &[f64], rng: &mut dyn RngCore) -> (Vec<f64>, bool) {
    let v = kernel.conditional(x).sample(rng);
    let prop = kernel.propose(x, &v);
    let u: f64 = rng.random();
    if !prop.diverged() && u.ln() <= prop.log_ratio {
        (prop.x, true)
    } else {
        (x.to_vec(), false)
    }
}
