//! MixFlow families: seeded sampling and log-density for the homogeneous,
//! IRF, backward-IRF and ensemble-IRF flows, plus the uncorrected
//! (never-rejecting) homogeneous HMC flow.
//!
//! Corrected-flow densities are returned relative to `γ̄`:
//! `ln q̄_T(s) = ln γ̄(s) + ln (1/T) Σ_t (q̄₀/γ̄)(sₜ)`, which is the exact
//! log-density up to `+ ln Z` (zero for the synthetic targets).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irf::{
    backward_process, backward_process_serial, forward_orbit, inverse_orbit,
    inverse_orbit_ratios, irf_forward, irf_forward_log_jacobian, irf_inverse, refresh, unrefresh,
    AugmentedMap, AugmentedState, FrozenStream, IrfParam, Schedule,
};
use crate::kernels::InvolutiveKernel;
use crate::numerics::log_mean_exp;
use crate::reference::AugmentedReference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowFamily {
    Homogeneous,
    Irf,
    BackwardIrf,
    EnsembleIrf,
    UncorrectedHomogeneous,
}

impl FlowFamily {
    pub const ALL: [FlowFamily; 5] = [
        FlowFamily::Homogeneous,
        FlowFamily::Irf,
        FlowFamily::BackwardIrf,
        FlowFamily::EnsembleIrf,
        FlowFamily::UncorrectedHomogeneous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowFamily::Homogeneous => "homogeneous",
            FlowFamily::Irf => "irf",
            FlowFamily::BackwardIrf => "backward_irf",
            FlowFamily::EnsembleIrf => "ensemble_irf",
            FlowFamily::UncorrectedHomogeneous => "uncorrected_homogeneous",
        }
    }
}

impl fmt::Display for FlowFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FlowFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown flow family `{s}`")))
    }
}

/// A flow instance: family, reference (which carries the kernel), length
/// `T`, and its frozen randomness.
#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub family: FlowFamily,
    pub reference: AugmentedReference,
    pub length: usize,
    /// `θ*` of the homogeneous families.
    pub theta: IrfParam,
    /// One stream for IRF/backward, `M` streams for the ensemble.
    pub stream: FrozenStream,
}

impl FlowSpec {
    pub fn homogeneous(reference: AugmentedReference, length: usize, theta: IrfParam) -> Self {
        Self::fixed(FlowFamily::Homogeneous, reference, length, theta)
    }

    /// Homogeneous flow whose map skips the accept/reject step.
    pub fn uncorrected(reference: AugmentedReference, length: usize, theta: IrfParam) -> Self {
        Self::fixed(FlowFamily::UncorrectedHomogeneous, reference, length, theta)
    }

    fn fixed(family: FlowFamily, reference: AugmentedReference, length: usize, theta: IrfParam) -> Self {
        let d = reference.dim();
        FlowSpec { family, reference, length, theta, stream: FrozenStream::new(0, 0, 1, d) }
    }

    pub fn irf(reference: AugmentedReference, length: usize, seed: u64) -> Self {
        Self::streamed(FlowFamily::Irf, reference, length, 1, seed)
    }

    pub fn backward_irf(reference: AugmentedReference, length: usize, seed: u64) -> Self {
        Self::streamed(FlowFamily::BackwardIrf, reference, length, 1, seed)
    }

    pub fn ensemble(reference: AugmentedReference, length: usize, streams: usize, seed: u64) -> Self {
        Self::streamed(FlowFamily::EnsembleIrf, reference, length, streams, seed)
    }

    fn streamed(family: FlowFamily, reference: AugmentedReference, length: usize, m: usize, seed: u64) -> Self {
        let d = reference.dim();
        FlowSpec {
            family,
            reference,
            length,
            theta: IrfParam::homogeneous_default(d),
            stream: FrozenStream::new(seed, length, m, d),
        }
    }

    /// Builds any family; `theta` is used by the homogeneous ones, `seed`
    /// and `streams` by the IRF ones.
    pub fn new(
        family: FlowFamily,
        reference: AugmentedReference,
        length: usize,
        streams: usize,
        theta: IrfParam,
        seed: u64,
    ) -> Result<Self> {
        let spec = match family {
            FlowFamily::Homogeneous => Self::homogeneous(reference, length, theta),
            FlowFamily::UncorrectedHomogeneous => Self::uncorrected(reference, length, theta),
            FlowFamily::Irf => Self::irf(reference, length, seed),
            FlowFamily::BackwardIrf => Self::backward_irf(reference, length, seed),
            FlowFamily::EnsembleIrf => Self::ensemble(reference, length, streams, seed),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kernel(&self) -> &InvolutiveKernel {
        &self.reference.kernel
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.reference.dim();
        if self.theta.theta_v.len() != d {
            return Err(Error::Config("θ* dimension does not match the target".into()));
        }
        match self.family {
            FlowFamily::EnsembleIrf if self.stream.streams() == 0 => {
                Err(Error::Config("ensemble flow needs at least one stream".into()))
            }
            FlowFamily::Irf | FlowFamily::BackwardIrf | FlowFamily::EnsembleIrf
                if self.stream.len() < self.length =>
            {
                Err(Error::Config("stream shorter than the flow".into()))
            }
            _ => Ok(()),
        }
    }

    /// Same flow with length `t`, sharing the stream prefix.
    pub fn with_length(&self, t: usize) -> Self {
        let mut out = self.clone();
        out.length = t;
        if out.stream.len() < t {
            let sp = self.stream.spec();
            out.stream = FrozenStream::new(sp.seed, t, sp.streams, sp.dim);
        }
        out
    }
}

/// The uncorrected map: shift, momentum refresh, involution, never reject.
/// `u_a` is carried unchanged.
#[derive(Debug, Clone)]
pub struct UncorrectedMap<'a>(pub &'a InvolutiveKernel);

impl UncorrectedMap<'_> {
    /// `f⁻¹(s)` and `ln |det ∇f⁻¹(s)| = ln ρ(ṽ|x) − ln ρ(v|x)`.
    pub fn inverse_with_log_jacobian(&self, s: &AugmentedState, theta: &IrfParam) -> Result<(AugmentedState, f64)> {
        let k = self.0;
        let (x, v_tilde) = k.involute(&s.x, &s.v)?;
        if x.iter().chain(&v_tilde).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { stage: "uncorrected inverse" });
        }
        let (v, u_v) = unrefresh(k, &x, &v_tilde, &s.u_v, &theta.theta_v)?;
        let rho = k.conditional(&x);
        let lj = rho.log_pdf(&v_tilde) - rho.log_pdf(&v);
        Ok((AugmentedState { x, v, u_v, u_a: s.u_a }, lj))
    }
}

impl AugmentedMap for UncorrectedMap<'_> {
    fn forward(&self, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState> {
        let k = self.0;
        let (v_tilde, u_v) = refresh(k, &s.x, &s.v, &s.u_v, &theta.theta_v)?;
        let (x, v) = k.involute(&s.x, &v_tilde)?;
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { stage: "uncorrected forward" });
        }
        Ok(AugmentedState { x, v, u_v, u_a: s.u_a })
    }

    fn inverse(&self, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState> {
        self.inverse_with_log_jacobian(s, theta).map(|(s, _)| s)
    }
}

/// One draw from the flow.
pub fn flow_sample(spec: &FlowSpec, rng: &mut dyn RngCore) -> Result<AugmentedState> {
    let t = spec.length;
    let pick = match (spec.family, t) {
        (_, 0) => 0,
        (FlowFamily::EnsembleIrf, _) => rng.random_range(0..spec.stream.streams()),
        _ => rng.random_range(1..=t),
    };
    let s0 = spec.reference.sample(rng);
    if t == 0 {
        return Ok(s0);
    }
    let k = spec.kernel();
    match spec.family {
        FlowFamily::Homogeneous => forward_orbit(k, &s0, Schedule::Fixed(&spec.theta), 1, pick),
        FlowFamily::UncorrectedHomogeneous => {
            forward_orbit(&UncorrectedMap(k), &s0, Schedule::Fixed(&spec.theta), 1, pick)
        }
        FlowFamily::Irf => forward_orbit(k, &s0, Schedule::stream(&spec.stream), 1, pick),
        FlowFamily::BackwardIrf => {
            // f_{θ₁} ∘ ⋯ ∘ f_{θ_K}: θ_K is applied first
            let mut cur = s0;
            for j in (1..=pick).rev() {
                cur = irf_forward(k, &cur, spec.stream.param(0, j))?;
            }
            Ok(cur)
        }
        FlowFamily::EnsembleIrf => {
            let sched = Schedule::Stream { stream: &spec.stream, index: pick };
            forward_orbit(k, &s0, sched, 1, t)
        }
    }
}

/// `n` draws; draw `i` uses ChaCha8 seeded with `seed` on stream `i`, so the
/// result does not depend on the worker count.
pub fn flow_samples(spec: &FlowSpec, n: usize, seed: u64) -> Vec<Result<AugmentedState>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            flow_sample(spec, &mut rng)
        })
        .collect()
}

fn combine(log_gamma: f64, ratios: &[f64]) -> f64 {
    if log_gamma == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    log_gamma + log_mean_exp(ratios)
}

fn augmented_log_target(spec: &FlowSpec, s: &AugmentedState) -> f64 {
    let in_cube = s.u_v.iter().chain(std::iter::once(&s.u_a)).all(|u| (0.0..1.0).contains(u));
    if !in_cube {
        return f64::NEG_INFINITY;
    }
    spec.kernel().log_joint(&s.x, &s.v)
}

/// `ln q̄_T(s)` (up to `+ ln Z` for corrected families). The IRF terms are
/// evaluated in parallel over `t`, the ensemble in parallel over streams;
/// both reduce in a fixed order.
pub fn flow_log_density(spec: &FlowSpec, s: &AugmentedState) -> Result<f64> {
    log_density_impl(spec, s, true)
}

/// [`flow_log_density`] on the calling thread only.
pub fn flow_log_density_serial(spec: &FlowSpec, s: &AugmentedState) -> Result<f64> {
    log_density_impl(spec, s, false)
}

fn log_density_impl(spec: &FlowSpec, s: &AugmentedState, parallel: bool) -> Result<f64> {
    let t = spec.length;
    if t == 0 {
        return Ok(spec.reference.log_density(s));
    }
    if spec.family == FlowFamily::UncorrectedHomogeneous {
        return uncorrected_flow_log_density(spec, s);
    }
    let lg = augmented_log_target(spec, s);
    if lg == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let k = spec.kernel();
    let r = &spec.reference;
    let ratios = match spec.family {
        FlowFamily::Homogeneous => inverse_orbit_ratios(k, r, s, Schedule::Fixed(&spec.theta), t)?,
        FlowFamily::BackwardIrf => inverse_orbit_ratios(k, r, s, Schedule::stream(&spec.stream), t)?,
        FlowFamily::Irf if parallel => backward_process(k, r, s, Schedule::stream(&spec.stream), t)?,
        FlowFamily::Irf => backward_process_serial(k, r, s, Schedule::stream(&spec.stream), t)?,
        FlowFamily::EnsembleIrf => {
            let one = |m: usize| {
                let sched = Schedule::Stream { stream: &spec.stream, index: m };
                r.log_ratio(&inverse_orbit(k, s, sched, 1, t)?)
            };
            if parallel {
                (0..spec.stream.streams()).into_par_iter().map(one).collect::<Result<Vec<_>>>()?
            } else {
                (0..spec.stream.streams()).map(one).collect::<Result<Vec<_>>>()?
            }
        }
        FlowFamily::UncorrectedHomogeneous => unreachable!(),
    };
    Ok(combine(lg, &ratios))
}

/// Log-density of the uncorrected flow by explicit Jacobian accumulation:
/// `ln (1/T) Σ_t [q̄₀(f^{-t}s) Π_{i<t} |det ∇f⁻¹(f^{-i}s)|]`.
pub fn uncorrected_flow_log_density(spec: &FlowSpec, s: &AugmentedState) -> Result<f64> {
    let map = UncorrectedMap(spec.kernel());
    let mut cur = s.clone();
    let mut lj = 0.0;
    let mut terms = Vec::with_capacity(spec.length);
    for _ in 0..spec.length {
        let (prev, step) = map.inverse_with_log_jacobian(&cur, &spec.theta)?;
        lj += step;
        terms.push(spec.reference.log_density(&prev) + lj);
        cur = prev;
    }
    Ok(log_mean_exp(&terms))
}

/// Corrected homogeneous density by the same Jacobian accumulation, with
/// the branch-wise analytic Jacobian of each step. Equal to
/// [`flow_log_density`] because every `f_θ` preserves `π̄`.
pub fn homogeneous_log_density_by_jacobians(spec: &FlowSpec, s: &AugmentedState) -> Result<f64> {
    let k = spec.kernel();
    let mut cur = s.clone();
    let mut lj = 0.0;
    let mut terms = Vec::with_capacity(spec.length);
    for _ in 0..spec.length {
        let prev = irf_inverse(k, &cur, &spec.theta)?;
        lj -= irf_forward_log_jacobian(k, &prev, &spec.theta)?;
        terms.push(spec.reference.log_density(&prev) + lj);
        cur = prev;
    }
    if terms.is_empty() {
        return Ok(spec.reference.log_density(s));
    }
    Ok(log_mean_exp(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{hmc_kernel, rwmh_kernel};
    use crate::reference::MeanFieldGaussian;
    use crate::targets::{banana, DiagGaussian, Target};
    use std::sync::Arc;

    fn banana_ref() -> AugmentedReference {
        let k = rwmh_kernel(banana(), 0.3).unwrap();
        AugmentedReference::new(MeanFieldGaussian::new(vec![0.0, -8.0], vec![2.0, 1.0]), k)
    }

    fn all_families(r: &AugmentedReference, t: usize) -> Vec<FlowSpec> {
        let d = r.dim();
        vec![
            FlowSpec::homogeneous(r.clone(), t, IrfParam::homogeneous_default(d)),
            FlowSpec::irf(r.clone(), t, 5),
            FlowSpec::backward_irf(r.clone(), t, 5),
            FlowSpec::ensemble(r.clone(), t, 4, 5),
        ]
    }

    #[test]
    fn family_names_round_trip() {
        for f in FlowFamily::ALL {
            assert_eq!(f.as_str().parse::<FlowFamily>().unwrap(), f);
        }
        assert!("mixflow".parse::<FlowFamily>().is_err());
    }

    #[test]
    fn zero_length_is_the_reference() {
        let r = banana_ref();
        for spec in all_families(&r, 0) {
            let mut a = ChaCha8Rng::seed_from_u64(3);
            let mut b = ChaCha8Rng::seed_from_u64(3);
            let s = flow_sample(&spec, &mut a).unwrap();
            assert_eq!(s, r.sample(&mut b));
            assert_eq!(flow_log_density(&spec, &s).unwrap(), r.log_density(&s));
        }
    }

    #[test]
    fn density_is_log_target_when_reference_is_exact() {
        let t: Arc<dyn Target> = Arc::new(DiagGaussian { mean: vec![1.0, -1.0], sd: vec![0.5, 2.0] });
        let k = hmc_kernel(t, 0.1, 5).unwrap();
        let r = AugmentedReference::new(MeanFieldGaussian::new(vec![1.0, -1.0], vec![0.5f64.ln(), 2f64.ln()]), k);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [1, 7, 20] {
            for spec in all_families(&r, len) {
                let s = flow_sample(&spec, &mut rng).unwrap();
                let l = flow_log_density(&spec, &s).unwrap();
                assert!((l - r.kernel.log_joint(&s.x, &s.v)).abs() < 1e-10, "{}", spec.family);
            }
        }
    }

    #[test]
    fn parallel_and_serial_densities_agree_bitwise() {
        let r = banana_ref();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for spec in all_families(&r, 25) {
            let s = flow_sample(&spec, &mut rng).unwrap();
            let a = flow_log_density(&spec, &s).unwrap();
            let b = flow_log_density_serial(&spec, &s).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn single_stream_ensemble_is_an_endpoint_pushforward() {
        let r = banana_ref();
        let ens = FlowSpec::ensemble(r.clone(), 30, 1, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = flow_sample(&ens, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let _ = rng.random_range(0..1usize);
        let s0 = r.sample(&mut rng);
        let direct = forward_orbit(&r.kernel, &s0, Schedule::stream(&ens.stream), 1, 30).unwrap();
        assert_eq!(s, direct);
    }

    #[test]
    fn homogeneous_density_matches_jacobian_tracking() {
        let r = banana_ref();
        let spec = FlowSpec::homogeneous(r, 20, IrfParam::homogeneous_default(2));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let s = flow_sample(&spec, &mut rng).unwrap();
            for len in [1, 5, 20] {
                let sp = spec.with_length(len);
                let a = flow_log_density(&sp, &s).unwrap();
                let b = homogeneous_log_density_by_jacobians(&sp, &s).unwrap();
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn uncorrected_map_inverts_and_tracks_jacobian() {
        let k = hmc_kernel(banana(), 0.05, 10).unwrap();
        let r = AugmentedReference::new(MeanFieldGaussian::new(vec![0.0, -8.0], vec![2.0, 1.0]), k.clone());
        let map = UncorrectedMap(&k);
        let theta = IrfParam::homogeneous_default(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let s = r.sample(&mut rng);
            let f = map.forward(&s, &theta).unwrap();
            let (b, lj) = map.inverse_with_log_jacobian(&f, &theta).unwrap();
            assert!(b.distance(&s) < 1e-9);
            // FD on (x, v, u_v) with u_a fixed
            let fd = crate::numerics::fd_logdet(
                |z| {
                    let st = AugmentedState { x: z[..2].to_vec(), v: z[2..4].to_vec(), u_v: z[4..].to_vec(), u_a: f.u_a };
                    let out = map.inverse(&st, &theta)?;
                    Ok(out.x.into_iter().chain(out.v).chain(out.u_v).collect())
                },
                &f.to_flat()[..6],
                1e-6,
            )
            .unwrap();
            assert!((fd - lj).abs() < 1e-4, "{fd} vs {lj}");
        }
    }

    #[test]
    fn uncorrected_density_is_normalized_under_its_own_samples() {
        // a light-tailed rig keeps the weights' variance finite
        let t: Arc<dyn Target> = Arc::new(DiagGaussian { mean: vec![1.0, 0.0], sd: vec![1.5, 0.7] });
        let k = hmc_kernel(t, 0.1, 10).unwrap();
        let r = AugmentedReference::new(MeanFieldGaussian::standard(2), k);
        let spec = FlowSpec::uncorrected(r, 10, IrfParam::homogeneous_default(2));
        // E_q[γ̄/q] = Z = 1
        let w: Vec<f64> = flow_samples(&spec, 4000, 3)
            .into_iter()
            .map(|s| {
                let s = s.unwrap();
                (spec.kernel().log_joint(&s.x, &s.v) - uncorrected_flow_log_density(&spec, &s).unwrap()).exp()
            })
            .collect();
        let n = w.len() as f64;
        let m = w.iter().sum::<f64>() / n;
        let se = (w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((m - 1.0).abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn samples_are_reproducible() {
        let spec = FlowSpec::irf(banana_ref(), 15, 2);
        let a = flow_samples(&spec, 16, 77);
        let b = flow_samples(&spec, 16, 77);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
        }
    }
}
