//! The invertible, measure-preserving iterated-random-function map built
//! from an involutive MCMC kernel, its exact inverse, frozen parameter
//! streams, and orbit evaluation.
//!
//! A state lives on `𝒳 × 𝒱 × [0,1)^d × [0,1)`. One forward step
//!
//! 1. shifts `u_v` and `u_a` by `θ_v`, `θ_a` modulo 1,
//! 2. swaps `(v, u_v)` through the CDF/quantile of `ρ(· | x)`,
//! 3. proposes `(x', v') = g(x, ṽ)` and computes `ln r`,
//! 4. rejects (keeps `(x, ṽ)`, `u_a`) when `u_a > r`, otherwise accepts and
//!    rescales `u_a ← u_a / r`.
//!
//! The inverse recovers the branch from the output alone: recomputing the
//! ratio at `g(x#, v#)` gives `r` or `1/r`, and `u_a# · r̃ ≤ 1` exactly when
//! the forward pass accepted.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::InvolutiveKernel;
use crate::numerics::{mod1_shift, mod1_unshift};
use crate::reference::AugmentedReference;

/// `s = (x, v, u_v, u_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub u_v: Vec<f64>,
    pub u_a: f64,
}

impl AugmentedState {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `[x, v, u_v, u_a]` as one vector of length `3d + 1`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.dim() + 1);
        out.extend_from_slice(&self.x);
        out.extend_from_slice(&self.v);
        out.extend_from_slice(&self.u_v);
        out.push(self.u_a);
        out
    }

    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != 3 * d + 1 {
            return Err(Error::Domain(format!(
                "flat state has length {}, expected {}",
                flat.len(),
                3 * d + 1
            )));
        }
        Ok(AugmentedState {
            x: flat[..d].to_vec(),
            v: flat[d..2 * d].to_vec(),
            u_v: flat[2 * d..3 * d].to_vec(),
            u_a: flat[3 * d],
        })
    }

    /// Euclidean distance between the flattened states.
    pub fn distance(&self, other: &AugmentedState) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|c| c.is_finite())
    }

    /// Finite position and auxiliary, uniforms inside `[0, 1)`.
    pub fn is_valid(&self) -> bool {
        self.v.len() == self.dim()
            && self.u_v.len() == self.dim()
            && self.x.iter().chain(&self.v).all(|c| c.is_finite())
            && self.u_v.iter().chain(std::iter::once(&self.u_a)).all(|u| (0.0..1.0).contains(u))
    }
}

/// `θ = (θ_v, θ_a) ∈ [0,1)^d × [0,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfParam {
    pub theta_v: Vec<f64>,
    pub theta_a: f64,
}

impl IrfParam {
    pub fn new(theta_v: Vec<f64>, theta_a: f64) -> Result<Self> {
        if !theta_v.iter().chain(std::iter::once(&theta_a)).all(|t| (0.0..1.0).contains(t)) {
            return Err(Error::Domain("IRF parameters must lie in [0, 1)".into()));
        }
        Ok(IrfParam { theta_v, theta_a })
    }

    /// The same shift on every coordinate, both reduced modulo 1.
    pub fn constant(d: usize, theta_v: f64, theta_a: f64) -> Self {
        IrfParam { theta_v: vec![theta_v.rem_euclid(1.0); d], theta_a: theta_a.rem_euclid(1.0) }
    }

    /// Default shifts of a homogeneous flow: `θ_v = π/8`, `θ_a = π/7`.
    pub fn homogeneous_default(d: usize) -> Self {
        Self::constant(d, std::f64::consts::PI / 8.0, std::f64::consts::PI / 7.0)
    }

    /// Alternative constant shift `π/16` on both components.
    pub fn pi_over_16(d: usize) -> Self {
        Self::constant(d, std::f64::consts::PI / 16.0, std::f64::consts::PI / 16.0)
    }

    pub fn sample(d: usize, rng: &mut impl Rng) -> Self {
        let theta_v = (0..d).map(|_| rng.random::<f64>()).collect();
        IrfParam { theta_v, theta_a: rng.random() }
    }
}

/// Serialized form of a [`FrozenStream`]: parameters are re-derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub seed: u64,
    pub length: usize,
    pub streams: usize,
    pub dim: usize,
}

/// `M` independent iid sequences `θ₁..θ_T` drawn from the uniform law on
/// `[0,1)^d × [0,1)`. Stream `m` is ChaCha8 seeded with `seed` on stream id `m`,
/// so `(seed, t, m)` always yields the same parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "StreamSpec", into = "StreamSpec")]
pub struct FrozenStream {
    spec: StreamSpec,
    table: Vec<OnceLock<Vec<IrfParam>>>,
}

impl From<StreamSpec> for FrozenStream {
    fn from(spec: StreamSpec) -> Self {
        FrozenStream { spec, table: (0..spec.streams).map(|_| OnceLock::new()).collect() }
    }
}

impl From<FrozenStream> for StreamSpec {
    fn from(s: FrozenStream) -> Self {
        s.spec
    }
}

impl PartialEq for FrozenStream {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl FrozenStream {
    pub fn new(seed: u64, length: usize, streams: usize, dim: usize) -> Self {
        StreamSpec { seed, length, streams, dim }.into()
    }

    pub fn spec(&self) -> StreamSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.length
    }

    pub fn is_empty(&self) -> bool {
        self.spec.length == 0
    }

    pub fn streams(&self) -> usize {
        self.spec.streams
    }

    /// All parameters of stream `m`, materialized on first use.
    pub fn stream(&self, m: usize) -> &[IrfParam] {
        self.table[m].get_or_init(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
            rng.set_stream(m as u64);
            (0..self.spec.length).map(|_| IrfParam::sample(self.spec.dim, &mut rng)).collect()
        })
    }

    /// `θ_t^{(m)}` with `t` counted from 1.
    pub fn param(&self, m: usize, t: usize) -> &IrfParam {
        &self.stream(m)[t - 1]
    }
}

/// Where step `t` of an orbit takes its parameter from.
#[derive(Debug, Clone, Copy)]
pub enum Schedule<'a> {
    Stream { stream: &'a FrozenStream, index: usize },
    Fixed(&'a IrfParam),
}

impl<'a> Schedule<'a> {
    pub fn stream(stream: &'a FrozenStream) -> Self {
        Schedule::Stream { stream, index: 0 }
    }

    /// Parameter of step `t` (1-based).
    pub fn at(&self, t: usize) -> &'a IrfParam {
        match *self {
            Schedule::Stream { stream, index } => stream.param(index, t),
            Schedule::Fixed(p) => p,
        }
    }

    fn check_len(&self, t: usize) -> Result<()> {
        match self {
            Schedule::Stream { stream, .. } if stream.len() < t => Err(Error::Domain(format!(
                "stream of length {} cannot serve step {t}",
                stream.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Branch taken by one forward step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchInfo {
    pub accepted: bool,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BranchTrace {
    pub steps: Vec<BranchInfo>,
}

impl BranchTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps.is_empty() {
            return f64::NAN;
        }
        self.steps.iter().filter(|b| b.accepted).count() as f64 / self.steps.len() as f64
    }
}

/// A bijection on augmented states indexed by an IRF parameter.
pub trait AugmentedMap: Send + Sync {
    fn forward(&self, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState>;
    fn inverse(&self, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState>;
}

impl AugmentedMap for InvolutiveKernel {
    fn forward(&self, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState> {
        irf_forward(self, s, theta)
    }

    fn inverse(&self, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState> {
        irf_inverse(self, s, theta)
    }
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Uniforms that round to 0 (or CDF values that round to 1) are pulled back
/// inside `(0, 1)` so the quantile stays finite.
pub(crate) fn clamp_open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

fn check_state(kernel: &InvolutiveKernel, s: &AugmentedState, theta: &IrfParam) -> Result<()> {
    let d = kernel.dim();
    if s.x.len() != d || s.v.len() != d || s.u_v.len() != d || theta.theta_v.len() != d {
        return Err(Error::Domain(format!("state or parameter does not match dimension {d}")));
    }
    if !s.x.iter().chain(&s.v).all(|c| c.is_finite()) {
        return Err(Error::NonFinite { stage: "input state" });
    }
    Ok(())
}

/// `(u_v shifted, ṽ, u_v')`: mod-1 shift then the CDF/quantile swap.
pub(crate) fn refresh(
    kernel: &InvolutiveKernel,
    x: &[f64],
    v: &[f64],
    u_v: &[f64],
    theta_v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rho = kernel.conditional(x);
    let mut v_tilde = Vec::with_capacity(v.len());
    let mut u_new = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let shifted = mod1_shift(u_v[i], theta_v[i]);
        u_new.push(clamp_open_unit(rho.cdf(i, v[i])));
        let vt = rho
            .quantile(i, clamp_open_unit(shifted))
            .map_err(|_| Error::NonFinite { stage: "auxiliary refresh" })?;
        if !vt.is_finite() {
            return Err(Error::NonFinite { stage: "auxiliary refresh" });
        }
        v_tilde.push(vt);
    }
    Ok((v_tilde, u_new))
}

/// Inverse of [`refresh`]: from `(x, ṽ, u_v')` back to `(v, u_v)`.
pub(crate) fn unrefresh(
    kernel: &InvolutiveKernel,
    x: &[f64],
    v_tilde: &[f64],
    u_v_new: &[f64],
    theta_v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rho = kernel.conditional(x);
    let mut v = Vec::with_capacity(v_tilde.len());
    let mut u_v = Vec::with_capacity(v_tilde.len());
    for i in 0..v_tilde.len() {
        let vi = rho
            .quantile(i, clamp_open_unit(u_v_new[i]))
            .map_err(|_| Error::NonFinite { stage: "inverse auxiliary refresh" })?;
        v.push(vi);
        let shifted = clamp_open_unit(rho.cdf(i, v_tilde[i]));
        u_v.push(mod1_unshift(shifted, theta_v[i]));
    }
    Ok((v, u_v))
}

/// One forward IRF step, `f_θ(s)`.
pub fn irf_forward(kernel: &InvolutiveKernel, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState> {
    irf_forward_traced(kernel, s, theta).map(|(out, _)| out)
}

/// [`irf_forward`] plus the branch it took.
pub fn irf_forward_traced(
    kernel: &InvolutiveKernel,
    s: &AugmentedState,
    theta: &IrfParam,
) -> Result<(AugmentedState, BranchInfo)> {
    check_state(kernel, s, theta)?;
    let u_a = mod1_shift(s.u_a, theta.theta_a);
    let (v_tilde, u_v_new) = refresh(kernel, &s.x, &s.v, &s.u_v, &theta.theta_v)?;
    let prop = kernel.propose(&s.x, &v_tilde);
    let log_u = u_a.ln();
    // ties go to acceptance
    if !prop.diverged() && log_u <= prop.log_ratio {
        let out = AugmentedState { x: prop.x, v: prop.v, u_v: u_v_new, u_a: (log_u - prop.log_ratio).exp() };
        Ok((out, BranchInfo { accepted: true, log_ratio: prop.log_ratio }))
    } else {
        let out = AugmentedState { x: s.x.clone(), v: v_tilde, u_v: u_v_new, u_a };
        Ok((out, BranchInfo { accepted: false, log_ratio: prop.log_ratio }))
    }
}

/// Exact inverse of [`irf_forward`], `f_θ⁻¹(s#)`.
pub fn irf_inverse(kernel: &InvolutiveKernel, s: &AugmentedState, theta: &IrfParam) -> Result<AugmentedState> {
    check_state(kernel, s, theta)?;
    let prop = kernel.propose(&s.x, &s.v);
    // ln r̃ = ln γ̄(s#) − ln γ̄(g(s#)) + ln J_g(g(s#)) = −(ratio computed at s#)
    let log_r_tilde = -prop.log_ratio;
    let log_u = s.u_a.ln() + log_r_tilde;
    let (x, v_tilde, u_a) = if log_r_tilde < f64::INFINITY && log_u <= 0.0 {
        (prop.x, prop.v, log_u.exp())
    } else {
        (s.x.clone(), s.v.clone(), s.u_a)
    };
    let (v, u_v) = unrefresh(kernel, &x, &v_tilde, &s.u_v, &theta.theta_v)?;
    Ok(AugmentedState { x, v, u_v, u_a: mod1_unshift(u_a, theta.theta_a) })
}

/// `f_{θ_to} ∘ ⋯ ∘ f_{θ_from}(s)`.
pub fn forward_orbit<M: AugmentedMap + ?Sized>(
    map: &M,
    s: &AugmentedState,
    schedule: Schedule<'_>,
    t_from: usize,
    t_to: usize,
) -> Result<AugmentedState> {
    if t_from == 0 || t_from > t_to + 1 {
        return Err(Error::Domain(format!("invalid step range {t_from}..={t_to}")));
    }
    schedule.check_len(t_to)?;
    let mut cur = s.clone();
    for t in t_from..=t_to {
        cur = map.forward(&cur, schedule.at(t))?;
    }
    Ok(cur)
}

/// Forward orbit recording the branch of each step (kernel maps only).
pub fn forward_orbit_traced(
    kernel: &InvolutiveKernel,
    s: &AugmentedState,
    schedule: Schedule<'_>,
    t_from: usize,
    t_to: usize,
) -> Result<(AugmentedState, BranchTrace)> {
    schedule.check_len(t_to)?;
    let mut cur = s.clone();
    let mut trace = BranchTrace::default();
    for t in t_from..=t_to {
        let (next, info) = irf_forward_traced(kernel, &cur, schedule.at(t))?;
        trace.steps.push(info);
        cur = next;
    }
    Ok((cur, trace))
}

/// `f_{θ_from}⁻¹ ∘ ⋯ ∘ f_{θ_to}⁻¹(s)`, the inverse of [`forward_orbit`].
pub fn inverse_orbit<M: AugmentedMap + ?Sized>(
    map: &M,
    s: &AugmentedState,
    schedule: Schedule<'_>,
    t_from: usize,
    t_to: usize,
) -> Result<AugmentedState> {
    if t_from == 0 || t_from > t_to + 1 {
        return Err(Error::Domain(format!("invalid step range {t_from}..={t_to}")));
    }
    schedule.check_len(t_to)?;
    let mut cur = s.clone();
    for t in (t_from..=t_to).rev() {
        cur = map.inverse(&cur, schedule.at(t))?;
    }
    Ok(cur)
}

/// `ln (q̄₀/γ̄)` along the backward process `f_{θ₁}⁻¹ ∘ ⋯ ∘ f_{θ_t}⁻¹(s)`,
/// `t = 1..=T`. Each term is an independent orbit, evaluated in parallel;
/// the result is identical to [`backward_process_serial`].
pub fn backward_process<M: AugmentedMap + ?Sized>(
    map: &M,
    reference: &AugmentedReference,
    s: &AugmentedState,
    schedule: Schedule<'_>,
    length: usize,
) -> Result<Vec<f64>> {
    schedule.check_len(length)?;
    (1..=length)
        .into_par_iter()
        .map(|t| reference.log_ratio(&inverse_orbit(map, s, schedule, 1, t)?))
        .collect()
}

/// Single-threaded [`backward_process`]; `O(T²)` map applications.
pub fn backward_process_serial<M: AugmentedMap + ?Sized>(
    map: &M,
    reference: &AugmentedReference,
    s: &AugmentedState,
    schedule: Schedule<'_>,
    length: usize,
) -> Result<Vec<f64>> {
    schedule.check_len(length)?;
    (1..=length)
        .map(|t| reference.log_ratio(&inverse_orbit(map, s, schedule, 1, t)?))
        .collect()
}

/// `ln (q̄₀/γ̄)` after each of `f_{θ₁}⁻¹`, then `f_{θ₂}⁻¹`, … applied
/// sequentially (`O(T)`). With a fixed schedule this is the inverse orbit
/// `f^{-t}(s)` of a homogeneous map.
pub fn inverse_orbit_ratios<M: AugmentedMap + ?Sized>(
    map: &M,
    reference: &AugmentedReference,
    s: &AugmentedState,
    schedule: Schedule<'_>,
    length: usize,
) -> Result<Vec<f64>> {
    schedule.check_len(length)?;
    let mut cur = s.clone();
    let mut out = Vec::with_capacity(length);
    for t in 1..=length {
        cur = map.inverse(&cur, schedule.at(t))?;
        out.push(reference.log_ratio(&cur)?);
    }
    Ok(out)
}

/// Analytic `ln |det ∇f_θ(s)|` of one forward step, from the branch taken:
/// the refresh contributes `ln ρ(v|x) − ln ρ(ṽ|x)`; an accepted step adds
/// `ln J_g(x, ṽ) − ln r` from the involution and the `u_a / r` rescaling.
pub fn irf_forward_log_jacobian(kernel: &InvolutiveKernel, s: &AugmentedState, theta: &IrfParam) -> Result<f64> {
    check_state(kernel, s, theta)?;
    let u_a = mod1_shift(s.u_a, theta.theta_a);
    let (v_tilde, _) = refresh(kernel, &s.x, &s.v, &s.u_v, &theta.theta_v)?;
    let rho = kernel.conditional(&s.x);
    let mut lj = rho.log_pdf(&s.v) - rho.log_pdf(&v_tilde);
    let prop = kernel.propose(&s.x, &v_tilde);
    if !prop.diverged() && u_a.ln() <= prop.log_ratio {
        lj += kernel.log_abs_jacobian(&s.x, &v_tilde) - prop.log_ratio;
    }
    Ok(lj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{hmc_kernel, rwmh_kernel};
    use crate::numerics::{normal_cdf, normal_pdf};
    use crate::reference::MeanFieldGaussian;
    use crate::targets::{banana, DiagGaussian, Target};
    use std::sync::Arc;

    fn std_normal_1d() -> Arc<dyn Target> {
        Arc::new(DiagGaussian::standard(1))
    }

    // Step-by-step scalar evaluation of the forward map for the 1-D
    // standard normal with RWMH; quantile by bisection on Φ.
    fn scalar_forward(eps: f64, s: [f64; 4], theta: [f64; 2]) -> [f64; 4] {
        let [x, v, uv, ua] = s;
        let uv = (uv + theta[0]) % 1.0;
        let ua = (ua + theta[1]) % 1.0;
        let uv_new = normal_cdf(v);
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < uv {
                lo = mid
            } else {
                hi = mid
            }
        }
        let vt = 0.5 * (lo + hi);
        let (xp, vp) = (x + eps * vt, -vt);
        let r = (normal_pdf(xp) * normal_pdf(vp)) / (normal_pdf(x) * normal_pdf(vt));
        if ua > r {
            [x, vt, uv_new, ua]
        } else {
            [xp, vp, uv_new, ua / r]
        }
    }

    #[test]
    fn worked_example_forward_and_inverse() {
        let k = rwmh_kernel(std_normal_1d(), 0.3).unwrap();
        let s = AugmentedState { x: vec![0.0], v: vec![0.5], u_v: vec![0.3], u_a: 0.2 };
        let theta = IrfParam::new(vec![0.25], 0.5).unwrap();
        // mpmath at 40 digits: accept branch
        let expect = [
            0.037_698_404_056_522_21,
            -0.125_661_346_855_074_03,
            0.691_462_461_274_013_1,
            0.700_497_586_151_592_4,
        ];
        let scalar = scalar_forward(0.3, [0.0, 0.5, 0.3, 0.2], [0.25, 0.5]);
        let (out, info) = irf_forward_traced(&k, &s, &theta).unwrap();
        assert!(info.accepted);
        let flat = out.to_flat();
        for i in 0..4 {
            assert!((flat[i] - expect[i]).abs() < 1e-14, "component {i}: {} vs {}", flat[i], expect[i]);
            assert!((scalar[i] - expect[i]).abs() < 1e-12);
        }
        let back = irf_inverse(&k, &out, &theta).unwrap();
        assert!(back.distance(&s) < 1e-12);
    }

    #[test]
    fn rejection_keeps_position() {
        // θ = 0 and v already at the quantile of the shifted u_v; u_a close
        // to 1 with a proposal that lowers the density forces rejection.
        let k = rwmh_kernel(std_normal_1d(), 0.3).unwrap();
        let u_v = 0.9;
        let v = crate::numerics::normal_quantile(u_v).unwrap();
        let s = AugmentedState { x: vec![2.0], v: vec![v], u_v: vec![u_v], u_a: 0.999 };
        let theta = IrfParam::new(vec![0.0], 0.0).unwrap();
        let (out, info) = irf_forward_traced(&k, &s, &theta).unwrap();
        assert!(!info.accepted);
        assert_eq!(out.x, vec![2.0]);
        assert!((out.v[0] - v).abs() < 1e-12);
        assert_eq!(out.u_a, 0.999);
        assert!(irf_inverse(&k, &out, &theta).unwrap().distance(&s) < 1e-12);
    }

    fn reference_for(k: &InvolutiveKernel) -> AugmentedReference {
        AugmentedReference::new(MeanFieldGaussian::new(vec![0.0, -5.0], vec![2.0, 1.5]), k.clone())
    }

    #[test]
    fn single_step_round_trips_on_banana() {
        let k = rwmh_kernel(banana(), 0.3).unwrap();
        let r = reference_for(&k);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let s = r.sample(&mut rng);
            let theta = IrfParam::sample(2, &mut rng);
            let back = irf_inverse(&k, &irf_forward(&k, &s, &theta).unwrap(), &theta).unwrap();
            assert!(back.distance(&s) < 1e-10, "{}", back.distance(&s));
        }
    }

    #[test]
    fn orbit_round_trips_from_stationary_starts() {
        // Starting far in the tails makes r huge and u_a / r underflows the
        // next mod-1 shift, so long orbits only invert exactly near the target.
        let t = banana();
        let k = rwmh_kernel(t.clone(), 0.3).unwrap();
        let r = reference_for(&k);
        let stream = FrozenStream::new(4, 200, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut s = r.sample(&mut rng);
            s.x = t.sample_exact(&mut rng).unwrap();
            let fwd = forward_orbit(&k, &s, Schedule::stream(&stream), 1, 200).unwrap();
            let back = inverse_orbit(&k, &fwd, Schedule::stream(&stream), 1, 200).unwrap();
            assert!(back.distance(&s) < 1e-9, "{}", back.distance(&s));
        }
    }

    #[test]
    fn single_step_orbit_is_forward() {
        let k = hmc_kernel(banana(), 0.02, 50).unwrap();
        let r = reference_for(&k);
        let stream = FrozenStream::new(9, 3, 1, 2);
        let s = r.sample(&mut ChaCha8Rng::seed_from_u64(2));
        let a = forward_orbit(&k, &s, Schedule::stream(&stream), 1, 1).unwrap();
        let b = irf_forward(&k, &s, stream.param(0, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_stream_is_reproducible() {
        let a = FrozenStream::new(17, 10, 3, 2);
        let b = FrozenStream::new(17, 10, 3, 2);
        assert_eq!(a.param(2, 7), b.param(2, 7));
        assert_ne!(a.param(0, 1), a.param(1, 1));
        for m in 0..3 {
            for p in a.stream(m) {
                assert!(p.theta_v.iter().chain([&p.theta_a]).all(|t| (0.0..1.0).contains(t)));
            }
        }
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"seed":17,"length":10,"streams":3,"dim":2}"#);
        let c: FrozenStream = serde_json::from_str(&json).unwrap();
        assert_eq!(c.param(1, 10), a.param(1, 10));
    }

    #[test]
    fn backward_process_parallel_matches_serial() {
        let k = rwmh_kernel(banana(), 0.3).unwrap();
        let r = reference_for(&k);
        let stream = FrozenStream::new(3, 40, 1, 2);
        let s = r.sample(&mut ChaCha8Rng::seed_from_u64(5));
        let par = backward_process(&k, &r, &s, Schedule::stream(&stream), 40).unwrap();
        let ser = backward_process_serial(&k, &r, &s, Schedule::stream(&stream), 40).unwrap();
        assert_eq!(par.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), ser.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let seq = inverse_orbit_ratios(&k, &r, &s, Schedule::stream(&stream), 40).unwrap();
        assert_eq!(par[0], seq[0]);
        let one = r.log_ratio(&irf_inverse(&k, &s, stream.param(0, 1)).unwrap()).unwrap();
        assert_eq!(par[0], one);
    }

    #[test]
    fn ratios_vanish_when_reference_is_target() {
        let t: Arc<dyn Target> = Arc::new(DiagGaussian { mean: vec![0.5, -1.0], sd: vec![1.5, 0.7] });
        let k = rwmh_kernel(t, 0.3).unwrap();
        let r = AugmentedReference::new(
            MeanFieldGaussian::new(vec![0.5, -1.0], vec![1.5f64.ln(), 0.7f64.ln()]),
            k.clone(),
        );
        let theta = IrfParam::homogeneous_default(2);
        let s = r.sample(&mut ChaCha8Rng::seed_from_u64(6));
        for l in inverse_orbit_ratios(&k, &r, &s, Schedule::Fixed(&theta), 30).unwrap() {
            assert!(l.abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_default_values() {
        let p = IrfParam::homogeneous_default(2);
        assert_eq!(p.theta_v, vec![std::f64::consts::PI / 8.0; 2]);
        assert_eq!(p.theta_a, std::f64::consts::PI / 7.0);
        assert!(IrfParam::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn stream_too_short_is_an_error() {
        let k = rwmh_kernel(banana(), 0.3).unwrap();
        let r = reference_for(&k);
        let stream = FrozenStream::new(3, 5, 1, 2);
        let s = r.sample(&mut ChaCha8Rng::seed_from_u64(5));
        assert!(forward_orbit(&k, &s, Schedule::stream(&stream), 1, 6).is_err());
        assert!(backward_process(&k, &r, &s, Schedule::stream(&stream), 6).is_err());
    }

    #[test]
    fn acceptance_rate_trace() {
        let k = rwmh_kernel(banana(), 0.3).unwrap();
        let r = reference_for(&k);
        let stream = FrozenStream::new(1, 500, 1, 2);
        let s = r.sample(&mut ChaCha8Rng::seed_from_u64(8));
        let (_, trace) = forward_orbit_traced(&k, &s, Schedule::stream(&stream), 1, 500).unwrap();
        assert_eq!(trace.steps.len(), 500);
        let rate = trace.acceptance_rate();
        assert!(rate > 0.3 && rate <= 1.0, "{rate}");
    }
}
