//! Evaluation metrics: ELBO, importance-sampling `ln Z`, per-sample IS
//! ESS, histogram TV to a 2-D target, autocorrelation ESS, inversion-error
//! curves and running means.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flows::{flow_log_density, flow_samples, FlowSpec};
use crate::irf::{forward_orbit, inverse_orbit, irf_inverse, AugmentedMap, AugmentedState, IrfParam, Schedule};
use crate::kernels::{mcmc_step, InvolutiveKernel};
use crate::numerics::{log_mean_exp, log_sum_exp};
use crate::reference::AugmentedReference;
use crate::targets::{cell_probabilities, Grid2D, Target};

/// Log importance weights `ln γ̄ − ln q` at flow samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    log_w: Vec<f64>,
}

impl WeightSet {
    /// Entries must be finite or `-inf`, and at least one finite.
    pub fn new(log_w: Vec<f64>) -> Result<Self> {
        if log_w.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::NonFinite { stage: "importance weights" });
        }
        if !log_w.iter().any(|w| w.is_finite()) {
            return Err(Error::ZeroDensity);
        }
        Ok(WeightSet { log_w })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    /// `(1/N) Σ ln wₙ` and its standard error.
    pub fn elbo(&self) -> (f64, f64) {
        mean_se(&self.log_w)
    }

    /// `ln (1/N) Σ wₙ`, with the delta-method SE `sd(w) / (√N · mean(w))`.
    pub fn log_z(&self) -> (f64, f64) {
        let lz = log_mean_exp(&self.log_w);
        let rel: Vec<f64> = self.log_w.iter().map(|l| (l - lz).exp()).collect();
        let (_, se) = mean_se(&rel);
        (lz, se)
    }

    /// `(Σw)² / (N Σw²)`.
    pub fn ess_per_sample(&self) -> f64 {
        let doubled: Vec<f64> = self.log_w.iter().map(|l| 2.0 * l).collect();
        (2.0 * log_sum_exp(&self.log_w) - log_sum_exp(&doubled)).exp() / self.len() as f64
    }
}

/// Sample mean and its standard error; `-inf` entries propagate.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if !m.is_finite() || xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `(Σw)² / (N Σw²)` for a weight set.
pub fn ess_per_sample(weights: &WeightSet) -> f64 {
    weights.ess_per_sample()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub se: f64,
    pub n: usize,
    pub seed: u64,
    pub flow: String,
}

/// Draws `n` flow samples and returns their log weights. Draw failures are
/// errors: an estimator cannot silently drop samples.
pub fn flow_log_weights(spec: &FlowSpec, n: usize, seed: u64) -> Result<WeightSet> {
    let samples = flow_samples(spec, n, seed);
    let log_w = samples
        .into_par_iter()
        .map(|s| {
            let s = s?;
            let lq = flow_log_density(spec, &s)?;
            Ok(spec.kernel().log_joint(&s.x, &s.v) - lq)
        })
        .collect::<Result<Vec<f64>>>()?;
    WeightSet::new(log_w)
}

fn report(metric: &str, spec: &FlowSpec, (value, se): (f64, f64), n: usize, seed: u64) -> MetricReport {
    MetricReport { metric: metric.into(), value, se, n, seed, flow: spec.family.to_string() }
}

/// `(1/N) Σ [ln γ̄ − ln q](Sₙ)`, `Sₙ ~ q`.
pub fn elbo(spec: &FlowSpec, n: usize, seed: u64) -> Result<MetricReport> {
    check_n(n)?;
    let w = flow_log_weights(spec, n, seed)?;
    Ok(report("elbo", spec, w.elbo(), n, seed))
}

/// Importance-sampling estimate of `ln Z`.
pub fn log_z_is(spec: &FlowSpec, n: usize, seed: u64) -> Result<MetricReport> {
    check_n(n)?;
    let w = flow_log_weights(spec, n, seed)?;
    Ok(report("log_z", spec, w.log_z(), n, seed))
}

/// ELBO, `ln Ẑ` and ESS/N from one set of weights.
pub fn weight_metrics(spec: &FlowSpec, n: usize, seed: u64) -> Result<[MetricReport; 3]> {
    check_n(n)?;
    let w = flow_log_weights(spec, n, seed)?;
    Ok([
        report("elbo", spec, w.elbo(), n, seed),
        report("log_z", spec, w.log_z(), n, seed),
        report("ess", spec, (w.ess_per_sample(), f64::NAN), n, seed),
    ])
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain("estimators need N >= 2".into()));
    }
    Ok(())
}

/// Joint-space TV `½ E_q |1 − π̄/q̄| = E_q (1 − π̄/q̄)₊` from exact flow
/// densities, for a target with known `ln Z`.
pub fn joint_tv_is(weights: &WeightSet, log_z: f64) -> (f64, f64) {
    let terms: Vec<f64> = weights.log_w.iter().map(|l| (1.0 - (l - log_z).exp()).max(0.0)).collect();
    mean_se(&terms)
}

/// Minimum target mass a TV grid must hold.
pub const TV_COVERAGE: f64 = 0.99;

/// Bins per axis for `n` samples: `round(n^{1/4})`, at least 2.
pub fn tv_bins(n: usize) -> usize {
    ((n as f64).powf(0.25).round() as usize).max(2)
}

/// The TV grid for `target` at sample size `n`: `tv_bins(n)` bins per axis
/// over the `[0.001, 0.999]` quantile box of exact draws.
pub fn tv_grid(target: &dyn Target, n: usize) -> Result<Grid2D> {
    Grid2D::quantile_box(target, tv_bins(n), 0.001, 0.999, 200_000, 0x5eed)
}

/// Target cell probabilities on `grid`, checked against [`TV_COVERAGE`]
/// and renormalized to sum to one over the grid.
pub fn target_cell_probabilities(target: &dyn Target, grid: &Grid2D) -> Result<Vec<f64>> {
    let mut p = cell_probabilities(target, grid, 8)?;
    let covered: f64 = p.iter().sum();
    if !(covered >= TV_COVERAGE) {
        return Err(Error::Coverage { covered, required: TV_COVERAGE });
    }
    p.iter_mut().for_each(|c| *c /= covered);
    Ok(p)
}

/// `½ Σ |p̂(bin) − p(bin)| + ½ · (sample mass outside the grid)` on the
/// x-marginal. `None` and non-finite points count as outside.
pub fn tv_to_target(samples: &[Option<Vec<f64>>], target: &dyn Target, grid: &Grid2D) -> Result<f64> {
    let p = target_cell_probabilities(target, grid)?;
    tv_with_probabilities(samples, grid, &p)
}

/// [`tv_to_target`] with precomputed cell probabilities.
pub fn tv_with_probabilities(samples: &[Option<Vec<f64>>], grid: &Grid2D, p: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("TV needs samples".into()));
    }
    let mut counts = vec![0usize; grid.n_cells()];
    let mut outside = 0usize;
    for s in samples {
        match s.as_deref().and_then(|x| grid.locate(x)) {
            Some(c) => counts[c] += 1,
            None => outside += 1,
        }
    }
    let n = samples.len() as f64;
    let inside: f64 = counts.iter().zip(p).map(|(&c, &pi)| (c as f64 / n - pi).abs()).sum();
    Ok(0.5 * inside + 0.5 * outside as f64 / n)
}

/// 1-D histogram TV against a distribution given by its CDF, on `bins`
/// equal cells over `[lo, hi]`; sample and reference mass outside are
/// treated as one extra cell.
pub fn tv_1d(samples: &[f64], cdf: impl Fn(f64) -> f64, lo: f64, hi: f64, bins: usize) -> f64 {
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &x in samples {
        let f = (x - lo) / w;
        if f >= 0.0 && f < bins as f64 {
            counts[f as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let n = samples.len() as f64;
    let mut tv = 0.0;
    let mut inside_mass = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let p = cdf(lo + (b + 1) as f64 * w) - cdf(lo + b as f64 * w);
        inside_mass += p;
        tv += (c as f64 / n - p).abs();
    }
    tv += (outside as f64 / n - (1.0 - inside_mass)).abs();
    0.5 * tv
}

/// Per-sample autocorrelation ESS with Geyer's initial positive sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcEss {
    pub fraction: f64,
    /// The series was constant; `fraction` is reported as 1.
    pub degenerate: bool,
}

pub fn mcmc_ess(series: &[f64]) -> Result<McmcEss> {
    let n = series.len();
    if n < 100 {
        return Err(Error::Domain(format!("ESS needs at least 100 points, got {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Ok(McmcEss { fraction: 1.0, degenerate: true });
    }
    let rho = |k: usize| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0;
    // Γ_m = ρ_{2m} + ρ_{2m+1}, summed while positive
    let mut sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = rho(2 * m) + rho(2 * m + 1);
        if gamma <= 0.0 {
            break;
        }
        sum += gamma;
        m += 1;
    }
    // τ = −1 + 2 Σ Γ_m
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Ok(McmcEss { fraction: (1.0 / tau).min(1.0), degenerate: false })
}

/// Reconstruction error `‖f⁻ᵀ(fᵀ(s)) − s‖₂` at each requested `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversionErrorRow {
    pub t: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
}

/// Per-`T` errors over `n_starts` reference draws, one orbit per start,
/// stream `0` of `stream`. Failed or non-finite reconstructions count as
/// `+inf`.
pub fn inversion_errors<M: AugmentedMap + ?Sized>(
    map: &M,
    reference: &AugmentedReference,
    schedule: Schedule<'_>,
    ts: &[usize],
    n_starts: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n_starts < 2 {
        return Err(Error::Domain("inversion curves need at least two starts".into()));
    }
    let per_start: Vec<Vec<f64>> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let s = reference.sample(&mut rng);
            let mut out = Vec::with_capacity(ts.len());
            let mut cur = Ok(s.clone());
            let mut at = 0;
            for &t in ts {
                cur = cur.and_then(|c| {
                    if t > at {
                        forward_orbit(map, &c, schedule, at + 1, t)
                    } else {
                        Ok(c)
                    }
                });
                at = t;
                let err = cur
                    .as_ref()
                    .ok()
                    .and_then(|f| inverse_orbit(map, f, schedule, 1, t).ok())
                    .map(|b| b.distance(&s))
                    .filter(|e| e.is_finite())
                    .unwrap_or(f64::INFINITY);
                out.push(err);
            }
            out
        })
        .collect();
    Ok((0..ts.len()).map(|j| per_start.iter().map(|e| e[j]).collect()).collect())
}

pub fn inversion_error_curve<M: AugmentedMap + ?Sized>(
    map: &M,
    reference: &AugmentedReference,
    schedule: Schedule<'_>,
    ts: &[usize],
    n_starts: usize,
    seed: u64,
) -> Result<Vec<InversionErrorRow>> {
    let errs = inversion_errors(map, reference, schedule, ts, n_starts, seed)?;
    Ok(ts
        .iter()
        .zip(errs)
        .map(|(&t, e)| {
            let (mean, se) = mean_se(&e);
            InversionErrorRow { t, mean, sd: se * (e.len() as f64).sqrt(), median: median(&e) }
        })
        .collect())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A scalar test function on augmented states.
pub type TestFn<'a> = Box<dyn Fn(&AugmentedState) -> f64 + Sync + 'a>;

/// Per-function values along one trajectory and their cumulative means.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub values: Vec<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
}

/// Traces of each test function along four dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMeans {
    /// `f_{θ_t}⁻¹ ∘ ⋯ ∘ f_{θ₁}⁻¹(s)`, composed sequentially.
    pub inverse_irf: Trace,
    /// `f_{θ₁}⁻¹ ∘ ⋯ ∘ f_{θ_t}⁻¹(s)`.
    pub backward: Trace,
    /// `f_{θ*}^t(s)`.
    pub homogeneous: Trace,
    /// The accept/reject chain started at `x`.
    pub mcmc: Trace,
}

fn cumulative(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            acc += v;
            acc / (i + 1) as f64
        })
        .collect()
}

/// Traces of length `t` for each function in `fns`, from one reference draw.
/// The backward process costs `O(t²)` map applications and runs in parallel
/// over `t`.
pub fn running_means(
    kernel: &InvolutiveKernel,
    reference: &AugmentedReference,
    stream: Schedule<'_>,
    theta: &IrfParam,
    t: usize,
    fns: &[TestFn<'_>],
    rng: &mut dyn RngCore,
) -> Result<RunningMeans> {
    let s = reference.sample(rng);

    let mut inv = Vec::with_capacity(t);
    let mut cur = s.clone();
    for j in 1..=t {
        cur = irf_inverse(kernel, &cur, stream.at(j))?;
        inv.push(cur.clone());
    }

    let backward: Vec<AugmentedState> =
        (1..=t).into_par_iter().map(|j| inverse_orbit(kernel, &s, stream, 1, j)).collect::<Result<_>>()?;

    let mut hom = Vec::with_capacity(t);
    let mut cur = s.clone();
    for _ in 0..t {
        cur = crate::irf::irf_forward(kernel, &cur, theta)?;
        hom.push(cur.clone());
    }

    let mut chain = Vec::with_capacity(t);
    let mut x = s.x.clone();
    for _ in 0..t {
        x = mcmc_step(kernel, &x, rng).0;
        let v = vec![0.0; x.len()];
        chain.push(AugmentedState { x: x.clone(), v, u_v: s.u_v.clone(), u_a: s.u_a });
    }

    let trace = |states: &[AugmentedState]| -> Trace {
        let values: Vec<Vec<f64>> = fns.iter().map(|f| states.iter().map(|st| f(st)).collect()).collect();
        let means = values.iter().map(|v| cumulative(v)).collect();
        Trace { values, means }
    };
    Ok(RunningMeans {
        inverse_irf: trace(&inv),
        backward: trace(&backward),
        homogeneous: trace(&hom),
        mcmc: trace(&chain),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::rwmh_kernel;
    use crate::numerics::normal_cdf;
    use crate::reference::MeanFieldGaussian;
    use crate::targets::{banana, cross, Banana, DiagGaussian};
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    #[test]
    fn ess_hand_cases() {
        let eq = WeightSet::new(vec![0.3; 10]).unwrap();
        assert!((eq.ess_per_sample() - 1.0).abs() < 1e-15);
        let one = WeightSet::new(vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
        assert!((one.ess_per_sample() - 0.25).abs() < 1e-15);
        let w = WeightSet::new(vec![0.0, 0.0, 2f64.ln()]).unwrap();
        assert!((w.ess_per_sample() - 16.0 / 18.0).abs() < 1e-15);
        let shifted = WeightSet::new(vec![700.0, 700.0, 700.0 + 2f64.ln()]).unwrap();
        assert!((shifted.ess_per_sample() - w.ess_per_sample()).abs() < 1e-13);
        assert!(WeightSet::new(vec![f64::NEG_INFINITY; 3]).is_err());
        assert!(WeightSet::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn joint_tv_cases() {
        let exact = WeightSet::new(vec![0.0; 8]).unwrap();
        assert_eq!(joint_tv_is(&exact, 0.0).0, 0.0);
        // q = N(0,1), π = N(1,1): E_q (1 − π/q)₊ = 2Φ(½) − 1
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let lw: Vec<f64> = (0..200_000)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                x - 0.5
            })
            .collect();
        let (tv, se) = joint_tv_is(&WeightSet::new(lw).unwrap(), 0.0);
        assert!((tv - 0.382_924_922_548_026_2).abs() < 4.0 * se, "{tv} ± {se}");
    }

    #[test]
    fn constant_weights_give_exact_log_z() {
        let w = WeightSet::new(vec![0.0; 64]).unwrap();
        assert_eq!(w.log_z().0, 0.0);
        assert_eq!(w.elbo().0, 0.0);
        let c = WeightSet::new(vec![1.25; 64]).unwrap();
        assert_eq!(c.log_z().0, 1.25);
    }

    #[test]
    fn exact_reference_rig_has_zero_elbo_and_unit_ess() {
        let t: Arc<dyn Target> = Arc::new(DiagGaussian { mean: vec![0.5, 1.0], sd: vec![1.2, 0.4] });
        let k = rwmh_kernel(t, 0.3).unwrap();
        let r = AugmentedReference::new(MeanFieldGaussian::new(vec![0.5, 1.0], vec![1.2f64.ln(), 0.4f64.ln()]), k);
        let spec = FlowSpec::irf(r, 10, 3);
        let [e, z, ess] = weight_metrics(&spec, 64, 5).unwrap();
        assert!(e.value.abs() < 1e-10);
        assert!(z.value.abs() < 1e-10);
        assert!((ess.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn elbo_respects_jensen() {
        let k = rwmh_kernel(banana(), 0.3).unwrap();
        let r = AugmentedReference::new(MeanFieldGaussian::new(vec![0.0, -8.0], vec![2.0, 1.0]), k);
        let spec = FlowSpec::irf(r, 5, 3);
        let e = elbo(&spec, 256, 9).unwrap();
        assert!(e.value <= 3.0 * e.se, "{e:?}");
    }

    #[test]
    fn tv_of_shifted_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let tv = tv_1d(&xs, |x| normal_cdf(x - 1.0), -6.0, 7.0, 60);
        assert!((tv - 0.382_924_922_548_026_2).abs() < 0.02, "{tv}");
    }

    #[test]
    fn tv_of_exact_samples_is_small_on_fine_grid() {
        let t = banana();
        let grid = Grid2D::quantile_box(t.as_ref(), 50, 0.001, 0.999, 200_000, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Option<Vec<f64>>> = (0..100_000).map(|_| t.sample_exact(&mut rng)).collect();
        let tv = tv_to_target(&xs, t.as_ref(), &grid).unwrap();
        assert!(tv < 0.05, "{tv}");
    }

    #[test]
    fn tv_of_disjoint_support_is_one() {
        let t = banana();
        let grid = tv_grid(t.as_ref(), 512).unwrap();
        let xs = vec![Some(vec![1e6, 1e6]); 200];
        assert!((tv_to_target(&xs, t.as_ref(), &grid).unwrap() - 1.0).abs() < 1e-12);
        let nans = vec![None; 200];
        assert!((tv_to_target(&nans, t.as_ref(), &grid).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_roles_swap_on_banana() {
        // P = banana(b = 0.1), Q = banana(b = 0.11): samples of one against
        // cell masses of the other, both ways round.
        let p = Banana::default();
        let q = Banana { b: 0.11 };
        let grid = Grid2D::quantile_box(&p, 50, 0.0005, 0.9995, 200_000, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xp: Vec<Option<Vec<f64>>> = (0..100_000).map(|_| p.sample_exact(&mut rng)).collect();
        let xq: Vec<Option<Vec<f64>>> = (0..100_000).map(|_| q.sample_exact(&mut rng)).collect();
        let pq = tv_to_target(&xp, &q, &grid).unwrap();
        let qp = tv_to_target(&xq, &p, &grid).unwrap();
        assert!(pq > 0.05 && (pq - qp).abs() < 0.03, "{pq} vs {qp}");
    }

    #[test]
    fn mcmc_ess_iid_and_ar1() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let e = mcmc_ess(&iid).unwrap();
        assert!((e.fraction - 1.0).abs() < 0.15, "{e:?}");
        let mut x = 0.0;
        let ar: Vec<f64> = (0..100_000)
            .map(|_| {
                x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let e = mcmc_ess(&ar).unwrap();
        assert!((e.fraction - 0.052_631_578_947_368_42).abs() < 0.01, "{e:?}");
        let flat = mcmc_ess(&[2.0; 200]).unwrap();
        assert!(flat.degenerate && flat.fraction == 1.0);
        assert!(mcmc_ess(&[1.0; 10]).is_err());
    }

    #[test]
    fn single_round_trip_error_is_tiny() {
        let k = rwmh_kernel(banana(), 0.3).unwrap();
        let r = AugmentedReference::new(MeanFieldGaussian::new(vec![0.0, -8.0], vec![2.0, 1.0]), k.clone());
        let stream = crate::irf::FrozenStream::new(1, 10, 1, 2);
        let rows = inversion_error_curve(&k, &r, Schedule::stream(&stream), &[1, 5, 10], 8, 2).unwrap();
        assert!(rows[0].median < 1e-12 && rows[0].mean < 1e-12);
        assert_eq!(rows.iter().map(|r| r.t).collect::<Vec<_>>(), vec![1, 5, 10]);
    }

    #[test]
    fn running_means_of_constant_and_of_x1() {
        let t = cross();
        let k = rwmh_kernel(t, 0.3).unwrap();
        let r = AugmentedReference::new(MeanFieldGaussian::new(vec![0.0, 0.0], vec![0.7, 0.7]), k.clone());
        let stream = crate::irf::FrozenStream::new(5, 400, 1, 2);
        let fns: Vec<TestFn> = vec![Box::new(|_| 1.0), Box::new(|s| s.x[0])];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rm = running_means(
            &k,
            &r,
            Schedule::stream(&stream),
            &IrfParam::homogeneous_default(2),
            400,
            &fns,
            &mut rng,
        )
        .unwrap();
        for tr in [&rm.inverse_irf, &rm.backward, &rm.homogeneous, &rm.mcmc] {
            assert_eq!(tr.means[0].len(), 400);
            assert!(tr.means[0].iter().all(|&v| v == 1.0));
            assert!(tr.means[1].iter().all(|v| v.is_finite()));
            assert_eq!(tr.values[1].len(), 400);
        }
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, 2.0]), 2.0);
    }
}
