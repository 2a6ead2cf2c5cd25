use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, KernelConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    inversion_errors, joint_tv_is, mcmc_ess, mean_se, median, running_means, tv_grid, tv_with_probabilities,
    target_cell_probabilities, weight_metrics, flow_log_weights, TestFn,
};
use crate::flows::{flow_samples, FlowFamily, FlowSpec, UncorrectedMap};
use crate::irf::{forward_orbit_traced, FrozenStream, IrfParam, Schedule};
use crate::kernels::InvolutiveKernel;
use crate::reference::{fit_advi, AugmentedReference, MeanFieldGaussian, ReferenceRecord};
use crate::targets::{self, Grid2D, Target};

/// `git describe` of the build, or the crate version outside a checkout.
pub const VERSION: &str = env!("IRF_MIXFLOW_VERSION");

/// Flow draws and frozen streams share a seed but must not share ChaCha
/// streams, so draws are offset by this constant.
const DRAW_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn draw_seed(seed: u64) -> u64 {
    seed ^ DRAW_SEED_OFFSET
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FitReference,
    Stability,
    TvSweep,
    Metrics,
    EnsembleSweep,
    Diagnostics,
    TuneStep,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::FitReference,
        Command::Stability,
        Command::TvSweep,
        Command::Metrics,
        Command::EnsembleSweep,
        Command::Diagnostics,
        Command::TuneStep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::FitReference => "fit-reference",
            Command::Stability => "stability",
            Command::TvSweep => "tv-sweep",
            Command::Metrics => "metrics",
            Command::EnsembleSweep => "ensemble-sweep",
            Command::Diagnostics => "diagnostics",
            Command::TuneStep => "tune-step",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

/// CSV rows before the provenance columns are appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub fields: Vec<String>,
    /// Seed column; `None` uses the config's seed label.
    pub seed: Option<u64>,
}

impl Row {
    fn new(fields: Vec<String>) -> Self {
        Row { fields, seed: None }
    }

    fn seeded(fields: Vec<String>, seed: u64) -> Self {
        Row { fields, seed: Some(seed) }
    }
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    /// Writes the table with `version`, `config_hash` and `seed` columns.
    pub fn write_csv<W: Write>(&self, cfg: &ExperimentConfig, out: W) -> Result<()> {
        let hash = cfg.hash();
        let label = cfg.seed_label();
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(self.header.iter().copied().chain(["version", "config_hash", "seed"])).map_err(io)?;
        for r in &self.rows {
            let seed = r.seed.map(|s| s.to_string()).unwrap_or_else(|| label.clone());
            w.write_record(r.fields.iter().map(String::as_str).chain([VERSION, hash.as_str(), seed.as_str()]))
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Table> {
    match cmd {
        Command::FitReference => fit_reference(cfg),
        Command::Stability => stability(cfg),
        Command::TvSweep => tv_sweep(cfg),
        Command::Metrics => metrics(cfg),
        Command::EnsembleSweep => ensemble_sweep(cfg),
        Command::Diagnostics => diagnostics(cfg),
        Command::TuneStep => tune(cfg),
    }
}

fn target(name: &str) -> Result<Arc<dyn Target>> {
    targets::by_name(name)
}

/// The reference of `name`: the stored record when one exists under
/// `reference.dir`, a fresh ADVI fit otherwise.
pub fn reference_for(cfg: &ExperimentConfig, name: &str, t: &dyn Target) -> Result<MeanFieldGaussian> {
    if let Some(path) = cfg.reference.record_path(name).filter(|p| p.exists()) {
        let rec = ReferenceRecord::load(&path)?;
        let advi = cfg.reference.advi();
        if rec.target != name || rec.steps != advi.steps || rec.batch != advi.batch || rec.lr != advi.lr {
            return Err(Error::Config(format!("{} was fitted with different settings", path.display())));
        }
        return Ok(rec.gaussian());
    }
    fit_advi(t, &cfg.reference.advi())
}

fn theta_star(cfg: &ExperimentConfig, d: usize) -> IrfParam {
    let def = IrfParam::homogeneous_default(d);
    IrfParam::constant(d, cfg.flow.theta_v.unwrap_or(def.theta_v[0]), cfg.flow.theta_a.unwrap_or(def.theta_a))
}

fn or_default<T: Clone>(v: &[T], default: &[T]) -> Vec<T> {
    if v.is_empty() {
        default.to_vec()
    } else {
        v.to_vec()
    }
}

pub fn fit_reference(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec!["target", "path", "mean", "log_sd", "steps", "elbo_batch"]);
    let dir = cfg.reference.dir.clone().unwrap_or_else(|| ".".into());
    std::fs::create_dir_all(&dir)?;
    for name in cfg.target_names() {
        let t = target(&name)?;
        let advi = cfg.reference.advi();
        let q = fit_advi(t.as_ref(), &advi)?;
        let path = dir.join(format!("{name}-seed{}.json", advi.seed));
        ReferenceRecord::new(&name, &q, &advi).save(&path)?;
        let join = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";");
        let mut rng = ChaCha8Rng::seed_from_u64(advi.seed);
        let noise: Vec<Vec<f64>> =
            (0..1000).map(|_| MeanFieldGaussian::standard(q.dim()).sample(&mut rng)).collect();
        let elbo = crate::reference::batch_elbo(t.as_ref(), &q, &noise);
        table.rows.push(Row::seeded(
            vec![name, path.display().to_string(), join(&q.mean), join(&q.log_sd), advi.steps.to_string(), num(elbo)],
            advi.seed,
        ));
    }
    Ok(table)
}

pub fn default_stability_kernels() -> Vec<KernelConfig> {
    vec![
        KernelConfig::hmc(0.02, 50),
        KernelConfig::hmc(0.02, 50).uncorrected(),
        KernelConfig::mala(0.25),
        KernelConfig::rwmh(0.3),
    ]
}

/// Inversion error `‖f⁻ᵀ(fᵀ(s)) − s‖` against `T`. Errors that are not
/// finite are counted in `n_nonfinite` and left out of the moments.
pub fn stability(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table =
        Table::new(vec!["target", "kernel", "T", "mean_err", "sd_err", "median_err", "max_err", "n_nonfinite"]);
    let lengths = cfg.stability.lengths.clone();
    let t_max = lengths.iter().copied().max().unwrap_or(0);
    for name in cfg.target_names() {
        let t = target(&name)?;
        let q = reference_for(cfg, &name, t.as_ref())?;
        for kc in cfg.kernels_or(default_stability_kernels()) {
            let k = kc.build(t.clone())?;
            let r = AugmentedReference::new(q.clone(), k.clone());
            let stream = FrozenStream::new(cfg.seed, t_max, 1, k.dim());
            let sched = Schedule::stream(&stream);
            let errs = if kc.corrected {
                inversion_errors(&k, &r, sched, &lengths, cfg.stability.starts, draw_seed(cfg.seed))?
            } else {
                inversion_errors(&UncorrectedMap(&k), &r, sched, &lengths, cfg.stability.starts, draw_seed(cfg.seed))?
            };
            for (&len, e) in lengths.iter().zip(errs) {
                let finite: Vec<f64> = e.iter().copied().filter(|x| x.is_finite()).collect();
                let (mean, sd) = moments(&finite);
                let max = finite.iter().copied().fold(f64::NAN, f64::max);
                table.rows.push(Row::seeded(
                    vec![
                        name.clone(),
                        kc.label(),
                        len.to_string(),
                        num(mean),
                        num(sd),
                        num(median(&e)),
                        num(max),
                        (e.len() - finite.len()).to_string(),
                    ],
                    cfg.seed,
                ));
            }
        }
    }
    Ok(table)
}

fn moments(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let (m, se) = mean_se(xs);
    (m, se * (xs.len() as f64).sqrt())
}

/// A TV grid and its renormalized target cell probabilities.
pub struct TvGrid {
    pub grid: Grid2D,
    pub probs: Vec<f64>,
}

impl TvGrid {
    pub fn new(t: &dyn Target, samples: usize, bins: Option<usize>) -> Result<Self> {
        let grid = match bins {
            Some(b) => Grid2D::quantile_box(t, b, 0.001, 0.999, 200_000, 0x5eed)?,
            None => tv_grid(t, samples)?,
        };
        let probs = target_cell_probabilities(t, &grid)?;
        Ok(TvGrid { grid, probs })
    }
}

/// One TV estimate from `n` draws of `spec`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvRun {
    pub tv: f64,
    /// Draws whose state failed or left the reals.
    pub nonfinite: usize,
}

/// x-marginal TV of `n` flow draws seeded by `seed`. Failed draws count as
/// mass outside the grid.
pub fn tv_run(spec: &FlowSpec, grid: &TvGrid, n: usize, seed: u64) -> Result<TvRun> {
    let mut nonfinite = 0;
    let mut xs: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    for d in flow_samples(spec, n, draw_seed(seed)) {
        match d {
            Ok(s) if s.is_finite() => xs.push(Some(s.x)),
            Ok(_) => {
                nonfinite += 1;
                xs.push(None);
            }
            Err(e) if e.is_numerical() => {
                nonfinite += 1;
                xs.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let tv = tv_with_probabilities(&xs, &grid.grid, &grid.probs)?;
    Ok(TvRun { tv, nonfinite })
}

/// Summary over seeds: mean, sd, median and the number of runs with any
/// non-finite draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub n_nan: usize,
}

pub fn summarize(runs: &[TvRun]) -> TvSummary {
    let tvs: Vec<f64> = runs.iter().map(|r| r.tv).collect();
    let (mean, sd) = moments(&tvs);
    TvSummary { mean, sd, median: median(&tvs), n_nan: runs.iter().filter(|r| r.nonfinite > 0).count() }
}

fn build_spec(
    cfg: &ExperimentConfig,
    family: FlowFamily,
    r: &AugmentedReference,
    length: usize,
    streams: usize,
    seed: u64,
) -> Result<FlowSpec> {
    FlowSpec::new(family, r.clone(), length, streams, theta_star(cfg, r.dim()), seed)
}

pub fn tv_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec![
        "target", "kernel", "family", "eps", "T", "tv_mean", "tv_sd", "tv_median", "n_nan", "n_runs",
    ]);
    let families = or_default(&cfg.flow.families, &[FlowFamily::Homogeneous, FlowFamily::UncorrectedHomogeneous]);
    let lengths = or_default(&cfg.flow.lengths, &[1, 10, 50, 100, 200]);
    let t_max = lengths.iter().copied().max().unwrap_or(1);
    let seeds = cfg.seed_list();
    let n = cfg.grid.samples;
    for name in cfg.target_names() {
        let t = target(&name)?;
        let q = reference_for(cfg, &name, t.as_ref())?;
        let grid = TvGrid::new(t.as_ref(), n, cfg.grid.bins)?;
        for kc in cfg.kernels_or(vec![KernelConfig::hmc(0.02, 50)]) {
            for eps in or_default(&cfg.sweep.eps, &[kc.eps]) {
                let k = kc.build_with_eps(t.clone(), eps)?;
                let r = AugmentedReference::new(q.clone(), k);
                for &family in &families {
                    // runs[seed][length]
                    let runs: Vec<Vec<TvRun>> = seeds
                        .par_iter()
                        .map(|&seed| {
                            let spec = build_spec(cfg, family, &r, t_max, cfg.flow.ensemble, seed)?;
                            lengths.iter().map(|&len| tv_run(&spec.with_length(len), &grid, n, seed)).collect()
                        })
                        .collect::<Result<_>>()?;
                    for (j, &len) in lengths.iter().enumerate() {
                        let col: Vec<TvRun> = runs.iter().map(|r| r[j]).collect();
                        let s = summarize(&col);
                        table.rows.push(Row::new(vec![
                            name.clone(),
                            kc.name.clone(),
                            family.to_string(),
                            num(eps),
                            len.to_string(),
                            num(s.mean),
                            num(s.sd),
                            num(s.median),
                            s.n_nan.to_string(),
                            col.len().to_string(),
                        ]));
                    }
                }
            }
        }
    }
    Ok(table)
}

/// ELBO, `ln Ẑ` and ESS/N per seed. A seed whose weights cannot be formed
/// yields `NaN` rows marked `nonfinite`.
pub fn metrics(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec!["target", "kernel", "family", "T", "metric", "value", "se", "n", "status"]);
    let families = or_default(&cfg.flow.families, &[FlowFamily::Irf]);
    let lengths = or_default(&cfg.flow.lengths, &[200]);
    let seeds = cfg.seed_list();
    let n = cfg.metrics.samples;
    for name in cfg.target_names() {
        let t = target(&name)?;
        let q = reference_for(cfg, &name, t.as_ref())?;
        for kc in cfg.kernels_or(vec![KernelConfig::hmc(0.02, 50)]) {
            let r = AugmentedReference::new(q.clone(), kc.build(t.clone())?);
            for &family in &families {
                for &len in &lengths {
                    let per_seed: Vec<Vec<Row>> = seeds
                        .par_iter()
                        .map(|&seed| {
                            let spec = build_spec(cfg, family, &r, len, cfg.flow.ensemble, seed)?;
                            let (vals, status) = match weight_metrics(&spec, n, draw_seed(seed)) {
                                Ok(m) => (m.map(|m| (m.metric, m.value, m.se)).to_vec(), "ok"),
                                Err(e) if e.is_numerical() => (
                                    super::config::METRICS.iter().map(|m| (m.to_string(), f64::NAN, f64::NAN)).collect(),
                                    "nonfinite",
                                ),
                                Err(e) => return Err(e),
                            };
                            Ok(vals
                                .into_iter()
                                .filter(|(m, ..)| cfg.metrics.list.contains(m))
                                .map(|(m, v, se)| {
                                    Row::seeded(
                                        vec![
                                            name.clone(),
                                            kc.label(),
                                            family.to_string(),
                                            len.to_string(),
                                            m,
                                            num(v),
                                            num(se),
                                            n.to_string(),
                                            status.into(),
                                        ],
                                        seed,
                                    )
                                })
                                .collect())
                        })
                        .collect::<Result<_>>()?;
                    table.rows.extend(per_seed.into_iter().flatten());
                }
            }
        }
    }
    Ok(table)
}

/// Ensemble IRF TV over a `T` sweep at fixed `M` and an `M` sweep at fixed
/// `T`. Targets with a known `ln Z` also get the joint-space TV estimate.
pub fn ensemble_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec![
        "target", "kernel", "sweep", "T", "M", "tv_mean", "tv_sd", "tv_median", "joint_tv_mean", "joint_tv_sd",
        "n_nan",
    ]);
    let sw = &cfg.sweep;
    let mut points: Vec<(&'static str, usize, usize)> =
        sw.ensemble_lengths.iter().map(|&t| ("T", t, sw.fixed_ensemble)).collect();
    points.extend(sw.ensemble_sizes.iter().map(|&m| ("M", sw.fixed_length, m)));
    let seeds = cfg.seed_list();
    let n = cfg.grid.samples;
    for name in cfg.target_names() {
        let t = target(&name)?;
        let q = reference_for(cfg, &name, t.as_ref())?;
        let grid = TvGrid::new(t.as_ref(), n, cfg.grid.bins)?;
        for kc in cfg.kernels_or(vec![KernelConfig::rwmh(0.3)]) {
            let r = AugmentedReference::new(q.clone(), kc.build(t.clone())?);
            for &(sweep, len, m) in &points {
                let runs: Vec<(TvRun, f64)> = seeds
                    .par_iter()
                    .map(|&seed| {
                        let spec = FlowSpec::ensemble(r.clone(), len, m, seed);
                        let run = tv_run(&spec, &grid, n, seed)?;
                        let joint = match t.log_z() {
                            Some(lz) => match flow_log_weights(&spec, n, draw_seed(seed)) {
                                Ok(w) => joint_tv_is(&w, lz).0,
                                Err(e) if e.is_numerical() => f64::NAN,
                                Err(e) => return Err(e),
                            },
                            None => f64::NAN,
                        };
                        Ok((run, joint))
                    })
                    .collect::<Result<_>>()?;
                let tvs: Vec<TvRun> = runs.iter().map(|r| r.0).collect();
                let s = summarize(&tvs);
                let joints: Vec<f64> = runs.iter().map(|r| r.1).collect();
                let (jm, jsd) = moments(&joints);
                table.rows.push(Row::new(vec![
                    name.clone(),
                    kc.label(),
                    sweep.into(),
                    len.to_string(),
                    m.to_string(),
                    num(s.mean),
                    num(s.sd),
                    num(s.median),
                    num(jm),
                    num(jsd),
                    s.n_nan.to_string(),
                ]));
            }
        }
    }
    Ok(table)
}

/// Running means of `x₁` and `x₂` along four dynamics from one reference
/// draw, then the per-sample MCMC ESS of each trajectory.
pub fn diagnostics(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec!["target", "kernel", "dynamics", "function", "statistic", "t", "value"]);
    let len = cfg.diagnostics.length;
    for name in cfg.target_names() {
        let t = target(&name)?;
        let q = reference_for(cfg, &name, t.as_ref())?;
        for kc in cfg.kernels_or(vec![KernelConfig::hmc(0.02, 50)]) {
            let k = kc.build(t.clone())?;
            let r = AugmentedReference::new(q.clone(), k.clone());
            let stream = FrozenStream::new(cfg.seed, len, 1, k.dim());
            let fns: Vec<TestFn> = vec![Box::new(|s| s.x[0]), Box::new(|s| s.x[1])];
            let fn_names = ["x1", "x2"];
            let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(cfg.seed));
            let rm = running_means(&k, &r, Schedule::stream(&stream), &theta_star(cfg, k.dim()), len, &fns, &mut rng)?;
            for (dyn_name, tr) in [
                ("inverse_irf", &rm.inverse_irf),
                ("backward_irf", &rm.backward),
                ("homogeneous", &rm.homogeneous),
                ("mcmc", &rm.mcmc),
            ] {
                for (i, f) in fn_names.iter().enumerate() {
                    for (j, m) in tr.means[i].iter().enumerate() {
                        table.rows.push(Row::seeded(
                            vec![
                                name.clone(),
                                kc.label(),
                                dyn_name.into(),
                                f.to_string(),
                                "running_mean".into(),
                                (j + 1).to_string(),
                                num(*m),
                            ],
                            cfg.seed,
                        ));
                    }
                    let ess = mcmc_ess(&tr.values[i]).map(|e| e.fraction).unwrap_or(f64::NAN);
                    table.rows.push(Row::seeded(
                        vec![
                            name.clone(),
                            kc.label(),
                            dyn_name.into(),
                            f.to_string(),
                            "mcmc_ess".into(),
                            len.to_string(),
                            num(ess),
                        ],
                        cfg.seed,
                    ));
                }
            }
        }
    }
    Ok(table)
}

/// Outcome of a step-size search.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub eps: f64,
    pub acceptance: f64,
    /// `(eps, acceptance)` in probe order.
    pub probes: Vec<(f64, f64)>,
    pub converged: bool,
    /// False when a larger step was accepted more often than a smaller one.
    pub monotone: bool,
}

/// Bisection in `ln ε` on `[lo, hi]` for `acceptance(ε) = target ± tol`,
/// assuming acceptance falls with `ε`. Stops at the first probe inside the
/// band, after `max_probes`, or when the monotone assumption breaks, and
/// then returns the probe closest to the target.
pub fn bisect_step(
    lo: f64,
    hi: f64,
    target: f64,
    tol: f64,
    max_probes: usize,
    mut acceptance: impl FnMut(f64) -> f64,
) -> TuneResult {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut converged = false;
    let mut monotone = true;
    for _ in 0..max_probes {
        let eps = (0.5 * (a + b)).exp();
        let acc = acceptance(eps);
        let acc_cmp = if acc.is_nan() { -1.0 } else { acc };
        if probes.iter().any(|&(e, p)| (e < eps && acc_cmp > p + tol) || (e > eps && acc_cmp + tol < p)) {
            monotone = false;
        }
        probes.push((eps, acc));
        if (acc - target).abs() <= tol {
            converged = true;
            break;
        }
        if !monotone {
            break;
        }
        if acc_cmp > target {
            a = eps.ln();
        } else {
            b = eps.ln();
        }
    }
    let &(eps, acceptance) = probes
        .iter()
        .filter(|p| !p.1.is_nan())
        .min_by(|x, y| (x.1 - target).abs().total_cmp(&(y.1 - target).abs()))
        .unwrap_or(&probes[probes.len() - 1]);
    TuneResult { eps, acceptance, probes, converged, monotone }
}

/// Empirical acceptance of `iterations` IRF steps from one reference draw
/// under a frozen stream. `NaN` if the orbit leaves the reals.
pub fn irf_acceptance(kernel: &InvolutiveKernel, q: &MeanFieldGaussian, iterations: usize, seed: u64) -> f64 {
    let r = AugmentedReference::new(q.clone(), kernel.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(seed));
    let s0 = r.sample(&mut rng);
    let stream = FrozenStream::new(seed, iterations, 1, kernel.dim());
    match forward_orbit_traced(kernel, &s0, Schedule::stream(&stream), 1, iterations) {
        Ok((_, trace)) => trace.acceptance_rate(),
        Err(_) => f64::NAN,
    }
}

pub fn tune_step(kc: &KernelConfig, t: Arc<dyn Target>, q: &MeanFieldGaussian, cfg: &ExperimentConfig) -> TuneResult {
    let tc = &cfg.tune;
    bisect_step(tc.lo, tc.hi, tc.target_acceptance, tc.tolerance, tc.max_probes, |eps| {
        match kc.build_with_eps(t.clone(), eps) {
            Ok(k) => irf_acceptance(&k, q, tc.iterations, cfg.seed),
            Err(_) => f64::NAN,
        }
    })
}

fn tune(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec!["target", "kernel", "probe", "eps", "acceptance", "selected"]);
    for name in cfg.target_names() {
        let t = target(&name)?;
        let q = reference_for(cfg, &name, t.as_ref())?;
        for kc in cfg.kernels_or(vec![KernelConfig::rwmh(1.0)]) {
            let res = tune_step(&kc, t.clone(), &q, cfg);
            if !res.monotone {
                eprintln!("warning: acceptance is not monotone in eps for {name}/{}; using the best probe", kc.name);
            } else if !res.converged {
                eprintln!("warning: no probe within tolerance for {name}/{}; using the best probe", kc.name);
            }
            eprintln!("{name} {}: eps = {} (acceptance {})", kc.name, res.eps, res.acceptance);
            for (i, &(eps, acc)) in res.probes.iter().enumerate() {
                table.rows.push(Row::seeded(
                    vec![
                        name.clone(),
                        kc.name.clone(),
                        (i + 1).to_string(),
                        num(eps),
                        num(acc),
                        (eps == res.eps).to_string(),
                    ],
                    cfg.seed,
                ));
            }
        }
    }
    Ok(table)
}
