//! Target distributions: the [`Target`] trait, the four synthetic 2-D
//! targets (banana, funnel, cross, warped Gaussian), a diagonal Gaussian
//! used as a test rig, and grid quadrature helpers.
//!
//! All synthetic targets are normalized, so `log_z` is `Some(0.0)` and
//! `log_density` is the exact log-density.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{gaussian_log_pdf, integrate, log_sum_exp, normal_cdf, HALF_LN_2PI};

/// An unnormalized log-density `γ` with its gradient.
pub trait Target: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// `ln γ(x)`.
    fn log_density(&self, x: &[f64]) -> f64;

    /// Writes `∇ ln γ(x)` into `grad`.
    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]);

    /// One exact draw from `π = γ / Z`, when available.
    fn sample_exact(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    /// `ln Z`, when known.
    fn log_z(&self) -> Option<f64> {
        None
    }

    /// Probability under `π` of the axis-aligned cell `[lo, hi]` for 2-D
    /// targets that admit a semi-analytic integral.
    fn cell_mass(&self, _lo: [f64; 2], _hi: [f64; 2]) -> Option<f64> {
        None
    }
}

fn gaussian_interval(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // work in the tail that keeps precision
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// `N(0, diag(100, 1))` pushed through `(y₁, y₂ + b y₁² − 100 b)`.
#[derive(Debug, Clone)]
pub struct Banana {
    pub b: f64,
}

impl Default for Banana {
    fn default() -> Self {
        Banana { b: 0.1 }
    }
}

impl Banana {
    const SD1: f64 = 10.0;

    fn x2_mean(&self, x1: f64) -> f64 {
        self.b * x1 * x1 - 100.0 * self.b
    }
}

impl Target for Banana {
    fn name(&self) -> &str {
        "banana"
    }

    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let y2 = x[1] - self.x2_mean(x[0]);
        gaussian_log_pdf(x[0], 0.0, Self::SD1) + gaussian_log_pdf(y2, 0.0, 1.0)
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) {
        let y2 = x[1] - self.x2_mean(x[0]);
        grad[0] = -x[0] / (Self::SD1 * Self::SD1) + 2.0 * self.b * x[0] * y2;
        grad[1] = -y2;
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let y1 = Self::SD1 * rng.sample::<f64, _>(StandardNormal);
        let y2: f64 = rng.sample(StandardNormal);
        Some(vec![y1, y2 + self.x2_mean(y1)])
    }

    fn log_z(&self) -> Option<f64> {
        Some(0.0)
    }

    fn cell_mass(&self, lo: [f64; 2], hi: [f64; 2]) -> Option<f64> {
        let f = |x1: f64| {
            gaussian_log_pdf(x1, 0.0, Self::SD1).exp()
                * gaussian_interval(lo[1], hi[1], self.x2_mean(x1), 1.0)
        };
        // the conditional window moves by ~2 b x1 dx1; keep panels narrow
        let panels = (((hi[0] - lo[0]) * (1.0 + 0.5 * lo[0].abs().max(hi[0].abs()))).ceil()
            as usize)
            .clamp(4, 4000);
        Some(integrate(f, lo[0], hi[0], panels))
    }
}

/// Neal's funnel with `x₁ ~ N(0, σ²)` and `x₂ | x₁ ~ N(0, exp(x₁/2))`,
/// where `exp(x₁/2)` is the conditional variance.
#[derive(Debug, Clone)]
pub struct Funnel {
    pub sigma: f64,
}

impl Default for Funnel {
    fn default() -> Self {
        Funnel { sigma: 6.0 }
    }
}

impl Target for Funnel {
    fn name(&self) -> &str {
        "funnel"
    }

    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let inv_var = (-0.5 * x[0]).exp();
        gaussian_log_pdf(x[0], 0.0, self.sigma) - HALF_LN_2PI - 0.25 * x[0]
            - 0.5 * x[1] * x[1] * inv_var
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) {
        let inv_var = (-0.5 * x[0]).exp();
        grad[0] = -x[0] / (self.sigma * self.sigma) - 0.25 + 0.25 * x[1] * x[1] * inv_var;
        grad[1] = -x[1] * inv_var;
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let x1 = self.sigma * rng.sample::<f64, _>(StandardNormal);
        let x2 = (0.25 * x1).exp() * rng.sample::<f64, _>(StandardNormal);
        Some(vec![x1, x2])
    }

    fn log_z(&self) -> Option<f64> {
        Some(0.0)
    }

    fn cell_mass(&self, lo: [f64; 2], hi: [f64; 2]) -> Option<f64> {
        let f = |x1: f64| {
            gaussian_log_pdf(x1, 0.0, self.sigma).exp()
                * gaussian_interval(lo[1], hi[1], 0.0, (0.25 * x1).exp())
        };
        let panels = ((hi[0] - lo[0]) * 4.0).ceil().clamp(4.0, 4000.0) as usize;
        Some(integrate(f, lo[0], hi[0], panels))
    }
}

/// Equal-weight mixture of four axis-aligned Gaussians arranged in a cross.
#[derive(Debug, Clone)]
pub struct Cross {
    components: [([f64; 2], [f64; 2]); 4],
}

impl Default for Cross {
    fn default() -> Self {
        let narrow = 0.15;
        Cross {
            components: [
                ([0.0, 2.0], [narrow, 1.0]),
                ([-2.0, 0.0], [1.0, narrow]),
                ([2.0, 0.0], [1.0, narrow]),
                ([0.0, -2.0], [narrow, 1.0]),
            ],
        }
    }
}

impl Cross {
    fn component_log_pdfs(&self, x: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, (m, s)) in self.components.iter().enumerate() {
            out[k] = 0.25f64.ln()
                + gaussian_log_pdf(x[0], m[0], s[0])
                + gaussian_log_pdf(x[1], m[1], s[1]);
        }
        out
    }
}

impl Target for Cross {
    fn name(&self) -> &str {
        "cross"
    }

    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.component_log_pdfs(x))
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) {
        let lp = self.component_log_pdfs(x);
        let total = log_sum_exp(&lp);
        grad[0] = 0.0;
        grad[1] = 0.0;
        for (k, (m, s)) in self.components.iter().enumerate() {
            let w = (lp[k] - total).exp();
            grad[0] -= w * (x[0] - m[0]) / (s[0] * s[0]);
            grad[1] -= w * (x[1] - m[1]) / (s[1] * s[1]);
        }
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let k = rng.random_range(0..4);
        let (m, s) = self.components[k];
        Some(vec![
            m[0] + s[0] * rng.sample::<f64, _>(StandardNormal),
            m[1] + s[1] * rng.sample::<f64, _>(StandardNormal),
        ])
    }

    fn log_z(&self) -> Option<f64> {
        Some(0.0)
    }

    fn cell_mass(&self, lo: [f64; 2], hi: [f64; 2]) -> Option<f64> {
        Some(
            self.components
                .iter()
                .map(|(m, s)| {
                    0.25 * gaussian_interval(lo[0], hi[0], m[0], s[0])
                        * gaussian_interval(lo[1], hi[1], m[1], s[1])
                })
                .sum(),
        )
    }
}

/// `N(0, diag(1, 0.12²))` twisted by the angle offset `−‖y‖/2`.
#[derive(Debug, Clone)]
pub struct WarpedGaussian {
    pub narrow_sd: f64,
}

impl Default for WarpedGaussian {
    fn default() -> Self {
        WarpedGaussian { narrow_sd: 0.12 }
    }
}

/// The twist `y ↦ x`: rotate `y` by `−‖y‖/2`. Preserves the norm.
pub fn warp(y: &[f64]) -> [f64; 2] {
    rotate(y, -0.5 * y[0].hypot(y[1]))
}

/// Inverse twist `x ↦ y`: rotate `x` by `+‖x‖/2`.
pub fn unwarp(x: &[f64]) -> [f64; 2] {
    rotate(x, 0.5 * x[0].hypot(x[1]))
}

fn rotate(p: &[f64], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

impl Target for WarpedGaussian {
    fn name(&self) -> &str {
        "warped"
    }

    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let y = unwarp(x);
        gaussian_log_pdf(y[0], 0.0, 1.0) + gaussian_log_pdf(y[1], 0.0, self.narrow_sd)
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) {
        let r = x[0].hypot(x[1]);
        let (s, c) = (0.5 * r).sin_cos();
        let y = [c * x[0] - s * x[1], s * x[0] + c * x[1]];
        let g = [-y[0], -y[1] / (self.narrow_sd * self.narrow_sd)];
        // dy/dx = R + (-y₂, y₁)ᵀ xᵀ / (2r)
        grad[0] = c * g[0] + s * g[1];
        grad[1] = -s * g[0] + c * g[1];
        if r > 0.0 {
            let dot = -y[1] * g[0] + y[0] * g[1];
            grad[0] += dot * x[0] / (2.0 * r);
            grad[1] += dot * x[1] / (2.0 * r);
        }
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let y = [
            rng.sample::<f64, _>(StandardNormal),
            self.narrow_sd * rng.sample::<f64, _>(StandardNormal),
        ];
        Some(warp(&y).to_vec())
    }

    fn log_z(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Diagonal Gaussian `N(mean, diag(sd²))`. Used as a known-answer target.
#[derive(Debug, Clone)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl DiagGaussian {
    pub fn standard(dim: usize) -> Self {
        DiagGaussian { mean: vec![0.0; dim], sd: vec![1.0; dim] }
    }
}

impl Target for DiagGaussian {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((&xi, &m), &s)| gaussian_log_pdf(xi, m, s))
            .sum()
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) {
        for i in 0..x.len() {
            grad[i] = -(x[i] - self.mean[i]) / (self.sd[i] * self.sd[i]);
        }
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(
            self.mean
                .iter()
                .zip(&self.sd)
                .map(|(&m, &s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    }

    fn log_z(&self) -> Option<f64> {
        Some(0.0)
    }

    fn cell_mass(&self, lo: [f64; 2], hi: [f64; 2]) -> Option<f64> {
        (self.dim() == 2).then(|| {
            gaussian_interval(lo[0], hi[0], self.mean[0], self.sd[0])
                * gaussian_interval(lo[1], hi[1], self.mean[1], self.sd[1])
        })
    }
}

/// `γ · e^c` for an inner target `γ`; shifts `ln Z` by `c`.
#[derive(Debug, Clone)]
pub struct Offset {
    pub inner: Arc<dyn Target>,
    pub shift: f64,
}

impl Target for Offset {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.inner.log_density(x) + self.shift
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.grad_log_density(x, grad)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.inner.sample_exact(rng)
    }

    fn log_z(&self) -> Option<f64> {
        self.inner.log_z().map(|z| z + self.shift)
    }

    fn cell_mass(&self, lo: [f64; 2], hi: [f64; 2]) -> Option<f64> {
        self.inner.cell_mass(lo, hi)
    }
}

pub fn banana() -> Arc<dyn Target> {
    Arc::new(Banana::default())
}

pub fn funnel() -> Arc<dyn Target> {
    Arc::new(Funnel::default())
}

pub fn cross() -> Arc<dyn Target> {
    Arc::new(Cross::default())
}

pub fn warped_gaussian() -> Arc<dyn Target> {
    Arc::new(WarpedGaussian::default())
}

pub const SYNTHETIC_TARGETS: [&str; 4] = ["banana", "funnel", "cross", "warped"];

/// Looks up a synthetic target by name (`banana`, `funnel`, `cross`,
/// `warped`, or `gaussian` for a standard normal in 2-D).
pub fn by_name(name: &str) -> Result<Arc<dyn Target>> {
    match name {
        "banana" => Ok(banana()),
        "funnel" => Ok(funnel()),
        "cross" => Ok(cross()),
        "warped" | "warped_gaussian" | "warped-gaussian" => Ok(warped_gaussian()),
        "gaussian" | "normal" => Ok(Arc::new(DiagGaussian::standard(2))),
        other => Err(Error::Config(format!("unknown target '{other}'"))),
    }
}

/// Rectangular grid over `[x_lo, x_hi] × [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Self {
        Grid2D { x_range, y_range, nx, ny }
    }

    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Self::new((lo, hi), (lo, hi), n, n)
    }

    /// Grid over the per-coordinate `[q_lo, q_hi]` quantile box of `n_draws`
    /// exact samples of `target` (drawn from a fixed seed).
    pub fn quantile_box(
        target: &dyn Target,
        bins: usize,
        q_lo: f64,
        q_hi: f64,
        n_draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if target.dim() != 2 {
            return Err(Error::Domain("quantile box needs a 2-D target".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n_draws);
        let mut ys = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let s = target
                .sample_exact(&mut rng)
                .ok_or_else(|| Error::Domain(format!("{} has no exact sampler", target.name())))?;
            xs.push(s[0]);
            ys.push(s[1]);
        }
        let quant = |v: &mut Vec<f64>, q: f64| {
            v.sort_by(f64::total_cmp);
            let idx = ((v.len() - 1) as f64 * q).round() as usize;
            v[idx]
        };
        let x_range = (quant(&mut xs, q_lo), quant(&mut xs, q_hi));
        let y_range = (quant(&mut ys, q_lo), quant(&mut ys, q_hi));
        Ok(Self::new(x_range, y_range, bins, bins))
    }

    pub fn dx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_range.1 - self.y_range.0) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat cell index of `p`, or `None` outside the grid or for non-finite input.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        let fx = (p[0] - self.x_range.0) / self.dx();
        let fy = (p[1] - self.y_range.0) / self.dy();
        if !(fx >= 0.0 && fy >= 0.0) || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        (i < self.nx && j < self.ny).then_some(j * self.nx + i)
    }

    /// Lower and upper corners of cell `(i, j)`.
    pub fn cell(&self, i: usize, j: usize) -> ([f64; 2], [f64; 2]) {
        let lo = [
            self.x_range.0 + i as f64 * self.dx(),
            self.y_range.0 + j as f64 * self.dy(),
        ];
        let hi = [
            self.x_range.0 + (i + 1) as f64 * self.dx(),
            self.y_range.0 + (j + 1) as f64 * self.dy(),
        ];
        (lo, hi)
    }
}

pub const QUADRATURE_COVERAGE: f64 = 1.0 - 1e-4;

/// `ln` of the midpoint Riemann sum of `γ` over `grid`.
///
/// When `ln Z` is known the grid must hold at least [`QUADRATURE_COVERAGE`]
/// of the mass; otherwise the outermost ring of cells must carry less than
/// `1e-4` of the sum.
pub fn quadrature_log_norm(target: &dyn Target, grid: &Grid2D) -> Result<f64> {
    if target.dim() != 2 {
        return Err(Error::Domain("grid quadrature needs a 2-D target".into()));
    }
    let mut logs = Vec::with_capacity(grid.n_cells());
    let mut ring = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (lo, hi) = grid.cell(i, j);
            let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            let l = target.log_density(&c);
            logs.push(l);
            if i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.ny {
                ring.push(l);
            }
        }
    }
    let log_norm = log_sum_exp(&logs) + grid.cell_area().ln();
    let covered = match target.log_z() {
        Some(lz) => (log_norm - lz).exp(),
        None => {
            1.0 - (log_sum_exp(&ring) + grid.cell_area().ln() - log_norm).exp()
        }
    };
    if !(covered >= QUADRATURE_COVERAGE) {
        return Err(Error::Coverage { covered, required: QUADRATURE_COVERAGE });
    }
    Ok(log_norm)
}

/// Probability of each grid cell under the normalized target (row-major,
/// `j * nx + i`). Uses [`Target::cell_mass`] when available and a
/// `sub × sub` midpoint rule otherwise.
pub fn cell_probabilities(target: &dyn Target, grid: &Grid2D, sub: usize) -> Result<Vec<f64>> {
    if target.dim() != 2 {
        return Err(Error::Domain("cell probabilities need a 2-D target".into()));
    }
    let log_z = target.log_z();
    let mut out = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (lo, hi) = grid.cell(i, j);
            let mass = match target.cell_mass(lo, hi) {
                Some(m) => m,
                None => {
                    let hx = (hi[0] - lo[0]) / sub as f64;
                    let hy = (hi[1] - lo[1]) / sub as f64;
                    let mut acc = 0.0;
                    for b in 0..sub {
                        for a in 0..sub {
                            let p = [lo[0] + (a as f64 + 0.5) * hx, lo[1] + (b as f64 + 0.5) * hy];
                            acc += target.log_density(&p).exp();
                        }
                    }
                    acc * hx * hy
                }
            };
            out.push(mass);
        }
    }
    match log_z {
        Some(lz) => {
            let scale = (-lz).exp();
            out.iter_mut().for_each(|m| *m *= scale);
        }
        None => {
            let total: f64 = out.iter().sum();
            out.iter_mut().for_each(|m| *m /= total);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(t: &dyn Target, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (t.log_density(&p) - t.log_density(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn all() -> Vec<Arc<dyn Target>> {
        vec![banana(), funnel(), cross(), warped_gaussian()]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in all() {
            for _ in 0..100 {
                let x = t.sample_exact(&mut rng).unwrap();
                let mut g = vec![0.0; 2];
                t.grad_log_density(&x, &mut g);
                let fd = fd_grad(t.as_ref(), &x);
                for i in 0..2 {
                    let scale = g[i].abs().max(1.0);
                    assert!(
                        (g[i] - fd[i]).abs() / scale < 1e-5,
                        "{} at {x:?}: {g:?} vs {fd:?}",
                        t.name()
                    );
                }
            }
        }
    }

    #[test]
    fn banana_values() {
        let t = Banana::default();
        assert_eq!(t.b, 0.1);
        // y = (0, 0): logN(0|0,100) + logN(0|0,1)
        assert!((t.log_density(&[0.0, -10.0]) + 4.140_462_159_403_391).abs() < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| t.sample_exact(&mut rng).unwrap()[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05);
    }

    #[test]
    fn funnel_values() {
        let t = Funnel::default();
        assert_eq!(t.sigma * t.sigma, 36.0);
        // logN(0|0,36) + logN(0|0,1), evaluated independently
        assert!((t.log_density(&[0.0, 0.0]) + 3.629_636_535_637_4).abs() < 1e-4);
        // conditional variance is exp(x1/2)
        let x1 = 2.0;
        let direct = gaussian_log_pdf(x1, 0.0, 6.0) + gaussian_log_pdf(1.3, 0.0, (0.5 * x1).exp().sqrt());
        assert!((t.log_density(&[x1, 1.3]) - direct).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let (mut s, mut ss) = (0.0, 0.0);
        for _ in 0..n {
            let x = t.sample_exact(&mut rng).unwrap()[0];
            s += x;
            ss += x * x;
        }
        let var = ss / n as f64 - (s / n as f64).powi(2);
        assert!((var - 36.0).abs() < 0.5);
    }

    #[test]
    fn cross_values() {
        let t = Cross::default();
        assert!(t.log_density(&[0.0, 2.0]) >= t.log_density(&[3.0, 3.0]));
        let grid = Grid2D::square(-8.0, 8.0, 400);
        let z = quadrature_log_norm(&t, &grid).unwrap();
        assert!(z.abs() < 1e-3);
    }

    #[test]
    fn warped_values() {
        let y = [3.0, 4.0];
        let x = warp(&y);
        assert!((x[0].hypot(x[1]) - 5.0).abs() < 1e-12);
        let back = unwarp(&x);
        assert!((back[0] - 3.0).abs() < 1e-12 && (back[1] - 4.0).abs() < 1e-12);
        let t = WarpedGaussian::default();
        let z = quadrature_log_norm(&t, &Grid2D::square(-5.0, 5.0, 400)).unwrap();
        assert!(z.abs() < 1e-3);
    }

    #[test]
    fn quadrature_examples() {
        let normal = DiagGaussian::standard(2);
        let z = quadrature_log_norm(&normal, &Grid2D::square(-8.0, 8.0, 400)).unwrap();
        assert!(z.abs() < 1e-6);

        let doubled = Offset { inner: Arc::new(normal.clone()), shift: 2f64.ln() };
        let z2 = quadrature_log_norm(&doubled, &Grid2D::square(-8.0, 8.0, 400)).unwrap();
        assert!((z2 - z - 2f64.ln()).abs() < 1e-12);

        // The box [-30,30] x [-40,20] cuts the arms of the banana at
        // |x1| ~ 17; mpmath puts the covered mass at 0.9165638856.
        let banana = Banana::default();
        let narrow = Grid2D::new((-30.0, 30.0), (-40.0, 20.0), 400, 400);
        match quadrature_log_norm(&banana, &narrow) {
            Err(Error::Coverage { covered, .. }) => {
                assert!((covered - 0.916_563_885_6).abs() < 1e-4, "{covered}")
            }
            other => panic!("expected coverage error, got {other:?}"),
        }
        let wide = Grid2D::new((-45.0, 45.0), (-16.0, 200.0), 400, 800);
        assert!(quadrature_log_norm(&banana, &wide).unwrap().abs() < 1e-3);
    }

    #[test]
    fn cell_mass_matches_midpoint_rule() {
        let grid = Grid2D::new((-3.0, 3.0), (-2.5, 3.5), 6, 6);
        for t in [banana(), funnel(), cross()] {
            let g = match t.name() {
                "banana" => Grid2D::new((-20.0, 20.0), (-12.0, 30.0), 5, 5),
                "funnel" => Grid2D::new((-10.0, 10.0), (-4.0, 4.0), 5, 5),
                _ => grid,
            };
            let analytic = cell_probabilities(t.as_ref(), &g, 1).unwrap();
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let (lo, hi) = g.cell(i, j);
                    let n = 400;
                    let hx = (hi[0] - lo[0]) / n as f64;
                    let hy = (hi[1] - lo[1]) / n as f64;
                    let mut acc = 0.0;
                    for b in 0..n {
                        for a in 0..n {
                            let p = [lo[0] + (a as f64 + 0.5) * hx, lo[1] + (b as f64 + 0.5) * hy];
                            acc += t.log_density(&p).exp();
                        }
                    }
                    let mid = acc * hx * hy;
                    let a = analytic[j * g.nx + i];
                    assert!((a - mid).abs() < 2e-4, "{} cell ({i},{j}): {a} vs {mid}", t.name());
                }
            }
        }
    }

    #[test]
    fn exact_samples_match_quadrature_histograms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in all() {
            let grid = Grid2D::quantile_box(t.as_ref(), 20, 0.001, 0.999, 100_000, 3).unwrap();
            let probs = cell_probabilities(t.as_ref(), &grid, 8).unwrap();
            let n = 1_000_000;
            let mut counts = vec![0usize; grid.n_cells()];
            let mut outside = 0usize;
            for _ in 0..n {
                match grid.locate(&t.sample_exact(&mut rng).unwrap()) {
                    Some(c) => counts[c] += 1,
                    None => outside += 1,
                }
            }
            let inside: f64 = probs.iter().sum();
            let dev: f64 = counts
                .iter()
                .zip(&probs)
                .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
                .sum::<f64>()
                + (outside as f64 / n as f64 - (1.0 - inside)).abs();
            assert!(dev < 0.02, "{}: total deviation {dev}", t.name());
        }
    }

    #[test]
    fn grid_locate() {
        let g = Grid2D::square(0.0, 1.0, 4);
        assert_eq!(g.locate(&[0.1, 0.1]), Some(0));
        assert_eq!(g.locate(&[0.9, 0.3]), Some(7));
        assert_eq!(g.locate(&[1.0, 0.3]), None);
        assert_eq!(g.locate(&[f64::NAN, 0.3]), None);
        assert_eq!(g.locate(&[-0.01, 0.3]), None);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(by_name("nope"), Err(Error::Config(_))));
        for n in SYNTHETIC_TARGETS {
            assert_eq!(by_name(n).unwrap().name(), n);
        }
    }
}
