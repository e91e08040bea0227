//! Sampling on uniform grids, periodogram estimation, out-of-band energy and
//! bandwidth diagnostics, and the far-field decay probe.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{PwError, Result};
use crate::pwcore::density::DEFAULT_NODE_BUDGET;
use crate::pwcore::signal::Evaluable;

/// The cube `[-T, T]ⁿ` sampled with `N` nodes per axis, endpoints included:
/// `t_k = -T + k·Δt`, `Δt = 2T/(N-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    dim: usize,
    half_width: f64,
    nodes: usize,
}

impl SampleGrid {
    pub fn new(dim: usize, half_width: f64, nodes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(PwError::Precondition("sample grid needs dimension ≥ 1".into()));
        }
        if nodes < 2 {
            return Err(PwError::Precondition(format!(
                "sample grid needs N ≥ 2 nodes, got {nodes}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(PwError::Domain(format!(
                "half width T must be positive, got {half_width}"
            )));
        }
        let total = (nodes as f64).powi(dim as i32);
        if total > DEFAULT_NODE_BUDGET as f64 {
            return Err(PwError::ResourceExhausted {
                nodes: total.min(usize::MAX as f64) as usize,
                budget: DEFAULT_NODE_BUDGET,
            });
        }
        Ok(SampleGrid { dim, half_width, nodes })
    }

    /// The grid with `N` nodes and spacing `Δt`, centred on the origin.
    pub fn with_spacing(dim: usize, nodes: usize, dt: f64) -> Result<Self> {
        Self::new(dim, dt * (nodes - 1).max(1) as f64 / 2.0, nodes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same node count with spacing divided by `factor`, so frequencies scale
    /// by `factor` and a band edge at `factor · r` keeps the bin position `r`
    /// had on `self`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(PwError::Domain(format!(
                "grid scale factor must be positive, got {factor}"
            )));
        }
        Self::new(self.dim, self.half_width / factor, self.nodes)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.nodes {
            self.half_width
        } else {
            -self.half_width + k as f64 * self.spacing()
        }
    }

    /// DFT bin width `2π/(N Δt)`.
    pub fn frequency_step(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.nodes as f64 * self.spacing())
    }

    /// Per-axis Nyquist frequency `π/Δt`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    fn point(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for s in (0..self.dim).rev() {
            out[s] = self.node(rem % self.nodes);
            rem /= self.nodes;
        }
    }
}

/// Samples `f` at every grid node, row-major (axis 1 slowest).
pub fn sample_on_grid<S: Evaluable + ?Sized>(f: &S, grid: &SampleGrid) -> Result<Vec<Complex64>> {
    if f.dim() != grid.dim() {
        return Err(PwError::DimensionMismatch {
            expected: grid.dim(),
            got: f.dim(),
        });
    }
    Ok((0..grid.total_nodes())
        .into_par_iter()
        .map_init(
            || vec![0.0; grid.dim()],
            |t, idx| {
                grid.point(idx, t);
                f.eval(t)
            },
        )
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    None,
    #[default]
    Hann,
}

impl Window {
    /// Per-axis weights; the separable product is applied in `n` dimensions.
    /// Hann is the periodic form `0.5 − 0.5 cos(2πk/N)`.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Window::None => "none",
            Window::Hann => "hann",
        })
    }
}

/// Periodogram on the centred frequency grid `u_k = k·du`, `k ∈ [-⌊N/2⌋, N - ⌊N/2⌋)`
/// per axis, stored row-major in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpectrum {
    dim: usize,
    nodes: usize,
    step: f64,
    power: Vec<f64>,
    total: f64,
    window: Window,
}

impl DiscreteSpectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Bin width `du`.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// `|X_k|² / Nⁿ`, so that without a window `Σ power = Σ |x|²`.
    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Frequencies of one axis, ascending.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let half = (self.nodes / 2) as f64;
        (0..self.nodes).map(|i| (i as f64 - half) * self.step).collect()
    }

    pub fn frequency(&self, idx: usize) -> Vec<f64> {
        let half = self.nodes / 2;
        let mut u = vec![0.0; self.dim];
        let mut rem = idx;
        for s in (0..self.dim).rev() {
            u[s] = ((rem % self.nodes) as f64 - half as f64) * self.step;
            rem /= self.nodes;
        }
        u
    }

    pub fn bin_radius(&self, idx: usize) -> f64 {
        self.frequency(idx).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// CSV with header `u_1,…,u_n,power`, one row per bin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|s| format!("u_{s}")).collect();
        writeln!(out, "{},power", header.join(","))?;
        for (idx, p) in self.power.iter().enumerate() {
            for u in self.frequency(idx) {
                write!(out, "{u},")?;
            }
            writeln!(out, "{p}")?;
        }
        Ok(())
    }
}

/// Windowed n-dimensional DFT `X_k = Σ_j w_j x_j e^{-2πi(j,k)/N}`, reordered so
/// that the zero frequency sits at index `⌊N/2⌋` on every axis.
///
/// With samples taken at `t_j = -T + jΔt`, `Δt · X_k · e^{i(u_k,T·1)}`
/// approximates `∫ f(t) e^{-i(u_k,t)} dt = (2π)ⁿ f̂(u_k)`.
pub fn dft_coefficients(samples: &[Complex64], grid: &SampleGrid, window: Window) -> Result<Vec<Complex64>> {
    let (n, dim) = (grid.nodes(), grid.dim());
    if samples.len() != grid.total_nodes() {
        return Err(PwError::DimensionMismatch {
            expected: grid.total_nodes(),
            got: samples.len(),
        });
    }
    let w = window.weights(n);
    let mut data: Vec<Complex64> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, &x)| {
            let mut rem = idx;
            let mut factor = 1.0;
            for _ in 0..dim {
                factor *= w[rem % n];
                rem /= n;
            }
            x * factor
        })
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_exact_mut(n).for_each(|line| fft.process(line));
        } else {
            // Lines along this axis: blocks of n·stride elements, `stride` lines each.
            data.par_chunks_exact_mut(n * stride).for_each(|block| {
                let mut line = vec![Complex64::new(0.0, 0.0); n];
                for offset in 0..stride {
                    for k in 0..n {
                        line[k] = block[offset + k * stride];
                    }
                    fft.process(&mut line);
                    for k in 0..n {
                        block[offset + k * stride] = line[k];
                    }
                }
            });
        }
    }
    Ok(fftshift(&data, n, dim))
}

fn fftshift(data: &[Complex64], n: usize, dim: usize) -> Vec<Complex64> {
    let half = n / 2;
    (0..data.len())
        .map(|idx| {
            let mut rem = idx;
            let mut src = 0;
            let mut scale = 1;
            for _ in 0..dim {
                let i = rem % n;
                rem /= n;
                src += ((i + n - half) % n) * scale;
                scale *= n;
            }
            data[src]
        })
        .collect()
}

pub fn dft_spectrum(samples: &[Complex64], grid: &SampleGrid, window: Window) -> Result<DiscreteSpectrum> {
    let coeffs = dft_coefficients(samples, grid, window)?;
    let norm = (grid.nodes() as f64).powi(grid.dim() as i32);
    let power: Vec<f64> = coeffs.iter().map(|x| x.norm_sqr() / norm).collect();
    let total = power.iter().sum();
    Ok(DiscreteSpectrum {
        dim: grid.dim(),
        nodes: grid.nodes(),
        step: grid.frequency_step(),
        power,
        total,
        window,
    })
}

fn outside(radius: f64, r: f64) -> bool {
    radius > r + 1e-12 * r.max(1.0)
}

/// Fraction of the total power at bins with `|u| > r`; zero for an empty spectrum.
pub fn oob_energy(spec: &DiscreteSpectrum, r: f64) -> f64 {
    if spec.total <= 0.0 {
        return 0.0;
    }
    let out: f64 = spec
        .power
        .iter()
        .enumerate()
        .filter(|&(idx, _)| outside(spec.bin_radius(idx), r))
        .map(|(_, p)| p)
        .sum();
    (out / spec.total).clamp(0.0, 1.0)
}

/// Smallest bin radius `r` with `oob_energy(spec, r) ≤ tol`.
pub fn bandwidth_estimate(spec: &DiscreteSpectrum, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(PwError::Precondition(format!(
            "tolerance must lie in (0, 1), got {tol}"
        )));
    }
    if spec.total <= 0.0 {
        return Err(PwError::UndefinedBandwidth);
    }
    let mut bins: Vec<(f64, f64)> = spec
        .power
        .iter()
        .enumerate()
        .map(|(idx, &p)| (spec.bin_radius(idx), p))
        .collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut inside = 0.0;
    let mut i = 0;
    while i < bins.len() {
        let r = bins[i].0;
        while i < bins.len() && !outside(bins[i].0, r) {
            inside += bins[i].1;
            i += 1;
        }
        if (spec.total - inside).max(0.0) / spec.total <= tol {
            return Ok(r);
        }
    }
    Ok(bins.last().map_or(0.0, |b| b.0))
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut x = 0.0;
    while index > 0 {
        x += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    x
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Halton probe points on the shell `R ≤ |t| ≤ 2R` in `ℝⁿ`.
pub fn shell_probes(dim: usize, r: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    if dim + 1 > PRIMES.len() {
        return Err(PwError::Precondition(format!(
            "shell probes support dimension ≤ {}",
            PRIMES.len() - 1
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let radius = r * (1.0 + radical_inverse(index, PRIMES[0]));
        let dir: Vec<f64> = (0..dim)
            .map(|s| 2.0 * radical_inverse(index, PRIMES[s + 1]) - 1.0)
            .collect();
        index += 1;
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        out.push(dir.iter().map(|x| x / norm * radius).collect());
    }
    Ok(out)
}

/// `max |f(t)|` over [`shell_probes`]`(n, R, probes)`.
pub fn decay_sup<S: Evaluable + ?Sized>(f: &S, r: f64, probes: usize) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(PwError::Precondition(format!("shell radius must be positive, got {r}")));
    }
    if probes == 0 {
        return Err(PwError::Precondition("decay probe needs at least one point".into()));
    }
    let points = shell_probes(f.dim(), r, probes)?;
    Ok(points
        .par_iter()
        .map(|t| f.eval(t).norm())
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max))
}
