//! Grid-sampled spectral densities and their tensor-product trapezoid quadrature.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PwError, Result};

/// Upper bound on the node count of any grid the crate allocates.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 25;

/// Points within this fraction of a grid spacing outside the box snap onto it.
const SNAP: f64 = 1e-9;

/// Multiplier on the leading-order trapezoid error term.
const ERROR_SAFETY: f64 = 2.0;

/// Relative floating-point floor added to every quadrature error estimate.
const ROUNDOFF: f64 = 1e-13;

/// Axis-aligned spectral box together with the radius of an origin-centred
/// ball containing it.
///
/// For a box built with [`BandSupport::new`] the radius is exactly
/// `sqrt(Σ max(lo_s², hi_s²))`. Transforms that know a tighter ball (the image
/// of a ball under a linear map, or a marginal of one) may shrink it with
/// [`BandSupport::with_radius_bound`]; the radius never exceeds the box value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSupport {
    lo: Vec<f64>,
    hi: Vec<f64>,
    radius: f64,
}

impl BandSupport {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(PwError::InvalidSupport(format!(
                "box bounds must be nonempty and equal length (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        for (s, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(PwError::InvalidSupport(format!(
                    "axis {}: [{l}, {h}] is not a finite closed interval",
                    s + 1
                )));
            }
        }
        let radius = box_radius(&lo, &hi);
        Ok(BandSupport { lo, hi, radius })
    }

    /// The cube `[-half, half]^n`.
    pub fn cube(n: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; n], vec![half; n])
    }

    /// Shrinks the ball radius to `bound` when that is tighter than the box.
    pub fn with_radius_bound(mut self, bound: f64) -> Self {
        if bound.is_finite() && bound >= 0.0 && bound < self.radius {
            self.radius = bound;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Radius of the origin-centred ball used by all ball-based bounds.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Radius of the smallest origin-centred ball containing the box.
    pub fn box_radius(&self) -> f64 {
        box_radius(&self.lo, &self.hi)
    }

    pub fn width(&self, s: usize) -> f64 {
        self.hi[s] - self.lo[s]
    }

    pub fn box_volume(&self) -> f64 {
        (0..self.dim()).map(|s| self.width(s)).product()
    }

    /// Volume of the ball of radius [`radius`](Self::radius) in `ℝⁿ`.
    pub fn ball_volume(&self) -> f64 {
        ball_volume(self.dim(), self.radius)
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&l, &h))| (l..=h).contains(&x))
    }
}

fn box_radius(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(&l, &h)| (l * l).max(h * h)).sum::<f64>().sqrt()
}

/// Volume of the `k`-dimensional Euclidean ball of radius `r`.
pub fn ball_volume(k: usize, r: f64) -> f64 {
    // V_0 = 1, V_1 = 2r, V_k = V_{k-2} · 2πr²/k
    let (mut even, mut odd) = (1.0, 2.0 * r);
    if k == 0 {
        return even;
    }
    for d in 2..=k {
        let v = if d % 2 == 0 { &mut even } else { &mut odd };
        *v *= 2.0 * std::f64::consts::PI * r * r / d as f64;
    }
    if k % 2 == 0 {
        even
    } else {
        odd
    }
}

/// How a support box is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// The same node count on every axis, whatever its width.
    NodesPerAxis(usize),
    /// A fixed number of intervals per unit length.
    IntervalsPerUnit(usize),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::NodesPerAxis(257)
    }
}

impl GridSpec {
    pub fn counts_for(&self, support: &BandSupport) -> Result<Vec<usize>> {
        let counts: Vec<usize> = (0..support.dim())
            .map(|s| match *self {
                GridSpec::NodesPerAxis(n) => n,
                GridSpec::IntervalsPerUnit(k) => (support.width(s) * k as f64).ceil() as usize + 1,
            })
            .collect();
        if counts.iter().any(|&c| c < 2) {
            return Err(PwError::Precondition(format!(
                "grid {self:?} yields fewer than two nodes on some axis"
            )));
        }
        Ok(counts)
    }
}

fn check_budget(counts: &[usize]) -> Result<usize> {
    let mut total: usize = 1;
    for &c in counts {
        total = total.checked_mul(c).unwrap_or(usize::MAX);
    }
    if total > DEFAULT_NODE_BUDGET {
        return Err(PwError::ResourceExhausted {
            nodes: total,
            budget: DEFAULT_NODE_BUDGET,
        });
    }
    Ok(total)
}

/// Per-axis trapezoid weights `h/2, h, …, h, h/2`.
fn trapezoid_weights(count: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; count];
    w[0] = h / 2.0;
    w[count - 1] = h / 2.0;
    w
}

/// Derivative norms that drive the per-call trapezoid error estimate.
#[derive(Debug, Clone, PartialEq)]
struct QuadratureProfile {
    l1: f64,
    /// `∫ |∂_s g|` per axis, from forward differences.
    variation: Vec<f64>,
    /// `∫ |∂_s² g|` per axis, from central second differences.
    curvature: Vec<f64>,
}

/// Exact description of a density obtained as `v ↦ scale · g(M v) · e^{i(c, v)}`
/// from a grid density `g`.
#[derive(Debug, Clone)]
pub struct Pullback {
    base: SpectralDensity,
    map: DMatrix<f64>,
    map_inv_t: DMatrix<f64>,
    scale: f64,
    phase: DVector<f64>,
    eval_factor: f64,
}

impl Pullback {
    pub fn base(&self) -> &SpectralDensity {
        &self.base
    }

    /// The linear map `M` with `u = M v`.
    pub fn map(&self) -> &DMatrix<f64> {
        &self.map
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn phase(&self) -> &DVector<f64> {
        &self.phase
    }

    fn value_at(&self, v: &[f64]) -> Complex64 {
        let u = &self.map * DVector::from_column_slice(v);
        let g = self.base.interpolate(u.as_slice());
        if g == Complex64::new(0.0, 0.0) {
            return g;
        }
        let angle: f64 = self.phase.iter().zip(v).map(|(c, x)| c * x).sum();
        g * Complex64::from_polar(self.scale, angle)
    }

    /// Base-space point `M^{-T}(w + c)` at which the base quadrature is taken.
    fn base_point(&self, w: &[Complex64]) -> Vec<Complex64> {
        let n = w.len();
        (0..n)
            .map(|r| (0..n).map(|k| (w[k] + self.phase[k]) * self.map_inv_t[(r, k)]).sum())
            .collect()
    }
}

/// A complex density sampled on a uniform grid that covers its support box
/// exactly, with tensor trapezoid weights.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    support: BandSupport,
    counts: Vec<usize>,
    values: Vec<Complex64>,
    weights: Vec<Vec<f64>>,
    profile: QuadratureProfile,
    aligned: bool,
    origin: Option<Arc<Pullback>>,
}

/// A quadrature value with its leading-order error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub error_estimate: f64,
}

impl SpectralDensity {
    /// Samples `g` at every grid node. Nodes are `lo + (hi - lo)·k/(N - 1)`.
    pub fn from_fn<F>(support: BandSupport, counts: Vec<usize>, g: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let total = validate_grid(&support, &counts)?;
        let strides = strides(&counts);
        let values: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let u = node_at(&support, &counts, &strides, idx);
                g(&u)
            })
            .collect();
        Ok(Self::assemble(support, counts, values, true, None))
    }

    pub fn from_values(support: BandSupport, counts: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        let total = validate_grid(&support, &counts)?;
        if values.len() != total {
            return Err(PwError::DimensionMismatch {
                expected: total,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(PwError::Domain("density values must be finite".into()));
        }
        Ok(Self::assemble(support, counts, values, true, None))
    }

    /// Materialises `v ↦ scale · g(M v) · e^{i(c, v)}` on a grid over `support`,
    /// keeping the exact description for pointwise use.
    pub(crate) fn from_pullback(
        base: SpectralDensity,
        map: DMatrix<f64>,
        scale: f64,
        phase: DVector<f64>,
        support: BandSupport,
        counts: Vec<usize>,
    ) -> Result<Self> {
        let n = support.dim();
        let det = map.determinant();
        let map_inv_t = map
            .clone()
            .try_inverse()
            .ok_or(PwError::SingularMatrix { det })?
            .transpose();
        let origin = Arc::new(Pullback {
            base,
            map,
            map_inv_t,
            scale,
            phase,
            eval_factor: scale / det.abs(),
        });
        let total = validate_grid(&support, &counts)?;
        let strides = strides(&counts);
        let values: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|idx| origin.value_at(&node_at(&support, &counts, &strides, idx)))
            .collect();
        // Nodes of the new grid land on base nodes only for diagonal maps whose
        // scaled spacing matches the base spacing.
        let aligned = origin.base.aligned
            && (0..n).all(|s| {
                (0..n).all(|r| r == s || origin.map[(r, s)] == 0.0) && {
                    let h_new = support.width(s) / (counts[s] - 1) as f64;
                    let mapped = (origin.map[(s, s)] * h_new).abs();
                    (mapped - origin.base.spacing(s)).abs() <= 1e-12 * mapped.max(1e-300)
                }
            });
        Ok(Self::assemble(support, counts, values, aligned, Some(origin)))
    }

    fn assemble(
        support: BandSupport,
        counts: Vec<usize>,
        values: Vec<Complex64>,
        aligned: bool,
        origin: Option<Arc<Pullback>>,
    ) -> Self {
        let weights: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(s, &c)| trapezoid_weights(c, support.width(s) / (c - 1) as f64))
            .collect();
        let profile = profile(&counts, &weights, &values, &support);
        SpectralDensity {
            support,
            counts,
            values,
            weights,
            profile,
            aligned,
            origin,
        }
    }

    /// Shrinks the support ball radius; see [`BandSupport::with_radius_bound`].
    pub fn with_radius_bound(mut self, bound: f64) -> Self {
        self.support = self.support.with_radius_bound(bound);
        self
    }

    pub(crate) fn with_alignment(mut self, aligned: bool) -> Self {
        self.aligned = self.aligned && aligned;
        self
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &BandSupport {
        &self.support
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self, s: usize) -> f64 {
        self.support.width(s) / (self.counts[s] - 1) as f64
    }

    pub fn axis_nodes(&self, s: usize) -> Vec<f64> {
        (0..self.counts[s]).map(|k| self.node_coord(s, k)).collect()
    }

    pub fn node_coord(&self, s: usize, k: usize) -> f64 {
        axis_coord(&self.support, &self.counts, s, k)
    }

    /// Coordinates of node `idx` in row-major order (axis 0 slowest).
    pub fn node(&self, idx: usize) -> Vec<f64> {
        node_at(&self.support, &self.counts, &strides(&self.counts), idx)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn axis_weights(&self, s: usize) -> &[f64] {
        &self.weights[s]
    }

    /// Tensor trapezoid weight of node `idx`.
    pub fn weight(&self, idx: usize) -> f64 {
        let strides = strides(&self.counts);
        (0..self.dim())
            .map(|s| self.weights[s][(idx / strides[s]) % self.counts[s]])
            .product()
    }

    /// Whether every breakpoint of the density sits on a grid node.
    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    /// The exact pullback description, if this density came from an affine transform.
    pub fn origin(&self) -> Option<&Pullback> {
        self.origin.as_deref()
    }

    /// Discrete L² norm `(Σ w |g|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_sum(|g| g.norm_sqr()).sqrt()
    }

    /// Discrete L¹ norm `Σ w |g|`.
    pub fn l1_norm(&self) -> f64 {
        self.profile.l1
    }

    fn weighted_sum(&self, f: impl Fn(Complex64) -> f64) -> f64 {
        let strides = strides(&self.counts);
        self.values
            .iter()
            .enumerate()
            .map(|(idx, &g)| {
                let w: f64 = (0..self.dim())
                    .map(|s| self.weights[s][(idx / strides[s]) % self.counts[s]])
                    .product();
                w * f(g)
            })
            .sum()
    }

    /// The density as a function: exact for pullbacks, multilinear between
    /// nodes otherwise, and zero outside the support box.
    pub fn value_at(&self, u: &[f64]) -> Complex64 {
        match &self.origin {
            Some(p) => p.value_at(u),
            None => self.interpolate(u),
        }
    }

    /// Multilinear interpolation of the stored node values.
    pub fn interpolate(&self, u: &[f64]) -> Complex64 {
        let n = self.dim();
        let mut base = 0usize;
        let mut fracs = Vec::with_capacity(n);
        let strides = strides(&self.counts);
        for s in 0..n {
            let last = (self.counts[s] - 1) as f64;
            let x = (u[s] - self.support.lo[s]) / self.spacing(s);
            if !(x >= -SNAP && x <= last + SNAP) {
                return Complex64::new(0.0, 0.0);
            }
            let x = x.clamp(0.0, last);
            let i0 = (x.floor() as usize).min(self.counts[s] - 2);
            fracs.push(x - i0 as f64);
            base += i0 * strides[s];
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for s in 0..n {
                if corner >> s & 1 == 1 {
                    w *= fracs[s];
                    idx += strides[s];
                } else {
                    w *= 1.0 - fracs[s];
                }
            }
            if w != 0.0 {
                acc += self.values[idx] * w;
            }
        }
        acc
    }

    /// `Σ w g(u) e^{i(u, t)}` over the grid. Pullbacks are evaluated through
    /// their base grid, so the rule stays on the original nodes.
    pub fn eval(&self, t: &[f64]) -> Complex64 {
        let w: Vec<Complex64> = t.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.eval_complex(&w)
    }

    /// Quadrature of `∫ g(u) e^{i(u, w)} du` at a complex point `w ∈ ℂⁿ`.
    pub fn eval_complex(&self, w: &[Complex64]) -> Complex64 {
        match &self.origin {
            Some(p) => p.base.grid_quadrature(&p.base_point(w)) * p.eval_factor,
            None => self.grid_quadrature(w),
        }
    }

    /// [`eval`](Self::eval) together with an `O(h²(1 + |t|²))` error estimate.
    pub fn eval_with_error(&self, t: &[f64]) -> Evaluation {
        match &self.origin {
            Some(p) => {
                let w: Vec<Complex64> = t.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                let bp: Vec<f64> = p.base_point(&w).iter().map(|z| z.re).collect();
                let inner = p.base.eval_with_error(&bp);
                Evaluation {
                    value: inner.value * p.eval_factor,
                    error_estimate: inner.error_estimate * p.eval_factor.abs(),
                }
            }
            None => Evaluation {
                value: self.eval(t),
                error_estimate: self.error_estimate(t),
            },
        }
    }

    /// Leading-order trapezoid error bound at `t`:
    /// `Σ_s h_s²/12 · ∫ |∂_s²(g e^{i(u,t)})|`, expanded with the product rule.
    /// Densities with off-node breakpoints add the first-order jump term.
    pub fn error_estimate(&self, t: &[f64]) -> f64 {
        let p = &self.profile;
        let mut est = 0.0;
        for (s, &ts) in t.iter().enumerate() {
            let h = self.spacing(s);
            est += h * h / 12.0 * (ts * ts * p.l1 + 2.0 * ts.abs() * p.variation[s] + p.curvature[s]);
            if !self.aligned {
                est += h * p.variation[s] / 2.0;
            }
        }
        ERROR_SAFETY * est + ROUNDOFF * p.l1
    }

    fn grid_quadrature(&self, w: &[Complex64]) -> Complex64 {
        let i = Complex64::i();
        let factors: Vec<Vec<Complex64>> = (0..self.dim())
            .map(|s| {
                (0..self.counts[s])
                    .map(|k| (i * w[s] * self.node_coord(s, k)).exp() * self.weights[s][k])
                    .collect()
            })
            .collect();
        contract(&self.values, &self.counts, &factors)
    }
}

/// Contracts a row-major tensor against one vector per axis, last axis first,
/// with compensated summation in a fixed order.
fn contract(values: &[Complex64], counts: &[usize], factors: &[Vec<Complex64>]) -> Complex64 {
    let dot = |chunk: &[Complex64], f: &[Complex64]| {
        let mut sum = NeumaierComplex::default();
        for (v, c) in chunk.iter().zip(f) {
            sum.add(v * c);
        }
        sum.total()
    };
    let last = counts.len() - 1;
    let mut current: Vec<Complex64> = values
        .chunks_exact(counts[last])
        .map(|chunk| dot(chunk, &factors[last]))
        .collect();
    for s in (0..last).rev() {
        current = current
            .chunks_exact(counts[s])
            .map(|chunk| dot(chunk, &factors[s]))
            .collect();
    }
    current[0]
}

#[derive(Default)]
struct NeumaierComplex {
    re: (f64, f64),
    im: (f64, f64),
}

impl NeumaierComplex {
    fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    fn total(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let t = acc.0 + x;
    if acc.0.abs() >= x.abs() {
        acc.1 += (acc.0 - t) + x;
    } else {
        acc.1 += (x - t) + acc.0;
    }
    acc.0 = t;
}

fn validate_grid(support: &BandSupport, counts: &[usize]) -> Result<usize> {
    if counts.len() != support.dim() {
        return Err(PwError::DimensionMismatch {
            expected: support.dim(),
            got: counts.len(),
        });
    }
    for s in 0..support.dim() {
        if support.width(s) <= 0.0 {
            return Err(PwError::InvalidSupport(format!(
                "axis {} has zero width; a density needs a box with interior",
                s + 1
            )));
        }
        if counts[s] < 2 {
            return Err(PwError::Precondition(format!(
                "axis {} needs at least two nodes",
                s + 1
            )));
        }
    }
    check_budget(counts)
}

pub(crate) fn strides(counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; counts.len()];
    for s in (0..counts.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * counts[s + 1];
    }
    strides
}

fn axis_coord(support: &BandSupport, counts: &[usize], s: usize, k: usize) -> f64 {
    let last = counts[s] - 1;
    if k == last {
        support.hi[s]
    } else {
        support.lo[s] + support.width(s) * (k as f64 / last as f64)
    }
}

fn node_at(support: &BandSupport, counts: &[usize], strides: &[usize], idx: usize) -> Vec<f64> {
    (0..counts.len())
        .map(|s| axis_coord(support, counts, s, (idx / strides[s]) % counts[s]))
        .collect()
}

fn profile(counts: &[usize], weights: &[Vec<f64>], values: &[Complex64], support: &BandSupport) -> QuadratureProfile {
    let n = counts.len();
    let strides = strides(counts);
    let mut l1 = 0.0;
    let mut variation = vec![0.0; n];
    let mut curvature = vec![0.0; n];
    let mut index = vec![0usize; n];
    for (idx, &g) in values.iter().enumerate() {
        for s in 0..n {
            index[s] = (idx / strides[s]) % counts[s];
        }
        let w: f64 = (0..n).map(|s| weights[s][index[s]]).product();
        l1 += w * g.norm();
        for s in 0..n {
            let k = index[s];
            let w_other = w / weights[s][k];
            let h = support.width(s) / (counts[s] - 1) as f64;
            if k + 1 < counts[s] {
                variation[s] += w_other * (values[idx + strides[s]] - g).norm();
            }
            if k > 0 && k + 1 < counts[s] {
                let second = values[idx + strides[s]] - g * 2.0 + values[idx - strides[s]];
                curvature[s] += w_other * second.norm() / h;
            }
        }
    }
    QuadratureProfile {
        l1,
        variation,
        curvature,
    }
}
