//! Phase-linearity detection along lines.
//!
//! For a warp `φ` and a line `l(x) = a + x d`, the ratio
//! `Q_j(Δ(x)) / K(Δ(x))` with `Δ(x) = φ(l(x)) − φ(l(0))` equals
//! `e^{iΔ_j(x)}` wherever `K(Δ(x)) ≠ 0`. Its unwrapped argument therefore
//! recovers `φ_j ∘ l` up to a constant, and is affine in `x` for affine `φ`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PwError, Result};
use crate::pwcore::catalog::{k_closed, q_closed};
use crate::pwcore::warp::Warp;

/// Abscissas with `|K(Δ)| < ZERO_GUARD · K(0)` are masked.
pub const ZERO_GUARD: f64 = 1e-8;

/// Wrapped phase increments larger than this are refused as under-resolved.
pub const RESOLUTION_LIMIT: f64 = 0.95 * PI;

/// `l(x) = anchor + x · direction` sampled at strictly increasing abscissas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineProbe {
    anchor: Vec<f64>,
    direction: Vec<f64>,
    abscissas: Vec<f64>,
}

impl LineProbe {
    /// Normalises `direction` to unit length.
    pub fn new(anchor: Vec<f64>, direction: Vec<f64>, abscissas: Vec<f64>) -> Result<Self> {
        if anchor.is_empty() || anchor.len() != direction.len() {
            return Err(PwError::DimensionMismatch {
                expected: anchor.len(),
                got: direction.len(),
            });
        }
        if anchor
            .iter()
            .chain(&direction)
            .chain(&abscissas)
            .any(|x| !x.is_finite())
        {
            return Err(PwError::Domain("line probe entries must be finite".into()));
        }
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(PwError::Precondition("line direction must be nonzero".into()));
        }
        if abscissas.len() < 2 {
            return Err(PwError::Precondition(
                "a line probe needs at least two abscissas".into(),
            ));
        }
        if abscissas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PwError::Precondition("abscissas must be strictly increasing".into()));
        }
        let direction = direction.iter().map(|x| x / norm).collect();
        Ok(LineProbe {
            anchor,
            direction,
            abscissas,
        })
    }

    /// `count` equally spaced abscissas on `[lo, hi]`.
    pub fn uniform(anchor: Vec<f64>, direction: Vec<f64>, lo: f64, hi: f64, count: usize) -> Result<Self> {
        let last = count.saturating_sub(1).max(1) as f64;
        let abscissas = (0..count).map(|k| lo + (hi - lo) * k as f64 / last).collect();
        Self::new(anchor, direction, abscissas)
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn abscissas(&self) -> &[f64] {
        &self.abscissas
    }

    pub fn point(&self, x: f64) -> Vec<f64> {
        self.anchor
            .iter()
            .zip(&self.direction)
            .map(|(a, d)| a + x * d)
            .collect()
    }
}

/// How seeded random probes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Anchors are uniform in `[-anchor_half_width, anchor_half_width]^m`.
    pub anchor_half_width: f64,
    /// Abscissas span `[-extent, extent]`.
    pub extent: f64,
    pub abscissas: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            anchor_half_width: 1.0,
            extent: 1.0,
            abscissas: 201,
        }
    }
}

/// `count` probes in `ℝ^m` drawn from a ChaCha8 stream seeded with `seed`.
/// Directions are uniform in the cube, then normalised.
pub fn seeded_probes(m: usize, count: usize, seed: u64, spec: &ProbeSpec) -> Result<Vec<LineProbe>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(count);
    while probes.len() < count {
        let anchor: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(-spec.anchor_half_width..=spec.anchor_half_width))
            .collect();
        let direction: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if direction.iter().map(|x| x * x).sum::<f64>() < 1e-6 {
            continue;
        }
        probes.push(LineProbe::uniform(
            anchor,
            direction,
            -spec.extent,
            spec.extent,
            spec.abscissas,
        )?);
    }
    Ok(probes)
}

/// Unwrapped phase of `Q_j/K` along a line together with its affine fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub axis: usize,
    pub abscissas: Vec<f64>,
    /// Unwrapped phase in radians; `None` where masked.
    pub phase: Vec<Option<f64>>,
    /// The raw ratio `Q_j(Δ)/K(Δ)`; `None` where masked.
    pub ratio: Vec<Option<Complex64>>,
    pub masked: Vec<bool>,
    /// Number of maximal unmasked runs.
    pub runs: usize,
    pub slope: f64,
    pub intercept: f64,
    /// `max |ψ(x) − (slope·x + intercept)|` over unmasked abscissas.
    pub residual: f64,
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Least-squares line through `(x, y)`; the second entry is the intercept.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, ym - slope * xm)
}

pub fn warp_phase_profile(warp: &Warp, probe: &LineProbe, j: usize) -> Result<PhaseProfile> {
    warp.validate()?;
    if probe.dim() != warp.input_dim() {
        return Err(PwError::DimensionMismatch {
            expected: warp.input_dim(),
            got: probe.dim(),
        });
    }
    let n = warp.output_dim();
    if j == 0 || j > n {
        return Err(PwError::AxisOutOfRange { j, n });
    }
    let origin = warp.apply(probe.anchor());
    let guard = ZERO_GUARD * 2f64.powi(n as i32);
    let ratio: Vec<Option<Complex64>> = probe
        .abscissas
        .iter()
        .map(|&x| {
            let delta: Vec<f64> = warp
                .apply(&probe.point(x))
                .iter()
                .zip(&origin)
                .map(|(p, o)| p - o)
                .collect();
            let k = k_closed(&delta);
            (k.abs() >= guard).then(|| q_closed(&delta, j) / k)
        })
        .collect();
    let masked: Vec<bool> = ratio.iter().map(Option::is_none).collect();
    if masked.iter().all(|&m| m) {
        return Err(PwError::DegenerateLine);
    }

    // Unwrap each maximal unmasked run independently.
    let mut phase: Vec<Option<f64>> = vec![None; ratio.len()];
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    for (k, r) in ratio.iter().enumerate() {
        let Some(r) = r else {
            prev = None;
            continue;
        };
        let raw = r.arg();
        let value = match prev {
            Some((p, last)) if p + 1 == k => {
                let step = wrap(raw - wrap(last));
                if step.abs() > RESOLUTION_LIMIT {
                    return Err(PwError::Resolution {
                        index: p,
                        increment: step,
                    });
                }
                runs.last_mut().expect("run open").push(k);
                last + step
            }
            _ => {
                runs.push(vec![k]);
                raw
            }
        };
        phase[k] = Some(value);
        prev = Some((k, value));
    }

    // Runs carry unknown 2πk offsets: fit one slope with per-run intercepts,
    // shift every run onto the longest one by the nearest multiple of 2π.
    if runs.len() > 1 {
        let xs = &probe.abscissas;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut means = Vec::with_capacity(runs.len());
        for run in &runs {
            let len = run.len() as f64;
            let xm = run.iter().map(|&k| xs[k]).sum::<f64>() / len;
            let ym = run.iter().map(|&k| phase[k].unwrap()).sum::<f64>() / len;
            for &k in run {
                sxx += (xs[k] - xm) * (xs[k] - xm);
                sxy += (xs[k] - xm) * (phase[k].unwrap() - ym);
            }
            means.push((xm, ym));
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercepts: Vec<f64> = means.iter().map(|(xm, ym)| ym - slope * xm).collect();
        let reference = (0..runs.len())
            .max_by(|&a, &b| runs[a].len().cmp(&runs[b].len()).then(b.cmp(&a)))
            .expect("at least one run");
        for (r, run) in runs.iter().enumerate() {
            let offset = ((intercepts[r] - intercepts[reference]) / TAU).round() * TAU;
            if offset != 0.0 {
                for &k in run {
                    phase[k] = phase[k].map(|p| p - offset);
                }
            }
        }
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = probe
        .abscissas
        .iter()
        .zip(&phase)
        .filter_map(|(&x, p)| p.map(|p| (x, p)))
        .unzip();
    let (slope, intercept) = fit_line(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0, f64::max);
    Ok(PhaseProfile {
        axis: j,
        abscissas: probe.abscissas.clone(),
        phase,
        ratio,
        masked,
        runs: runs.len(),
        slope,
        intercept,
        residual,
    })
}

/// Thresholds separating the three verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictTolerances {
    /// Every residual at or below this is affine-consistent.
    pub affine: f64,
    /// Some residual above this is a non-affine witness.
    pub nonaffine: f64,
}

impl Default for VerdictTolerances {
    fn default() -> Self {
        VerdictTolerances {
            affine: 1e-6,
            nonaffine: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    AffineConsistent,
    NonAffine,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResidual {
    /// Index into the probe list.
    pub probe: usize,
    pub axis: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub tolerances: VerdictTolerances,
    /// The largest residual (first in probe-major order on ties); absent for
    /// affine-consistent verdicts.
    pub witness: Option<ProbeResidual>,
    pub max_residual: f64,
    pub residuals: Vec<ProbeResidual>,
}

/// Runs [`warp_phase_profile`] for every probe and every output axis.
/// Affine-consistent means every residual is at most `tol.affine`; this is
/// evidence on finitely many lines, not a proof.
pub fn affinity_verdict(warp: &Warp, probes: &[LineProbe], tol: &VerdictTolerances) -> Result<Verdict> {
    if probes.is_empty() {
        return Err(PwError::Precondition(
            "affinity verdict needs at least one probe".into(),
        ));
    }
    let n = warp.output_dim();
    let residuals: Vec<ProbeResidual> = (0..probes.len() * n)
        .into_par_iter()
        .map(|idx| {
            let (p, j) = (idx / n, idx % n + 1);
            warp_phase_profile(warp, &probes[p], j).map(|prof| ProbeResidual {
                probe: p,
                axis: j,
                residual: prof.residual,
            })
        })
        .collect::<Result<_>>()?;
    let worst = residuals
        .iter()
        .copied()
        .reduce(|best, r| if r.residual > best.residual { r } else { best })
        .expect("nonempty");
    let status = if worst.residual <= tol.affine {
        VerdictStatus::AffineConsistent
    } else if worst.residual > tol.nonaffine {
        VerdictStatus::NonAffine
    } else {
        VerdictStatus::Inconclusive
    };
    Ok(Verdict {
        status,
        tolerances: *tol,
        witness: (status != VerdictStatus::AffineConsistent).then_some(worst),
        max_residual: worst.residual,
        residuals,
    })
}
