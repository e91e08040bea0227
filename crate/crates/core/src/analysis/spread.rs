//! Out-of-band spreading of warped bandlimited functions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{PwError, Result};
use crate::pwcore::map::{operator_norm, AffineMap};
use crate::pwcore::signal::Evaluable;
use crate::pwcore::warp::{Warp, Warped};
use crate::spectra::{dft_spectrum, oob_energy, sample_on_grid, SampleGrid, Window};

/// One-parameter warp families `φ_ε` with `φ_0` affine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WarpFamily {
    /// `t_axis ↦ t_axis + ε sin(frequency · t_axis)`.
    SinePerturbation { axis: usize, frequency: f64 },
    /// `t ↦ (1 + ε) t`, affine for every `ε`.
    UniformScaling,
}

impl WarpFamily {
    pub fn member(&self, dim: usize, epsilon: f64) -> Result<Warp> {
        let w = match *self {
            WarpFamily::SinePerturbation { axis, frequency } => Warp::Sine {
                dim,
                axis,
                amplitude: epsilon,
                frequency,
            },
            WarpFamily::UniformScaling => Warp::Affine(AffineMap::linear(
                nalgebra::DMatrix::identity(dim, dim) * (1.0 + epsilon),
            )?),
        };
        w.validate()?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub epsilon: f64,
    pub affine: bool,
    /// `‖Dφ_ε(0)‖_op · r₀`, the radius the band would have if `φ_ε` were its
    /// linearisation at the origin.
    pub radius: f64,
    /// Half width of the grid this row was sampled on.
    pub half_width: f64,
    pub oob: f64,
    /// `oob / baseline`; absent when the baseline is exactly zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadTable {
    pub family: WarpFamily,
    pub grid: SampleGrid,
    pub window: Window,
    pub base_radius: f64,
    /// Out-of-band fraction of the `ε = 0` control: the measured leakage floor.
    pub baseline: f64,
    pub rows: Vec<SpreadRow>,
}

impl SpreadTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epsilon,affine,radius,half_width,oob,ratio")?;
        for r in &self.rows {
            let ratio = r.ratio.map_or(String::new(), |x| x.to_string());
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epsilon, r.affine, r.radius, r.half_width, r.oob, ratio
            )?;
        }
        Ok(())
    }
}

/// Out-of-band fraction of `f ∘ φ` at `radius` on `grid`.
pub fn warped_oob<S: Evaluable + ?Sized>(
    f: &S,
    warp: &Warp,
    grid: &SampleGrid,
    window: Window,
    radius: f64,
) -> Result<f64> {
    let warped = Warped::new(f, warp)?;
    let samples = sample_on_grid(&warped, grid)?;
    Ok(oob_energy(&dft_spectrum(&samples, grid, window)?, radius))
}

/// Samples `f ∘ φ_ε` for `ε = 0` and each requested `ε`, and records the
/// out-of-band fraction at `‖Dφ_ε(0)‖ · r₀`. The `ε = 0` row comes first,
/// is sampled on `grid`, and defines the baseline.
///
/// Row `ε` is sampled on `grid` rescaled by the ratio of its radius to the
/// control radius. The band edge then sits at the same fractional bin as in
/// the control, so the baseline measures the leakage that row would show if
/// `φ_ε` were affine; without this an edge falling between bins reads as
/// spreading.
pub fn nonaffine_spread<S: Evaluable + ?Sized>(
    family: &WarpFamily,
    f: &S,
    grid: &SampleGrid,
    base_radius: f64,
    epsilons: &[f64],
    window: Window,
) -> Result<SpreadTable> {
    if !(base_radius.is_finite() && base_radius >= 0.0) {
        return Err(PwError::Precondition(format!(
            "band radius must be nonnegative, got {base_radius}"
        )));
    }
    let dim = f.dim();
    let control = family.member(dim, 0.0)?;
    if !control.is_affine() {
        return Err(PwError::Precondition(
            "the ε = 0 member of the family must be affine".into(),
        ));
    }
    let mut eps = vec![0.0];
    eps.extend(epsilons.iter().copied().filter(|&e| e != 0.0));
    let origin = vec![0.0; dim];
    let control_radius = operator_norm(&control.jacobian(&origin)) * base_radius;
    let mut rows = Vec::with_capacity(eps.len());
    for &epsilon in &eps {
        let warp = family.member(dim, epsilon)?;
        let radius = operator_norm(&warp.jacobian(&origin)) * base_radius;
        let row_grid = if control_radius > 0.0 && radius > 0.0 {
            grid.rescaled(radius / control_radius)?
        } else {
            *grid
        };
        let oob = warped_oob(f, &warp, &row_grid, window, radius)?;
        rows.push(SpreadRow {
            epsilon,
            affine: warp.is_affine(),
            radius,
            half_width: row_grid.half_width(),
            oob,
            ratio: None,
        });
    }
    let baseline = rows[0].oob;
    for r in &mut rows {
        r.ratio = (baseline > 0.0).then(|| r.oob / baseline);
    }
    Ok(SpreadTable {
        family: *family,
        grid: *grid,
        window,
        base_radius,
        baseline,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwcore::catalog::CatalogKind;
    use crate::pwcore::signal::make_catalog;
    use std::f64::consts::PI;

    #[test]
    fn families() {
        let s = WarpFamily::SinePerturbation {
            axis: 1,
            frequency: 1.0,
        };
        assert!(s.member(1, 0.0).unwrap().is_affine());
        assert!(!s.member(1, 0.5).unwrap().is_affine());
        assert!(WarpFamily::UniformScaling.member(2, 0.7).unwrap().is_affine());
        assert!(WarpFamily::SinePerturbation {
            axis: 2,
            frequency: 1.0
        }
        .member(1, 0.1)
        .is_err());
    }

    #[test]
    fn scaling_stays_at_baseline_and_sine_spreads() {
        let f = make_catalog(1, CatalogKind::K).unwrap();
        let grid = SampleGrid::new(1, 16.0 * PI, 1024).unwrap();
        let scaling =
            nonaffine_spread(&WarpFamily::UniformScaling, &f, &grid, 1.0, &[0.25, 0.5], Window::Hann).unwrap();
        assert_eq!(scaling.rows.len(), 3);
        assert_eq!(scaling.rows[0].epsilon, 0.0);
        assert!((scaling.rows[2].radius - 1.5).abs() < 1e-15);
        for r in &scaling.rows {
            assert!(r.affine);
            assert!((r.ratio.unwrap() - 1.0).abs() < 1e-3, "{r:?}");
        }

        let sine = WarpFamily::SinePerturbation {
            axis: 1,
            frequency: 1.0,
        };
        let t = nonaffine_spread(&sine, &f, &grid, 1.0, &[0.5], Window::Hann).unwrap();
        assert!(t.rows[1].ratio.unwrap() > 10.0, "{:?}", t.rows);

        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("epsilon,affine,radius,half_width,oob,ratio\n0,true,1,"));
    }
}
