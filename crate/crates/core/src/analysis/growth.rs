//! Exponential-type growth of a bandlimited function along complex lines.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PwError, Result};
use crate::pwcore::density::ball_volume;
use crate::pwcore::signal::{eval_pw_complex_on_line, PwSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub z: Complex64,
    /// `|F(z)|` by quadrature.
    pub modulus: f64,
    /// `e^{r|b||z|} |B|^{1/2} ‖f̂‖₂`.
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Ball radius `r` of the spectral support.
    pub radius: f64,
    /// Volume `|B|` of that ball.
    pub ball_volume: f64,
    /// Discrete `‖f̂‖₂` on the density grid.
    pub l2_norm: f64,
    pub rows: Vec<GrowthRow>,
    pub min_margin: f64,
}

/// Margins `e^{r|b||z|}·|B|^{1/2}·‖f̂‖₂ − |F(z)|` for `F(z) = f(a + z b)`.
///
/// `F` and `‖f̂‖₂` come from the same trapezoid grid, and the grid weights sum
/// to the box volume `≤ |B|`, so the discrete inequality holds exactly up to
/// rounding.
pub fn exp_type_bound_check(f: &PwSignal, a: &[f64], b: &[f64], zs: &[Complex64]) -> Result<GrowthReport> {
    if zs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(PwError::Domain("complex abscissas must be finite".into()));
    }
    let density = f.spectral()?;
    let radius = density.support().radius();
    let volume = ball_volume(density.dim(), radius);
    let l2 = density.l2_norm();
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let base = volume.sqrt() * l2;
    let rows: Vec<GrowthRow> = zs
        .par_iter()
        .map(|&z| {
            let modulus = eval_pw_complex_on_line(f, a, b, z)?.norm();
            let bound = (radius * b_norm * z.norm()).exp() * base;
            Ok(GrowthRow {
                z,
                modulus,
                bound,
                margin: bound - modulus,
            })
        })
        .collect::<Result<_>>()?;
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(GrowthReport {
        radius,
        ball_volume: volume,
        l2_norm: l2,
        rows,
        min_margin,
    })
}

/// `count` points `radius · e^{2πik/count}` on a circle.
pub fn circle(radius: f64, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|k| Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / count as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwcore::catalog::CatalogKind;
    use crate::pwcore::density::{BandSupport, SpectralDensity};
    use crate::pwcore::signal::{eval_pw, make_catalog};
    use std::f64::consts::E;

    fn unit(nodes: usize) -> PwSignal {
        PwSignal::from_density(
            SpectralDensity::from_fn(BandSupport::cube(1, 1.0).unwrap(), vec![nodes], |_| {
                Complex64::new(1.0, 0.0)
            })
            .unwrap(),
        )
    }

    #[test]
    fn unit_interval_at_i() {
        let rep = exp_type_bound_check(&unit(4097), &[0.0], &[1.0], &[Complex64::i()]).unwrap();
        let row = rep.rows[0];
        assert!((rep.l2_norm - 2f64.sqrt()).abs() < 1e-14);
        assert!((rep.ball_volume - 2.0).abs() < 1e-15);
        assert!((row.bound - 2.0 * E).abs() < 1e-12);
        // Oracle: F(i) = e − 1/e, margin 2e − (e − 1/e) = 3.0861612696304875570.
        assert!((row.modulus - (E - 1.0 / E)).abs() < 1e-6);
        assert!((row.margin - 3.086_161_269_630_487_6).abs() < 1e-6);
    }

    #[test]
    fn zero_is_the_cauchy_inequality() {
        let f = make_catalog(2, CatalogKind::P(1)).unwrap();
        let a = [0.3, -0.2];
        let rep = exp_type_bound_check(&f, &a, &[1.0, 1.0], &[Complex64::new(0.0, 0.0)]).unwrap();
        let row = rep.rows[0];
        assert!((row.modulus - eval_pw(&f, &a).unwrap().norm()).abs() < 1e-3);
        assert!(row.margin >= 0.0);
    }

    #[test]
    fn circle_sweep_for_k() {
        let f = make_catalog(2, CatalogKind::K).unwrap();
        let rep = exp_type_bound_check(&f, &[0.5, 0.1], &[0.6, -0.8], &circle(5.0, 64)).unwrap();
        assert_eq!(rep.rows.len(), 64);
        assert!(rep.min_margin >= 0.0, "{}", rep.min_margin);
    }
}
