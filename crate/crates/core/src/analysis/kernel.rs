//! Constancy along the kernel of a non-injective affine map.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine::kernel_basis;
use crate::error::{PwError, Result};
use crate::pwcore::map::AffineMap;
use crate::pwcore::signal::Evaluable;

/// Deviations below this count as exact constancy.
pub const CONSTANCY_TOL: f64 = 1e-12;

/// Variances below this count as exact constancy.
pub const VARIANCE_TOL: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    /// Orthonormal basis of `ker A`.
    pub kernel: Vec<Vec<f64>>,
    pub shifts: Vec<f64>,
    /// `f(b)`, the value `F(t) = f(At + b)` takes on all of `ker A`.
    pub value_at_offset: Complex64,
    /// `max |F(s v) − F(0)|` over kernel vectors `v` and shifts `s`.
    pub max_deviation: f64,
    /// Mean `|F − mean F|²` over the same samples, including `t = 0`.
    pub variance: f64,
    pub constant: bool,
    /// `|f(b)| > 0`: `F` cannot vanish at infinity, so it is not in any PW space.
    pub decay_violation: bool,
}

/// Samples `F(t) = f(At + b)` at `t = s v` for every kernel vector `v` and
/// shift `s`, and compares with `F(0) = f(b)`.
pub fn kernel_invariance_check<S: Evaluable + ?Sized>(f: &S, map: &AffineMap, shifts: &[f64]) -> Result<KernelReport> {
    if map.output_dim() != f.dim() {
        return Err(PwError::DimensionMismatch {
            expected: f.dim(),
            got: map.output_dim(),
        });
    }
    if shifts.iter().any(|s| !s.is_finite()) {
        return Err(PwError::Domain("shifts must be finite".into()));
    }
    let kernel = kernel_basis(map.matrix());
    if kernel.is_empty() {
        return Err(PwError::WrongRegime(
            "the map is injective, so f∘φ stays bandlimited; use compose_affine".into(),
        ));
    }
    let m = map.input_dim();
    let value_at_offset = f.eval(&map.apply(&vec![0.0; m]));
    let mut samples = vec![value_at_offset];
    for v in &kernel {
        for &s in shifts {
            let t: Vec<f64> = v.iter().map(|x| s * x).collect();
            samples.push(f.eval(&map.apply(&t)));
        }
    }
    let max_deviation = samples.iter().map(|z| (z - value_at_offset).norm()).fold(0.0, f64::max);
    let count = samples.len() as f64;
    let mean: Complex64 = samples.iter().sum::<Complex64>() / count;
    let variance = samples.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / count;
    Ok(KernelReport {
        kernel: kernel.iter().map(|v| v.iter().copied().collect()).collect(),
        shifts: shifts.to_vec(),
        value_at_offset,
        max_deviation,
        variance,
        constant: max_deviation < CONSTANCY_TOL && variance < VARIANCE_TOL,
        decay_violation: value_at_offset.norm() > CONSTANCY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwcore::catalog::CatalogKind;
    use crate::pwcore::signal::make_catalog;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn sinc_on_a_sum_of_coordinates() {
        let f = make_catalog(1, CatalogKind::K).unwrap();
        let map = AffineMap::from_rows(&[vec![1.0, 1.0]], &[0.0]).unwrap();
        let shifts: Vec<f64> = (-20..=20).map(|k| k as f64 * 7.5).collect();
        let rep = kernel_invariance_check(&f, &map, &shifts).unwrap();
        assert_eq!(rep.kernel.len(), 1);
        assert!((rep.kernel[0][0] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((rep.kernel[0][1] + FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(rep.value_at_offset, Complex64::new(2.0, 0.0));
        assert!(rep.variance < VARIANCE_TOL);
        assert!(rep.constant);
        assert!(rep.decay_violation);
    }

    #[test]
    fn zero_at_offset_is_not_a_witness() {
        let f = make_catalog(1, CatalogKind::K).unwrap();
        let map = AffineMap::from_rows(&[vec![1.0, 1.0]], &[PI]).unwrap();
        let rep = kernel_invariance_check(&f, &map, &[-3.0, 1.0, 50.0]).unwrap();
        assert!(rep.constant);
        assert!(!rep.decay_violation);
    }

    #[test]
    fn trivial_shift_and_wrong_regime() {
        let f = make_catalog(2, CatalogKind::Q(2)).unwrap();
        let map = AffineMap::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]], &[0.4, 0.1]).unwrap();
        let rep = kernel_invariance_check(&f, &map, &[0.0]).unwrap();
        assert_eq!(rep.max_deviation, 0.0);
        assert!(rep.constant);

        let inj = AffineMap::identity(2);
        assert!(matches!(
            kernel_invariance_check(&f, &inj, &[1.0]),
            Err(PwError::WrongRegime(_))
        ));
    }
}
