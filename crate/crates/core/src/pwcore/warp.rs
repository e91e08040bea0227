//! Continuous maps `ℝ^m → ℝⁿ` built from affine maps and coordinatewise
//! non-affine perturbations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::map::AffineMap;
use super::signal::Evaluable;
use crate::error::{PwError, Result};

/// A warp expression. Axis indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Warp {
    Affine(AffineMap),
    /// `t_axis ↦ t_axis^exponent`, other coordinates untouched.
    Power {
        dim: usize,
        axis: usize,
        exponent: u32,
    },
    /// `t_axis ↦ t_axis + amplitude · sin(frequency · t_axis)`.
    Sine {
        dim: usize,
        axis: usize,
        amplitude: f64,
        frequency: f64,
    },
    /// `outer ∘ inner`.
    Compose {
        outer: Box<Warp>,
        inner: Box<Warp>,
    },
}

impl Warp {
    pub fn identity(n: usize) -> Self {
        Warp::Affine(AffineMap::identity(n))
    }

    pub fn compose(outer: Warp, inner: Warp) -> Result<Self> {
        let w = Warp::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        };
        w.validate()?;
        Ok(w)
    }

    /// Checks dimensions, axes and parameters through the whole tree.
    pub fn validate(&self) -> Result<()> {
        match self {
            Warp::Affine(_) => Ok(()),
            Warp::Power { dim, axis, .. } => check_axis(*dim, *axis),
            Warp::Sine {
                dim,
                axis,
                amplitude,
                frequency,
            } => {
                check_axis(*dim, *axis)?;
                if !amplitude.is_finite() || !frequency.is_finite() {
                    return Err(PwError::Domain("sine warp parameters must be finite".into()));
                }
                Ok(())
            }
            Warp::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
                if outer.input_dim() != inner.output_dim() {
                    return Err(PwError::DimensionMismatch {
                        expected: outer.input_dim(),
                        got: inner.output_dim(),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Warp::Affine(a) => a.input_dim(),
            Warp::Power { dim, .. } | Warp::Sine { dim, .. } => *dim,
            Warp::Compose { inner, .. } => inner.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Warp::Affine(a) => a.output_dim(),
            Warp::Power { dim, .. } | Warp::Sine { dim, .. } => *dim,
            Warp::Compose { outer, .. } => outer.output_dim(),
        }
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        match self {
            Warp::Affine(a) => a.apply(t),
            Warp::Power { axis, exponent, .. } => {
                let mut out = t.to_vec();
                out[axis - 1] = t[axis - 1].powi(*exponent as i32);
                out
            }
            Warp::Sine {
                axis,
                amplitude,
                frequency,
                ..
            } => {
                let mut out = t.to_vec();
                let x = t[axis - 1];
                out[axis - 1] = x + amplitude * (frequency * x).sin();
                out
            }
            Warp::Compose { outer, inner } => outer.apply(&inner.apply(t)),
        }
    }

    /// Exact Jacobian `∂φ/∂t` at `t`, an `n × m` matrix.
    pub fn jacobian(&self, t: &[f64]) -> DMatrix<f64> {
        match self {
            Warp::Affine(a) => a.matrix().clone(),
            Warp::Power { dim, axis, exponent } => {
                let mut j = DMatrix::identity(*dim, *dim);
                let x = t[axis - 1];
                j[(axis - 1, axis - 1)] = match exponent {
                    0 => 0.0,
                    p => *p as f64 * x.powi(*p as i32 - 1),
                };
                j
            }
            Warp::Sine {
                dim,
                axis,
                amplitude,
                frequency,
            } => {
                let mut j = DMatrix::identity(*dim, *dim);
                let x = t[axis - 1];
                j[(axis - 1, axis - 1)] = 1.0 + amplitude * frequency * (frequency * x).cos();
                j
            }
            Warp::Compose { outer, inner } => outer.jacobian(&inner.apply(t)) * inner.jacobian(t),
        }
    }

    /// Collapses the tree to a single affine map when every node is affine
    /// (including degenerate perturbations such as zero amplitude).
    pub fn as_affine(&self) -> Option<AffineMap> {
        match self {
            Warp::Affine(a) => Some(a.clone()),
            Warp::Power { dim, axis, exponent } => match exponent {
                1 => Some(AffineMap::identity(*dim)),
                0 => {
                    let mut m = DMatrix::identity(*dim, *dim);
                    m[(axis - 1, axis - 1)] = 0.0;
                    let mut b = DVector::zeros(*dim);
                    b[axis - 1] = 1.0;
                    AffineMap::new(m, b).ok()
                }
                _ => None,
            },
            Warp::Sine {
                dim,
                amplitude,
                frequency,
                ..
            } => (*amplitude == 0.0 || *frequency == 0.0).then(|| AffineMap::identity(*dim)),
            Warp::Compose { outer, inner } => outer.as_affine()?.after(&inner.as_affine()?).ok(),
        }
    }

    pub fn is_affine(&self) -> bool {
        self.as_affine().is_some()
    }
}

fn check_axis(dim: usize, axis: usize) -> Result<()> {
    if dim == 0 {
        return Err(PwError::Precondition("warp dimension must be at least 1".into()));
    }
    if axis == 0 || axis > dim {
        return Err(PwError::AxisOutOfRange { j: axis, n: dim });
    }
    Ok(())
}

/// `t ↦ f(φ(t))` as an [`Evaluable`] on `ℝ^m`.
pub struct Warped<'a, S: Evaluable + ?Sized> {
    signal: &'a S,
    warp: &'a Warp,
}

impl<'a, S: Evaluable + ?Sized> Warped<'a, S> {
    pub fn new(signal: &'a S, warp: &'a Warp) -> Result<Self> {
        warp.validate()?;
        if warp.output_dim() != signal.dim() {
            return Err(PwError::DimensionMismatch {
                expected: signal.dim(),
                got: warp.output_dim(),
            });
        }
        Ok(Warped { signal, warp })
    }
}

impl<S: Evaluable + ?Sized> Evaluable for Warped<'_, S> {
    fn dim(&self) -> usize {
        self.warp.input_dim()
    }

    fn eval(&self, t: &[f64]) -> Complex64 {
        self.signal.eval(&self.warp.apply(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(amplitude: f64) -> Warp {
        Warp::Sine {
            dim: 1,
            axis: 1,
            amplitude,
            frequency: 1.0,
        }
    }

    #[test]
    fn all_affine_tree_collapses() {
        let a = Warp::Affine(AffineMap::from_rows(&[vec![2.0]], &[1.0]).unwrap());
        let b = Warp::Affine(AffineMap::from_rows(&[vec![-1.0]], &[3.0]).unwrap());
        let w = Warp::compose(a, Warp::compose(sine(0.0), b).unwrap()).unwrap();
        let collapsed = w.as_affine().unwrap();
        for x in [-2.0, 0.0, 0.7] {
            assert!((collapsed.apply(&[x])[0] - w.apply(&[x])[0]).abs() < 1e-15);
        }
        assert!(!sine(0.5).is_affine());
        let cube = Warp::Power {
            dim: 1,
            axis: 1,
            exponent: 3,
        };
        assert!(!cube.is_affine());
    }

    #[test]
    fn constant_power_is_affine() {
        let w = Warp::Power {
            dim: 2,
            axis: 2,
            exponent: 0,
        };
        let a = w.as_affine().unwrap();
        assert_eq!(a.apply(&[3.0, -5.0]), vec![3.0, 1.0]);
        assert_eq!(w.apply(&[3.0, -5.0]), vec![3.0, 1.0]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let swap = Warp::Affine(AffineMap::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[0.0, 0.0]).unwrap());
        let square = Warp::Power {
            dim: 2,
            axis: 2,
            exponent: 2,
        };
        let wobble = Warp::Sine {
            dim: 2,
            axis: 1,
            amplitude: 0.3,
            frequency: 2.0,
        };
        let w = Warp::compose(wobble, Warp::compose(square, swap).unwrap()).unwrap();
        let t = [0.4, -1.2];
        let j = w.jacobian(&t);
        let h = 1e-6;
        for k in 0..2 {
            let mut tp = t;
            let mut tm = t;
            tp[k] += h;
            tm[k] -= h;
            let (fp, fm) = (w.apply(&tp), w.apply(&tm));
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - j[(i, k)]).abs() < 1e-8, "({i},{k}) {fd} vs {}", j[(i, k)]);
            }
        }
    }

    #[test]
    fn validation_catches_bad_trees() {
        let a = Warp::Affine(AffineMap::from_rows(&[vec![1.0, 1.0]], &[0.0]).unwrap());
        assert!(Warp::compose(a.clone(), a).is_err());
        let bad = Warp::Power {
            dim: 2,
            axis: 3,
            exponent: 2,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let w = Warp::compose(sine(0.5), Warp::identity(1)).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains(r#""type":"compose""#));
        let back: Warp = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }
}
