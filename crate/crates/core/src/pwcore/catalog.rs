//! Test-function catalog: the box-supported spectra `k`, `p_j`, `q_j` and
//! their inverse transforms `K`, `P_j`, `Q_j` in closed form.
//!
//! With the inversion convention `f(t) = ∫ g(u) e^{i(u,t)} du`:
//!
//! * `K(t)   = ∏_s 2 sin t_s / t_s`, spectrum `1` on `[-1,1]^n`
//! * `P_j(t) = (2 sin² t_j / t_j²) ∏_{s≠j} 2 sin t_s / t_s`, spectrum is the
//!   triangle `max(1 - |u_j|/2, 0)` on axis `j` times the indicator elsewhere
//! * `Q_j(t) = e^{i t_j} K(t)`, spectrum `1` on `[0,2]` along axis `j`
//!
//! Axis indices `j` are 1-based throughout the crate.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PwError, Result};

/// Below this magnitude `sin(x)/x` switches to its Taylor polynomial.
pub const SINC_CROSSOVER: f64 = 1e-4;

/// `sin(x)/x` with the removable singularity at zero filled in.
///
/// Non-finite input propagates as NaN; use [`sinc_safe`] for a checked call.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_CROSSOVER {
        // next term is x^4/120 < 1e-18 here
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Checked [`sinc`]: rejects NaN and infinities.
pub fn sinc_safe(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(PwError::Domain(format!("sinc of non-finite argument {x}")));
    }
    Ok(sinc(x))
}

/// `sin(z)/z` for complex `z`, used for the entire extension of catalog signals.
pub fn sinc_complex(z: Complex64) -> Complex64 {
    if z.norm() < SINC_CROSSOVER {
        Complex64::new(1.0, 0.0) - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `2 sin x / x`, the inverse transform of the indicator of `(-1, 1)`.
#[inline]
pub fn box_factor(x: f64) -> f64 {
    2.0 * sinc(x)
}

/// `2 sin² x / x²`, the inverse transform of the triangle on `(-2, 2)`.
#[inline]
pub fn triangle_factor(x: f64) -> f64 {
    let s = sinc(x);
    2.0 * s * s
}

/// Spectral triangle `max(1 - |u|/2, 0)`.
#[inline]
pub fn triangle(u: f64) -> f64 {
    (1.0 - u.abs() / 2.0).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "j")]
pub enum CatalogKind {
    K,
    P(usize),
    Q(usize),
}

impl CatalogKind {
    /// The 1-based axis index carried by `P_j` and `Q_j`.
    pub fn axis(&self) -> Option<usize> {
        match *self {
            CatalogKind::K => None,
            CatalogKind::P(j) | CatalogKind::Q(j) => Some(j),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(PwError::Precondition("dimension must be at least 1".into()));
        }
        match self.axis() {
            Some(j) if j == 0 || j > n => Err(PwError::AxisOutOfRange { j, n }),
            _ => Ok(()),
        }
    }

    /// Spectral support box `(lo, hi)` per axis.
    pub fn support_box(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![-1.0; n];
        let mut hi = vec![1.0; n];
        match *self {
            CatalogKind::K => {}
            CatalogKind::P(j) => {
                lo[j - 1] = -2.0;
                hi[j - 1] = 2.0;
            }
            CatalogKind::Q(j) => {
                lo[j - 1] = 0.0;
                hi[j - 1] = 2.0;
            }
        }
        (lo, hi)
    }

    /// Spectral density at `u` (unshifted).
    pub fn density(&self, u: &[f64]) -> f64 {
        let inside = |x: f64, lo: f64, hi: f64| (lo..=hi).contains(&x);
        let mut value = 1.0;
        for (s, &x) in u.iter().enumerate() {
            let axis = s + 1;
            value *= match *self {
                CatalogKind::P(j) if j == axis => triangle(x),
                CatalogKind::Q(j) if j == axis => inside(x, 0.0, 2.0) as u8 as f64,
                _ => inside(x, -1.0, 1.0) as u8 as f64,
            };
            if value == 0.0 {
                break;
            }
        }
        value
    }

    /// Closed-form value at `t` (unshifted).
    pub fn closed_form(&self, t: &[f64]) -> Complex64 {
        match *self {
            CatalogKind::K => Complex64::new(k_closed(t), 0.0),
            CatalogKind::P(j) => Complex64::new(p_closed(t, j), 0.0),
            CatalogKind::Q(j) => q_closed(t, j),
        }
    }

    /// Closed-form entire extension at a complex point `w ∈ ℂⁿ`.
    pub fn closed_form_complex(&self, w: &[Complex64]) -> Complex64 {
        let two = Complex64::new(2.0, 0.0);
        let i = Complex64::i();
        let mut value = Complex64::new(1.0, 0.0);
        for (s, &x) in w.iter().enumerate() {
            let axis = s + 1;
            value *= match *self {
                CatalogKind::P(j) if j == axis => {
                    let sc = sinc_complex(x);
                    two * sc * sc
                }
                CatalogKind::Q(j) if j == axis => (i * x).exp() * two * sinc_complex(x),
                _ => two * sinc_complex(x),
            };
        }
        value
    }

    /// Squared L² norm of the spectral density, `∫ |g|²`.
    pub fn spectral_energy(&self, n: usize) -> f64 {
        let base = 2f64.powi(n as i32);
        match self {
            // ∫ (1 - |u|/2)² over (-2, 2) is 4/3, against 2 for the indicator.
            CatalogKind::P(_) => base * (4.0 / 3.0) / 2.0,
            _ => base,
        }
    }

    /// Human-readable closed form, e.g. `2 sin t / t` for `K` in one dimension.
    pub fn closed_form_string(&self, n: usize) -> String {
        let var = |s: usize| {
            if n == 1 {
                "t".to_string()
            } else {
                format!("t_{s}")
            }
        };
        let mut factors = Vec::with_capacity(n + 1);
        for s in 1..=n {
            let v = var(s);
            match *self {
                CatalogKind::P(j) if j == s => factors.push(format!("2 sin^2 {v} / {v}^2")),
                CatalogKind::Q(j) if j == s => {
                    factors.push(format!("e^(i {v})"));
                    factors.push(format!("2 sin {v} / {v}"));
                }
                _ => factors.push(format!("2 sin {v} / {v}")),
            }
        }
        if factors.len() == 1 {
            factors.pop().unwrap_or_default()
        } else {
            factors
                .iter()
                .map(|f| {
                    if f.starts_with("e^") {
                        f.clone()
                    } else {
                        format!("({f})")
                    }
                })
                .collect::<Vec<_>>()
                .join(" * ")
        }
    }
}

impl fmt::Display for CatalogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogKind::K => write!(f, "K"),
            CatalogKind::P(j) => write!(f, "P_{j}"),
            CatalogKind::Q(j) => write!(f, "Q_{j}"),
        }
    }
}

pub fn k_closed(t: &[f64]) -> f64 {
    t.iter().map(|&x| box_factor(x)).product()
}

pub fn p_closed(t: &[f64], j: usize) -> f64 {
    t.iter()
        .enumerate()
        .map(|(s, &x)| if s + 1 == j { triangle_factor(x) } else { box_factor(x) })
        .product()
}

pub fn q_closed(t: &[f64], j: usize) -> Complex64 {
    let modulation = Complex64::from_polar(1.0, t[j - 1]);
    let k: f64 = t.iter().map(|&x| box_factor(x)).product();
    modulation * k
}

/// Which catalog identity to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identity {
    /// `Q_j(t) = e^{i t_j} K(t)`
    Modulation,
    /// `2i P_j(t) Q_j(t) t_j = Q_j(t)² - K(t)²`
    Quadratic,
}

/// Both sides of a catalog identity at `t`.
pub fn identity_sides(t: &[f64], j: usize, which: Identity) -> Result<(Complex64, Complex64)> {
    if t.iter().any(|x| !x.is_finite()) {
        return Err(PwError::Domain("identity point must be finite".into()));
    }
    CatalogKind::Q(j).validate(t.len())?;
    let k = Complex64::new(k_closed(t), 0.0);
    let q = q_closed(t, j);
    Ok(match which {
        Identity::Modulation => {
            // Evaluate the product in a different order than q_closed does.
            let mut rhs = Complex64::from_polar(1.0, t[j - 1]);
            for &x in t.iter().rev() {
                rhs *= box_factor(x);
            }
            (q, rhs)
        }
        Identity::Quadratic => {
            let p = Complex64::new(p_closed(t, j), 0.0);
            let lhs = 2.0 * Complex64::i() * p * q * t[j - 1];
            (lhs, q * q - k * k)
        }
    })
}

/// `|LHS − RHS|` for the requested catalog identity.
pub fn identity_residual(t: &[f64], j: usize, which: Identity) -> Result<f64> {
    let (lhs, rhs) = identity_sides(t, j, which)?;
    Ok((lhs - rhs).norm())
}
