use std::sync::OnceLock;

use num_complex::Complex64;

use super::catalog::CatalogKind;
use super::density::{BandSupport, Evaluation, GridSpec, SpectralDensity};
use crate::error::{PwError, Result};

/// Anything that can be sampled pointwise on `ℝⁿ`.
pub trait Evaluable: Sync {
    fn dim(&self) -> usize;

    /// Unchecked pointwise value; callers guarantee `t.len() == dim()`.
    fn eval(&self, t: &[f64]) -> Complex64;
}

/// Adapts a closure into an [`Evaluable`].
pub struct FnSignal<F> {
    dim: usize,
    f: F,
}

impl<F> FnSignal<F>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnSignal { dim, f }
    }
}

impl<F> Evaluable for FnSignal<F>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: &[f64]) -> Complex64 {
        (self.f)(t)
    }
}

/// A catalog function `t ↦ X(t - shift)` with `X ∈ {K, P_j, Q_j}`.
///
/// The spectral representation is built on first use from `grid`.
#[derive(Debug, Clone)]
pub struct CatalogSignal {
    kind: CatalogKind,
    dim: usize,
    shift: Vec<f64>,
    grid: GridSpec,
    spectral: OnceLock<SpectralDensity>,
}

impl CatalogSignal {
    pub fn kind(&self) -> CatalogKind {
        self.kind
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn support(&self) -> BandSupport {
        let (lo, hi) = self.kind.support_box(self.dim);
        BandSupport::new(lo, hi).expect("catalog boxes are well formed")
    }

    pub fn closed_form(&self, t: &[f64]) -> Complex64 {
        if self.shift.iter().all(|&c| c == 0.0) {
            return self.kind.closed_form(t);
        }
        let shifted: Vec<f64> = t.iter().zip(&self.shift).map(|(x, c)| x - c).collect();
        self.kind.closed_form(&shifted)
    }

    /// Spectral density `g(u) e^{-i(u, shift)}` sampled on the catalog grid.
    pub fn spectral(&self) -> Result<&SpectralDensity> {
        if let Some(d) = self.spectral.get() {
            return Ok(d);
        }
        let support = self.support();
        let counts = self.grid.counts_for(&support)?;
        let kind = self.kind;
        let shift = self.shift.clone();
        let density = SpectralDensity::from_fn(support, counts, move |u| {
            let g = kind.density(u);
            if g == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let angle: f64 = u.iter().zip(&shift).map(|(a, c)| a * c).sum();
            Complex64::from_polar(g, -angle)
        })?;
        let _ = self.spectral.set(density);
        Ok(self.spectral.get().expect("initialised above"))
    }
}

#[derive(Debug, Clone)]
pub enum Representation {
    Spectral(SpectralDensity),
    Catalog(CatalogSignal),
}

/// A bandlimited function on `ℝⁿ`, `f(t) = ∫ g(u) e^{i(u,t)} du`.
#[derive(Debug, Clone)]
pub struct PwSignal {
    rep: Representation,
}

impl PwSignal {
    pub fn from_density(density: SpectralDensity) -> Self {
        PwSignal {
            rep: Representation::Spectral(density),
        }
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    pub fn catalog(&self) -> Option<&CatalogSignal> {
        match &self.rep {
            Representation::Catalog(c) => Some(c),
            Representation::Spectral(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.rep {
            Representation::Spectral(d) => d.dim(),
            Representation::Catalog(c) => c.dim,
        }
    }

    pub fn support(&self) -> BandSupport {
        match &self.rep {
            Representation::Spectral(d) => d.support().clone(),
            Representation::Catalog(c) => c.support(),
        }
    }

    /// The spectral representation, converting catalog signals on demand.
    pub fn spectral(&self) -> Result<&SpectralDensity> {
        match &self.rep {
            Representation::Spectral(d) => Ok(d),
            Representation::Catalog(c) => c.spectral(),
        }
    }
}

impl Evaluable for PwSignal {
    fn dim(&self) -> usize {
        PwSignal::dim(self)
    }

    fn eval(&self, t: &[f64]) -> Complex64 {
        match &self.rep {
            Representation::Catalog(c) => c.closed_form(t),
            Representation::Spectral(d) => d.eval(t),
        }
    }
}

/// `K`, `P_j` or `Q_j` on `ℝⁿ` with the default spectral grid.
pub fn make_catalog(n: usize, kind: CatalogKind) -> Result<PwSignal> {
    make_catalog_with(n, kind, vec![0.0; n], GridSpec::default())
}

/// Catalog signal translated by `shift`, with an explicit spectral grid.
pub fn make_catalog_with(n: usize, kind: CatalogKind, shift: Vec<f64>, grid: GridSpec) -> Result<PwSignal> {
    kind.validate(n)?;
    if shift.len() != n {
        return Err(PwError::DimensionMismatch {
            expected: n,
            got: shift.len(),
        });
    }
    check_finite(&shift, "shift")?;
    Ok(PwSignal {
        rep: Representation::Catalog(CatalogSignal {
            kind,
            dim: n,
            shift,
            grid,
            spectral: OnceLock::new(),
        }),
    })
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PwError::Domain(format!("{what} must be finite")))
    }
}

fn check_point(f: &PwSignal, t: &[f64], what: &str) -> Result<()> {
    if t.len() != f.dim() {
        return Err(PwError::DimensionMismatch {
            expected: f.dim(),
            got: t.len(),
        });
    }
    check_finite(t, what)
}

/// Pointwise value: closed form for catalog signals, trapezoid quadrature
/// for spectral ones.
pub fn eval_pw(f: &PwSignal, t: &[f64]) -> Result<Complex64> {
    check_point(f, t, "evaluation point")?;
    Ok(f.eval(t))
}

/// [`eval_pw`] with the quadrature error estimate (zero for closed forms).
pub fn eval_pw_with_error(f: &PwSignal, t: &[f64]) -> Result<Evaluation> {
    check_point(f, t, "evaluation point")?;
    Ok(match &f.rep {
        Representation::Catalog(c) => Evaluation {
            value: c.closed_form(t),
            error_estimate: 0.0,
        },
        Representation::Spectral(d) => d.eval_with_error(t),
    })
}

/// The entire extension `F(z) = ∫ g(u) e^{i(u,a)} e^{iz(u,b)} du` of
/// `x ↦ f(a + x b)`, by quadrature of the spectral representation.
pub fn eval_pw_complex_on_line(f: &PwSignal, a: &[f64], b: &[f64], z: Complex64) -> Result<Complex64> {
    check_point(f, a, "line anchor")?;
    check_point(f, b, "line direction")?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(PwError::Domain("complex abscissa must be finite".into()));
    }
    let density = f.spectral()?;
    let w: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| Complex64::new(ai, 0.0) + z * bi)
        .collect();
    Ok(density.eval_complex(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn indicator_1d() -> PwSignal {
        let support = BandSupport::cube(1, 1.0).unwrap();
        PwSignal::from_density(SpectralDensity::from_fn(support, vec![2049], |_| Complex64::new(1.0, 0.0)).unwrap())
    }

    #[test]
    fn catalog_supports() {
        let k = make_catalog(1, CatalogKind::K).unwrap();
        assert_eq!(k.support().lo(), &[-1.0]);
        let p = make_catalog(2, CatalogKind::P(2)).unwrap();
        assert_eq!(p.support().lo(), &[-1.0, -2.0]);
        let q = make_catalog(3, CatalogKind::Q(1)).unwrap();
        assert_eq!(q.support().lo(), &[0.0, -1.0, -1.0]);
        assert_eq!(q.support().hi(), &[2.0, 1.0, 1.0]);
        assert!(matches!(
            make_catalog(1, CatalogKind::P(2)),
            Err(PwError::AxisOutOfRange { j: 2, n: 1 })
        ));
    }

    #[test]
    fn catalog_values() {
        let k1 = make_catalog(1, CatalogKind::K).unwrap();
        assert!((eval_pw(&k1, &[0.5]).unwrap().re - 2.0 * 0.5f64.sin() / 0.5).abs() < 1e-15);
        assert!(eval_pw(&k1, &[PI]).unwrap().norm() < 1e-15);
        let k2 = make_catalog(2, CatalogKind::K).unwrap();
        assert_eq!(eval_pw(&k2, &[0.0, 0.0]).unwrap(), Complex64::new(4.0, 0.0));
        assert!(eval_pw(&k2, &[0.0]).is_err());
        assert!(eval_pw(&k2, &[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn q_at_half_pi_by_quadrature() {
        let q = make_catalog_with(1, CatalogKind::Q(1), vec![0.0], GridSpec::NodesPerAxis(4097)).unwrap();
        let expected = Complex64::new(0.0, 4.0 / PI);
        let quad = q.spectral().unwrap().eval_with_error(&[PI / 2.0]);
        assert!((quad.value - expected).norm() <= quad.error_estimate);
        assert!((quad.value - expected).norm() < 1e-6);
        assert!((eval_pw(&q, &[PI / 2.0]).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn spectral_indicator_examples() {
        let f = indicator_1d();
        assert!((eval_pw(&f, &[0.0]).unwrap() - Complex64::new(2.0, 0.0)).norm() < 1e-13);
        let e = eval_pw_with_error(&f, &[1.0]).unwrap();
        let exact = 2.0 * 1f64.sin();
        assert!((e.value.re - exact).abs() <= e.error_estimate);
        assert!((e.value.re - 1.68294).abs() < 1e-5);
    }

    #[test]
    fn complex_line_examples() {
        let f = indicator_1d();
        let fi = eval_pw_complex_on_line(&f, &[0.0], &[1.0], Complex64::i()).unwrap();
        assert!((fi.re - (E - 1.0 / E)).abs() < 1e-6);
        assert!(fi.im.abs() < 1e-14);
        let f0 = eval_pw_complex_on_line(&f, &[0.7], &[1.0], Complex64::new(0.0, 0.0)).unwrap();
        assert!((f0 - eval_pw(&f, &[0.7]).unwrap()).norm() < 1e-14);
        let x = 2.3;
        let fx = eval_pw_complex_on_line(&f, &[0.0], &[1.0], Complex64::new(x, 0.0)).unwrap();
        let e = eval_pw_with_error(&f, &[x]).unwrap();
        assert!((fx.re - 2.0 * x.sin() / x).abs() <= e.error_estimate);
    }

    #[test]
    fn shifted_catalog_matches_spectral_rep() {
        let f = make_catalog_with(2, CatalogKind::P(1), vec![0.4, -1.1], GridSpec::IntervalsPerUnit(64)).unwrap();
        let d = f.spectral().unwrap();
        for t in [[0.3, 0.2], [-2.0, 1.5], [4.0, -3.0]] {
            let e = d.eval_with_error(&t);
            let diff = (e.value - eval_pw(&f, &t).unwrap()).norm();
            assert!(diff <= e.error_estimate, "t={t:?} diff={diff} est={}", e.error_estimate);
        }
    }
}
