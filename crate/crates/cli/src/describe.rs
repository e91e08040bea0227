use std::fmt;

use pwkit::pwcore::CatalogKind;
use serde::Serialize;

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogDescription {
    pub dim: usize,
    pub kind: CatalogKind,
    pub closed_form: String,
    pub support_lo: Vec<f64>,
    pub support_hi: Vec<f64>,
    pub ball_radius: f64,
    /// `‖f‖₂ = (2π)^{n/2} ‖g‖₂` under `f(t) = ∫ g(u) e^{i(u,t)} du`.
    pub l2_norm: f64,
}

impl fmt::Display for CatalogDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let boxes: Vec<String> = self
            .support_lo
            .iter()
            .zip(&self.support_hi)
            .map(|(l, h)| format!("[{l},{h}]"))
            .collect();
        writeln!(f, "{}, support {}", self.closed_form, boxes.join(" x "))?;
        writeln!(f, "{} on R^{}, band radius {}", self.kind, self.dim, self.ball_radius)?;
        write!(f, "L2 norm {}", self.l2_norm)
    }
}

pub fn describe_catalog(n: usize, kind: CatalogKind) -> CliResult<CatalogDescription> {
    kind.validate(n)?;
    let (lo, hi) = kind.support_box(n);
    let ball_radius = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| l.abs().max(h.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let l2_norm = (std::f64::consts::TAU.powi(n as i32) * kind.spectral_energy(n)).sqrt();
    Ok(CatalogDescription {
        dim: n,
        kind,
        closed_form: kind.closed_form_string(n),
        support_lo: lo,
        support_hi: hi,
        ball_radius,
        l2_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;
    use pwkit::PwError;

    #[test]
    fn one_dimensional_sinc() {
        let d = describe_catalog(1, CatalogKind::K).unwrap();
        assert!(d.to_string().starts_with("2 sin t / t, support [-1,1]\n"));
        // ∫ (2 sin t / t)² dt = 4π.
        assert!((d.l2_norm - (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn modulated_factor_shows() {
        let d = describe_catalog(2, CatalogKind::Q(1)).unwrap();
        assert!(d.closed_form.starts_with("e^(i t_1)"), "{}", d.closed_form);
        assert_eq!(d.support_lo, vec![0.0, -1.0]);
        assert_eq!(d.support_hi, vec![2.0, 1.0]);
    }

    #[test]
    fn axis_out_of_range() {
        assert!(matches!(
            describe_catalog(1, CatalogKind::P(2)),
            Err(CliError::Core(PwError::AxisOutOfRange { j: 2, n: 1 }))
        ));
    }
}
