//! Affine maps acting on bandlimited functions: injectivity, the exact
//! spectral transform law, the `A = Kmap⁻¹ S Q` decomposition and spectrum
//! marginalization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PwError, Result};
use crate::pwcore::density::{ball_volume, BandSupport, SpectralDensity};
use crate::pwcore::map::{operator_norm, AffineMap};
use crate::pwcore::signal::PwSignal;

/// Singular values at or below this fraction of the largest count as zero.
pub const INJECTIVITY_RTOL: f64 = 1e-10;

/// `|det A| ≤ SINGULAR_RTOL · ‖A‖ⁿ` is treated as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Orthonormal basis of `ker A`, sign-normalised so the largest-magnitude
/// entry of each vector is positive. The zero matrix yields the standard basis.
pub fn kernel_basis(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (n, m) = a.shape();
    if m == 0 {
        return Vec::new();
    }
    if a.iter().all(|&x| x == 0.0) {
        return (0..m).map(|k| DVector::from_fn(m, |i, _| f64::from(i == k))).collect();
    }
    // Pad to at least m rows so the SVD returns a full m×m right factor.
    let padded = if n < m {
        let mut p = DMatrix::zeros(m, m);
        p.view_mut((0, 0), (n, m)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= INJECTIVITY_RTOL * sigma_max)
        .map(|(k, _)| normalise_sign(v_t.row(k).transpose()))
        .collect();
    basis.sort_by(|x, y| {
        let key = |v: &DVector<f64>| v.iamax();
        key(x).cmp(&key(y))
    });
    basis
}

fn normalise_sign(mut v: DVector<f64>) -> DVector<f64> {
    if v[v.iamax()] < 0.0 {
        v.neg_mut();
    }
    v
}

pub fn rank(a: &DMatrix<f64>) -> usize {
    a.ncols() - kernel_basis(a).len()
}

pub fn is_injective(a: &DMatrix<f64>) -> bool {
    kernel_basis(a).is_empty()
}

fn not_injective(kernel: &[DVector<f64>]) -> PwError {
    PwError::NotInjective {
        kernel: kernel.iter().map(|v| v.iter().copied().collect()).collect(),
    }
}

/// Spectrum of `t ↦ f(A t + b)` for invertible `A`:
/// `h(v) = |det A|⁻¹ · ĝ(A⁻ᵀ v) · e^{i(A⁻ᵀ v, b)}`.
///
/// The result keeps the exact pullback (chains are flattened onto the original
/// grid) and also materialises it on a grid over the bounding box of the image
/// support `Aᵀ(box)`. Spacing on each new axis is chosen so one step maps to at
/// most one base step.
pub fn spectral_transform_invertible(spec: &SpectralDensity, a: &DMatrix<f64>, b: &[f64]) -> Result<SpectralDensity> {
    let n = spec.dim();
    if a.shape() != (n, n) {
        return Err(PwError::DimensionMismatch {
            expected: n,
            got: if a.nrows() == n { a.ncols() } else { a.nrows() },
        });
    }
    if b.len() != n {
        return Err(PwError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(PwError::Domain("affine map entries must be finite".into()));
    }
    let det = a.determinant();
    if det.abs() <= SINGULAR_RTOL * operator_norm(a).powi(n as i32) {
        return Err(PwError::SingularMatrix { det });
    }
    if *a == DMatrix::identity(n, n) && b.iter().all(|&x| x == 0.0) {
        return Ok(spec.clone());
    }
    let a_inv = a.clone().try_inverse().ok_or(PwError::SingularMatrix { det })?;
    let a_inv_t = a_inv.transpose();
    let b = DVector::from_column_slice(b);

    let (base, map, phase, scale) = match spec.origin() {
        Some(p) => (
            p.base().clone(),
            p.map() * &a_inv_t,
            &a_inv * (p.phase() + &b),
            p.scale() / det.abs(),
        ),
        None => (spec.clone(), a_inv_t, &a_inv * &b, 1.0 / det.abs()),
    };

    let map_inv = map.clone().try_inverse().ok_or(PwError::SingularMatrix { det })?;
    let bs = base.support();
    let center = DVector::from_fn(n, |s, _| 0.5 * (bs.lo()[s] + bs.hi()[s]));
    let half = DVector::from_fn(n, |s, _| 0.5 * bs.width(s));
    let c = &map_inv * center;
    let w = map_inv.abs() * half;
    let support = BandSupport::new(
        (0..n).map(|s| c[s] - w[s]).collect(),
        (0..n).map(|s| c[s] + w[s]).collect(),
    )?
    .with_radius_bound(operator_norm(a) * spec.support().radius());

    let h_base = (0..n).map(|s| base.spacing(s)).fold(f64::INFINITY, f64::min);
    let counts: Vec<usize> = (0..n)
        .map(|s| {
            let h = h_base / map.column(s).norm();
            ((support.width(s) / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize + 1
        })
        .collect();
    SpectralDensity::from_pullback(base, map, scale, phase, support, counts)
}

/// `A = Kmap⁻¹ · S · Q` for injective `A` (`n × m`), with `Kmap` orthogonal,
/// `det Kmap = +1` whenever `n > m`, and `Q` upper triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectiveDecomposition {
    kmap: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl InjectiveDecomposition {
    /// The `n × n` map sending `im A` onto the first `m` coordinates.
    pub fn kmap(&self) -> &DMatrix<f64> {
        &self.kmap
    }

    /// `Kmap⁻¹`, whose first `m` columns are an orthonormal basis of `im A`.
    pub fn kmap_inverse(&self) -> DMatrix<f64> {
        self.kmap.transpose()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// The canonical injection `ℝ^m → ℝⁿ` as an `n × m` matrix.
    pub fn injection(&self) -> DMatrix<f64> {
        canonical_injection(self.kmap.nrows(), self.q.nrows())
    }

    /// `Kmap⁻¹ · S · Q`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.kmap_inverse() * self.injection() * &self.q
    }

    pub fn export(&self) -> DecompositionExport {
        DecompositionExport {
            kmap: AffineMap::linear(self.kmap.clone()).expect("finite by construction"),
            q: AffineMap::linear(self.q.clone()).expect("finite by construction"),
        }
    }
}

/// Serialized form of a decomposition: both factors as linear [`AffineMap`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionExport {
    pub kmap: AffineMap,
    pub q: AffineMap,
}

pub fn canonical_injection(n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |i, k| f64::from(i == k))
}

/// Orthonormalises the columns of `A` (Gram–Schmidt with one
/// reorthogonalisation pass), completes the basis with coordinate axes picked
/// by largest residual norm, and reads off `Kmap = Wᵀ`, `Q = R`.
pub fn complete_to_invertible(a: &DMatrix<f64>) -> Result<InjectiveDecomposition> {
    let (n, m) = a.shape();
    let kernel = kernel_basis(a);
    if !kernel.is_empty() {
        return Err(not_injective(&kernel));
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut r = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut v = a.column(k).clone_owned();
        for _ in 0..2 {
            for (i, u) in basis.iter().enumerate() {
                let c = u.dot(&v);
                r[(i, k)] += c;
                v.axpy(-c, u, 1.0);
            }
        }
        let norm = v.norm();
        r[(k, k)] = norm;
        basis.push(v / norm);
    }
    while basis.len() < n {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for s in 0..n {
            let mut e = DVector::zeros(n);
            e[s] = 1.0;
            for u in &basis {
                let c = u.dot(&e);
                e.axpy(-c, u, 1.0);
            }
            let norm = e.norm();
            if best.as_ref().map_or(true, |(b, _)| norm > b * (1.0 + 1e-12)) {
                best = Some((norm, e));
            }
        }
        let (_, mut v) = best.expect("n > 0");
        for u in &basis {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
        let norm = v.norm();
        basis.push(v / norm);
    }
    let mut w = DMatrix::from_columns(&basis);
    if n > m && w.determinant() < 0.0 {
        w.column_mut(n - 1).neg_mut();
    }
    Ok(InjectiveDecomposition {
        kmap: w.transpose(),
        q: r,
    })
}

/// `(vol of the (n−m)-ball of radius r)^{1/2}`, the Cauchy–Schwarz constant
/// bounding the marginal `‖g‖₂ ≤ c · ‖f̂‖₂`.
pub fn projection_bound_constant(r: f64, n: usize, m: usize) -> f64 {
    ball_volume(n.saturating_sub(m), r).sqrt()
}

/// Marginal `g(u′) = ∫_{|u″|² ≤ r² − |u′|²} f̂(u′, u″) du″` over the trailing
/// `n − m` axes, by trapezoid quadrature on the density's own grid.
pub fn project_spectrum(spec: &SpectralDensity, m: usize) -> Result<SpectralDensity> {
    let n = spec.dim();
    if m == 0 || m >= n {
        return Err(PwError::DimensionMismatch {
            expected: n.saturating_sub(1).max(1),
            got: m,
        });
    }
    let support = spec.support();
    let r = support.radius();
    let r2 = r * r;
    let slack = 1e-12 * r2.max(1e-300);
    let counts = spec.counts();
    let inner: usize = counts[m..].iter().product();
    let outer: usize = counts[..m].iter().product();

    let trailing: Vec<Vec<f64>> = (m..n).map(|s| spec.axis_nodes(s)).collect();
    let trailing_weights: Vec<&[f64]> = (m..n).map(|s| spec.axis_weights(s)).collect();
    let inner_counts = &counts[m..];
    let inner_nodes: Vec<(f64, f64)> = (0..inner)
        .map(|idx| {
            let mut rem = idx;
            let mut norm2 = 0.0;
            let mut w = 1.0;
            for s in (0..n - m).rev() {
                let k = rem % inner_counts[s];
                rem /= inner_counts[s];
                norm2 += trailing[s][k] * trailing[s][k];
                w *= trailing_weights[s][k];
            }
            (norm2, w)
        })
        .collect();
    let box_inside_ball = support.box_radius() * support.box_radius() <= r2 + slack;

    let leading: Vec<Vec<f64>> = (0..m).map(|s| spec.axis_nodes(s)).collect();
    let values: Vec<Complex64> = (0..outer)
        .map(|o| {
            let mut rem = o;
            let mut lead2 = 0.0;
            for s in (0..m).rev() {
                let k = rem % counts[s];
                rem /= counts[s];
                lead2 += leading[s][k] * leading[s][k];
            }
            let row = &spec.values()[o * inner..(o + 1) * inner];
            let mut acc = Complex64::new(0.0, 0.0);
            for (g, &(norm2, w)) in row.iter().zip(&inner_nodes) {
                if lead2 + norm2 <= r2 + slack {
                    acc += g * w;
                }
            }
            acc
        })
        .collect();

    let out_support = BandSupport::new(support.lo()[..m].to_vec(), support.hi()[..m].to_vec())?.with_radius_bound(r);
    Ok(SpectralDensity::from_values(out_support, counts[..m].to_vec(), values)?.with_alignment(box_inside_ball))
}

/// `t ↦ f(A t + b)` for injective `A`. Square maps go through
/// [`spectral_transform_invertible`]; dimension-raising maps are split as
/// `A = W S Q` and handled as transform by `(W, b)`, marginalization to the
/// first `m` axes, then transform by `(Q, 0)`.
pub fn compose_affine(f: &PwSignal, map: &AffineMap) -> Result<PwSignal> {
    let (n, m) = (map.output_dim(), map.input_dim());
    if n != f.dim() {
        return Err(PwError::DimensionMismatch {
            expected: f.dim(),
            got: n,
        });
    }
    let a = map.matrix();
    let kernel = kernel_basis(a);
    if !kernel.is_empty() {
        return Err(not_injective(&kernel));
    }
    let b = map.offset().as_slice();
    if n == m && *a == DMatrix::identity(n, n) && b.iter().all(|&x| x == 0.0) {
        return Ok(f.clone());
    }
    let spec = f.spectral()?;
    let radius = map.operator_norm() * f.support().radius();
    let out = if n == m {
        spectral_transform_invertible(spec, a, b)?
    } else {
        let d = complete_to_invertible(a)?;
        let rotated = spectral_transform_invertible(spec, &d.kmap_inverse(), b)?;
        let marginal = project_spectrum(&rotated, m)?;
        spectral_transform_invertible(&marginal, d.q(), &vec![0.0; m])?
    };
    Ok(PwSignal::from_density(out.with_radius_bound(radius)))
}
