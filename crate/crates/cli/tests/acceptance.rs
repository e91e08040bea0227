//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p pwkit-cli --test acceptance`

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pwkit::affine::{complete_to_invertible, is_injective, project_spectrum, spectral_transform_invertible};
use pwkit::analysis::{
    affinity_verdict, circle, exp_type_bound_check, kernel_invariance_check, nonaffine_spread, seeded_probes,
    warp_phase_profile, warped_oob, ProbeSpec, VerdictStatus, VerdictTolerances, WarpFamily,
};
use pwkit::pwcore::catalog::{k_closed, triangle, triangle_factor};
use pwkit::pwcore::{
    eval_pw_complex_on_line, identity_residual, identity_sides, make_catalog, make_catalog_with, AffineMap,
    BandSupport, CatalogKind, FnSignal, GridSpec, Identity, SpectralDensity, Warp,
};
use pwkit::spectra::{dft_spectrum, sample_on_grid, SampleGrid, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Outcome::new(false, detail)
    }
}

fn kinds(n: usize) -> Vec<CatalogKind> {
    let mut v = vec![CatalogKind::K];
    for j in 1..=n {
        v.push(CatalogKind::P(j));
        v.push(CatalogKind::Q(j));
    }
    v
}

fn within(budget: Duration, elapsed: Duration, mut o: Outcome) -> Outcome {
    if elapsed > budget {
        o.pass = false;
        o.detail = format!("{}; over the {:.0} s budget", o.detail, budget.as_secs_f64());
    }
    o
}

/// Both catalog identities at 1000 seeded points per dimension.
fn identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    let mut checks = 0;
    for n in 1..=3 {
        for _ in 0..1000 {
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..=20.0)).collect();
            for j in 1..=n {
                for which in [Identity::Modulation, Identity::Quadratic] {
                    let (lhs, _) = match identity_sides(&t, j, which) {
                        Ok(s) => s,
                        Err(e) => return Outcome::fail(format!("n={n} j={j}: {e}")),
                    };
                    let res = match identity_residual(&t, j, which) {
                        Ok(r) => r,
                        Err(e) => return Outcome::fail(format!("n={n} j={j}: {e}")),
                    };
                    worst = worst.max(res / (1.0 + lhs.norm()));
                    checks += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    within(
        Duration::from_secs(1),
        elapsed,
        Outcome::new(
            worst < 1e-10,
            format!(
                "{checks} checks, worst scaled residual {worst:.2e} < 1e-10 ({:.3} s)",
                elapsed.as_secs_f64()
            ),
        ),
    )
}

fn rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

/// `U diag(s) Vᵀ` with largest singular value `norm` and condition number at most `cond`.
fn conditioned(rng: &mut ChaCha8Rng, n: usize, norm: f64, cond: f64) -> DMatrix<f64> {
    let s = DVector::from_fn(n, |i, _| if i == 0 { norm } else { norm / rng.gen_range(1.0..cond) });
    rotation(rng, n) * DMatrix::from_diagonal(&s) * rotation(rng, n).transpose()
}

/// Relative L² distance between the DFT magnitude estimate of `f ∘ φ` and
/// `|h|` for the predicted density `h`.
fn spectral_mismatch<S: pwkit::pwcore::Evaluable>(
    f: &S,
    g: &SpectralDensity,
    a: &DMatrix<f64>,
    b: &[f64],
    grid: &SampleGrid,
) -> pwkit::Result<f64> {
    let n = grid.dim();
    let map = AffineMap::new(a.clone(), DVector::from_column_slice(b))?;
    let warp = Warp::Affine(map);
    let warped = pwkit::pwcore::Warped::new(f, &warp)?;
    let samples = sample_on_grid(&warped, grid)?;
    let spec = dft_spectrum(&samples, grid, Window::None)?;
    let h = spectral_transform_invertible(g, a, b)?;
    let scale = grid.spacing().powi(n as i32) / (2.0 * PI).powi(n as i32);
    let total = (grid.nodes() as f64).powi(n as i32);
    let (mut num, mut den) = (0.0, 0.0);
    for (idx, p) in spec.power().iter().enumerate() {
        let estimate = (p * total).sqrt() * scale;
        let predicted = h.value_at(&spec.frequency(idx)).norm();
        num += (estimate - predicted).powi(2);
        den += predicted.powi(2);
    }
    Ok((num / den).sqrt())
}

/// DFT of `f ∘ φ` against the transformed density for invertible affine `φ`.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = [0.0f64; 2];

    let p1 = match make_catalog(1, CatalogKind::P(1)) {
        Ok(f) => f,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let g1 = p1.spectral().expect("catalog density").clone();
    let grid1 = SampleGrid::with_spacing(1, 4096, PI / 8.0).expect("grid");

    // Product of Fejér kernels: density triangle ⊗ triangle on [-2,2]².
    let fejer = FnSignal::new(2, |t: &[f64]| {
        Complex64::new(triangle_factor(t[0]) * triangle_factor(t[1]), 0.0)
    });
    let g2 = SpectralDensity::from_fn(BandSupport::cube(2, 2.0).expect("box"), vec![257, 257], |u| {
        Complex64::new(triangle(u[0]) * triangle(u[1]), 0.0)
    })
    .expect("density");

    for trial in 0..10 {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let a1 = DMatrix::from_element(1, 1, sign * rng.gen_range(0.7..2.0));
        let b1 = [rng.gen_range(-1.0..1.0)];
        match spectral_mismatch(&p1, &g1, &a1, &b1, &grid1) {
            Ok(e) => worst[0] = worst[0].max(e),
            Err(e) => return Outcome::fail(format!("1D trial {trial}: {e}")),
        }

        let norm = rng.gen_range(0.7..2.0);
        let a2 = conditioned(&mut rng, 2, norm, 10.0);
        let b2 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let grid2 = SampleGrid::with_spacing(2, 256, PI / (8.8 * norm)).expect("grid");
        match spectral_mismatch(&fejer, &g2, &a2, &b2, &grid2) {
            Ok(e) => worst[1] = worst[1].max(e),
            Err(e) => return Outcome::fail(format!("2D trial {trial}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    within(
        Duration::from_secs(30),
        elapsed,
        Outcome::new(
            worst.iter().all(|&e| e < 0.05),
            format!(
                "worst relative L2 error 1D {:.2e}, 2D {:.2e} < 5e-2 over 10 maps each ({:.1} s)",
                worst[0],
                worst[1],
                elapsed.as_secs_f64()
            ),
        ),
    )
}

fn kind_in(kind: CatalogKind, m: usize) -> CatalogKind {
    match kind {
        CatalogKind::K => CatalogKind::K,
        CatalogKind::P(_) => CatalogKind::P(1),
        CatalogKind::Q(_) => CatalogKind::Q(m),
    }
}

/// Affine warps stay at the leakage floor; the sine warp does not.
fn leakage() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let base1 = SampleGrid::new(1, 64.0 * PI, 4096).expect("grid");
    let base2 = SampleGrid::new(2, 16.0 * PI, 256).expect("grid");
    let mut worst = 0.0f64;
    let mut label = String::new();
    for (n, m, base) in [(1, 1, base1), (2, 2, base2), (2, 1, base1)] {
        for kind in [CatalogKind::K, CatalogKind::P(1), CatalogKind::Q(n)] {
            let ident = make_catalog(m, kind_in(kind, m)).expect("catalog");
            let floor = match warped_oob(
                &ident,
                &Warp::identity(m),
                &base,
                Window::Hann,
                ident.support().radius(),
            ) {
                Ok(v) => v,
                Err(e) => return Outcome::fail(e.to_string()),
            };
            let f = make_catalog(n, kind).expect("catalog");
            let r0 = f.support().radius();
            for _ in 0..5 {
                let map = loop {
                    let a = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-2.0..2.0));
                    let b = DVector::from_fn(n, |_, _| {
                        let x: f64 = rng.gen_range(0.1..1.0);
                        if rng.gen_bool(0.5) {
                            x
                        } else {
                            -x
                        }
                    });
                    let map = AffineMap::new(a, b).expect("finite");
                    let norm = map.operator_norm();
                    if (0.3..=2.0).contains(&norm) && is_injective(map.matrix()) {
                        break map;
                    }
                };
                let norm = map.operator_norm();
                let grid = base.rescaled(norm).expect("positive norm");
                let oob = match warped_oob(&f, &Warp::Affine(map), &grid, Window::Hann, norm * r0) {
                    Ok(v) => v,
                    Err(e) => return Outcome::fail(e.to_string()),
                };
                let ratio = oob / floor;
                if ratio > worst {
                    worst = ratio;
                    label = format!("n={n} m={m} {kind} |A|={norm:.3}");
                }
            }
        }
    }

    let k1 = make_catalog(1, CatalogKind::K).expect("catalog");
    let sine = WarpFamily::SinePerturbation {
        axis: 1,
        frequency: 1.0,
    };
    let sine_ratio = match nonaffine_spread(&sine, &k1, &base1, 1.0, &[0.5], Window::Hann) {
        Ok(t) => t.rows[1].ratio.unwrap_or(f64::INFINITY),
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let elapsed = start.elapsed();
    within(
        Duration::from_secs(60),
        elapsed,
        Outcome::new(
            worst <= 10.0 && sine_ratio >= 150.0,
            format!(
                "affine worst {worst:.3}x floor <= 10 ({label}); sine eps=0.5 at {sine_ratio:.2}x floor >= 150 ({:.1} s)",
                elapsed.as_secs_f64()
            ),
        ),
    )
}

/// `t ↦ t₁ + t₂` composed with the 1D sinc is constant along `(1,-1)`.
fn kernel_branch() -> Outcome {
    let k1 = make_catalog(1, CatalogKind::K).expect("catalog");
    let map = AffineMap::from_rows(&[vec![1.0, 1.0]], &[0.0]).expect("map");
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let shifts: Vec<f64> = (0..25).map(|_| rng.gen_range(-100.0..100.0)).collect();
    let rep = match kernel_invariance_check(&k1, &map, &shifts) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let s = 0.5f64.sqrt();
    let direction_ok = rep.kernel.len() == 1 && {
        let v = &rep.kernel[0];
        v.len() == 2
            && ((v[0] - s).abs() < 1e-12 && (v[1] + s).abs() < 1e-12
                || (v[0] + s).abs() < 1e-12 && (v[1] - s).abs() < 1e-12)
    };
    Outcome::new(
        direction_ok && rep.variance < 1e-20 && rep.decay_violation,
        format!(
            "kernel {:?}, variance {:.1e} < 1e-20, decay violation {}",
            rep.kernel, rep.variance, rep.decay_violation
        ),
    )
}

/// Injective decomposition reconstructs `A`; projecting `K` on `ℝ²` gives `2·1_{[-1,1]}`.
fn decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=n);
        let a = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..=1.0));
        if !is_injective(&a) {
            continue;
        }
        match complete_to_invertible(&a) {
            Ok(d) => worst = worst.max((d.reconstruct() - &a).amax()),
            Err(e) => return Outcome::fail(format!("n={n} m={m}: {e}")),
        }
        done += 1;
    }

    let k2 = make_catalog(2, CatalogKind::K).expect("catalog");
    let g = match project_spectrum(k2.spectral().expect("density"), 1) {
        Ok(g) => g,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let support_ok = g.support().lo() == [-1.0] && g.support().hi() == [1.0];
    let density_err = g.values().iter().map(|v| (v - 2.0).norm()).fold(0.0, f64::max);
    let mut pointwise_ok = true;
    let mut worst_slack = f64::INFINITY;
    for _ in 0..50 {
        let x = rng.gen_range(-10.0..10.0);
        let e = g.eval_with_error(&[x]);
        let diff = (e.value - k_closed(&[x, 0.0])).norm();
        pointwise_ok &= diff <= e.error_estimate;
        worst_slack = worst_slack.min(e.error_estimate - diff);
    }
    Outcome::new(
        worst <= 1e-12 && support_ok && density_err <= 1e-12 && pointwise_ok,
        format!(
            "max |Kmap^-1 S Q - A| {worst:.1e} <= 1e-12 over 100 maps; projected density |g-2| {density_err:.1e} on [-1,1]; \
             50 values within their error estimates (min slack {worst_slack:.1e})"
        ),
    )
}

/// Exponential type bound on complex lines, and `F(i) = e - 1/e` for the 1D sinc.
fn growth() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let radii = [1.0, 2.5, 5.0, 10.0];
    let mut worst = f64::INFINITY;
    for n in 1..=3 {
        let grid = if n == 3 {
            GridSpec::IntervalsPerUnit(8)
        } else {
            GridSpec::IntervalsPerUnit(32)
        };
        for kind in kinds(n) {
            let f = make_catalog_with(n, kind, vec![0.0; n], grid).expect("catalog");
            for line in 0..50 {
                let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                match exp_type_bound_check(&f, &a, &b, &circle(radii[line % radii.len()], 64)) {
                    Ok(rep) => worst = worst.min(rep.min_margin),
                    Err(e) => return Outcome::fail(format!("n={n} {kind}: {e}")),
                }
            }
        }
    }
    let exact = E - 1.0 / E;
    let i = Complex64::new(0.0, 1.0);
    let closed = CatalogKind::K.closed_form_complex(&[i]);
    let fine = make_catalog_with(1, CatalogKind::K, vec![0.0], GridSpec::NodesPerAxis((1 << 18) + 1)).expect("catalog");
    let quad = match eval_pw_complex_on_line(&fine, &[0.0], &[1.0], i) {
        Ok(v) => v,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let (ec, eq) = ((closed - exact).norm(), (quad - exact).norm());
    Outcome::new(
        worst >= -1e-8 && ec < 1e-10 && eq < 1e-10,
        format!("min margin {worst:.2e} >= -1e-8; F(i) closed form off by {ec:.1e}, quadrature by {eq:.1e}"),
    )
}

/// Affine warps have linear phase on every probe; non-affine ones are caught, reproducibly.
fn affinity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let mut affine_worst = 0.0f64;
    for (n, m) in [(1, 1), (2, 2), (3, 2), (2, 3)] {
        let a = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.5..1.5));
        let b = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let warp = Warp::Affine(AffineMap::new(a, b).expect("finite"));
        let probes = seeded_probes(m, 20, 70 + n as u64, &ProbeSpec::default()).expect("probes");
        for p in &probes {
            for j in 1..=n {
                match warp_phase_profile(&warp, p, j) {
                    Ok(prof) => affine_worst = affine_worst.max(prof.residual),
                    Err(e) => return Outcome::fail(e.to_string()),
                }
            }
        }
    }

    let sine = |eps: f64| Warp::Sine {
        dim: 1,
        axis: 1,
        amplitude: eps,
        frequency: 1.0,
    };
    let swap = Warp::Affine(AffineMap::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[0.0, 0.0]).expect("map"));
    let square = Warp::Power {
        dim: 2,
        axis: 1,
        exponent: 2,
    };
    let witnesses = vec![
        (
            Warp::Power {
                dim: 1,
                axis: 1,
                exponent: 3,
            },
            1,
        ),
        (sine(0.3), 1),
        (sine(0.5), 1),
        (sine(1.0), 1),
        (Warp::compose(square, swap).expect("compose"), 2),
    ];
    let spec = ProbeSpec {
        anchor_half_width: 1.0,
        extent: 3.0,
        abscissas: 601,
    };
    let tol = VerdictTolerances::default();
    let mut weakest = f64::INFINITY;
    let mut all_caught = true;
    let mut deterministic = true;
    for (warp, m) in &witnesses {
        let probes = seeded_probes(*m, 20, 9, &spec).expect("probes");
        let (v1, v2) = match (
            affinity_verdict(warp, &probes, &tol),
            affinity_verdict(warp, &probes, &tol),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Outcome::fail(e.to_string()),
        };
        all_caught &= v1.status == VerdictStatus::NonAffine;
        weakest = weakest.min(v1.witness.as_ref().map_or(0.0, |w| w.residual));
        deterministic &= v1 == v2 && seeded_probes(*m, 20, 9, &spec).expect("probes") == probes;
    }
    Outcome::new(
        affine_worst < 1e-8 && all_caught && weakest > 1e-2 && deterministic,
        format!(
            "affine residual {affine_worst:.1e} < 1e-8; {} non-affine warps flagged {all_caught}, weakest witness {weakest:.2e} > 1e-2; deterministic {deterministic}",
            witnesses.len()
        ),
    )
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(bytes) = std::fs::read(&p) {
                out.insert(p.strip_prefix(dir).expect("under dir").to_path_buf(), bytes);
            }
        }
    }
    out
}

/// Every shipped config, run twice into separate directories, gives identical bytes.
fn reproducibility() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(&configs) {
        Ok(rd) => rd
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => return Outcome::fail(format!("{}: {e}", configs.display())),
    };
    paths.sort();
    let (a, b) = match (tempfile::tempdir(), tempfile::tempdir()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Outcome::fail("cannot create temp dirs"),
    };
    let mut count = 0;
    for cfg in &paths {
        let name = cfg.file_stem().expect("file name").to_string_lossy().to_string();
        let mut codes = Vec::new();
        for root in [a.path(), b.path()] {
            let status = Command::new(env!("CARGO_BIN_EXE_pwkit"))
                .arg("--config")
                .arg(cfg)
                .arg("--out")
                .arg(root.join(&name))
                .output();
            match status {
                Ok(o) => codes.push(o.status.code()),
                Err(e) => return Outcome::fail(format!("{name}: {e}")),
            }
        }
        if codes[0] != codes[1] || !matches!(codes[0], Some(0) | Some(2)) {
            return Outcome::fail(format!("{name}: exit codes {codes:?}"));
        }
        count += 1;
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    if fa.is_empty() {
        return Outcome::fail("no artifacts written");
    }
    let differing: Vec<String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    Outcome::new(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{count} configs, {} artifacts byte-identical across two output dirs",
                fa.len()
            )
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("catalog identities", identities),
        ("DFT matches transformed density", oracle_equivalence),
        ("affine leakage floor and sine spread", leakage),
        ("non-injective kernel branch", kernel_branch),
        ("injective decomposition and projection", decomposition),
        ("exponential type bound", growth),
        ("affinity verdicts", affinity),
        ("reproducible artifacts", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "{} [{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        println!("all {} criteria pass", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria fail", criteria.len());
        ExitCode::FAILURE
    }
}
