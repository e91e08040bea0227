//! Experiment runners.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use pwkit::affine::{
    canonical_injection, complete_to_invertible, compose_affine, is_injective, project_spectrum,
    projection_bound_constant, DecompositionExport,
};
use pwkit::analysis::{
    affinity_verdict, circle, exp_type_bound_check, kernel_invariance_check, nonaffine_spread, seeded_probes,
    warp_phase_profile, KernelReport, LineProbe, ProbeSpec, SpreadTable, Verdict, VerdictStatus, VerdictTolerances,
};
use pwkit::pwcore::io::{write_signal_tagged, ValueEncoding};
use pwkit::pwcore::map::operator_norm;
use pwkit::pwcore::{
    eval_pw, eval_pw_with_error, identity_sides, AffineMap, Evaluable, Identity, PwSignal, Warp, Warped,
};
use pwkit::spectra::{
    bandwidth_estimate, dft_spectrum, oob_energy, sample_on_grid, DiscreteSpectrum, SampleGrid, Window,
};
use pwkit::PwError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifact::{ArtifactWriter, Provenance};
use crate::config::{Claim, Experiment, ExperimentConfig, SignalSpec, SpreadSpec, Tolerances};
use crate::describe::{describe_catalog, CatalogDescription};
use crate::error::{CliError, CliResult};
use crate::plot::{Mark, Plot, Series};

/// Kernel shifts drawn for the non-injective branch of `verify-theorem`.
const KERNEL_SHIFTS: usize = 25;
const KERNEL_SHIFT_RANGE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from_ok(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    /// 0 on pass, 2 on a failed verification.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

struct Ctx<'a> {
    /// Canonical form, echoed into reports.
    cfg: &'a ExperimentConfig,
    tol: Tolerances,
    base: &'a Path,
    out: ArtifactWriter,
    plots: bool,
}

impl Ctx<'_> {
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed.expect("validated: randomized kinds carry a seed"))
    }

    fn seed(&self) -> u64 {
        self.cfg.seed.expect("validated: randomized kinds carry a seed")
    }

    fn load(&self, spec: &SignalSpec) -> CliResult<PwSignal> {
        spec.load(self.base)
    }
}

/// Runs one experiment, writing its artifacts under `cfg.output.dir`.
/// Relative signal file paths resolve against `base`.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let provenance = Provenance::new(cfg.hash(), cfg.seed);
    let out = ArtifactWriter::create(&cfg.output.dir, &cfg.stem(), provenance)?;
    let canonical = cfg.canonical();
    let mut ctx = Ctx {
        cfg: &canonical,
        tol: cfg.tolerances,
        base,
        out,
        plots: cfg.output.plots,
    };
    let (status, summary) = match &cfg.experiment {
        Experiment::Catalog {
            signal,
            points,
            half_width,
            encoding,
        } => run_catalog(&mut ctx, signal, *points, *half_width, *encoding)?,
        Experiment::Warp {
            signal,
            warp,
            points,
            half_width,
        } => run_warp(&mut ctx, signal, warp, *points, *half_width)?,
        Experiment::Spectrum {
            signal,
            warp,
            grid,
            window,
            radius,
        } => run_spectrum(&mut ctx, signal, warp.as_ref(), grid, *window, *radius)?,
        Experiment::VerifyAffine {
            warp,
            probes,
            probe,
            expect,
        } => run_verify_affine(&mut ctx, warp, *probes, probe, *expect)?,
        Experiment::VerifyTheorem {
            signal,
            warp,
            grid,
            window,
            claim,
            probes,
            probe,
            spread,
        } => run_verify_theorem(
            &mut ctx,
            TheoremInputs {
                signal,
                warp,
                grid,
                window: *window,
                claim: *claim,
                probes: *probes,
                probe,
                spread: spread.as_ref(),
            },
        )?,
        Experiment::GrowthBound {
            signal,
            lines,
            radii,
            points,
        } => run_growth(&mut ctx, signal, *lines, radii, *points)?,
        Experiment::Projection {
            signal,
            m,
            points,
            half_width,
            map,
            encoding,
        } => run_projection(&mut ctx, signal, *m, *points, *half_width, map.as_ref(), *encoding)?,
    };
    Ok(RunOutcome {
        status,
        summary,
        artifacts: ctx.out.into_written(),
    })
}

fn uniform_point(rng: &mut ChaCha8Rng, dim: usize, half: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-half..=half)).collect()
}

fn check_positive(what: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} must be positive, got {v}")))
    }
}

fn check_count(what: &str, v: usize) -> CliResult<()> {
    if v == 0 {
        Err(CliError::Config(format!("{what} must be at least 1")))
    } else {
        Ok(())
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn header(prefix: &str, dim: usize) -> String {
    (1..=dim).map(|s| format!("{prefix}_{s}")).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------- catalog

#[derive(Serialize)]
struct CatalogReport<'a> {
    experiment: &'static str,
    status: Status,
    config: &'a ExperimentConfig,
    description: CatalogDescription,
    points: usize,
    /// Largest `residual / (1 + |lhs|)` over both identities and every axis.
    max_identity_residual: f64,
    identity_failures: usize,
    max_quadrature_error: f64,
    quadrature_failures: usize,
    signal_file: String,
}

fn run_catalog(
    ctx: &mut Ctx,
    spec: &SignalSpec,
    points: usize,
    half_width: f64,
    encoding: ValueEncoding,
) -> CliResult<(Status, String)> {
    let SignalSpec::Catalog { dim, catalog, .. } = spec else {
        return Err(CliError::Config("the catalog experiment needs a catalog signal".into()));
    };
    check_count("points", points)?;
    check_positive("half_width", half_width)?;
    let description = describe_catalog(*dim, *catalog)?;
    let f = ctx.load(spec)?;
    let density = f.spectral()?;
    let n = *dim;
    let mut rng = ctx.rng();

    let mut csv = format!(
        "{},closed_re,closed_im,quad_re,quad_im,quad_error,error_estimate,identity_residual\n",
        header("t", n)
    );
    let mut max_identity = 0.0f64;
    let mut identity_failures = 0;
    let mut max_quad = 0.0f64;
    let mut quad_failures = 0;
    for _ in 0..points {
        let t = uniform_point(&mut rng, n, half_width);
        let closed = eval_pw(&f, &t)?;
        let e = density.eval_with_error(&t);
        let err = (e.value - closed).norm();
        max_quad = max_quad.max(err);
        if err > e.error_estimate {
            quad_failures += 1;
        }
        let mut worst = 0.0f64;
        for j in 1..=n {
            for which in [Identity::Modulation, Identity::Quadratic] {
                let (lhs, rhs) = identity_sides(&t, j, which)?;
                let rel = (lhs - rhs).norm() / (1.0 + lhs.norm());
                worst = worst.max(rel);
                if rel >= ctx.tol.identity {
                    identity_failures += 1;
                }
            }
        }
        max_identity = max_identity.max(worst);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            join(&t),
            closed.re,
            closed.im,
            e.value.re,
            e.value.im,
            err,
            e.error_estimate,
            worst
        );
    }
    ctx.out.csv("-points.csv", csv.as_bytes())?;

    let tag = ctx.out.provenance().tag();
    let signal_stem = ctx.out.file_stem("-signal");
    let header_path = write_signal_tagged(&f, ctx.out.dir(), &signal_stem, encoding, Some(&tag))?;
    ctx.out.record(header_path.clone());

    if ctx.plots {
        let line: Vec<f64> = (0..=400)
            .map(|k| -half_width + 2.0 * half_width * k as f64 / 400.0)
            .collect();
        let along = |x: f64| {
            let mut t = vec![0.0; n];
            t[0] = x;
            t
        };
        let closed: Vec<(f64, f64)> = line.iter().map(|&x| (x, f.eval(&along(x)).re)).collect();
        let quad: Vec<(f64, f64)> = line
            .iter()
            .step_by(8)
            .map(|&x| (x, density.eval(&along(x)).re))
            .collect();
        let plot = Plot {
            title: format!("{} along the first axis", description.kind),
            x_label: "t_1".into(),
            y_label: "Re f".into(),
            log_y: false,
            series: vec![
                Series {
                    label: "closed form".into(),
                    points: closed,
                    mark: Mark::Line,
                },
                Series {
                    label: "quadrature".into(),
                    points: quad,
                    mark: Mark::Dots,
                },
            ],
        };
        ctx.out.svg("-profile.svg", &plot.render())?;
    }

    let status = Status::from_ok(identity_failures == 0 && quad_failures == 0);
    let summary = format!(
        "{}\nidentities: max relative residual {max_identity:e}, {identity_failures} above {:e}\nquadrature: max error {max_quad:e}, {quad_failures} above estimate",
        description, ctx.tol.identity
    );
    let report = CatalogReport {
        experiment: "catalog",
        status,
        config: ctx.cfg,
        description,
        points,
        max_identity_residual: max_identity,
        identity_failures,
        max_quadrature_error: max_quad,
        quadrature_failures: quad_failures,
        signal_file: header_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    ctx.out.json(".json", &report)?;
    Ok((status, summary))
}

// ------------------------------------------------------------------- warp

#[derive(Serialize)]
struct WarpReport<'a> {
    experiment: &'static str,
    status: Status,
    config: &'a ExperimentConfig,
    input_dim: usize,
    output_dim: usize,
    affine: bool,
    injective: Option<bool>,
    jacobian_norm_at_origin: f64,
    composed_radius: Option<f64>,
    radius_bound: Option<f64>,
    max_composed_error: Option<f64>,
    composed_failures: usize,
}

fn warp_dims(f: &PwSignal, warp: &Warp) -> CliResult<(usize, usize)> {
    warp.validate()?;
    if warp.output_dim() != f.dim() {
        return Err(CliError::Config(format!(
            "warp lands in R^{} but the signal lives on R^{}",
            warp.output_dim(),
            f.dim()
        )));
    }
    Ok((f.dim(), warp.input_dim()))
}

fn run_warp(
    ctx: &mut Ctx,
    spec: &SignalSpec,
    warp: &Warp,
    points: usize,
    half_width: f64,
) -> CliResult<(Status, String)> {
    check_count("points", points)?;
    check_positive("half_width", half_width)?;
    let f = ctx.load(spec)?;
    let (n, m) = warp_dims(&f, warp)?;
    let warped = Warped::new(&f, warp)?;
    let affine = warp.as_affine();
    let injective = affine.as_ref().map(|a| is_injective(a.matrix()));
    let composed = match (&affine, injective) {
        (Some(map), Some(true)) => Some((compose_affine(&f, map)?, map.operator_norm() * f.support().radius())),
        _ => None,
    };
    let mut rng = ctx.rng();
    let mut csv = format!("{},{},re,im", header("t", m), header("phi", n));
    if composed.is_some() {
        csv.push_str(",composed_re,composed_im,error_estimate");
    }
    csv.push('\n');
    let mut max_err: Option<f64> = None;
    let mut failures = 0;
    for _ in 0..points {
        let t = uniform_point(&mut rng, m, half_width);
        let phi = warp.apply(&t);
        let v = warped.eval(&t);
        let _ = write!(csv, "{},{},{},{}", join(&t), join(&phi), v.re, v.im);
        if let Some((h, _)) = &composed {
            let e = eval_pw_with_error(h, &t)?;
            let err = (e.value - v).norm();
            max_err = Some(max_err.unwrap_or(0.0).max(err));
            if err > e.error_estimate {
                failures += 1;
            }
            let _ = write!(csv, ",{},{},{}", e.value.re, e.value.im, e.error_estimate);
        }
        csv.push('\n');
    }
    ctx.out.csv("-values.csv", csv.as_bytes())?;

    let status = Status::from_ok(failures == 0);
    let jac = operator_norm(&warp.jacobian(&vec![0.0; m]));
    let mut summary = format!(
        "warp R^{m} -> R^{n}, {}, |Dphi(0)| = {jac}",
        match injective {
            Some(true) => "injective affine",
            Some(false) => "non-injective affine",
            None => "non-affine",
        }
    );
    if let Some(e) = max_err {
        let _ = write!(
            summary,
            "\nspectral composition vs substitution: max error {e:e}, {failures} above estimate"
        );
    }
    let report = WarpReport {
        experiment: "warp",
        status,
        config: ctx.cfg,
        input_dim: m,
        output_dim: n,
        affine: affine.is_some(),
        injective,
        jacobian_norm_at_origin: jac,
        composed_radius: composed.as_ref().map(|(h, _)| h.support().radius()),
        radius_bound: composed.as_ref().map(|(_, r)| *r),
        max_composed_error: max_err,
        composed_failures: failures,
    };
    ctx.out.json(".json", &report)?;
    Ok((status, summary))
}

// --------------------------------------------------------------- spectrum

#[derive(Serialize)]
struct SpectrumReport<'a> {
    experiment: &'static str,
    status: Status,
    config: &'a ExperimentConfig,
    grid: SampleGrid,
    window: Window,
    spacing: f64,
    frequency_step: f64,
    nyquist: f64,
    total_power: f64,
    radius: f64,
    oob: f64,
    bandwidth_tolerance: f64,
    /// Absent when no bin radius brings the out-of-band fraction under the tolerance.
    bandwidth: Option<f64>,
}

fn spectrum_of<S: Evaluable + ?Sized>(f: &S, grid: &SampleGrid, window: Window) -> CliResult<DiscreteSpectrum> {
    if grid.dim() != f.dim() {
        return Err(CliError::Config(format!(
            "sample grid has dimension {} but the sampled function lives on R^{}",
            grid.dim(),
            f.dim()
        )));
    }
    let samples = sample_on_grid(f, grid)?;
    Ok(dft_spectrum(&samples, grid, window)?)
}

/// Power against frequency in one dimension; otherwise the largest power
/// in each radial shell one bin wide.
fn spectrum_series(label: &str, spec: &DiscreteSpectrum) -> Series {
    let points = if spec.dim() == 1 {
        spec.axis_frequencies()
            .into_iter()
            .zip(spec.power().iter().copied())
            .collect()
    } else {
        let mut shells: BTreeMap<i64, f64> = BTreeMap::new();
        for (idx, &p) in spec.power().iter().enumerate() {
            let k = (spec.bin_radius(idx) / spec.step()).round() as i64;
            let e = shells.entry(k).or_insert(0.0);
            *e = e.max(p);
        }
        shells.into_iter().map(|(k, p)| (k as f64 * spec.step(), p)).collect()
    };
    Series {
        label: label.into(),
        points,
        mark: if spec.dim() == 1 { Mark::Line } else { Mark::Dots },
    }
}

fn spectrum_plot(title: String, series: Vec<Series>, dim: usize) -> Plot {
    Plot {
        title,
        x_label: if dim == 1 { "u".into() } else { "|u|".into() },
        y_label: "power".into(),
        log_y: true,
        series,
    }
}

fn run_spectrum(
    ctx: &mut Ctx,
    spec: &SignalSpec,
    warp: Option<&Warp>,
    grid: &SampleGrid,
    window: Window,
    radius: Option<f64>,
) -> CliResult<(Status, String)> {
    let f = ctx.load(spec)?;
    let (spectrum, default_radius) = match warp {
        Some(w) => {
            let (_, m) = warp_dims(&f, w)?;
            let jac = operator_norm(&w.jacobian(&vec![0.0; m]));
            (
                spectrum_of(&Warped::new(&f, w)?, grid, window)?,
                jac * f.support().radius(),
            )
        }
        None => (spectrum_of(&f, grid, window)?, f.support().radius()),
    };
    let radius = radius.unwrap_or(default_radius);
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(CliError::Config(format!("radius must be nonnegative, got {radius}")));
    }
    let oob = oob_energy(&spectrum, radius);
    let bandwidth = match bandwidth_estimate(&spectrum, ctx.tol.bandwidth) {
        Ok(b) => Some(b),
        Err(PwError::UndefinedBandwidth) => None,
        Err(e) => return Err(e.into()),
    };
    let mut csv = Vec::new();
    spectrum.write_csv(&mut csv)?;
    ctx.out.csv("-spectrum.csv", &csv)?;
    if ctx.plots {
        let plot = spectrum_plot(
            format!("periodogram ({} window)", window),
            vec![spectrum_series("power", &spectrum)],
            grid.dim(),
        );
        ctx.out.svg("-spectrum.svg", &plot.render())?;
    }
    let summary = format!(
        "{} nodes per axis, du = {}, oob({radius}) = {oob:e}, bandwidth = {}",
        grid.nodes(),
        grid.frequency_step(),
        bandwidth.map_or("undefined".to_string(), |b| b.to_string())
    );
    let report = SpectrumReport {
        experiment: "spectrum",
        status: Status::Pass,
        config: ctx.cfg,
        grid: *grid,
        window,
        spacing: grid.spacing(),
        frequency_step: grid.frequency_step(),
        nyquist: grid.nyquist(),
        total_power: spectrum.total(),
        radius,
        oob,
        bandwidth_tolerance: ctx.tol.bandwidth,
        bandwidth,
    };
    ctx.out.json(".json", &report)?;
    Ok((Status::Pass, summary))
}

// ---------------------------------------------------------- verify-affine

#[derive(Serialize)]
struct AffineReport<'a> {
    experiment: &'static str,
    status: Status,
    config: &'a ExperimentConfig,
    expression_is_affine: bool,
    expect: Option<VerdictStatus>,
    verdict: Verdict,
}

fn verdict_tolerances(tol: &Tolerances) -> VerdictTolerances {
    VerdictTolerances {
        affine: tol.affine,
        nonaffine: tol.nonaffine,
    }
}

fn probes_for(ctx: &Ctx, warp: &Warp, count: usize, spec: &ProbeSpec) -> CliResult<Vec<LineProbe>> {
    check_count("probes", count)?;
    Ok(seeded_probes(warp.input_dim(), count, ctx.seed(), spec)?)
}

fn phase_plot(warp: &Warp, probe: &LineProbe, axis: usize) -> CliResult<Plot> {
    let prof = warp_phase_profile(warp, probe, axis)?;
    let measured = prof
        .abscissas
        .iter()
        .zip(&prof.phase)
        .map(|(&x, p)| (x, p.unwrap_or(f64::NAN)))
        .collect();
    let fit = prof
        .abscissas
        .iter()
        .map(|&x| (x, prof.slope * x + prof.intercept))
        .collect();
    Ok(Plot {
        title: format!("phase of Q_{axis}/K along the probe (residual {:.3e})", prof.residual),
        x_label: "x".into(),
        y_label: "phase (rad)".into(),
        log_y: false,
        series: vec![
            Series {
                label: "unwrapped".into(),
                points: measured,
                mark: Mark::Line,
            },
            Series {
                label: "affine fit".into(),
                points: fit,
                mark: Mark::Line,
            },
        ],
    })
}

fn run_verify_affine(
    ctx: &mut Ctx,
    warp: &Warp,
    count: usize,
    spec: &ProbeSpec,
    expect: Option<VerdictStatus>,
) -> CliResult<(Status, String)> {
    warp.validate()?;
    let probes = probes_for(ctx, warp, count, spec)?;
    let verdict = affinity_verdict(warp, &probes, &verdict_tolerances(&ctx.tol))?;

    let mut csv = String::from("probe,axis,residual\n");
    for r in &verdict.residuals {
        let _ = writeln!(csv, "{},{},{}", r.probe, r.axis, r.residual);
    }
    ctx.out.csv("-residuals.csv", csv.as_bytes())?;
    if ctx.plots {
        let (p, axis) = verdict.witness.map_or((0, 1), |w| (w.probe, w.axis));
        ctx.out
            .svg("-phase.svg", &phase_plot(warp, &probes[p], axis)?.render())?;
    }

    let status = Status::from_ok(expect.map_or(true, |e| e == verdict.status));
    let mut summary = format!("verdict {:?}, max residual {:e}", verdict.status, verdict.max_residual);
    if let Some(w) = verdict.witness {
        let _ = write!(
            summary,
            "\nwitness: probe {} axis {} residual {:e}",
            w.probe, w.axis, w.residual
        );
    }
    if let Some(e) = expect {
        let _ = write!(summary, "\nexpected {e:?}");
    }
    let report = AffineReport {
        experiment: "verify-affine",
        status,
        config: ctx.cfg,
        expression_is_affine: warp.is_affine(),
        expect,
        verdict,
    };
    ctx.out.json(".json", &report)?;
    Ok((status, summary))
}

// --------------------------------------------------------- verify-theorem

struct TheoremInputs<'a> {
    signal: &'a SignalSpec,
    warp: &'a Warp,
    grid: &'a SampleGrid,
    window: Window,
    claim: Option<Claim>,
    probes: usize,
    probe: &'a ProbeSpec,
    spread: Option<&'a SpreadSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarpClass {
    InjectiveAffine,
    NonInjectiveAffine,
    NonAffine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measured {
    Preserved,
    NotPreserved,
    Inconclusive,
}

/// Out-of-band energy of `f ∘ φ` against the identity (or canonical
/// injection) control.
#[derive(Debug, Clone, Serialize)]
pub struct SpreadMeasurement {
    pub grid: SampleGrid,
    pub window: Window,
    pub control_radius: f64,
    /// Leakage floor: out-of-band fraction of the control at `control_radius`.
    pub floor: f64,
    /// `‖Dφ(0)‖`, or 1 when that vanishes.
    pub scale: f64,
    pub test_half_width: f64,
    pub test_radius: f64,
    pub oob: f64,
    pub ratio: Option<f64>,
    pub leakage_factor: f64,
    pub spreads: bool,
}

#[derive(Serialize)]
struct TheoremReport<'a> {
    experiment: &'static str,
    status: Status,
    config: &'a ExperimentConfig,
    n: usize,
    m: usize,
    class: Option<WarpClass>,
    prediction: Claim,
    claim: Option<Claim>,
    measured: Measured,
    notes: Vec<String>,
    spread: Option<SpreadMeasurement>,
    kernel: Option<KernelReport>,
    verdict: Option<Verdict>,
    table: Option<SpreadTable>,
}

const IMPOSSIBLE: &str =
    "impossible: for m > n no continuous warp from R^m to R^n maps the Paley-Wiener class into itself, \
so f o phi cannot stay bandlimited for every f";

fn measure_spread(
    f: &PwSignal,
    warp: &Warp,
    grid: &SampleGrid,
    window: Window,
    leakage_factor: f64,
) -> CliResult<(SpreadMeasurement, DiscreteSpectrum, DiscreteSpectrum)> {
    let (n, m) = (f.dim(), warp.input_dim());
    let r0 = f.support().radius();
    let control = Warp::Affine(AffineMap::linear(canonical_injection(n, m))?);
    let control_spec = spectrum_of(&Warped::new(f, &control)?, grid, window)?;
    let floor = oob_energy(&control_spec, r0);
    let jac = operator_norm(&warp.jacobian(&vec![0.0; m]));
    let scale = if jac > 0.0 { jac } else { 1.0 };
    let test_grid = grid.rescaled(scale)?;
    let test_radius = scale * r0;
    let test_spec = spectrum_of(&Warped::new(f, warp)?, &test_grid, window)?;
    let oob = oob_energy(&test_spec, test_radius);
    let ratio = (floor > 0.0).then(|| oob / floor);
    let spreads = match ratio {
        Some(r) => r > leakage_factor,
        None => oob > 0.0,
    };
    Ok((
        SpreadMeasurement {
            grid: *grid,
            window,
            control_radius: r0,
            floor,
            scale,
            test_half_width: test_grid.half_width(),
            test_radius,
            oob,
            ratio,
            leakage_factor,
            spreads,
        },
        control_spec,
        test_spec,
    ))
}

fn run_verify_theorem(ctx: &mut Ctx, inp: TheoremInputs) -> CliResult<(Status, String)> {
    let f = ctx.load(inp.signal)?;
    let (n, m) = warp_dims(&f, inp.warp)?;
    if inp.grid.dim() != m {
        return Err(CliError::Config(format!(
            "sample grid has dimension {} but the warp takes R^{m}",
            inp.grid.dim()
        )));
    }
    let mut notes = Vec::new();
    let mut spread = None;
    let mut kernel = None;
    let mut verdict = None;
    let mut table = None;
    let mut spectra = None;

    let (class, prediction, measured) = if m > n {
        notes.push(IMPOSSIBLE.to_string());
        (None, Claim::NotPreserved, Measured::NotPreserved)
    } else {
        let affine = inp.warp.as_affine();
        let class = match &affine {
            Some(a) if is_injective(a.matrix()) => WarpClass::InjectiveAffine,
            Some(_) => WarpClass::NonInjectiveAffine,
            None => WarpClass::NonAffine,
        };
        let prediction = if class == WarpClass::InjectiveAffine {
            Claim::Preserved
        } else {
            Claim::NotPreserved
        };
        let measured = match class {
            WarpClass::NonInjectiveAffine => {
                let map = affine.expect("affine class");
                let mut rng = ctx.rng();
                let shifts: Vec<f64> = (0..KERNEL_SHIFTS)
                    .map(|_| rng.gen_range(-KERNEL_SHIFT_RANGE..=KERNEL_SHIFT_RANGE))
                    .collect();
                let rep = kernel_invariance_check(&f, &map, &shifts)?;
                let m = if rep.constant && rep.decay_violation {
                    Measured::NotPreserved
                } else {
                    notes.push("f(b) vanishes, so constancy along the kernel does not rule out decay".into());
                    Measured::Inconclusive
                };
                kernel = Some(rep);
                m
            }
            _ => {
                let (s, control_spec, test_spec) =
                    measure_spread(&f, inp.warp, inp.grid, inp.window, ctx.tol.leakage_factor)?;
                let mut measured = if s.spreads {
                    Measured::NotPreserved
                } else {
                    Measured::Preserved
                };
                if class == WarpClass::NonAffine {
                    let probes = probes_for(ctx, inp.warp, inp.probes, inp.probe)?;
                    let v = affinity_verdict(inp.warp, &probes, &verdict_tolerances(&ctx.tol))?;
                    measured = match (s.spreads, v.status) {
                        (true, _) | (_, VerdictStatus::NonAffine) => Measured::NotPreserved,
                        (false, VerdictStatus::AffineConsistent) => Measured::Preserved,
                        (false, VerdictStatus::Inconclusive) => Measured::Inconclusive,
                    };
                    verdict = Some(v);
                }
                spread = Some(s);
                spectra = Some((control_spec, test_spec));
                measured
            }
        };
        (Some(class), prediction, measured)
    };

    if let Some(sp) = inp.spread {
        if m != n {
            return Err(CliError::Config(
                "a spreading table needs a warp from R^n to itself".into(),
            ));
        }
        let t = nonaffine_spread(&sp.family, &f, inp.grid, f.support().radius(), &sp.epsilons, inp.window)?;
        let mut csv = Vec::new();
        t.write_csv(&mut csv)?;
        ctx.out.csv("-spread.csv", &csv)?;
        table = Some(t);
    }

    let expected = inp.claim.unwrap_or(prediction);
    if let Some(c) = inp.claim {
        if c != prediction {
            notes.push(format!(
                "claim {c:?} contradicts the prediction {prediction:?}: f o phi stays bandlimited for every f exactly when phi is injective affine"
            ));
        }
    }
    let agrees = match measured {
        Measured::Preserved => expected == Claim::Preserved,
        Measured::NotPreserved => expected == Claim::NotPreserved,
        Measured::Inconclusive => false,
    };
    let status = Status::from_ok(agrees && inp.claim.map_or(true, |c| c == prediction));

    let mut csv = String::from("n,m,class,prediction,measured,floor,test_radius,oob,ratio\n");
    let class_name = class.map_or("impossible".to_string(), |c| kebab(&c));
    let (floor, radius, oob, ratio) =
        spread
            .as_ref()
            .map_or((String::new(), String::new(), String::new(), String::new()), |s| {
                (
                    s.floor.to_string(),
                    s.test_radius.to_string(),
                    s.oob.to_string(),
                    s.ratio.map_or(String::new(), |r| r.to_string()),
                )
            });
    let _ = writeln!(
        csv,
        "{n},{m},{class_name},{},{},{floor},{radius},{oob},{ratio}",
        kebab(&prediction),
        kebab(&measured)
    );
    ctx.out.csv("-summary.csv", csv.as_bytes())?;

    if ctx.plots {
        if let Some((c, t)) = &spectra {
            let plot = spectrum_plot(
                "control and warped periodograms".into(),
                vec![spectrum_series("control", c), spectrum_series("warped", t)],
                m,
            );
            ctx.out.svg("-spectra.svg", &plot.render())?;
        }
    }

    let mut summary = format!(
        "R^{m} -> R^{n}, {class_name}: predicted {}, measured {}",
        kebab(&prediction),
        kebab(&measured)
    );
    if let Some(s) = &spread {
        let _ = write!(
            summary,
            "\noob {:e} at r = {} against floor {:e} (ratio {})",
            s.oob,
            s.test_radius,
            s.floor,
            s.ratio.map_or("n/a".to_string(), |r| format!("{r:.3}"))
        );
    }
    for note in &notes {
        let _ = write!(summary, "\n{note}");
    }
    let report = TheoremReport {
        experiment: "verify-theorem",
        status,
        config: ctx.cfg,
        n,
        m,
        class,
        prediction,
        claim: inp.claim,
        measured,
        notes,
        spread,
        kernel,
        verdict,
        table,
    };
    ctx.out.json(".json", &report)?;
    Ok((status, summary))
}

fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

// ----------------------------------------------------------- growth-bound

#[derive(Serialize)]
struct GrowthLine {
    a: Vec<f64>,
    b: Vec<f64>,
    radius: f64,
    min_margin: f64,
}

#[derive(Serialize)]
struct GrowthSummary<'a> {
    experiment: &'static str,
    status: Status,
    config: &'a ExperimentConfig,
    band_radius: f64,
    ball_volume: f64,
    l2_norm: f64,
    min_margin: f64,
    lines: Vec<GrowthLine>,
}

fn run_growth(
    ctx: &mut Ctx,
    spec: &SignalSpec,
    lines: usize,
    radii: &[f64],
    points: usize,
) -> CliResult<(Status, String)> {
    check_count("lines", lines)?;
    check_count("points", points)?;
    if radii.is_empty() {
        return Err(CliError::Config("radii must not be empty".into()));
    }
    for &r in radii {
        check_positive("circle radius", r)?;
    }
    let f = ctx.load(spec)?;
    let n = f.dim();
    let mut rng = ctx.rng();
    let mut rows = Vec::with_capacity(lines);
    let mut csv = format!("line,radius,{},{},min_margin\n", header("a", n), header("b", n));
    let mut worst: Option<(f64, pwkit::analysis::GrowthReport)> = None;
    let mut meta = (0.0, 0.0, 0.0);
    for line in 0..lines {
        let a = uniform_point(&mut rng, n, 3.0);
        let b = uniform_point(&mut rng, n, 1.0);
        let radius = radii[line % radii.len()];
        let rep = exp_type_bound_check(&f, &a, &b, &circle(radius, points))?;
        meta = (rep.radius, rep.ball_volume, rep.l2_norm);
        let _ = writeln!(csv, "{line},{radius},{},{},{}", join(&a), join(&b), rep.min_margin);
        if worst.as_ref().map_or(true, |(m, _)| rep.min_margin < *m) {
            worst = Some((rep.min_margin, rep.clone()));
        }
        rows.push(GrowthLine {
            a,
            b,
            radius,
            min_margin: rep.min_margin,
        });
    }
    ctx.out.csv("-lines.csv", csv.as_bytes())?;
    let (min_margin, worst_rep) = worst.expect("at least one line");
    if ctx.plots {
        let angle = |z: Complex64| z.arg();
        let mut modulus: Vec<(f64, f64)> = worst_rep.rows.iter().map(|r| (angle(r.z), r.modulus)).collect();
        let mut bound: Vec<(f64, f64)> = worst_rep.rows.iter().map(|r| (angle(r.z), r.bound)).collect();
        modulus.sort_by(|x, y| x.0.total_cmp(&y.0));
        bound.sort_by(|x, y| x.0.total_cmp(&y.0));
        let plot = Plot {
            title: "tightest line: |F(z)| and its bound on the circle".into(),
            x_label: "arg z".into(),
            y_label: "modulus".into(),
            log_y: true,
            series: vec![
                Series {
                    label: "|F(z)|".into(),
                    points: modulus,
                    mark: Mark::Line,
                },
                Series {
                    label: "bound".into(),
                    points: bound,
                    mark: Mark::Line,
                },
            ],
        };
        ctx.out.svg("-growth.svg", &plot.render())?;
    }
    let status = Status::from_ok(min_margin >= -ctx.tol.growth);
    let summary = format!(
        "{lines} lines x {points} points: min margin {min_margin:e} (accepting >= {:e})",
        -ctx.tol.growth
    );
    let report = GrowthSummary {
        experiment: "growth-bound",
        status,
        config: ctx.cfg,
        band_radius: meta.0,
        ball_volume: meta.1,
        l2_norm: meta.2,
        min_margin,
        lines: rows,
    };
    ctx.out.json(".json", &report)?;
    Ok((status, summary))
}

// ------------------------------------------------------------- projection

#[derive(Serialize)]
struct ProjectionReport<'a> {
    experiment: &'static str,
    status: Status,
    config: &'a ExperimentConfig,
    n: usize,
    m: usize,
    marginal_file: String,
    marginal_l2: f64,
    l2_bound: f64,
    max_error: f64,
    failures: usize,
    decomposition: Option<DecompositionSummary>,
}

#[derive(Serialize)]
struct DecompositionSummary {
    maps: DecompositionExport,
    reconstruction_error: f64,
    tolerance: f64,
}

fn run_projection(
    ctx: &mut Ctx,
    spec: &SignalSpec,
    m: usize,
    points: usize,
    half_width: f64,
    map: Option<&AffineMap>,
    encoding: ValueEncoding,
) -> CliResult<(Status, String)> {
    check_count("points", points)?;
    check_positive("half_width", half_width)?;
    let f = ctx.load(spec)?;
    let n = f.dim();
    let density = f.spectral()?;
    let g = project_spectrum(density, m)?;
    let r = density.support().radius();
    let l2_bound = projection_bound_constant(r, n, m) * density.l2_norm();

    let mut rng = ctx.rng();
    let mut csv = format!("{},re,im,exact_re,exact_im,error_estimate\n", header("x", m));
    let mut max_error = 0.0f64;
    let mut failures = 0;
    for _ in 0..points {
        let x = uniform_point(&mut rng, m, half_width);
        let mut t = x.clone();
        t.resize(n, 0.0);
        let e = g.eval_with_error(&x);
        let exact = eval_pw(&f, &t)?;
        let err = (e.value - exact).norm();
        max_error = max_error.max(err);
        if err > e.error_estimate {
            failures += 1;
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            join(&x),
            e.value.re,
            e.value.im,
            exact.re,
            exact.im,
            e.error_estimate
        );
    }
    ctx.out.csv("-points.csv", csv.as_bytes())?;

    let mut nodes = format!("{},re,im\n", header("u", m));
    for (idx, v) in g.values().iter().enumerate() {
        let _ = writeln!(nodes, "{},{},{}", join(&g.node(idx)), v.re, v.im);
    }
    ctx.out.csv("-marginal.csv", nodes.as_bytes())?;
    let tag = ctx.out.provenance().tag();
    let stem = ctx.out.file_stem("-marginal-signal");
    let marginal = PwSignal::from_density(g.clone());
    let header_path = write_signal_tagged(&marginal, ctx.out.dir(), &stem, encoding, Some(&tag))?;
    ctx.out.record(header_path.clone());
    ctx.out.record(ctx.out.dir().join(format!(
        "{stem}.{}",
        match encoding {
            ValueEncoding::F64le => "bin",
            ValueEncoding::Csv => "csv",
        }
    )));

    let decomposition = match map {
        Some(map) => {
            let d = complete_to_invertible(map.matrix())?;
            let err = (d.reconstruct() - map.matrix()).amax();
            Some(DecompositionSummary {
                maps: d.export(),
                reconstruction_error: err,
                tolerance: ctx.tol.decomposition * map.operator_norm(),
            })
        }
        None => None,
    };

    if ctx.plots && m == 1 {
        let pts = |part: fn(&Complex64) -> f64| -> Vec<(f64, f64)> {
            g.values()
                .iter()
                .enumerate()
                .map(|(i, v)| (g.node(i)[0], part(v)))
                .collect()
        };
        let plot = Plot {
            title: format!("marginal spectrum on the first axis of R^{n}"),
            x_label: "u_1".into(),
            y_label: "g".into(),
            log_y: false,
            series: vec![
                Series {
                    label: "Re g".into(),
                    points: pts(|v| v.re),
                    mark: Mark::Line,
                },
                Series {
                    label: "Im g".into(),
                    points: pts(|v| v.im),
                    mark: Mark::Line,
                },
            ],
        };
        ctx.out.svg("-marginal.svg", &plot.render())?;
    }

    let bound_ok = g.l2_norm() <= l2_bound;
    let decomposition_ok = decomposition
        .as_ref()
        .map_or(true, |d| d.reconstruction_error <= d.tolerance);
    let status = Status::from_ok(failures == 0 && bound_ok && decomposition_ok);
    let mut summary = format!(
        "R^{n} -> R^{m}: max error {max_error:e}, {failures} above estimate; L2 {} <= {l2_bound}: {bound_ok}",
        g.l2_norm()
    );
    if let Some(d) = &decomposition {
        let _ = write!(
            summary,
            "\ndecomposition error {:e} (tolerance {:e})",
            d.reconstruction_error, d.tolerance
        );
    }
    let report = ProjectionReport {
        experiment: "projection",
        status,
        config: ctx.cfg,
        n,
        m,
        marginal_file: header_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        marginal_l2: g.l2_norm(),
        l2_bound,
        max_error,
        failures,
        decomposition,
    };
    ctx.out.json(".json", &report)?;
    Ok((status, summary))
}
