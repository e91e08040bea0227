use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use pwkit::analysis::{
    affinity_verdict, circle, exp_type_bound_check, kernel_invariance_check, seeded_probes, warp_phase_profile,
    LineProbe, ProbeSpec, VerdictStatus, VerdictTolerances,
};
use pwkit::pwcore::{make_catalog_with, AffineMap, CatalogKind, GridSpec, PwSignal, Warp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_affine(rng: &mut ChaCha8Rng, n: usize, m: usize) -> AffineMap {
    let a = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.5..1.5));
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    AffineMap::new(a, b).unwrap()
}

fn nonaffine_catalog() -> Vec<(&'static str, Warp, usize)> {
    let sine = |eps: f64| Warp::Sine {
        dim: 1,
        axis: 1,
        amplitude: eps,
        frequency: 1.0,
    };
    let swap = Warp::Affine(AffineMap::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[0.0, 0.0]).unwrap());
    let square = Warp::Power {
        dim: 2,
        axis: 1,
        exponent: 2,
    };
    vec![
        (
            "cube",
            Warp::Power {
                dim: 1,
                axis: 1,
                exponent: 3,
            },
            1,
        ),
        ("sine 0.3", sine(0.3), 1),
        ("sine 0.5", sine(0.5), 1),
        ("sine 1.0", sine(1.0), 1),
        ("swap then square", Warp::compose(square, swap).unwrap(), 2),
    ]
}

#[test]
fn affine_warps_have_linear_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (n, m) in [(1, 1), (2, 2), (3, 2), (2, 3), (3, 3)] {
        let warp = Warp::Affine(random_affine(&mut rng, n, m));
        let probes = seeded_probes(m, 20, 100 + n as u64, &ProbeSpec::default()).unwrap();
        for p in &probes {
            for j in 1..=n {
                let prof = warp_phase_profile(&warp, p, j).unwrap();
                assert!(prof.residual < 1e-8, "n={n} m={m} j={j}: {}", prof.residual);
            }
        }
    }
}

#[test]
fn nonaffine_catalog_is_detected() {
    let spec = ProbeSpec {
        anchor_half_width: 1.0,
        extent: 3.0,
        abscissas: 601,
    };
    for (name, warp, m) in nonaffine_catalog() {
        let probes = seeded_probes(m, 20, 9, &spec).unwrap();
        let v = affinity_verdict(&warp, &probes, &VerdictTolerances::default()).unwrap();
        assert_eq!(v.status, VerdictStatus::NonAffine, "{name}");
        assert!(v.witness.unwrap().residual > 1e-2, "{name}");
        let again = affinity_verdict(&warp, &probes, &VerdictTolerances::default()).unwrap();
        assert_eq!(v, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unwrapping_is_sound(
        anchor in -2.0f64..2.0,
        eps in 0.0f64..1.0,
        freq in 0.2f64..2.0,
        extent in 1.0f64..8.0,
    ) {
        let w = Warp::Sine { dim: 1, axis: 1, amplitude: eps, frequency: freq };
        let probe = LineProbe::uniform(vec![anchor], vec![1.0], -extent, extent, 801).unwrap();
        let prof = warp_phase_profile(&w, &probe, 1).unwrap();
        for (p, r) in prof.phase.iter().zip(&prof.ratio) {
            if let (Some(p), Some(r)) = (p, r) {
                prop_assert!((Complex64::from_polar(1.0, *p) - r / r.norm()).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn growth_bound_is_universal() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let radii = [0.5, 2.0, 5.0, 10.0];
    for n in 1..=3 {
        let grid = if n == 3 {
            GridSpec::IntervalsPerUnit(8)
        } else {
            GridSpec::IntervalsPerUnit(32)
        };
        let mut kinds = vec![CatalogKind::K];
        for j in 1..=n {
            kinds.push(CatalogKind::P(j));
            kinds.push(CatalogKind::Q(j));
        }
        for kind in kinds {
            let f = make_catalog_with(n, kind, vec![0.0; n], grid).unwrap();
            for line in 0..50 {
                let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let zs = circle(radii[line % radii.len()], 64);
                let rep = exp_type_bound_check(&f, &a, &b, &zs).unwrap();
                assert!(rep.min_margin >= -1e-8, "n={n} {kind}: {}", rep.min_margin);
            }
        }
    }
}

#[test]
fn growth_bound_for_spectral_signals() {
    let s = pwkit::pwcore::BandSupport::new(vec![-0.5, 0.0], vec![1.0, 2.0]).unwrap();
    let d = pwkit::pwcore::SpectralDensity::from_fn(s, vec![41, 41], |u| Complex64::new(u[0].cos(), u[1])).unwrap();
    let f = PwSignal::from_density(d);
    let rep = exp_type_bound_check(&f, &[1.0, -1.0], &[0.3, 0.4], &circle(10.0, 64)).unwrap();
    assert!(rep.min_margin >= 0.0);
}

#[test]
fn kernel_variance_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for (n, m) in [(1, 2), (1, 3), (2, 3), (2, 4)] {
        for kind in [CatalogKind::K, CatalogKind::P(1), CatalogKind::Q(n)] {
            let f = make_catalog_with(n, kind, vec![0.0; n], GridSpec::default()).unwrap();
            let map = random_affine(&mut rng, n, m);
            let shifts: Vec<f64> = (0..25).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let rep = kernel_invariance_check(&f, &map, &shifts).unwrap();
            assert!(rep.variance < 1e-20, "n={n} m={m} {kind}: {:e}", rep.variance);
            assert!(rep.constant);
        }
    }
}
