use proptest::prelude::*;

use qpi_core::config::{validate_config, OpticalSystem, TwinBeamConfig};
use qpi_core::metrics::{esf_fit, pearson};
use qpi_core::optics::angular_spectrum_propagate;
use qpi_core::retrieval::{box_sum, poisson_solve_dirichlet, quantum_correct};
use qpi_core::twinbeam::{bin_counts, eta_c, register_idler};
use qpi_core::{qpf, ComplexField2D, Grid, RngStream, ScalarField2D, TwinBeamSampler};

fn field(n: usize) -> impl Strategy<Value = ScalarField2D> {
    prop::collection::vec(-50.0f64..50.0, n * n)
        .prop_map(move |v| ScalarField2D::new(Grid::square(n, 1.0).unwrap(), v).unwrap())
}

fn counts(n: usize) -> impl Strategy<Value = ScalarField2D> {
    prop::collection::vec(0u32..1000, n * n).prop_map(move |v| {
        ScalarField2D::new(
            Grid::square(n, 1.625).unwrap(),
            v.into_iter().map(f64::from).collect(),
        )
        .unwrap()
    })
}

fn max_abs(f: &ScalarField2D) -> f64 {
    f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn poisson_solve_is_linear(a in field(24), b in field(24), al in -3.0f64..3.0, be in -3.0f64..3.0) {
        let lhs = poisson_solve_dirichlet(&a.scale(al).add(&b.scale(be)).unwrap()).unwrap();
        let rhs = poisson_solve_dirichlet(&a).unwrap().scale(al)
            .add(&poisson_solve_dirichlet(&b).unwrap().scale(be)).unwrap();
        let dev = max_abs(&lhs.sub(&rhs).unwrap());
        prop_assert!(dev <= 1e-10 * max_abs(&rhs).max(1.0));
    }

    #[test]
    fn poisson_solution_vanishes_on_border(a in field(16)) {
        let u = poisson_solve_dirichlet(&a).unwrap();
        for i in 0..16 {
            prop_assert_eq!(u.get(0, i), 0.0);
            prop_assert_eq!(u.get(15, i), 0.0);
            prop_assert_eq!(u.get(i, 0), 0.0);
            prop_assert_eq!(u.get(i, 15), 0.0);
        }
    }

    #[test]
    fn pearson_is_affine_invariant(a in field(12), b in field(12), s in 0.1f64..10.0, t in -100.0f64..100.0) {
        prop_assume!(a.variance() > 0.0 && b.variance() > 0.0);
        let r = pearson(&a, &b).unwrap();
        let up = pearson(&a, &b.map(|v| s * v + t)).unwrap();
        let down = pearson(&a, &b.map(|v| -s * v + t)).unwrap();
        prop_assert!((r - up).abs() < 1e-9);
        prop_assert!((r + down).abs() < 1e-9);
        prop_assert!(r.abs() <= 1.0);
    }

    #[test]
    fn binning_conserves_counts(f in counts(24), bin in 1usize..=3) {
        let b = bin_counts(&f, bin).unwrap();
        prop_assert_eq!(b.sum(), f.sum());
        prop_assert!((b.pitch() - 1.625 * bin as f64).abs() < 1e-12);
    }

    #[test]
    fn binning_crops_without_inventing_counts(f in counts(41), bin in 2usize..=4) {
        let b = bin_counts(&f, bin).unwrap();
        prop_assert!(b.sum() <= f.sum());
        prop_assert_eq!(b.width(), 41 / bin);
    }

    #[test]
    fn box_sum_of_constant(v in 0.0f64..100.0, b in 1usize..6) {
        let g = Grid::square(16, 1.0).unwrap();
        let f = ScalarField2D::filled(g, v).unwrap();
        let s = box_sum(&f, b);
        for x in s.values() {
            prop_assert!((x - v * (b * b) as f64).abs() < 1e-9 * v.max(1.0));
        }
    }

    #[test]
    fn propagation_conserves_energy(re in prop::collection::vec(-1.0f64..1.0, 256), im in prop::collection::vec(-1.0f64..1.0, 256), dz in -0.5f64..0.5) {
        let g = Grid::square(16, 1.625).unwrap();
        let u = ComplexField2D::new(g, re.iter().zip(&im).map(|(&a, &b)| num_complex::Complex64::new(a, b)).collect()).unwrap();
        let v = angular_spectrum_propagate(&u, dz, 810.0).unwrap();
        prop_assert!((v.energy() - u.energy()).abs() <= 1e-10 * u.energy().max(1e-300));
    }

    #[test]
    fn field_files_round_trip(f in field(9)) {
        let back = qpf::decode(&qpf::encode(&f)).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn idler_registration_is_an_involution(f in counts(10)) {
        prop_assert_eq!(register_idler(&register_idler(&f)), f);
    }

    #[test]
    fn zero_weight_correction_is_identity(s in counts(8), i in counts(8)) {
        let m = ScalarField2D::filled(i.grid(), 3.0).unwrap();
        prop_assert_eq!(quantum_correct(&s, &i, Some(&m), 0.0).unwrap(), s);
    }

    #[test]
    fn collection_efficiency_bounds(d in 0.01f64..50.0, e in 0.0f64..2.0) {
        let v = eta_c(d, e);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(eta_c(d * 1.5, e) >= v - 1e-12);
        prop_assert!(eta_c(d, e + 0.1) <= v + 1e-12);
    }

    #[test]
    fn esf_fit_recovers_width(w in 1.0f64..5.0, x0 in 40.0f64..70.0, a in prop_oneof![-1.0f64..-0.1, 0.1f64..1.0]) {
        let pitch = 1.625;
        let p: Vec<f64> = (0..72)
            .map(|i| {
                let x = (i as f64 + 0.5) * pitch;
                0.5 * a * libm::erf((x - x0) / (std::f64::consts::SQRT_2 * w)) + 0.2
            })
            .collect();
        let f = esf_fit(&p, pitch).unwrap();
        prop_assert!((f.w - w).abs() < 1e-5 * w, "w {} vs {}", f.w, w);
        prop_assert!((f.x0 - x0).abs() < 1e-5 * x0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sampling_is_deterministic_per_stream(seed in any::<u64>(), frame in 0u64..1000) {
        let cfg = validate_config(&OpticalSystem::default(), &TwinBeamConfig::default()).unwrap();
        let g = Grid::square(16, cfg.optical.object_pixel_um()).unwrap();
        let s = TwinBeamSampler::new(None, g, &cfg, 0.0).unwrap();
        let a = s.sample(RngStream::lane(seed, 7, frame));
        let b = s.sample(RngStream::lane(seed, 7, frame));
        let c = s.sample(RngStream::lane(seed, 7, frame + 1));
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(a.n_s, c.n_s);
    }
}
