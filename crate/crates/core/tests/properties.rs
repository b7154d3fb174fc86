use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spod_rom::expm::expm;
use spod_rom::fft::{fft_time, ifft_time};
use spod_rom::forcing::covariance_factor;
use spod_rom::freq::{geometric_sum, CorrectionOperators};
use spod_rom::io::{read_array, write_array, Array};
use spod_rom::linalg::{rel_diff, RMat};
use spod_rom::modal::{pod, retention};
use spod_rom::sparse::CsrMatrix;
use spod_rom::verify::{random_cmat, random_stable_system, random_weight};
use spod_rom::{CMat, FrequencyGrid, C64};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn container_round_trip_is_bit_exact(
        rows in 0usize..6,
        cols in 0usize..5,
        seed in any::<u64>(),
        real in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_cmat(&mut rng, rows, cols);
        let a = if real {
            Array::from_rmat(&m.map(|z| z.re * 1e300))
        } else {
            Array::from_cmat(&m)
        };
        let mut buf = Vec::new();
        write_array(&mut buf, &a).unwrap();
        let back = read_array(buf.as_slice()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn dft_round_trip(rows in 1usize..5, n in 1usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_cmat(&mut rng, rows, n);
        prop_assert!(rel_diff(&ifft_time(&fft_time(&x)), &x) < 1e-13);
    }

    #[test]
    fn retention_spends_exact_budget(
        energies in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 6), 1..12),
        r in 0usize..=6,
    ) {
        let mut e = energies;
        for row in &mut e {
            row.sort_by(|a, b| b.total_cmp(a));
        }
        let counts = retention(&e, r).unwrap();
        prop_assert_eq!(counts.iter().sum::<usize>(), e.len() * r);
        prop_assert!(counts.iter().all(|&c| c <= 6));
    }

    #[test]
    fn covariance_factor_reconstructs(n in 1usize..21, rank in 1usize..21, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_cmat(&mut rng, n, rank.min(n)).map(|z| z.re);
        let c: RMat = &g * g.transpose();
        let l = covariance_factor(&c).unwrap();
        let err = (&l * l.transpose() - &c).norm() / c.norm().max(f64::MIN_POSITIVE);
        prop_assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn geometric_sum_telescopes(n in 1usize..10, steps in 1usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = random_cmat(&mut rng, n, n);
        m /= C64::new(m.norm() * 1.5, 0.0);
        let s = geometric_sum(&m, steps).unwrap();
        let id = CMat::identity(n, n);
        // (I - M) S = I - M^n
        let mut p = id.clone();
        for _ in 0..steps {
            p = &p * &m;
        }
        prop_assert!(rel_diff(&((&id - &m) * s), &(&id - p)) < 1e-12);
    }

    #[test]
    fn pod_modes_are_weight_orthonormal(n in 2usize..12, k in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weight(&mut rng, n);
        let x = random_cmat(&mut rng, n, k.min(n));
        let modes = pod(&x, &w).unwrap().modes;
        let g = w.gram(&modes, &modes);
        prop_assert!((g - CMat::identity(modes.ncols(), modes.ncols())).norm() < 1e-10);
    }

    #[test]
    fn operator_sum_is_n_identity(n in 1usize..10, n_omega in 2usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_stable_system(&mut rng, n);
        let grid = FrequencyGrid::new(n_omega, 0.15).unwrap();
        let s = CorrectionOperators::new(&sys, grid).unwrap().operator_sum().unwrap();
        let target = CMat::identity(n, n) * C64::new(n_omega as f64, 0.0);
        prop_assert!(rel_diff(&s, &target) < 1e-10);
    }

    #[test]
    fn expm_semigroup(n in 1usize..8, t in 0.01f64..3.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cmat(&mut rng, n, n) * C64::new(4.0, 0.0);
        let whole = expm(&a, 2.0 * t).unwrap();
        let half = expm(&a, t).unwrap();
        prop_assert!(rel_diff(&(&half * &half), &whole) < 1e-11);
    }

    #[test]
    fn sparse_products_match_dense(
        n in 1usize..10,
        trip in prop::collection::vec((0usize..10, 0usize..10, -1.0f64..1.0), 0..30),
        seed in any::<u64>(),
    ) {
        let t: Vec<_> = trip.into_iter().filter(|&(i, j, _)| i < n && j < n).map(|(i, j, v)| (i, j, C64::new(v, -v))).collect();
        let s = CsrMatrix::from_triplets(n, n, t);
        let d = s.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_cmat(&mut rng, n, 3);
        prop_assert!((s.matmat(&x) - &d * &x).norm() < 1e-12);
        prop_assert!((s.adjoint_matmat(&x) - d.adjoint() * &x).norm() < 1e-12);
    }
}
