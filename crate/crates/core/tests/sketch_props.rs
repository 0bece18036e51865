mod common;

use common::{mean_and_se, random_sym, svd_norm};
use nalgebra::DMatrix;
use proptest::prelude::*;
use psdcone::experiments::fig4_matrix;
use psdcone::symcore::spectrum_matrix;
use psdcone::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn basis_is_orthonormal_and_projector_idempotent(
        seed in any::<u64>(), n in 2usize..40, kfrac in 0.05f64..0.9, q in 0usize..4
    ) {
        let mut rng = RngStream::new(seed);
        let x = random_sym(n, 3.0, &mut rng);
        let k = ((n as f64 * kfrac) as usize).max(1).min(n - 1);
        let l = (n - k).min(5);
        let basis = range_finder(x.as_matrix(), &RangeParams::new(k, l, q), &mut rng).unwrap();
        let cols = basis.columns();
        let gram = cols.transpose() * cols;
        prop_assert!((gram - DMatrix::identity(basis.width(), basis.width())).norm() <= 1e-10);
        let p = basis.projector();
        prop_assert!((&p * &p - &p).norm() <= 1e-9);
    }

    #[test]
    fn sandwich_residual_bounds(seed in any::<u64>(), n in 2usize..40, kfrac in 0.05f64..0.9) {
        let mut rng = RngStream::new(seed);
        let x = random_sym(n, 1.0 + 4.0 * rng.uniform(), &mut rng);
        let k = ((n as f64 * kfrac) as usize).max(1).min(n - 1);
        let l = (n - k).min(4);
        let basis = range_finder(x.as_matrix(), &RangeParams::new(k, l, 0), &mut rng).unwrap();
        let sandwich_err = x.as_matrix() - basis.sandwich(&x).as_matrix();
        let resid = basis.residual(x.as_matrix());
        let slack = 1e-10 * x.frobenius().max(1.0);
        prop_assert!(svd_norm(&sandwich_err) <= 2.0 * svd_norm(&resid) + slack);
        let c = 1.0 + ((k + l) as f64).sqrt();
        prop_assert!(sandwich_err.norm() <= c * resid.norm() + slack);
    }
}

#[test]
fn residual_is_non_increasing_in_q() {
    let n = 200;
    let x = fig4_matrix([3.0, 1.0, 6.0, 2.0], n, 5).unwrap();
    let means: Vec<f64> = (0..3)
        .map(|q| {
            let params = RangeParams::new(40, 5, q);
            let errs: Vec<f64> = (0..50)
                .map(|s| {
                    let b = range_finder(x.as_matrix(), &params, &mut RngStream::derived(100, s)).unwrap();
                    b.residual_spectral(x.as_matrix())
                })
                .collect();
            mean_and_se(&errs).0
        })
        .collect();
    assert!(means[1] <= 1.05 * means[0], "{means:?}");
    assert!(means[2] <= 1.05 * means[1], "{means:?}");
}

#[test]
fn power_iteration_with_spectral_gap() {
    // Top singular value separated by a factor two converges geometrically.
    let mut hits = 0;
    for s in 0..100 {
        let mut rng = RngStream::new(s);
        let mut spectrum: Vec<f64> = (0..50).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        spectrum[0] = -2.5;
        let x = spectrum_matrix(&spectrum, &mut rng);
        let est = power_iteration(&x, 50, &mut rng);
        if (est - 2.5).abs() <= 1e-3 * 2.5 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn min_eig_with_spectral_gap() {
    let mut hits = 0;
    for s in 0..100 {
        let mut rng = RngStream::new(1000 + s);
        let mut spectrum: Vec<f64> = (0..60).map(|_| rng.uniform()).collect();
        spectrum[0] = 3.0;
        spectrum[1] = -1.5;
        let x = spectrum_matrix(&spectrum, &mut rng);
        let est = min_eig_magnitude(&x, 30, &mut rng);
        if (est - 1.5).abs() <= 0.05 * 3.0 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}
