mod common;

use common::{jacobi_eigh, psd_oracle, random_sym, svd_norm};
use nalgebra::DMatrix;
use proptest::prelude::*;
use psdcone::projection::sketch_project_scaled;
use psdcone::symcore::{gaussian_matrix, random_orthogonal};
use psdcone::*;

fn case(seed: u64, n: usize) -> SymMatrix {
    let mut rng = RngStream::new(seed);
    let scale = 0.1 + 10.0 * rng.uniform();
    random_sym(n, scale, &mut rng)
}

fn lambda_min(x: &SymMatrix) -> f64 {
    eigh(x).unwrap().min()
}

fn spec_norm(x: &SymMatrix) -> f64 {
    svd_norm(x.as_matrix())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exact_projection_is_idempotent(seed in any::<u64>(), n in 1usize..30) {
        let x = case(seed, n);
        let p = exact_psd_projection(&x).unwrap();
        let pp = exact_psd_projection(&p).unwrap();
        prop_assert!(pp.sub(&p).unwrap().frobenius() <= 1e-9 * p.frobenius().max(1.0));
    }

    #[test]
    fn polar_matches_eigen_clip_and_jacobi(seed in any::<u64>(), n in 1usize..30) {
        let x = case(seed, n);
        let tol = 1e-8 * x.frobenius().max(1.0);
        let e = exact_psd_projection(&x).unwrap();
        prop_assert!(polar_psd_projection(&x).unwrap().sub(&e).unwrap().frobenius() <= tol);
        prop_assert!(psd_oracle(&x).sub(&e).unwrap().frobenius() <= tol);
    }

    #[test]
    fn eigenvalue_magnitudes_are_singular_values(seed in any::<u64>(), n in 1usize..30) {
        let x = case(seed, n);
        let mut mags: Vec<f64> = eigh(&x).unwrap().values.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let sv = x.as_matrix().clone().svd(false, false).singular_values;
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in mags.iter().zip(&sv) {
            prop_assert!((a - b).abs() <= 1e-9 * sv[0].max(1.0));
        }
    }

    #[test]
    fn every_method_returns_psd(seed in any::<u64>(), n in 2usize..30, which in 0usize..4) {
        let x = case(seed, n);
        let k = 1 + (seed as usize % (n - 1).max(1)).min(n - 1);
        let l = (n - k).min(3);
        let params = RangeParams::new(k, l, (seed % 3) as usize);
        let cfg = match which {
            0 => ProjectorConfig::exact(),
            1 => ProjectorConfig::polar(),
            2 => ProjectorConfig::randomized(params),
            _ => ProjectorConfig::scaled(params, 10),
        };
        let rep = project(&x, &cfg, &mut RngStream::new(seed ^ 1)).unwrap();
        let out = rep.result.unwrap();
        prop_assert!(lambda_min(&out) >= -1e-8 * x.frobenius().max(1.0));
    }

    #[test]
    fn projection_is_frobenius_nonexpansive(seed in any::<u64>(), n in 1usize..50) {
        let x = case(seed, n);
        let y = case(seed.wrapping_add(0x9e37), n);
        let lhs = exact_psd_projection(&x).unwrap().sub(&exact_psd_projection(&y).unwrap()).unwrap().frobenius();
        prop_assert!(lhs <= x.sub(&y).unwrap().frobenius() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn spectral_projection_bounds(seed in any::<u64>(), n in 1usize..50, near in any::<bool>()) {
        let x = case(seed, n);
        let mut y = case(seed.wrapping_add(77), n);
        if near {
            // Close pairs make the logarithmic factor large.
            let mut d = x.clone();
            d.axpy(1e-3, &y).unwrap();
            y = d;
        }
        let d = spec_norm(&x.sub(&y).unwrap());
        prop_assume!(d > 0.0);
        let lhs = spec_norm(&exact_psd_projection(&x).unwrap().sub(&exact_psd_projection(&y).unwrap()).unwrap());
        let nf = n as f64;
        let b1 = 0.5 * (nf.sqrt() + 1.0) * d;
        let ratio = (spec_norm(&x) + spec_norm(&y)) / d;
        let b2 = (0.5 + 2.0 / std::f64::consts::PI + ratio.ln() / std::f64::consts::PI) * d;
        let slack = 1e-10 * (1.0 + d);
        prop_assert!(lhs <= b1 + slack, "first bound: {lhs} > {b1}");
        prop_assert!(lhs <= b2 + slack, "log bound: {lhs} > {b2}");
    }

    #[test]
    fn interchange_identity(seed in any::<u64>(), k in 1usize..15, extra in 1usize..15) {
        let n = k + extra;
        let mut rng = RngStream::new(seed);
        let x = random_sym(k, 1.0 + 5.0 * rng.uniform(), &mut rng);
        let q = random_orthogonal(n, &mut rng).columns(0, k).into_owned();
        let lhs = &q * exact_psd_projection(&x).unwrap().as_matrix() * q.transpose();
        let inner = SymMatrix::new(common::symmetrized(&q * x.as_matrix() * q.transpose())).unwrap();
        let rhs = exact_psd_projection(&inner).unwrap();
        prop_assert!((lhs - rhs.as_matrix()).norm() <= 1e-8);
    }

    #[test]
    fn scaled_projection_matches_interchange_form(seed in any::<u64>(), n in 3usize..25) {
        let x = case(seed, n);
        let alpha = lambda_min(&x).abs().max(0.5);
        let k = n / 2;
        let params = RangeParams::new(k, 1, 1);
        let sketch = sketch_project_scaled(&x, &params, alpha, &mut RngStream::new(seed)).unwrap();
        let q = sketch.basis.columns();
        let b = x.shifted(alpha).scaled(1.0 / alpha);
        let pbp = q * q.transpose() * b.shifted(-1.0).as_matrix() * q * q.transpose();
        let want = exact_psd_projection(&SymMatrix::new(common::symmetrized(pbp)).unwrap()).unwrap().scaled(alpha);
        prop_assert!(want.sub(&sketch.psd.dense()).unwrap().frobenius() <= 1e-8 * x.frobenius().max(1.0));
    }
}

#[test]
fn exact_projection_beats_random_psd_matrices() {
    let mut rng = RngStream::new(2024);
    for n in 1..=4 {
        for _ in 0..5 {
            let x = random_sym(n, 2.0, &mut rng);
            let best = exact_psd_projection(&x).unwrap().sub(&x).unwrap().frobenius();
            for _ in 0..10_000 {
                let g = gaussian_matrix(n, n, &mut rng) * (0.2 + 2.0 * rng.uniform());
                let cand = SymMatrix::new(common::symmetrized(g.transpose() * &g)).unwrap();
                assert!(best <= cand.sub(&x).unwrap().frobenius() + 1e-9);
            }
        }
    }
}

#[test]
fn spectral_norm_is_not_nonexpansive_for_the_witness() {
    let a = SymMatrix::from_diagonal(&[1.0, 100.0]);
    let ap = exact_psd_projection(&a).unwrap();
    let mut worst: f64 = 0.0;
    for step in 0..=200 {
        let d = step as f64;
        let b = SymMatrix::from_rows(&[vec![0.0, 200.0], vec![200.0, d]]).unwrap();
        let lhs = spec_norm(&ap.sub(&exact_psd_projection(&b).unwrap()).unwrap());
        let rhs = spec_norm(&a.sub(&b).unwrap());
        worst = worst.max(lhs / rhs);
    }
    assert!(worst > 1.0, "ratio never exceeded one: {worst}");
}

#[test]
fn jacobi_oracle_sanity() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let (mut vals, _) = jacobi_eigh(&a);
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
}
