//! Dense symmetric matrices, spectral decompositions, exact PSD projections
//! and seeded random-matrix generation.

use std::fmt;
use std::ops::Index;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative symmetry tolerance used by [`SymMatrix::new`].
pub const SYM_RTOL: f64 = 1e-10;

/// Seeded stream of random draws.
///
/// Two streams built from the same seed produce the same sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh stream for trial `index` of an experiment seeded with `seed`.
    pub fn derived(seed: u64, index: u64) -> Self {
        Self::new(seed.wrapping_add(index))
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }
}

/// Spectral or Frobenius norm selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Frobenius,
    Spectral,
}

/// Dense real symmetric matrix of dimension at least one.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix({}x{}) {:?}", self.dim(), self.dim(), self.0)
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `sym_tol` for `m`: `1e-10 * max(1, max |m_ij|)`.
pub fn sym_tol(m: &DMatrix<f64>) -> f64 {
    SYM_RTOL * max_abs(m).max(1.0)
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(())
}

impl SymMatrix {
    /// Wraps `m`, rejecting non-square or asymmetric input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let n = m.nrows();
        let mut max_asym = 0.0_f64;
        for j in 0..n {
            for i in (j + 1)..n {
                max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        let tol = sym_tol(&m);
        if max_asym > tol || max_asym.is_nan() {
            return Err(Error::NotSymmetric { max_asym, tol });
        }
        Ok(Self::from_nearly_symmetric(m))
    }

    /// Builds from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            let cols = rows.first().map_or(0, Vec::len);
            return Err(Error::NonSquare { rows: n, cols });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Averages `m` with its transpose. Callers guarantee `m` is square and
    /// symmetric up to rounding.
    pub(crate) fn from_nearly_symmetric(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                // Halve first so entries near f64::MAX do not overflow.
                let v = if a == b { a } else { 0.5 * a + 0.5 * b };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SymMatrix(DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Frobenius inner product `Tr(Aᵀ B)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix(&self.0 * factor)
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        SymMatrix(m)
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::mismatch(format!(
                "cannot add {}x{} to {}x{}",
                other.dim(),
                other.dim(),
                self.dim(),
                self.dim()
            )));
        }
        for (s, o) in self.0.iter_mut().zip(other.0.iter()) {
            *s += factor * o;
        }
        Ok(())
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Returns `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> Result<SymMatrix> {
    check_square(a)?;
    Ok(SymMatrix((a + a.transpose()) * 0.5))
}

/// Eigen-decomposition `U diag(values) Uᵀ` with values sorted descending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl EigenDecomposition {
    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// `U f(D) Uᵀ` for a scalar map `f` applied to each eigenvalue.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = f(v);
            scaled.column_mut(j).scale_mut(s);
        }
        SymMatrix::from_nearly_symmetric(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_spectrum(|v| v)
    }

    /// Columns of `U` for strictly positive eigenvalues, each scaled by the
    /// square root of its eigenvalue, so that `F Fᵀ = U max(D, 0) Uᵀ`.
    pub fn positive_factor(&self) -> DMatrix<f64> {
        let keep: Vec<usize> = (0..self.values.len())
            .filter(|&j| self.values[j] > 0.0)
            .collect();
        let n = self.vectors.nrows();
        let mut f = DMatrix::zeros(n, keep.len());
        for (c, &j) in keep.iter().enumerate() {
            let s = self.values[j].sqrt();
            f.column_mut(c).copy_from(&(self.vectors.column(j) * s));
        }
        f
    }
}

/// Index of the largest-magnitude entry, lowest index on ties.
fn pivot_index(col: nalgebra::DVectorView<'_, f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > best_abs {
            best = i;
            best_abs = v.abs();
        }
    }
    best
}

/// Symmetric eigen-decomposition with descending eigenvalues and canonical
/// eigenvector signs (largest-magnitude entry positive).
pub fn eigh(x: &SymMatrix) -> Result<EigenDecomposition> {
    eigh_matrix(x.as_matrix())
}

pub(crate) fn eigh_matrix(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenDecomposition {
            vectors: DMatrix::zeros(0, 0),
            values: Vec::new(),
        });
    }
    let max_iter = 1000 + 100 * n;
    let raw = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::ConvergenceFailure(n))?;
    if raw.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure(n));
    }

    let mut vectors = raw.eigenvectors;
    let pivots: Vec<usize> = (0..n)
        .map(|j| {
            let p = pivot_index(vectors.column(j));
            if vectors[(p, j)] < 0.0 {
                vectors.column_mut(j).neg_mut();
            }
            p
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw.eigenvalues[b]
            .total_cmp(&raw.eigenvalues[a])
            .then(pivots[a].cmp(&pivots[b]))
    });

    let values = order.iter().map(|&j| raw.eigenvalues[j]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| vectors[(i, order[c])]);
    Ok(EigenDecomposition { vectors, values })
}

/// Frobenius norm, or the spectral norm via a full decomposition.
pub fn schatten_norm(x: &SymMatrix, norm: Norm) -> f64 {
    match norm {
        Norm::Frobenius => x.frobenius(),
        Norm::Spectral => match eigh(x) {
            Ok(eig) => eig.max().abs().max(eig.min().abs()),
            Err(_) => x.as_matrix().clone().svd(false, false).singular_values.max(),
        },
    }
}

/// `U max(D, 0) Uᵀ`, the Frobenius-nearest PSD matrix.
pub fn exact_psd_projection(x: &SymMatrix) -> Result<SymMatrix> {
    let eig = eigh(x)?;
    let f = eig.positive_factor();
    Ok(SymMatrix::from_nearly_symmetric(&f * f.transpose()))
}

/// `(X + (XᵀX)^{1/2}) / 2` with the square root taken through `eigh(XᵀX)`.
pub fn polar_psd_projection(x: &SymMatrix) -> Result<SymMatrix> {
    let m = x.as_matrix();
    let gram = SymMatrix::from_nearly_symmetric(m.transpose() * m);
    let root = eigh(&gram)?.map_spectrum(|v| v.max(0.0).sqrt());
    Ok(SymMatrix::from_nearly_symmetric((m + root.as_matrix()) * 0.5))
}

/// `rows x cols` matrix of iid standard normals, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// Symmetric part of a square Gaussian matrix.
pub fn gaussian_symmetric(n: usize, rng: &mut RngStream) -> SymMatrix {
    let g = gaussian_matrix(n, n, rng);
    SymMatrix((&g + g.transpose()) * 0.5)
}

/// Orthonormal columns of a Gaussian `n x n` matrix, with column signs
/// matched to the diagonal of `R`.
pub fn random_orthogonal(n: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Yᵀ diag(eigenvalues) Y` for a random orthogonal `Y`.
pub fn spectrum_matrix(eigenvalues: &[f64], rng: &mut RngStream) -> SymMatrix {
    let n = eigenvalues.len();
    let y = random_orthogonal(n, rng);
    let mut scaled = y.transpose();
    for (j, &v) in eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    SymMatrix::from_nearly_symmetric(scaled * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
        (a.as_matrix() - b.as_matrix()).norm() <= tol
    }

    #[test]
    fn symmetrize_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert_eq!(symmetrize(&a).unwrap(), SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap());
        let a = DMatrix::from_row_slice(1, 1, &[3.0]);
        assert_eq!(symmetrize(&a).unwrap()[(0, 0)], 3.0);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 4.0, -4.0, 0.0]);
        assert_eq!(symmetrize(&a).unwrap(), SymMatrix::zeros(2));
    }

    #[test]
    fn symmetrize_rejects_non_square() {
        let a = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(symmetrize(&a), Err(Error::NonSquare { rows: 2, cols: 3 })));
    }

    #[test]
    fn constructor_rejects_asymmetry() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(SymMatrix::new(a), Err(Error::NotSymmetric { .. })));
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-12, 1.0]);
        assert!(SymMatrix::new(tiny).is_ok());
        assert!(matches!(SymMatrix::new(DMatrix::zeros(0, 0)), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn eigh_examples() {
        let eig = eigh(&SymMatrix::from_diagonal(&[-3.0, -2.0, 1.0])).unwrap();
        assert_eq!(eig.values, vec![1.0, -2.0, -3.0]);

        let eig = eigh(&SymMatrix::identity(3)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);

        // [[0,1],[1,0]]: eigenpairs (1, [1,1]/√2) and (−1, [1,−1]/√2).
        let x = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let eig = eigh(&x).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.vectors[(0, 0)] - h).abs() < 1e-14);
        assert!((eig.vectors[(1, 0)] - h).abs() < 1e-14);
        assert!((eig.vectors[(0, 1)].abs() - h).abs() < 1e-14);
    }

    #[test]
    fn eigh_invariants_and_sign_convention() {
        let mut rng = RngStream::new(11);
        for n in [1, 2, 5, 17, 40] {
            let x = gaussian_symmetric(n, &mut rng);
            let eig = eigh(&x).unwrap();
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
            let u = &eig.vectors;
            let ortho = (u.transpose() * u - DMatrix::identity(n, n)).norm();
            assert!(ortho <= 1e-10 * n as f64, "orthogonality {ortho}");
            let rec = (eig.reconstruct().as_matrix() - x.as_matrix()).norm();
            assert!(rec <= 1e-8 * x.frobenius().max(1.0));
            for j in 0..n {
                let p = pivot_index(u.column(j));
                assert!(u[(p, j)] > 0.0);
            }
            let again = eigh(&x).unwrap();
            assert_eq!(again.vectors, eig.vectors);
        }
    }

    #[test]
    fn schatten_examples() {
        let x = SymMatrix::from_diagonal(&[3.0, -4.0]);
        assert!((schatten_norm(&x, Norm::Frobenius) - 5.0).abs() < 1e-14);
        assert!((schatten_norm(&x, Norm::Spectral) - 4.0).abs() < 1e-14);
        let z = SymMatrix::zeros(3);
        assert_eq!(schatten_norm(&z, Norm::Frobenius), 0.0);
        assert_eq!(schatten_norm(&z, Norm::Spectral), 0.0);
    }

    #[test]
    fn exact_projection_examples() {
        let x = SymMatrix::from_diagonal(&[-3.0, -2.0, 1.0]);
        let p = exact_psd_projection(&x).unwrap();
        assert!(close(&p, &SymMatrix::from_diagonal(&[0.0, 0.0, 1.0]), 1e-14));

        let x = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = exact_psd_projection(&x).unwrap();
        let want = SymMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(close(&p, &want, 1e-14));

        let mut rng = RngStream::new(3);
        let g = gaussian_matrix(6, 6, &mut rng);
        let psd = SymMatrix::from_nearly_symmetric(g.transpose() * &g);
        let p = exact_psd_projection(&psd).unwrap();
        assert!(close(&p, &psd, 1e-10 * psd.frobenius()));
    }

    #[test]
    fn polar_projection_examples() {
        let x = SymMatrix::from_diagonal(&[-3.0, -2.0, 1.0]);
        let p = polar_psd_projection(&x).unwrap();
        assert!(close(&p, &SymMatrix::from_diagonal(&[0.0, 0.0, 1.0]), 1e-12));
        let p = polar_psd_projection(&SymMatrix::identity(2).scaled(-1.0)).unwrap();
        assert!(close(&p, &SymMatrix::zeros(2), 1e-14));
        let p = polar_psd_projection(&SymMatrix::from_diagonal(&[5.0])).unwrap();
        assert!((p[(0, 0)] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_is_deterministic_and_standard() {
        let a = gaussian_matrix(2, 2, &mut RngStream::new(7));
        let b = gaussian_matrix(2, 2, &mut RngStream::new(7));
        assert_eq!(a, b);
        let one = gaussian_matrix(1, 1, &mut RngStream::new(1));
        assert!(one[(0, 0)].is_finite());

        let big = gaussian_matrix(1000, 1000, &mut RngStream::new(2024));
        let n = big.len() as f64;
        let mean = big.sum() / n;
        let var = big.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.01, "mean {mean}");
        assert!((0.99..=1.01).contains(&var), "variance {var}");
    }

    #[test]
    fn spectrum_matrix_round_trips() {
        let mut rng = RngStream::new(5);
        let x = spectrum_matrix(&[1.0, 1.0], &mut rng);
        assert!(close(&x, &SymMatrix::identity(2), 1e-14));

        let x = spectrum_matrix(&[2.0, -2.0], &mut rng);
        let eig = eigh(&x).unwrap();
        assert!((eig.values[0] - 2.0).abs() < 1e-12);
        assert!((eig.values[1] + 2.0).abs() < 1e-12);

        let n = 40;
        let mut spec: Vec<f64> = (0..n).map(|i| (i as f64 - 13.5) * 0.3).collect();
        let x = spectrum_matrix(&spec, &mut rng);
        spec.sort_by(|a, b| b.total_cmp(a));
        let eig = eigh(&x).unwrap();
        for (got, want) in eig.values.iter().zip(&spec) {
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0));
        }
    }

    #[test]
    fn dimension_one_projection() {
        for v in [-2.5, 0.0, 4.0] {
            let x = SymMatrix::from_diagonal(&[v]);
            assert_eq!(exact_psd_projection(&x).unwrap()[(0, 0)], v.max(0.0));
            assert!((polar_psd_projection(&x).unwrap()[(0, 0)] - v.max(0.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_symmetric_entries_do_not_overflow() {
        let big = -1.6457979939314726e308;
        let x = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, big, big, 0.0])).unwrap();
        assert_eq!(x[(0, 1)], big);
        let y = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, f64::MAX, f64::MAX.next_down(), 0.0])).unwrap();
        assert!(y[(0, 1)].is_finite());
    }
}
