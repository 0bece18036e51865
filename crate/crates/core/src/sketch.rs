//! Randomized range finding, power iteration and the minimum-eigenvalue
//! shift estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symcore::{gaussian_matrix, RngStream, SymMatrix};

/// Relative threshold on `|R_ii| / ‖Y‖_F` below which a sampled column is
/// treated as linearly dependent.
pub const RANK_RTOL: f64 = 1e-12;

/// Sketch configuration: target rank `k`, oversampling `l`, power exponent
/// `q`, and the seed used when a caller builds its own stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeParams {
    pub k: usize,
    pub l: usize,
    pub q: usize,
    pub seed: u64,
}

impl RangeParams {
    pub fn new(k: usize, l: usize, q: usize) -> Self {
        Self { k, l, q, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sample width `k + l`.
    pub fn width(&self) -> usize {
        self.k + self.l
    }

    pub fn rng(&self) -> RngStream {
        RngStream::new(self.seed)
    }

    /// Checks `k >= 1`, `l >= 1` (or `k + l >= 1` when `l == 0` is used for
    /// a pure rank-`k` sketch) and `k + l <= min(rows, cols)`.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.width() == 0 {
            return Err(Error::invalid("k + l must be at least 1"));
        }
        if self.width() > rows.min(cols) {
            return Err(Error::invalid(format!(
                "k+l exceeds dimension: k + l = {} > {}",
                self.width(),
                rows.min(cols)
            )));
        }
        Ok(())
    }
}

/// What to do when the sample has numerical rank below `k + l`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RankPolicy {
    /// Keep only the numerically independent columns.
    #[default]
    Truncate,
    /// Fail with [`Error::RankDeficientSample`].
    Strict,
}

/// `n x r` matrix with orthonormal columns.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    columns: DMatrix<f64>,
    requested: usize,
}

impl OrthoBasis {
    /// Wraps `columns`, which the caller asserts are orthonormal.
    pub fn from_orthonormal(columns: DMatrix<f64>) -> Self {
        let requested = columns.ncols();
        Self { columns, requested }
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn width(&self) -> usize {
        self.columns.ncols()
    }

    /// Width originally asked of the range finder.
    pub fn requested_width(&self) -> usize {
        self.requested
    }

    /// Number of sampled columns dropped as numerically dependent.
    pub fn truncated(&self) -> usize {
        self.requested - self.width()
    }

    /// `‖QᵀQ − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = self.width();
        (self.columns.transpose() * &self.columns - DMatrix::identity(r, r)).norm()
    }

    /// Dense projector `QQᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }

    /// `(I − QQᵀ) A`.
    pub fn residual(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        a - &self.columns * (self.columns.transpose() * a)
    }

    /// `‖(I − QQᵀ) A‖_F`.
    pub fn residual_frobenius(&self, a: &DMatrix<f64>) -> f64 {
        self.residual(a).norm()
    }

    /// `‖(I − QQᵀ) A‖_∞` (largest singular value).
    pub fn residual_spectral(&self, a: &DMatrix<f64>) -> f64 {
        spectral_norm(&self.residual(a))
    }

    /// `QQᵀ X QQᵀ`.
    pub fn sandwich(&self, x: &SymMatrix) -> SymMatrix {
        let q = &self.columns;
        let core = q.transpose() * x.as_matrix() * q;
        SymMatrix::from_nearly_symmetric(q * core * q.transpose())
    }

    /// `Qᵀ X Q`.
    pub fn compress(&self, x: &SymMatrix) -> SymMatrix {
        let q = &self.columns;
        SymMatrix::from_nearly_symmetric(q.transpose() * x.as_matrix() * q)
    }
}

/// Largest singular value of a general dense matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    // σ₁(A)² = λ_max(AᵀA) on the smaller Gram side.
    let gram = if a.nrows() >= a.ncols() {
        a.transpose() * a
    } else {
        a * a.transpose()
    };
    let gram = SymMatrix::from_nearly_symmetric(gram);
    match crate::symcore::eigh(&gram) {
        Ok(eig) => eig.max().max(0.0).sqrt(),
        Err(_) => a.clone().svd(false, false).singular_values.max(),
    }
}

/// Thin Householder QR; returns `Q` and the diagonal of `R`.
fn thin_qr(y: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let qr = y.qr();
    let r = qr.r();
    let diag = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)]).collect();
    (qr.q(), diag)
}

/// Orthonormal basis for the range of `(AAᵀ)^q A Ω` with Gaussian `Ω`,
/// truncating numerically dependent columns.
pub fn range_finder(a: &DMatrix<f64>, params: &RangeParams, rng: &mut RngStream) -> Result<OrthoBasis> {
    range_finder_with(a, params, RankPolicy::Truncate, rng)
}

/// [`range_finder`] with an explicit rank-deficiency policy.
///
/// The power scheme takes `2q + 1` products with `A` and `Aᵀ`; for `q >= 2`
/// the block is re-orthonormalized after every product.
pub fn range_finder_with(
    a: &DMatrix<f64>,
    params: &RangeParams,
    policy: RankPolicy,
    rng: &mut RngStream,
) -> Result<OrthoBasis> {
    let (rows, cols) = a.shape();
    params.validate(rows, cols)?;
    let width = params.width();
    let reorth = params.q >= 2;

    let omega = gaussian_matrix(cols, width, rng);
    let mut y = a * omega;
    for _ in 0..params.q {
        if reorth {
            y = thin_qr(y).0;
        }
        let mut z = a.transpose() * &y;
        if reorth {
            z = thin_qr(z).0;
        }
        y = a * z;
    }

    let scale = y.norm();
    let (q, diag) = thin_qr(y);
    let keep: Vec<usize> = if scale == 0.0 {
        Vec::new()
    } else {
        (0..width)
            .filter(|&i| diag[i].abs() > RANK_RTOL * scale)
            .collect()
    };
    if keep.len() < width && policy == RankPolicy::Strict {
        return Err(Error::RankDeficientSample {
            rank: keep.len(),
            requested: width,
        });
    }
    let columns = if keep.len() == width {
        q
    } else {
        q.select_columns(keep.iter())
    };
    Ok(OrthoBasis {
        columns,
        requested: width,
    })
}

/// Estimates `σ₁(X)` by `N` normalized products from a Gaussian start;
/// returns `‖X v_N‖₂`, or `0` if an iterate vanishes.
pub fn power_iteration(x: &SymMatrix, iterations: usize, rng: &mut RngStream) -> f64 {
    let m = x.as_matrix();
    let mut v = DVector::from_vec(rng.normal_vec(x.dim()));
    for _ in 0..iterations {
        let w = m * &v;
        let norm = w.norm();
        if norm <= f64::MIN_POSITIVE || !norm.is_finite() {
            return 0.0;
        }
        v = w / norm;
    }
    let norm = (m * v).norm();
    if norm.is_finite() {
        norm
    } else {
        0.0
    }
}

/// Estimates `|λ_min(X)|` as `|σ₁ − σ₂|` where `σ₁` comes from power
/// iteration on `X` and `σ₂` from power iteration on `X − σ₁ I`.
pub fn min_eig_magnitude(x: &SymMatrix, iterations: usize, rng: &mut RngStream) -> f64 {
    let s1 = power_iteration(x, iterations, rng);
    let s2 = power_iteration(&x.shifted(-s1), iterations, rng);
    (s1 - s2).abs()
}
