//! Closed-form expected-error bounds for the range finder and the randomized
//! PSD projections, evaluated from spectra alone.
//!
//! Norm convention: "Frobenius" is the Schatten 2-norm and "spectral" the
//! operator norm.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symcore::{eigh, SymMatrix};

/// Singular values and eigenvalues of a symmetric matrix, both descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub singular_values: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub n: usize,
}

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.total_cmp(a));
}

impl SpectrumSummary {
    /// Builds the summary from eigenvalues in any order.
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("eigenvalues must be finite"));
        }
        let mut eig = eigenvalues.to_vec();
        sort_desc(&mut eig);
        let mut sv: Vec<f64> = eig.iter().map(|v| v.abs()).collect();
        sort_desc(&mut sv);
        Ok(Self {
            singular_values: sv,
            eigenvalues: eig,
            n: eigenvalues.len(),
        })
    }

    /// Builds a summary carrying only singular values. The eigenvalues are
    /// set equal to them, which is exact for PSD inputs.
    pub fn from_singular_values(sigmas: &[f64]) -> Result<Self> {
        if sigmas.iter().any(|v| *v < 0.0) {
            return Err(Error::invalid("singular values must be nonnegative"));
        }
        Self::from_eigenvalues(sigmas)
    }

    pub fn of(x: &SymMatrix) -> Result<Self> {
        Self::from_eigenvalues(&eigh(x)?.values)
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.singular_values.get(i).copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty")
    }

    /// `{|λᵢ + α|}` sorted descending.
    pub fn shifted_magnitudes(&self, alpha: f64) -> Vec<f64> {
        let mut s: Vec<f64> = self.eigenvalues.iter().map(|v| (v + alpha).abs()).collect();
        sort_desc(&mut s);
        s
    }
}

/// Sketch parameters as seen by the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundParams {
    pub k: usize,
    pub l: usize,
    pub q: usize,
}

impl BoundParams {
    pub fn new(k: usize, l: usize, q: usize) -> Self {
        Self { k, l, q }
    }

    /// Whether `k ≥ 2`, `l ≥ 2` and `k + l ≤ n`, the range under which the
    /// expectation bounds are proven. Evaluation itself only needs `l ≥ 2`
    /// and `k < n`.
    pub fn within_theory(&self, n: usize) -> bool {
        self.k >= 2 && self.l >= 2 && self.k + self.l <= n
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.l < 2 {
            return Err(Error::invalid(format!("oversampling l = {} must be at least 2", self.l)));
        }
        if self.k >= n {
            return Err(Error::invalid(format!("k = {} must be below the dimension {n}", self.k)));
        }
        Ok(())
    }

    fn require_q0(&self) -> Result<()> {
        if self.q != 0 {
            return Err(Error::invalid(format!(
                "Frobenius bounds are only available for q = 0 (got q = {})",
                self.q
            )));
        }
        Ok(())
    }
}

/// `sqrt((1 + k/(l−1)) · Σ_{j>k} σⱼ²)`.
pub fn eps1(sigmas: &[f64], k: usize, l: usize) -> Result<f64> {
    if l < 2 {
        return Err(Error::invalid(format!("oversampling l = {l} must be at least 2")));
    }
    if k >= sigmas.len() {
        return Err(Error::invalid(format!("k = {k} must be below the length {}", sigmas.len())));
    }
    let tail: f64 = sigmas[k..].iter().map(|s| s * s).sum();
    Ok(((1.0 + k as f64 / (l as f64 - 1.0)) * tail).sqrt())
}

/// `(1 + √(k/(l−1)) + e√(k+l)/l · √(n−k))^{1/(2q+1)} · σ`.
pub fn eps2(sigma: f64, k: usize, l: usize, q: usize, n: usize) -> Result<f64> {
    if l < 2 {
        return Err(Error::invalid(format!("oversampling l = {l} must be at least 2")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the dimension {n}")));
    }
    let (kf, lf) = (k as f64, l as f64);
    let base = 1.0 + (kf / (lf - 1.0)).sqrt() + E * (kf + lf).sqrt() / lf * ((n - k) as f64).sqrt();
    Ok(base.powf(1.0 / (2 * q + 1) as f64) * sigma)
}

/// Expected Frobenius error of the plain randomized projection (`q = 0`).
pub fn frob_bound_unscaled(spec: &SpectrumSummary, p: &BoundParams) -> Result<f64> {
    p.require_q0()?;
    p.check(spec.n)?;
    Ok((1.0 + ((p.k + p.l) as f64).sqrt()) * eps1(&spec.singular_values, p.k, p.l)?)
}

fn log_branch_tail(x: f64) -> f64 {
    (1.0 / PI) * E.recip().min(x.max(0.0).sqrt())
}

fn require_sigma1(spec: &SpectrumSummary) -> Result<f64> {
    let s1 = spec.sigma(0);
    if !(s1 > 0.0) {
        return Err(Error::invalid("the spectral bounds need σ₁ > 0"));
    }
    Ok(s1)
}

/// Expected spectral error of the plain randomized projection.
pub fn spectral_bound_unscaled(spec: &SpectrumSummary, p: &BoundParams) -> Result<f64> {
    p.check(spec.n)?;
    let s1 = require_sigma1(spec)?;
    let e2 = eps2(spec.sigma(p.k), p.k, p.l, p.q, spec.n)?;
    let n = spec.n as f64;
    let first = (1.0 + n.sqrt()) * e2;
    let second = (1.0 + 4.0 / PI + (2.0 / PI) * (2.0 * s1).ln()) * e2 + log_branch_tail(2.0 * e2);
    Ok(first.min(second).max(0.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha = {alpha} must be positive")));
    }
    Ok(())
}

/// Expected Frobenius error of the scaled randomized projection (`q = 0`).
pub fn frob_bound_scaled(spec: &SpectrumSummary, p: &BoundParams, alpha: f64) -> Result<f64> {
    p.require_q0()?;
    p.check(spec.n)?;
    check_alpha(alpha)?;
    let shifted = spec.shifted_magnitudes(alpha);
    Ok(alpha * ((spec.n - p.k) as f64).sqrt() + (1.0 + ((p.k + p.l) as f64).sqrt()) * eps1(&shifted, p.k, p.l)?)
}

/// Expected spectral error of the scaled randomized projection.
pub fn spectral_bound_scaled(spec: &SpectrumSummary, p: &BoundParams, alpha: f64) -> Result<f64> {
    p.check(spec.n)?;
    check_alpha(alpha)?;
    let s1 = require_sigma1(spec)?;
    let shifted = spec.shifted_magnitudes(alpha);
    let e2 = eps2(shifted[p.k], p.k, p.l, p.q, spec.n)?;
    let n = spec.n as f64;
    let first = (1.0 + n.sqrt()) * (e2 + alpha / 2.0);
    let second =
        (0.5 + 2.0 / PI + (1.0 / PI) * (2.0 * s1).ln()) * (2.0 * e2 + alpha) + log_branch_tail(2.0 * e2 + alpha);
    Ok(first.min(second).max(0.0))
}

/// `(Σᵢ ‖Aᵢ‖_F) · frob_bound_unscaled`.
pub fn grad_error_bound(a_norms: &[f64], spec: &SpectrumSummary, p: &BoundParams) -> Result<f64> {
    let base = frob_bound_unscaled(spec, p)?;
    Ok(a_norms.iter().sum::<f64>() * base)
}

/// Bounds on `E‖X − QQᵀX‖` for the range finder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeResidualBounds {
    pub spectral: f64,
    /// Only available for `q = 0`.
    pub frobenius: Option<f64>,
}

pub fn range_residual_bounds(spec: &SpectrumSummary, p: &BoundParams) -> Result<RangeResidualBounds> {
    p.check(spec.n)?;
    Ok(RangeResidualBounds {
        spectral: eps2(spec.sigma(p.k), p.k, p.l, p.q, spec.n)?,
        frobenius: if p.q == 0 {
            Some(eps1(&spec.singular_values, p.k, p.l)?)
        } else {
            None
        },
    })
}

/// Eigenvalues of the four-cluster test matrix: `n/4` copies each of
/// `β₃, β₄, −β₂, −β₁`, in descending order.
pub fn clustered_spectrum(beta: [f64; 4], n: usize) -> Result<Vec<f64>> {
    if n == 0 || n % 4 != 0 {
        return Err(Error::invalid(format!("n = {n} must be a positive multiple of 4")));
    }
    let [b1, b2, b3, b4] = beta;
    let c = n / 4;
    let mut v = Vec::with_capacity(n);
    for value in [b3, b4, -b2, -b1] {
        v.extend(std::iter::repeat_n(value, c));
    }
    Ok(v)
}

/// Comparison of the unscaled and scaled Frobenius bounds on the
/// four-cluster matrix with `k = n/2` and `α = β₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct E1E2Comparison {
    pub e1: f64,
    pub e2: f64,
    /// `None` when the threshold formula has a nonpositive denominator.
    pub n_threshold: Option<f64>,
    pub scaled_wins: bool,
}

/// Size above which the scaled bound is guaranteed to be the smaller one.
pub fn e1_e2_threshold(beta: [f64; 4], l: usize) -> Option<f64> {
    let [b1, b2, _, b4] = beta;
    let denom = (b4 * b4 + b2 * b2).sqrt() - (b1 - b2).abs();
    if denom <= 0.0 {
        return None;
    }
    Some(2.0 * (l as f64 - 1.0) * (2.0 * b1 * b1 / (denom * denom) - 1.0))
}

pub fn e1_e2_compare(beta: [f64; 4], n: usize, l: usize) -> Result<E1E2Comparison> {
    let [b1, b2, b3, b4] = beta;
    if !(b3 > b1 && b1 > b4 && b4 > b2 && b2 > 0.0) {
        return Err(Error::invalid("need β₃ > β₁ > β₄ > β₂ > 0"));
    }
    let spec = SpectrumSummary::from_eigenvalues(&clustered_spectrum(beta, n)?)?;
    let p = BoundParams::new(n / 2, l, 0);
    let e1 = frob_bound_unscaled(&spec, &p)?;
    let e2 = frob_bound_scaled(&spec, &p, b1)?;
    Ok(E1E2Comparison {
        e1,
        e2,
        n_threshold: e1_e2_threshold(beta, l),
        scaled_wins: e2 <= e1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sig: &[f64]) -> SpectrumSummary {
        SpectrumSummary::from_singular_values(sig).unwrap()
    }

    #[test]
    fn eps1_examples() {
        assert!((eps1(&[2.0, 1.0], 1, 2).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(eps1(&[3.0, 2.0, 0.0, 0.0], 2, 2).unwrap(), 0.0);
        assert!((eps1(&[1.0; 4], 2, 3).unwrap() - 2.0).abs() < 1e-12);
        assert!(eps1(&[1.0; 4], 2, 1).is_err());
    }

    #[test]
    fn eps2_examples() {
        let base: f64 = 1.0 + 2f64.sqrt() + E * 2.0 / 2.0 * 2.0;
        let want = base.powf(1.0 / 3.0) * 2.0;
        let got = eps2(2.0, 2, 2, 1, 6).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 3.9750).abs() < 5e-5);
        assert_eq!(eps2(0.0, 3, 4, 2, 50).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for q in 0..30 {
            let v = eps2(1.5, 5, 5, q, 100).unwrap();
            assert!(v <= prev && v >= 1.5);
            prev = v;
        }
        assert!((prev - 1.5) / 1.5 < 0.1);
    }

    #[test]
    fn frobenius_unscaled_examples() {
        let s = spec(&[2.0, 1.0]);
        let got = frob_bound_unscaled(&s, &BoundParams::new(1, 2, 0)).unwrap();
        assert!((got - (1.0 + 3f64.sqrt()) * 2f64.sqrt()).abs() < 1e-12);
        assert!((got - 3.8637).abs() < 1e-4);
        assert!(frob_bound_unscaled(&s, &BoundParams::new(1, 2, 1)).is_err());
        let r = spec(&[4.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(frob_bound_unscaled(&r, &BoundParams::new(2, 2, 0)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_unscaled_examples() {
        let s = spec(&[2.0, 1.0, 0.5, 0.1]);
        let p = BoundParams::new(2, 2, 0);
        let e2 = eps2(0.5, 2, 2, 0, 4).unwrap();
        let first = 3.0 * e2;
        let second = (1.0 + 4.0 / PI + 2.0 / PI * 4f64.ln()) * e2 + E.recip().min((2.0 * e2).sqrt()) / PI;
        let got = spectral_bound_unscaled(&s, &p).unwrap();
        assert_eq!(got, first.min(second));
        assert_eq!(got, first);

        let z = spec(&[2.0, 1.0, 0.0, 0.0]);
        assert_eq!(spectral_bound_unscaled(&z, &p).unwrap(), 0.0);
    }

    #[test]
    fn spectral_branch_crossover() {
        // At fixed tail, the (1+√n) branch loses to the logarithmic one as n grows.
        let mut picked_log = false;
        let mut picked_first = false;
        for n in [4usize, 100, 10_000, 1_000_000] {
            let mut sig = vec![0.01; n];
            sig[0] = 1.0;
            let s = spec(&sig);
            let p = BoundParams::new(2, 2, 1);
            let e2 = eps2(s.sigma(2), 2, 2, 1, n).unwrap();
            let first = (1.0 + (n as f64).sqrt()) * e2;
            let got = spectral_bound_unscaled(&s, &p).unwrap();
            if got < first {
                picked_log = true;
            } else {
                picked_first = true;
            }
        }
        assert!(picked_log && picked_first);
    }

    #[test]
    fn scaled_examples() {
        // Clustered negatives equal to −α with k ≥ #positive: tail vanishes.
        let s = SpectrumSummary::from_eigenvalues(&[5.0, 4.0, -2.0, -2.0, -2.0, -2.0]).unwrap();
        let p = BoundParams::new(2, 2, 0);
        let got = frob_bound_scaled(&s, &p, 2.0).unwrap();
        assert!((got - 2.0 * 2.0).abs() < 1e-12);

        let sp = spectral_bound_scaled(&s, &p, 2.0).unwrap();
        let n = 6f64;
        let first = (1.0 + n.sqrt()) * 1.0;
        let second = (0.5 + 2.0 / PI + 10f64.ln() / PI) * 2.0 + E.recip().min(2f64.sqrt()) / PI;
        assert!((sp - first.min(second)).abs() < 1e-12);

        // α → 0⁺ on a PSD rank-k spectrum.
        let psd = SpectrumSummary::from_eigenvalues(&[3.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let small = frob_bound_scaled(&psd, &p, 1e-9).unwrap();
        assert!(small < 1e-6);
        assert!(frob_bound_scaled(&psd, &p, 0.0).is_err());
    }

    #[test]
    fn spectral_scaled_monotone_near_zero_alpha() {
        let s = SpectrumSummary::from_eigenvalues(&[4.0, 2.0, 1.0, 0.5, -0.2, -0.1]).unwrap();
        let p = BoundParams::new(2, 2, 1);
        let mut prev = 0.0;
        for i in 1..=50 {
            let a = i as f64 * 1e-3;
            let v = spectral_bound_scaled(&s, &p, a).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn gradient_bound() {
        let s = spec(&[2.0, 1.0]);
        let p = BoundParams::new(1, 2, 0);
        let one = grad_error_bound(&[1.0], &s, &p).unwrap();
        assert!((one - 3.8637).abs() < 1e-4);
        assert_eq!(grad_error_bound(&[], &s, &p).unwrap(), 0.0);
        let a = grad_error_bound(&[0.3, 1.2, 0.5], &s, &p).unwrap();
        let b = grad_error_bound(&[0.6, 2.4, 1.0], &s, &p).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn range_bounds() {
        let s = spec(&[2.0, 1.0]);
        let r = range_residual_bounds(&s, &BoundParams::new(1, 2, 0)).unwrap();
        assert!((r.frobenius.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.spectral, eps2(1.0, 1, 2, 0, 2).unwrap());
        let r = range_residual_bounds(&s, &BoundParams::new(1, 2, 1)).unwrap();
        assert!(r.frobenius.is_none());
        let z = range_residual_bounds(&spec(&[1.0, 1.0, 0.0, 0.0]), &BoundParams::new(2, 2, 0)).unwrap();
        assert_eq!((z.spectral, z.frobenius), (0.0, Some(0.0)));
    }

    #[test]
    fn corollary_matrix_comparison() {
        let beta = [3.0, 1.0, 6.0, 2.0];
        let th = e1_e2_threshold(beta, 5).unwrap();
        let d = 5f64.sqrt() - 2.0;
        assert!((th - 8.0 * (18.0 / (d * d) - 1.0)).abs() < 1e-9);
        let c = e1_e2_compare(beta, 1000, 5).unwrap();
        assert!(c.scaled_wins);

        // Generic computation agrees with the closed forms, with the tail
        // written as β₄, β₂ (the singular values beyond n/2).
        let n = 1000f64;
        let lead = (1.0 + (n / 2.0 + 5.0).sqrt()) * (1.0 + n / 8.0).sqrt();
        let e1 = lead * (n / 4.0 * (4.0 + 1.0)).sqrt();
        let e2 = 3.0 * (n / 2.0).sqrt() + lead * (n / 4.0 * 4.0).sqrt();
        assert!((c.e1 - e1).abs() < 1e-9 * e1);
        assert!((c.e2 - e2).abs() < 1e-9 * e2);

        assert!(e1_e2_compare([3.0, 1.0, 2.0, 2.5], 100, 5).is_err());
        assert!(e1_e2_compare(beta, 1001, 5).is_err());
    }

    #[test]
    fn corollary_cross_check_with_generic_bounds() {
        let beta = [3.0, 1.0, 6.0, 2.0];
        let spec = SpectrumSummary::from_eigenvalues(&clustered_spectrum(beta, 1000).unwrap()).unwrap();
        let p = BoundParams::new(500, 5, 0);
        let c = e1_e2_compare(beta, 1000, 5).unwrap();
        assert_eq!(frob_bound_unscaled(&spec, &p).unwrap(), c.e1);
        assert_eq!(frob_bound_scaled(&spec, &p, 3.0).unwrap(), c.e2);
    }

    #[test]
    fn theory_range() {
        assert!(BoundParams::new(2, 2, 0).within_theory(4));
        assert!(!BoundParams::new(1, 2, 0).within_theory(4));
        assert!(!BoundParams::new(3, 2, 0).within_theory(4));
    }
}
