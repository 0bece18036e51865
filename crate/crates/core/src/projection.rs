//! Randomized PSD projections (plain and scaled) and a dispatcher over all
//! projection methods.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::{min_eig_magnitude, range_finder, OrthoBasis, RangeParams};
use crate::symcore::{eigh, exact_psd_projection, polar_psd_projection, RngStream, SymMatrix};

/// Projection method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Polar,
    Randomized,
    ScaledRandomized,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Polar => "polar",
            Method::Randomized => "randomized",
            Method::ScaledRandomized => "scaled_randomized",
        }
    }
}

/// Low-rank PSD matrix stored as `F Fᵀ`.
#[derive(Clone, Debug)]
pub struct LowRankPsd {
    pub factor: DMatrix<f64>,
}

impl LowRankPsd {
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn dense(&self) -> SymMatrix {
        SymMatrix::from_nearly_symmetric(&self.factor * self.factor.transpose())
    }

    /// `Tr(Aᵀ F Fᵀ) = Σ_j f_jᵀ A f_j`.
    pub fn trace_with(&self, a: &SymMatrix) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let af = a.as_matrix() * &self.factor;
        af.dot(&self.factor)
    }
}

/// Output of the sketch-then-project step before any reporting.
#[derive(Clone, Debug)]
pub struct SketchedProjection {
    pub psd: LowRankPsd,
    pub basis: OrthoBasis,
}

/// Plain randomized projection: `Q U max(D, 0) Uᵀ Qᵀ` with `U D Uᵀ = QᵀXQ`.
pub fn sketch_project(x: &SymMatrix, params: &RangeParams, rng: &mut RngStream) -> Result<SketchedProjection> {
    let basis = range_finder(x.as_matrix(), params, rng)?;
    let eig = eigh(&basis.compress(x))?;
    let factor = basis.columns() * eig.positive_factor();
    Ok(SketchedProjection {
        psd: LowRankPsd { factor },
        basis,
    })
}

/// `1e-12 · max(1, max |x_ij|)`.
pub fn alpha_tolerance(x: &SymMatrix) -> f64 {
    1e-12 * x.max_abs().max(1.0)
}

/// Scaled randomized projection: sketch `B = (X + αI)/α`, then return
/// `α Q U (max(D, 1) − I) Uᵀ Qᵀ` with `U D Uᵀ = QᵀBQ`.
pub fn sketch_project_scaled(
    x: &SymMatrix,
    params: &RangeParams,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<SketchedProjection> {
    let tol = alpha_tolerance(x);
    if !(alpha > tol) {
        return Err(Error::AlphaTooSmall { alpha, tol });
    }
    let b = x.shifted(alpha).scaled(1.0 / alpha);
    let basis = range_finder(b.as_matrix(), params, rng)?;
    let mut eig = eigh(&basis.compress(&b))?;
    for v in eig.values.iter_mut() {
        *v = alpha * (v.max(1.0) - 1.0);
    }
    let factor = basis.columns() * eig.positive_factor();
    Ok(SketchedProjection {
        psd: LowRankPsd { factor },
        basis,
    })
}

/// Projector configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorConfig {
    pub method: Method,
    /// Required by the randomized methods.
    pub params: Option<RangeParams>,
    /// Power iterations used to estimate `α` for the scaled method.
    pub power_n: usize,
    pub alpha_override: Option<f64>,
    /// Multiplier applied to the estimated (or overridden) `α`.
    pub alpha_scale: f64,
    pub collect_diagnostics: bool,
    /// Build the dense result; otherwise only the low-rank factor is kept
    /// for the randomized methods.
    pub materialize: bool,
}

impl ProjectorConfig {
    fn base(method: Method, params: Option<RangeParams>) -> Self {
        Self {
            method,
            params,
            power_n: 10,
            alpha_override: None,
            alpha_scale: 1.0,
            collect_diagnostics: false,
            materialize: true,
        }
    }

    pub fn exact() -> Self {
        Self::base(Method::Exact, None)
    }

    pub fn polar() -> Self {
        Self::base(Method::Polar, None)
    }

    pub fn randomized(params: RangeParams) -> Self {
        Self::base(Method::Randomized, Some(params))
    }

    pub fn scaled(params: RangeParams, power_n: usize) -> Self {
        Self {
            power_n,
            ..Self::base(Method::ScaledRandomized, Some(params))
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha_override = Some(alpha);
        self
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.collect_diagnostics = on;
        self
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self.method, Method::Randomized | Method::ScaledRandomized)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.is_randomized() {
            let params = self
                .params
                .as_ref()
                .ok_or_else(|| Error::invalid("randomized projection requires k, l, q"))?;
            params.validate(n, n)?;
        }
        if self.method == Method::ScaledRandomized {
            if self.power_n == 0 && self.alpha_override.is_none() {
                return Err(Error::invalid("scaled projection requires power_n >= 1 or an alpha override"));
            }
            if !(self.alpha_scale > 0.0) {
                return Err(Error::invalid("alpha_scale must be positive"));
            }
            if let Some(a) = self.alpha_override {
                if !(a >= 0.0) {
                    return Err(Error::invalid("alpha override must be nonnegative"));
                }
            }
        }
        Ok(())
    }
}

/// Result of [`project`].
#[derive(Clone, Debug)]
pub struct ProjectionReport {
    /// Dense result; `None` only when `materialize` was off for a
    /// randomized method.
    pub result: Option<SymMatrix>,
    /// Low-rank factor (randomized methods only).
    pub factored: Option<LowRankPsd>,
    pub method: Method,
    pub effective_rank: usize,
    pub alpha_used: Option<f64>,
    /// `‖X − QQᵀX‖_F`, when diagnostics are on.
    pub residual_frob: Option<f64>,
    /// Basis used by the randomized methods, when diagnostics are on.
    pub basis: Option<OrthoBasis>,
    /// Columns dropped by the range finder as numerically dependent.
    pub truncated_columns: usize,
    /// Scaled method fell back to the plain randomized projection.
    pub fallback: bool,
    pub wall_time: f64,
}

impl ProjectionReport {
    /// Dense result, built from the factor if needed.
    pub fn matrix(&self) -> SymMatrix {
        match (&self.result, &self.factored) {
            (Some(m), _) => m.clone(),
            (None, Some(f)) => f.dense(),
            (None, None) => unreachable!("report carries neither a dense nor a factored result"),
        }
    }

    /// `Tr(Aᵀ X̂₊)` using the factor when available.
    pub fn trace_with(&self, a: &SymMatrix) -> f64 {
        match (&self.factored, &self.result) {
            (Some(f), _) => f.trace_with(a),
            (None, Some(m)) => m.dot(a),
            (None, None) => unreachable!("report carries neither a dense nor a factored result"),
        }
    }
}

fn dense_report(x: &SymMatrix, method: Method, result: SymMatrix, start: Instant) -> ProjectionReport {
    ProjectionReport {
        result: Some(result),
        factored: None,
        method,
        effective_rank: x.dim(),
        alpha_used: None,
        residual_frob: None,
        basis: None,
        truncated_columns: 0,
        fallback: false,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

fn sketched_report(
    x: &SymMatrix,
    method: Method,
    sketch: SketchedProjection,
    alpha: Option<f64>,
    diagnostics: bool,
    materialize: bool,
    start: Instant,
) -> ProjectionReport {
    let SketchedProjection { psd, basis } = sketch;
    let residual_frob = diagnostics.then(|| basis.residual_frobenius(x.as_matrix()));
    ProjectionReport {
        result: materialize.then(|| psd.dense()),
        effective_rank: psd.rank(),
        factored: Some(psd),
        method,
        alpha_used: alpha,
        residual_frob,
        truncated_columns: basis.truncated(),
        basis: diagnostics.then_some(basis),
        fallback: false,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Plain randomized PSD projection with diagnostics.
pub fn ran_proj(x: &SymMatrix, params: &RangeParams, rng: &mut RngStream) -> Result<ProjectionReport> {
    let start = Instant::now();
    let sketch = sketch_project(x, params, rng)?;
    Ok(sketched_report(x, Method::Randomized, sketch, None, true, true, start))
}

/// Scaled randomized PSD projection with diagnostics.
pub fn ran_proj_scal(x: &SymMatrix, params: &RangeParams, alpha: f64, rng: &mut RngStream) -> Result<ProjectionReport> {
    let start = Instant::now();
    let sketch = sketch_project_scaled(x, params, alpha, rng)?;
    Ok(sketched_report(x, Method::ScaledRandomized, sketch, Some(alpha), true, true, start))
}

/// Projects `x` with the configured method.
///
/// For the scaled method `α` is the override or `min_eig_magnitude(x,
/// power_n)`, times `alpha_scale`. If `α` is at or below
/// [`alpha_tolerance`] the plain randomized projection is used instead and
/// `fallback` is set.
pub fn project(x: &SymMatrix, cfg: &ProjectorConfig, rng: &mut RngStream) -> Result<ProjectionReport> {
    cfg.validate(x.dim())?;
    let start = Instant::now();
    let diag = cfg.collect_diagnostics;
    match cfg.method {
        Method::Exact => Ok(dense_report(x, Method::Exact, exact_psd_projection(x)?, start)),
        Method::Polar => Ok(dense_report(x, Method::Polar, polar_psd_projection(x)?, start)),
        Method::Randomized => {
            let params = cfg.params.as_ref().expect("validated");
            let sketch = sketch_project(x, params, rng)?;
            Ok(sketched_report(x, Method::Randomized, sketch, None, diag, cfg.materialize, start))
        }
        Method::ScaledRandomized => {
            let params = cfg.params.as_ref().expect("validated");
            let alpha = cfg
                .alpha_override
                .unwrap_or_else(|| min_eig_magnitude(x, cfg.power_n, rng))
                * cfg.alpha_scale;
            match sketch_project_scaled(x, params, alpha, rng) {
                Ok(sketch) => Ok(sketched_report(
                    x,
                    Method::ScaledRandomized,
                    sketch,
                    Some(alpha),
                    diag,
                    cfg.materialize,
                    start,
                )),
                Err(Error::AlphaTooSmall { .. }) => {
                    let sketch = sketch_project(x, params, rng)?;
                    let mut report =
                        sketched_report(x, Method::Randomized, sketch, Some(alpha), diag, cfg.materialize, start);
                    report.fallback = true;
                    Ok(report)
                }
                Err(e) => Err(e),
            }
        }
    }
}
