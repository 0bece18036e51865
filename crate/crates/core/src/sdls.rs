//! Semidefinite least squares: problem model, dual function and the dual
//! gradient-ascent solver.
//!
//! The problem is `min ½‖X − C/ρ‖_F²` over PSD `X` with `Tr(AᵢX) = bᵢ`.
//! Its dual function is `θ(y) = L(X*(y), y)` with
//! `X*(y) = (C/ρ + Σ yᵢAᵢ)₊`, concave with gradient `−(Tr(AᵢX*) − bᵢ)ᵢ`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{project, Method, ProjectionReport, ProjectorConfig};
use crate::sketch::min_eig_magnitude;
use crate::symcore::{exact_psd_projection, gaussian_matrix, random_orthogonal, RngStream, SymMatrix};

/// Constraint matrix, dense or as a list of symmetric entries.
#[derive(Clone, Debug)]
pub enum ConstraintMatrix {
    Dense(SymMatrix),
    /// `(i, j, v)` with `i ≤ j`; sets both `(i, j)` and `(j, i)` to `v`.
    Sparse { n: usize, entries: Vec<(usize, usize, f64)> },
}

impl ConstraintMatrix {
    /// Builds a sparse matrix from entries in either triangle. Repeated
    /// positions are summed.
    pub fn sparse(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::mismatch(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            *map.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
        }
        Ok(ConstraintMatrix::Sparse {
            n,
            entries: map.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintMatrix::Dense(a) => a.dim(),
            ConstraintMatrix::Sparse { n, .. } => *n,
        }
    }

    pub fn to_dense(&self) -> SymMatrix {
        match self {
            ConstraintMatrix::Dense(a) => a.clone(),
            ConstraintMatrix::Sparse { n, entries } => {
                let mut m = DMatrix::zeros(*n, *n);
                for &(i, j, v) in entries {
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
                SymMatrix::from_nearly_symmetric(m)
            }
        }
    }

    pub fn frobenius(&self) -> f64 {
        match self {
            ConstraintMatrix::Dense(a) => a.frobenius(),
            ConstraintMatrix::Sparse { entries, .. } => entries
                .iter()
                .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// `Tr(AX)`.
    pub fn dot(&self, x: &SymMatrix) -> f64 {
        match self {
            ConstraintMatrix::Dense(a) => a.dot(x),
            ConstraintMatrix::Sparse { entries, .. } => entries
                .iter()
                .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] })
                .sum(),
        }
    }

    /// `Tr(A F Fᵀ)`.
    pub fn dot_factor(&self, f: &DMatrix<f64>) -> f64 {
        if f.ncols() == 0 {
            return 0.0;
        }
        match self {
            ConstraintMatrix::Dense(a) => (a.as_matrix() * f).dot(f),
            ConstraintMatrix::Sparse { entries, .. } => entries
                .iter()
                .map(|&(i, j, v)| {
                    let fij = f.row(i).dot(&f.row(j));
                    if i == j {
                        v * fij
                    } else {
                        2.0 * v * fij
                    }
                })
                .sum(),
        }
    }

    /// `target += coeff · A`.
    pub fn add_to(&self, target: &mut DMatrix<f64>, coeff: f64) {
        match self {
            ConstraintMatrix::Dense(a) => {
                for (t, s) in target.iter_mut().zip(a.as_matrix().iter()) {
                    *t += coeff * s;
                }
            }
            ConstraintMatrix::Sparse { entries, .. } => {
                for &(i, j, v) in entries {
                    target[(i, j)] += coeff * v;
                    if i != j {
                        target[(j, i)] += coeff * v;
                    }
                }
            }
        }
    }
}

impl From<SymMatrix> for ConstraintMatrix {
    fn from(a: SymMatrix) -> Self {
        ConstraintMatrix::Dense(a)
    }
}

/// Linear equality `Tr(A X) = b`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub a: ConstraintMatrix,
    pub b: f64,
}

impl Constraint {
    pub fn new(a: impl Into<ConstraintMatrix>, b: f64) -> Self {
        Self { a: a.into(), b }
    }
}

#[derive(Clone, Debug)]
pub struct SdlsProblem {
    pub c: SymMatrix,
    pub rho: f64,
    pub constraints: Vec<Constraint>,
}

impl SdlsProblem {
    pub fn new(c: SymMatrix, rho: f64, constraints: Vec<Constraint>) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("rho = {rho} must be positive")));
        }
        let n = c.dim();
        for (i, con) in constraints.iter().enumerate() {
            if con.a.dim() != n {
                return Err(Error::mismatch(format!(
                    "constraint {i} is {0}x{0} but C is {n}x{n}",
                    con.a.dim()
                )));
            }
        }
        Ok(Self { c, rho, constraints })
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn b(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.b).collect()
    }

    fn check_y(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.constraints.len() {
            return Err(Error::mismatch(format!(
                "y has length {} but there are {} constraints",
                y.len(),
                self.constraints.len()
            )));
        }
        Ok(())
    }

    fn check_x(&self, x: &SymMatrix) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::mismatch(format!("X is {0}x{0} but C is {1}x{1}", x.dim(), self.dim())));
        }
        Ok(())
    }

    /// `(Tr(AᵢX) − bᵢ)ᵢ`.
    pub fn constraint_violation(&self, x: &SymMatrix) -> Result<Vec<f64>> {
        self.check_x(x)?;
        Ok(self.constraints.par_iter().map(|c| c.a.dot(x) - c.b).collect())
    }

    fn violation_from_report(&self, rep: &ProjectionReport) -> Vec<f64> {
        match (&rep.factored, &rep.result) {
            (Some(f), _) => self
                .constraints
                .par_iter()
                .map(|c| c.a.dot_factor(&f.factor) - c.b)
                .collect(),
            (None, Some(x)) => self.constraints.par_iter().map(|c| c.a.dot(x) - c.b).collect(),
            (None, None) => unreachable!("projection report without a result"),
        }
    }

    /// `½‖X − C/ρ‖_F² − Σ yᵢ(Tr(AᵢX) − bᵢ)`.
    pub fn lagrangian(&self, x: &SymMatrix, y: &[f64]) -> Result<f64> {
        self.check_y(y)?;
        let viol = self.constraint_violation(x)?;
        let diff = x.as_matrix() - self.c.as_matrix() / self.rho;
        Ok(0.5 * diff.norm_squared() - y.iter().zip(&viol).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Primal objective `½‖X − C/ρ‖_F²`.
    pub fn primal_objective(&self, x: &SymMatrix) -> Result<f64> {
        self.check_x(x)?;
        Ok(0.5 * (x.as_matrix() - self.c.as_matrix() / self.rho).norm_squared())
    }
}

/// `C/ρ + Σ yᵢAᵢ`.
pub fn assemble_dual_matrix(prob: &SdlsProblem, y: &[f64]) -> Result<SymMatrix> {
    prob.check_y(y)?;
    let mut m = prob.c.as_matrix() / prob.rho;
    for (c, &yi) in prob.constraints.iter().zip(y) {
        if yi != 0.0 {
            c.a.add_to(&mut m, yi);
        }
    }
    Ok(SymMatrix::from_nearly_symmetric(m))
}

/// Projection of the assembled dual matrix with the given projector.
pub fn dual_argmin(prob: &SdlsProblem, y: &[f64], proj: &ProjectorConfig, rng: &mut RngStream) -> Result<SymMatrix> {
    let x = assemble_dual_matrix(prob, y)?;
    Ok(project(&x, proj, rng)?.matrix())
}

/// `θ(y)` with the exact projection.
pub fn dual_objective(prob: &SdlsProblem, y: &[f64]) -> Result<f64> {
    let x = exact_psd_projection(&assemble_dual_matrix(prob, y)?)?;
    prob.lagrangian(&x, y)
}

/// `∇θ(y) = −(Tr(AᵢX̂₊) − bᵢ)ᵢ` where `X̂₊` comes from `proj`.
pub fn dual_gradient(prob: &SdlsProblem, y: &[f64], proj: &ProjectorConfig, rng: &mut RngStream) -> Result<Vec<f64>> {
    let x = assemble_dual_matrix(prob, y)?;
    let rep = project(&x, proj, rng)?;
    Ok(prob.violation_from_report(&rep).into_iter().map(|v| -v).collect())
}

/// `sqrt(Σ (Tr(AᵢX) − bᵢ)²)`.
pub fn feasibility_residual(prob: &SdlsProblem, x: &SymMatrix) -> Result<f64> {
    Ok(norm2(&prob.constraint_violation(x)?))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maps `min Tr(C̃X) + (ρ/2)‖X‖_F²` to the least-squares form with `C = −C̃`.
pub fn from_regularized_sdp(c_tilde: &SymMatrix, rho: f64, constraints: Vec<Constraint>) -> Result<SdlsProblem> {
    SdlsProblem::new(c_tilde.scaled(-1.0), rho, constraints)
}

/// Gradient-ascent settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdParams {
    pub epsilon: f64,
    pub beta: f64,
    /// Maximum number of iterations `M`.
    pub max_iter: usize,
    /// Starting point; Gaussian when absent.
    pub y0: Option<Vec<f64>>,
    pub seed: u64,
    /// Re-estimate `α` every this many iterations (scaled projection only).
    pub alpha_refresh: usize,
    pub record_trajectory: bool,
    /// Largest `n` for which the exact-projection residual of the final
    /// dual point is also computed.
    pub exact_check_threshold: usize,
}

impl Default for GdParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            beta: 0.5,
            max_iter: 100,
            y0: None,
            seed: 0,
            alpha_refresh: 1,
            record_trajectory: false,
            exact_check_threshold: 2000,
        }
    }
}

impl GdParams {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid("beta must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        if self.alpha_refresh == 0 {
            return Err(Error::invalid("alpha_refresh must be at least 1"));
        }
        if let Some(y0) = &self.y0 {
            if y0.len() != m {
                return Err(Error::mismatch(format!("y0 has length {} but m = {m}", y0.len())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub grad_norm: f64,
    pub feasibility_residual: f64,
    pub y_norm: f64,
}

/// Current dual point and its (approximate) gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualIterate {
    pub y: Vec<f64>,
    pub gradient: Vec<f64>,
    pub iteration: usize,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x_solution: SymMatrix,
    pub y_final: Vec<f64>,
    pub iterations: usize,
    pub grad_norm_final: f64,
    /// Recomputed from `x_solution`.
    pub feasibility_residual: f64,
    /// `L(x_solution, y_final)`.
    pub objective: f64,
    /// Residual of the exact `X*(y_final)`, when `n` is small enough.
    pub exact_residual: Option<f64>,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
    pub projection: Method,
    pub fallbacks: usize,
    pub converged: bool,
}

/// Dual gradient ascent `y ← y + β∇θ̂(y)`.
///
/// Each iteration projects `C/ρ + Σ yᵢAᵢ` with `proj` and stops once
/// `‖∇θ̂‖₂ ≤ ε` or after `M` projections. The returned matrix is the last
/// projection and `y_final` the point it was computed at.
pub fn solve(prob: &SdlsProblem, proj: &ProjectorConfig, gd: &GdParams) -> Result<SolveReport> {
    let m = prob.num_constraints();
    gd.validate(m)?;
    proj.validate(prob.dim())?;
    let mut rng = RngStream::new(gd.seed);

    if m == 0 {
        let x = project(&prob.c.scaled(1.0 / prob.rho), proj, &mut rng)?;
        let x_solution = x.matrix();
        return Ok(SolveReport {
            objective: prob.lagrangian(&x_solution, &[])?,
            x_solution,
            y_final: Vec::new(),
            iterations: 0,
            grad_norm_final: 0.0,
            feasibility_residual: 0.0,
            exact_residual: Some(0.0),
            trajectory: gd.record_trajectory.then(Vec::new),
            projection: x.method,
            fallbacks: usize::from(x.fallback),
            converged: true,
        });
    }

    let mut y = match &gd.y0 {
        Some(y0) => y0.clone(),
        None => rng.normal_vec(m),
    };
    let mut cfg = proj.clone();
    cfg.materialize = false;
    let scaled = cfg.method == Method::ScaledRandomized && proj.alpha_override.is_none();
    let mut alpha = None;
    let mut trajectory = gd.record_trajectory.then(Vec::new);
    let mut fallbacks = 0;

    for i in 1..=gd.max_iter {
        let x = assemble_dual_matrix(prob, &y)?;
        if scaled && (i - 1) % gd.alpha_refresh == 0 {
            alpha = Some(min_eig_magnitude(&x, proj.power_n, &mut rng));
        }
        if let Some(a) = alpha {
            cfg.alpha_override = Some(a);
        }
        let rep = project(&x, &cfg, &mut rng)?;
        fallbacks += usize::from(rep.fallback);
        let viol = prob.violation_from_report(&rep);
        let grad_norm = norm2(&viol);
        if let Some(t) = trajectory.as_mut() {
            t.push(TrajectoryPoint {
                iteration: i,
                grad_norm,
                feasibility_residual: grad_norm,
                y_norm: norm2(&y),
            });
        }
        let done = grad_norm <= gd.epsilon;
        if done || i == gd.max_iter {
            let x_solution = rep.matrix();
            let exact_residual = if prob.dim() <= gd.exact_check_threshold {
                Some(feasibility_residual(prob, &exact_psd_projection(&x)?)?)
            } else {
                None
            };
            return Ok(SolveReport {
                feasibility_residual: feasibility_residual(prob, &x_solution)?,
                objective: prob.lagrangian(&x_solution, &y)?,
                x_solution,
                y_final: y,
                iterations: i,
                grad_norm_final: grad_norm,
                exact_residual,
                trajectory,
                projection: rep.method,
                fallbacks,
                converged: done,
            });
        }
        for (yi, v) in y.iter_mut().zip(&viol) {
            *yi -= gd.beta * v;
        }
    }
    unreachable!("the loop returns on its last iteration")
}

/// `(Ã + Ãᵀ) / (2‖Ã‖_F)` for Gaussian `Ã`.
pub fn normalized_random_symmetric(n: usize, rng: &mut RngStream) -> SymMatrix {
    let g = gaussian_matrix(n, n, rng);
    let norm = g.norm();
    SymMatrix::from_nearly_symmetric((&g + g.transpose()) / (2.0 * norm))
}

/// `Oᵀ diag(u) O` with `u ~ U(0,1)` and a random orthogonal `O`.
pub fn random_uniform_spectrum(n: usize, rng: &mut RngStream) -> SymMatrix {
    let o = random_orthogonal(n, rng);
    let u: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(u));
    SymMatrix::from_nearly_symmetric(o.transpose() * d * &o)
}

/// Feasible random instance: normalized Gaussian `Aᵢ`, `bᵢ = Tr(AᵢX₀)`,
/// with `X₀` and `C` drawn independently by [`random_uniform_spectrum`].
/// Returns the problem and `X₀`.
pub fn random_feasible_instance(n: usize, m: usize, rho: f64, seed: u64) -> Result<(SdlsProblem, SymMatrix)> {
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rng = RngStream::new(seed);
    let a: Vec<SymMatrix> = (0..m).map(|_| normalized_random_symmetric(n, &mut rng)).collect();
    let x0 = random_uniform_spectrum(n, &mut rng);
    let c = random_uniform_spectrum(n, &mut rng);
    let constraints = a
        .into_iter()
        .map(|ai| {
            let b = ai.dot(&x0);
            Constraint::new(ai, b)
        })
        .collect();
    Ok((SdlsProblem::new(c, rho, constraints)?, x0))
}
