//! Sparse polynomials, monomial bases and the Gram-matrix SOS relaxation of
//! global polynomial minimization, compiled to a least-squares SDP.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::ProjectorConfig;
use crate::sdls::{from_regularized_sdp, solve, Constraint, ConstraintMatrix, GdParams, SdlsProblem, SolveReport};
use crate::symcore::{gaussian_matrix, RngStream, SymMatrix};

/// Default regularization for SOS solves.
pub const DEFAULT_SOS_RHO: f64 = 0.1;

pub type Exponent = Vec<u32>;

/// Polynomial in `nvars` variables with collected terms and no stored zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Exponent, f64)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            p.add_term(e, c)?;
        }
        Ok(p)
    }

    /// Adds `coeff · x^exps`, merging with an existing term.
    pub fn add_term(&mut self, exps: Exponent, coeff: f64) -> Result<()> {
        if exps.len() != self.nvars {
            return Err(Error::mismatch(format!(
                "exponent vector of length {} in a {}-variable polynomial",
                exps.len(),
                self.nvars
            )));
        }
        if !coeff.is_finite() {
            return Err(Error::invalid("polynomial coefficients must be finite"));
        }
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if coeff != 0.0 {
                    v.insert(coeff);
                }
            }
        }
        Ok(())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn constant(&self) -> f64 {
        self.coeff(&vec![0; self.nvars])
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    /// `self + c`.
    pub fn plus_constant(&self, c: f64) -> Self {
        let mut p = self.clone();
        p.add_term(vec![0; self.nvars], c).expect("valid constant term");
        p
    }
}

fn monomial_value(exps: &[u32], x: &[f64]) -> f64 {
    exps.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product()
}

/// `Σ coeff · Π xᵢ^{eᵢ}`.
pub fn eval_poly(p: &Polynomial, x: &[f64]) -> Result<f64> {
    if x.len() != p.nvars {
        return Err(Error::mismatch(format!("point has {} coordinates, polynomial has {} variables", x.len(), p.nvars)));
    }
    Ok(p.terms.iter().map(|(e, c)| c * monomial_value(e, x)).sum())
}

/// Monomials of total degree at most `degree`, graded lexicographic with the
/// constant first.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    nvars: usize,
    degree: u32,
    monomials: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

fn push_degree(nvars: usize, remaining: u32, prefix: &mut Exponent, out: &mut Vec<Exponent>) {
    if prefix.len() + 1 == nvars {
        prefix.push(remaining);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=remaining).rev() {
        prefix.push(e);
        push_degree(nvars, remaining - e, prefix, out);
        prefix.pop();
    }
}

pub fn monomial_basis(nvars: usize, degree: u32) -> Result<MonomialBasis> {
    if nvars == 0 {
        return Err(Error::invalid("a monomial basis needs at least one variable"));
    }
    let mut monomials = Vec::new();
    for t in 0..=degree {
        push_degree(nvars, t, &mut Vec::with_capacity(nvars), &mut monomials);
    }
    let index = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
    Ok(MonomialBasis {
        nvars,
        degree,
        monomials,
        index,
    })
}

impl MonomialBasis {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Exponent] {
        &self.monomials
    }

    pub fn position(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// `z(x)`, the basis evaluated at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.nvars {
            return Err(Error::mismatch(format!("point has {} coordinates, basis has {} variables", x.len(), self.nvars)));
        }
        Ok(DVector::from_iterator(self.len(), self.monomials.iter().map(|m| monomial_value(m, x))))
    }

    /// Expands `z(x)ᵀ X z(x)` into a polynomial.
    pub fn gram_polynomial(&self, x: &SymMatrix) -> Result<Polynomial> {
        if x.dim() != self.len() {
            return Err(Error::mismatch(format!("Gram matrix is {0}x{0}, basis has {1} monomials", x.dim(), self.len())));
        }
        let mut p = Polynomial::zero(self.nvars);
        for i in 0..self.len() {
            for j in i..self.len() {
                let v = if i == j { x[(i, i)] } else { 2.0 * x[(i, j)] };
                if v != 0.0 {
                    p.add_term(add_exps(&self.monomials[i], &self.monomials[j]), v)?;
                }
            }
        }
        Ok(p)
    }
}

fn add_exps(a: &[u32], b: &[u32]) -> Exponent {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// SOS program `min γ s.t. p + γ = z_dᵀ X z_d, X ⪰ 0` in least-squares form.
#[derive(Clone, Debug)]
pub struct SosProgram {
    pub basis: MonomialBasis,
    pub problem: SdlsProblem,
    /// Constant coefficient of `p`.
    pub p_const: f64,
    /// Gram entry holding `γ + p_const`.
    pub gamma_index: (usize, usize),
    /// Monomial matched by each constraint, in constraint order.
    pub constraint_monomials: Vec<Exponent>,
}

/// Compiles the coefficient-matching constraints: for each monomial `β`
/// with `0 < |β| ≤ 2d`, the Gram entries `(i, j)` with `eᵢ + eⱼ = β` sum to
/// the coefficient of `β` in `p`. The constant entry `X₀₀ = γ + p_const` is
/// left free and minimized through `C̃ = e₀e₀ᵀ`.
pub fn compile_sos_min(p: &Polynomial, d: u32, rho: f64) -> Result<SosProgram> {
    let deg = p.degree();
    if deg > 2 * d {
        return Err(Error::DegreeTooHigh { degree: deg, max: 2 * d });
    }
    let basis = monomial_basis(p.nvars(), d)?;
    let full = monomial_basis(p.nvars(), 2 * d)?;
    let n = basis.len();

    let mut pairs: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); full.len()];
    for i in 0..n {
        for j in i..n {
            let beta = add_exps(&basis.monomials[i], &basis.monomials[j]);
            let slot = full.position(&beta).expect("sum of two basis monomials has degree ≤ 2d");
            pairs[slot].push((i, j, 1.0));
        }
    }

    let mut constraints = Vec::with_capacity(full.len() - 1);
    let mut constraint_monomials = Vec::with_capacity(full.len() - 1);
    for (slot, entries) in pairs.into_iter().enumerate().skip(1) {
        let beta = &full.monomials[slot];
        let a = ConstraintMatrix::Sparse { n, entries };
        constraints.push(Constraint::new(a, p.coeff(beta)));
        constraint_monomials.push(beta.clone());
    }

    let mut c_tilde = DMatrix::zeros(n, n);
    c_tilde[(0, 0)] = 1.0;
    let c_tilde = SymMatrix::new(c_tilde)?;
    let problem = from_regularized_sdp(&c_tilde, rho, constraints)?;
    Ok(SosProgram {
        basis,
        problem,
        p_const: p.constant(),
        gamma_index: (0, 0),
        constraint_monomials,
    })
}

/// `X₀₀ − p_const`.
pub fn extract_gamma(program: &SosProgram, x: &SymMatrix) -> Result<f64> {
    if x.dim() != program.basis.len() {
        return Err(Error::mismatch(format!(
            "Gram matrix is {0}x{0}, program expects {1}x{1}",
            x.dim(),
            program.basis.len()
        )));
    }
    Ok(x[program.gamma_index] - program.p_const)
}

/// Random polynomial with a known SOS optimum.
#[derive(Clone, Debug)]
pub struct SosInstance {
    pub poly: Polynomial,
    pub gamma_star: f64,
    /// PSD Gram matrix with `p = z_dᵀ X₀ z_d − offset`.
    pub gram: SymMatrix,
    /// Point where `p` attains `−offset`.
    pub minimizer: Vec<f64>,
}

/// Builds `p = z_dᵀ X₀ z_d − offset` with `‖X₀‖_F = 1` and its global
/// minimum at the origin.
///
/// `X₀ = P GᵀG P` with `P = I − e₀e₀ᵀ`, so `p(0) = −offset` is the
/// global minimum and the SOS optimum is exactly `offset`. A full-rank `X₀`
/// would only give `γ* ≤ offset`.
pub fn random_instance(nvars: usize, d: u32, offset: f64, rng: &mut RngStream) -> Result<SosInstance> {
    random_instance_with_minimizer(nvars, d, offset, &vec![0.0; nvars], rng)
}

/// As [`random_instance`] with the minimizer placed at `x_star`
/// (`P` projects out `z_d(x*)`). Away from the origin the resulting dual
/// problems are much worse conditioned.
pub fn random_instance_with_minimizer(
    nvars: usize,
    d: u32,
    offset: f64,
    x_star: &[f64],
    rng: &mut RngStream,
) -> Result<SosInstance> {
    if d == 0 {
        return Err(Error::invalid("random SOS instances need d ≥ 1"));
    }
    let basis = monomial_basis(nvars, d)?;
    let n = basis.len();
    let g = gaussian_matrix(n, n, rng);
    let z = basis.evaluate(x_star)?.normalize();
    let proj = DMatrix::identity(n, n) - &z * z.transpose();
    let mut x0 = &proj * g.transpose() * &g * &proj;
    x0 /= x0.norm();
    let gram = SymMatrix::from_nearly_symmetric(x0);
    let poly = basis.gram_polynomial(&gram)?.plus_constant(-offset);
    Ok(SosInstance {
        poly,
        gamma_star: offset,
        gram,
        minimizer: x_star.to_vec(),
    })
}

/// Solved SOS program.
#[derive(Clone, Debug)]
pub struct SosSolution {
    pub gamma: f64,
    pub program: SosProgram,
    pub report: SolveReport,
}

/// Compiles and solves `min γ s.t. p + γ SOS`.
pub fn solve_sos(p: &Polynomial, d: u32, rho: f64, proj: &ProjectorConfig, gd: &GdParams) -> Result<SosSolution> {
    let program = compile_sos_min(p, d, rho)?;
    let report = solve(&program.problem, proj, gd)?;
    let gamma = extract_gamma(&program, &report.x_solution)?;
    Ok(SosSolution { gamma, program, report })
}

/// Smallest integer degree `d` with `2d ≥ deg(p)`.
pub fn half_degree(p: &Polynomial) -> u32 {
    p.degree().div_ceil(2).max(1)
}
