//! Drivers for the synthetic studies: the four-cluster projection sweep,
//! the two-constraint SDLS instance and the SOS benchmark.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    clustered_spectrum, frob_bound_scaled, frob_bound_unscaled, spectral_bound_scaled, spectral_bound_unscaled,
    BoundParams, SpectrumSummary,
};
use crate::error::{Error, Result};
use crate::projection::{sketch_project, sketch_project_scaled, Method, ProjectorConfig};
use crate::sdls::{random_feasible_instance, solve, GdParams, SdlsProblem, SolveReport};
use crate::sketch::RangeParams;
use crate::sos::{random_instance, solve_sos, Polynomial, DEFAULT_SOS_RHO};
use crate::symcore::{eigh, schatten_norm, spectrum_matrix, Norm, RngStream, SymMatrix};

/// Thread cap from `PSDCONE_THREADS`: `Some(0)` means run sequentially,
/// `None` leaves the rayon default.
pub fn thread_cap() -> Option<usize> {
    std::env::var("PSDCONE_THREADS").ok()?.trim().parse().ok()
}

/// Maps `f` over `0..count` honoring [`thread_cap`]. Output order is the
/// input order whatever the thread count.
pub fn par_map<T, F>(count: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match threads {
        Some(0) | Some(1) => (0..count).map(f).collect(),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
            Err(_) => (0..count).map(f).collect(),
        },
        None => (0..count).into_par_iter().map(f).collect(),
    }
}

/// Four-cluster test matrix `Oᵀ diag(spectrum) O` with a Haar-random `O`.
pub fn fig4_matrix(beta: [f64; 4], n: usize, seed: u64) -> Result<SymMatrix> {
    let spectrum = clustered_spectrum(beta, n)?;
    Ok(spectrum_matrix(&spectrum, &mut RngStream::new(seed)))
}

pub fn check_beta_order(beta: [f64; 4]) -> Result<()> {
    let [b1, b2, b3, b4] = beta;
    if !(b3 > b1 && b1 > b4 && b4 > b2 && b2 > 0.0) {
        return Err(Error::invalid(format!(
            "betas {b1},{b2},{b3},{b4} must satisfy β₃ > β₁ > β₄ > β₂ > 0"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig4Config {
    pub n: usize,
    pub beta: [f64; 4],
    pub l: usize,
    pub q: usize,
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Fig4Config {
    pub fn validate(&self) -> Result<()> {
        check_beta_order(self.beta)?;
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.k_grid.is_empty() {
            return Err(Error::invalid("k-grid is empty"));
        }
        if self.l < 2 {
            return Err(Error::invalid("l must be at least 2"));
        }
        for &k in &self.k_grid {
            RangeParams::new(k, self.l, self.q).validate(self.n, self.n)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig4Row {
    pub k: usize,
    pub method: Method,
    pub mean_frob_error: f64,
    pub mean_spectral_error: f64,
    /// Only defined for `q = 0`.
    pub frob_bound: Option<f64>,
    pub spectral_bound: f64,
}

/// Mean projection errors of the plain and scaled randomized projections on
/// the four-cluster matrix, alongside the expected-error bounds. The scaled
/// method uses `α = |λ_min|` from the exact decomposition. Trial `t` uses
/// the stream `seed + t`.
pub fn fig4_sweep(cfg: &Fig4Config, threads: Option<usize>) -> Result<Vec<Fig4Row>> {
    cfg.validate()?;
    let x = fig4_matrix(cfg.beta, cfg.n, cfg.seed)?;
    let eig = eigh(&x)?;
    let exact = eig.map_spectrum(|v| v.max(0.0));
    let alpha = eig.min().abs();
    let spec = SpectrumSummary::from_eigenvalues(&eig.values)?;

    let jobs: Vec<(usize, usize)> = cfg.k_grid.iter().flat_map(|&k| (0..cfg.trials).map(move |t| (k, t))).collect();
    let errors = par_map(jobs.len(), threads, |j| -> Result<[f64; 4]> {
        let (k, t) = jobs[j];
        let params = RangeParams::new(k, cfg.l, cfg.q);
        let mut rng = RngStream::derived(cfg.seed, t as u64);
        let plain = sketch_project(&x, &params, &mut rng)?.psd.dense();
        let mut rng = RngStream::derived(cfg.seed, t as u64);
        let scaled = sketch_project_scaled(&x, &params, alpha, &mut rng)?.psd.dense();
        let dp = exact.sub(&plain)?;
        let ds = exact.sub(&scaled)?;
        Ok([
            dp.frobenius(),
            schatten_norm(&dp, Norm::Spectral),
            ds.frobenius(),
            schatten_norm(&ds, Norm::Spectral),
        ])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(2 * cfg.k_grid.len());
    for (ki, &k) in cfg.k_grid.iter().enumerate() {
        let mut sums = [0.0; 4];
        for e in &errors[ki * cfg.trials..(ki + 1) * cfg.trials] {
            for (s, v) in sums.iter_mut().zip(e) {
                *s += v;
            }
        }
        let mean = sums.map(|s| s / cfg.trials as f64);
        let bp = BoundParams::new(k, cfg.l, cfg.q);
        let q0 = cfg.q == 0;
        rows.push(Fig4Row {
            k,
            method: Method::Randomized,
            mean_frob_error: mean[0],
            mean_spectral_error: mean[1],
            frob_bound: if q0 { Some(frob_bound_unscaled(&spec, &bp)?) } else { None },
            spectral_bound: spectral_bound_unscaled(&spec, &bp)?,
        });
        rows.push(Fig4Row {
            k,
            method: Method::ScaledRandomized,
            mean_frob_error: mean[2],
            mean_spectral_error: mean[3],
            frob_bound: if q0 { Some(frob_bound_scaled(&spec, &bp, alpha)?) } else { None },
            spectral_bound: spectral_bound_scaled(&spec, &bp, alpha)?,
        });
    }
    Ok(rows)
}

/// CSV with a header row; undefined bounds are left empty.
pub fn write_fig4_csv<W: Write>(rows: &[Fig4Row], mut w: W) -> Result<()> {
    writeln!(w, "k,method,mean_frob_error,mean_spectral_error,frob_bound,spectral_bound")?;
    for r in rows {
        let fb = r.frob_bound.map(|b| format!("{b:.10e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{:.10e},{:.10e},{},{:.10e}",
            r.k,
            r.method.name(),
            r.mean_frob_error,
            r.mean_spectral_error,
            fb,
            r.spectral_bound
        )?;
    }
    Ok(())
}

/// Default dual starting point for the two-constraint instance.
pub const EXAMPLE1_Y0: [f64; 2] = [1.2753, 0.2418];

/// Random feasible SDLS instance with `ρ = 1`.
pub fn example1_problem(n: usize, m: usize, seed: u64) -> Result<SdlsProblem> {
    Ok(random_feasible_instance(n, m, 1.0, seed)?.0)
}

/// Solves the generated instance; with `m = 2` and no `y0` the default
/// starting point is used.
pub fn run_example1(n: usize, m: usize, seed: u64, proj: &ProjectorConfig, gd: &GdParams) -> Result<SolveReport> {
    let prob = example1_problem(n, m, seed)?;
    let mut gd = gd.clone();
    if gd.y0.is_none() && m == 2 {
        gd.y0 = Some(EXAMPLE1_Y0.to_vec());
    }
    solve(&prob, proj, &gd)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosBenchReport {
    pub nvars: usize,
    pub degree: u32,
    pub gram_dim: usize,
    pub num_constraints: usize,
    pub gamma: f64,
    /// Known optimum for generated instances.
    pub gamma_star: Option<f64>,
    pub abs_error: Option<f64>,
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub projection: Method,
    pub fallbacks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SosBenchConfig {
    pub nvars: usize,
    pub degree: u32,
    pub offset: f64,
    pub rho: f64,
    pub seed: u64,
    /// Solve this polynomial instead of a generated instance.
    pub poly: Option<Polynomial>,
}

impl Default for SosBenchConfig {
    fn default() -> Self {
        Self {
            nvars: 9,
            degree: 2,
            offset: std::f64::consts::PI,
            rho: DEFAULT_SOS_RHO,
            seed: 0,
            poly: None,
        }
    }
}

pub fn run_sos_bench(cfg: &SosBenchConfig, proj: &ProjectorConfig, gd: &GdParams) -> Result<SosBenchReport> {
    let start = Instant::now();
    let (poly, gamma_star) = match &cfg.poly {
        Some(p) => (p.clone(), None),
        None => {
            let inst = random_instance(cfg.nvars, cfg.degree, cfg.offset, &mut RngStream::new(cfg.seed))?;
            (inst.poly, Some(inst.gamma_star))
        }
    };
    let d = match &cfg.poly {
        Some(p) => crate::sos::half_degree(p).max(1),
        None => cfg.degree,
    };
    let sol = solve_sos(&poly, d, cfg.rho, proj, gd)?;
    Ok(SosBenchReport {
        nvars: poly.nvars(),
        degree: d,
        gram_dim: sol.program.basis.len(),
        num_constraints: sol.program.problem.num_constraints(),
        gamma: sol.gamma,
        gamma_star,
        abs_error: gamma_star.map(|g| (sol.gamma - g).abs()),
        feasibility_residual: sol.report.feasibility_residual,
        iterations: sol.report.iterations,
        converged: sol.report.converged,
        projection: sol.report.projection,
        fallbacks: sol.report.fallbacks,
        wall_time: Some(start.elapsed().as_secs_f64()),
    })
}
