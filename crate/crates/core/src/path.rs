//! Regularization paths over OSCAR `(w1, w2)` grids.
//!
//! Grid values are factors of `‖Aᵀb‖_∞`. Sweeps run from the largest `w1`
//! down so the first point starts at (or near) the all-zero solution.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::alm::{alm_solve, AlmConfig};
use crate::baselines::{admm_solve, apg_solve, AdmmConfig, AdmmIterate, ApgConfig};
use crate::error::{Error, Result};
use crate::problem::{oscar_weights, Algorithm, LambdaSeq, ProblemData, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    /// Grid values in decreasing order.
    pub fn values(&self) -> Result<Vec<f64>> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.count == 0 {
            return bad("grid must have at least one point".into());
        }
        if !(self.lo >= 0.0 && self.hi >= self.lo && self.hi.is_finite()) {
            return bad(format!("invalid grid range [{}, {}]", self.lo, self.hi));
        }
        if self.spacing == Spacing::Log && self.lo <= 0.0 {
            return bad("log grid needs lo > 0".into());
        }
        if self.count == 1 {
            return Ok(vec![self.hi]);
        }
        let last = (self.count - 1) as f64;
        let v = (0..self.count)
            .map(|i| {
                let s = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.hi + s * (self.lo - self.hi),
                    Spacing::Log => (self.hi.ln() + s * (self.lo.ln() - self.hi.ln())).exp(),
                }
            })
            .collect();
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum W2Rule {
    /// `w2 = F · ‖Aᵀb‖_∞`.
    Fixed(f64),
    /// `w2 = w1 / √n`.
    Scaled,
    Grid(GridSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub w1: GridSpec,
    pub w2: W2Rule,
    pub top_k: usize,
    pub warm_start: bool,
}

impl PathGrid {
    /// Absolute `(w1, w2)` pairs in sweep order: rows of fixed `w2`
    /// (decreasing), each with decreasing `w1`.
    pub fn points(&self, p: &ProblemData) -> Result<Vec<(f64, f64)>> {
        let scale = p.atb_inf_norm();
        let w1s: Vec<f64> = self.w1.values()?.into_iter().map(|v| v * scale).collect();
        let sqrt_n = (p.n() as f64).sqrt();
        let pts: Vec<(f64, f64)> = match &self.w2 {
            W2Rule::Fixed(f) => {
                if !(*f >= 0.0 && f.is_finite()) {
                    return Err(Error::InvalidParameter(format!("invalid w2 factor {f}")));
                }
                w1s.iter().map(|&w1| (w1, f * scale)).collect()
            }
            W2Rule::Scaled => w1s.iter().map(|&w1| (w1, w1 / sqrt_n)).collect(),
            W2Rule::Grid(g) => g
                .values()?
                .into_iter()
                .flat_map(|w2| w1s.iter().map(move |&w1| (w1, w2 * scale)))
                .collect(),
        };
        if let Some(&(w1, w2)) = pts.iter().find(|(w1, w2)| !(w1 + w2 > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "grid point (w1 = {w1}, w2 = {w2}) gives a zero penalty"
            )));
        }
        Ok(pts)
    }

    pub fn row_len(&self) -> usize {
        self.w1.count
    }
}

/// Solver selection plus the configuration of each algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub algorithm: Algorithm,
    pub alm: AlmConfig,
    pub apg: ApgConfig,
    pub admm: AdmmConfig,
}

impl SolverSettings {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            alm: AlmConfig::default(),
            apg: ApgConfig::default(),
            admm: AdmmConfig::default(),
        }
    }

    pub fn with_tolerances(mut self, tol_g: f64, tol_d: f64) -> Self {
        self.alm.tol_g = tol_g;
        self.alm.tol_d = tol_d;
        self.apg.tol_g = tol_g;
        self.apg.tol_d = tol_d;
        self.admm.tol_g = tol_g;
        self.admm.tol_d = tol_d;
        self
    }

    /// Solves with the selected algorithm, starting from `warm = (x0, y0)`
    /// if given. ADMM seeds its `ξ` with `−Aᵀy0`; APG ignores `y0`.
    pub fn solve(
        &self,
        p: &ProblemData,
        lam: &LambdaSeq,
        warm: Option<(&DVector<f64>, &DVector<f64>)>,
    ) -> Result<SolveReport> {
        match self.algorithm {
            Algorithm::NewtAlm => alm_solve(p, lam, &self.alm, warm),
            Algorithm::Apg => apg_solve(p, lam, &self.apg, warm.map(|(x, _)| x)),
            Algorithm::Admm => {
                let it = warm.map(|(x, y)| AdmmIterate {
                    y: y.clone(),
                    xi: -p.a().tr_mul_vec(y.as_slice()),
                    x: x.clone(),
                });
                admm_solve(p, lam, &self.admm, it.as_ref())
            }
        }
    }
}

/// Indices and values of the `k` largest coefficients by magnitude; ties
/// keep the lower index first.
pub fn top_k(x: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    idx.truncate(k);
    idx.into_iter().map(|i| (i, x[i])).collect()
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub w1: f64,
    pub w2: f64,
    pub top: Vec<(usize, f64)>,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub points: Vec<PathPoint>,
    pub wall_ms: f64,
}

impl PathResult {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|pt| pt.report.converged)
    }

    pub fn total_inner_iters(&self) -> usize {
        self.points.iter().map(|pt| pt.report.inner_iters_total).sum()
    }
}

fn solve_point(
    p: &ProblemData,
    settings: &SolverSettings,
    (w1, w2): (f64, f64),
    top: usize,
    warm: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<PathPoint> {
    let lam = oscar_weights(w1, w2, p.n())?;
    let report = settings.solve(p, &lam, warm)?;
    if !report.converged {
        log::warn!("grid point w1 = {w1:.4e}, w2 = {w2:.4e} did not converge");
    }
    Ok(PathPoint {
        w1,
        w2,
        top: top_k(report.x.as_slice(), top),
        report,
    })
}

/// Runs the sweep. Warm-started sweeps are sequential; cold sweeps spread
/// grid points over `workers` threads. Points come back in sweep order.
pub fn run_path(
    p: &ProblemData,
    grid: &PathGrid,
    settings: &SolverSettings,
    workers: usize,
) -> Result<PathResult> {
    let start = Instant::now();
    let pts = grid.points(p)?;
    let row = grid.row_len();

    let points = if grid.warm_start {
        let mut out: Vec<PathPoint> = Vec::with_capacity(pts.len());
        for (i, &wp) in pts.iter().enumerate() {
            // first point of a row continues from the first point of the previous row
            let prev = if i % row == 0 {
                i.checked_sub(row)
            } else {
                Some(i - 1)
            };
            let warm = prev.map(|j| (&out[j].report.x, &out[j].report.y));
            let pt = solve_point(p, settings, wp, grid.top_k, warm)?;
            out.push(pt);
        }
        out
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
        pool.install(|| {
            pts.par_iter()
                .map(|&wp| solve_point(p, settings, wp, grid.top_k, None))
                .collect::<Result<Vec<_>>>()
        })?
    };

    Ok(PathResult {
        points,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
