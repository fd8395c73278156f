//! First-order reference solvers: FISTA on the primal and semi-proximal
//! ADMM (with zero proximal terms) on the dual.

use std::time::Instant;

use nalgebra::{Cholesky, DVector, Dyn};

use crate::design::DesignMatrix;
use crate::error::{check_len, Error, Result};
use crate::problem::{
    dual_objective_impl, gap_from_objectives, penalty_impl, Algorithm, IterRecord, LambdaSeq,
    ProblemData, SolveReport,
};
use crate::prox::{dual_ball_violation_impl, prox_impl};

const POWER_ITERS: usize = 20;
const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, PartialEq)]
pub struct ApgConfig {
    pub max_iters: usize,
    pub tol_g: f64,
    pub tol_d: f64,
    /// Initial Lipschitz estimate; `None` runs a short power iteration on `AᵀA`.
    pub lipschitz_init: Option<f64>,
    pub backtrack_up: f64,
}

impl Default for ApgConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol_g: 1e-6,
            tol_d: 1e-6,
            lipschitz_init: None,
            backtrack_up: 2.0,
        }
    }
}

impl ApgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.backtrack_up > 1.0) {
            return Err(Error::InvalidParameter("backtrack_up must exceed 1".into()));
        }
        if let Some(l) = self.lipschitz_init {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter("lipschitz_init must be positive".into()));
            }
        }
        if !(self.tol_g > 0.0 && self.tol_d > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub sigma: f64,
    /// Dual step length in `(0, (1+√5)/2)`.
    pub tau: f64,
    pub max_iters: usize,
    pub tol_g: f64,
    pub tol_d: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            tau: 1.618,
            max_iters: 50_000,
            tol_g: 1e-6,
            tol_d: 1e-6,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter("sigma must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < GOLDEN) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in (0, {GOLDEN:.6}), got {}",
                self.tau
            )));
        }
        if !(self.tol_g > 0.0 && self.tol_d > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Operator counts for a first-order run. Monitoring products (the `Aᵀr`
/// needed for `η_D`) are kept apart from the iteration itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub a_apply: usize,
    pub at_apply: usize,
    pub prox: usize,
    pub monitor_at_apply: usize,
    /// Products spent estimating `‖A‖²` before the first iteration.
    pub setup_apply: usize,
    pub backtracks: usize,
}

/// `‖A‖²` by power iteration on `AᵀA` from a fixed start.
fn spectral_norm_sq(a: &DesignMatrix, iters: usize) -> f64 {
    let n = a.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..iters {
        let w = a.tr_mul_vec(a.mul_vec(v.as_slice()).as_slice());
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        est = nw;
        v = w / nw;
    }
    est
}

pub fn apg_solve(
    p: &ProblemData,
    lam: &LambdaSeq,
    cfg: &ApgConfig,
    warm: Option<&DVector<f64>>,
) -> Result<SolveReport> {
    apg_solve_counted(p, lam, cfg, warm).map(|(r, _)| r)
}

/// FISTA with backtracking on `L`. `Az` is carried by the momentum
/// recurrence, so an accepted step costs one `Aᵀ` and one `A` product.
pub fn apg_solve_counted(
    p: &ProblemData,
    lam: &LambdaSeq,
    cfg: &ApgConfig,
    warm: Option<&DVector<f64>>,
) -> Result<(SolveReport, OpCounts)> {
    cfg.validate()?;
    check_len("weights", p.n(), lam.len())?;
    let start = Instant::now();
    let a = p.a();
    let b = p.b();
    let lam_s = lam.as_slice();
    let mut ops = OpCounts::default();

    let mut x = match warm {
        Some(x0) => {
            p.check_primal(x0.as_slice())?;
            x0.clone()
        }
        None => DVector::zeros(p.n()),
    };
    let mut ax = a.mul_vec(x.as_slice());
    ops.setup_apply += 1;
    let mut l = match cfg.lipschitz_init {
        Some(l) => l,
        None => {
            ops.setup_apply += 2 * POWER_ITERS;
            spectral_norm_sq(a, POWER_ITERS)
        }
    };
    if l <= 0.0 {
        // A = 0: any positive step is exact.
        l = 1.0;
    }

    let mut z = x.clone();
    let mut az = ax.clone();
    let mut t = 1.0_f64;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    while iters < cfg.max_iters {
        let rz = &az - b;
        let grad = a.tr_mul_vec(rz.as_slice());
        ops.at_apply += 1;

        let (x_new, ax_new) = loop {
            let step = 1.0 / l;
            let w = &z - &grad * step;
            let cand = DVector::from_vec(prox_impl(w.as_slice(), lam_s, step).x);
            ops.prox += 1;
            let a_cand = a.mul_vec(cand.as_slice());
            ops.a_apply += 1;
            // f is quadratic, so the upper-bound test is exactly ‖A d‖² ≤ L‖d‖².
            let d = &cand - &z;
            let ad = &a_cand - &az;
            if ad.norm_squared() <= l * d.norm_squared() * (1.0 + 1e-12) {
                break (cand, a_cand);
            }
            l *= cfg.backtrack_up;
            ops.backtracks += 1;
        };

        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_new;
        let dx = &x_new - &x;
        z = &x_new + &dx * beta;
        az = &ax_new + (&ax_new - &ax) * beta;
        x = x_new;
        ax = ax_new;
        t = t_new;
        iters += 1;

        let r = &ax - b;
        let obj_p = 0.5 * r.norm_squared() + penalty_impl(x.as_slice(), lam_s);
        let obj_d = dual_objective_impl(r.as_slice(), p);
        let eta_g = gap_from_objectives(obj_p, obj_d);
        let mut eta_d = f64::NAN;
        if eta_g <= cfg.tol_g {
            let g = a.tr_mul_vec(r.as_slice());
            ops.monitor_at_apply += 1;
            eta_d = dual_ball_violation_impl(g.as_slice(), lam_s);
        }
        history.push(IterRecord {
            iter: iters,
            eta_g,
            eta_d,
            obj_primal: obj_p,
            step: 1.0 / l,
            residual: dx.norm(),
            dx_norm: 0.0,
            inner_iters: 0,
        });
        if !obj_p.is_finite() {
            return Err(Error::Breakdown {
                iter: iters,
                detail: format!("non-finite objective at L = {l:.3e}"),
            });
        }
        if eta_g <= cfg.tol_g && eta_d <= cfg.tol_d {
            converged = true;
            break;
        }
    }

    let y = &ax - b;
    let mut report = SolveReport::finalize(p, lam, x, y, Algorithm::Apg);
    report.outer_iters = iters;
    report.converged = converged;
    report.history = history;
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((report, ops))
}

enum YSolver {
    Direct(Cholesky<f64, Dyn>),
    Cg { sigma: f64 },
}

impl YSolver {
    fn new(a: &DesignMatrix, sigma: f64) -> Self {
        if a.nrows() <= 4000 {
            if let Some(c) = a.identity_plus_scaled_aat(sigma).cholesky() {
                return YSolver::Direct(c);
            }
            log::warn!("Cholesky of I + σAAᵀ failed; using CG for the y-update");
        }
        YSolver::Cg { sigma }
    }

    fn solve(&self, a: &DesignMatrix, rhs: &DVector<f64>, y0: &DVector<f64>) -> DVector<f64> {
        match self {
            YSolver::Direct(c) => c.solve(rhs),
            YSolver::Cg { sigma } => {
                let op = |v: &DVector<f64>| {
                    let atv = a.tr_mul_vec(v.as_slice());
                    v + a.mul_vec(atv.as_slice()) * *sigma
                };
                cg(op, rhs, y0.clone(), 1e-12 * (1.0 + rhs.norm()), 10 * rhs.len().max(50))
            }
        }
    }
}

fn cg<F>(op: F, rhs: &DVector<f64>, mut x: DVector<f64>, tol: f64, maxit: usize) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut r = rhs - op(&x);
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    for _ in 0..maxit {
        if rr.sqrt() <= tol {
            break;
        }
        let q = op(&p);
        let alpha = rr / p.dot(&q);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        let rr_new = r.norm_squared();
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    x
}

/// Iterates of the dual ADMM, exposed for warm starts and fixed-point tests.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmIterate {
    pub y: DVector<f64>,
    pub xi: DVector<f64>,
    pub x: DVector<f64>,
}

pub fn admm_solve(
    p: &ProblemData,
    lam: &LambdaSeq,
    cfg: &AdmmConfig,
    warm: Option<&AdmmIterate>,
) -> Result<SolveReport> {
    admm_run(p, lam, cfg, warm).map(|(r, _)| r)
}

/// Runs ADMM and also returns the final `(y, ξ, x)` triple.
pub fn admm_run(
    p: &ProblemData,
    lam: &LambdaSeq,
    cfg: &AdmmConfig,
    warm: Option<&AdmmIterate>,
) -> Result<(SolveReport, AdmmIterate)> {
    cfg.validate()?;
    check_len("weights", p.n(), lam.len())?;
    let start = Instant::now();
    let a = p.a();
    let b = p.b();
    let lam_s = lam.as_slice();
    let sigma = cfg.sigma;

    let mut it = match warm {
        Some(w) => {
            p.check_dual(w.y.as_slice())?;
            p.check_primal(w.xi.as_slice())?;
            p.check_primal(w.x.as_slice())?;
            w.clone()
        }
        None => AdmmIterate {
            y: DVector::zeros(p.m()),
            xi: DVector::zeros(p.n()),
            x: DVector::zeros(p.n()),
        },
    };
    let ysolve = YSolver::new(a, sigma);
    let mut ax = a.mul_vec(it.x.as_slice());
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    while iters < cfg.max_iters {
        // (I + σAAᵀ) y = A x − b − σ A ξ
        let rhs = &ax - b - a.mul_vec(it.xi.as_slice()) * sigma;
        it.y = ysolve.solve(a, &rhs, &it.y);

        let aty = a.tr_mul_vec(it.y.as_slice());
        let w = &it.x - &aty * sigma;
        let pw = prox_impl(w.as_slice(), lam_s, sigma).x;
        it.xi = (&w - DVector::from_vec(pw)) / sigma;

        let feas = &aty + &it.xi;
        it.x.axpy(-cfg.tau * sigma, &feas, 1.0);
        ax = a.mul_vec(it.x.as_slice());
        iters += 1;

        let r = &ax - b;
        let obj_p = 0.5 * r.norm_squared() + penalty_impl(it.x.as_slice(), lam_s);
        let obj_d = dual_objective_impl(it.y.as_slice(), p);
        let eta_g = gap_from_objectives(obj_p, obj_d);
        let mut eta_d = f64::NAN;
        if eta_g <= cfg.tol_g {
            eta_d = dual_ball_violation_impl(a.tr_mul_vec(r.as_slice()).as_slice(), lam_s);
        }
        history.push(IterRecord {
            iter: iters,
            eta_g,
            eta_d,
            obj_primal: obj_p,
            step: sigma,
            residual: feas.norm(),
            dx_norm: 0.0,
            inner_iters: 0,
        });
        if !obj_p.is_finite() {
            return Err(Error::Breakdown {
                iter: iters,
                detail: "non-finite objective".into(),
            });
        }
        if eta_g <= cfg.tol_g && eta_d <= cfg.tol_d {
            converged = true;
            break;
        }
    }

    let mut report = SolveReport::finalize(p, lam, it.x.clone(), it.y.clone(), Algorithm::Admm);
    report.outer_iters = iters;
    report.converged = converged;
    report.history = history;
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((report, it))
}
