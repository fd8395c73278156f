//! Inexact augmented Lagrangian method on the dual problem
//!
//! ```text
//! min_y ½‖y‖² + ⟨b, y⟩ + κ*_λ(−Aᵀy)
//! ```
//!
//! with the primal coefficients `x` as multiplier. Each outer iteration
//! minimizes `Ψ_k = L_{σ_k}(·; x^k)` by semismooth Newton, sets
//! `x^{k+1} = Prox_{σ_k κ_λ}(x^k − σ_k Aᵀ y^{k+1})`, and updates `σ`.

use std::time::Instant;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::problem::{
    dual_objective_impl, gap_from_objectives, penalty_impl, residual, Algorithm, IterRecord,
    LambdaSeq, ProblemData, SolveReport,
};
use crate::prox::dual_ball_violation_impl;
use crate::ssn::{ssn_solve, SsnConfig, SsnStatus, ToleranceSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig {
    /// Initial penalty; `None` picks `max(1, ‖Aᵀb‖_∞/λ_1)` clamped to [1e-3, 1e3].
    pub sigma0: Option<f64>,
    /// Applied after an outer iteration whose inner solve converged.
    pub sigma_growth: f64,
    /// Divides `σ` after an outer iteration whose inner solve did not.
    pub sigma_shrink: f64,
    pub sigma_max: f64,
    /// `ε_k = eps_a0 · decay^k`.
    pub eps_a0: f64,
    /// `δ_k = delta_b0 · decay^k`.
    pub delta_b0: f64,
    /// `δ′_k = delta_p0 · decay^k`.
    pub delta_p0: f64,
    pub decay: f64,
    pub tol_g: f64,
    pub tol_d: f64,
    pub max_outer: usize,
    pub ssn: SsnConfig,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            sigma0: None,
            sigma_growth: 3.0,
            sigma_shrink: 3.0,
            sigma_max: 1e6,
            eps_a0: 1.0,
            delta_b0: 1.0,
            delta_p0: 1.0,
            decay: 0.5,
            tol_g: 1e-6,
            tol_d: 1e-6,
            max_outer: 100,
            ssn: SsnConfig::default(),
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if let Some(s) = self.sigma0 {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma0 must be positive");
            }
        }
        if !(self.sigma_growth >= 1.0) {
            return bad("sigma_growth must be at least 1");
        }
        if !(self.sigma_shrink >= 1.0 && self.sigma_shrink.is_finite()) {
            return bad("sigma_shrink must be at least 1");
        }
        if !(self.sigma_max > 0.0) {
            return bad("sigma_max must be positive");
        }
        if !(self.eps_a0 > 0.0 && self.delta_b0 > 0.0 && self.delta_p0 > 0.0) {
            return bad("criteria bases must be positive");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(self.tol_g > 0.0 && self.tol_d > 0.0) {
            return bad("tolerances must be positive");
        }
        self.ssn.validate()
    }

    /// `(ε_k, δ_k, δ′_k)`.
    pub fn sequences(&self, k: usize) -> (f64, f64, f64) {
        let r = self.decay.powi(k as i32);
        (self.eps_a0 * r, self.delta_b0 * r, self.delta_p0 * r)
    }

    pub fn initial_sigma(&self, p: &ProblemData, lam: &LambdaSeq) -> f64 {
        self.sigma0.unwrap_or_else(|| {
            let ratio = p.atb_inf_norm() / lam.max();
            ratio.max(1.0).clamp(1e-3, 1e3)
        })
    }
}

pub(crate) fn criteria_bound_raw(eps: f64, delta: f64, delta_prime: f64, sigma: f64, dx: f64) -> f64 {
    let a = eps / sigma.sqrt();
    if dx == 0.0 {
        // x^{k+1} = x^k already certifies the fixed point; (A) alone suffices.
        return a;
    }
    a.min(delta / sigma.sqrt() * dx).min(delta_prime / sigma * dx)
}

/// Gradient bound under which criteria (A), (B1) and (B2) all hold:
/// `min{ε_k/√σ, (δ_k/√σ)·dx, (δ′_k/σ)·dx}`.
pub fn criteria_bound(k: usize, sigma: f64, dx_norm: f64, cfg: &AlmConfig) -> f64 {
    let (eps, delta, delta_prime) = cfg.sequences(k);
    let a = eps / sigma.sqrt();
    a.min(delta / sigma.sqrt() * dx_norm)
        .min(delta_prime / sigma * dx_norm)
}

/// Working state of the outer loop.
#[derive(Debug, Clone)]
pub struct AlmState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub sigma: f64,
    pub k: usize,
    pub history: Vec<IterRecord>,
}

struct Metrics {
    obj_p: f64,
    eta_g: f64,
    eta_d: f64,
}

fn metrics(p: &ProblemData, lam: &LambdaSeq, x: &DVector<f64>, y: &DVector<f64>) -> Metrics {
    let r = residual(p, x.as_slice());
    let g = p.a().tr_mul_vec(r.as_slice());
    let obj_p = 0.5 * r.norm_squared() + penalty_impl(x.as_slice(), lam.as_slice());
    let obj_d = dual_objective_impl(y.as_slice(), p);
    Metrics {
        obj_p,
        eta_g: gap_from_objectives(obj_p, obj_d),
        eta_d: dual_ball_violation_impl(g.as_slice(), lam.as_slice()),
    }
}

/// Solves the SLOPE problem by the semismooth Newton ALM.
///
/// `warm` supplies `(x0, y0)`; the default start is the origin.
pub fn alm_solve(
    p: &ProblemData,
    lam: &LambdaSeq,
    cfg: &AlmConfig,
    warm: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<SolveReport> {
    cfg.validate()?;
    check_len("weights", p.n(), lam.len())?;
    let start = Instant::now();

    let (x0, y0) = match warm {
        Some((x, y)) => {
            p.check_primal(x.as_slice())?;
            p.check_dual(y.as_slice())?;
            (x.clone(), y.clone())
        }
        None => (DVector::zeros(p.n()), DVector::zeros(p.m())),
    };
    let mut state = AlmState {
        x: x0,
        y: y0,
        sigma: cfg.initial_sigma(p, lam),
        k: 0,
        history: Vec::new(),
    };

    let mut inner_total = 0;
    let mut cg_total = 0;
    let initial = metrics(p, lam, &state.x, &state.y);
    let mut converged = initial.eta_g <= cfg.tol_g && initial.eta_d <= cfg.tol_d;

    while !converged && state.k < cfg.max_outer {
        let (eps, delta, delta_prime) = cfg.sequences(state.k);
        let stop = ToleranceSpec::AlmCriteria {
            eps,
            delta,
            delta_prime,
        };
        let inner = ssn_solve(&state.x, state.sigma, &state.y, &stop, &cfg.ssn, p, lam)
            .map_err(|e| Error::Breakdown {
                iter: state.k,
                detail: e.to_string(),
            })?;
        if inner.status != SsnStatus::Converged {
            log::debug!(
                "outer {}: inner solve ended {:?} at |grad| = {:.3e}; lowering sigma",
                state.k,
                inner.status,
                inner.grad_norm()
            );
        }
        inner_total += inner.newton_iters;
        cg_total += inner.cg_iters_total;

        let x_next = DVector::from_vec(inner.prox_cache.x.clone());
        let dx_norm = (&x_next - &state.x).norm();
        if x_next.iter().any(|v| !v.is_finite()) || inner.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Breakdown {
                iter: state.k,
                detail: format!(
                    "non-finite iterate (sigma = {:.3e}, |x| = {:.3e}, |y| = {:.3e})",
                    state.sigma,
                    state.x.norm(),
                    state.y.norm()
                ),
            });
        }
        state.x = x_next;
        state.y = inner.y.clone();

        let mt = metrics(p, lam, &state.x, &state.y);
        state.history.push(IterRecord {
            iter: state.k + 1,
            eta_g: mt.eta_g,
            eta_d: mt.eta_d,
            obj_primal: mt.obj_p,
            step: state.sigma,
            residual: inner.grad_norm(),
            dx_norm,
            inner_iters: inner.newton_iters,
        });
        log::debug!(
            "outer {:>3}  sigma {:.2e}  |grad| {:.2e}  eta_G {:.2e}  eta_D {:.2e}  newton {}",
            state.k + 1,
            state.sigma,
            inner.grad_norm(),
            mt.eta_g,
            mt.eta_d,
            inner.newton_iters
        );

        state.k += 1;
        converged = mt.eta_g <= cfg.tol_g && mt.eta_d <= cfg.tol_d;
        // A Newton solve that misses its criterion at this σ will do worse at
        // a larger one; back σ off instead.
        state.sigma = if inner.status == SsnStatus::Converged {
            (state.sigma * cfg.sigma_growth).min(cfg.sigma_max)
        } else {
            state.sigma / cfg.sigma_shrink
        };
    }

    let mut report = SolveReport::finalize(p, lam, state.x, state.y, Algorithm::NewtAlm);
    report.outer_iters = state.k;
    report.inner_iters_total = inner_total;
    report.cg_iters_total = cg_total;
    report.converged = converged;
    report.history = state.history;
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
