//! Semismooth Newton method for the ALM subproblem `min_y Ψ_k(y)`, where
//!
//! ```text
//! Ψ_k(y) = ½‖y‖² + ⟨b, y⟩ − ‖x_k‖²/(2σ) + ‖Prox_{σκ_λ}(x_k − σAᵀy)‖²/(2σ)
//! ∇Ψ_k(y) = y + b − A Prox_{σκ_λ}(x_k − σAᵀy)
//! ```

use nalgebra::DVector;

use crate::alm::criteria_bound_raw;
use crate::error::{check_len, Error, Result};
use crate::jacobian::{
    assemble_newton_operator, solve_newton_system, JacobianFactors, LinearSolveConfig,
};
use crate::problem::{LambdaSeq, ProblemData};
use crate::prox::{prox_impl, ProxResult};

/// Parameters of the Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SsnConfig {
    /// Armijo constant, in (0, ½).
    pub mu: f64,
    /// Forcing-term cap, in (0, 1).
    pub eta_bar: f64,
    /// Forcing-term exponent, in (0, 1].
    pub tau: f64,
    /// Line-search contraction factor, in (0, 1).
    pub backtrack: f64,
    pub max_newton_iters: usize,
    pub max_linesearch: usize,
    pub linear: LinearSolveConfig,
}

impl Default for SsnConfig {
    fn default() -> Self {
        Self {
            mu: 1e-4,
            eta_bar: 1e-2,
            tau: 0.5,
            backtrack: 0.5,
            max_newton_iters: 50,
            max_linesearch: 50,
            linear: LinearSolveConfig::default(),
        }
    }
}

impl SsnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return bad("mu must lie in (0, 1/2)");
        }
        if !(self.eta_bar > 0.0 && self.eta_bar < 1.0) {
            return bad("eta_bar must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if self.max_linesearch == 0 {
            return bad("max_linesearch must be positive");
        }
        Ok(())
    }
}

/// When the inner solve may stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToleranceSpec {
    /// `‖∇Ψ‖ ≤ tol`.
    Gradient(f64),
    /// The ALM criteria with the current `ε_k`, `δ_k`, `δ′_k`; the bound
    /// depends on the tentative step `‖Prox(x_k − σAᵀy) − x_k‖`.
    AlmCriteria {
        eps: f64,
        delta: f64,
        delta_prime: f64,
    },
}

impl ToleranceSpec {
    pub fn satisfied(&self, grad_norm: f64, sigma: f64, x_k: &[f64], tentative: &[f64]) -> bool {
        match *self {
            ToleranceSpec::Gradient(tol) => grad_norm <= tol,
            ToleranceSpec::AlmCriteria {
                eps,
                delta,
                delta_prime,
            } => {
                let dx = x_k
                    .iter()
                    .zip(tentative)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                grad_norm <= criteria_bound_raw(eps, delta, delta_prime, sigma, dx)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsnStatus {
    Converged,
    MaxIterations,
    /// The line search could not satisfy the Armijo condition.
    Stagnated,
}

/// Iterate of the Newton method together with its cached prox.
#[derive(Debug, Clone)]
pub struct SsnState {
    pub y: DVector<f64>,
    pub grad: DVector<f64>,
    /// `Prox_{σκ_λ}(x_k − σAᵀy)`; its `x` is the tentative multiplier update.
    pub prox_cache: ProxResult,
    pub psi: f64,
    pub newton_iters: usize,
    pub cg_iters_total: usize,
    /// Iterations whose linear solve missed the forcing bound.
    pub forcing_violations: usize,
    /// Iterations that fell back to a steepest-descent step.
    pub steepest_steps: usize,
    pub status: SsnStatus,
}

impl SsnState {
    pub fn grad_norm(&self) -> f64 {
        self.grad.norm()
    }
}

/// Subproblem data shared across Newton iterations.
struct Subproblem<'a> {
    p: &'a ProblemData,
    lam: &'a [f64],
    x_k: &'a DVector<f64>,
    sigma: f64,
    xk_sq: f64,
}

/// `Ψ` ingredients at one point; `aty` is kept so trial points along a
/// direction cost one prox each.
#[derive(Clone)]
struct Point {
    y: DVector<f64>,
    aty: DVector<f64>,
    prox: ProxResult,
    psi: f64,
}

impl Subproblem<'_> {
    fn point(&self, y: DVector<f64>, aty: DVector<f64>) -> Point {
        let w: Vec<f64> = self
            .x_k
            .iter()
            .zip(aty.iter())
            .map(|(x, g)| x - self.sigma * g)
            .collect();
        let prox = prox_impl(&w, self.lam, self.sigma);
        let qq: f64 = prox.x.iter().map(|v| v * v).sum();
        let by = self.p.b().dot(&y);
        let psi = 0.5 * y.norm_squared() + by + (qq - self.xk_sq) / (2.0 * self.sigma);
        Point { y, aty, prox, psi }
    }

    fn grad(&self, pt: &Point) -> DVector<f64> {
        &pt.y + self.p.b() - self.p.a().mul_vec(&pt.prox.x)
    }

    /// `Ψ(y + t d) − Ψ(y)` arranged so that the constant and quadratic terms
    /// cancel analytically rather than in floating point.
    fn psi_delta(&self, from: &Point, to: &Point, t: f64, d: &DVector<f64>) -> f64 {
        let lin = t * (from.y.dot(d) + self.p.b().dot(d)) + 0.5 * t * t * d.norm_squared();
        let prox_term: f64 = to
            .prox
            .x
            .iter()
            .zip(&from.prox.x)
            .map(|(a, b)| (a - b) * (a + b))
            .sum();
        lin + prox_term / (2.0 * self.sigma)
    }
}

fn check_inputs(
    x_k: &[f64],
    y: &[f64],
    sigma: f64,
    p: &ProblemData,
    lam: &LambdaSeq,
) -> Result<()> {
    check_len("x_k", p.n(), x_k.len())?;
    check_len("y", p.m(), y.len())?;
    check_len("weights", p.n(), lam.len())?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(())
}

/// `Ψ_k(y)`.
pub fn psi_value(
    y: &DVector<f64>,
    x_k: &DVector<f64>,
    sigma: f64,
    p: &ProblemData,
    lam: &LambdaSeq,
) -> Result<f64> {
    check_inputs(x_k.as_slice(), y.as_slice(), sigma, p, lam)?;
    let sp = Subproblem {
        p,
        lam: lam.as_slice(),
        x_k,
        sigma,
        xk_sq: x_k.norm_squared(),
    };
    let aty = p.a().tr_mul_vec(y.as_slice());
    Ok(sp.point(y.clone(), aty).psi)
}

/// `∇Ψ_k(y)` and the prox it was computed from.
pub fn grad_psi(
    y: &DVector<f64>,
    x_k: &DVector<f64>,
    sigma: f64,
    p: &ProblemData,
    lam: &LambdaSeq,
) -> Result<(DVector<f64>, ProxResult)> {
    check_inputs(x_k.as_slice(), y.as_slice(), sigma, p, lam)?;
    let sp = Subproblem {
        p,
        lam: lam.as_slice(),
        x_k,
        sigma,
        xk_sq: x_k.norm_squared(),
    };
    let aty = p.a().tr_mul_vec(y.as_slice());
    let pt = sp.point(y.clone(), aty);
    let g = sp.grad(&pt);
    Ok((g, pt.prox))
}

const GRAD_FLOOR_ULPS: f64 = 64.0;

/// Minimizes `Ψ_k` from `y0` by semismooth Newton steps with inexact linear
/// solves and Armijo backtracking.
pub fn ssn_solve(
    x_k: &DVector<f64>,
    sigma: f64,
    y0: &DVector<f64>,
    stop: &ToleranceSpec,
    cfg: &SsnConfig,
    p: &ProblemData,
    lam: &LambdaSeq,
) -> Result<SsnState> {
    cfg.validate()?;
    check_inputs(x_k.as_slice(), y0.as_slice(), sigma, p, lam)?;
    let sp = Subproblem {
        p,
        lam: lam.as_slice(),
        x_k,
        sigma,
        xk_sq: x_k.norm_squared(),
    };

    let aty0 = p.a().tr_mul_vec(y0.as_slice());
    let mut cur = sp.point(y0.clone(), aty0);
    let mut grad = sp.grad(&cur);
    let mut newton_iters = 0;
    let mut cg_iters_total = 0;
    let mut forcing_violations = 0;
    let mut steepest_steps = 0;

    let status = loop {
        let gnorm = grad.norm();
        if !gnorm.is_finite() || !cur.psi.is_finite() {
            return Err(Error::NonFinite("semismooth Newton iterate"));
        }
        // ∇Ψ = y + b − Ax cannot be resolved below a few ulps of its terms;
        // a bound under that level would only burn the iteration cap.
        let floor = GRAD_FLOOR_ULPS * f64::EPSILON * (1.0 + cur.y.norm() + p.b().norm());
        if gnorm <= floor || stop.satisfied(gnorm, sigma, x_k.as_slice(), &cur.prox.x) {
            break SsnStatus::Converged;
        }
        if newton_iters >= cfg.max_newton_iters {
            break SsnStatus::MaxIterations;
        }

        let factors = JacobianFactors::from_prox(&cur.prox);
        let op = assemble_newton_operator(p, &factors, sigma, None, &cfg.linear)?;
        let forcing = cfg.eta_bar.min(gnorm.powf(1.0 + cfg.tau));
        let rhs = -&grad;
        let mut sol = solve_newton_system(&op, &rhs, forcing, cfg.linear.cg_maxit)?;
        cg_iters_total += sol.cg_iters;
        let mut gd = grad.dot(&sol.d);
        if gd >= 0.0 {
            sol = solve_newton_system(&op, &rhs, forcing * 1e-3, 4 * cfg.linear.cg_maxit)?;
            cg_iters_total += sol.cg_iters;
            gd = grad.dot(&sol.d);
        }
        let d = if gd < 0.0 {
            if sol.residual_norm > forcing {
                forcing_violations += 1;
            }
            sol.d
        } else {
            steepest_steps += 1;
            gd = -gnorm * gnorm;
            rhs
        };

        let atd = p.a().tr_mul_vec(d.as_slice());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_linesearch {
            let y_t = &cur.y + &d * t;
            let aty_t = &cur.aty + &atd * t;
            let cand = sp.point(y_t, aty_t);
            if sp.psi_delta(&cur, &cand, t, &d) <= cfg.mu * t * gd {
                accepted = Some(cand);
                break;
            }
            t *= cfg.backtrack;
        }
        newton_iters += 1;
        log::trace!(
            "newton {newton_iters:>3}  |grad| {gnorm:.3e}  step {t:.2e}  {:?} r={}  lin.res {:.2e}",
            op.strategy(),
            op.r1() + op.r2(),
            sol.residual_norm
        );
        match accepted {
            Some(next) => {
                cur = next;
                grad = sp.grad(&cur);
            }
            None => break SsnStatus::Stagnated,
        }
    };

    Ok(SsnState {
        y: cur.y,
        grad,
        prox_cache: cur.prox,
        psi: cur.psi,
        newton_iters,
        cg_iters_total,
        forcing_violations,
        steepest_steps,
        status,
    })
}
