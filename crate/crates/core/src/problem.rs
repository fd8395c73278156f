//! Regression instances, penalty weights and solution-quality metrics.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::design::DesignMatrix;
use crate::error::{check_len, Error, Result};
use crate::prox::{dual_ball_violation_impl, prox_impl};

/// A least-squares regression instance `(A, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    a: DesignMatrix,
    b: DVector<f64>,
}

impl ProblemData {
    pub fn new(a: DesignMatrix, b: DVector<f64>) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "design matrix must be non-empty, got {m}x{n}"
            )));
        }
        check_len("response vector", m, b.len())?;
        if !a.all_finite() {
            return Err(Error::NonFinite("design matrix"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector"));
        }
        Ok(Self { a, b })
    }

    pub fn dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::new(DesignMatrix::Dense(a), b)
    }

    pub fn a(&self) -> &DesignMatrix {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Number of observations.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Number of features.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// `‖Aᵀ b‖_∞`, the scale used by the OSCAR factor parameterization.
    pub fn atb_inf_norm(&self) -> f64 {
        self.a.tr_mul_vec(self.b.as_slice()).amax()
    }

    pub(crate) fn check_primal(&self, x: &[f64]) -> Result<()> {
        check_len("primal vector", self.n(), x.len())
    }

    pub(crate) fn check_dual(&self, y: &[f64]) -> Result<()> {
        check_len("dual vector", self.m(), y.len())
    }
}

/// Non-increasing, nonnegative penalty weights `λ_1 ≥ … ≥ λ_n ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSeq(Vec<f64>);

impl LambdaSeq {
    /// Validates monotonicity, nonnegativity and `λ_1 > 0`.
    pub fn new(lam: Vec<f64>) -> Result<Self> {
        let seq = Self::allow_zero(lam)?;
        if seq.0[0] <= 0.0 {
            return Err(Error::InvalidLambda("largest weight must be positive".into()));
        }
        Ok(seq)
    }

    /// Like [`new`](Self::new) but accepts the all-zero sequence. Intended for
    /// oracle checks only; solvers expect a proper norm.
    pub fn allow_zero(lam: Vec<f64>) -> Result<Self> {
        if lam.is_empty() {
            return Err(Error::InvalidLambda("empty weight vector".into()));
        }
        if lam.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLambda("weights must be finite".into()));
        }
        if let Some(i) = lam.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidLambda(format!("weight {i} is negative")));
        }
        if let Some(i) = lam.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidLambda(format!(
                "weights must be non-increasing (lam[{}] = {} < lam[{}] = {})",
                i,
                lam[i],
                i + 1,
                lam[i + 1]
            )));
        }
        Ok(Self(lam))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `λ_1 = ‖λ‖_∞`.
    pub fn max(&self) -> f64 {
        self.0[0]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(Self(self.0.iter().map(|v| v * factor).collect()))
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// OSCAR weights `λ_i = w1 + w2 (n − i)`, `i = 1..n`.
pub fn oscar_weights(w1: f64, w2: f64, n: usize) -> Result<LambdaSeq> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(w1 >= 0.0 && w2 >= 0.0) || !w1.is_finite() || !w2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "OSCAR weights must be finite and nonnegative, got w1={w1}, w2={w2}"
        )));
    }
    if w1 + w2 <= 0.0 {
        return Err(Error::InvalidLambda("w1 + w2 must be positive".into()));
    }
    // 0-based i here corresponds to the 1-based i + 1, so n − (i + 1).
    LambdaSeq::new((0..n).map(|i| w1 + w2 * (n - 1 - i) as f64).collect())
}

/// `(w1, w2)` from the factor parameterization `w1 = a‖Aᵀb‖_∞`, `w2 = w1/√n`.
pub fn oscar_factor_weights(p: &ProblemData, a: f64) -> (f64, f64) {
    let w1 = a * p.atb_inf_norm();
    (w1, w1 / (p.n() as f64).sqrt())
}

/// `κ_λ(x) = Σ λ_i |x|↓_i`.
pub fn penalty_value(x: &[f64], lam: &LambdaSeq) -> Result<f64> {
    check_len("penalty input", lam.len(), x.len())?;
    Ok(penalty_impl(x, lam.as_slice()))
}

pub(crate) fn penalty_impl(x: &[f64], lam: &[f64]) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().zip(lam).map(|(m, l)| m * l).sum()
}

/// `Obj_P = ½‖Ax − b‖² + κ_λ(x)`.
pub fn primal_objective(x: &[f64], p: &ProblemData, lam: &LambdaSeq) -> Result<f64> {
    p.check_primal(x)?;
    check_len("weights", p.n(), lam.len())?;
    let r = residual(p, x);
    Ok(0.5 * r.norm_squared() + penalty_impl(x, lam.as_slice()))
}

/// `Obj_D = −bᵀy − ½‖y‖²`, evaluated without projecting `y` onto the
/// feasible set.
pub fn dual_objective(y: &[f64], p: &ProblemData) -> Result<f64> {
    p.check_dual(y)?;
    Ok(dual_objective_impl(y, p))
}

pub(crate) fn dual_objective_impl(y: &[f64], p: &ProblemData) -> f64 {
    let by: f64 = p.b.iter().zip(y).map(|(b, y)| b * y).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    -by - 0.5 * yy
}

pub(crate) fn residual(p: &ProblemData, x: &[f64]) -> DVector<f64> {
    p.a.mul_vec(x) - &p.b
}

pub(crate) fn gap_from_objectives(obj_p: f64, obj_d: f64) -> f64 {
    (obj_p - obj_d).abs() / obj_p.abs().max(1.0)
}

/// Relative duality gap `η_G = |Obj_P − Obj_D| / max{1, |Obj_P|}`.
pub fn relative_duality_gap(
    x: &[f64],
    y: &[f64],
    p: &ProblemData,
    lam: &LambdaSeq,
) -> Result<f64> {
    let obj_p = primal_objective(x, p, lam)?;
    let obj_d = dual_objective(y, p)?;
    Ok(gap_from_objectives(obj_p, obj_d))
}

/// Dual infeasibility `η_D` of the certificate `Aᵀ(Ax − b)`.
pub fn dual_infeasibility(x: &[f64], p: &ProblemData, lam: &LambdaSeq) -> Result<f64> {
    p.check_primal(x)?;
    check_len("weights", p.n(), lam.len())?;
    let g = p.a.tr_mul_vec(residual(p, x).as_slice());
    Ok(dual_ball_violation_impl(g.as_slice(), lam.as_slice()))
}

/// Relative KKT residual
/// `‖x − Prox(x − Aᵀ(Ax − b))‖ / (1 + ‖x‖ + ‖Aᵀ(Ax − b)‖)`.
pub fn kkt_residual(x: &[f64], p: &ProblemData, lam: &LambdaSeq) -> Result<f64> {
    p.check_primal(x)?;
    check_len("weights", p.n(), lam.len())?;
    let g = p.a.tr_mul_vec(residual(p, x).as_slice());
    let step: Vec<f64> = x.iter().zip(g.iter()).map(|(xi, gi)| xi - gi).collect();
    let px = prox_impl(&step, lam.as_slice(), 1.0).x;
    let num: f64 = x
        .iter()
        .zip(&px)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let xnorm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(num / (1.0 + xnorm + g.norm()))
}

/// Smallest `t` such that the `t` largest magnitudes carry at least 99.9% of
/// `‖x‖_1`; zero for the zero vector.
pub fn nnz999(x: &[f64]) -> usize {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let total: f64 = mags.iter().sum();
    if total == 0.0 {
        return 0;
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    let target = 0.999 * total;
    let mut acc = 0.0;
    for (t, m) in mags.iter().enumerate() {
        acc += m;
        if acc >= target {
            return t + 1;
        }
    }
    mags.len()
}

/// A synthetic instance with grouped ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub problem: ProblemData,
    pub x_true: DVector<f64>,
}

/// Number of coefficients in each ground-truth group.
pub fn synth_group_size(n: usize, n_groups: usize) -> usize {
    (n / (2 * n_groups)).clamp(1, 10)
}

/// Gaussian design scaled by `1/√m` and a ground truth made of `n_groups`
/// groups of identical coefficients at random positions. Group `g` has
/// magnitude `g + 1` and sign `(−1)^g`.
pub fn synth_instance(
    m: usize,
    n: usize,
    n_groups: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<SyntheticInstance> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("m and n must be positive".into()));
    }
    if n_groups == 0 || n_groups > n {
        return Err(Error::InvalidParameter(format!(
            "n_groups must lie in [1, n], got {n_groups} with n = {n}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise_sd must be finite and nonnegative, got {noise_sd}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let a = DMatrix::from_fn(m, n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    });

    let size = synth_group_size(n, n_groups);
    let support = sample(&mut rng, n, size * n_groups).into_vec();
    let mut x_true = DVector::zeros(n);
    for (k, &j) in support.iter().enumerate() {
        let g = k / size;
        let sign = if g % 2 == 0 { 1.0 } else { -1.0 };
        x_true[j] = sign * (g + 1) as f64;
    }

    let mut b = &a * &x_true;
    if noise_sd > 0.0 {
        for v in b.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += noise_sd * z;
        }
    }

    Ok(SyntheticInstance {
        problem: ProblemData::dense(a, b)?,
        x_true,
    })
}

/// Solver identifier carried in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    NewtAlm,
    Admm,
    Apg,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::NewtAlm => "newt-alm",
            Algorithm::Admm => "admm",
            Algorithm::Apg => "apg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newt-alm" => Ok(Algorithm::NewtAlm),
            "admm" => Ok(Algorithm::Admm),
            "apg" => Ok(Algorithm::Apg),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm '{other}' (expected newt-alm, admm or apg)"
            ))),
        }
    }
}

/// One row of a solver's iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub eta_g: f64,
    pub eta_d: f64,
    pub obj_primal: f64,
    /// Penalty parameter σ (ALM, ADMM) or step size 1/L (APG).
    pub step: f64,
    /// ALM: ‖∇Ψ_k(y^{k+1})‖; ADMM: ‖Aᵀy + ξ‖; APG: ‖x^{k+1} − x^k‖.
    pub residual: f64,
    /// ALM: ‖x^{k+1} − x^k‖; otherwise zero.
    pub dx_norm: f64,
    /// Newton iterations spent in this outer iteration (ALM only).
    pub inner_iters: usize,
}

/// Summary of a solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub obj_primal: f64,
    pub obj_dual: f64,
    pub eta_g: f64,
    pub eta_d: f64,
    pub eta_kkt: f64,
    pub nnz999: usize,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    /// CG iterations spent inside Newton solves (zero for direct solves).
    pub cg_iters_total: usize,
    pub wall_ms: f64,
    pub algorithm: Algorithm,
    pub converged: bool,
    pub history: Vec<IterRecord>,
}

impl SolveReport {
    /// Fills objectives and metrics from a final `(x, y)` pair.
    pub(crate) fn finalize(
        p: &ProblemData,
        lam: &LambdaSeq,
        x: DVector<f64>,
        y: DVector<f64>,
        algorithm: Algorithm,
    ) -> Self {
        let xs = x.as_slice();
        let r = residual(p, xs);
        let g = p.a.tr_mul_vec(r.as_slice());
        let obj_primal = 0.5 * r.norm_squared() + penalty_impl(xs, lam.as_slice());
        let obj_dual = dual_objective_impl(y.as_slice(), p);
        let eta_d = dual_ball_violation_impl(g.as_slice(), lam.as_slice());
        let eta_kkt = kkt_residual(xs, p, lam).unwrap_or(f64::NAN);
        Self {
            nnz999: nnz999(xs),
            eta_g: gap_from_objectives(obj_primal, obj_dual),
            eta_d,
            eta_kkt,
            obj_primal,
            obj_dual,
            x,
            y,
            outer_iters: 0,
            inner_iters_total: 0,
            cg_iters_total: 0,
            wall_ms: 0.0,
            algorithm,
            converged: false,
            history: Vec::new(),
        }
    }
}
