//! Generalized Jacobian of the sorted-ℓ1 prox and the Newton system
//! `V = I_m + σ A M Aᵀ`.
//!
//! An element `M = π⁻¹ P π` is kept in factored form: `P = H + U Uᵀ` where
//! `H` is a 0/1 diagonal and `U` has one scaled indicator column per pooled
//! group of nonzero coordinates. Only the columns of `A π ᵀ` touched by `H`
//! and `U` enter the Newton system, so its assembly costs `O(m²(r1 + r2))`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::problem::ProblemData;
use crate::prox::{ProxResult, SignedPermutation};

/// Type of a run of consecutive rows of `Σ_Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    /// Rows not in `Γ` (an `O` block).
    Zero,
    /// Rows in `Γ` (an `I` block).
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub len: usize,
    pub kind: RunKind,
}

/// The active row set `Γ` of `B x ≥ 0` and its run-length encoding.
///
/// Row `i < n − 1` of `B` is `x_i − x_{i+1}`; row `n − 1` is `x_{n−1}`
/// (all 0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub n: usize,
    /// Sorted 0-based active rows.
    pub gamma: Vec<usize>,
    pub runs: Vec<Run>,
}

impl BlockPartition {
    /// Builds the partition from an explicit active set.
    pub fn from_gamma(n: usize, gamma: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InconsistentPartition("n must be positive".into()));
        }
        let mut active = vec![false; n];
        for &g in gamma {
            if g >= n {
                return Err(Error::InconsistentPartition(format!(
                    "row {g} out of range for n = {n}"
                )));
            }
            active[g] = true;
        }
        let mut runs: Vec<Run> = Vec::new();
        for &a in &active {
            let kind = if a { RunKind::One } else { RunKind::Zero };
            match runs.last_mut() {
                Some(r) if r.kind == kind => r.len += 1,
                _ => runs.push(Run { len: 1, kind }),
            }
        }
        Ok(Self {
            n,
            gamma: (0..n).filter(|&i| active[i]).collect(),
            runs,
        })
    }

    /// Number of runs `N`.
    pub fn num_runs(&self) -> usize {
        self.runs.len()
    }

    /// 0-based indices of the `One` runs (the set `J`).
    pub fn one_runs(&self) -> Vec<usize> {
        self.runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind == RunKind::One)
            .map(|(i, _)| i)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let total: usize = self.runs.iter().map(|r| r.len).sum();
        if total != self.n {
            return Err(Error::InconsistentPartition(format!(
                "run lengths sum to {total}, expected {}",
                self.n
            )));
        }
        if self.runs.iter().any(|r| r.len == 0) {
            return Err(Error::InconsistentPartition("empty run".into()));
        }
        if self.runs.windows(2).any(|w| w[0].kind == w[1].kind) {
            return Err(Error::InconsistentPartition(
                "consecutive runs share a type".into(),
            ));
        }
        let mut offset = 0;
        let mut expected = Vec::new();
        for r in &self.runs {
            if r.kind == RunKind::One {
                expected.extend(offset..offset + r.len);
            }
            offset += r.len;
        }
        if expected != self.gamma {
            return Err(Error::InconsistentPartition(
                "gamma does not match the runs".into(),
            ));
        }
        Ok(())
    }
}

/// Reads the maximal admissible active set `I(x_λ(w))` off the PAVA blocks:
/// difference rows inside a block are active, and the final nonnegativity
/// row is active iff the last block is zero.
pub fn active_partition(prox: &ProxResult) -> BlockPartition {
    let n = prox.pi.len();
    let mut gamma = Vec::new();
    for b in &prox.blocks {
        gamma.extend(b.start..b.end - 1);
    }
    if prox.blocks.last().is_some_and(|b| b.value == 0.0) {
        gamma.push(n - 1);
    }
    BlockPartition::from_gamma(n, &gamma).expect("PAVA blocks tile 0..n")
}

/// Rows `[start, end)` of a nonzero column of `U`, all equal to `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UBlock {
    pub start: usize,
    pub end: usize,
    pub scale: f64,
}

/// `M = π⁻¹ (H + U Uᵀ) π` in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianFactors {
    pub pi: SignedPermutation,
    /// Diagonal of `H` in sorted coordinates.
    pub h_diag: Vec<bool>,
    pub u_blocks: Vec<UBlock>,
    pub r1: usize,
    pub r2: usize,
}

/// Builds `H` and `U` from the run structure of `Σ_Γ`.
///
/// A `One` run that is not last pools its rows plus the first coordinate of
/// the following `Zero` run into one rank-1 block of size `n_i + 1`; a final
/// `One` run pins its coordinates to zero; the remaining coordinates of
/// `Zero` runs are free (identity).
pub fn jacobian_factors(part: &BlockPartition, pi: SignedPermutation) -> Result<JacobianFactors> {
    part.validate()?;
    check_len("signed permutation", part.n, pi.len())?;

    let n = part.n;
    let last = part.runs.len() - 1;
    let mut h_diag = vec![false; n];
    let mut u_blocks = Vec::new();
    let mut start = 0;
    for (i, run) in part.runs.iter().enumerate() {
        match run.kind {
            RunKind::One if i != last => {
                u_blocks.push(UBlock {
                    start,
                    end: start + run.len + 1,
                    scale: 1.0 / ((run.len + 1) as f64).sqrt(),
                });
            }
            RunKind::One => {}
            RunKind::Zero => {
                let first = if i == 0 { start } else { start + 1 };
                for h in &mut h_diag[first..start + run.len] {
                    *h = true;
                }
            }
        }
        start += run.len;
    }
    let r1 = h_diag.iter().filter(|&&h| h).count();
    let r2 = u_blocks.len();
    Ok(JacobianFactors {
        pi,
        h_diag,
        u_blocks,
        r1,
        r2,
    })
}

impl JacobianFactors {
    /// Convenience: factors for the prox result of the same point.
    pub fn from_prox(prox: &ProxResult) -> Self {
        jacobian_factors(&active_partition(prox), prox.pi.clone())
            .expect("partition built from PAVA blocks is consistent")
    }

    pub fn n(&self) -> usize {
        self.h_diag.len()
    }

    /// `P z` for `z` in sorted coordinates.
    pub fn apply_projector(&self, z: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = z
            .iter()
            .zip(&self.h_diag)
            .map(|(&v, &h)| if h { v } else { 0.0 })
            .collect();
        for b in &self.u_blocks {
            let s: f64 = z[b.start..b.end].iter().sum::<f64>() / (b.end - b.start) as f64;
            for o in &mut out[b.start..b.end] {
                *o += s;
            }
        }
        out
    }

    /// Dense `H + U Uᵀ` (sorted coordinates).
    pub fn projector_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut p = DMatrix::zeros(n, n);
        for (i, &h) in self.h_diag.iter().enumerate() {
            if h {
                p[(i, i)] = 1.0;
            }
        }
        for b in &self.u_blocks {
            let s2 = 1.0 / (b.end - b.start) as f64;
            for i in b.start..b.end {
                for j in b.start..b.end {
                    p[(i, j)] += s2;
                }
            }
        }
        p
    }

    /// Dense `M = π⁻¹ P π` (original coordinates).
    pub fn m_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = self.projector_dense();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (pi, pj) = (self.pi.perm[i], self.pi.perm[j]);
                m[(pi, pj)] = self.pi.signs[i] * self.pi.signs[j] * p[(i, j)];
            }
        }
        m
    }
}

/// `M v = π⁻¹ (H + U Uᵀ) π v`.
pub fn m_matvec(f: &JacobianFactors, v: &[f64]) -> Result<Vec<f64>> {
    check_len("m_matvec input", f.n(), v.len())?;
    let z = f.pi.apply(v);
    Ok(f.pi.apply_inverse(&f.apply_projector(&z)))
}

/// Linear-solve strategy for the Newton system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearStrategy {
    DenseCholesky,
    Smw,
    Pcg,
}

/// Thresholds steering the Newton-system solver.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolveConfig {
    pub direct_max_m: usize,
    pub smw_max_rank: usize,
    pub cg_maxit: usize,
}

impl Default for LinearSolveConfig {
    fn default() -> Self {
        Self {
            direct_max_m: 4000,
            smw_max_rank: 2000,
            cg_maxit: 500,
        }
    }
}

impl LinearSolveConfig {
    pub fn choose(&self, m: usize, rank: usize) -> LinearStrategy {
        if m <= self.direct_max_m && 2 * rank >= m {
            LinearStrategy::DenseCholesky
        } else if 2 * rank < m && rank <= self.smw_max_rank {
            LinearStrategy::Smw
        } else {
            LinearStrategy::Pcg
        }
    }
}

#[derive(Debug, Clone)]
enum Factorization {
    None,
    Dense(Cholesky<f64, Dyn>),
    Gram(Cholesky<f64, Dyn>),
}

/// `V = I_m + σ (V1 V1ᵀ + V2 V2ᵀ)` with `[V1 V2]` stored as one `m × (r1 + r2)`
/// column block.
#[derive(Debug, Clone)]
pub struct NewtonOperator {
    sigma: f64,
    cols: DMatrix<f64>,
    r1: usize,
    strategy: LinearStrategy,
    factor: Factorization,
}

impl NewtonOperator {
    /// Builds the operator directly from its column block. `sigma = 0` is
    /// accepted and yields the identity.
    pub fn from_columns(
        cols: DMatrix<f64>,
        r1: usize,
        sigma: f64,
        strategy: LinearStrategy,
    ) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        if r1 > cols.ncols() {
            return Err(Error::InvalidParameter("r1 exceeds column count".into()));
        }
        let mut op = Self {
            sigma,
            cols,
            r1,
            strategy,
            factor: Factorization::None,
        };
        op.factorize();
        Ok(op)
    }

    fn factorize(&mut self) {
        let m = self.cols.nrows();
        let r = self.cols.ncols();
        self.factor = match self.strategy {
            LinearStrategy::DenseCholesky => {
                let mut v = &self.cols * self.cols.transpose() * self.sigma;
                for i in 0..m {
                    v[(i, i)] += 1.0;
                }
                match Cholesky::new(v) {
                    Some(c) => Factorization::Dense(c),
                    None => {
                        log::warn!("dense Cholesky failed; switching to PCG");
                        self.strategy = LinearStrategy::Pcg;
                        Factorization::None
                    }
                }
            }
            LinearStrategy::Smw if r > 0 => {
                let mut g = self.cols.tr_mul(&self.cols) * self.sigma;
                for i in 0..r {
                    g[(i, i)] += 1.0;
                }
                match Cholesky::new(g) {
                    Some(c) => Factorization::Gram(c),
                    None => {
                        log::warn!("SMW Gram Cholesky failed; switching to PCG");
                        self.strategy = LinearStrategy::Pcg;
                        Factorization::None
                    }
                }
            }
            _ => Factorization::None,
        };
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn m(&self) -> usize {
        self.cols.nrows()
    }

    pub fn r1(&self) -> usize {
        self.r1
    }

    pub fn r2(&self) -> usize {
        self.cols.ncols() - self.r1
    }

    pub fn strategy(&self) -> LinearStrategy {
        self.strategy
    }

    pub fn v1(&self) -> DMatrix<f64> {
        self.cols.columns(0, self.r1).into_owned()
    }

    pub fn v2(&self) -> DMatrix<f64> {
        self.cols
            .columns(self.r1, self.cols.ncols() - self.r1)
            .into_owned()
    }

    /// `v + σ [V1 V2][V1 V2]ᵀ v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.cols.ncols() == 0 {
            return v.clone();
        }
        let t = self.cols.tr_mul(v);
        let mut out = v.clone();
        out.gemv(self.sigma, &self.cols, &t, 1.0);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut v = &self.cols * self.cols.transpose() * self.sigma;
        for i in 0..m {
            v[(i, i)] += 1.0;
        }
        v
    }

    fn jacobi_diag(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.cols
                .row_iter()
                .map(|row| 1.0 + self.sigma * row.norm_squared()),
        )
    }
}

/// Assembles `V = I + σ A M Aᵀ` from the factored Jacobian.
///
/// `V1` holds the sign-permuted columns of `A` selected by `H`; each `V2`
/// column accumulates the signed columns of one `U` block.
pub fn assemble_newton_operator(
    p: &ProblemData,
    f: &JacobianFactors,
    sigma: f64,
    strategy_hint: Option<LinearStrategy>,
    cfg: &LinearSolveConfig,
) -> Result<NewtonOperator> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    check_len("jacobian factors", p.n(), f.n())?;
    let m = p.m();
    let r = f.r1 + f.r2;
    let mut cols = DMatrix::zeros(m, r);
    let a = p.a();
    let mut c = 0;
    for (i, &h) in f.h_diag.iter().enumerate() {
        if h {
            a.axpy_column(
                f.pi.perm[i],
                f.pi.signs[i],
                cols.column_mut(c).as_mut_slice(),
            );
            c += 1;
        }
    }
    for b in &f.u_blocks {
        let mut col = cols.column_mut(c);
        let out = col.as_mut_slice();
        for i in b.start..b.end {
            a.axpy_column(f.pi.perm[i], f.pi.signs[i] * b.scale, out);
        }
        c += 1;
    }
    let strategy = strategy_hint.unwrap_or_else(|| cfg.choose(m, r));
    NewtonOperator::from_columns(cols, f.r1, sigma, strategy)
}

/// Outcome of a Newton-system solve.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub d: DVector<f64>,
    /// True residual `‖V d − rhs‖`.
    pub residual_norm: f64,
    pub cg_iters: usize,
    pub strategy: LinearStrategy,
    /// False when PCG hit its iteration cap above tolerance.
    pub converged: bool,
}

/// Solves `V d = rhs` with the operator's strategy. `cg_tol` bounds the true
/// residual for PCG and is ignored by the direct paths.
pub fn solve_newton_system(
    op: &NewtonOperator,
    rhs: &DVector<f64>,
    cg_tol: f64,
    cg_maxit: usize,
) -> Result<LinearSolve> {
    check_len("newton rhs", op.m(), rhs.len())?;
    let direct = match &op.factor {
        Factorization::Dense(c) => Some(c.solve(rhs)),
        Factorization::Gram(c) => {
            let t = op.cols.tr_mul(rhs);
            let s = c.solve(&t);
            let mut d = rhs.clone();
            d.gemv(-op.sigma, &op.cols, &s, 1.0);
            Some(d)
        }
        Factorization::None if op.cols.ncols() == 0 || op.sigma == 0.0 => Some(rhs.clone()),
        Factorization::None => None,
    };
    if let Some(d) = direct {
        let residual_norm = (op.apply(&d) - rhs).norm();
        return Ok(LinearSolve {
            d,
            residual_norm,
            cg_iters: 0,
            strategy: op.strategy,
            converged: true,
        });
    }
    Ok(pcg(op, rhs, cg_tol, cg_maxit))
}

fn pcg(op: &NewtonOperator, rhs: &DVector<f64>, tol: f64, maxit: usize) -> LinearSolve {
    let diag = op.jacobi_diag();
    let mut x = DVector::zeros(rhs.len());
    let mut r = rhs.clone();
    let mut z = r.component_div(&diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut best = (r.norm(), x.clone());
    let mut iters = 0;
    while iters < maxit && best.0 > tol {
        let q = op.apply(&p);
        let pq = p.dot(&q);
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        iters += 1;
        let rn = r.norm();
        if rn < best.0 {
            best = (rn, x.clone());
        }
        z = r.component_div(&diag);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    let d = best.1;
    let residual_norm = (op.apply(&d) - rhs).norm();
    LinearSolve {
        d,
        residual_norm,
        cg_iters: iters,
        strategy: LinearStrategy::Pcg,
        converged: residual_norm <= tol,
    }
}
