//! Proximal machinery for the sorted ℓ1 norm `κ_λ(x) = Σ λ_i |x|↓_i`.
//!
//! The prox is computed by mapping `y` to `|y|↓` with a signed permutation,
//! solving the order-constrained QP
//!
//! ```text
//! min ½‖x − w‖² + λᵀx   s.t.  x_1 ≥ x_2 ≥ … ≥ x_n ≥ 0
//! ```
//!
//! with a stack-based pool-adjacent-violators pass, and mapping back.

use crate::error::{check_len, Error, Result};
use crate::problem::LambdaSeq;

/// A signed permutation `π` with `π(y) = |y|↓`.
///
/// `perm[i]` is the source index of the `i`-th largest magnitude and
/// `signs[i]` is the sign of `y[perm[i]]` (so both are indexed by sorted
/// position).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            signs: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `(π v)_i = signs[i] · v[perm[i]]`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.perm
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| s * v[p])
            .collect()
    }

    /// `π⁻¹ z`, the inverse of [`apply`](Self::apply).
    pub fn apply_inverse(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        for ((&p, &s), &zi) in self.perm.iter().zip(&self.signs).zip(z) {
            out[p] = s * zi;
        }
        out
    }
}

/// Stable signed sort: ties keep their original index order and `sign(0) = +1`.
pub fn signed_sort(y: &[f64]) -> SignedPermutation {
    let mut perm: Vec<usize> = (0..y.len()).collect();
    perm.sort_by(|&a, &b| y[b].abs().total_cmp(&y[a].abs()));
    let signs = perm
        .iter()
        .map(|&p| if y[p] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    SignedPermutation { perm, signs }
}

/// A maximal run of equal values `[start, end)` in the sorted solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub value: f64,
}

impl Block {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Solution of the sorted-space QP as a list of constant blocks.
///
/// Consecutive blocks have strictly decreasing values and all values are
/// nonnegative; at most the final block has value exactly `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSolution {
    pub blocks: Vec<Block>,
}

impl SortedSolution {
    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for b in &self.blocks {
            out.extend(std::iter::repeat_n(b.value, b.len()));
        }
        out
    }
}

/// Result of a sorted-ℓ1 prox evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    /// `Prox(y)` in the original coordinates.
    pub x: Vec<f64>,
    /// Block structure of `x_λ(π y)` in sorted coordinates.
    pub blocks: Vec<Block>,
    pub pi: SignedPermutation,
}

impl ProxResult {
    pub fn sorted_values(&self) -> Vec<f64> {
        SortedSolution {
            blocks: self.blocks.clone(),
        }
        .to_vec()
    }
}

/// Solves `min ½‖x − w‖² + λᵀx` over the monotone nonnegative cone.
///
/// Pools adjacent violators of `d = w − λ` on a stack (adjacent blocks with
/// equal pooled value are merged too, so block boundaries are exactly the
/// strict decreases), then replaces every block with a nonpositive value by
/// a single zero block.
pub fn x_lambda(w: &[f64], lam: &LambdaSeq) -> Result<SortedSolution> {
    check_len("x_lambda weights", w.len(), lam.len())?;
    Ok(pava_nonneg(w, lam.as_slice(), 1.0))
}

pub(crate) fn pava_nonneg(w: &[f64], lam: &[f64], scale: f64) -> SortedSolution {
    struct Run {
        start: usize,
        sum: f64,
        count: usize,
        value: f64,
    }

    let mut stack: Vec<Run> = Vec::with_capacity(w.len());
    for (i, (&wi, &li)) in w.iter().zip(lam).enumerate() {
        let d = wi - scale * li;
        let mut run = Run {
            start: i,
            sum: d,
            count: 1,
            value: d,
        };
        while let Some(top) = stack.last() {
            if top.value > run.value {
                break;
            }
            let top = stack.pop().unwrap();
            run.start = top.start;
            run.sum += top.sum;
            run.count += top.count;
            run.value = run.sum / run.count as f64;
        }
        stack.push(run);
    }

    let n = w.len();
    let mut blocks = Vec::with_capacity(stack.len());
    for (k, run) in stack.iter().enumerate() {
        if run.value <= 0.0 {
            blocks.push(Block {
                start: run.start,
                end: n,
                value: 0.0,
            });
            break;
        }
        let end = stack.get(k + 1).map_or(n, |next| next.start);
        blocks.push(Block {
            start: run.start,
            end,
            value: run.value,
        });
    }
    SortedSolution { blocks }
}

/// `Prox_{κ_λ}(y) = π⁻¹ x_λ(π y)`.
pub fn prox_sorted_l1(y: &[f64], lam: &LambdaSeq) -> Result<ProxResult> {
    check_len("prox input", y.len(), lam.len())?;
    Ok(prox_impl(y, lam.as_slice(), 1.0))
}

/// `Prox_{σ κ_λ}(y)`, i.e. the prox with weights `σ λ`.
pub fn prox_scaled(y: &[f64], sigma: f64, lam: &LambdaSeq) -> Result<ProxResult> {
    check_sigma(sigma)?;
    check_len("prox input", y.len(), lam.len())?;
    Ok(prox_impl(y, lam.as_slice(), sigma))
}

pub(crate) fn prox_impl(y: &[f64], lam: &[f64], scale: f64) -> ProxResult {
    let pi = signed_sort(y);
    let w = pi.apply(y);
    let sol = pava_nonneg(&w, lam, scale);
    let x = pi.apply_inverse(&sol.to_vec());
    ProxResult {
        x,
        blocks: sol.blocks,
        pi,
    }
}

/// `Prox_{κ*_λ/σ}(w/σ) = (w − Prox_{σκ_λ}(w)) / σ`; the result lies in `C_λ`.
pub fn prox_conjugate_scaled(w: &[f64], sigma: f64, lam: &LambdaSeq) -> Result<Vec<f64>> {
    let p = prox_scaled(w, sigma, lam)?;
    Ok(w.iter().zip(&p.x).map(|(wi, pi)| (wi - pi) / sigma).collect())
}

/// `max{0, max_i Σ_{j≤i} (|z|↓_j − λ_j)}`; zero iff `z ∈ C_λ`.
pub fn dual_ball_violation(z: &[f64], lam: &LambdaSeq) -> Result<f64> {
    check_len("dual ball vector", z.len(), lam.len())?;
    Ok(dual_ball_violation_impl(z, lam.as_slice()))
}

pub(crate) fn dual_ball_violation_impl(z: &[f64], lam: &[f64]) -> f64 {
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut worst = 0.0f64;
    for (m, l) in mags.iter().zip(lam) {
        acc += m - l;
        worst = worst.max(acc);
    }
    worst
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(v: &[f64]) -> LambdaSeq {
        LambdaSeq::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn signed_sort_examples() {
        let s = signed_sort(&[-3.0, 1.0, 0.0]);
        assert_eq!(s.perm, vec![0, 1, 2]);
        assert_eq!(s.signs, vec![-1.0, 1.0, 1.0]);
        assert_eq!(s.apply(&[-3.0, 1.0, 0.0]), vec![3.0, 1.0, 0.0]);

        let s = signed_sort(&[2.0, -2.0]);
        assert_eq!(s.perm, vec![0, 1]);
        assert_eq!(s.signs, vec![1.0, -1.0]);

        let s = signed_sort(&[5.0, 4.0, 4.0, 0.0]);
        assert_eq!(s, SignedPermutation::identity(4));

        let s = signed_sort(&[0.5, -7.0, 2.0]);
        assert_eq!(s.perm, vec![1, 2, 0]);
        let v = [0.5, -7.0, 2.0];
        assert_eq!(s.apply_inverse(&s.apply(&v)), v.to_vec());
    }

    #[test]
    fn x_lambda_examples() {
        let s = x_lambda(&[3.0, 1.0], &lam(&[2.0, 1.0])).unwrap();
        assert_eq!(s.to_vec(), vec![1.0, 0.0]);
        assert_eq!(
            s.blocks,
            vec![
                Block { start: 0, end: 1, value: 1.0 },
                Block { start: 1, end: 2, value: 0.0 }
            ]
        );

        let s = x_lambda(&[3.0, 3.0], &lam(&[2.0, 1.0])).unwrap();
        assert_eq!(s.to_vec(), vec![1.5, 1.5]);
        assert_eq!(s.blocks.len(), 1);

        let s = x_lambda(&[0.0, 0.0], &LambdaSeq::allow_zero(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(s.to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn x_lambda_accepts_unsorted_input() {
        // d = (-1, 4, 0) pools the first two to 1.5, then 0 stays.
        let s = x_lambda(&[0.0, 5.0, 1.0], &lam(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s.to_vec(), vec![1.5, 1.5, 0.0]);
    }

    #[test]
    fn prox_examples() {
        let l = lam(&[2.0, 1.0]);
        let p = prox_sorted_l1(&[3.0, -3.0], &l).unwrap();
        assert!(close(&p.x, &[1.5, -1.5], 1e-15));
        let p = prox_sorted_l1(&[-3.0, 1.0], &l).unwrap();
        assert!(close(&p.x, &[-1.0, 0.0], 1e-15));

        let zero = LambdaSeq::allow_zero(vec![0.0; 3]).unwrap();
        let y = [0.3, -2.0, 1.25];
        assert_eq!(prox_sorted_l1(&y, &zero).unwrap().x, y.to_vec());
    }

    #[test]
    fn prox_scaled_examples() {
        let l = lam(&[2.0, 1.0]);
        let y = [3.0, -0.5];
        assert_eq!(
            prox_scaled(&y, 1.0, &l).unwrap(),
            prox_sorted_l1(&y, &l).unwrap()
        );
        let p = prox_scaled(&[3.0, 3.0], 2.0, &l).unwrap();
        assert_eq!(p.x, vec![0.0, 0.0]);
        let p = prox_scaled(&[3.0, -3.0], 1e-8, &l).unwrap();
        assert!(close(&p.x, &[3.0, -3.0], 1e-7));
        assert!(prox_scaled(&y, 0.0, &l).is_err());
        assert!(prox_scaled(&y, -1.0, &l).is_err());
    }

    #[test]
    fn conjugate_prox_examples() {
        let l = lam(&[2.0, 1.0]);
        let c = prox_conjugate_scaled(&[3.0, 3.0], 1.0, &l).unwrap();
        assert!(close(&c, &[1.5, 1.5], 1e-15));
        assert_eq!(dual_ball_violation(&c, &l).unwrap(), 0.0);
        assert_eq!(
            prox_conjugate_scaled(&[0.0, 0.0], 3.0, &l).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(prox_conjugate_scaled(&[1.0, 1.0], 0.0, &l).is_err());

        let w = [4.0, -1.0];
        let sigma = 0.7;
        let p = prox_scaled(&w, sigma, &l).unwrap();
        let c = prox_conjugate_scaled(&w, sigma, &l).unwrap();
        for i in 0..2 {
            assert!((p.x[i] + sigma * c[i] - w[i]).abs() <= 1e-12 * w[i].abs().max(1.0));
        }
    }

    #[test]
    fn dual_ball_examples() {
        let l = lam(&[2.0, 1.0]);
        assert_eq!(dual_ball_violation(&[1.0, -3.0], &l).unwrap(), 1.0);
        assert_eq!(dual_ball_violation(&[0.0, 0.0], &l).unwrap(), 0.0);
        assert_eq!(dual_ball_violation(&[2.0, 1.0], &l).unwrap(), 0.0);
        assert!(dual_ball_violation(&[1.0], &l).is_err());
    }

    #[test]
    fn block_values_are_bitwise_equal_within_runs() {
        let w = [0.1, 0.7, 0.3, 0.9, 0.2];
        let l = lam(&[0.05, 0.04, 0.03, 0.02, 0.01]);
        let s = x_lambda(&w, &l).unwrap();
        let v = s.to_vec();
        for b in &s.blocks {
            assert!(v[b.start..b.end].iter().all(|&x| x.to_bits() == b.value.to_bits()));
        }
        for pair in s.blocks.windows(2) {
            assert!(pair[0].value > pair[1].value);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(prox_sorted_l1(&[1.0], &lam(&[1.0, 1.0])).is_err());
        assert!(x_lambda(&[1.0, 2.0, 3.0], &lam(&[1.0])).is_err());
    }
}
