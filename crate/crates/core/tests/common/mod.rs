//! Dense reference implementations used as test oracles. Nothing here calls
//! into the solver's prox or Jacobian code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Rows of `B`: `x_i − x_{i+1}` for `i < n − 1`, then `x_{n−1}`.
pub fn b_matrix(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        b[(i, i)] = 1.0;
        if i + 1 < n {
            b[(i, i + 1)] = -1.0;
        }
    }
    b
}

fn rows(b: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), b.ncols(), |r, c| b[(idx[r], c)])
}

/// `I − B_Γᵀ (B_Γ B_Γᵀ)⁻¹ B_Γ`.
pub fn dense_projector(n: usize, gamma: &[usize]) -> DMatrix<f64> {
    let eye = DMatrix::identity(n, n);
    if gamma.is_empty() {
        return eye;
    }
    let bg = rows(&b_matrix(n), gamma);
    let gram = &bg * bg.transpose();
    let inv = gram.try_inverse().expect("rows of B are independent");
    eye - bg.transpose() * inv * bg
}

/// `min ½‖x − w‖² + λᵀx  s.t.  Bx ≥ 0` by enumerating every active subset of
/// the rows of `B` and keeping the best feasible stationary point.
pub fn monotone_qp(w: &[f64], lam: &[f64]) -> Vec<f64> {
    let n = w.len();
    assert!(n <= 12, "enumeration oracle is exponential in n");
    let bm = b_matrix(n);
    let d = DVector::from_iterator(n, w.iter().zip(lam).map(|(a, l)| a - l));
    let objective = |x: &DVector<f64>| {
        let mut v = 0.0;
        for i in 0..n {
            v += 0.5 * (x[i] - w[i]).powi(2) + lam[i] * x[i];
        }
        v
    };
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let x = &dense_projector(n, &active) * &d;
        let bx = &bm * &x;
        let scale = 1.0 + d.amax();
        if bx.iter().any(|&v| v < -1e-12 * scale) {
            continue;
        }
        let f = objective(&x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x));
        }
    }
    best.expect("the zero vector is always feasible").1.as_slice().to_vec()
}

/// Sorted-ℓ1 prox by sorting `|y|`, solving the monotone QP with the
/// enumeration oracle, and undoing the signed sort.
pub fn prox_oracle(y: &[f64], lam: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| y[j].abs().partial_cmp(&y[i].abs()).unwrap());
    let w: Vec<f64> = order.iter().map(|&i| y[i].abs()).collect();
    let xs = monotone_qp(&w, lam);
    let mut x = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        x[i] = y[i].signum() * xs[k];
    }
    x
}

/// `Σ λ_i |x|↓_i`, independent of the library's version.
pub fn sorted_l1(x: &[f64], lam: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.partial_cmp(p).unwrap());
    a.iter().zip(lam).map(|(v, l)| v * l).sum()
}

/// Signed permutation matrix `Q` with `(Qv)_i = signs[i] · v[perm[i]]`.
pub fn signed_perm_matrix(perm: &[usize], signs: &[f64]) -> DMatrix<f64> {
    let n = perm.len();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, perm[i])] = signs[i];
    }
    q
}

/// `I + σ A Qᵀ P Q Aᵀ` formed densely.
pub fn dense_newton_matrix(a: &DMatrix<f64>, q: &DMatrix<f64>, proj: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let m = a.nrows();
    let mm = q.transpose() * proj * q;
    DMatrix::identity(m, m) + sigma * a * mm * a.transpose()
}

/// Non-increasing random weights with `λ_1 > 0`.
pub fn random_lambda<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    let mut lam: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * scale).collect();
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if lam[0] == 0.0 {
        lam[0] = scale;
    }
    lam
}

/// Uniform entries in `[−scale, scale]`, with a few exact ties and zeros
/// mixed in so that degenerate sorts are exercised.
pub fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| (2.0 * rng.random::<f64>() - 1.0) * scale).collect();
    if n >= 2 && rng.random::<f64>() < 0.2 {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        v[j] = if rng.random::<bool>() { v[i] } else { -v[i] };
    }
    if rng.random::<f64>() < 0.1 {
        let i = rng.random_range(0..n);
        v[i] = 0.0;
    }
    v
}

pub fn random_matrix<R: Rng>(rng: &mut R, m: usize, n: usize) -> DMatrix<f64> {
    let s = 1.0 / (m as f64).sqrt();
    DMatrix::from_fn(m, n, |_, _| (2.0 * rng.random::<f64>() - 1.0) * s * 1.7)
}

/// Noiseless instance with two groups of `size` coefficients (values 2 and
/// −1). Columns inside a group share a latent Gaussian factor with weight
/// `√rho`; the remaining columns are independent.
pub fn correlated_groups(m: usize, n: usize, size: usize, rho: f64, seed: u64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    assert!(2 * size <= n);
    let mut r = rng(seed);
    let mut g = || -> f64 { StandardNormal.sample(&mut r) };
    let latent: Vec<Vec<f64>> = (0..2).map(|_| (0..m).map(|_| g()).collect()).collect();
    let s = 1.0 / (m as f64).sqrt();
    let mut a = DMatrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            let e = g();
            a[(i, j)] = s * if j < 2 * size {
                rho.sqrt() * latent[j / size][i] + (1.0 - rho).sqrt() * e
            } else {
                e
            };
        }
    }
    let mut x = DVector::zeros(n);
    for j in 0..size {
        x[j] = 2.0;
        x[size + j] = -1.0;
    }
    let b = &a * &x;
    (a, b, x)
}
