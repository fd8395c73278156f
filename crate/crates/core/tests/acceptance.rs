//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process exits non-zero if
//! any criterion fails.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use common::*;
use slope_newt::jacobian::{
    assemble_newton_operator, jacobian_factors, m_matvec, solve_newton_system, BlockPartition,
    JacobianFactors, LinearSolveConfig, LinearStrategy,
};
use slope_newt::prox::SignedPermutation;
use slope_newt::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn prox_oracle_agreement() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(1..=6);
        let y = random_vector(&mut r, n, 5.0);
        let lam = random_lambda(&mut r, n, 3.0);
        let got = prox_sorted_l1(&y, &LambdaSeq::new(lam.clone()).unwrap()).unwrap();
        worst = worst.max(max_abs_diff(&got.x, &prox_oracle(&y, &lam)));
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs < 10.0,
        format!("1000 cases, max |err| = {worst:.2e} (limit 1e-10), {secs:.2} s (limit 10 s)"),
    )
}

fn factored_jacobian() -> Outcome {
    let mut r = rng(2);
    let (mut err, mut sym, mut idem) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = r.random_range(1..=50);
        let density = r.random::<f64>();
        let gamma: Vec<usize> = (0..n).filter(|_| r.random::<f64>() < density).collect();
        let part = BlockPartition::from_gamma(n, &gamma).unwrap();
        let f = jacobian_factors(&part, SignedPermutation::identity(n)).unwrap();
        let p = f.projector_dense();
        err = err.max((&p - dense_projector(n, &gamma)).amax());
        sym = sym.max((&p - p.transpose()).amax());
        idem = idem.max((&p * &p - &p).amax());
    }
    outcome(
        err <= 1e-12 && sym <= 1e-10 && idem <= 1e-10,
        format!(
            "200 partitions, |H+UUᵀ − dense| = {err:.2e} (limit 1e-12), |P − Pᵀ| = {sym:.2e}, |P² − P| = {idem:.2e} (limit 1e-10)"
        ),
    )
}

fn zero_order_expansion() -> Outcome {
    let mut r = rng(3);
    let mut failures = 0;
    let mut worst = 0.0f64;
    let mut deepest = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=30);
        let y = random_vector(&mut r, n, 3.0);
        let u = random_vector(&mut r, n, 1.0);
        let lam = LambdaSeq::new(random_lambda(&mut r, n, 2.0)).unwrap();
        let base = prox_sorted_l1(&y, &lam).unwrap().x;
        // accept once three consecutive halvings all satisfy the bound
        let mut streak = 0;
        let mut t = 1.0;
        let mut found = None;
        for h in 0..60 {
            let yt: Vec<f64> = y.iter().zip(&u).map(|(a, b)| a + t * b).collect();
            let pt = prox_sorted_l1(&yt, &lam).unwrap();
            let f = JacobianFactors::from_prox(&pt);
            let tu: Vec<f64> = u.iter().map(|v| t * v).collect();
            let mv = m_matvec(&f, &tu).unwrap();
            let res = (0..n).map(|i| (pt.x[i] - base[i] - mv[i]).abs()).fold(0.0, f64::max);
            if res <= 1e-10 {
                streak += 1;
                if streak == 3 {
                    found = Some((h, res));
                    break;
                }
            } else {
                streak = 0;
            }
            t *= 0.5;
        }
        match found {
            Some((h, res)) => {
                worst = worst.max(res);
                deepest = deepest.max(h);
            }
            None => failures += 1,
        }
    }
    outcome(
        failures == 0,
        format!("100 (y, u) pairs, {failures} without a stable t, max residual {worst:.2e} (limit 1e-10), at most {deepest} halvings"),
    )
}

fn strategy_agreement() -> Outcome {
    let mut r = rng(4);
    let cfg = LinearSolveConfig::default();
    let mut worst = 0.0f64;
    let mut vs_dense = 0.0f64;
    let mut ranks = (usize::MAX, 0usize);
    for _ in 0..50 {
        let m = r.random_range(2..=200);
        let n = r.random_range(m / 2 + 1..=3 * m);
        let a = random_matrix(&mut r, m, n);
        let p = ProblemData::dense(a.clone(), DVector::zeros(m)).unwrap();
        let lam = LambdaSeq::new(random_lambda(&mut r, n, 1.0)).unwrap();
        let sigma = 10f64.powf(r.random_range(-1.0..2.0));
        let w = random_vector(&mut r, n, sigma * 1.2);
        let prox = prox_scaled(&w, sigma, &lam).unwrap();
        let f = JacobianFactors::from_prox(&prox);
        ranks = (ranks.0.min(f.r1 + f.r2), ranks.1.max(f.r1 + f.r2));
        let rhs = DVector::from_vec(random_vector(&mut r, m, 1.0));
        let solve = |s| {
            let op = assemble_newton_operator(&p, &f, sigma, Some(s), &cfg).unwrap();
            solve_newton_system(&op, &rhs, 1e-12, 20 * m + 100).unwrap().d
        };
        let d_chol = solve(LinearStrategy::DenseCholesky);
        let d_smw = solve(LinearStrategy::Smw);
        let d_pcg = solve(LinearStrategy::Pcg);
        worst = worst
            .max((&d_chol - &d_smw).amax())
            .max((&d_chol - &d_pcg).amax())
            .max((&d_smw - &d_pcg).amax());
        let q = signed_perm_matrix(&prox.pi.perm, &prox.pi.signs);
        let gamma = active_rows(&prox.sorted_values());
        let v = dense_newton_matrix(&a, &q, &dense_projector(n, &gamma), sigma);
        let d_ref = v.lu().solve(&rhs).unwrap();
        vs_dense = vs_dense.max((&d_ref - &d_chol).amax());
    }
    outcome(
        worst <= 1e-8 && vs_dense <= 1e-8,
        format!(
            "50 systems, r1+r2 in [{}, {}], max pairwise diff {worst:.2e}, vs dense oracle {vs_dense:.2e} (limit 1e-8)",
            ranks.0, ranks.1
        ),
    )
}

/// `I(x)` for a sorted solution, computed from the values alone.
fn active_rows(xs: &[f64]) -> Vec<usize> {
    let n = xs.len();
    (0..n)
        .filter(|&i| if i + 1 < n { xs[i] == xs[i + 1] } else { xs[i] == 0.0 })
        .collect()
}

struct CrossRun {
    alm: SolveReport,
    admm: SolveReport,
    apg: SolveReport,
}

fn cross_solver_runs() -> Vec<(f64, u64, CrossRun)> {
    let cases: Vec<(f64, u64)> = [1e-3, 1e-4]
        .iter()
        .flat_map(|&a| (0..10u64).map(move |s| (a, s)))
        .collect();
    cases
        .into_par_iter()
        .map(|(a, seed)| {
            let inst = synth_instance(200, 2000, 3, 0.1, seed).unwrap();
            let p = &inst.problem;
            let (w1, w2) = oscar_factor_weights(p, a);
            let lam = oscar_weights(w1, w2, p.n()).unwrap();
            let alm = alm_solve(p, &lam, &AlmConfig::default(), None).unwrap();
            let admm_cfg = AdmmConfig { max_iters: 20_000, ..Default::default() };
            let admm = admm_solve(p, &lam, &admm_cfg, None).unwrap();
            let apg_cfg = ApgConfig { max_iters: 20_000, ..Default::default() };
            let apg = apg_solve(p, &lam, &apg_cfg, None).unwrap();
            (a, seed, CrossRun { alm, admm, apg })
        })
        .collect()
}

fn cross_solver(runs: &[(f64, u64, CrossRun)], secs: f64) -> Outcome {
    let mut bad = Vec::new();
    let (mut eta, mut obj, mut outer, mut inner) = (0.0f64, 0.0f64, 0, 0);
    for (a, seed, c) in runs {
        for r in [&c.alm, &c.admm, &c.apg] {
            eta = eta.max(r.eta_g).max(r.eta_d);
            if !(r.converged && r.eta_g <= 1e-6 && r.eta_d <= 1e-6) {
                bad.push(format!("{} a={a:e} seed={seed} not converged", r.algorithm));
            }
        }
        let d = rel(c.alm.obj_primal, c.admm.obj_primal)
            .max(rel(c.alm.obj_primal, c.apg.obj_primal))
            .max(rel(c.admm.obj_primal, c.apg.obj_primal));
        obj = obj.max(d);
        if d > 1e-6 {
            bad.push(format!("a={a:e} seed={seed} objectives differ by {d:.2e}"));
        }
        let work = c.alm.inner_iters_total + c.alm.cg_iters_total;
        outer = outer.max(c.alm.outer_iters);
        inner = inner.max(work);
        if c.alm.outer_iters > 100 || work > 2000 {
            bad.push(format!("a={a:e} seed={seed} newt-alm used {} outer / {work} inner", c.alm.outer_iters));
        }
    }
    if secs >= 300.0 {
        bad.push("over the time limit".into());
    }
    let mut detail = format!(
        "{} instances x 3 solvers, max eta {eta:.2e} (limit 1e-6), max rel Obj_P diff {obj:.2e} (limit 1e-6), newt-alm max {outer} outer (limit 100) / {inner} inner+CG (limit 2000), {secs:.1} s (limit 300 s)",
        runs.len()
    );
    if !bad.is_empty() {
        detail.push_str(&format!("; {}", bad.join("; ")));
    }
    outcome(bad.is_empty(), detail)
}

fn kkt_quality(runs: &[(f64, u64, CrossRun)]) -> Outcome {
    let mut reports: Vec<SolveReport> = runs.iter().map(|(_, _, c)| c.alm.clone()).collect();
    let extra: Vec<SolveReport> = [(50, 200, 1e-1), (50, 200, 1e-2), (100, 500, 1e-3), (300, 100, 1e-3), (80, 1000, 3e-2)]
        .par_iter()
        .enumerate()
        .map(|(k, &(m, n, a))| {
            let inst = synth_instance(m, n, 3, 0.1, 100 + k as u64).unwrap();
            let (w1, w2) = oscar_factor_weights(&inst.problem, a);
            let lam = oscar_weights(w1, w2, n).unwrap();
            alm_solve(&inst.problem, &lam, &AlmConfig::default(), None).unwrap()
        })
        .collect();
    reports.extend(extra);
    let converged: Vec<&SolveReport> = reports.iter().filter(|r| r.converged).collect();
    for (i, r) in reports.iter().enumerate().filter(|(_, r)| !r.converged) {
        println!("  note: instance {i} stopped after {} outer iterations (eta_G {:.2e}, eta_D {:.2e})", r.outer_iters, r.eta_g, r.eta_d);
    }
    let worst = converged.iter().map(|r| r.eta_kkt).fold(0.0, f64::max);
    outcome(
        worst <= 1e-5 && !converged.is_empty(),
        format!("{} of {} instances converged, max kkt residual {worst:.2e} (limit 1e-5)", converged.len(), reports.len()),
    )
}

/// Sorted distinct magnitudes, merging values within a relative 1e-6.
fn distinct_magnitudes(v: &[f64]) -> Vec<f64> {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<f64> = Vec::new();
    for m in mags {
        if out.last().is_none_or(|&l| (l - m).abs() > 1e-6 * l) {
            out.push(m);
        }
    }
    out
}

fn grouping() -> Outcome {
    let (a, b, x_true) = correlated_groups(50, 40, 10, 0.95, 7);
    let p = ProblemData::dense(a, b).unwrap();
    let (w1, w2) = oscar_factor_weights(&p, 1e-2);
    let lam = oscar_weights(w1, w2, p.n()).unwrap();
    let r = alm_solve(&p, &lam, &AlmConfig::default(), None).unwrap();
    let k = r.nnz999;
    let top = path::top_k(r.x.as_slice(), k);
    let mags = distinct_magnitudes(&top.iter().map(|t| t.1).collect::<Vec<_>>());
    let in_groups = top.iter().filter(|t| x_true[t.0] != 0.0).count();
    outcome(
        r.converged && k > 0 && mags.len() <= 4,
        format!(
            "2 true groups of 10, nnz999 = {k} ({in_groups} inside the groups), {} distinct nonzero magnitudes (limit 4): {:.4?}",
            mags.len(),
            mags
        ),
    )
}

fn path_protocol() -> Outcome {
    let t0 = Instant::now();
    let inst = synth_instance(120, 3000, 3, 0.1, 11).unwrap();
    let p = &inst.problem;
    let n = p.n() as f64;
    let mut grid = PathGrid {
        w1: GridSpec { lo: 1e-4, hi: 1e-2, count: 100, spacing: Spacing::Linear },
        w2: W2Rule::Fixed(1.0 / (n * n)),
        top_k: 10,
        warm_start: true,
    };
    let settings = SolverSettings::new(Algorithm::NewtAlm);
    let warm = run_path(p, &grid, &settings, 1).unwrap();
    grid.warm_start = false;
    let workers = std::thread::available_parallelism().map_or(1, |v| v.get());
    let cold = run_path(p, &grid, &settings, workers).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let (wi, ci) = (warm.total_inner_iters(), cold.total_inner_iters());
    let cg = |r: &PathResult| r.points.iter().map(|p| p.report.cg_iters_total).sum::<usize>();
    let nonconv = warm.points.iter().chain(&cold.points).filter(|p| !p.report.converged).count();
    outcome(
        nonconv == 0 && wi <= ci && secs < 600.0,
        format!(
            "100 points, {nonconv} not converged, Newton iterations warm {wi} vs cold {ci} (CG {} vs {}), {secs:.1} s (limit 600 s)",
            cg(&warm),
            cg(&cold)
        ),
    )
}

fn fixed_instance() -> Outcome {
    let p = ProblemData::dense(DMatrix::identity(2, 2), DVector::from_column_slice(&[3.0, 3.0])).unwrap();
    let lam = LambdaSeq::new(vec![2.0, 1.0]).unwrap();
    let mut worst = 0.0f64;
    let mut names = Vec::new();
    for alg in [Algorithm::NewtAlm, Algorithm::Admm, Algorithm::Apg] {
        let r = SolverSettings::new(alg).with_tolerances(1e-14, 1e-14).solve(&p, &lam, None).unwrap();
        let e = max_abs_diff(r.x.as_slice(), &[1.5, 1.5])
            .max(max_abs_diff(r.y.as_slice(), &[-1.5, -1.5]))
            .max((r.obj_primal - 6.75).abs())
            .max((r.obj_dual - 6.75).abs());
        worst = worst.max(e);
        if !r.converged || e > 1e-9 {
            names.push(alg.to_string());
        }
    }
    outcome(
        names.is_empty(),
        format!("newt-alm, admm, apg: max error {worst:.2e} (limit 1e-9){}", if names.is_empty() { String::new() } else { format!("; failing: {}", names.join(", ")) }),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "[{}] {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((name, o));
    };

    run("1 prox vs active-set QP oracle", &prox_oracle_agreement);
    run("2 factored Jacobian vs dense projector", &factored_jacobian);
    run("3 zero-order expansion", &zero_order_expansion);
    run("4 linear-system strategies agree", &strategy_agreement);

    let t = Instant::now();
    let runs = cross_solver_runs();
    let secs = t.elapsed().as_secs_f64();
    run("5 cross-solver agreement", &|| cross_solver(&runs, secs));
    run("6 newt-alm KKT residual", &|| kkt_quality(&runs));

    run("7 grouping effect", &grouping);
    run("8 warm-started path", &path_protocol);
    run("9 fixed 2x2 instance", &fixed_instance);

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
