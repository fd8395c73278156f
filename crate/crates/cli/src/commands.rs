use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use slope_newt::path::top_k;
use slope_newt::{
    oscar_factor_weights, oscar_weights, run_path, synth_instance, LambdaSeq, PathGrid,
    ProblemData, SolverSettings,
};

use crate::args::{DataArgs, Format, PathArgs, SolveArgs, SolverArgs};
use crate::io::{read_csv, read_lambda, read_libsvm};
use crate::record::{path_header, path_row, trace_row, LambdaSource, Num, ResultRecord, TRACE_HEADER};

pub const THREADS_ENV: &str = "SLOPE_NEWT_THREADS";

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

/// Thread cap from `SLOPE_NEWT_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}='{v}' is not a thread count"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn load(data: &DataArgs) -> Result<(ProblemData, String)> {
    if let Some(spec) = &data.synthetic {
        let inst = synth_instance(spec.m, spec.n, spec.g, spec.sd, spec.seed)
            .context("building synthetic instance")?;
        return Ok((inst.problem, spec.label()));
    }
    let path = data.data.as_deref().expect("clap enforces a data source");
    let p = match data.format {
        Format::Libsvm => read_libsvm(path, data.num_features),
        Format::Csv => {
            if data.num_features.is_some() {
                bail!("--num-features applies to LIBSVM input only");
            }
            read_csv(path)
        }
    }
    .with_context(|| format!("reading {}", path.display()))?;
    Ok((p, format!("file:{}", path.display())))
}

fn settings(args: &SolverArgs) -> Result<SolverSettings> {
    let mut s = SolverSettings::new(args.algo.into()).with_tolerances(args.tol_g, args.tol_d);
    if let Some(k) = args.max_outer {
        s.alm.max_outer = k;
        s.apg.max_iters = k;
        s.admm.max_iters = k;
    }
    if let Some(sigma) = args.sigma0 {
        s.alm.sigma0 = Some(sigma);
        s.admm.sigma = sigma;
    }
    s.alm.validate()?;
    s.apg.validate()?;
    s.admm.validate()?;
    Ok(s)
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn weights(args: &SolveArgs, p: &ProblemData) -> Result<(LambdaSeq, LambdaSource)> {
    if let Some(path) = &args.lambda_file {
        let lam = read_lambda(path, p.n()).with_context(|| format!("reading {}", path.display()))?;
        return Ok((lam, LambdaSource::File { path: path.display().to_string() }));
    }
    if let Some(a) = args.oscar_a {
        if !(a > 0.0 && a.is_finite()) {
            bail!("--oscar-a must be positive, got {a}");
        }
        let (w1, w2) = oscar_factor_weights(p, a);
        let lam = oscar_weights(w1, w2, p.n())?;
        return Ok((lam, LambdaSource::OscarFactor { a: Num(a), w1: Num(w1), w2: Num(w2) }));
    }
    let (w1, w2) = (args.w1.unwrap_or(0.0), args.w2.unwrap_or(0.0));
    Ok((oscar_weights(w1, w2, p.n())?, LambdaSource::Oscar { w1: Num(w1), w2: Num(w2) }))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<Outcome> {
    let settings = settings(&args.solver)?;
    let (p, instance) = load(&args.data)?;
    let (lam, source) = weights(args, &p)?;
    let report = settings.solve(&p, &lam, None)?;

    let top = top_k(report.x.as_slice(), args.top_k);
    let record = ResultRecord::new(instance, source, &report, &top);
    let mut out = writer(args.out.as_deref())?;
    writeln!(out, "{}", record.to_json()?)?;
    out.flush()?;

    if let Some(path) = &args.trace {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(TRACE_HEADER)?;
        for h in &report.history {
            w.write_record(trace_row(h))?;
        }
        w.flush()?;
    }
    Ok(if report.converged { Outcome::Converged } else { Outcome::NotConverged })
}

pub fn cmd_path(args: &PathArgs) -> Result<Outcome> {
    let settings = settings(&args.solver)?;
    let (p, _) = load(&args.data)?;
    let grid = PathGrid {
        w1: args.w1_grid.clone(),
        w2: args.w2_rule.clone(),
        top_k: args.top_k,
        warm_start: args.warm_start(),
    };
    let cap = thread_cap()?;
    let mut workers = args.solver.workers.unwrap_or_else(rayon::current_num_threads);
    if let Some(c) = cap {
        workers = workers.min(c);
    }
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    let res = run_path(&p, &grid, &settings, workers)?;

    let mut w = csv::Writer::from_writer(writer(args.out.as_deref())?);
    w.write_record(path_header(args.top_k))?;
    for pt in &res.points {
        w.write_record(path_row(pt.w1, pt.w2, &pt.report, &pt.top, args.top_k))?;
    }
    w.flush()?;

    let steps: Vec<usize> = res.points.iter().map(|pt| pt.report.nnz999).collect();
    if steps.len() > 1 {
        let up = steps.windows(2).filter(|s| s[1] >= s[0]).count();
        log::info!(
            "nnz999 non-decreasing in {up} of {} consecutive pairs",
            steps.len() - 1
        );
    }
    Ok(if res.all_converged() { Outcome::Converged } else { Outcome::NotConverged })
}
