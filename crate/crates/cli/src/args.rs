use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use slope_newt::{Algorithm, GridSpec, Spacing, W2Rule};

#[derive(Debug, Parser)]
#[command(name = "slope-newt", version, about = "SLOPE / OSCAR regression solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and write a JSON record.
    Solve(SolveArgs),
    /// Sweep an OSCAR (w1, w2) grid and write one CSV row per point.
    Path(PathArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    NewtAlm,
    Admm,
    Apg,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::NewtAlm => Algorithm::NewtAlm,
            AlgoArg::Admm => Algorithm::Admm,
            AlgoArg::Apg => Algorithm::Apg,
        }
    }
}

/// `m=..,n=..,g=..,sd=..,seed=..`; `g`, `sd` and `seed` default to 1, 0.1 and 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub g: usize,
    pub sd: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn label(&self) -> String {
        format!(
            "synthetic:m={},n={},g={},sd={},seed={}",
            self.m, self.n, self.g, self.sd, self.seed
        )
    }
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (mut m, mut n) = (None, None);
        let mut spec = SyntheticSpec { m: 0, n: 0, g: 1, sd: 0.1, seed: 0 };
        for part in s.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got '{part}'"))?;
            let bad = |e: &dyn std::fmt::Display| format!("invalid value for {k}: {e}");
            match k.trim() {
                "m" => m = Some(v.parse().map_err(|e| bad(&e))?),
                "n" => n = Some(v.parse().map_err(|e| bad(&e))?),
                "g" => spec.g = v.parse().map_err(|e| bad(&e))?,
                "sd" => spec.sd = v.parse().map_err(|e| bad(&e))?,
                "seed" => spec.seed = v.parse().map_err(|e| bad(&e))?,
                other => return Err(format!("unknown key '{other}'")),
            }
        }
        spec.m = m.ok_or("missing m")?;
        spec.n = n.ok_or("missing n")?;
        Ok(spec)
    }
}

fn parse_spacing(s: &str) -> Result<Spacing, String> {
    match s {
        "lin" => Ok(Spacing::Linear),
        "log" => Ok(Spacing::Log),
        other => Err(format!("unknown spacing '{other}' (expected lin or log)")),
    }
}

/// `lo:hi:count[:lin|log]`, log spacing by default.
pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(format!("expected lo:hi:count[:lin|log], got '{s}'"));
    }
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let g = GridSpec {
        lo: num(parts[0])?,
        hi: num(parts[1])?,
        count: parts[2].parse().map_err(|e| format!("'{}': {e}", parts[2]))?,
        spacing: parts.get(3).map_or(Ok(Spacing::Log), |t| parse_spacing(t))?,
    };
    g.values().map_err(|e| e.to_string())?;
    Ok(g)
}

/// `fixed:F`, `scaled`, or `grid:lo:hi:count[:lin|log]`.
pub fn parse_w2_rule(s: &str) -> Result<W2Rule, String> {
    if s == "scaled" {
        return Ok(W2Rule::Scaled);
    }
    if let Some(f) = s.strip_prefix("fixed:") {
        let v: f64 = f.parse().map_err(|e| format!("'{f}': {e}"))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(format!("w2 factor must be nonnegative, got {v}"));
        }
        return Ok(W2Rule::Fixed(v));
    }
    if let Some(g) = s.strip_prefix("grid:") {
        return parse_grid(g).map(W2Rule::Grid);
    }
    Err(format!("expected fixed:F, scaled or grid:lo:hi:count, got '{s}'"))
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "synthetic"])))]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "libsvm", requires = "data")]
    pub format: Format,
    /// LIBSVM only: feature count, when trailing features are all zero.
    #[arg(long, requires = "data")]
    pub num_features: Option<usize>,
    #[arg(long)]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "newt-alm")]
    pub algo: AlgoArg,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_g: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_d: f64,
    /// Outer iterations for newt-alm, iterations for apg and admm.
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Initial σ for newt-alm, fixed σ for admm.
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Worker threads (cold path sweeps).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("weights").required(true).args(["lambda_file", "w1", "oscar_a"])))]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub lambda_file: Option<PathBuf>,
    /// Absolute OSCAR weights `λ_i = w1 + w2 (n − i)`.
    #[arg(long, requires = "w2")]
    pub w1: Option<f64>,
    #[arg(long, requires = "w1")]
    pub w2: Option<f64>,
    /// OSCAR factor: `w1 = a‖Aᵀb‖_∞`, `w2 = w1/√n`.
    #[arg(long)]
    pub oscar_a: Option<f64>,
    /// Number of largest coefficients listed in the record.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Factors of `‖Aᵀb‖_∞`: `lo:hi:count[:lin|log]`.
    #[arg(long, value_parser = parse_grid)]
    pub w1_grid: GridSpec,
    /// `fixed:F` (F·‖Aᵀb‖_∞), `scaled` (w1/√n) or `grid:lo:hi:count[:lin|log]`.
    #[arg(long, value_parser = parse_w2_rule, default_value = "scaled")]
    pub w2_rule: W2Rule,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long, overrides_with = "no_warm")]
    pub warm: bool,
    #[arg(long, overrides_with = "warm")]
    pub no_warm: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl PathArgs {
    pub fn warm_start(&self) -> bool {
        !self.no_warm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_spec_defaults() {
        let s: SyntheticSpec = "m=50,n=200,g=3,seed=7".parse().unwrap();
        assert_eq!(s, SyntheticSpec { m: 50, n: 200, g: 3, sd: 0.1, seed: 7 });
        assert!("n=3".parse::<SyntheticSpec>().is_err());
        assert!("m=3,n=4,q=1".parse::<SyntheticSpec>().is_err());
    }

    #[test]
    fn grids() {
        let g = parse_grid("1e-4:1e-2:3").unwrap();
        assert_eq!(g.spacing, Spacing::Log);
        assert_eq!(parse_grid("0:1:5:lin").unwrap().count, 5);
        assert!(parse_grid("0:1:5").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:3:cubic").is_err());
        assert_eq!(parse_w2_rule("fixed:0.5").unwrap(), W2Rule::Fixed(0.5));
        assert!(matches!(parse_w2_rule("grid:0:1:2:lin").unwrap(), W2Rule::Grid(_)));
        assert!(parse_w2_rule("fixed:-1").is_err());
    }

    #[test]
    fn warm_flags() {
        let base = ["slope-newt", "path", "--synthetic", "m=5,n=5", "--w1-grid", "0.1:0.2:2"];
        let parse = |extra: &[&str]| {
            let v: Vec<&str> = base.iter().chain(extra).copied().collect();
            match Cli::try_parse_from(v).unwrap().command {
                Command::Path(p) => p.warm_start(),
                _ => unreachable!(),
            }
        };
        assert!(parse(&[]));
        assert!(!parse(&["--no-warm"]));
        assert!(parse(&["--no-warm", "--warm"]));
    }
}
