use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

/// Prime number races, explicit formulas over L-function zeros, logarithmic
/// densities and barrier checks.
#[derive(Debug, Parser)]
#[command(name = "primerace", version, args_override_self = true)]
pub struct Cli {
    /// key=value file; its entries act as flags given before the command line ones
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for sieving and sampling
    #[arg(long, global = true, env = "PRIMERACE_THREADS", default_value_t = 1)]
    pub threads: usize,

    /// Directory for outputs and the run manifest
    #[arg(short = 'o', long, global = true, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// Also write SVG plots
    #[arg(long, global = true)]
    pub plot: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sieve to a limit and track the race between residue classes
    #[command(args_override_self = true)]
    Race(RaceArgs),
    /// Estimate the logarithmic density of an ordering
    #[command(args_override_self = true)]
    Density(DensityArgs),
    /// Compare truncated explicit formulas with sieved values
    #[command(args_override_self = true)]
    Explicit(ExplicitArgs),
    /// Check N-independence of zero ordinates
    #[command(args_override_self = true)]
    Independence(IndependenceArgs),
    /// Check which orderings a hypothetical barrier excludes
    #[command(args_override_self = true)]
    Barrier(BarrierArgs),
    /// Evaluate the sum over odd primes of (-1)^((p-1)/2) e^(-p/x)
    #[command(args_override_self = true)]
    Chebyshev(ChebyshevArgs),
    /// Check pi(x,8,1) <= max over a in {3,5,7} of pi(x,8,a) up to a limit
    #[command(args_override_self = true)]
    Shanks(ShanksArgs),
}

/// Parses counts such as `30000` or `1e10`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("'{s}' is not a count"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("'{s}' is not a nonnegative integer"))
    }
}

#[derive(Debug, Args)]
pub struct RaceArgs {
    /// Modulus k
    #[arg(short = 'k', long)]
    pub modulus: u64,
    /// Tracked residues, in order (the first pair is the reported race)
    #[arg(short = 'r', long, value_delimiter = ',', required = true)]
    pub residues: Vec<u64>,
    /// Sieve limit
    #[arg(short = 'x', long, value_parser = parse_count)]
    pub limit: u64,
    /// Bytes of bitmap per sieve segment
    #[arg(long, value_name = "BYTES")]
    pub segment_size: Option<usize>,
    /// Wheel pre-sieve: none, mod30 or mod210
    #[arg(long, default_value = "mod30")]
    pub wheel: String,
    /// Write a checkpoint here when the run ends
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Also checkpoint every this many integers
    #[arg(long, value_name = "X", value_parser = parse_count, requires = "checkpoint")]
    pub checkpoint_every: Option<u64>,
    /// Resume from a checkpoint written by an earlier run
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
    /// Events kept in memory (all events also go to events.csv)
    #[arg(long, default_value_t = 1 << 16)]
    pub ring_capacity: usize,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("method").required(true).args(["gsh", "empirical"])))]
pub struct DensityArgs {
    /// Modulus k
    #[arg(short = 'k', long)]
    pub modulus: u64,
    /// Residues l1,l2,...
    #[arg(short = 'r', long, value_delimiter = ',', required = true)]
    pub residues: Vec<u64>,
    /// Ordering to measure, largest first (default: the residue order)
    #[arg(long, value_delimiter = ',')]
    pub ordering: Vec<u64>,
    /// Monte Carlo over the limiting distribution (needs --zeros)
    #[arg(long, requires = "zeros")]
    pub gsh: bool,
    /// Exact log-measure from sieve data (needs -X)
    #[arg(long, requires = "x_max")]
    pub empirical: bool,
    /// Zero file
    #[arg(long, value_name = "FILE")]
    pub zeros: Option<PathBuf>,
    /// Truncation height (default: the table's completeness height)
    #[arg(short = 'T', long = "tmax")]
    pub tmax: Option<f64>,
    /// Monte Carlo samples
    #[arg(short = 'n', long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Disable the 1 - gamma/T weights
    #[arg(long)]
    pub no_fejer: bool,
    /// Sieve range for --empirical
    #[arg(short = 'X', long, value_parser = parse_count)]
    pub x_max: Option<u64>,
    /// Also tally every ordering of the residues
    #[arg(long)]
    pub all_orderings: bool,
    /// Radii for the tail probe
    #[arg(long, value_delimiter = ',')]
    pub tail_grid: Vec<f64>,
    /// Write this many E-vector draws to evectors.csv
    #[arg(long, value_name = "N", value_parser = parse_count)]
    pub evectors: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExplicitArgs {
    /// Modulus k
    #[arg(short = 'k', long)]
    pub modulus: u64,
    /// The pair l1,l2 for the race difference
    #[arg(short = 'r', long, value_delimiter = ',')]
    pub residues: Vec<u64>,
    /// Zero file
    #[arg(long, value_name = "FILE")]
    pub zeros: PathBuf,
    /// Truncation heights to overlay
    #[arg(short = 'T', long = "tmax", value_delimiter = ',', default_value = "100,10000")]
    pub tmax: Vec<f64>,
    /// Smallest sampled x
    #[arg(long, default_value = "1e3")]
    pub x_min: f64,
    /// Largest sampled x (also the sieve limit)
    #[arg(long, default_value = "1e6")]
    pub x_max: f64,
    /// Log-spaced sample points
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Integral term of f(rho): quadrature or asymptotic
    #[arg(long, default_value = "quadrature")]
    pub mode: String,
    /// Overlay psi(x, chi) for this character label instead of the race difference
    #[arg(long, value_name = "LABEL")]
    pub character: Option<String>,
    /// Also sample A(u) and A*_T(u) over u = log x and write oscillation.json
    #[arg(long)]
    pub oscillation: bool,
    /// N for the Diamond bounds
    #[arg(short = 'N', long, default_value_t = 1)]
    pub diamond_n: u32,
}

#[derive(Debug, Args)]
pub struct IndependenceArgs {
    /// Zero file
    #[arg(long, value_name = "FILE")]
    pub zeros: PathBuf,
    /// 1-based indices into the sorted positive ordinates
    #[arg(long, value_delimiter = ',', required = true)]
    pub subset: Vec<usize>,
    /// Coefficient bound
    #[arg(short = 'N', long)]
    pub n: u32,
    /// Match tolerance (default: 1e-9 times the largest ordinate)
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also check that no zero lies in 0 < gamma <= A off the line
    #[arg(long, value_name = "A")]
    pub haselgrove: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["builtin", "spec"])))]
pub struct BarrierArgs {
    /// Built-in spec (k5)
    #[arg(long)]
    pub builtin: Option<String>,
    /// Barrier spec file
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Ordering to test, largest first
    #[arg(long, value_delimiter = ',', required = true)]
    pub check_ordering: Vec<u64>,
    /// Smallest sampled x
    #[arg(long, default_value = "1e10")]
    pub x_min: f64,
    /// Largest sampled x
    #[arg(long, default_value = "1e30")]
    pub x_max: f64,
    /// Log-spaced sample points
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Override the constant C in the envelope
    #[arg(long = "C", value_name = "C")]
    pub c: Option<f64>,
    /// Override the constant C' in the envelope
    #[arg(long = "Cprime", value_name = "C'")]
    pub c_prime: Option<f64>,
    /// Grid step for the k=5 phase inequality
    #[arg(long, default_value = "1e-4")]
    pub phase_step: f64,
    /// Also tally the orderings visited by the main-term model
    #[arg(long)]
    pub census: bool,
}

#[derive(Debug, Args)]
pub struct ChebyshevArgs {
    /// Scale x
    #[arg(short = 'x', long)]
    pub x: f64,
    /// Largest prime summed (default: ceil(41 x), at least 100)
    #[arg(long, value_parser = parse_count)]
    pub limit: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ShanksArgs {
    /// Check every x up to this limit
    #[arg(short = 'x', long, value_parser = parse_count)]
    pub limit: u64,
}
