mod commands;
mod output;

use std::cell::RefCell;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flv_core::verify::Exec;
use flv_core::Params;
use serde_json::{json, Map, Value};

use output::{write_table, Format, Table};

/// Sampling, simulation and Monte Carlo checks for two-parameter
/// Fleming-Viot processes.
///
/// Settings come from flags, then FLV_* environment variables, then
/// per-command defaults. Exit status: 0 on success or passed checks, 1 when a
/// check fails, 2 on bad usage or invalid parameters.
#[derive(Debug, Parser)]
#[command(name = "flv", version, allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Discount parameter in (0, 1) [default 0.5]
    #[arg(long, global = true, env = "FLV_ALPHA")]
    alpha: Option<f64>,
    /// Strength parameter, above -alpha [default 0.5 for most commands]
    #[arg(long, global = true, env = "FLV_THETA")]
    theta: Option<f64>,
    /// Base seed; sample or replica i uses stream i [default 20240601]
    #[arg(long, global = true, env = "FLV_SEED")]
    seed: Option<u64>,
    /// Number of samples, paths or Monte Carlo replicas
    #[arg(long, global = true, env = "FLV_SAMPLES")]
    samples: Option<usize>,
    /// Time step of the simulated process
    #[arg(long, global = true, env = "FLV_STEP")]
    step: Option<f64>,
    /// Final time of simulated paths
    #[arg(long, global = true, env = "FLV_HORIZON")]
    horizon: Option<f64>,
    /// Transition or observation time
    #[arg(long, global = true, env = "FLV_TIME")]
    time: Option<f64>,
    /// Write the report here instead of standard output
    #[arg(long, global = true, env = "FLV_OUT")]
    out: Option<PathBuf>,
    /// Output format [default json]
    #[arg(long, global = true, env = "FLV_FORMAT", value_enum)]
    format: Option<Format>,
    /// Worker threads for replicas; results do not depend on it [default 1]
    #[arg(long, global = true, env = "FLV_PARALLEL")]
    parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Independent draws from a law.
    Sample(SampleArgs),
    /// Paths of a process.
    Simulate(SimulateArgs),
    /// Monte Carlo checks against exact values.
    Verify(VerifyArgs),
    /// Applies the ranked generator to a symmetric polynomial and prints 2 B q(x).
    EvalB(EvalBArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleKind {
    /// Ranked Poisson-Dirichlet masses
    Pd,
    /// Poisson-Dirichlet masses at uniform locations
    Pdrm,
    /// Poisson-Dirichlet blocks in size-biased order
    Pdip,
    /// Squared Bessel process of dimension 2 theta at --time, started at --b
    Besq,
    /// Mass of the leftmost descendant of an atom of mass --b
    #[value(name = "L")]
    L,
    /// Descendants of an atom of mass --b at location 0.5
    #[value(name = "Q")]
    Q,
    /// One transition of the superprocess over --time
    Kernel,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SampleArgs {
    what: SampleKind,
    /// Stick-breaking draws per sample
    #[arg(long, default_value_t = 1000)]
    sticks: usize,
    /// Start mass
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Start masses, largest first; a Poisson-Dirichlet start if absent
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimulateKind {
    /// Measure-valued superprocess on the --step grid
    Sssp,
    /// Normalised and time-changed superprocess, recorded every --time
    Fv,
    /// Normalised and time-changed interval-partition evolution
    Pdipe,
    /// Jacobi diffusion
    Jacobi,
    /// Wright-Fisher diffusion on the simplex
    Wf,
    /// Up-down Chinese restaurant process
    Crp,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    what: SimulateKind,
    /// Start masses, largest first; a Poisson-Dirichlet start if absent
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
    /// Stick-breaking draws for a Poisson-Dirichlet interval partition start
    #[arg(long, default_value_t = 1000)]
    sticks: usize,
    /// Diffusion parameters; Jacobi uses the first, Wright-Fisher one per coordinate
    #[arg(long, value_delimiter = ',')]
    r: Vec<f64>,
    /// Second Jacobi parameter
    #[arg(long)]
    r_prime: Option<f64>,
    /// Customers of the restaurant, all at one table at the start
    #[arg(long, default_value_t = 10)]
    customers: u32,
    /// Up-down moves of the restaurant
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Record the restaurant every this many moves
    #[arg(long, default_value_t = 1)]
    every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyKind {
    Moments,
    Totalmass,
    JacobiMarginal,
    Chapman,
    Generator,
    Coupling,
    Reversibility,
    Diversity,
    Laplace,
    Relocation,
    Symbolic,
    Negative,
    Crp,
    /// Every acceptance criterion at its reference settings
    All,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    what: VerifyKind,
    /// Replica counts of `all` are multiplied by this
    #[arg(long, env = "FLV_ACCEPTANCE_SCALE", default_value_t = 1.0)]
    scale: f64,
    /// Moment checks pass within this many standard errors
    #[arg(long, default_value_t = 3.0)]
    se_multiple: f64,
    /// KS checks pass above this p-value
    #[arg(long, default_value_t = 0.01)]
    ks_threshold: f64,
    /// Polynomial for the generator check
    #[arg(long, default_value = "q[1]")]
    poly: String,
    /// Point of the generator check
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.1")]
    x: Vec<f64>,
    /// Decreasing times of the generator slopes
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.005")]
    t_list: Vec<f64>,
    /// Customers of the restaurant check
    #[arg(long, default_value_t = 200)]
    customers: u32,
    /// Up-down moves per restaurant replica
    #[arg(long, default_value_t = 1_000_000)]
    steps: usize,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct EvalBArgs {
    /// Polynomial in q[m] = sum_i x_i^(m+1), e.g. "q[1]q[2] - 0.5*q[3]"
    #[arg(long)]
    poly: String,
    /// Point of the ranked simplex, largest first
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<f64>,
}

/// Resolves settings and remembers the ones a command used.
pub struct Ctx {
    global: Global,
    used: RefCell<Map<String, Value>>,
}

impl Ctx {
    fn note(&self, key: &str, value: Value) {
        self.used.borrow_mut().insert(key.to_string(), value);
    }

    fn pick<T: Copy + Into<Value>>(&self, key: &str, given: Option<T>, default: T) -> T {
        let v = given.unwrap_or(default);
        self.note(key, v.into());
        v
    }

    pub fn alpha(&self) -> f64 {
        self.pick("alpha", self.global.alpha, 0.5)
    }

    pub fn theta_or(&self, default: f64) -> f64 {
        self.pick("theta", self.global.theta, default)
    }

    pub fn params_or(&self, theta: f64) -> flv_core::Result<Params> {
        Params::new(self.alpha(), self.theta_or(theta))
    }

    pub fn exec(&self) -> Exec {
        let seed = self.pick("seed", self.global.seed, 20240601u64);
        let threads = self.pick("parallel", self.global.parallel, 1usize);
        Exec::parallel(seed, threads)
    }

    pub fn samples_or(&self, default: usize) -> usize {
        self.pick("samples", self.global.samples, default)
    }

    pub fn step_or(&self, default: f64) -> f64 {
        self.pick("step", self.global.step, default)
    }

    pub fn horizon_or(&self, default: f64) -> f64 {
        self.pick("horizon", self.global.horizon, default)
    }

    pub fn time_or(&self, default: f64) -> f64 {
        self.pick("time", self.global.time, default)
    }
}

/// A finished command: its table and whether every check passed.
pub struct Outcome {
    pub table: Table,
    pub pass: bool,
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let format = cli.global.format.unwrap_or(Format::Json);
    let out_path = cli.global.out.clone();
    let ctx = Ctx { global: cli.global, used: RefCell::new(Map::new()) };
    let (name, result) = match &cli.command {
        Command::Sample(a) => (format!("sample {}", value_name(a.what)), commands::sample(&ctx, a)),
        Command::Simulate(a) => (format!("simulate {}", value_name(a.what)), commands::simulate(&ctx, a)),
        Command::Verify(a) => (format!("verify {}", value_name(a.what)), commands::verify(&ctx, a)),
        Command::EvalB(a) => ("eval-b".to_string(), commands::eval_b(&ctx, a)),
    };
    let outcome = result.map_err(|e| e.to_string())?;

    let mut header = Map::new();
    header.insert("command".into(), json!(name));
    header.extend(ctx.used.into_inner());
    let mut sink: Box<dyn Write> = match &out_path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| format!("{}: {e}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    match write_table(sink.as_mut(), format, &header, &outcome.table).and_then(|_| sink.flush()) {
        // A reader such as `head` stopped early.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        other => other.map_err(|e| format!("writing output: {e}"))?,
    }
    Ok(if outcome.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
