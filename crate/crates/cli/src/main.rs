//! `diffusion`: simulate, construct, certify and search from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad input or configuration,
//! 3 no period within the guard, 4 a construction failed to verify, 5 an
//! invalid transfer plan, 6 a certificate found a negative label, 10 a
//! search found a witness.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use diffusion_game::constructions::{
    cubic_tree_witness, layered_witness, path_zero_witness, star_witness,
};
use diffusion_game::coupling::{couple_evolution, CouplingError};
use diffusion_game::encoding::{certify_nonnegativity, decode, initial_encoding, CertifyError};
use diffusion_game::engine::{
    detect_period, parse_plans, random_weak_plan, simulate, weak_step, ChipState, EngineError,
    TransferPlan, DEFAULT_GUARD,
};
use diffusion_game::graph::parse_graph;
use diffusion_game::search::{
    g3_campaign, gdk_scan, tightness_campaign, G3Campaign, GdkScan, SearchConfig,
};

const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Parser)]
#[command(
    name = "diffusion",
    version,
    about = "Diffusion game simulator, certificate checker and witness search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the deterministic game on a graph file.
    Simulate(SimulateArgs),
    /// Write one of the known negative-label constructions and re-verify it.
    Construct(ConstructArgs),
    /// Carry a digraph-encoding certificate along a weak-game evolution.
    Certify(CertifyArgs),
    /// Couple a weak-game evolution with the same evolution minus one chip.
    Couple(CoupleArgs),
    /// Search for starting labels that go negative.
    Search(SearchArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("length").required(true).args(["steps", "to_period"])))]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated labels in vertex order.
    #[arg(long, allow_hyphen_values = true)]
    labels: Option<String>,
    #[arg(long)]
    labels_file: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    /// Run until the evolution repeats and print the period.
    #[arg(long)]
    to_period: bool,
    #[arg(long, default_value_t = DEFAULT_GUARD)]
    guard: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Star,
    CubicTree,
    Layered,
    PathZero,
}

#[derive(Args)]
struct ConstructArgs {
    family: Family,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "T")]
    t: Option<usize>,
    /// Witness file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["plans", "random"])))]
struct CertifyArgs {
    #[arg(long)]
    n: usize,
    /// Plan file: `step` lines, each followed by `u v` transfers.
    #[arg(long)]
    plans: Option<PathBuf>,
    /// Draw uniformly random valid plans.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["plans", "random"])))]
struct CoupleArgs {
    /// Comma-separated starting labels.
    #[arg(long, allow_hyphen_values = true)]
    labels: String,
    /// Vertex (1-based) that loses a chip.
    #[arg(long)]
    remove: usize,
    #[arg(long)]
    plans: Option<PathBuf>,
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Campaign {
    Tightness,
    G3,
    Gdk,
}

#[derive(Args)]
struct SearchArgs {
    campaign: Campaign,
    /// Vertex count (tightness).
    #[arg(long)]
    n: Option<usize>,
    /// Smallest starting label (tightness; default n-2).
    #[arg(long, allow_hyphen_values = true)]
    min: Option<i64>,
    /// Largest starting label (tightness; default n+1).
    #[arg(long, allow_hyphen_values = true)]
    max: Option<i64>,
    /// Window width above the start label (g3, gdk).
    #[arg(long)]
    window: Option<i64>,
    /// Start label (g3 default 3, gdk default 1).
    #[arg(long, allow_hyphen_values = true)]
    start: Option<i64>,
    /// Tree degree (gdk).
    #[arg(long)]
    d: Option<usize>,
    /// Largest tree radius (g3, gdk).
    #[arg(long, default_value_t = 2)]
    radius: usize,
    /// Largest subcubic graph enumerated (g3).
    #[arg(long, default_value_t = 6)]
    max_vertices: usize,
    #[arg(long, default_value_t = DEFAULT_GUARD)]
    horizon: usize,
    #[arg(long, default_value_t = 1 << 22)]
    budget: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    collect_all: bool,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn input(message: impl ToString) -> Self {
        Failure::new(2, message.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let graph = parse_graph(&read(&args.graph)?).map_err(Failure::input)?;
    let text = match (&args.labels, &args.labels_file) {
        (Some(s), None) => s.clone(),
        (None, Some(path)) => read(path)?,
        (Some(_), Some(_)) => {
            return Err(Failure::input(
                "give either --labels or --labels-file, not both",
            ))
        }
        (None, None) => return Err(Failure::input("missing --labels or --labels-file")),
    };
    let w0: ChipState = text.parse().map_err(Failure::input)?;
    if w0.len() != graph.n() {
        return Err(Failure::input(format!(
            "{} labels given for a graph on {} vertices",
            w0.len(),
            graph.n()
        )));
    }
    if args.to_period {
        let report = match detect_period(&graph, &w0, args.guard) {
            Ok(r) => r,
            Err(e @ EngineError::TimedOut { .. }) => return Err(Failure::new(3, e.to_string())),
            Err(e) => return Err(Failure::input(e)),
        };
        let tr = simulate(&graph, &w0, report.preperiod + report.period).map_err(Failure::input)?;
        print!("{tr}");
        println!("T={} k={}", report.preperiod, report.period);
        println!("min_label={}", report.min_label_seen);
    } else {
        let tr = simulate(&graph, &w0, args.steps.unwrap_or(0)).map_err(Failure::input)?;
        print!("{tr}");
    }
    Ok(0)
}

fn cmd_construct(args: ConstructArgs) -> Outcome {
    let need =
        |x: Option<usize>, flag: &str| x.ok_or_else(|| Failure::input(format!("missing --{flag}")));
    let witness = match args.family {
        Family::Star => star_witness(need(args.n, "n")?),
        Family::CubicTree => Ok(cubic_tree_witness()),
        Family::Layered => layered_witness(need(args.d, "d")?, need(args.t, "T")?),
        Family::PathZero => Ok(path_zero_witness()),
    }
    .map_err(Failure::input)?;
    emit(args.out.as_deref(), &witness.to_string())?;
    if let Err(e) = witness.verify() {
        return Err(Failure::new(4, format!("verification failed: {e}")));
    }
    println!(
        "VERIFIED t={} v={}",
        witness.negative_time,
        witness.negative_vertex + 1
    );
    Ok(0)
}

fn random_plans(w0: &ChipState, steps: usize, seed: u64) -> Result<Vec<TransferPlan>, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = w0.clone();
    let mut plans = Vec::with_capacity(steps);
    for _ in 0..steps {
        let plan = random_weak_plan(&w, &mut rng);
        w = weak_step(&w, &plan).map_err(Failure::input)?;
        plans.push(plan);
    }
    Ok(plans)
}

fn cmd_certify(args: CertifyArgs) -> Outcome {
    let start = initial_encoding(args.n).map_err(Failure::input)?;
    let plans = match &args.plans {
        Some(path) => parse_plans(args.n, &read(path)?).map_err(Failure::input)?,
        None => random_plans(&decode(&start), args.steps, args.seed)?,
    };
    match certify_nonnegativity(args.n, &plans) {
        Ok(cert) => {
            emit(args.out.as_deref(), &cert.to_string())?;
            Ok(0)
        }
        Err(e @ CertifyError::InvalidPlan { .. }) => Err(Failure::new(5, e.to_string())),
        Err(e @ CertifyError::NegativeLabel { .. }) => Err(Failure::new(6, e.to_string())),
        Err(e) => Err(Failure::new(6, e.to_string())),
    }
}

fn cmd_couple(args: CoupleArgs) -> Outcome {
    let w0: ChipState = args.labels.parse().map_err(Failure::input)?;
    if args.remove == 0 || args.remove > w0.len() {
        return Err(Failure::input(format!(
            "--remove must be in 1..={}",
            w0.len()
        )));
    }
    let plans = match &args.plans {
        Some(path) => parse_plans(w0.len(), &read(path)?).map_err(Failure::input)?,
        None => random_plans(&w0, args.steps, args.seed)?,
    };
    match couple_evolution(&w0, &plans, args.remove - 1) {
        Ok(evo) => {
            print!("{evo}");
            Ok(0)
        }
        Err(e @ CouplingError::InvalidPlan { .. }) => Err(Failure::new(5, e.to_string())),
        Err(e) => Err(Failure::new(1, e.to_string())),
    }
}

fn cmd_search(args: SearchArgs) -> Outcome {
    let config = SearchConfig {
        horizon: args.horizon,
        budget: args.budget,
        samples: args.samples,
        seed: args.seed,
        collect_all: args.collect_all,
        workers: args.workers,
        ..SearchConfig::default()
    };
    let report = match args.campaign {
        Campaign::Tightness => {
            let n = args
                .n
                .ok_or_else(|| Failure::input("tightness needs --n"))?;
            let n_label = n as i64;
            let config = SearchConfig {
                label_min: args.min.unwrap_or(n_label - 2),
                label_max: args.max.unwrap_or(n_label + 1),
                ..config
            };
            tightness_campaign(n, &config)
        }
        Campaign::G3 => {
            let params = G3Campaign {
                start_label: args.start.unwrap_or(3),
                window: args.window.unwrap_or(1),
                max_radius: args.radius,
                max_vertices: args.max_vertices,
            };
            g3_campaign(&params, &config)
        }
        Campaign::Gdk => {
            let params = GdkScan {
                degree: args.d.ok_or_else(|| Failure::input("gdk needs --d"))?,
                window: args.window.unwrap_or(1),
                start_label: args.start.unwrap_or(1),
                max_radius: args.radius,
            };
            gdk_scan(&params, &config)
        }
    }
    .map_err(Failure::input)?;
    emit(args.out.as_deref(), &report.to_string())?;
    if report.found_witness() {
        eprintln!("witnesses found: {}", report.witnesses.len());
        Ok(10)
    } else {
        Ok(0)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Construct(a) => cmd_construct(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Couple(a) => cmd_couple(a),
        Command::Search(a) => cmd_search(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
