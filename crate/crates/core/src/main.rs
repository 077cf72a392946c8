use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use conoma::experiment::{solve_scheme, Scheme};
use conoma::network::OptimizerConfig;
use conoma::oracle::GridSpec;
use conoma::rates::{PowerState, RateReport};
use conoma::study::{run_and_record, RunManifest, StudyConfig, MANIFEST};
use conoma::validate::{run_validation, ValidationConfig};
use conoma::{Error, NetworkScenario};

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "conoma", version, about = "Power allocation and link selection for cooperative NOMA VLC/RF networks")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario file and write solution.json.
    Solve(SolveArgs),
    /// Run the sweep study and write the figure CSVs plus manifest.json.
    Experiment(ExperimentArgs),
    /// Check the closed forms and the optimizer against brute force.
    Validate(ValidateArgs),
    /// Draw a random user placement and write it as a scenario file.
    Scenario(ScenarioArgs),
    /// Print the default study configuration.
    Defaults,
}

#[derive(Args)]
struct OptimizerArgs {
    /// Golden-section stopping width (W).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_rounds: Option<usize>,
}

impl OptimizerArgs {
    fn apply(&self, config: &mut OptimizerConfig, overrides: &mut Vec<String>) {
        if let Some(e) = self.epsilon {
            config.epsilon = e;
            overrides.push(format!("epsilon={e}"));
        }
        if let Some(r) = self.max_rounds {
            config.max_rounds = r;
            overrides.push(format!("max_rounds={r}"));
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    scenario: PathBuf,
    /// QoS target per user (bit/s).
    #[arg(long, default_value_t = 1e6)]
    rth: f64,
    #[arg(long, default_value = "conoma-opt")]
    scheme: Scheme,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Study configuration (JSON); omitted keys take their defaults.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Repeat the run recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Restrict to these schemes (repeatable).
    #[arg(long)]
    scheme: Vec<Scheme>,
    /// QoS target held fixed in the alpha sweep and convergence traces (bit/s).
    #[arg(long)]
    rth: Option<f64>,
    /// Alpha held fixed in the QoS-target sweep.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    drops: Option<usize>,
    /// Base seed; drop i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random instances per cell-level property.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Grid points of the per-cell brute-force sweep.
    #[arg(long, default_value_t = GridSpec::CELL_DEFAULT.points_per_axis)]
    grid: usize,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Study configuration supplying layout and physical parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Input(Error),
    Infeasible(String),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let outcome = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Experiment(args) => experiment(args, cli.threads),
        Command::Validate(args) => validate(args),
        Command::Scenario(args) => scenario(args),
        Command::Defaults => print_json(&StudyConfig::default()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn in_context(path: &Path, e: Error) -> Error {
    match e {
        Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        other => other,
    }
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    scheme: Scheme,
    r_th: f64,
    state: &'a PowerState,
    report: &'a RateReport,
    feasible_cells: Vec<usize>,
    rounds: usize,
    ap_iterations: usize,
    converged: bool,
    network_evaluations: usize,
}

fn solve(args: SolveArgs) -> Outcome {
    let scenario = NetworkScenario::read(&args.scenario).map_err(|e| in_context(&args.scenario, e))?;
    let mut optimizer = OptimizerConfig::default();
    args.optimizer.apply(&mut optimizer, &mut Vec::new());
    let solved = solve_scheme(&scenario, args.rth, args.scheme, &optimizer)?;

    let p_max = scenario.params.p_max();
    if let Some(k) = (0..solved.state.n_cells()).find(|&k| !solved.state.cell_is_valid(k, p_max)) {
        return Err(Failure::Invariant(format!("cell {k} has an invalid power split")));
    }
    let report = &solved.report;
    let feasible_cells: Vec<usize> = (0..report.feasible.len()).filter(|&k| report.feasible[k]).collect();
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;
    let path = args.out_dir.join("solution.json");
    write_json(
        &path,
        &SolutionFile {
            scheme: args.scheme,
            r_th: args.rth,
            state: &solved.state,
            report,
            feasible_cells: feasible_cells.clone(),
            rounds: solved.trace.rounds_completed,
            ap_iterations: solved.trace.records.len(),
            converged: solved.trace.converged,
            network_evaluations: solved.trace.golden_evaluations + solved.trace.acceptance_evaluations,
        },
    )?;

    let n = solved.state.n_cells();
    println!("scheme          {}", args.scheme);
    println!("sum rate        {:.6} Mbit/s", report.sum_rate / 1e6);
    println!("jain index      {:.6}", report.jain);
    println!("feasible cells  {}/{n}", feasible_cells.len());
    println!("relayed cells   {}", solved.state.x.iter().filter(|x| **x == 1).count());
    println!("ap iterations   {} in {} rounds", solved.trace.records.len(), solved.trace.rounds_completed);
    println!("wrote           {}", path.display());
    if feasible_cells.is_empty() {
        return Err(Failure::Infeasible(format!("no cell meets {} bit/s", args.rth)));
    }
    Ok(())
}

fn experiment(args: ExperimentArgs, threads: Option<usize>) -> Outcome {
    let (mut config, mut overrides) = match (&args.manifest, &args.config) {
        (Some(path), _) => {
            let m = RunManifest::read(path).map_err(|e| in_context(path, e))?;
            (m.config, m.overrides)
        }
        (None, Some(path)) => (StudyConfig::read(path).map_err(|e| in_context(path, e))?, Vec::new()),
        (None, None) => (StudyConfig::default(), Vec::new()),
    };
    if !args.scheme.is_empty() {
        config.schemes = args.scheme.clone();
        let names: Vec<&str> = args.scheme.iter().map(|s| s.name()).collect();
        overrides.push(format!("schemes={}", names.join(",")));
    }
    if let Some(r) = args.rth {
        if let Some(s) = config.alpha_sweep.as_mut() {
            s.r_th = r;
        }
        if let Some(c) = config.convergence.as_mut() {
            c.r_th = r;
        }
        overrides.push(format!("r_th={r}"));
    }
    if let Some(a) = args.alpha {
        if let Some(s) = config.rth_sweep.as_mut() {
            s.alpha = a;
        }
        overrides.push(format!("alpha={a}"));
    }
    if let Some(d) = args.drops {
        config.drops = d;
        overrides.push(format!("drops={d}"));
    }
    if let Some(s) = args.seed {
        config.base_seed = s;
        overrides.push(format!("base_seed={s}"));
    }
    args.optimizer.apply(&mut config.optimizer, &mut overrides);
    config.validate()?;

    let run = run_and_record(&config, overrides, threads, &args.out_dir)?;
    for r in run.result.results() {
        for p in &r.points {
            println!(
                "{:<13} {:>6} = {:<10} sum rate {:>10.4} Mbit/s  jain {:.4}  relayed {:.3}  infeasible {:.3}",
                r.scheme.name(),
                match r.axis {
                    conoma::experiment::SweepAxis::RTh => "r_th",
                    conoma::experiment::SweepAxis::Alpha => "alpha",
                },
                p.value,
                p.mean_sum_rate / 1e6,
                p.mean_jain,
                p.x1_fraction,
                p.infeasible_fraction,
            );
        }
    }
    println!("wrote {} files to {}", run.manifest.outputs.len(), args.out_dir.display());
    debug_assert!(run.manifest.outputs.iter().any(|o| o == MANIFEST));

    let violations = run.result.dominance_violations();
    if violations > 0 {
        return Err(Failure::Invariant(format!("{violations} paired drops broke scheme dominance")));
    }
    if run.result.infeasible_everywhere() {
        return Err(Failure::Infeasible("every drop of every scheme missed a QoS target".into()));
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> Outcome {
    let config = ValidationConfig {
        seed: args.seed,
        instances: args.instances,
        cell_grid: GridSpec::new(args.grid),
        ..Default::default()
    };
    let outcomes = run_validation(&config)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(Failure::Invariant(format!("{failed} of {} properties failed", outcomes.len())));
    }
    Ok(())
}

fn scenario(args: ScenarioArgs) -> Outcome {
    let config = match &args.config {
        Some(path) => StudyConfig::read(path).map_err(|e| in_context(path, e))?,
        None => StudyConfig::default(),
    };
    let s = NetworkScenario::generate(&config.layout, &config.params, args.alpha, args.seed)?;
    s.write(&args.out).map_err(|e| in_context(&args.out, e))?;
    println!("wrote {}-cell scenario to {}", s.n_cells(), args.out.display());
    Ok(())
}
