use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dbnverify::abstraction::{BuildOptions, DiscreteDbn, DEFAULT_MAX_ENTRIES};
use dbnverify::checker::{
    monte_carlo, CheckOptions, DenseChecker, InvarianceResult, Method, SumProductEngine, ValueTable,
};
use dbnverify::dump;
use dbnverify::factor_graph::{compile_plan, greedy_ordering, FactorGraph};
use dbnverify::model_file::ModelFile;
use dbnverify::report::{
    compare_bidiagonal, AbstractReport, AbstractionCosts, CheckReport, McConfig, McReport, PlanStats, RunConfig, Timing,
};
use dbnverify::Error;

#[derive(Parser)]
#[command(
    name = "dbnverify",
    version,
    about = "Factored abstraction and invariance checking of linear Gaussian systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the abstraction of a model file and write it as a binary dump.
    Abstract(AbstractArgs),
    /// Compute the invariance probability and its error bound.
    Check(CheckArgs),
    /// Print the elimination plan and its predicted cost.
    Cost(CostArgs),
    /// Compare predicted costs with the explicit hypercube grid.
    Compare(CompareArgs),
    /// Monte Carlo estimate of the invariance probability of the model.
    Mc(McArgs),
}

#[derive(Args)]
struct Caps {
    /// Largest number of stored table entries.
    #[arg(long, default_value_t = DEFAULT_MAX_ENTRIES)]
    max_entries: usize,
    /// Largest dense transition matrix, in entries.
    #[arg(long, default_value_t = CheckOptions::default().max_dense_entries)]
    max_dense_entries: usize,
    /// Largest sum of input and output intermediate sizes in one step.
    #[arg(long, default_value_t = CheckOptions::default().max_intermediate_entries)]
    max_intermediate_entries: usize,
}

impl Caps {
    fn build(&self) -> BuildOptions {
        BuildOptions {
            max_entries: self.max_entries,
            ..Default::default()
        }
    }

    fn check(&self) -> CheckOptions {
        CheckOptions {
            max_dense_entries: self.max_dense_entries,
            max_intermediate_entries: self.max_intermediate_entries,
        }
    }
}

#[derive(Args)]
struct AbstractArgs {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Destination of the abstraction dump.
    #[arg(long)]
    out: PathBuf,
    /// Destination of the JSON report; defaults to the dump path with `.json` appended.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    caps: Caps,
}

#[derive(Args)]
struct CheckArgs {
    /// Model file (JSON); supplies the horizon and the error bound.
    #[arg(long)]
    model: PathBuf,
    /// Use a previously written abstraction instead of rebuilding it.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Multiply by the explicit transition matrix instead of eliminating.
    #[arg(long)]
    dense: bool,
    /// Initial state as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_state)]
    init: Option<State>,
    /// Write the whole value table here as a binary dump.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the JSON report here as well as to standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    caps: Caps,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Bidiagonal,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum, default_value = "bidiagonal")]
    family: Family,
    /// Dimensions, as `a..b`, a comma-separated list, or one number.
    #[arg(long, value_parser = parse_dims, default_value = "1..8")]
    n: Dims,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, visible_alias = "N", default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial state; defaults to the center of the safe set.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_state)]
    init: Option<State>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone)]
struct State(Vec<f64>);

#[derive(Clone)]
struct Dims(Vec<usize>);

fn parse_state(s: &str) -> Result<State, String> {
    s.split(',')
        .map(|t| {
            let x: f64 = t.trim().parse().map_err(|_| format!("`{t}` is not a number"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("`{t}` is not finite"))
            }
        })
        .collect::<Result<_, _>>()
        .map(State)
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{t}` is not a dimension"))
    };
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a == 0 || a > b {
            return Err(format!("empty or invalid range {s}"));
        }
        Ok(Dims((a..=b).collect()))
    } else {
        s.split(',').map(num).collect::<Result<_, _>>().map(Dims)
    }
}

enum Failure {
    Validation(String),
    Cap(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ResourceCap { .. } => Failure::Cap(e.to_string()),
            Error::Quadrature(_) | Error::PowerIteration(_) => Failure::Other(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_model(path: &Path) -> Result<ModelFile, Failure> {
    ModelFile::load(path).map_err(|e| match e {
        Error::Io(io) => Failure::Validation(format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn run_config(file: &ModelFile, dbn: &DiscreteDbn, method: Method, init: Option<Vec<f64>>) -> RunConfig {
    RunConfig {
        n: dbn.dim(),
        horizon: file.horizon,
        bins_per_dim: dbn.counts(),
        method,
        init,
    }
}

fn cmd_abstract(args: AbstractArgs) -> Outcome {
    let file = load_model(&args.model)?;
    let t0 = Instant::now();
    let dbn = file.build(args.caps.build())?;
    let abstraction_seconds = t0.elapsed().as_secs_f64();
    let report = AbstractReport {
        config: run_config(&file, &dbn, Method::SumProduct, None),
        bounds: file.error_report(&dbn)?,
        costs: AbstractionCosts {
            marginals: dbn.marginal_count(false),
            marginals_with_absorbing: dbn.marginal_count(true),
            stored_entries: dbn.cpds().iter().map(|c| c.table().len()).sum(),
        },
        timing: Timing {
            abstraction_seconds,
            check_seconds: 0.0,
        },
    };
    let mut bytes = Vec::new();
    dump::write_dbn(&mut bytes, &dbn)?;
    let text = json(&report)?;
    write_file(&args.out, &bytes)?;
    let sidecar = args.report.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".json");
        p.into()
    });
    write_file(&sidecar, text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Outcome {
    let file = load_model(&args.model)?;
    let init = args.init.map(|s| s.0);
    let t0 = Instant::now();
    let dbn = match &args.dump {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            let dbn = dump::read_dbn(&mut BufReader::new(f))
                .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            if dbn
                .partition()
                .dims()
                .iter()
                .zip(file.safe.lo().iter().zip(file.safe.hi()))
                .any(|(p, (&lo, &hi))| p.lo() != lo || p.hi() != hi)
                || dbn.dim() != file.model.dim()
                || dbn.parent_sets() != file.model.parent_sets()
            {
                return Err(Failure::Validation(
                    "the dump does not belong to this model file".into(),
                ));
            }
            dbn
        }
        None => file.build(args.caps.build())?,
    };
    let abstraction_seconds = t0.elapsed().as_secs_f64();
    if let Some(s0) = &init {
        if s0.len() != dbn.dim() {
            return Err(Failure::Validation(format!(
                "--init has {} coordinates, the model has {}",
                s0.len(),
                dbn.dim()
            )));
        }
        if !file.safe.contains(s0) {
            return Err(Failure::Validation(format!("--init {s0:?} lies outside the safe set")));
        }
    }

    let opts = args.caps.check();
    let fg = FactorGraph::from_dbn(&dbn);
    let plan = compile_plan(&fg, &greedy_ordering(&fg), &dbn.counts())?;
    let stats = PlanStats::new(&plan, file.horizon);
    let t1 = Instant::now();
    let (values, method) = if args.dense {
        let d = DenseChecker::new(&dbn, &opts)?;
        let mut v = ValueTable::ones(dbn.counts(), file.horizon)?;
        for _ in 0..file.horizon {
            v = d.step(&v)?;
        }
        (v, Method::Dense)
    } else {
        let e = SumProductEngine::with_plan(&dbn, plan, &opts)?;
        let mut v = ValueTable::ones(dbn.counts(), file.horizon)?;
        for _ in 0..file.horizon {
            v = e.step(&v)?;
        }
        (v, Method::SumProduct)
    };
    let check_seconds = t1.elapsed().as_secs_f64();
    let bounds = file.error_report(&dbn)?;
    let result = InvarianceResult::from_dbn(&dbn, values, file.horizon, Some(bounds.clone()), method);
    let probability = init.as_deref().map(|s| result.lookup(s)).transpose()?;
    if let Some(path) = &args.out {
        let mut bytes = Vec::new();
        dump::write_values(&mut bytes, &result.values)?;
        write_file(path, &bytes)?;
    }
    let report = CheckReport {
        config: run_config(&file, &dbn, method, init.clone()),
        bounds,
        costs: stats,
        probability,
        timing: Timing {
            abstraction_seconds,
            check_seconds,
        },
    };
    let text = json(&report)?;
    if let Some(path) = &args.report {
        write_file(path, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_cost(args: CostArgs) -> Outcome {
    let file = load_model(&args.model)?;
    let counts = file.counts()?;
    let fg = FactorGraph::new(file.model.parent_sets())?;
    let ordering = greedy_ordering(&fg);
    let plan = compile_plan(&fg, &ordering, &counts)?;
    println!("bins per dimension: {counts:?}");
    print!("{plan}");
    let s = PlanStats::new(&plan, file.horizon);
    println!(
        "horizon {}  marginals {:.3e}  operations {:.3e}  peak memory {:.3e}",
        file.horizon, s.marginals, s.operations, s.peak_memory
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Outcome {
    let Family::Bidiagonal = args.family;
    let dims = args.n.0;
    let report = compare_bidiagonal(dims, args.alpha, args.sigma, args.horizon, args.epsilon)?;
    if let Some(path) = &args.out {
        write_file(path, json(&report)?.as_bytes())?;
    }
    print!("{}", report.text_table());
    Ok(())
}

fn cmd_mc(args: McArgs) -> Outcome {
    let file = load_model(&args.model)?;
    let init = args.init.map_or_else(|| file.safe.center(), |s| s.0);
    let estimate = monte_carlo(&file.model, &file.safe, file.horizon, &init, args.samples, args.seed)?;
    let report = McReport {
        config: McConfig {
            n: file.model.dim(),
            horizon: file.horizon,
            init,
            samples: args.samples,
            seed: args.seed,
        },
        estimate,
    };
    let text = json(&report)?;
    if let Some(path) = &args.out {
        write_file(path, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Abstract(a) => cmd_abstract(a),
        Command::Check(a) => cmd_check(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Mc(a) => cmd_mc(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Cap(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
