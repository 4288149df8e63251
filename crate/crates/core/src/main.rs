use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use relfacts::facts::DEFAULT_THRESHOLD;
use relfacts::oracle::{self, Cx};
use relfacts::report::RunReport;
use relfacts::scenario::{self, RunOptions};

const EXIT_PARSE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "relfacts", version, about = "Observer-relative quantum scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and print its report
    Run {
        path: PathBuf,
        #[arg(long, env = "RELFACTS_SEED")]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Parse and check a scenario file without running it
    Validate { path: PathBuf },
    /// Reference computations by direct summation
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Collapse and unitary probabilities of an amplitude chain
    Chain {
        #[arg(long, allow_hyphen_values = true)]
        wba: String,
        #[arg(long, allow_hyphen_values = true)]
        wcb: String,
    },
    /// Partial trace of a ket or density matrix
    Trace {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        keep: Vec<usize>,
        #[command(flatten)]
        state: StateArgs,
    },
    /// Stability deviation for a basis partition of one subsystem
    Stability {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Index of the subsystem whose basis states are the alternatives
        #[arg(long)]
        partition: usize,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[command(flatten)]
        state: StateArgs,
    },
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct StateArgs {
    /// Comma-separated amplitudes
    #[arg(long, allow_hyphen_values = true)]
    ket: Option<String>,
    /// Comma-separated diagonal of a density matrix
    #[arg(long, allow_hyphen_values = true)]
    rho_diag: Option<String>,
    /// JSON fixture with `dims` and `ket` or `rho`
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

enum Failure {
    Usage(String),
    Parse(String),
    Runtime(String),
    Io(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (code, msg) = match self {
            Failure::Usage(m) => (EXIT_PARSE, format!("usage error: {m}")),
            Failure::Parse(m) => (EXIT_PARSE, m),
            Failure::Runtime(m) => (EXIT_RUNTIME, m),
            Failure::Io(m) => (EXIT_IO, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn parse_file(path: &Path) -> Result<scenario::ScenarioAst, Failure> {
    let source = read(path)?;
    scenario::parse(&source).map_err(|e| Failure::Parse(format!("{}:{e}", path.display())))
}

fn usage(e: relfacts::Error) -> Failure {
    match e {
        relfacts::Error::Usage(m) => Failure::Usage(m),
        other => Failure::Usage(other.to_string()),
    }
}

fn load_state(args: &StateArgs, dims: &[usize]) -> Result<Vec<Vec<Cx>>, Failure> {
    if let Some(ket) = &args.ket {
        return Ok(oracle::density_from_ket(&oracle::parse_complex_list(ket).map_err(usage)?));
    }
    if let Some(diag) = &args.rho_diag {
        let d = oracle::parse_complex_list(diag).map_err(usage)?;
        let n = d.len();
        return Ok((0..n).map(|i| (0..n).map(|j| if i == j { d[i] } else { (0.0, 0.0) }).collect()).collect());
    }
    let path = args.file.as_ref().expect("clap enforces one state source");
    let fixture: oracle::Fixture =
        serde_json::from_str(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if fixture.dims != dims {
        return Err(Failure::Usage(format!("fixture dims {:?} differ from --dims {dims:?}", fixture.dims)));
    }
    fixture.density().map_err(usage)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { path, seed, format, threshold } => {
            if !(threshold.is_finite() && threshold >= 0.0) {
                return Err(Failure::Usage(format!("threshold {threshold} must be a non-negative number")));
            }
            let ast = parse_file(&path)?;
            log::info!("running {} with {} steps", path.display(), ast.steps.len());
            let result = scenario::interpret(&ast, &RunOptions { seed, threshold })
                .map_err(|e| Failure::Runtime(format!("{}:{e}", path.display())))?;
            let report = RunReport::from_result(&result);
            let out = match format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
                Format::Text => report.to_text(),
            };
            print!("{out}");
        }
        Command::Validate { path } => {
            parse_file(&path)?;
        }
        Command::Oracle(OracleCommand::Chain { wba, wcb }) => {
            let wba = oracle::parse_complex_list(&wba).map_err(usage)?;
            let wcb = oracle::parse_complex_list(&wcb).map_err(usage)?;
            let v = oracle::chain(&wba, &wcb).map_err(usage)?;
            println!("p_unitary {}", num(v.p_unitary));
            println!("p_collapse {}", num(v.p_collapse));
            println!("deficit {}", num(v.deficit));
            println!("cross_terms {}", num(v.cross_terms));
        }
        Command::Oracle(OracleCommand::Trace { dims, keep, state }) => {
            let rho = load_state(&state, &dims)?;
            let out = oracle::partial_trace(&rho, &dims, &keep).map_err(usage)?;
            for row in out {
                let cells: Vec<String> = row.iter().map(|&(re, im)| format!("{}{:+.16e}i", num(re), im)).collect();
                println!("{}", cells.join(" "));
            }
        }
        Command::Oracle(OracleCommand::Stability { dims, partition, target, state }) => {
            let rho = load_state(&state, &dims)?;
            let target = oracle::parse_complex_list(&target).map_err(usage)?;
            let v = oracle::stability(&rho, &dims, partition, &target).map_err(usage)?;
            println!("p_direct {}", num(v.p_direct));
            println!("p_composed {}", num(v.p_composed));
            println!("deviation {}", num(v.deviation));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("RELFACTS_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
