use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npquad::experiments::{run_experiment_with_jobs, ExperimentConfig, Method};
use npquad::numfmt::sig12;
use npquad::quadrature::{discretize_data_with, moment_mismatch, DEFAULT_MAX_NODES};
use npquad::returns::{compare_portfolios, plot_data, ComparisonRow, ReturnsDataset};

mod input;

use input::{parse_gamma_grid, ColumnSpec, GammaGrid, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] npquad::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Core(npquad::Error::InvalidInput(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "npquad",
    version,
    about = "Discretize empirical distributions with Gaussian quadrature"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretize one numeric column into `node,weight` pairs.
    Discretize(DiscretizeArgs),
    /// Optimal stock shares: nonparametric vs Gaussian discretization.
    Portfolio(PortfolioArgs),
    /// Monte Carlo accuracy study on a Gaussian-mixture truth.
    Experiment(ExperimentArgs),
    /// Histogram, kernel density and fitted normal curves for plotting.
    Plotdata(PlotdataArgs),
}

#[derive(Args)]
struct DiscretizeArgs {
    /// Input CSV with a header row.
    input: PathBuf,
    /// Column name or 0-based index.
    #[arg(long, default_value = "0")]
    column: String,
    /// Number of nodes.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// np-gq, gauss-hermite or np-me.
    #[arg(long, default_value = "np-gq", value_parser = parse_method)]
    method: Method,
    /// Print the largest relative error of moments 0..2N-1 to stderr.
    #[arg(long)]
    verify: bool,
    /// Output CSV (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PortfolioArgs {
    /// Input CSV with a header row.
    input: PathBuf,
    /// Stock return column.
    #[arg(long, default_value = "stock")]
    stock: String,
    /// Risk-free return column.
    #[arg(long, default_value = "riskfree")]
    risk_free: String,
    /// Inflation column; without it returns are taken as real.
    #[arg(long)]
    inflation: Option<String>,
    /// Columns hold net rates (0.05) instead of gross returns (1.05).
    #[arg(long)]
    net: bool,
    /// Risk aversions: `lo:hi[:step]` or a comma-separated list.
    #[arg(long, default_value = "1:7:1", value_parser = parse_gamma_grid)]
    gamma: GammaGrid,
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Discretizer for the nonparametric column.
    #[arg(long, default_value = "np-gq", value_parser = parse_method)]
    method: Method,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` config; defaults reproduce the reference grid.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report CSV (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Formatted bias and MAE tables (stderr if omitted).
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Ten replications instead of the configured count.
    #[arg(long)]
    smoke: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlotdataArgs {
    input: PathBuf,
    #[arg(long, default_value = "0")]
    column: String,
    #[arg(long, default_value_t = 30)]
    bins: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: npquad::Error| e.to_string())
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => Ok(std::io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn discretize(args: DiscretizeArgs) -> Result<(), CliError> {
    let data = Table::read(&args.input)?.column(&ColumnSpec(args.column))?;
    let dist = match args.method {
        Method::NpGq => discretize_data_with(&data, args.n, DEFAULT_MAX_NODES.max(args.n))?,
        other => other.discretize(&data, args.n, DEFAULT_MAX_NODES)?,
    };
    let mut out = String::from("node,weight\n");
    for (x, w) in dist.iter() {
        out.push_str(&format!("{},{}\n", sig12(x), sig12(w)));
    }
    emit(args.output.as_deref(), &out)?;
    if args.verify {
        let order = 2 * args.n - 1;
        let worst = moment_mismatch(&dist, &data, order)?
            .into_iter()
            .fold(0.0, f64::max);
        eprintln!(
            "max relative moment error (orders 0..={order}): {}",
            sig12(worst)
        );
    }
    Ok(())
}

fn portfolio(args: PortfolioArgs) -> Result<(), CliError> {
    let table = Table::read(&args.input)?;
    let stock = table.column(&ColumnSpec(args.stock))?;
    let rf = table.column(&ColumnSpec(args.risk_free))?;
    let inflation = args
        .inflation
        .map(|c| table.column(&ColumnSpec(c)))
        .transpose()?;
    let data = if args.net {
        ReturnsDataset::from_net(&stock, &rf, inflation.as_deref())?
    } else {
        ReturnsDataset::new(stock, rf, inflation)?
    };
    let rows = compare_portfolios(&data, &args.gamma.0, args.n, args.method)?;
    let mut out = String::from("gamma,theta_np,theta_gaussian,error\n");
    for row in &rows {
        let line = match row {
            ComparisonRow::Solved {
                gamma,
                theta_np,
                theta_gaussian,
            } => format!(
                "{},{},{},{}",
                sig12(*gamma),
                sig12(*theta_np),
                sig12(*theta_gaussian),
                sig12(row.error().unwrap_or(f64::NAN))
            ),
            ComparisonRow::Degenerate { gamma } => format!("{},0,0,degenerate", sig12(*gamma)),
            ComparisonRow::Failed { gamma, reason } => {
                eprintln!("gamma = {gamma}: {reason}");
                format!("{},,,infeasible", sig12(*gamma))
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    emit(args.output.as_deref(), &out)
}

fn experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_kv_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if args.smoke {
        cfg.replications = 10;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let jobs = if args.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        args.jobs
    };
    let report = run_experiment_with_jobs(&cfg, jobs)?;
    emit(args.output.as_deref(), &report.to_csv())?;
    let tables = report.format_tables();
    match &args.tables {
        Some(path) => fs::write(path, tables)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?,
        None => eprint!("{tables}"),
    }
    Ok(())
}

fn plotdata(args: PlotdataArgs) -> Result<(), CliError> {
    let data = Table::read(&args.input)?.column(&ColumnSpec(args.column))?;
    let p = plot_data(&data, args.bins)?;
    let mut out = String::from("series,x,x_right,y\n");
    for (e, h) in p.histogram.edges.windows(2).zip(&p.histogram.heights) {
        out.push_str(&format!(
            "histogram,{},{},{}\n",
            sig12(e[0]),
            sig12(e[1]),
            sig12(*h)
        ));
    }
    for (name, ys) in [("kde", &p.kde), ("gaussian", &p.gaussian)] {
        for (x, y) in p.grid.iter().zip(ys) {
            out.push_str(&format!("{name},{},,{}\n", sig12(*x), sig12(*y)));
        }
    }
    emit(args.output.as_deref(), &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Discretize(a) => discretize(a),
        Command::Portfolio(a) => portfolio(a),
        Command::Experiment(a) => experiment(a),
        Command::Plotdata(a) => plotdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
