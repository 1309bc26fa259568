use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use tailforge_cli::commands::{self, CliResult, Input};
use tailforge_cli::server::{demo_dataset, router, AppState};
use tailforge_cli::{FitQuery, GofQuery};
use tailforge_core::{ExportFormat, Method};

#[derive(Parser)]
#[command(name = "tailforge", version, about = "Bias-reduced peaks-over-threshold tail estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate path of one method over k.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Confidence level for shape intervals (extended methods).
        #[arg(long)]
        ci: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tail probability at c, or quantile at p, over k.
    Tail {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, conflicts_with = "p")]
        c: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// P-P goodness of fit against GPD(xi0, sigma0).
    Gof {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, allow_negative_numbers = true)]
        xi0: f64,
        #[arg(long)]
        sigma0: f64,
        /// Bernstein degree exponent, m = n^a.
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo experiment from a JSON spec file.
    Simulate {
        spec: PathBuf,
        /// Overrides the spec's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Simulation jobs allowed to run at once.
        #[arg(long, default_value_t = 1)]
        max_jobs: usize,
        /// Do not register the bundled demo dataset.
        #[arg(long)]
        no_demo: bool,
    },
}

#[derive(Args)]
struct InputArgs {
    /// CSV file, one observation per row.
    file: PathBuf,
    /// Column index (0-based) or header name.
    #[arg(long)]
    column: Option<String>,
    /// Whether the first row is a header; sniffed when absent.
    #[arg(long)]
    header: Option<bool>,
}

impl From<InputArgs> for Input {
    fn from(a: InputArgs) -> Self {
        Input { path: a.file, column: a.column, header: a.header }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_parser = parse_method)]
    method: String,
    #[arg(long, conflicts_with_all = ["k_min", "k_max"])]
    k: Option<usize>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho_tilde: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    kstar: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Prior shape guess for the E model's bias term.
    #[arg(long, allow_negative_numbers = true)]
    xi0: Option<f64>,
    /// Choose the hyperparameters by the minimum-variance rule.
    #[arg(long)]
    select: bool,
}

impl FitArgs {
    fn query(self) -> FitQuery {
        FitQuery {
            method: Some(self.method),
            rho: self.rho,
            rho_tilde: self.rho_tilde,
            a: self.a,
            k_star: self.kstar,
            m: self.m,
            xi0: self.xi0,
            k: self.k,
            k_min: self.k_min,
            k_max: self.k_max,
            select: self.select,
            ..FitQuery::default()
        }
    }
}

fn parse_method(s: &str) -> Result<String, String> {
    Method::from_str(s).map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    ExportFormat::from_str(s).map_err(|e| e.to_string())
}

fn threads() -> Option<usize> {
    std::env::var("TAILFORGE_THREADS").ok()?.parse().ok().filter(|&n| n > 0)
}

fn emit(bytes: Vec<u8>, out: Option<PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(&path, bytes).map_err(|source| commands::CliError::Io { path, source }),
        None => {
            let _ = std::io::stdout().write_all(&bytes);
            Ok(())
        }
    }
}

fn serve(host: String, port: u16, max_jobs: usize, demo: bool) -> std::io::Result<()> {
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads() {
        rt.worker_threads(n).max_blocking_threads(n);
    }
    rt.enable_all().build()?.block_on(async move {
        let state = AppState::new(max_jobs);
        if demo {
            state.register(demo_dataset()).expect("empty registry");
        }
        let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(Arc::new(state))).await
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = threads() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Fit { input, fit, ci, out } => {
            let q = FitQuery { ci, ..fit.query() };
            commands::fit(&input.into(), &q).and_then(|b| emit(b, out))
        }
        Command::Tail { input, fit, c, p, out } => {
            let q = FitQuery { c, p, ..fit.query() };
            commands::tail(&input.into(), &q).and_then(|b| emit(b, out))
        }
        Command::Gof { input, xi0, sigma0, a, m, out } => {
            let q = GofQuery { xi0: Some(xi0), sigma0: Some(sigma0), a, m };
            commands::gof(&input.into(), &q).and_then(|b| emit(b, out))
        }
        Command::Simulate { spec, seed, format, out } => {
            commands::simulate(&spec, seed, format).and_then(|b| emit(b, out))
        }
        Command::Serve { port, host, max_jobs, no_demo } => {
            return match serve(host, port, max_jobs, !no_demo) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
