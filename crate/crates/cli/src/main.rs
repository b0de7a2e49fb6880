use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qre_cli::bench::{cmd_bench, to_csv, BenchParams, Suite};
use qre_cli::commands::{cmd_qkd, cmd_solve, SolveFlags, TwoPhase};
use qre_cli::generate::{generate, write_generated, Family, GenParams, MatrixKind, Structure};
use qre_cli::CliError;

#[derive(Parser)]
#[command(name = "qre", version, about = "Quantum relative entropy programs: solve, generate, key rates, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Relative stopping tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Predictor iteration cap.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    #[arg(long = "two-phase", global = true, value_enum, default_value = "off")]
    two_phase: TwoPhase,
    /// Phase-I passes for the two-phase method.
    #[arg(long = "fr-rounds", global = true, default_value_t = 1)]
    fr_rounds: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (solve, qkd, bench) or output stem (gen).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for bench.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file.
    Solve { path: PathBuf },
    /// Generate an instance of a benchmark family.
    Gen {
        family: Family,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long = "M", value_enum, default_value = "2I")]
        matrix: MatrixKind,
        #[arg(long, value_enum, default_value = "tridiag")]
        structure: Structure,
        #[arg(long, allow_negative_numbers = true)]
        lower: Option<f64>,
    },
    /// Key rate of a protocol file.
    Qkd { path: PathBuf },
    /// Run a benchmark suite and print CSV.
    Bench {
        suite: Suite,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        ranks: Vec<usize>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let flags = SolveFlags {
        tol: cli.tol,
        max_iter: cli.max_iter,
        two_phase: cli.two_phase,
        fr_rounds: cli.fr_rounds,
        seed: cli.seed,
    };
    let out = cli.out.as_deref();
    match cli.command {
        Command::Solve { path } => {
            let res = cmd_solve(&path, &flags)?;
            emit(out, &res.to_json())?;
            Ok(res.is_optimal())
        }
        Command::Qkd { path } => {
            let res = cmd_qkd(&path, &flags)?;
            emit(out, &res.to_json())?;
            Ok(res.is_optimal())
        }
        Command::Gen {
            family,
            n,
            m,
            k,
            r,
            gamma,
            matrix,
            structure,
            lower,
        } => {
            let stem = out.ok_or_else(|| CliError::BadParams("gen needs --out <stem>".into()))?;
            let params = GenParams {
                n,
                m,
                k,
                r,
                gamma,
                matrix,
                structure,
                lower,
            };
            let gen = generate(family, &params, cli.seed)?;
            for p in write_generated(&gen, stem)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Bench { suite, sizes, ranks } => {
            let params = BenchParams {
                sizes,
                ranks,
                jobs: cli.jobs,
            };
            let rows = cmd_bench(suite, &params, &flags)?;
            emit(out, to_csv(&rows)?.trim_end())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
