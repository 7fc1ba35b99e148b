use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use serde_json::json;
use sparsexec_bench::harness::{self, BANDWIDTH_PROBE_LEN};
use sparsexec_bench::report::{emit_report, OutputFormat};
use sparsexec_bench::{compute_bounds, corpus, BenchError, BenchRecord, BenchResult, SpmvFormat};
use sparsexec_core::formats::mtx;
use sparsexec_core::krylov::{SolverConfig, SolverKind, DEFAULT_GMRES_RESTART};
use sparsexec_core::{create_executor, Executor, ExecutorConfig, ExecutorKind};

#[derive(Parser, Debug)]
#[command(
    name = "sparsexec",
    version,
    about = "Sparse kernel benchmarks and roofline bounds"
)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// reference | parallel | simdevice
    #[arg(long, global = true, default_value = "reference")]
    executor: String,
    #[arg(long, global = true, default_value_t = 32)]
    warp_size: u32,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    in_order: bool,
    /// Scheduler and corpus seed
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 5)]
    reps: usize,
    /// Peak bandwidth in GB/s used for bounds instead of a measurement
    #[arg(long, global = true)]
    bandwidth: Option<f64>,
    /// json | csv | svg
    #[arg(long, global = true, default_value = "json")]
    output: String,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a benchmark
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Print roofline bounds for a bandwidth
    Bounds,
    /// Convert a Matrix Market file to the internal COO or CSR layout (JSON)
    Convert {
        input: PathBuf,
        #[arg(long, default_value = "csr")]
        format: String,
    },
    /// Describe the selected executor
    Info,
    /// Write a synthetic SPD matrix corpus
    GenCorpus {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// copy, mul, add, triad and dot bandwidth
    Stream {
        /// Array lengths in elements
        #[arg(long, value_delimiter = ',', default_value = "100000")]
        sizes: Vec<usize>,
    },
    /// FMA sweep over arithmetic intensities
    Flops {
        #[arg(long, default_value_t = 100_000)]
        size: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8,16,32,64")]
        fma: Vec<u32>,
    },
    /// SpMV over Matrix Market files or directories
    Spmv {
        /// coo | csr; repeat or comma-separate for several
        #[arg(long, value_delimiter = ',', default_value = "coo,csr")]
        format: Vec<String>,
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
    },
    /// Krylov solvers in fixed-iteration mode
    Solve {
        /// cg | bicgstab | cgs | gmres; comma-separate for several
        #[arg(long, value_delimiter = ',', default_value = "cg,bicgstab,cgs,gmres")]
        solver: Vec<String>,
        #[arg(long, default_value = "coo")]
        format: String,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = harness::DEFAULT_SOLVER_ITERATIONS)]
        fixed_iters: usize,
        #[arg(long, default_value_t = DEFAULT_GMRES_RESTART)]
        restart: usize,
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
    },
}

fn build_executor(o: &GlobalOpts) -> BenchResult<Executor> {
    let kind: ExecutorKind = o.executor.parse()?;
    let mut cfg = ExecutorConfig {
        warp_size: o.warp_size,
        in_order: o.in_order,
        seed: o.seed,
        ..ExecutorConfig::default()
    };
    if let Some(w) = o.workers {
        cfg.worker_count = w;
    }
    Ok(create_executor(kind, &cfg)?)
}

fn write_output(o: &GlobalOpts, bytes: &[u8]) -> BenchResult<()> {
    match &o.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn emit(o: &GlobalOpts, records: &[BenchRecord]) -> BenchResult<()> {
    let format: OutputFormat = o.output.parse()?;
    write_output(o, &emit_report(records, format)?)
}

fn solver_configs(
    names: &[String],
    max_iters: usize,
    tol: f64,
    fixed: usize,
    restart: usize,
) -> BenchResult<Vec<SolverConfig>> {
    names
        .iter()
        .map(|s| {
            let kind: SolverKind = s.parse()?;
            let cfg = SolverConfig::new(kind)
                .with_max_iters(max_iters.max(restart))
                .with_tol(tol)
                .with_restart(restart)
                .with_fixed_iters(fixed);
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

fn convert(input: &Path, format: &str) -> BenchResult<serde_json::Value> {
    let file = std::fs::File::open(input)?;
    let coo = mtx::read_matrix_market(&Executor::reference(), BufReader::new(file))?;
    let vals = coo.vals().to_vec()?;
    Ok(match format.parse::<SpmvFormat>()? {
        SpmvFormat::Coo => json!({
            "format": "coo",
            "nrows": coo.nrows(),
            "ncols": coo.ncols(),
            "nnz": coo.nnz(),
            "row_idx": coo.row_idx().to_vec()?,
            "col_idx": coo.col_idx().to_vec()?,
            "vals": vals,
        }),
        SpmvFormat::Csr => {
            let csr = coo.to_csr()?;
            json!({
                "format": "csr",
                "nrows": csr.nrows(),
                "ncols": csr.ncols(),
                "nnz": csr.nnz(),
                "row_ptr": csr.row_ptr().to_vec()?,
                "col_idx": csr.col_idx().to_vec()?,
                "vals": vals,
            })
        }
    })
}

fn run(cli: Cli) -> BenchResult<()> {
    let o = &cli.opts;
    match &cli.command {
        Command::Bench(b) => {
            let exec = build_executor(o)?;
            let records = match b {
                BenchCommand::Stream { sizes } => {
                    harness::run_stream(&exec, sizes, o.reps, o.bandwidth)?
                }
                BenchCommand::Flops { size, fma } => {
                    let bw = match o.bandwidth {
                        Some(bw) => bw,
                        None => harness::measure_bandwidth(
                            &exec,
                            BANDWIDTH_PROBE_LEN.min(*size.max(&1)),
                            o.reps,
                        )?,
                    };
                    harness::run_flops_sweep(&exec, *size, fma, o.reps, Some(bw))?
                }
                BenchCommand::Spmv { format, corpus } => {
                    let formats = format
                        .iter()
                        .map(|f| f.parse())
                        .collect::<BenchResult<Vec<SpmvFormat>>>()?;
                    let files = harness::collect_corpus(corpus)?;
                    harness::run_spmv_bench(&exec, &files, &formats, o.reps, o.bandwidth)?
                }
                BenchCommand::Solve {
                    solver,
                    format,
                    max_iters,
                    tol,
                    fixed_iters,
                    restart,
                    corpus,
                } => {
                    let cfgs = solver_configs(solver, *max_iters, *tol, *fixed_iters, *restart)?;
                    let files = harness::collect_corpus(corpus)?;
                    harness::run_solver_corpus(&exec, &files, format.parse()?, &cfgs, o.bandwidth)?
                }
            };
            emit(o, &records)
        }
        Command::Bounds => {
            let bw = o
                .bandwidth
                .ok_or_else(|| BenchError::Usage("bounds needs --bandwidth".into()))?;
            let model = compute_bounds(bw)?;
            let text = match o.output.parse::<OutputFormat>()? {
                OutputFormat::Json => serde_json::to_string_pretty(&model)? + "\n",
                OutputFormat::Csv => format!(
                    "peak_bandwidth,coo_bound,csr_bound,solver_bound\n{:?},{:?},{:?},{:?}\n",
                    model.peak_bandwidth, model.coo_bound, model.csr_bound, model.solver_bound
                ),
                OutputFormat::Svg => {
                    return Err(BenchError::Usage("bounds has no svg output".into()))
                }
            };
            write_output(o, text.as_bytes())
        }
        Command::Convert { input, format } => {
            let value = convert(input, format)?;
            write_output(o, (serde_json::to_string(&value)? + "\n").as_bytes())
        }
        Command::Info => {
            let exec = build_executor(o)?;
            write_output(o, exec.descriptor().to_string().as_bytes())
        }
        Command::GenCorpus { count, dir } => {
            let paths = corpus::generate_corpus(dir, *count, o.seed)?;
            println!("wrote {} matrices to {}", paths.len(), dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
