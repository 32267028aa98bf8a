use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use stopdet_core::cholesky::{BlockPlan, StopOutcome};
use stopdet_core::data::CsvOptions;
use stopdet_core::pivoted::{self, PivotedStop};
use stopdet_core::{data, kappa_plus, kernels, KernelFamily, KernelSpec, StoppingConfig};
use stopdet_bench::config::{parse_real, parse_synthetic, Algorithm, DataSource, RunConfig};
use stopdet_bench::report::{emit_report, ReportFormat};
use stopdet_bench::sweep::{time_full, time_pivoted, time_stopped};
use stopdet_bench::{run_sweep, BenchError, Result};

#[derive(Parser)]
#[command(name = "stopdet", version, about = "Log-determinant estimation with a stopped Cholesky decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate log det(K + sigma2 I) for one dataset.
    Estimate(EstimateArgs),
    /// Run a parameter sweep described by a config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: ReportFormat,
    },
}

#[derive(clap::Args)]
struct EstimateArgs {
    /// CSV file, or `synthetic:N:DIM[:SEED]`.
    #[arg(long)]
    data: String,
    /// Column schema (one `numeric` or `categorical` per line); required for CSV data.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// The CSV file starts with a header row.
    #[arg(long)]
    header: bool,
    /// Strip quote characters and collapse blanks in CSV fields.
    #[arg(long)]
    preclean: bool,
    #[arg(long, default_value = "rbf", value_parser = parse_kernel)]
    kernel: KernelFamily,
    #[arg(long, default_value = "1", value_parser = parse_real)]
    theta: f64,
    #[arg(long, value_parser = parse_real)]
    lengthscale: f64,
    #[arg(long, default_value = "0.001", value_parser = parse_real)]
    sigma2: f64,
    #[arg(long, default_value = "0.1", value_parser = parse_real)]
    delta: f64,
    #[arg(long, default_value = "0.1", value_parser = parse_real)]
    r: f64,
    #[arg(long, default_value = "blocked", value_parser = parse_algo)]
    algo: Algorithm,
    #[arg(long)]
    block_size: Option<usize>,
    /// Diagonal tolerance of the pivoted baseline.
    #[arg(long, default_value = "0.01", value_parser = parse_real)]
    d: f64,
    /// Seed of the row permutation applied before factorization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse()
}

fn parse_kernel(s: &str) -> std::result::Result<KernelFamily, String> {
    s.parse().map_err(|e: stopdet_core::Error| e.to_string())
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse()
}

fn estimate(args: EstimateArgs) -> Result<serde_json::Value> {
    let source = match parse_synthetic(&args.data) {
        Some(src) => src,
        None => DataSource::Csv {
            path: PathBuf::from(&args.data),
            schema: args
                .schema
                .clone()
                .ok_or_else(|| BenchError::Invalid("--schema is required for CSV data".into()))?,
            options: CsvOptions {
                has_header: args.header,
                preclean: args.preclean,
            },
        },
    };
    let ds = data::permute(source.load()?, args.seed);
    let spec = KernelSpec::new(args.kernel, args.theta, args.lengthscale)?;
    let a = kernels::assemble_matrix(&ds.rows, &spec, args.sigma2)?;
    let n = a.dim();
    let plan = match args.block_size {
        Some(b) => BlockPlan::new(b)?,
        None => BlockPlan::default_for_host(),
    };
    let stop_cfg = StoppingConfig::new(n, args.sigma2, args.delta, args.r, kappa_plus(&spec, args.sigma2))?;

    let mut out = json!({
        "n": n,
        "dim": ds.dim(),
        "kernel": spec.to_string(),
        "sigma2": args.sigma2,
        "delta": args.delta,
        "r": args.r,
        "algorithm": args.algo.as_str(),
        "c_delta": stop_cfg.c_delta(),
    });
    let fields = out.as_object_mut().expect("object literal");
    match args.algo {
        Algorithm::Full => {
            let (log_det, t) = time_full(&a, plan)?;
            fields.insert("stopped".into(), json!(false));
            fields.insert("rows_processed".into(), json!(n));
            fields.insert("estimate".into(), json!(log_det));
            fields.insert("wall_time_s".into(), json!(t.wall_s));
        }
        Algorithm::Rowwise | Algorithm::Blocked => {
            let (outcome, t) = time_stopped(&a, args.algo, plan, &stop_cfg)?;
            fields.insert("stopped".into(), json!(outcome.is_stopped()));
            fields.insert("rows_processed".into(), json!(outcome.rows_processed()));
            fields.insert("estimate".into(), json!(outcome.value()));
            if let StopOutcome::Stopped { lower, upper, .. } = outcome {
                fields.insert("lower".into(), json!(lower));
                fields.insert("upper".into(), json!(upper));
            }
            fields.insert("wall_time_s".into(), json!(t.wall_s));
        }
        Algorithm::Pivoted => {
            let (outcome, t) = time_pivoted(&a, args.d, args.sigma2)?;
            let precision = pivoted::guaranteed_precision_at_stop(&outcome.history);
            let last = outcome.final_step();
            fields.insert(
                "stopped".into(),
                json!(!matches!(outcome.stop, PivotedStop::Completed { .. })),
            );
            fields.insert("rows_processed".into(), json!(outcome.rank));
            fields.insert("estimate".into(), json!(outcome.estimate()));
            fields.insert("lower".into(), json!(last.lower));
            fields.insert("upper".into(), json!(last.upper));
            fields.insert("guaranteed_r".into(), json!(precision.target()));
            fields.insert("precision_defined".into(), json!(precision.is_defined()));
            fields.insert("wall_time_s".into(), json!(t.wall_s));
        }
    }
    if args.r >= 1.0 {
        fields.insert("warning".into(), json!("r>=1"));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => {
            println!("{}", estimate(args)?);
        }
        Command::Bench {
            config,
            out,
            format,
        } => {
            let cfg = RunConfig::from_file(&config)?;
            let records = run_sweep(&cfg)?;
            emit_report(&records, &out, format)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
