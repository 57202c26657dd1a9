use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdcov::app::{self, Bandwidth, ColumnMap, Command, HRule, OutputFormat, RunConfig};
use rdcov::Order;

#[derive(Parser)]
#[command(name = "rdcov", version, about = "Covariate-adjusted sharp regression discontinuity estimation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the treatment effect from a CSV file.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Largest confounding level a finding survives.
    Sensitivity {
        #[command(flatten)]
        data: DataArgs,
        /// Effect threshold.
        #[arg(long)]
        tau_bar: Option<f64>,
        /// Comma-separated, strictly increasing thresholds.
        #[arg(long, value_delimiter = ',')]
        tau_bar_grid: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo experiment on a built-in or TOML-defined process.
    Simulate {
        /// dgp1, dgp2 or a path to a TOML file.
        #[arg(long)]
        dgp: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        /// Master seed; generated and reported when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Fixed bandwidth.
        #[arg(long)]
        bandwidth: Option<f64>,
        /// cube-root (n^-1/3), undersmooth (0.8 n^-1/3) or a number.
        #[arg(long)]
        h_rule: Option<String>,
        /// Write per-replication values to this CSV file.
        #[arg(long)]
        per_rep_csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Kernel moments, moment matrix and asymptotic constants.
    KernelInfo {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Regularity checklist and population constants of a process.
    Validate {
        /// dgp1, dgp2 or a path to a TOML file.
        #[arg(long)]
        dgp: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with header.
    #[arg(long, short)]
    input: PathBuf,
    /// Bandwidth, or `auto` for 1.06 sd(x) n^(-1/5).
    #[arg(long, short = 'b')]
    bandwidth: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    cutoff: f64,
    #[arg(long, default_value = "y")]
    y_col: String,
    #[arg(long, default_value = "x")]
    x_col: String,
    /// Comma-separated covariate columns (default: z1..zp).
    #[arg(long, value_delimiter = ',')]
    z_cols: Option<Vec<String>>,
    /// Separate bandwidth for the density estimate at the cutoff.
    #[arg(long)]
    density_bandwidth: Option<f64>,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, short, default_value = "triangular")]
    kernel: String,
    /// Local polynomial degree (1 or 2).
    #[arg(long, default_value_t = 1)]
    order: u8,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn usage_error(msg: String) -> ExitCode {
    eprintln!("error (usage): {msg}");
    ExitCode::from(2)
}

fn apply_common(c: &mut RunConfig, common: &CommonArgs) -> Result<(), String> {
    c.kernel = common.kernel.clone();
    c.order = Order::from_degree(common.order).map_err(|e| e.to_string())?;
    c.alpha = common.alpha;
    c.output = match common.format {
        Format::Text => OutputFormat::Text,
        Format::Json => OutputFormat::Json,
    };
    Ok(())
}

fn apply_data(c: &mut RunConfig, d: &DataArgs) -> Result<(), String> {
    c.input_path = Some(d.input.clone());
    c.cutoff = d.cutoff;
    c.density_bandwidth = d.density_bandwidth;
    c.columns = ColumnMap {
        y: d.y_col.clone(),
        x: d.x_col.clone(),
        z: d.z_cols.clone(),
    };
    c.bandwidth = Some(if d.bandwidth == "auto" {
        Bandwidth::Auto
    } else {
        Bandwidth::Value(
            d.bandwidth
                .parse()
                .map_err(|_| format!("bandwidth must be a number or `auto`, got `{}`", d.bandwidth))?,
        )
    });
    Ok(())
}

fn build(cli: Cli) -> Result<(RunConfig, Option<PathBuf>), String> {
    let (config, out) = match cli.command {
        Cmd::Estimate { data, common } => {
            let mut c = RunConfig::new(Command::Estimate);
            apply_data(&mut c, &data)?;
            apply_common(&mut c, &common)?;
            (c, common.out)
        }
        Cmd::Sensitivity {
            data,
            tau_bar,
            tau_bar_grid,
            common,
        } => {
            let mut c = RunConfig::new(Command::Sensitivity);
            apply_data(&mut c, &data)?;
            apply_common(&mut c, &common)?;
            c.tau_bar = tau_bar;
            c.tau_bar_grid = tau_bar_grid;
            (c, common.out)
        }
        Cmd::Simulate {
            dgp,
            n,
            reps,
            seed,
            bandwidth,
            h_rule,
            per_rep_csv,
            common,
        } => {
            let mut c = RunConfig::new(Command::Simulate);
            apply_common(&mut c, &common)?;
            c.dgp = Some(dgp);
            c.n = Some(n);
            c.reps = Some(reps);
            c.seed = seed;
            c.bandwidth = bandwidth.map(Bandwidth::Value);
            c.h_rule = h_rule
                .map(|s| HRule::parse(&s))
                .transpose()
                .map_err(|e| e.to_string())?;
            c.per_rep_csv = per_rep_csv;
            (c, common.out)
        }
        Cmd::KernelInfo { common } => {
            let mut c = RunConfig::new(Command::KernelInfo);
            apply_common(&mut c, &common)?;
            (c, common.out)
        }
        Cmd::Validate { dgp, common } => {
            let mut c = RunConfig::new(Command::Validate);
            apply_common(&mut c, &common)?;
            c.dgp = Some(dgp);
            (c, common.out)
        }
    };
    Ok((config, out))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (config, out) = match build(cli) {
        Ok(v) => v,
        Err(msg) => return usage_error(msg),
    };
    let outcome = app::run(&config);
    let written = match out {
        Some(path) => std::fs::write(&path, &outcome.output),
        None => std::io::stdout().write_all(&outcome.output),
    };
    if let Err(e) = written {
        eprintln!("error (ingestion): cannot write report: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(outcome.exit_code as u8)
}
