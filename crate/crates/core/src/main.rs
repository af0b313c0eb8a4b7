use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vopskit::cli::{exit, run, Command, Context, Format, Overrides, RunConfig};

/// Bivariate orthogonal polynomials for varying weights.
#[derive(Parser, Debug)]
#[command(name = "vopskit", version)]
struct Args {
    /// Stage to run; `run` follows the config's `outputs` list.
    #[arg(value_enum, default_value = "run")]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Directory for JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Exit 5 when a degree has a rank-deficient joint matrix.
    #[arg(long)]
    strict: bool,
    /// Rescale the weight so that mu(0,0) = 1.
    #[arg(long)]
    normalize: bool,
    /// Decimal digits for the float backend.
    #[arg(long)]
    precision: Option<u32>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(exit::PARSE as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    ExitCode::from(execute(args) as u8)
}

fn execute(args: Args) -> i32 {
    let env_precision = match std::env::var("VOPSKIT_PRECISION") {
        Ok(v) => match v.trim().parse::<u32>() {
            Ok(p) => Some(p),
            Err(_) => {
                eprintln!("error: VOPSKIT_PRECISION must be a positive integer, got {v:?}");
                return exit::PARSE;
            }
        },
        Err(_) => None,
    };
    let ov = Overrides {
        precision: args.precision,
        env_precision,
        normalize: args.normalize,
        format: args.format,
        strict: args.strict,
    };
    let result = std::fs::read_to_string(&args.config)
        .map_err(Into::into)
        .and_then(|text| RunConfig::parse(&text))
        .and_then(|cfg| Context::new(cfg, &ov))
        .and_then(|ctx| run(args.command, &ctx));
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    print!("{}", report.stdout);
    if let Some(dir) = &args.out {
        if let Err(e) = report.write_to(dir) {
            eprintln!("error: writing artifacts: {e}");
            return exit::PARSE;
        }
    }
    report.exit_code
}
