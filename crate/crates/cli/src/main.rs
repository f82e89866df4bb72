use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use loadeval::arima::{acf, pacf};
use loadeval::config::{evaluate, Config};
use loadeval::report::{assemble, load_runs, render, ReportFormat};
use loadeval::series::{clean, ingest_csv, parse_timestamp};
use loadeval::synthetic::{generate_synthetic, SyntheticSpec};
use loadeval::{Error, ErrorClass, Granularity, Result};

#[derive(Parser, Debug)]
#[command(name = "loadeval", author, version, about = "Backtest load forecasts and score them per application profile", long_about = None)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every plan in a config and write runs plus reports
    Evaluate {
        /// JSON config file
        #[arg(long)]
        config: PathBuf,

        /// Output directory (overrides the config's output_dir)
        #[arg(long)]
        out: Option<PathBuf>,

        /// Seed for synthetic data (overrides the config's seed)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write synthetic series and feature CSVs
    GenData {
        /// JSON synthetic-data spec
        #[arg(long)]
        spec: PathBuf,

        /// Output directory
        #[arg(long)]
        out: PathBuf,

        /// Generator seed
        #[arg(long)]
        seed: u64,
    },
    /// Rebuild measure reports from saved runs
    Report {
        /// Directory holding *.run.json and *.cost.json files
        #[arg(long)]
        runs: PathBuf,

        /// Output format
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print sample ACF and PACF of a series
    Acf {
        /// Series CSV (timestamp,kwh)
        #[arg(long)]
        series: PathBuf,

        /// Largest lag to report
        #[arg(long)]
        max_lag: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Fit => 4,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Evaluate { config, out, seed } => {
            let mut cfg = Config::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let ev = evaluate(&cfg, &out)?;
            log::info!("{} report rows", ev.reports.len());
            for path in &ev.report_files {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::GenData { spec, out, seed } => gen_data(&spec, &out, seed),
        Command::Report { runs, format } => {
            let (runs, registry) = load_runs(&runs)?;
            let reports = assemble(&runs, &registry)?;
            print!("{}", render(&reports, format.into())?);
            Ok(())
        }
        Command::Acf { series, max_lag } => print_acf(&series, max_lag),
    }
}

fn gen_data(spec_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    let spec: SyntheticSpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    fs::create_dir_all(out)?;
    for entity in generate_synthetic(seed, &spec)? {
        let id = entity.series.entity_id().to_owned();
        let series_path = out.join(format!("{id}.csv"));
        entity.series.emit_csv(&series_path)?;
        entity.features.emit_csv(out.join(format!("{id}.features.csv")))?;
        println!("{}", series_path.display());
    }
    Ok(())
}

/// Daily spacing between the first two readings means 24-hour data.
fn infer_granularity(path: &Path) -> Result<Granularity> {
    let file = fs::File::open(path)?;
    let mut stamps = Vec::new();
    for line in BufReader::new(file).lines().skip(1) {
        let line = line?;
        let field = line.split(',').next().unwrap_or("").trim();
        if let Some(ts) = parse_timestamp(field) {
            stamps.push(ts);
        }
        if stamps.len() == 2 {
            break;
        }
    }
    match stamps.as_slice() {
        [a, b] if *b - *a == Granularity::Hour24.step() => Ok(Granularity::Hour24),
        [_, _] => Ok(Granularity::Min15),
        _ => Err(Error::SequenceTooShort {
            len: stamps.len(),
            what: "granularity inference".into(),
        }),
    }
}

fn print_acf(path: &Path, max_lag: usize) -> Result<()> {
    let g = infer_granularity(path)?;
    let series = clean(&ingest_csv(path, g)?)?;
    let x = series.kwh()?;
    if max_lag == 0 || max_lag >= x.len() {
        return Err(Error::Config(format!("max-lag must be in 1..{}", x.len())));
    }
    let r = acf(&x, max_lag);
    let p = pacf(&x, max_lag);
    println!("lag,acf,pacf");
    for k in 1..=max_lag {
        println!("{k},{:.6},{:.6}", r[k], p[k - 1]);
    }
    Ok(())
}
