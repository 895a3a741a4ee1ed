use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use skeltensor::bench::{self, BenchSettings};
use skeltensor::config::RunConfig;
use skeltensor::descriptor::Descriptor;
use skeltensor::pipeline::{self, write_atomic};
use skeltensor::{Error, Result};

/// Skeleton action descriptors via linearized sequence kernels.
#[derive(Parser)]
#[command(name = "skeltensor", version)]
struct Cli {
    /// Flat `key = value` config file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (config key `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for synthetic data, sampling and SVM coordinate order.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extraction threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Descriptor kind: sck, dck or both.
    #[arg(long, global = true)]
    kind: Option<String>,
    /// Extra `key=value` override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one descriptor file per sequence plus a manifest.
    Extract,
    /// Train on the training split and evaluate on the test split.
    TrainEval,
    /// Cartesian sweep over `grid.*` keys.
    Gridsearch,
    /// Time exact-kernel against linearized Gram construction.
    Bench,
    /// Write the configured synthetic dataset as skt1 files.
    Synth,
    /// Print a descriptor file's header.
    Inspect {
        path: PathBuf,
        /// Also print the values.
        #[arg(long)]
        values: bool,
    },
    /// Print every config key with its default.
    Keys,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.out {
        cfg.set("out", &v.to_string_lossy())?;
    }
    if let Some(v) = cli.seed {
        cfg.set("seed", &v.to_string())?;
    }
    if let Some(v) = cli.workers {
        cfg.set("workers", &v.to_string())?;
    }
    if let Some(v) = &cli.kind {
        cfg.set("kind", v)?;
    }
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.kind()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.get("out"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    serde_json::to_vec_pretty(value).map_err(|e| Error::invalid(format!("serializing report: {e}")))
}

fn train_eval(cfg: &RunConfig) -> Result<()> {
    let data = pipeline::load_data(cfg)?;
    let (report, outcomes) = pipeline::train_eval(cfg, &data)?;
    let dir = out_dir(cfg)?;
    let mut confusion = String::new();
    for o in &outcomes {
        confusion.push_str(&format!(
            "# {} (accuracy {:.4})\n",
            o.report.name, o.report.eval.accuracy
        ));
        confusion.push_str(&o.report.eval.confusion_table());
        confusion.push('\n');
        let name = if outcomes.len() == 1 {
            "model.sktm".to_string()
        } else {
            format!("model_{}.sktm", pipeline::file_stem(&o.report.name))
        };
        o.model.write(&dir.join(name))?;
    }
    write_atomic(&dir.join("confusion.txt"), confusion.as_bytes())?;
    write_atomic(&dir.join("report.json"), &json(&report)?)?;
    for f in &report.folds {
        println!(
            "{}: accuracy {:.4} ({} test), C = {}, validation {:.4}",
            f.name, f.eval.accuracy, f.test_sequences, f.c, f.validation_accuracy
        );
    }
    let sizes: Vec<String> = report
        .descriptor_sizes
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    println!(
        "accuracy {:.4}; descriptor sizes {}",
        report.accuracy,
        sizes.join(" ")
    );
    Ok(())
}

fn inspect(path: &Path, values: bool) -> Result<()> {
    let d = Descriptor::read(path)?;
    print!("{}", d.header_text());
    if values {
        for v in &d.values {
            println!("{v:?}");
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Keys = cli.command {
        print!("{}", RunConfig::reference());
        return Ok(());
    }
    if let Command::Inspect { path, values } = &cli.command {
        return inspect(path, *values);
    }
    let cfg = config(cli)?;
    match &cli.command {
        Command::Extract => {
            let dir = out_dir(&cfg)?;
            let entries = pipeline::extract_to_dir(&cfg, &dir)?;
            println!("{} descriptors written to {}", entries.len(), dir.display());
        }
        Command::TrainEval => train_eval(&cfg)?,
        Command::Gridsearch => {
            let rows = pipeline::gridsearch(&cfg)?;
            let dir = out_dir(&cfg)?;
            let table = pipeline::grid_table(&rows);
            write_atomic(&dir.join("grid.tsv"), table.as_bytes())?;
            write_atomic(&dir.join("grid.json"), &json(&rows)?)?;
            print!("{table}");
        }
        Command::Bench => {
            let report = bench::run(&BenchSettings::from_config(&cfg)?)?;
            let dir = out_dir(&cfg)?;
            let table = report.table();
            write_atomic(&dir.join("bench.txt"), table.as_bytes())?;
            write_atomic(&dir.join("bench.json"), &json(&report)?)?;
            print!("{table}");
        }
        Command::Synth => {
            let dir = out_dir(&cfg)?;
            let entries = pipeline::synth_to_dir(&cfg, &dir)?;
            println!("{} sequences written to {}", entries.len(), dir.display());
        }
        Command::Inspect { .. } | Command::Keys => unreachable!("handled before config loading"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
