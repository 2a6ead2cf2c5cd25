use std::fs::File;
use std::io::{self, BufWriter};
use std::path::Path;
use std::process::ExitCode;

use irf_mixflow::cli::{exit_code, run, Command, ExperimentConfig};
use irf_mixflow::{Error, Result};

const USAGE: &str = "usage: irf-mixflow run <subcommand> <config.toml>
subcommands: fit-reference, stability, tv-sweep, metrics, ensemble-sweep, diagnostics, tune-step
environment: IRF_MIXFLOW_WORKERS sets the worker count (default: all cores)";

fn workers() -> Result<()> {
    let Ok(raw) = std::env::var("IRF_MIXFLOW_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("IRF_MIXFLOW_WORKERS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main_inner(args: &[String]) -> Result<()> {
    let [verb, sub, path] = args else {
        return Err(Error::Config(USAGE.into()));
    };
    if verb != "run" {
        return Err(Error::Config(USAGE.into()));
    }
    let cmd: Command = sub.parse()?;
    let cfg = ExperimentConfig::load(Path::new(path))?;
    workers()?;
    let table = run(cmd, &cfg)?;
    match &cfg.output {
        Some(out) => table.write_csv(&cfg, BufWriter::new(File::create(out)?)),
        None => table.write_csv(&cfg, io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match main_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
