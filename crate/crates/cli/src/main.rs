mod args;
mod commands;
mod output;
mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use serde::de::DeserializeOwned;

use args::{Cli, Command};
use commands::Run;
use output::{usage, Artifacts, RunManifest, UsageError, TOOL_VERSION};

const EXIT_WARNING: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if matches!(e.kind(), csv::ErrorKind::Io(_)) { EXIT_IO } else { EXIT_USAGE };
        }
        if cause.is::<UsageError>() || cause.is::<varwitness::Error>() {
            return EXIT_USAGE;
        }
    }
    1
}

fn seed_of(cmd: &Command) -> u64 {
    match cmd {
        Command::Bound(a) => a.solver.seed,
        Command::Region(a) => a.solver.seed,
        Command::Witness(a) => a.solver.seed,
        Command::Report(a) => a.solver.seed,
        Command::Simulate(a) => a.seed,
        Command::Calibrate(a) => a.seed,
        Command::FitNoise(_) | Command::Replay(_) => args::DEFAULT_SEED,
    }
}

fn execute(cmd: &Command) -> Result<Run> {
    match cmd {
        Command::Bound(a) => commands::bound(a),
        Command::Region(a) => commands::region(a),
        Command::Witness(a) => commands::witness(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::FitNoise(a) => commands::fit_noise(a),
        Command::Report(a) => commands::report(a),
        Command::Replay(_) => unreachable!("replay is resolved before execution"),
    }
}

fn parameters_of(cmd: &Command) -> Result<serde_json::Value> {
    Ok(match cmd {
        Command::Bound(a) => serde_json::to_value(a)?,
        Command::Region(a) => serde_json::to_value(a)?,
        Command::Witness(a) => serde_json::to_value(a)?,
        Command::Simulate(a) => serde_json::to_value(a)?,
        Command::Calibrate(a) => serde_json::to_value(a)?,
        Command::FitNoise(a) => serde_json::to_value(a)?,
        Command::Report(a) => serde_json::to_value(a)?,
        Command::Replay(a) => serde_json::to_value(a)?,
    })
}

fn from_manifest(manifest: &RunManifest) -> Result<Command> {
    fn load<T: DeserializeOwned>(m: &RunManifest) -> Result<T> {
        let params = serde_json::Value::Object(m.parameters.clone().into_iter().collect());
        serde_json::from_value(params)
            .map_err(|e| usage(format!("manifest parameters do not fit `{}`: {e}", m.command)))
    }
    Ok(match manifest.command.as_str() {
        "bound" => Command::Bound(load(manifest)?),
        "region" => Command::Region(load(manifest)?),
        "witness" => Command::Witness(load(manifest)?),
        "simulate" => Command::Simulate(load(manifest)?),
        "calibrate" => Command::Calibrate(load(manifest)?),
        "fit-noise" => Command::FitNoise(load(manifest)?),
        "report" => Command::Report(load(manifest)?),
        other => return Err(usage(format!("manifest names unknown command `{other}`"))),
    })
}

fn run(mut cmd: Command, output_dir: Option<PathBuf>) -> Result<Vec<String>> {
    let mut output_dir = output_dir;
    if let Command::Replay(r) = &cmd {
        let manifest = RunManifest::read(&r.manifest)?;
        if manifest.tool_version != TOOL_VERSION {
            eprintln!(
                "note: manifest written by version {}, replaying with {TOOL_VERSION}",
                manifest.tool_version
            );
        }
        if output_dir.is_none() {
            output_dir = r.manifest.parent().map(Path::to_path_buf);
        }
        cmd = from_manifest(&manifest)?;
    } else {
        cmd.absolutize_inputs();
    }

    let result = execute(&cmd)?;
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(result.stdout.as_bytes())?;
    stdout.flush()?;

    if output_dir.is_some() || result.always_write {
        let dir = output_dir.unwrap_or_else(|| PathBuf::from("."));
        let mut artifacts = Artifacts::new(&dir, cmd.name())?;
        for (suffix, contents) in &result.files {
            artifacts.write(suffix, contents)?;
        }
        let manifest = artifacts.finish(cmd.name(), &parameters_of(&cmd)?, seed_of(&cmd))?;
        eprintln!("wrote {}", manifest.display());
    }
    Ok(result.warnings)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command, cli.output_dir) {
        Ok(warnings) if warnings.is_empty() => ExitCode::SUCCESS,
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(EXIT_WARNING)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
