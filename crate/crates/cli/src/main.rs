//! `qpt`: command-line front end of the qpt toolkit.
//!
//! Exit codes: 0 on success (flagged sweep points only produce a warning),
//! 2 on a configuration error, 1 on a numerical or I/O failure.

mod args;
mod commands;
mod config;
mod error;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::Parser;
use log::{Level, LevelFilter, Log, Metadata, Record};

use crate::args::Cli;
use crate::config::{CommandKind, Format};
use crate::error::CliError;
use crate::output::{emit_csv, emit_json, Envelope};

struct StderrLogger;

impl Log for StderrLogger {
    fn enabled(&self, m: &Metadata) -> bool {
        m.level() <= log::max_level()
    }

    fn log(&self, r: &Record) {
        if self.enabled(r.metadata()) {
            let tag = match r.level() {
                Level::Error => "error",
                Level::Warn => "warning",
                _ => "info",
            };
            let _ = writeln!(std::io::stderr(), "qpt: {tag}: {}", r.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn run_command(cli: &Cli) -> Result<(), CliError> {
    let a = cli.command.args();
    let command = CommandKind::parse(cli.command.name()).expect("subcommand names match");
    let file = match &a.config {
        Some(p) => config::load_file(p)?,
        None => Default::default(),
    };
    let cfg = config::overlay(file, a)?;
    let job = config::resolve(command, &cfg)?;

    let start = Instant::now();
    let compute = || commands::execute(&job);
    let (payload, flagged) = match job.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io(format!("cannot start {n} worker threads: {e}")))?
            .install(compute)?,
        None => compute()?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    if flagged > 0 {
        log::warn!("{flagged} flagged records in the output");
    }

    let bytes = match job.format {
        Format::Csv => emit_csv(&payload)?,
        Format::Json => emit_json(&Envelope {
            command: command.name(),
            config: &job.echo,
            wall_time_s: job.timing.then_some(elapsed),
            flagged_records: flagged,
            payload: &payload,
        }),
    };
    match &job.out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = log::set_logger(&LOGGER);
    log::set_max_level(if cli.command.args().verbose {
        LevelFilter::Info
    } else {
        LevelFilter::Warn
    });
    match run_command(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "qpt: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}
