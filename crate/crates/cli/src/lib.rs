//! Command-line front end: argument resolution, job dispatch and report
//! emission. `run` never exits the process, so it can be driven from tests.

pub mod args;
pub mod commands;
pub mod config_file;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use args::Cli;
use report::Failure;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "KMFG_OUT_DIR";

pub const DEFAULT_OUT_DIR: &str = "kmfg-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Output directory precedence: `--out`, then the environment, then the
/// config file, then `DEFAULT_OUT_DIR`.
fn resolve_out(flag: Option<PathBuf>, from_file: Option<String>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| from_file.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let (argv, file_out) = match config_file::find_config(&argv) {
        Some(path) => match config_file::load(path.as_ref()).and_then(|e| config_file::inject(&argv, &e)) {
            Ok(v) => v,
            Err(msg) => {
                eprintln!("error: {msg}");
                return EXIT_INVALID;
            }
        },
        None => (argv, None),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = cli.command.name();
    let job = match commands::resolve(cli.command) {
        Ok(j) => j,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INVALID;
        }
    };
    let out_dir = resolve_out(job.out_flag.clone(), file_out);
    let config = job.config_json(&out_dir);
    let outcome = job.execute();
    let written = match outcome {
        Ok(artifacts) => report::write_success(&out_dir, name, config, artifacts).map(|_| EXIT_OK),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_INVALID;
        }
        Err(Failure::Numerical { error, partial }) => {
            eprintln!("numerical failure: {error}");
            report::write_failure(&out_dir, name, config, &error, partial).map(|_| EXIT_NUMERICAL)
        }
    };
    match written {
        Ok(code) => {
            if code == EXIT_OK {
                println!("{}", out_dir.join(format!("{name}.json")).display());
            }
            code
        }
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", out_dir.display());
            EXIT_IO
        }
    }
}
