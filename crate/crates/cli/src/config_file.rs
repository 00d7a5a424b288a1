//! `key = value` defaults files. Keys are long flag names (`r-lo` or `r_lo`);
//! `#` starts a comment.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| format!("line {}: expected key = value, got {raw:?}", i + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(format!("line {}: empty key or value", i + 1));
        }
        if key == "config" {
            return Err(format!("line {}: config files cannot include other config files", i + 1));
        }
        out.push(Entry { key, value });
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<Entry>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn long_names(cmd: &clap::Command) -> Vec<String> {
    cmd.get_arguments().filter_map(|a| a.get_long()).map(str::to_string).collect()
}

/// Value of `--config` in raw arguments, if any.
pub fn find_config(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Inserts config entries as flags right after the subcommand so explicit
/// flags, which come later, take precedence. Keys unknown to every
/// subcommand are errors; keys belonging only to other subcommands are
/// skipped so one file can serve several subcommands. The `out` entry is
/// returned separately since the output directory has its own precedence.
pub fn inject(argv: &[OsString], entries: &[Entry]) -> Result<(Vec<OsString>, Option<String>), String> {
    let root = Cli::command();
    let all: Vec<String> = root.get_subcommands().flat_map(long_names).collect();
    let sub = argv.get(1).and_then(|s| root.find_subcommand(s.to_string_lossy().as_ref()));
    let mut out_dir = None;
    let mut injected = Vec::new();
    for e in entries {
        if !all.contains(&e.key) {
            return Err(format!("unknown config key {:?}", e.key));
        }
        if e.key == "out" {
            out_dir = Some(e.value.clone());
            continue;
        }
        if sub.is_some_and(|c| long_names(c).contains(&e.key)) {
            injected.push(OsString::from(format!("--{}={}", e.key, e.value)));
        }
    }
    let mut args = argv.to_vec();
    if sub.is_some() {
        args.splice(2..2, injected);
    }
    Ok((args, out_dir))
}
