//! `key = value` config files merged into the command line.
//!
//! Keys are long flag names without the leading dashes. Values from the file
//! are inserted right after the subcommand, so flags given on the command
//! line come later and win.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Flags that take no value; `true` turns them on, `false` leaves them off.
const SWITCHES: [&str; 1] = ["synthetic"];

pub fn parse_config(text: &str, origin: &Path) -> CliResult<Vec<String>> {
    let mut args = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!(
                "{}: line {}: expected key=value, got {line:?}",
                origin.display(),
                n + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.starts_with('-') || key == "config" {
            return Err(CliError::usage(format!(
                "{}: line {}: bad key {key:?}",
                origin.display(),
                n + 1
            )));
        }
        if SWITCHES.contains(&key) {
            match value {
                "true" => args.push(format!("--{key}")),
                "false" => {}
                other => {
                    return Err(CliError::usage(format!(
                        "{}: line {}: {key} must be true or false, got {other:?}",
                        origin.display(),
                        n + 1
                    )))
                }
            }
        } else {
            args.push(format!("--{key}={value}"));
        }
    }
    Ok(args)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Expand `--config <file>` into flags placed before the command-line ones.
pub fn expand_argv(argv: Vec<String>) -> CliResult<Vec<String>> {
    if argv.len() < 2 || argv[1].starts_with('-') {
        return Ok(argv);
    }
    let Some(path) = config_path(&argv[2..]) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("config file {path}: {e}")))?;
    let from_file = parse_config(&text, Path::new(&path))?;
    let mut out = argv[..2].to_vec();
    out.extend(from_file);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_pairs_comments_and_switches() {
        let text = "# run\nzone = 1\nsynthetic=true\n\ngrid-C = 1,10\nthin=false_is_not_a_switch\n";
        let args = parse_config(text, Path::new("c.cfg")).unwrap();
        assert_eq!(
            args,
            [
                "--zone=1",
                "--synthetic",
                "--grid-C=1,10",
                "--thin=false_is_not_a_switch"
            ]
        );
        assert!(parse_config("synthetic = off", Path::new("c")).is_err());
        assert!(parse_config("no equals sign", Path::new("c")).is_err());
        assert!(parse_config("config = other", Path::new("c")).is_err());
    }

    #[test]
    fn file_flags_come_before_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "zone = 4\nthin = 2\n").unwrap();
        let cmd = format!("csvqr backtest --zone 1 --config {}", path.display());
        let out = expand_argv(argv(&cmd)).unwrap();
        assert_eq!(out[..4], ["csvqr", "backtest", "--zone=4", "--thin=2"]);
        assert_eq!(out[4..6], ["--zone", "1"]);

        let untouched = argv("csvqr --help");
        assert_eq!(expand_argv(untouched.clone()).unwrap(), untouched);
        assert!(expand_argv(argv("csvqr fit --config /nonexistent/x.cfg")).is_err());
    }
}
