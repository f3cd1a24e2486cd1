//! Flat `key = value` config files spliced into the command line.

use std::ffi::OsString;
use std::path::Path;

use crate::error::CliError;

/// Commands that take a second word.
const NESTED: &[&str] = &["index"];

fn flag_given(args: &[OsString], flag: &str) -> bool {
    let with_eq = format!("{flag}=");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&with_eq)
    })
}

/// Reads a flat config file into `(flag, value)` pairs. Underscores in keys
/// become hyphens; `true` booleans become bare flags and `false` ones are
/// dropped.
pub fn read_config(path: &Path) -> Result<Vec<(String, Option<String>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = text.parse().map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let value = match value {
            toml::Value::Boolean(true) => None,
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => Some(s),
            toml::Value::Integer(i) => Some(i.to_string()),
            toml::Value::Float(f) => Some(f.to_string()),
            other => {
                return Err(CliError::Parse(format!("{}: key {key} has unsupported value {other}", path.display())));
            }
        };
        out.push((flag, value));
    }
    Ok(out)
}

/// Removes `--config FILE` from `args` and inserts the file's entries right
/// after the subcommand words. Entries whose flag already appears on the
/// command line are skipped, so explicit flags win.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy().into_owned();
        if s == "--config" {
            let path = iter.next().ok_or_else(|| CliError::Parse("--config needs a file".into()))?;
            config = Some(path);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let entries = read_config(Path::new(&path))?;

    let mut at = 1;
    while at < rest.len() && rest[at].to_string_lossy().starts_with('-') {
        at += 1;
    }
    if at < rest.len() {
        let first = rest[at].to_string_lossy().into_owned();
        at += 1;
        if NESTED.contains(&first.as_str()) && at < rest.len() {
            at += 1;
        }
    }
    let mut spliced: Vec<OsString> = Vec::new();
    for (flag, value) in entries {
        if flag_given(&rest, &flag) {
            continue;
        }
        spliced.push(match value {
            Some(v) => format!("{flag}={v}").into(),
            None => flag.into(),
        });
    }
    rest.splice(at..at, spliced);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn cli_flags_win_over_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "k = 16\nseed = 7\nexact = true\nverbose_thing = false\n").unwrap();
        let args = os(&["posefuse", "--config", path.to_str().unwrap(), "index", "build", "--k", "8"]);
        let out: Vec<String> = expand_config(args).unwrap().iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(out, vec!["posefuse", "index", "build", "--exact", "--seed=7", "--k", "8"]);
    }

    #[test]
    fn no_config_is_untouched() {
        let args = os(&["posefuse", "eval", "--pred", "a"]);
        assert_eq!(expand_config(args.clone()).unwrap(), args);
    }
}
