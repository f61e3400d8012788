//! TOML configuration merged underneath command-line flags.
//!
//! The file holds an optional `[global]` table plus one table per subcommand.
//! Keys are long flag names (`half-width`, `tfinal`, ...); arrays become
//! comma-separated lists and `true` turns a switch on. A key is applied only
//! when the corresponding flag was not given on the command line.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;

fn scalar(v: &toml::Value) -> Result<String, String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:?}")),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => Ok(items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(",")),
        other => Err(format!("unsupported value {other}")),
    }
}

fn given_on_command_line(m: &ArgMatches, id: &str) -> bool {
    m.try_contains_id(id).unwrap_or(false) && m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Flags to append to `argv` so that config values fill in what the command
/// line left unset.
pub fn extra_args(path: &Path, top: &ArgMatches) -> Result<Vec<OsString>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let doc: toml::Table = text.parse().map_err(|e| format!("config {}: {e}", path.display()))?;
    let (sub_name, sub) = top.subcommand().ok_or("no subcommand")?;
    let mut out = Vec::new();
    for (section, value) in &doc {
        let table = value
            .as_table()
            .ok_or_else(|| format!("config {}: top-level key `{section}` must be a table", path.display()))?;
        let matches = match section.as_str() {
            "global" => top,
            s if s == sub_name => sub,
            _ => continue,
        };
        for (key, v) in table {
            let id = key.replace('-', "_");
            if given_on_command_line(matches, &id) || given_on_command_line(top, &id) {
                continue;
            }
            match v {
                toml::Value::Boolean(true) => out.push(format!("--{key}").into()),
                toml::Value::Boolean(false) => {}
                _ => {
                    out.push(format!("--{key}").into());
                    out.push(scalar(v).map_err(|e| format!("config key `{key}`: {e}"))?.into());
                }
            }
        }
    }
    Ok(out)
}
