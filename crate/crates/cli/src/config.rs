//! Flat `key = value` experiment files.
//!
//! Keys are the long flag names of the subcommand (`model`, `S`, `B`, `grid`, ...), plus
//! `command` to pick the subcommand. Lines starting with `#` are comments. Entries are turned
//! into flags placed before the ones typed on the command line, so typed flags win.

use anyhow::{bail, Context, Result};
use std::path::Path;

/// Flags that take no value; `key = true` turns them on.
const SWITCHES: &[&str] = &["unrestricted"];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub command: Option<Vec<String>>,
    pub entries: Vec<(String, String)>,
}

pub fn parse(text: &str) -> Result<ConfigFile> {
    let mut out = ConfigFile::default();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value", no + 1);
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.starts_with('-') {
            bail!("line {}: bad key {k:?}", no + 1);
        }
        if k == "command" {
            out.command = Some(v.split_whitespace().map(str::to_string).collect());
        } else {
            out.entries.push((k.to_string(), v.to_string()));
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

impl ConfigFile {
    pub fn to_flags(&self) -> Result<Vec<String>> {
        let mut flags = Vec::new();
        for (k, v) in &self.entries {
            if SWITCHES.contains(&k.as_str()) {
                match v.as_str() {
                    "true" => flags.push(format!("--{k}")),
                    "false" => {}
                    _ => bail!("{k} must be true or false"),
                }
            } else {
                // repeated keys (e.g. several regions) stay separate values
                flags.push(format!("--{k}"));
                flags.push(v.clone());
            }
        }
        Ok(flags)
    }
}

/// Splices config-file flags into `argv` right after the subcommand words.
pub fn merge_args(argv: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>> {
    let mut config_path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            config_path = Some(argv.get(i + 1).context("--config needs a path")?.clone());
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let cfg = load(Path::new(&path))?;
    let pos = argv.iter().position(|a| subcommands.contains(&a.as_str()));
    let mut out = vec![argv[0].clone()];
    let rest: Vec<String> = match pos {
        Some(p) => {
            out.extend(argv[1..=p].iter().cloned());
            // `model describe`
            if argv[p] == "model" && argv.get(p + 1).is_some_and(|w| !w.starts_with('-')) {
                out.push(argv[p + 1].clone());
                argv[p + 2..].to_vec()
            } else {
                argv[p + 1..].to_vec()
            }
        }
        None => {
            let cmd = cfg.command.clone().context("no subcommand given on the command line or in the config file")?;
            out.extend(cmd);
            argv[1..].to_vec()
        }
    };
    out.extend(cfg.to_flags()?);
    out.extend(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_merges() {
        let cfg = parse("# demo\ncommand = count\nmodel = E3\nS = inf\nB = 100\nunrestricted = false\n").unwrap();
        assert_eq!(cfg.command, Some(vec!["count".to_string()]));
        assert_eq!(cfg.to_flags().unwrap(), ["--model", "E3", "--S", "inf", "--B", "100"]);
        assert!(parse("model E3").is_err());
        assert!(parse("--model = E3").is_err());
    }
}
