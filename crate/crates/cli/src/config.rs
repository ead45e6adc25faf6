//! `--config` files: one `key = value` per line, `#` comments.
//!
//! Each entry becomes `--key value` right after the subcommand, so flags on
//! the command line still win.

use std::path::Path;

use crate::CliError;

pub fn read_config(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_config(text: &str) -> Result<Vec<String>, String> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        let value = value.trim();
        args.push(format!("--{key}"));
        match value {
            "true" => {}
            _ => args.push(value.to_string()),
        }
    }
    Ok(args)
}

/// Removes `--config <path>` from `args` and splices the file's flags in
/// after the subcommand.
pub fn expand(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => {
            let p = p.to_string();
            args.remove(pos);
            p
        }
        None => {
            if pos + 1 >= args.len() {
                return Err(CliError::Input("--config needs a path".into()));
            }
            let p = args.remove(pos + 1);
            args.remove(pos);
            p
        }
    };
    let extra = read_config(Path::new(&path))?;
    let sub = args.iter().skip(1).position(|a| !a.starts_with('-')).map_or(args.len(), |i| i + 2);
    args.splice(sub.min(args.len())..sub.min(args.len()), extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_flags() {
        let args = parse_config("# bound setup\nrho_max = 0.9\nn=60\nintercept = true\n\n").unwrap();
        assert_eq!(args, vec!["--rho-max", "0.9", "--n", "60", "--intercept"]);
        assert!(parse_config("oops").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "n = 60\n").unwrap();
        let args: Vec<String> =
            ["mata", "bound", "--config", path.to_str().unwrap(), "--n", "70"].iter().map(|s| s.to_string()).collect();
        let out = expand(args).unwrap();
        assert_eq!(out, vec!["mata", "bound", "--n", "60", "--n", "70"]);
    }
}
