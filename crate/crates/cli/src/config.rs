//! `--config FILE`: `key = value` lines turned into flags placed ahead of the
//! command-line flags, so that the command line wins on conflict.

use std::ffi::OsString;
use std::fs;

/// Options that belong to the program rather than to a subcommand and take
/// a value.
const GLOBAL_WITH_VALUE: [&str; 3] = ["--workers", "--config", "--out"];

/// Tokens for the lines of a config file. Blank lines and `#` comments are
/// skipped; `key = value` becomes `--key value`, a bare `key` becomes `--key`.
pub fn tokens(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), Some(v.trim())),
            None => (line, None),
        };
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(format!("config line {}: cannot read `{raw}`", no + 1));
        }
        let key = key.trim_start_matches("--");
        if key == "config" {
            continue;
        }
        out.push(format!("--{key}"));
        if let Some(v) = value {
            out.push(v.to_string());
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Index of the subcommand token, skipping leading global options.
fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if GLOBAL_WITH_VALUE.contains(&s.as_ref()) {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// The argument list with config-file flags spliced in right after the
/// subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("--config {}: {e}", path.to_string_lossy()))?;
    let extra = tokens(&text)?;
    let at = subcommand_index(&args).map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn lines_become_flags() {
        let t = tokens("# run\nfield = linear:1\n\ngrid=32,32,32  # coarse\nverbose\n").unwrap();
        assert_eq!(t, ["--field", "linear:1", "--grid", "32,32,32", "--verbose"]);
        assert!(tokens("two words = 1").is_err());
        assert!(tokens("config = other.cfg").unwrap().is_empty());
    }

    #[test]
    fn finds_subcommand_after_globals() {
        let a = os(&["helicity", "--workers", "2", "--config", "x", "calabi", "--i0", "1"]);
        assert_eq!(subcommand_index(&a), Some(5));
        assert_eq!(config_path(&a), Some("x".into()));
        assert_eq!(config_path(&os(&["helicity", "calabi", "--config=y"])), Some("y".into()));
        assert_eq!(subcommand_index(&os(&["helicity", "--help"])), None);
    }

    #[test]
    fn no_config_leaves_args_alone() {
        let a = os(&["helicity", "helicity", "--field", "zero"]);
        assert_eq!(expand(a.clone()).unwrap(), a);
    }

    #[test]
    fn missing_file_is_reported() {
        let err = expand(os(&["helicity", "--config", "/nonexistent/run.cfg", "helicity"])).unwrap_err();
        assert!(err.contains("--config"));
    }
}
