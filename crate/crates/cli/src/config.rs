//! Flat `key = value` config files whose keys mirror the long flag names.
//!
//! The file is expanded into `--key=value` arguments placed directly after
//! the subcommand, ahead of anything typed on the command line. Every
//! subcommand overrides repeated flags with the last occurrence, so explicit
//! flags win over the file.

use std::ffi::OsString;

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Syntax { line: usize, message: String },
    Usage(String),
}

/// Parses the file body into ordered `(key, value)` pairs. `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, message: format!("expected key = value, got {line:?}") });
        };
        let key = k.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(ConfigError::Syntax { line: i + 1, message: format!("invalid key {:?}", k.trim()) });
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn as_flags(pairs: &[(String, String)]) -> Vec<OsString> {
    pairs
        .iter()
        .filter_map(|(k, v)| match v.as_str() {
            "true" => Some(format!("--{k}")),
            "false" => None,
            _ => Some(format!("--{k}={v}")),
        })
        .map(OsString::from)
        .collect()
}

/// Removes `--config PATH` / `--config=PATH` from `args` and splices the
/// file's flags in after the subcommand (and its positional suite for `bench`).
pub fn expand(mut args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--" {
            break;
        }
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err(ConfigError::Usage("--config needs a file path".into()));
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            args.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ConfigError::Io(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let flags = as_flags(&parse(&text)?);

    // First non-flag token is the subcommand; `bench` also takes a suite name.
    let Some(sub) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1) else {
        return Err(ConfigError::Usage("a subcommand is required".into()));
    };
    let mut at = sub + 1;
    if args[sub] == "bench" && args.get(at).is_some_and(|a| !a.to_string_lossy().starts_with('-')) {
        at += 1;
    }
    args.splice(at..at, flags);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let pairs = parse("# header\nwindow = 500\n\n--k=5  # trailing\nstepped=true\n").unwrap();
        assert_eq!(
            pairs,
            vec![("window".into(), "500".into()), ("k".into(), "5".into()), ("stepped".into(), "true".into())]
        );
        assert!(matches!(parse("window 500"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse("a=1\nconfig=x"), Err(ConfigError::Syntax { line: 2, .. })));
    }

    #[test]
    fn flags_from_pairs() {
        let f = as_flags(&[("k".into(), "5".into()), ("stepped".into(), "true".into()), ("x".into(), "false".into())]);
        assert_eq!(f, os(&["--k=5", "--stepped"]));
    }

    #[test]
    fn expand_without_config_is_identity() {
        let args = os(&["nsd", "detect", "--k", "3"]);
        assert_eq!(expand(args.clone()).unwrap(), args);
    }

    #[test]
    fn expand_places_flags_before_explicit_ones() {
        let dir = std::env::temp_dir().join(format!("nsd-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.cfg");
        std::fs::write(&path, "k = 5\nwindow=500\n").unwrap();
        let p = path.to_string_lossy().into_owned();

        let got = expand(os(&["nsd", "--config", &p, "detect", "--k", "3"])).unwrap();
        assert_eq!(got, os(&["nsd", "detect", "--k=5", "--window=500", "--k", "3"]));

        let got = expand(os(&["nsd", "bench", "drift", &format!("--config={p}")])).unwrap();
        assert_eq!(got, os(&["nsd", "bench", "drift", "--k=5", "--window=500"]));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
