//! Flat `key = value` config files and run directories.
//!
//! Config entries become `--key value` flags placed right after the
//! subcommand, ahead of the user's own flags, so flags given on the command
//! line override the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ArgMatches;
use sha2::{Digest, Sha256};

pub const SUBCOMMANDS: [&str; 6] = ["synth", "investigate", "augment", "train", "eval", "sweep"];

#[derive(Debug)]
pub struct ConfigError(pub String);

/// Value of `--config` in raw argv, if any.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                n + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(ConfigError(format!(
                "{}:{}: invalid key {key:?}",
                path.display(),
                n + 1
            )));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Splices config-file flags into `args` after the subcommand token.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let entries = parse_config(&text, &path)?;
    let Some(at) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let mut out = args[..=at].to_vec();
    for (key, value) in entries {
        out.push(format!("--{key}").into());
        out.push(value.into());
    }
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

/// Arguments that locate outputs or set parallelism; they do not change
/// results and stay out of the config hash.
const NOT_HASHED: [&str; 4] = ["run_dir", "runs_root", "workers", "config"];

/// Every argument of the subcommand with its resolved value, sorted by name.
pub fn resolved(command: &str, matches: &ArgMatches) -> Vec<(String, String)> {
    let mut out = vec![("command".to_string(), command.to_string())];
    let mut ids: Vec<&str> = matches.ids().map(|id| id.as_str()).collect();
    ids.sort_unstable();
    for id in ids {
        let Ok(Some(values)) = matches.try_get_raw(id) else {
            continue;
        };
        let joined: Vec<String> = values.map(|v| v.to_string_lossy().into_owned()).collect();
        out.push((id.replace('_', "-"), joined.join(",")));
    }
    out
}

pub fn render(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn config_hash(entries: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in entries {
        if NOT_HASHED.contains(&k.replace('-', "_").as_str()) {
            continue;
        }
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// `root/<command>-<hash12>-<UTC timestamp>` unless an explicit directory is
/// given. The resolved config is written into it as `config.txt`.
pub fn make_run_dir(
    explicit: Option<&Path>,
    root: &Path,
    command: &str,
    entries: &[(String, String)],
) -> std::io::Result<PathBuf> {
    let dir = match explicit {
        Some(d) => d.to_path_buf(),
        None => {
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
            root.join(format!("{command}-{}-{stamp}", &config_hash(entries)[..12]))
        }
    };
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), render(entries))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_flat_config() {
        let got = parse_config("# c\nk = 10\n\nbatch_size=512\n", Path::new("c")).unwrap();
        assert_eq!(
            got,
            vec![("k".into(), "10".into()), ("batch-size".into(), "512".into())]
        );
        assert!(parse_config("nonsense\n", Path::new("c")).is_err());
    }

    #[test]
    fn config_flags_precede_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "lambda = 0.05\n").unwrap();
        let args = os(&[
            "vimm",
            "--config",
            path.to_str().unwrap(),
            "augment",
            "--lambda",
            "0.01",
        ]);
        let out = expand_args(args).unwrap();
        let s: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(&s[3..], &["augment", "--lambda", "0.05", "--lambda", "0.01"]);
    }

    #[test]
    fn hash_ignores_locations() {
        let a = vec![
            ("k".to_string(), "5".to_string()),
            ("workers".to_string(), "1".to_string()),
        ];
        let b = vec![
            ("k".to_string(), "5".to_string()),
            ("workers".to_string(), "4".to_string()),
        ];
        assert_eq!(config_hash(&a), config_hash(&b));
        let c = vec![("k".to_string(), "6".to_string())];
        assert_ne!(config_hash(&a), config_hash(&c));
    }
}
