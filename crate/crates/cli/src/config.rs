//! Merging a `key=value` config file into the command line.
//!
//! Each entry `key=value` becomes the flag `--key=value` (or `--key` for
//! `true`; `false` is dropped). Entries are placed before the user's own
//! arguments, and every flag overrides earlier occurrences, so explicit
//! flags win. Metadata sidecars written by this tool are valid config files.

use std::ffi::OsString;
use std::path::Path;

use corrdyn_core::io::read_key_values;

/// Keys of a config file that are not flags.
const COMMAND_KEY: &str = "command";
const IGNORED_KEYS: [&str; 1] = ["version"];
const IGNORED_PREFIX: &str = "resolved.";
const GLOBAL_KEYS: [&str; 1] = ["threads"];
const GLOBAL_SWITCHES: [&str; 4] = ["-h", "--help", "-V", "--version"];
const SUBCOMMANDS: [&str; 5] = [
    "render-julia",
    "render-multibrot",
    "find-misiurewicz",
    "similarity",
    "help",
];

fn to_flag(key: &str, value: &str) -> Option<OsString> {
    match value {
        "true" => Some(format!("--{key}").into()),
        "false" => None,
        v => Some(format!("--{key}={v}").into()),
    }
}

/// Splits `--config` out of the argument list and splices the file's
/// entries in. Returns the argument list to hand to the parser.
pub fn expand_args(raw: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut iter = raw.into_iter();
    let prog = iter.next().unwrap_or_else(|| "corrdyn".into());
    let mut globals = Vec::new();
    let mut config = None;
    let mut sub = None;
    let mut rest = Vec::new();

    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy().into_owned();
        if s == "--config" {
            config = Some(iter.next().ok_or("--config needs a file")?);
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(v.into());
        } else if sub.is_some() {
            rest.push(arg);
        } else if s == "--threads" {
            globals.push(arg);
            globals.extend(iter.next());
        } else if s.starts_with("--threads=") || GLOBAL_SWITCHES.contains(&s.as_str()) {
            globals.push(arg);
        } else if SUBCOMMANDS.contains(&s.as_str()) {
            sub = Some(arg);
        } else {
            // Flags given before the subcommand belong to it; the subcommand
            // itself may come from the config file.
            rest.push(arg);
        }
    }

    let mut file_globals = Vec::new();
    let mut file_args = Vec::new();
    if let Some(path) = config {
        let path = Path::new(&path);
        let entries = read_key_values(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        for (k, v) in entries {
            if k == COMMAND_KEY {
                match &sub {
                    None => sub = Some(v.clone().into()),
                    Some(s) if s.to_string_lossy() == v => {}
                    Some(s) => {
                        return Err(format!(
                            "config {} is for command {v:?}, not {:?}",
                            path.display(),
                            s.to_string_lossy()
                        ))
                    }
                }
            } else if IGNORED_KEYS.contains(&k.as_str()) || k.starts_with(IGNORED_PREFIX) {
                continue;
            } else if GLOBAL_KEYS.contains(&k.as_str()) {
                file_globals.extend(to_flag(&k, &v));
            } else {
                file_args.extend(to_flag(&k, &v));
            }
        }
    }

    let mut out = vec![prog];
    out.extend(file_globals);
    out.extend(globals);
    out.extend(sub);
    out.extend(file_args);
    out.extend(rest);
    Ok(out)
}
