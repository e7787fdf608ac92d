//! `key = value` config files with `[section]` headers.
//!
//! Keys are long flag names without the dashes. A section named after a
//! subcommand applies only to that subcommand; every other section applies
//! to whichever subcommand runs, skipping keys it does not take. File values
//! are spliced into the argument list ahead of the command line, so flags
//! given explicitly win.

use std::collections::BTreeSet;

use clap::Command;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: Option<String>,
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_config(text: &str) -> Result<Vec<Entry>, CliError> {
    let mut section = None;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "config line {}: unterminated section header",
                        i + 1
                    ))
                })?
                .trim();
            if name.is_empty() {
                return Err(CliError::Config(format!(
                    "config line {}: empty section name",
                    i + 1
                )));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected key = value", i + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Config(format!(
                "config line {}: empty key",
                i + 1
            )));
        }
        entries.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            value: unquote(value.trim()).to_string(),
            line: i + 1,
        });
    }
    Ok(entries)
}

fn unquote(v: &str) -> &str {
    if v.len() >= 2
        && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\'')))
    {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Value of `--config` in `argv`, if any.
pub fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
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

fn long_names(cmd: &Command) -> BTreeSet<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

fn is_flag(cmd: &Command, long: &str) -> bool {
    cmd.get_arguments()
        .find(|a| a.get_long() == Some(long))
        .is_some_and(|a| !a.get_action().takes_values())
}

/// Splices the config `entries` into `argv` right after the subcommand name.
/// `exclusive` lists keys of which at most one may be set; if the command
/// line sets any of them, the file's are dropped.
pub fn merge(
    cmd: &Command,
    argv: &[String],
    entries: &[Entry],
    exclusive: &[&str],
) -> Result<Vec<String>, CliError> {
    let subcommands: BTreeSet<String> = cmd
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    let Some(pos) = argv.iter().position(|a| subcommands.contains(a)) else {
        return Ok(argv.to_vec());
    };
    let name = &argv[pos];
    let sub = cmd.find_subcommand(name).expect("listed subcommand");
    let mut accepted = long_names(sub);
    accepted.extend(long_names(cmd));
    let user_sets = |key: &str| {
        argv.iter()
            .any(|a| a == &format!("--{key}") || a.starts_with(&format!("--{key}=")))
    };
    let user_exclusive = exclusive.iter().any(|k| user_sets(k));

    let mut spliced = Vec::new();
    for e in entries {
        let own_section = e.section.as_deref() == Some(name.as_str());
        let other_command =
            e.section.as_ref().is_some_and(|s| subcommands.contains(s)) && !own_section;
        if other_command || e.key == "config" {
            continue;
        }
        if !accepted.contains(&e.key) {
            if own_section {
                return Err(CliError::Config(format!(
                    "config line {}: `{name}` takes no option `{}`",
                    e.line, e.key
                )));
            }
            continue;
        }
        if user_exclusive && exclusive.contains(&e.key.as_str()) {
            continue;
        }
        let target = if sub
            .get_arguments()
            .any(|a| a.get_long() == Some(e.key.as_str()))
        {
            sub
        } else {
            cmd
        };
        if is_flag(target, &e.key) {
            match e.value.as_str() {
                "true" | "yes" | "1" => spliced.push(format!("--{}", e.key)),
                "false" | "no" | "0" => {}
                other => {
                    return Err(CliError::Config(format!(
                        "config line {}: `{}` is a switch, got `{other}`",
                        e.line, e.key
                    )))
                }
            }
        } else {
            spliced.push(format!("--{}={}", e.key, e.value));
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(spliced);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::{Arg, ArgAction};

    fn cmd() -> Command {
        Command::new("t")
            .arg(Arg::new("seed").long("seed").global(true))
            .subcommand(
                Command::new("simulate")
                    .args_override_self(true)
                    .arg(Arg::new("ode").long("ode"))
                    .arg(Arg::new("fn").long("fn"))
                    .arg(Arg::new("u0").long("u0"))
                    .arg(Arg::new("quiet").long("quiet").action(ArgAction::SetTrue)),
            )
            .subcommand(Command::new("verify").arg(Arg::new("suite")))
    }

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn parses_sections_comments_and_quotes() {
        let e = parse_config("# c\nseed = 3\n\n[simulate]\node = \"-x + sin(t)\"\n; other\nu0=1\n")
            .unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].section, None);
        assert_eq!(e[1].section.as_deref(), Some("simulate"));
        assert_eq!(e[1].value, "-x + sin(t)");
        assert_eq!(e[2].line, 7);
        assert!(parse_config("[open\n").is_err());
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn splices_after_subcommand_and_filters() {
        let e = parse_config("seed=5\n[system]\node=x\nu0=2\n[verify]\nsuite=all\n").unwrap();
        let out = merge(&cmd(), &argv("prog simulate --u0 7"), &e, &["ode", "fn"]).unwrap();
        assert_eq!(out, argv("prog simulate --seed=5 --ode=x --u0=2 --u0 7"));
        let m = cmd().try_get_matches_from(&out).unwrap();
        let (_, sub) = m.subcommand().unwrap();
        assert_eq!(sub.get_one::<String>("u0").unwrap(), "7");
    }

    #[test]
    fn command_line_system_replaces_file_system() {
        let e = parse_config("[simulate]\node=x\n").unwrap();
        let out = merge(&cmd(), &argv("prog simulate --fn t"), &e, &["ode", "fn"]).unwrap();
        assert_eq!(out, argv("prog simulate --fn t"));
    }

    #[test]
    fn unknown_key_in_own_section_is_an_error() {
        let e = parse_config("[simulate]\nbogus=1\n").unwrap();
        assert!(merge(&cmd(), &argv("prog simulate"), &e, &[]).is_err());
        let e = parse_config("[system]\nbogus=1\n").unwrap();
        assert!(merge(&cmd(), &argv("prog simulate"), &e, &[]).is_ok());
    }

    #[test]
    fn switches() {
        let e = parse_config("[simulate]\nquiet=true\n").unwrap();
        assert_eq!(
            merge(&cmd(), &argv("p simulate"), &e, &[]).unwrap(),
            argv("p simulate --quiet")
        );
        let e = parse_config("[simulate]\nquiet=maybe\n").unwrap();
        assert!(merge(&cmd(), &argv("p simulate"), &e, &[]).is_err());
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(
            config_path(&argv("p --config a.cfg simulate")).as_deref(),
            Some("a.cfg")
        );
        assert_eq!(
            config_path(&argv("p simulate --config=b")).as_deref(),
            Some("b")
        );
        assert_eq!(config_path(&argv("p simulate")), None);
    }
}
