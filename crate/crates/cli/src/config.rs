//! `--config FILE`: TOML defaults spliced into argv ahead of the user's flags.
//!
//! Top-level keys apply to every subcommand that has a flag of that name;
//! a `[subcommand]` table applies to that subcommand only and wins over the
//! top level. Flags given on the command line win over both.

use std::collections::BTreeMap;

use clap::{ArgAction, CommandFactory};
use toml::Value;

use crate::{Cli, Failure};

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn given(argv: &[String], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefix = format!("{flag}=");
    argv.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

fn render(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

pub fn splice(argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let root = Cli::command();
    let Some(sub_pos) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| root.find_subcommand(a.as_str()).is_some())
        .map(|(i, _)| i)
    else {
        return Ok(argv);
    };
    let sub = root.find_subcommand(&argv[sub_pos]).unwrap();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("cannot read config {path}: {e}")))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {path}: {e}")))?;

    let known = |cmd: &clap::Command, key: &str| {
        cmd.get_arguments().any(|a| a.get_long() == Some(key) && key != "config" && key != "help")
    };
    let mut values: BTreeMap<String, Value> = BTreeMap::new();
    let mut section = None;
    for (key, value) in &table {
        let key = key.replace('_', "-");
        if let Value::Table(t) = value {
            let Some(target) = root.find_subcommand(&key) else {
                return Err(Failure::Usage(format!("config {path}: unknown section [{key}]")));
            };
            for k in t.keys() {
                if !known(target, &k.replace('_', "-")) {
                    return Err(Failure::Usage(format!("config {path}: [{key}] has no flag --{k}")));
                }
            }
            if target.get_name() == sub.get_name() {
                section = Some(t);
            }
        } else if root.get_subcommands().any(|c| known(c, &key)) {
            if known(sub, &key) {
                values.insert(key, value.clone());
            }
        } else {
            return Err(Failure::Usage(format!("config {path}: no subcommand has a flag --{key}")));
        }
    }
    for (k, v) in section.into_iter().flatten() {
        values.insert(k.replace('_', "-"), v.clone());
    }

    let mut extra = Vec::new();
    for (key, value) in values {
        if given(&argv[sub_pos + 1..], &key) {
            continue;
        }
        let arg = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())).unwrap();
        let bad = || Failure::Usage(format!("config {path}: unsupported value for {key}"));
        match (&value, arg.get_action()) {
            (Value::Boolean(b), ArgAction::SetTrue) => {
                if *b {
                    extra.push(format!("--{key}"));
                }
            }
            (Value::Array(items), ArgAction::Append) => {
                for item in items {
                    extra.push(format!("--{key}"));
                    extra.push(render(item).ok_or_else(bad)?);
                }
            }
            (Value::Array(items), _) => {
                let parts: Option<Vec<String>> = items.iter().map(render).collect();
                extra.push(format!("--{key}"));
                extra.push(parts.ok_or_else(bad)?.join(","));
            }
            (v, _) => {
                extra.push(format!("--{key}"));
                extra.push(render(v).ok_or_else(bad)?);
            }
        }
    }
    let mut out = argv;
    let tail = out.split_off(sub_pos + 1);
    out.extend(extra);
    out.extend(tail);
    Ok(out)
}
