#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn ecgstress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecgstress"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = ecgstress(args);
    assert!(
        out.status.success(),
        "ecgstress {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Value of attribute `name` in the first element carrying `marker`.
pub fn attr(svg: &str, marker: &str, name: &str) -> Option<String> {
    let start = svg.find(marker)?;
    let tag_start = svg[..start].rfind('<')?;
    let tag = &svg[tag_start..tag_start + svg[tag_start..].find('>')?];
    let key = format!(" {name}=\"");
    let at = tag.find(&key)? + key.len();
    Some(tag[at..at + tag[at..].find('"')?].to_string())
}

/// Tag balance check: every opened element is closed in order.
pub fn well_formed(svg: &str) -> bool {
    let mut stack: Vec<&str> = Vec::new();
    let mut rest = svg;
    while let Some(open) = rest.find('<') {
        let Some(close) = rest[open..].find('>') else {
            return false;
        };
        let tag = &rest[open + 1..open + close];
        rest = &rest[open + close + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            if stack.pop() != Some(name.trim()) {
                return false;
            }
        } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
            stack.push(tag.split_whitespace().next().unwrap_or(""));
        }
    }
    stack.is_empty()
}

/// Points of the `d` attribute of a `<path>`, in pixels.
pub fn path_points(d: &str) -> Vec<(f64, f64)> {
    d.split_whitespace()
        .map(|tok| {
            let (x, y) = tok.trim_start_matches(['M', 'L']).split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}
