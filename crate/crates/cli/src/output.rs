//! Artifact formatting: 12-significant-digit numbers, CSV rows and JSON
//! documents carrying the manifest hash.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use plap::Branch;
use serde::Serialize;
use serde_json::Value;

use crate::manifest::SolveSummary;

pub const CSV_HEADER: &str = "label,p,a,n,lambda,iters,residual,converged";

/// `%.12g`: 12 significant digits, trailing zeros removed, scientific
/// notation outside `[1e-5, 1e12)`. Independent of locale.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV row per branch sample, in branch order then p order.
#[derive(Debug, Default)]
pub struct CsvTable {
    rows: Vec<String>,
    pub solves: Vec<SolveSummary>,
}

impl CsvTable {
    pub fn push_branch(&mut self, branch: &Branch) {
        let label = branch.label.to_string();
        for s in &branch.samples {
            let row = self.rows.len();
            self.rows.push(format!(
                "{label},{},{},{},{},{},{},{}",
                sig12(s.p),
                sig12(branch.a),
                s.n,
                sig12(s.lambda),
                s.iterations,
                sig12(s.grad_norm),
                s.converged
            ));
            self.solves.push(SolveSummary {
                row: Some(row),
                label: label.clone(),
                p: s.p,
                n: s.n,
                lambda: s.lambda,
                iterations: s.iterations,
                residual: s.grad_norm,
                converged: s.converged,
            });
        }
    }

    pub fn render(&self, manifest_hash: &str) -> String {
        let mut text = format!("# manifest {manifest_hash}\n{CSV_HEADER}\n");
        for r in &self.rows {
            text.push_str(r);
            text.push('\n');
        }
        text
    }
}

/// Pretty JSON of `value` with a top-level `manifest_hash` key. Object keys
/// are emitted in sorted order.
pub fn json_with_hash(value: &impl Serialize, manifest_hash: &str) -> anyhow::Result<String> {
    let mut v = serde_json::to_value(value)?;
    match &mut v {
        Value::Object(map) => {
            map.insert("manifest_hash".into(), Value::String(manifest_hash.into()));
        }
        other => {
            let inner = other.take();
            v = serde_json::json!({ "manifest_hash": manifest_hash, "result": inner });
        }
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
