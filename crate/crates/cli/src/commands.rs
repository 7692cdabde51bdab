//! Subcommand bodies. Each returns the process exit code on success; errors
//! are mapped to codes by [`exit_code`].

use std::fmt;
use std::path::{Path, PathBuf};

use plap::calculus::{self, ClosedFormEigenfunction};
use plap::eigsolve::{self, p_grid, solve_lambda1};
use plap::{asymptotics, spectra, Branch, BranchLabel, DomainSpec, SolveOptions};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::Settings;
use crate::manifest::{RunManifest, SolveSummary};
use crate::output::{emit, json_with_hash, CsvTable};
use crate::{svg, validate as suite, DomainArg, Shared, Wrt};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;

/// Error carrying an explicit exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Failure { code: EXIT_USAGE, message: message.into() }.into()
}

/// Invalid inputs are usage errors; everything else that fails inside the
/// toolkit is numerical.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    use plap::Error as E;
    for cause in e.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::InvalidExponent(_)
                | E::NonPositiveDimension { .. }
                | E::ResolutionTooSmall { .. }
                | E::NonPositiveScale(_)
                | E::OverlappingDisks(..)
                | E::DiskOutsideDomain(_)
                | E::DimensionMismatch { .. }
                | E::UnsupportedDomain { .. }
                | E::InvalidOption(_) => EXIT_USAGE,
                E::ZeroMass
                | E::EmptyInterior
                | E::Unconverged
                | E::NoSignChange { .. }
                | E::QuadratureBudget { .. }
                | E::NotPositiveDefinite => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_NUMERICAL
}

fn solver(settings: &Settings) -> SolveOptions {
    let mut opts = settings.solver;
    if let Some(t) = settings.tol {
        opts.tol_lambda = t;
    }
    opts
}

fn domain_spec(domain: DomainArg, s: &Settings) -> DomainSpec {
    match domain {
        DomainArg::Rect => DomainSpec::rectangle(s.a, s.b),
        DomainArg::Tri => DomainSpec::unit_triangle(),
    }
}

fn label(s: &str) -> anyhow::Result<BranchLabel> {
    s.parse::<BranchLabel>().map_err(|e| usage(e.to_string()))
}

fn grid(from: f64, to: f64, step: f64) -> anyhow::Result<Vec<f64>> {
    let g = p_grid(from, to, step);
    if g.is_empty() {
        return Err(usage("p-grid is empty: need p-from <= p-to and p-step > 0"));
    }
    Ok(g)
}

/// Emits a JSON artifact and, for file outputs, the manifest sidecar.
fn finish_json(manifest: &RunManifest, value: &impl Serialize, out: Option<&Path>) -> anyhow::Result<()> {
    emit(out, &json_with_hash(value, &manifest.hash)?)?;
    if let Some(path) = out {
        manifest.write_sidecar(path)?;
    }
    Ok(())
}

pub fn eig1(domain: DomainArg, shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve(shared)?;
    let d = domain_spec(domain, &s);
    let opts = solver(&s);
    let mut manifest = RunManifest::new("eig1", &json!({ "domain": d, "settings": s }))?;
    let m = eigsolve::mesh_for(&d, s.n)?;
    let res = solve_lambda1(&m, s.p, &opts, None)?;
    manifest.solves.push(SolveSummary {
        row: None,
        label: BranchLabel::Lambda1.to_string(),
        p: res.p,
        n: res.n,
        lambda: res.lambda,
        iterations: res.iterations,
        residual: res.grad_norm,
        converged: res.converged,
    });
    finish_json(&manifest, &res, s.out.as_deref())?;
    if !res.converged {
        eprintln!("warning: solve did not converge in {} iterations", res.iterations);
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

pub fn branch(label_name: &str, p_from: f64, p_to: f64, p_step: f64, shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve(shared)?;
    let l = label(label_name)?;
    let g = grid(p_from, p_to, p_step)?;
    let opts = solver(&s);
    let mut manifest = RunManifest::new(
        "branch",
        &json!({ "label": l, "p_from": p_from, "p_to": p_to, "p_step": p_step, "settings": s }),
    )?;
    let b = spectra::continue_named_branch(l, s.a, &g, s.n, &opts)?;
    let mut table = CsvTable::default();
    table.push_branch(&b);
    emit(s.out.as_deref(), &table.render(&manifest.hash))?;
    let all_converged = table.solves.iter().all(|r| r.converged);
    manifest.solves = table.solves;
    if let Some(path) = s.out.as_deref() {
        manifest.write_sidecar(path)?;
    }
    Ok(if all_converged { EXIT_OK } else { EXIT_NUMERICAL })
}

#[derive(Serialize)]
struct DerivReport {
    wrt: &'static str,
    p: f64,
    domain: DomainSpec,
    n: usize,
    lambda: f64,
    value: f64,
    finite_difference: f64,
    step: f64,
    /// `|value - finite_difference|`.
    err_estimate: f64,
}

pub fn deriv(wrt: Wrt, domain: DomainArg, step: f64, shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve(shared)?;
    if !(step > 0.0) {
        return Err(usage("step must be positive"));
    }
    let d = domain_spec(domain, &s);
    let opts = solver(&s);
    let wrt_name = match wrt {
        Wrt::P => "p",
        Wrt::A => "a",
    };
    let mut manifest =
        RunManifest::new("deriv", &json!({ "wrt": wrt_name, "domain": d, "step": step, "settings": s }))?;
    let m = eigsolve::mesh_for(&d, s.n)?;
    let res = solve_lambda1(&m, s.p, &opts, None)?;
    let (value, fd) = match wrt {
        Wrt::P => {
            if s.p - step <= 1.0 {
                return Err(usage("p - step must exceed 1"));
            }
            let value = calculus::dlambda1_dp(&m, &res)?;
            let fd = calculus::fd_derivative(|q| Ok(solve_lambda1(&m, q, &opts, Some(&res.field))?.lambda), s.p, step)?;
            (value, fd)
        }
        Wrt::A => {
            if domain != DomainArg::Rect {
                return Err(usage("the width derivative needs --domain rect"));
            }
            let value = calculus::dlambda1_da(&m, &res)?;
            let fd = calculus::fd_derivative(
                |a| {
                    let mw = eigsolve::mesh_for(&DomainSpec::rectangle(a, s.b), s.n)?;
                    Ok(solve_lambda1(&mw, s.p, &opts, None)?.lambda)
                },
                s.a,
                step,
            )?;
            (value, fd)
        }
    };
    manifest.solves.push(SolveSummary {
        row: None,
        label: BranchLabel::Lambda1.to_string(),
        p: res.p,
        n: res.n,
        lambda: res.lambda,
        iterations: res.iterations,
        residual: res.grad_norm,
        converged: res.converged,
    });
    let report = DerivReport {
        wrt: wrt_name,
        p: s.p,
        domain: d,
        n: s.n,
        lambda: res.lambda,
        value,
        finite_difference: fd,
        step,
        err_estimate: (value - fd).abs(),
    };
    finish_json(&manifest, &report, s.out.as_deref())?;
    Ok(EXIT_OK)
}

pub fn numvalues(which: &str, shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve(shared)?;
    let w: ClosedFormEigenfunction = which.parse().map_err(|e: plap::Error| usage(e.to_string()))?;
    let tol = s.tol_or(1e-3);
    let manifest = RunManifest::new("numvalues", &json!({ "which": which, "tol": tol }))?;
    let q = calculus::numvalues_quadrature(w, tol)?;
    let report = json!({
        "which": which,
        "tol": tol,
        "value": q.value,
        "err_estimate": q.err_estimate,
        "evaluations": q.evaluations,
    });
    finish_json(&manifest, &report, s.out.as_deref())?;
    Ok(EXIT_OK)
}

pub fn crossing(a_name: &str, b_name: &str, bracket: (f64, f64), shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve(shared)?;
    let (la, lb) = (label(a_name)?, label(b_name)?);
    let tol = s.tol_or(1e-3);
    let opts = s.solver;
    let manifest = RunManifest::new(
        "crossing",
        &json!({ "branch_a": la, "branch_b": lb, "bracket": bracket, "tol": tol, "settings": s }),
    )?;
    let report = spectra::detect_crossing(la, lb, s.a, bracket, tol, s.n, &opts)?;
    let mut value = serde_json::to_value(&report)?;
    value["residual"] = json!(report.residual());
    value["a"] = json!(s.a);
    value["n"] = json!(s.n);
    finish_json(&manifest, &value, s.out.as_deref())?;
    Ok(EXIT_OK)
}

pub fn packing(shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve(shared)?;
    let manifest = RunManifest::new("packing", &json!({ "p": s.p, "n": s.n }))?;
    let packing = asymptotics::three_disk_packing();
    packing.verify(1e-12)?;
    let b = asymptotics::packing_bound(s.p, s.n)?;
    let mut value = serde_json::to_value(&b)?;
    value["rel_diff"] = json!((b.numeric - b.closed_form).abs() / b.closed_form);
    value["disks"] = serde_json::to_value(packing.disks)?;
    finish_json(&manifest, &value, s.out.as_deref())?;
    Ok(EXIT_OK)
}

fn default_labels(a: f64) -> Vec<BranchLabel> {
    if a == 1.0 {
        vec![BranchLabel::BoxBar, BranchLabel::BoxBslash, BranchLabel::BoxMinus]
    } else {
        vec![BranchLabel::BoxBar, BranchLabel::BoxMinus]
    }
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension(ext);
    p
}

pub fn diagram(labels: &[String], p_from: f64, p_to: f64, p_step: f64, shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve(shared)?;
    let ls = if labels.is_empty() {
        default_labels(s.a)
    } else {
        labels.iter().map(|l| label(l)).collect::<anyhow::Result<Vec<_>>>()?
    };
    let g = grid(p_from, p_to, p_step)?;
    let opts = solver(&s);
    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("diagram.svg"));
    let mut manifest = RunManifest::new(
        "diagram",
        &json!({ "labels": ls, "p_from": p_from, "p_to": p_to, "p_step": p_step, "settings": s }),
    )?;
    let branches: Vec<Branch> =
        ls.par_iter().map(|&l| spectra::continue_named_branch(l, s.a, &g, s.n, &opts)).collect::<plap::Result<_>>()?;

    let title = format!("Eigenvalue branches on R_a, a = {}, n = {}", s.a, s.n);
    emit(Some(&out), &svg::render(&branches, &title))?;
    let mut table = CsvTable::default();
    for b in &branches {
        table.push_branch(b);
    }
    let csv_path = with_extension(&out, "csv");
    emit(Some(&csv_path), &table.render(&manifest.hash))?;
    let all_converged = table.solves.iter().all(|r| r.converged);
    manifest.solves = table.solves;
    manifest.write_sidecar(&out)?;
    eprintln!("wrote {} and {}", out.display(), csv_path.display());
    Ok(if all_converged { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn validate(shared: &Shared) -> anyhow::Result<u8> {
    let s = Settings::resolve_with(shared, 16)?;
    let n = s.n;
    let manifest = RunManifest::new("validate", &json!({ "n": n, "solver": s.solver }))?;
    let checks = suite::run(n, &s.solver);
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed", checks.len());
    if let Some(path) = s.out.as_deref() {
        finish_json(&manifest, &json!({ "checks": checks, "failed": failed }), Some(path))?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VALIDATION })
}
