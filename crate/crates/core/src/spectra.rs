//! Named eigenvalue branches of rectangles, the closed-form linear spectrum,
//! partition upper bounds for the second eigenvalue, and crossing detection.
//!
//! The named branches are first eigenvalues of subdomains:
//!
//! * `boxbar(p; R_a)` is `lambda_1` of the `(a/2) x 1` rectangle,
//! * `boxminus(p; R_a)` is `lambda_1` of the `a x (1/2)` rectangle, which
//!   equals `2^p lambda_1(p; R_{2a})` by scaling,
//! * `boxbslash(p; R_1)` is `lambda_1` of the unit right triangle.
//!
//! Both rectangles are meshed at the same resolution per unit length, so on
//! the square the two meshes are transposes of each other and
//! `boxminus = boxbar` holds to rounding.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::eigsolve::{self, BranchLabel, EigenResult, SolveOptions};
use crate::error::{check_exponent, Error, Result};
use crate::functional::Field;
use crate::mesh::{build_cut_square_piece, build_rectangle_mesh, build_triangle_mesh, DomainSpec, TriMesh};

/// One eigenvalue `pi^2 (i^2 / a^2 + j^2)` of the Laplacian on `R_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearEigenvalue {
    pub lambda: f64,
    pub i: usize,
    pub j: usize,
}

/// The `count` smallest Dirichlet Laplacian eigenvalues of `(0,a) x (0,1)`
/// with multiplicity. Values within relative `1e-12` count as equal and are
/// ordered by `(i, j)`.
pub fn linear_spectrum(a: f64, count: usize) -> Result<Vec<LinearEigenvalue>> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::NonPositiveDimension { a, b: 1.0 });
    }
    if count == 0 {
        return Err(Error::InvalidOption("count must be positive".into()));
    }
    let value = |i: usize, j: usize| PI * PI * ((i * i) as f64 / (a * a) + (j * j) as f64);
    // a pair among the k smallest dominates its i*j lower-left neighbours
    let mut all: Vec<LinearEigenvalue> = (1..=count)
        .flat_map(|i| (1..=count / i).map(move |j| (i, j)))
        .map(|(i, j)| LinearEigenvalue { lambda: value(i, j), i, j })
        .collect();
    all.sort_by(|x, y| {
        let tie = (x.lambda - y.lambda).abs() <= 1e-12 * x.lambda.max(y.lambda);
        if tie {
            (x.i, x.j).cmp(&(y.i, y.j))
        } else {
            x.lambda.total_cmp(&y.lambda)
        }
    });
    all.truncate(count);
    Ok(all)
}

fn check_aspect(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDimension { a, b: 1.0 })
    }
}

/// `lambda_1` on the `(a/2) x 1` rectangle; the eigenfunction is returned on
/// that half rectangle.
pub fn lambda_boxbar(p: f64, a: f64, n: usize, opts: &SolveOptions, warm: Option<&Field>) -> Result<EigenResult> {
    check_exponent(p)?;
    check_aspect(a)?;
    let m = build_rectangle_mesh(0.5 * a, 1.0, n)?;
    eigsolve::solve_lambda1(&m, p, opts, warm)
}

/// `lambda_1` on the `a x (1/2)` rectangle, equal to `2^p lambda_1(p; R_{2a})`
/// on the mesh of `R_{2a}` with `n / 2` cells per unit length.
pub fn lambda_boxminus(p: f64, a: f64, n: usize, opts: &SolveOptions, warm: Option<&Field>) -> Result<EigenResult> {
    check_exponent(p)?;
    check_aspect(a)?;
    let m = build_rectangle_mesh(a, 0.5, n)?;
    eigsolve::solve_lambda1(&m, p, opts, warm)
}

/// `lambda_1` on the unit right triangle.
pub fn lambda_boxbslash(p: f64, n: usize, opts: &SolveOptions, warm: Option<&Field>) -> Result<EigenResult> {
    check_exponent(p)?;
    let m = build_triangle_mesh(n)?;
    eigsolve::solve_lambda1(&m, p, opts, warm)
}

/// `f(p, a) = boxminus(p; R_a) - boxbar(p; R_a)`.
pub fn comparison_gap(p: f64, a: f64, n: usize, opts: &SolveOptions) -> Result<f64> {
    let minus = lambda_boxminus(p, a, n, opts, None)?;
    let bar = lambda_boxbar(p, a, n, opts, None)?;
    Ok(minus.lambda - bar.lambda)
}

/// Two-subdomain partitions of `R_a` used for the second eigenvalue bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PartitionFamily {
    /// Cut along `x = t`.
    Vertical,
    /// Cut along `y = t`.
    Horizontal,
    /// Cut along `x + y = t`; square only.
    Diagonal,
}

impl PartitionFamily {
    pub const ALL: [PartitionFamily; 3] = [Self::Vertical, Self::Horizontal, Self::Diagonal];
}

/// Best member found for one partition family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionBound {
    pub family: PartitionFamily,
    pub cut: f64,
    pub value: f64,
}

const SCAN_POINTS: usize = 33;

/// Evaluates `max(lambda_1(Omega_1), lambda_1(Omega_2))` for members of one
/// family, memoizing piece eigenvalues by their mesh.
struct FamilyEval<'a> {
    p: f64,
    a: f64,
    n: usize,
    family: PartitionFamily,
    opts: &'a SolveOptions,
    cache: Mutex<HashMap<PieceKey, f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum PieceKey {
    Rect(u64, u64),
    Diagonal(usize, bool),
}

impl FamilyEval<'_> {
    /// Parameter range of the cut.
    fn range(&self) -> f64 {
        match self.family {
            PartitionFamily::Vertical => self.a,
            PartitionFamily::Horizontal => 1.0,
            PartitionFamily::Diagonal => 2.0,
        }
    }

    fn pieces(&self, t: f64) -> [PieceKey; 2] {
        let rect = |w: f64, h: f64| PieceKey::Rect(w.to_bits(), h.to_bits());
        match self.family {
            PartitionFamily::Vertical => [rect(t, 1.0), rect(self.a - t, 1.0)],
            PartitionFamily::Horizontal => [rect(self.a, t), rect(self.a, 1.0 - t)],
            PartitionFamily::Diagonal => {
                let m = (t * self.n as f64).round() as usize;
                [PieceKey::Diagonal(m, true), PieceKey::Diagonal(m, false)]
            }
        }
    }

    fn piece_mesh(&self, key: PieceKey) -> Result<Option<TriMesh>> {
        let built = match key {
            PieceKey::Rect(w, h) => build_rectangle_mesh(f64::from_bits(w), f64::from_bits(h), self.n),
            PieceKey::Diagonal(m, below) => build_cut_square_piece(m, self.n, below),
        };
        match built {
            Ok(m) => Ok(Some(m)),
            // pieces thinner than the mesh do not contribute
            Err(Error::ResolutionTooSmall { .. }) | Err(Error::InvalidOption(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn piece(&self, key: PieceKey) -> Result<f64> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let value = match self.piece_mesh(key)? {
            None => f64::INFINITY,
            Some(m) => eigsolve::solve_lambda1(&m, self.p, self.opts, None)?.lambda,
        };
        self.cache.lock().expect("cache lock").insert(key, value);
        Ok(value)
    }

    fn value(&self, t: f64) -> Result<f64> {
        let [k1, k2] = self.pieces(t);
        Ok(self.piece(k1)?.max(self.piece(k2)?))
    }

    fn minimize(&self) -> Result<PartitionBound> {
        let len = self.range();
        let ts: Vec<f64> = (1..=SCAN_POINTS).map(|k| len * k as f64 / (SCAN_POINTS + 1) as f64).collect();
        let vals: Vec<f64> = ts.par_iter().map(|&t| self.value(t)).collect::<Result<_>>()?;
        let best = (0..ts.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j))).expect("nonempty scan");
        let (mut lo, mut hi) =
            (len * best as f64 / (SCAN_POINTS + 1) as f64, len * (best + 2) as f64 / (SCAN_POINTS + 1) as f64);
        let (mut cut, mut value) = (ts[best], vals[best]);

        // golden section on the bracket around the best scan point
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let resolution = 0.5 / self.n as f64;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = self.value(x1)?;
        let mut f2 = self.value(x2)?;
        while hi - lo > resolution {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = self.value(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = self.value(x2)?;
            }
        }
        for (t, f) in [(x1, f1), (x2, f2)] {
            if f < value {
                cut = t;
                value = f;
            }
        }
        Ok(PartitionBound { family: self.family, cut, value })
    }
}

/// Upper bound for `lambda_2(p; R_a)`: the minimum over the given partition
/// families of `max(lambda_1(Omega_1), lambda_1(Omega_2))`. Each family is
/// scanned at 33 equispaced cuts and refined by golden section around the
/// best one. The diagonal family requires `a = 1`.
pub fn lambda2_upper(
    p: f64,
    a: f64,
    n: usize,
    families: &[PartitionFamily],
    opts: &SolveOptions,
) -> Result<(f64, Vec<PartitionBound>)> {
    check_exponent(p)?;
    check_aspect(a)?;
    if families.is_empty() {
        return Err(Error::InvalidOption("partition family list is empty".into()));
    }
    if families.contains(&PartitionFamily::Diagonal) && a != 1.0 {
        return Err(Error::UnsupportedDomain { expected: "the unit square for diagonal cuts" });
    }
    let bounds = families
        .iter()
        .map(|&family| FamilyEval { p, a, n, family, opts, cache: Mutex::new(HashMap::new()) }.minimize())
        .collect::<Result<Vec<_>>>()?;
    let best = bounds.iter().map(|b| b.value).fold(f64::INFINITY, f64::min);
    Ok((best, bounds))
}

/// Value of a named branch on `R_a` at `p`.
pub fn branch_value(label: BranchLabel, p: f64, a: f64, n: usize, opts: &SolveOptions) -> Result<f64> {
    Ok(match label {
        BranchLabel::Lambda1 => {
            check_aspect(a)?;
            let m = build_rectangle_mesh(a, 1.0, n)?;
            eigsolve::solve_lambda1(&m, p, opts, None)?.lambda
        }
        BranchLabel::BoxBar => lambda_boxbar(p, a, n, opts, None)?.lambda,
        BranchLabel::BoxMinus => lambda_boxminus(p, a, n, opts, None)?.lambda,
        BranchLabel::BoxBslash => {
            if a != 1.0 {
                return Err(Error::UnsupportedDomain { expected: "the unit square" });
            }
            lambda_boxbslash(p, n, opts, None)?.lambda
        }
        BranchLabel::Lambda2Upper => {
            let families: &[PartitionFamily] =
                if a == 1.0 { &PartitionFamily::ALL } else { &PartitionFamily::ALL[..2] };
            lambda2_upper(p, a, n, families, opts)?.0
        }
        BranchLabel::Lin(k) => {
            check_exponent(p)?;
            if k == 0 {
                return Err(Error::InvalidOption("lin-k needs k >= 1".into()));
            }
            linear_spectrum(a, k)?[k - 1].lambda
        }
    })
}

/// Mesh on which a named branch is a first eigenvalue; `None` for branches
/// that are not.
pub fn branch_mesh(label: BranchLabel, a: f64, n: usize) -> Result<Option<TriMesh>> {
    check_aspect(a)?;
    Ok(match label {
        BranchLabel::Lambda1 => Some(build_rectangle_mesh(a, 1.0, n)?),
        BranchLabel::BoxBar => Some(build_rectangle_mesh(0.5 * a, 1.0, n)?),
        BranchLabel::BoxMinus => Some(build_rectangle_mesh(a, 0.5, n)?),
        BranchLabel::BoxBslash => {
            if a != 1.0 {
                return Err(Error::UnsupportedDomain { expected: "the unit square" });
            }
            Some(build_triangle_mesh(n)?)
        }
        BranchLabel::Lambda2Upper | BranchLabel::Lin(_) => None,
    })
}

/// Continuation of a named branch over a p-grid. First-eigenvalue branches
/// are warm-started on their own mesh; the others are evaluated pointwise in
/// parallel.
pub fn continue_named_branch(
    label: BranchLabel,
    a: f64,
    grid: &[f64],
    n: usize,
    opts: &SolveOptions,
) -> Result<eigsolve::Branch> {
    eigsolve::check_grid(grid)?;
    if let Some(m) = branch_mesh(label, a, n)? {
        return eigsolve::continue_on_mesh(&m, label, a, grid, opts);
    }
    let samples = grid
        .par_iter()
        .map(|&p| {
            branch_value(label, p, a, n, opts).map(|lambda| eigsolve::BranchSample {
                p,
                lambda,
                n,
                converged: true,
                iterations: 0,
                grad_norm: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(eigsolve::Branch { label, a, samples })
}

/// Result of a bisection for the crossing of two branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingReport {
    pub branch_a: String,
    pub branch_b: String,
    /// Final bracket `(p_lo, p_hi)` around the crossing.
    pub bracket: (f64, f64),
    pub p_star: f64,
    pub tol: f64,
    /// `(lambda_a, lambda_b)` at `p_star`.
    pub values: (f64, f64),
    /// Largest `|lambda_a - lambda_b|` at the final bracket ends.
    pub function_tol: f64,
    pub bisections: usize,
}

impl CrossingReport {
    pub fn residual(&self) -> f64 {
        (self.values.0 - self.values.1).abs()
    }
}

/// Outcome of [`bisect_crossing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub bracket: (f64, f64),
    pub p_star: f64,
    /// `(a, b)` at `p_star`.
    pub values: (f64, f64),
    /// Largest `|a - b|` at the final bracket ends.
    pub function_tol: f64,
    pub steps: usize,
}

/// Bisection for a sign change of `g(p) = a(p) - b(p)` on `[lo, hi]` down to
/// a bracket of width `tol`.
pub fn bisect_crossing(
    mut eval: impl FnMut(f64) -> Result<(f64, f64)>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<Bisection> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidOption("bracket must satisfy lo < hi and tol > 0".into()));
    }
    let (alo, blo) = eval(lo)?;
    let (ahi, bhi) = eval(hi)?;
    let mut glo = alo - blo;
    let mut ghi = ahi - bhi;
    if glo == 0.0 {
        return Ok(Bisection { bracket: (lo, lo), p_star: lo, values: (alo, blo), function_tol: 0.0, steps: 0 });
    }
    if ghi == 0.0 {
        return Ok(Bisection { bracket: (hi, hi), p_star: hi, values: (ahi, bhi), function_tol: 0.0, steps: 0 });
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut steps = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (am, bm) = eval(mid)?;
        let gm = am - bm;
        steps += 1;
        if gm == 0.0 {
            return Ok(Bisection { bracket: (mid, mid), p_star: mid, values: (am, bm), function_tol: 0.0, steps });
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let values = eval(p_star)?;
    Ok(Bisection { bracket: (lo, hi), p_star, values, function_tol: glo.abs().max(ghi.abs()), steps })
}

/// Crossing of two named branches on `R_a` inside `bracket`. First-eigenvalue
/// branches reuse the previous eigenfunction as warm start.
pub fn detect_crossing(
    label_a: BranchLabel,
    label_b: BranchLabel,
    a: f64,
    bracket: (f64, f64),
    tol: f64,
    n: usize,
    opts: &SolveOptions,
) -> Result<CrossingReport> {
    if label_a == label_b {
        return Err(Error::InvalidOption("a branch cannot cross itself".into()));
    }
    check_exponent(bracket.0)?;
    check_exponent(bracket.1)?;
    let mesh_a = branch_mesh(label_a, a, n)?;
    let mesh_b = branch_mesh(label_b, a, n)?;
    let mut warm_a: Option<Field> = None;
    let mut warm_b: Option<Field> = None;
    let eval_one = |label: BranchLabel, mesh: &Option<TriMesh>, warm: &mut Option<Field>, p: f64| -> Result<f64> {
        match mesh {
            Some(m) => {
                let r = eigsolve::solve_lambda1(m, p, opts, warm.as_ref())?;
                if !r.converged {
                    return Err(Error::Unconverged);
                }
                *warm = Some(r.field);
                Ok(r.lambda)
            }
            None => branch_value(label, p, a, n, opts),
        }
    };
    let b = bisect_crossing(
        |p| {
            let va = eval_one(label_a, &mesh_a, &mut warm_a, p)?;
            let vb = eval_one(label_b, &mesh_b, &mut warm_b, p)?;
            Ok((va, vb))
        },
        bracket,
        tol,
    )?;
    Ok(CrossingReport {
        branch_a: label_a.to_string(),
        branch_b: label_b.to_string(),
        bracket: b.bracket,
        p_star: b.p_star,
        tol,
        values: b.values,
        function_tol: b.function_tol,
        bisections: b.steps,
    })
}

/// Domain of the first-eigenvalue problem behind a named branch.
pub fn branch_domain(label: BranchLabel, a: f64) -> Option<DomainSpec> {
    match label {
        BranchLabel::Lambda1 => Some(DomainSpec::rectangle(a, 1.0)),
        BranchLabel::BoxBar => Some(DomainSpec::rectangle(0.5 * a, 1.0)),
        BranchLabel::BoxMinus => Some(DomainSpec::rectangle(a, 0.5)),
        BranchLabel::BoxBslash => Some(DomainSpec::unit_triangle()),
        BranchLabel::Lambda2Upper | BranchLabel::Lin(_) => None,
    }
}
