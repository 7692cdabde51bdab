//! First eigenpair of the discrete p-Laplacian by preconditioned projected
//! descent on the Rayleigh quotient, and its continuation in p.
//!
//! Each step preconditions the Rayleigh gradient with the stiffness matrix
//! assembled from the element Hessians of the regularized energy density,
//! `p s^((p-2)/2) (I + (p-2) g g^T / s)` with `s = |g|^2 + eps^2`. For
//! `p = 2` the unit step is exactly one step of inverse iteration; for other
//! `p` it is one Newton step of the inner problem of nonlinear inverse
//! iteration. The regularization `eps` enters only the preconditioner, the
//! line search always works on the unregularized quotient, so every accepted
//! value is an exact discrete Rayleigh quotient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_exponent, Error, Result};
use crate::functional::{self, Field};
use crate::mesh::{self, DomainKind, DomainSpec, TriMesh};
use crate::sparse::StiffnessPattern;

/// Regularization schedule of the preconditioner weights.
///
/// `eps` is relative to the root-mean-square element gradient of the
/// current iterate, which keeps the iteration invariant under mesh scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self { initial: 1e-2, decay: 0.1, floor: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Relative change of lambda between accepted iterates.
    pub tol_lambda: f64,
    /// Preconditioned gradient norm relative to lambda.
    pub tol_grad: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub eps: EpsSchedule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            tol_lambda: 1e-10,
            tol_grad: 1e-8,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            eps: EpsSchedule::default(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOption(m.to_string()));
        if self.max_iters == 0 {
            return bad("max-iters must be positive");
        }
        if !(self.tol_lambda > 0.0 && self.tol_grad > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo-c must lie in (0, 1)");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo-shrink must lie in (0, 1)");
        }
        let e = self.eps;
        if !(e.initial >= 0.0 && e.floor >= 0.0 && e.decay > 0.0 && e.decay < 1.0) {
            return bad("invalid eps schedule");
        }
        Ok(())
    }
}

/// Converged (or last) iterate of a first-eigenpair solve.
#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub p: f64,
    pub domain: DomainSpec,
    pub n: usize,
    pub lambda: f64,
    /// Eigenfunction normalized to unit p-mass, positive on free vertices.
    #[serde(skip)]
    pub field: Field,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub sign_constant: bool,
    /// Accepted Rayleigh values, starting with the initial iterate.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl EigenResult {
    /// Whether the accepted Rayleigh values never increased.
    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Positive cold-start field: the product tent on rectangles, `xy(1-x-y)`
/// on the unit triangle (scaled with the mesh).
pub fn initial_field(m: &TriMesh) -> Field {
    let (a, b) = (m.domain.a, m.domain.b);
    match m.domain.kind {
        DomainKind::Triangle => Field::interpolate(m, |x, y| (x * y * (a - x - y)).max(0.0)),
        _ => Field::interpolate(m, |x, y| (x * (a - x) * y * (b - y)).max(0.0)),
    }
}

fn normalize(m: &TriMesh, u: &mut [f64], p: f64) -> f64 {
    let n = functional::mass(m, u, p);
    let s = n.powf(-1.0 / p);
    for v in u.iter_mut() {
        *v *= s;
    }
    n
}

const STAGNATION_ULPS: f64 = 8.0;
const STAGNATION_STEPS: usize = 5;

/// Acceptance test once no further decrease is possible in floating point.
fn stalled_converged(opts: &SolveOptions, grad_norm: f64, dl: f64) -> bool {
    grad_norm < opts.tol_grad.sqrt() * 1e-2 && dl < opts.tol_lambda.sqrt()
}

/// Computes `lambda_1(p)` on `m` starting from `warm` (or the cold start).
pub fn solve_lambda1(m: &TriMesh, p: f64, opts: &SolveOptions, warm: Option<&Field>) -> Result<EigenResult> {
    let pattern = StiffnessPattern::new(m)?;
    solve_with_pattern(m, &pattern, p, opts, warm)
}

pub(crate) fn solve_with_pattern(
    m: &TriMesh,
    pattern: &StiffnessPattern,
    p: f64,
    opts: &SolveOptions,
    warm: Option<&Field>,
) -> Result<EigenResult> {
    check_exponent(p)?;
    opts.validate()?;
    let nv = m.num_vertices();
    if let Some(w) = warm {
        if w.len() != nv {
            return Err(Error::DimensionMismatch { expected: nv, got: w.len() });
        }
    }
    let mut u = match warm {
        Some(w) => {
            let mut f = w.clone();
            f.enforce_dirichlet(m);
            if functional::mass(m, &f.values, p) > 0.0 {
                f
            } else {
                initial_field(m)
            }
        }
        None => initial_field(m),
    }
    .values;
    if !(normalize(m, &mut u, p) > 0.0) {
        return Err(Error::ZeroMass);
    }

    let dofs = &pattern.vertex_of_dof;
    let mut lambda = functional::energy(m, &u, p, 0.0);
    let mut trace = vec![lambda];
    let mut prev_lambda = f64::INFINITY;
    let mut eps_rel = opts.eps.initial;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut tensors = vec![[0.0; 3]; m.num_triangles()];
    let mut ge = vec![0.0; nv];
    let mut gn = vec![0.0; nv];
    let mut trial = vec![0.0; nv];
    let mut fixed_factor = None;
    // accepted steps in a row that left lambda unchanged up to rounding
    let mut stagnant = 0;

    while iterations < opts.max_iters {
        ge.iter_mut().for_each(|x| *x = 0.0);
        gn.iter_mut().for_each(|x| *x = 0.0);
        functional::energy_gradient(m, &u, p, 0.0, &mut ge);
        functional::mass_gradient(m, &u, p, &mut gn);
        // Rayleigh gradient at unit mass.
        let r: Vec<f64> = dofs.iter().map(|&v| ge[v] - lambda * gn[v]).collect();

        // A constant-coefficient preconditioner is factored once.
        let scale;
        let factor_owned;
        let factor = if p == 2.0 {
            if fixed_factor.is_none() {
                fixed_factor = Some(pattern.factor_weighted(m, &vec![2.0; m.num_triangles()])?);
            }
            scale = 1.0;
            fixed_factor.as_ref().expect("factored")
        } else {
            scale = preconditioner_tensors(m, &u, p, eps_rel, &mut tensors);
            factor_owned = pattern.factor_tensor(m, &tensors)?;
            &factor_owned
        };
        let z = pattern.solve(factor, &r);
        // r . P^{-1} r with P the unnormalized preconditioner
        let rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        grad_norm = (rz.max(0.0) * scale / lambda).sqrt();

        let dl = (prev_lambda - lambda).abs() / lambda;
        if dl < opts.tol_lambda && grad_norm < opts.tol_grad {
            converged = true;
            break;
        }

        let slope = -rz * scale;
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            trial.copy_from_slice(&u);
            for (k, &v) in dofs.iter().enumerate() {
                trial[v] -= t * scale * z[k];
            }
            let nn = functional::mass(m, &trial, p);
            if nn > 0.0 {
                let rt = functional::energy(m, &trial, p, 0.0) / nn;
                if rt <= lambda + opts.armijo_c * t * slope {
                    accepted = Some(rt);
                    break;
                }
            }
            t *= opts.armijo_shrink;
        }
        iterations += 1;
        match accepted {
            Some(rt) => {
                stagnant = if lambda - rt <= STAGNATION_ULPS * f64::EPSILON * lambda { stagnant + 1 } else { 0 };
                std::mem::swap(&mut u, &mut trial);
                normalize(m, &mut u, p);
                prev_lambda = lambda;
                lambda = rt;
                trace.push(lambda);
                if stagnant >= STAGNATION_STEPS {
                    // the gradient norm has hit its rounding floor
                    converged = stalled_converged(opts, grad_norm, dl);
                    break;
                }
            }
            None => {
                // Stalled: the rounding floor of the quotient is reached or
                // the preconditioner is too crude.
                if p != 2.0 && eps_rel > opts.eps.floor {
                    eps_rel = (eps_rel * opts.eps.decay).max(opts.eps.floor);
                    continue;
                }
                converged = stalled_converged(opts, grad_norm, dl);
                break;
            }
        }
    }

    let mut field = Field::from_values(u);
    let free_sum: f64 = field.values.iter().sum();
    if free_sum < 0.0 {
        field = field.scaled(-1.0);
    }
    let sign_constant = field.is_sign_constant(m);
    Ok(EigenResult {
        p,
        domain: m.domain.clone(),
        n: m.resolution,
        lambda,
        field,
        iterations,
        grad_norm,
        converged,
        sign_constant,
        trace,
    })
}

/// Fills `w` with the element Hessians of the regularized energy density,
/// `(|g|^2 + eps^2)^((p-2)/2) (I + (p-2) g g^T / (|g|^2 + eps^2))`, scaled to
/// unit maximum weight, and returns `s` such that the true preconditioner
/// inverse is `s * K_w^{-1}`.
fn preconditioner_tensors(m: &TriMesh, u: &[f64], p: f64, eps_rel: f64, w: &mut [[f64; 3]]) -> f64 {
    let mut grads = Vec::with_capacity(m.num_triangles());
    let mut total = 0.0;
    let mut area = 0.0;
    for t in 0..m.num_triangles() {
        let g = m.element_gradient(t, u);
        total += m.areas[t] * (g[0] * g[0] + g[1] * g[1]);
        area += m.areas[t];
        grads.push(g);
    }
    let eps2 = (eps_rel * eps_rel * total / area).max(f64::MIN_POSITIVE);
    let half = 0.5 * (p - 2.0);
    // work with logarithms so large p cannot overflow
    let logs: Vec<f64> = grads.iter().map(|g| half * (g[0] * g[0] + g[1] * g[1] + eps2).ln()).collect();
    let lmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // keep the factorization away from exact singularity
    let lfloor = lmax + (1e-14f64).ln();
    for ((wi, l), g) in w.iter_mut().zip(&logs).zip(&grads) {
        let c = (l.max(lfloor) - lmax).exp();
        let k = (p - 2.0) / (g[0] * g[0] + g[1] * g[1] + eps2);
        *wi = [c * (1.0 + k * g[0] * g[0]), c * k * g[0] * g[1], c * (1.0 + k * g[1] * g[1])];
    }
    (-lmax).exp() / p
}

/// Richardson extrapolation from three resolutions `n, 2n, 4n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Richardson {
    pub values: [f64; 3],
    pub order: f64,
    pub extrapolated: f64,
}

/// Extrapolates values on grids refined by 2; `order = None` estimates the
/// convergence order from the three values.
pub fn richardson(values: [f64; 3], order: Option<f64>) -> Richardson {
    let [a, b, c] = values;
    let order = order.unwrap_or_else(|| ((a - b) / (b - c)).abs().log2());
    let extrapolated = c + (c - b) / (2f64.powf(order) - 1.0);
    Richardson { values, order, extrapolated }
}

/// Builds the mesh of a domain at resolution `n`.
pub fn mesh_for(d: &DomainSpec, n: usize) -> Result<TriMesh> {
    d.validate()?;
    match d.kind {
        DomainKind::Rectangle => mesh::build_rectangle_mesh(d.a, d.b, n),
        DomainKind::Triangle => {
            let m = mesh::build_triangle_mesh(n)?;
            if d.a == 1.0 {
                Ok(m)
            } else {
                mesh::scale_mesh(&m, d.a)
            }
        }
        DomainKind::MaskedRectangle => {
            mesh::build_disk_masked_mesh(d.a, d.b, d.mask.clone().expect("masked domain carries a mask"), n)
        }
        DomainKind::CutPiece => {
            let (c, below) = d.cut.ok_or_else(|| Error::InvalidOption("cut piece without cut".into()))?;
            let m = (c * n as f64).round() as usize;
            mesh::build_cut_square_piece(m, n, below)
        }
    }
}

/// Extrapolated `lambda_1(p)` from resolutions `n, 2n, 4n`; order 2 is
/// assumed at `p = 2`, otherwise the order is fitted.
pub fn richardson_lambda1(d: &DomainSpec, p: f64, n: usize, opts: &SolveOptions) -> Result<Richardson> {
    let mut vals = [0.0; 3];
    for (k, nk) in [n, 2 * n, 4 * n].into_iter().enumerate() {
        let m = mesh_for(d, nk)?;
        let r = solve_lambda1(&m, p, opts, None)?;
        vals[k] = r.lambda;
    }
    Ok(richardson(vals, (p == 2.0).then_some(2.0)))
}

/// Names of eigenvalue families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchLabel {
    Lambda1,
    BoxBar,
    BoxMinus,
    BoxBslash,
    Lambda2Upper,
    /// k-th eigenvalue of the Laplacian (p = 2 only).
    Lin(usize),
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lambda1 => f.write_str("lambda1"),
            Self::BoxBar => f.write_str("boxbar"),
            Self::BoxMinus => f.write_str("boxminus"),
            Self::BoxBslash => f.write_str("boxbslash"),
            Self::Lambda2Upper => f.write_str("lambda2-ub"),
            Self::Lin(k) => write!(f, "lin-{k}"),
        }
    }
}

impl FromStr for BranchLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lambda1" => Self::Lambda1,
            "boxbar" => Self::BoxBar,
            "boxminus" => Self::BoxMinus,
            "boxbslash" => Self::BoxBslash,
            "lambda2-ub" => Self::Lambda2Upper,
            other => match other.strip_prefix("lin-").and_then(|k| k.parse().ok()) {
                Some(k) if k >= 1 => Self::Lin(k),
                _ => return Err(Error::InvalidOption(format!("unknown branch label '{s}'"))),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchSample {
    pub p: f64,
    pub lambda: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Ordered `(p, lambda)` samples of one eigenvalue family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub label: BranchLabel,
    pub a: f64,
    pub samples: Vec<BranchSample>,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    for &p in grid {
        check_exponent(p)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidOption("p-grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Equispaced grid from `from` to `to` (inclusive up to rounding).
pub fn p_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || to < from {
        return Vec::new();
    }
    let k = ((to - from) / step + 1e-9).floor() as usize;
    (0..=k).map(|i| from + i as f64 * step).collect()
}

/// Warm-started continuation of `lambda_1` on a fixed mesh.
///
/// A solve that needs more than ten times the median iteration count of the
/// previous ones is repeated after an intermediate solve at half the step.
pub fn continue_on_mesh(m: &TriMesh, label: BranchLabel, a: f64, grid: &[f64], opts: &SolveOptions) -> Result<Branch> {
    check_grid(grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    if grid.is_empty() {
        return Ok(Branch { label, a, samples });
    }
    let pattern = StiffnessPattern::new(m)?;
    let mut warm: Option<(f64, Field)> = None;
    let mut iters: Vec<usize> = Vec::new();
    for &p in grid {
        let mut res = solve_with_pattern(m, &pattern, p, opts, warm.as_ref().map(|w| &w.1))?;
        if let (Some((prev_p, prev_field)), false) = (&warm, iters.is_empty()) {
            let mut sorted = iters.clone();
            sorted.sort_unstable();
            let median = sorted[sorted.len() / 2].max(1);
            let mut halvings = 0;
            let (mut from_p, mut from_field) = (*prev_p, prev_field.clone());
            while res.iterations > 10 * median && halvings < 4 {
                let mid = 0.5 * (from_p + p);
                let inter = solve_with_pattern(m, &pattern, mid, opts, Some(&from_field))?;
                let retry = solve_with_pattern(m, &pattern, p, opts, Some(&inter.field))?;
                from_p = mid;
                from_field = inter.field;
                res = retry;
                halvings += 1;
            }
        }
        iters.push(res.iterations);
        samples.push(BranchSample {
            p,
            lambda: res.lambda,
            n: m.resolution,
            converged: res.converged,
            iterations: res.iterations,
            grad_norm: res.grad_norm,
        });
        warm = Some((p, res.field));
    }
    Ok(Branch { label, a, samples })
}

/// Continuation of `lambda_1` on the domain `d`.
pub fn continue_branch(d: &DomainSpec, grid: &[f64], n: usize, opts: &SolveOptions) -> Result<Branch> {
    check_grid(grid)?;
    if grid.is_empty() {
        return Ok(Branch { label: BranchLabel::Lambda1, a: d.a, samples: Vec::new() });
    }
    let m = mesh_for(d, n)?;
    continue_on_mesh(&m, BranchLabel::Lambda1, d.a, grid, opts)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::mesh::{build_rectangle_mesh, build_triangle_mesh, scale_mesh, Reflection};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn square_p2_matches_closed_form() {
        let m = build_rectangle_mesh(1.0, 1.0, 64).unwrap();
        let r = solve_lambda1(&m, 2.0, &SolveOptions::default(), None).unwrap();
        assert!(r.converged);
        assert!(rel(r.lambda, 2.0 * PI * PI) < 1e-3, "{}", r.lambda);
        assert!(r.sign_constant);
        assert!(r.is_monotone());
        assert!(rel(functional::mass(&m, &r.field.values, 2.0), 1.0) < 1e-10);
    }

    #[test]
    fn triangle_p2_matches_closed_form() {
        let m = build_triangle_mesh(64).unwrap();
        let r = solve_lambda1(&m, 2.0, &SolveOptions::default(), None).unwrap();
        assert!(r.converged);
        assert!(rel(r.lambda, 5.0 * PI * PI) < 1e-3, "{}", r.lambda);
    }

    #[test]
    fn scaling_identity_is_exact() {
        let m = build_rectangle_mesh(1.0, 1.0, 16).unwrap();
        let s = scale_mesh(&m, 2.0).unwrap();
        let opts = SolveOptions::default();
        let a = solve_lambda1(&m, 2.5, &opts, None).unwrap();
        let b = solve_lambda1(&s, 2.5, &opts, None).unwrap();
        assert!(a.converged && b.converged);
        assert!(rel(b.lambda, 2f64.powf(-2.5) * a.lambda) < 1e-10);
    }

    #[test]
    fn symmetric_mesh_gives_symmetric_eigenfunction() {
        let m = build_rectangle_mesh(1.0, 1.0, 16).unwrap();
        let r = solve_lambda1(&m, 3.0, &SolveOptions::default(), None).unwrap();
        for refl in [Reflection::FlipX, Reflection::FlipY, Reflection::Transpose] {
            let perm = m.reflection_map(refl).unwrap();
            let max = r.field.values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for (v, &w) in perm.iter().enumerate() {
                assert!((r.field.values[v] - r.field.values[w]).abs() < 1e-6 * max);
            }
        }
    }

    #[test]
    fn non_quadratic_exponents_converge() {
        let m = build_rectangle_mesh(1.0, 1.0, 16).unwrap();
        for p in [1.5, 3.0, 6.0] {
            let r = solve_lambda1(&m, p, &SolveOptions::default(), None).unwrap();
            assert!(r.converged, "p={p} iters={} grad={}", r.iterations, r.grad_norm);
            assert!(r.sign_constant && r.is_monotone());
        }
    }

    #[test]
    fn warm_start_dimension_mismatch() {
        let m = build_rectangle_mesh(1.0, 1.0, 8).unwrap();
        let w = Field::zeros(3);
        assert!(matches!(
            solve_lambda1(&m, 2.0, &SolveOptions::default(), Some(&w)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(solve_lambda1(&m, 1.0, &SolveOptions::default(), None), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn branch_edge_cases() {
        let opts = SolveOptions::default();
        let b = continue_branch(&DomainSpec::r(1.0), &[], 16, &opts).unwrap();
        assert!(b.samples.is_empty());
        let b = continue_branch(&DomainSpec::r(1.0), &[2.0], 64, &opts).unwrap();
        assert_eq!(b.samples.len(), 1);
        assert!(rel(b.samples[0].lambda, 2.0 * PI * PI) < 1e-3);
        assert!(continue_branch(&DomainSpec::r(1.0), &[2.0, 1.9], 16, &opts).is_err());
    }

    #[test]
    fn branch_is_continuous_and_matches_cold_starts() {
        let opts = SolveOptions::default();
        let grid = p_grid(1.8, 2.2, 0.05);
        assert_eq!(grid.len(), 9);
        let b = continue_branch(&DomainSpec::r(1.0), &grid, 32, &opts).unwrap();
        for w in b.samples.windows(2) {
            assert!(rel(w[1].lambda, w[0].lambda) < 0.1);
        }
        let m = build_rectangle_mesh(1.0, 1.0, 32).unwrap();
        for s in b.samples.iter().step_by(4) {
            let cold = solve_lambda1(&m, s.p, &opts, None).unwrap();
            assert!(rel(cold.lambda, s.lambda) < 1e-8);
        }
    }

    #[test]
    fn labels_round_trip() {
        for l in [
            BranchLabel::Lambda1,
            BranchLabel::BoxBar,
            BranchLabel::BoxMinus,
            BranchLabel::BoxBslash,
            BranchLabel::Lambda2Upper,
            BranchLabel::Lin(4),
        ] {
            assert_eq!(l.to_string().parse::<BranchLabel>().unwrap(), l);
        }
        assert!("lin-0".parse::<BranchLabel>().is_err());
        assert!("nope".parse::<BranchLabel>().is_err());
    }

    #[test]
    fn richardson_on_model_sequence() {
        let f = |h: f64| 3.0 + 0.7 * h * h;
        let r = richardson([f(0.1), f(0.05), f(0.025)], None);
        assert!((r.order - 2.0).abs() < 1e-9);
        assert!((r.extrapolated - 3.0).abs() < 1e-12);
    }
}
