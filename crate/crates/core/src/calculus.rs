//! Derivatives of first eigenvalues in the exponent and in the rectangle
//! width, and the closed-form reference integrals at `p = 2`.
//!
//! With the eigenfunction normalized to unit p-mass, the envelope theorem
//! gives
//!
//! ```text
//! d lambda_1 / dp = int |grad u|^p ln |grad u| - lambda_1 int |u|^p ln |u|
//! d lambda_1 / da = -(p - 1) int_0^b |d_x u(a, y)|^p dy     on (0,a) x (0,b)
//! ```
//!
//! The discrete versions below apply the same quadrature as the energy and
//! the p-mass, so the p-derivative is the exact derivative of the discrete
//! eigenvalue.

use std::f64::consts::PI;

use serde::Serialize;

use crate::eigsolve::{EigenResult, SolveOptions};
use crate::error::{Error, Result};
use crate::functional::{self, pow_log};
use crate::mesh::{DomainKind, TriMesh};
use crate::quadrature::{integrate_2d, QuadResult, Rect};
use crate::spectra;

/// Closed-form second eigenfunctions of the Laplacian on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClosedFormEigenfunction {
    /// `sqrt(8) sin(2 pi x) sin(pi y)`, odd across `x = 1/2`.
    HalfSquareU1,
    /// `2 (sin(2 pi x) sin(pi y) + sin(pi x) sin(2 pi y))`, odd across `x + y = 1`.
    TriangleU2,
}

impl ClosedFormEigenfunction {
    pub fn value(self, x: f64, y: f64) -> f64 {
        let s = |k: f64, t: f64| (k * PI * t).sin();
        match self {
            Self::HalfSquareU1 => 8f64.sqrt() * s(2.0, x) * s(1.0, y),
            Self::TriangleU2 => 2.0 * (s(2.0, x) * s(1.0, y) + s(1.0, x) * s(2.0, y)),
        }
    }

    pub fn gradient(self, x: f64, y: f64) -> [f64; 2] {
        let s = |k: f64, t: f64| (k * PI * t).sin();
        let c = |k: f64, t: f64| k * PI * (k * PI * t).cos();
        match self {
            Self::HalfSquareU1 => {
                let r8 = 8f64.sqrt();
                [r8 * c(2.0, x) * s(1.0, y), r8 * s(2.0, x) * c(1.0, y)]
            }
            Self::TriangleU2 => [
                2.0 * (c(2.0, x) * s(1.0, y) + c(1.0, x) * s(2.0, y)),
                2.0 * (s(2.0, x) * c(1.0, y) + s(1.0, x) * c(2.0, y)),
            ],
        }
    }
}

impl std::str::FromStr for ClosedFormEigenfunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halfsquare" | "half-square-u1" => Ok(Self::HalfSquareU1),
            "triangle" | "triangle-u2" => Ok(Self::TriangleU2),
            other => Err(Error::InvalidOption(format!("unknown eigenfunction '{other}'"))),
        }
    }
}

const NUMVALUES_ORDER: usize = 8;
const NUMVALUES_BUDGET: usize = 50_000_000;

/// `int_{R_1} |grad u|^2 ln |grad u| - 5 pi^2 int_{R_1} u^2 ln |u|` by
/// adaptive Gauss-Legendre quadrature; `t^2 ln t` is taken as 0 at `t = 0`.
pub fn numvalues_quadrature(which: ClosedFormEigenfunction, target_err: f64) -> Result<QuadResult> {
    let lambda = 5.0 * PI * PI;
    let f = move |x: f64, y: f64| {
        let g = which.gradient(x, y);
        pow_log(g[0].hypot(g[1]), 2.0) - lambda * pow_log(which.value(x, y), 2.0)
    };
    integrate_2d(f, Rect::new(0.0, 1.0, 0.0, 1.0), target_err, NUMVALUES_ORDER, NUMVALUES_BUDGET)
}

/// `int_{R_1} u^2` for a closed-form eigenfunction.
pub fn closed_form_l2_squared(which: ClosedFormEigenfunction, target_err: f64) -> Result<QuadResult> {
    integrate_2d(
        move |x, y| which.value(x, y).powi(2),
        Rect::new(0.0, 1.0, 0.0, 1.0),
        target_err,
        NUMVALUES_ORDER,
        NUMVALUES_BUDGET,
    )
}

fn check_result(m: &TriMesh, res: &EigenResult) -> Result<()> {
    if !res.converged {
        return Err(Error::Unconverged);
    }
    if res.field.len() != m.num_vertices() {
        return Err(Error::DimensionMismatch { expected: m.num_vertices(), got: res.field.len() });
    }
    Ok(())
}

/// Derivative of the discrete `lambda_1` in `p` at a converged eigenpair.
pub fn dlambda1_dp(m: &TriMesh, res: &EigenResult) -> Result<f64> {
    check_result(m, res)?;
    let p = res.p;
    let mass = functional::p_mass(m, &res.field, p)?;
    // unit p-mass up to solver rounding; rescale so the formula is exact
    let u = res.field.scaled(mass.powf(-1.0 / p));
    let grad_term = functional::gradient_log_moment(m, &u, p)?;
    let mass_term = functional::mass_log_moment(m, &u, p)?;
    Ok(grad_term - res.lambda * mass_term)
}

/// Derivative of `lambda_1` of `(0,a) x (0,b)` in the width `a`, from the
/// one-sided element gradients along the edge `x = a`.
pub fn dlambda1_da(m: &TriMesh, res: &EigenResult) -> Result<f64> {
    if m.domain.kind != DomainKind::Rectangle {
        return Err(Error::UnsupportedDomain { expected: "a rectangle" });
    }
    check_result(m, res)?;
    let p = res.p;
    let mass = functional::p_mass(m, &res.field, p)?;
    let u = res.field.scaled(mass.powf(-1.0 / p)).values;
    let a = m.domain.a;
    let on_edge = |v: usize| (m.vertices[v][0] - a).abs() <= 1e-9 * a;
    let mut integral = 0.0;
    for (t, tri) in m.triangles.iter().enumerate() {
        for k in 0..3 {
            let (i, j) = (tri[k], tri[(k + 1) % 3]);
            if on_edge(i) && on_edge(j) {
                let len = (m.vertices[i][1] - m.vertices[j][1]).abs();
                let gx = m.element_gradient(t, &u)[0];
                integral += len * gx.abs().powf(p);
            }
        }
    }
    Ok(-(p - 1.0) * integral)
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn fd_derivative(mut f: impl FnMut(f64) -> Result<f64>, at: f64, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidOption("finite-difference step must be positive".into()));
    }
    let plus = f(at + step)?;
    let minus = f(at - step)?;
    Ok((plus - minus) / (2.0 * step))
}

/// Width derivatives of the named rectangle branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthDerivatives {
    /// `d/da boxbar(p; R_a) = (1/2) d/dw lambda_1(p; R_w)` at `w = a/2`.
    pub boxbar: f64,
    /// `d/da boxminus(p; R_a)`, the width derivative on `a x (1/2)`.
    pub boxminus: f64,
    /// `d/da f(p, a) = boxminus - boxbar`.
    pub gap: f64,
}

pub fn branch_width_derivatives(p: f64, a: f64, n: usize, opts: &SolveOptions) -> Result<WidthDerivatives> {
    let bar_mesh = crate::mesh::build_rectangle_mesh(0.5 * a, 1.0, n)?;
    let bar = crate::eigsolve::solve_lambda1(&bar_mesh, p, opts, None)?;
    let minus_mesh = crate::mesh::build_rectangle_mesh(a, 0.5, n)?;
    let minus = crate::eigsolve::solve_lambda1(&minus_mesh, p, opts, None)?;
    let boxbar = 0.5 * dlambda1_da(&bar_mesh, &bar)?;
    let boxminus = dlambda1_da(&minus_mesh, &minus)?;
    Ok(WidthDerivatives { boxbar, boxminus, gap: boxminus - boxbar })
}

/// `d/dp` of the boxbar and boxbslash branches on the unit square at `p`.
pub fn square_branch_p_derivatives(p: f64, n: usize, opts: &SolveOptions) -> Result<(f64, f64)> {
    let bar = spectra::lambda_boxbar(p, 1.0, n, opts, None)?;
    let bar_mesh = crate::mesh::build_rectangle_mesh(0.5, 1.0, n)?;
    let tri = spectra::lambda_boxbslash(p, n, opts, None)?;
    let tri_mesh = crate::mesh::build_triangle_mesh(n)?;
    Ok((dlambda1_dp(&bar_mesh, &bar)?, dlambda1_dp(&tri_mesh, &tri)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigsolve::solve_lambda1;
    use crate::mesh::{build_rectangle_mesh, build_triangle_mesh};

    const PI2: f64 = PI * PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn closed_forms_vanish_on_boundary_and_match_gradient() {
        for w in [ClosedFormEigenfunction::HalfSquareU1, ClosedFormEigenfunction::TriangleU2] {
            for t in [0.0, 0.3, 0.77, 1.0] {
                for (x, y) in [(0.0, t), (1.0, t), (t, 0.0), (t, 1.0)] {
                    assert!(w.value(x, y).abs() < 1e-14);
                }
            }
            let (x, y, h) = (0.31, 0.62, 1e-6);
            let g = w.gradient(x, y);
            let gx = (w.value(x + h, y) - w.value(x - h, y)) / (2.0 * h);
            let gy = (w.value(x, y + h) - w.value(x, y - h)) / (2.0 * h);
            assert!((g[0] - gx).abs() < 1e-7 && (g[1] - gy).abs() < 1e-7);
        }
        // the triangle eigenfunction is odd across x + y = 1
        let u2 = ClosedFormEigenfunction::TriangleU2;
        assert!((u2.value(0.2, 0.3) + u2.value(0.7, 0.8)).abs() < 1e-14);
    }

    #[test]
    fn closed_form_norms_on_the_square() {
        // unit norm on the half domain means norm squared 2 on the square
        for w in [ClosedFormEigenfunction::HalfSquareU1, ClosedFormEigenfunction::TriangleU2] {
            let r = closed_form_l2_squared(w, 1e-12).unwrap();
            assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
        }
    }

    #[test]
    fn reference_integrals() {
        let a = numvalues_quadrature(ClosedFormEigenfunction::HalfSquareU1, 1e-3).unwrap();
        let b = numvalues_quadrature(ClosedFormEigenfunction::TriangleU2, 1e-3).unwrap();
        assert!((a.value - 176.0407).abs() < 1e-2, "{}", a.value);
        assert!((b.value - 171.8571).abs() < 1e-2, "{}", b.value);
        assert!((a.value - b.value - 4.18).abs() < 0.05);
    }

    #[test]
    fn p_derivative_matches_finite_difference() {
        let o = SolveOptions::default();
        let m = build_rectangle_mesh(1.2, 1.0, 16).unwrap();
        let p = 2.5;
        let res = solve_lambda1(&m, p, &o, None).unwrap();
        let d = dlambda1_dp(&m, &res).unwrap();
        let fd = fd_derivative(|q| Ok(solve_lambda1(&m, q, &o, Some(&res.field))?.lambda), p, 1e-3).unwrap();
        assert!(rel(d, fd) < 1e-4, "{d} vs {fd}");
    }

    #[test]
    fn p_derivative_on_half_square_at_p2() {
        // the half-square value of the reference integral is twice the derivative
        let o = SolveOptions::default();
        let m = build_rectangle_mesh(0.5, 1.0, 32).unwrap();
        let res = solve_lambda1(&m, 2.0, &o, None).unwrap();
        let d = dlambda1_dp(&m, &res).unwrap();
        assert!((2.0 * d - 176.0407).abs() < 3.0, "{}", 2.0 * d);
        let t = build_triangle_mesh(32).unwrap();
        let rt = solve_lambda1(&t, 2.0, &o, None).unwrap();
        let dt = dlambda1_dp(&t, &rt).unwrap();
        assert!((2.0 * dt - 171.8571).abs() < 3.0, "{}", 2.0 * dt);
    }

    #[test]
    fn width_derivative_at_p2() {
        let o = SolveOptions::default();
        let m = build_rectangle_mesh(1.0, 1.0, 32).unwrap();
        let res = solve_lambda1(&m, 2.0, &o, None).unwrap();
        let d = dlambda1_da(&m, &res).unwrap();
        assert!(d < 0.0);
        assert!(rel(d, -2.0 * PI2) < 0.1, "{d}");
    }

    #[test]
    fn width_derivative_rejects_triangle_and_unconverged() {
        let o = SolveOptions::default();
        let t = build_triangle_mesh(8).unwrap();
        let rt = solve_lambda1(&t, 2.0, &o, None).unwrap();
        assert!(matches!(dlambda1_da(&t, &rt), Err(Error::UnsupportedDomain { .. })));
        let m = build_rectangle_mesh(1.0, 1.0, 8).unwrap();
        let mut r = solve_lambda1(&m, 2.0, &o, None).unwrap();
        r.converged = false;
        assert!(matches!(dlambda1_dp(&m, &r), Err(Error::Unconverged)));
    }

    #[test]
    fn finite_differences() {
        assert_eq!(fd_derivative(|_| Ok(3.0), 2.0, 1e-2).unwrap(), 0.0);
        let s = fd_derivative(|p| Ok(4.0 * p - 1.0), 2.0, 1e-2).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
        assert!(fd_derivative(Ok, 2.0, 0.0).is_err());
    }
}
