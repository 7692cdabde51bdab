//! Invariant suite behind `plap validate`. Every check runs at a small base
//! resolution and either passes or fails; numerical errors count as failures.

use std::f64::consts::PI;

use plap::asymptotics::{disk_family_rayleigh, disk_moments, three_disk_packing};
use plap::calculus::{numvalues_quadrature, ClosedFormEigenfunction};
use plap::eigsolve::{richardson_lambda1, solve_lambda1};
use plap::functional::{dirichlet_energy, p_mass, rayleigh, rayleigh_gradient};
use plap::mesh::{build_rectangle_mesh, build_triangle_mesh, scale_mesh};
use plap::spectra::{lambda_boxbar, lambda_boxminus};
use plap::{DomainSpec, EnergyOptions, Field, SolveOptions, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(name: &'static str, body: impl FnOnce() -> plap::Result<(bool, String)>) -> Check {
    match body() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check { name, pass: false, detail: format!("error: {e}") },
    }
}

fn random_field(m: &TriMesh, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::from_values((0..m.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    f.enforce_dirichlet(m);
    f
}

/// Runs every check with base resolution `n`.
pub fn run(n: usize, opts: &SolveOptions) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();

    out.push(check("scaling exactness", || {
        let m = build_rectangle_mesh(1.0, 1.0, n)?;
        let mut worst: f64 = 0.0;
        for p in [1.5, 2.0, 3.0] {
            let base = solve_lambda1(&m, p, opts, None)?;
            for s in [0.5, 2.0] {
                let scaled = solve_lambda1(&scale_mesh(&m, s)?, p, opts, None)?;
                worst = worst.max(rel(scaled.lambda, s.powf(-p) * base.lambda));
            }
        }
        Ok((worst < 1e-10, format!("worst relative {worst:.2e}")))
    }));

    out.push(check("homogeneity and scale invariance", || {
        let m = build_rectangle_mesh(1.0, 1.0, 8)?;
        let mut worst: f64 = 0.0;
        for p in [1.5, 2.0, 3.0] {
            let o = EnergyOptions::new(p);
            for _ in 0..10 {
                let u = random_field(&m, &mut rng);
                let t = rng.gen_range(-5.0..5.0);
                let tu = u.scaled(t);
                worst = worst.max(rel(dirichlet_energy(&m, &tu, o)?, t.abs().powf(p) * dirichlet_energy(&m, &u, o)?));
                worst = worst.max(rel(p_mass(&m, &tu, p)?, t.abs().powf(p) * p_mass(&m, &u, p)?));
                worst = worst.max(rel(rayleigh(&m, &tu, o)?, rayleigh(&m, &u, o)?));
            }
        }
        Ok((worst < 1e-12, format!("worst relative {worst:.2e}")))
    }));

    out.push(check("gradient vs central differences", || {
        let m = build_rectangle_mesh(1.0, 1.0, 8)?;
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let p = [1.5, 2.0, 2.5, 3.0][k % 4];
            let o = EnergyOptions::new(p);
            let u = random_field(&m, &mut rng);
            let d = random_field(&m, &mut rng);
            let g = rayleigh_gradient(&m, &u, o)?;
            let plus = Field::from_values(u.values.iter().zip(&d.values).map(|(a, b)| a + h * b).collect());
            let minus = Field::from_values(u.values.iter().zip(&d.values).map(|(a, b)| a - h * b).collect());
            let fd = (rayleigh(&m, &plus, o)? - rayleigh(&m, &minus, o)?) / (2.0 * h);
            // scaled by |g| |d| so that near-orthogonal directions do not inflate the error
            worst = worst.max((g.dot(&d) - fd).abs() / (g.norm() * d.norm()));
        }
        Ok((worst < 1e-6, format!("worst scaled error {worst:.2e}")))
    }));

    out.push(check("descent monotonicity and sign constancy", || {
        let cases = [
            (build_rectangle_mesh(1.0, 1.0, n)?, 1.5),
            (build_rectangle_mesh(0.5, 1.0, n)?, 3.0),
            (build_triangle_mesh(n)?, 2.5),
        ];
        let mut ok = true;
        for (m, p) in &cases {
            let r = solve_lambda1(m, *p, opts, None)?;
            ok &= r.converged && r.is_monotone() && r.sign_constant;
        }
        Ok((ok, format!("{} solves", cases.len())))
    }));

    out.push(check("reflection identity on the square", || {
        let bar = lambda_boxbar(2.5, 1.0, n, opts, None)?;
        let minus = lambda_boxminus(2.5, 1.0, n, opts, None)?;
        let r = rel(minus.lambda, bar.lambda);
        Ok((r < 1e-10, format!("relative {r:.2e} at p = 2.5")))
    }));

    out.push(check("linear oracle on the square", || {
        let r = richardson_lambda1(&DomainSpec::r(1.0), 2.0, n, opts)?;
        let e = rel(r.extrapolated, 2.0 * PI * PI);
        Ok((e < 1e-3, format!("extrapolated {:.6}, relative {e:.2e}", r.extrapolated)))
    }));

    out.push(check("three-disk packing and mediant bound", || {
        let pk = three_disk_packing();
        pk.verify(1e-12)?;
        let m = pk.masked_mesh(4 * n)?;
        let mut ok = true;
        for p in [2.0, 4.0] {
            let mom = disk_moments(&m, &pk, p)?;
            let single = mom.iter().map(|&(e, mass)| e / mass).fold(f64::NEG_INFINITY, f64::max);
            for _ in 0..50 {
                let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                ok &= disk_family_rayleigh(&mom, &coeffs, p)? <= single * (1.0 + 1e-12);
            }
        }
        Ok((ok, format!("radius {:.6}, 100 coefficient triples", pk.radius)))
    }));

    out.push(check("quadrature constants", || {
        let u1 = numvalues_quadrature(ClosedFormEigenfunction::HalfSquareU1, 1e-3)?;
        let u2 = numvalues_quadrature(ClosedFormEigenfunction::TriangleU2, 1e-3)?;
        let diff = u1.value - u2.value;
        let ok = (u1.value - 176.0407).abs() < 0.01 && (u2.value - 171.8571).abs() < 0.01 && (diff - 4.18).abs() < 0.02;
        Ok((ok, format!("{:.4} - {:.4} = {diff:.4}", u1.value, u2.value)))
    }));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_become_failures() {
        let c = check("bad", || Err(plap::Error::ZeroMass));
        assert!(!c.pass);
        assert!(c.detail.contains("zero"));
    }
}
