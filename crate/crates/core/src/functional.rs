//! Discrete p-Dirichlet energy, p-mass and Rayleigh quotient of
//! piecewise-linear fields, with exact gradients in the vertex values.

use serde::{Deserialize, Serialize};

use crate::error::{check_exponent, Error, Result};
use crate::mesh::TriMesh;

/// Local edges of a triangle; the p-mass is sampled at their midpoints.
const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Vertex-valued scalar function on a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Nodal interpolant of `f`, zeroed on Dirichlet vertices.
    pub fn interpolate(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut u = Self::interpolate_raw(mesh, f);
        u.enforce_dirichlet(mesh);
        u
    }

    /// Nodal interpolant of `f` without boundary zeroing.
    pub fn interpolate_raw(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { values: mesh.vertices.iter().map(|v| f(v[0], v[1])).collect() }
    }

    pub fn enforce_dirichlet(&mut self, mesh: &TriMesh) {
        for (v, d) in self.values.iter_mut().zip(&mesh.dirichlet) {
            if *d {
                *v = 0.0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * t).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// All free values share one strict sign (zeros are not allowed).
    pub fn is_sign_constant(&self, mesh: &TriMesh) -> bool {
        let free = || self.values.iter().zip(&mesh.dirichlet).filter(|(_, d)| !**d).map(|(v, _)| *v);
        free().all(|v| v > 0.0) || free().all(|v| v < 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyOptions {
    pub p: f64,
    /// Gradient regularization, in units of `|grad u|`.
    pub eps: f64,
}

impl EnergyOptions {
    pub fn new(p: f64) -> Self {
        Self { p, eps: 0.0 }
    }

    pub fn with_eps(p: f64, eps: f64) -> Self {
        Self { p, eps }
    }

    fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidOption(format!("eps must be non-negative (got {})", self.eps)));
        }
        Ok(())
    }
}

fn check_dims(m: &TriMesh, u: &Field) -> Result<()> {
    if u.len() != m.num_vertices() {
        return Err(Error::DimensionMismatch { expected: m.num_vertices(), got: u.len() });
    }
    Ok(())
}

/// `sum_T area(T) * (|grad u|_T^2 + eps^2)^(p/2)`.
pub fn dirichlet_energy(m: &TriMesh, u: &Field, opts: EnergyOptions) -> Result<f64> {
    opts.validate()?;
    check_dims(m, u)?;
    Ok(energy(m, &u.values, opts.p, opts.eps))
}

/// `sum_T area(T) * mean of |u|^p over the three edge midpoints of T`.
pub fn p_mass(m: &TriMesh, u: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_dims(m, u)?;
    Ok(mass(m, &u.values, p))
}

pub fn rayleigh(m: &TriMesh, u: &Field, opts: EnergyOptions) -> Result<f64> {
    let e = dirichlet_energy(m, u, opts)?;
    let n = mass(m, &u.values, opts.p);
    if !(n > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(e / n)
}

/// Gradient of the (regularized) discrete Rayleigh quotient with respect to
/// the free vertex values; zero on Dirichlet vertices.
pub fn rayleigh_gradient(m: &TriMesh, u: &Field, opts: EnergyOptions) -> Result<Field> {
    opts.validate()?;
    check_dims(m, u)?;
    let (p, eps) = (opts.p, opts.eps);
    let n = mass(m, &u.values, p);
    if !(n > 0.0) {
        return Err(Error::ZeroMass);
    }
    let r = energy(m, &u.values, p, eps) / n;
    let mut ge = vec![0.0; m.num_vertices()];
    let mut gn = vec![0.0; m.num_vertices()];
    energy_gradient(m, &u.values, p, eps, &mut ge);
    mass_gradient(m, &u.values, p, &mut gn);
    let values =
        ge.iter().zip(&gn).zip(&m.dirichlet).map(|((e, q), &d)| if d { 0.0 } else { (e - r * q) / n }).collect();
    Ok(Field { values })
}

/// `sum_T area(T) |grad u|^p ln |grad u|`, with `t^p ln t = 0` at `t = 0`.
pub fn gradient_log_moment(m: &TriMesh, u: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_dims(m, u)?;
    Ok((0..m.num_triangles())
        .map(|t| {
            let g = m.element_gradient(t, &u.values);
            m.areas[t] * pow_log(g[0].hypot(g[1]), p)
        })
        .sum())
}

/// Midpoint-rule approximation of `int |u|^p ln |u|`.
pub fn mass_log_moment(m: &TriMesh, u: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_dims(m, u)?;
    Ok(m.triangles
        .iter()
        .zip(&m.areas)
        .map(|(t, a)| {
            let s: f64 = EDGES.iter().map(|&(i, j)| pow_log(0.5 * (u.values[t[i]] + u.values[t[j]]), p)).sum();
            a * s / 3.0
        })
        .sum())
}

/// `|t|^p ln |t|`, zero at `t = 0`.
pub(crate) fn pow_log(t: f64, p: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        0.0
    } else {
        t.powf(p) * t.ln()
    }
}

pub(crate) fn energy(m: &TriMesh, u: &[f64], p: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    (0..m.num_triangles())
        .map(|t| {
            let g = m.element_gradient(t, u);
            m.areas[t] * (g[0] * g[0] + g[1] * g[1] + e2).powf(0.5 * p)
        })
        .sum()
}

pub(crate) fn mass(m: &TriMesh, u: &[f64], p: f64) -> f64 {
    m.triangles
        .iter()
        .zip(&m.areas)
        .map(|(t, a)| {
            let s: f64 = EDGES.iter().map(|&(i, j)| (0.5 * (u[t[i]] + u[t[j]])).abs().powf(p)).sum();
            a * s / 3.0
        })
        .sum()
}

/// Accumulates the energy gradient into `out` (all vertices).
pub(crate) fn energy_gradient(m: &TriMesh, u: &[f64], p: f64, eps: f64, out: &mut [f64]) {
    let e2 = eps * eps;
    for (t, tri) in m.triangles.iter().enumerate() {
        let g = m.element_gradient(t, u);
        let s = g[0] * g[0] + g[1] * g[1] + e2;
        if s == 0.0 {
            continue;
        }
        let c = m.areas[t] * p * s.powf(0.5 * p - 1.0);
        let ops = &m.grad_ops[t];
        for k in 0..3 {
            out[tri[k]] += c * (g[0] * ops[k][0] + g[1] * ops[k][1]);
        }
    }
}

/// Accumulates the p-mass gradient into `out` (all vertices).
pub(crate) fn mass_gradient(m: &TriMesh, u: &[f64], p: f64, out: &mut [f64]) {
    for (tri, a) in m.triangles.iter().zip(&m.areas) {
        let w = a / 3.0 * p * 0.5;
        for &(i, j) in &EDGES {
            let mid = 0.5 * (u[tri[i]] + u[tri[j]]);
            let d = w * mid.signum() * mid.abs().powf(p - 1.0);
            if mid != 0.0 {
                out[tri[i]] += d;
                out[tri[j]] += d;
            }
        }
    }
}
