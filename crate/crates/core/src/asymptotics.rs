//! Large-p behavior: inradius limits of `lambda_1^(1/p)` and the three-disk
//! test family on the unit square.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::eigsolve::{self, BranchLabel, SolveOptions};
use crate::error::{check_exponent, Error, Result};
use crate::mesh::{build_disk_masked_mesh, Disk, DiskMask, DomainKind, DomainSpec, MaskMode, TriMesh};

/// Largest exponent the scans accept; beyond it `t^p` leaves the useful
/// floating-point range on these meshes.
pub const MAX_SCAN_EXPONENT: f64 = 60.0;

/// Inradius of a rectangle or a right triangle with legs `a`, `b`.
pub fn inradius(d: &DomainSpec) -> Result<f64> {
    d.validate()?;
    match d.kind {
        DomainKind::Rectangle => Ok(0.5 * d.a.min(d.b)),
        DomainKind::Triangle => Ok(0.5 * (d.a + d.b - d.a.hypot(d.b))),
        _ => Err(Error::UnsupportedDomain { expected: "a rectangle or the unit triangle" }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub p: f64,
    pub lambda: f64,
    /// `lambda^(1/p)`.
    pub root: f64,
    pub converged: bool,
}

/// Warm-started scan of `lambda_1(p; d)^(1/p)` over an increasing p-list.
pub fn infinity_limit_scan(d: &DomainSpec, ps: &[f64], n: usize, opts: &SolveOptions) -> Result<Vec<ScanPoint>> {
    if ps.iter().any(|&p| p > MAX_SCAN_EXPONENT) {
        return Err(Error::InvalidOption(format!("scan exponents are capped at {MAX_SCAN_EXPONENT}")));
    }
    let mut opts = *opts;
    opts.eps.floor = opts.eps.floor.min(1e-14);
    let m = eigsolve::mesh_for(d, n)?;
    let branch = eigsolve::continue_on_mesh(&m, BranchLabel::Lambda1, d.a, ps, &opts)?;
    Ok(branch
        .samples
        .iter()
        .map(|s| ScanPoint { p: s.p, lambda: s.lambda, root: s.lambda.powf(1.0 / s.p), converged: s.converged })
        .collect())
}

/// Three pairwise tangent disks of maximal common radius in the unit square.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Packing {
    pub radius: f64,
    pub disks: [Disk; 3],
}

/// The packing of radius `(2 + sqrt(2)/2 + sqrt(6)/2)^(-1)`: one disk in the
/// corner at the origin, one touching the right wall and one touching the top
/// wall, placed symmetrically about the diagonal `x = y`.
pub fn three_disk_packing() -> Packing {
    let r = 1.0 / (2.0 + 0.5 * SQRT_2 + 0.5 * 6f64.sqrt());
    let s = 1.0 - r - SQRT_2 * r;
    Packing { radius: r, disks: [Disk::new([r, r], r), Disk::new([1.0 - r, s], r), Disk::new([s, 1.0 - r], r)] }
}

impl Packing {
    /// Checks disjointness and containment in the unit square to `tol`.
    pub fn verify(&self, tol: f64) -> Result<()> {
        for (i, d) in self.disks.iter().enumerate() {
            let [x, y] = d.center;
            let wall = x.min(y).min(1.0 - x).min(1.0 - y);
            if wall < d.radius - tol {
                return Err(Error::DiskOutsideDomain(i));
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let dist = self.disks[i].distance_to_center(self.disks[j].center);
                if dist < self.disks[i].radius + self.disks[j].radius - tol {
                    return Err(Error::OverlappingDisks(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn mask(&self) -> DiskMask {
        DiskMask { disks: self.disks.to_vec(), mode: MaskMode::Include }
    }

    pub fn masked_mesh(&self, n: usize) -> Result<TriMesh> {
        build_disk_masked_mesh(1.0, 1.0, self.mask(), n)
    }
}

/// `R_p[delta]^(1/p)` for the distance-to-circle function `delta` of a disk
/// of radius `r`: `(1/r) ((p+1)(p+2)/2)^(1/p)`.
pub fn packing_bound_closed_form(p: f64, r: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(r > 0.0) {
        return Err(Error::NonPositiveScale(r));
    }
    Ok((0.5 * (p + 1.0) * (p + 2.0)).powf(1.0 / p) / r)
}

/// Energy and p-mass of each `delta_i` by the edge-midpoint rule on `m`,
/// with `delta_i` and `|grad delta_i| = 1` evaluated analytically.
pub fn disk_moments(m: &TriMesh, packing: &Packing, p: f64) -> Result<Vec<(f64, f64)>> {
    check_exponent(p)?;
    let mut out = vec![(0.0, 0.0); packing.disks.len()];
    for (tri, area) in m.triangles.iter().zip(&m.areas) {
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let (a, b) = (m.vertices[tri[i]], m.vertices[tri[j]]);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            if let Some(k) = packing.disks.iter().position(|d| d.contains(mid)) {
                let w = area / 3.0;
                out[k].0 += w;
                out[k].1 += w * packing.disks[k].boundary_distance(mid).powf(p);
            }
        }
    }
    if out.iter().any(|&(_, mass)| !(mass > 0.0)) {
        return Err(Error::ZeroMass);
    }
    Ok(out)
}

/// Rayleigh quotient of `sum_i c_i delta_i`; the supports are disjoint at
/// the quadrature points, so the quotient is a weighted mediant of the
/// single-disk quotients.
pub fn disk_family_rayleigh(moments: &[(f64, f64)], coeffs: &[f64], p: f64) -> Result<f64> {
    if moments.len() != coeffs.len() {
        return Err(Error::DimensionMismatch { expected: moments.len(), got: coeffs.len() });
    }
    let (mut e, mut n) = (0.0, 0.0);
    for (&(ek, nk), c) in moments.iter().zip(coeffs) {
        let w = c.abs().powf(p);
        e += w * ek;
        n += w * nk;
    }
    if !(n > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(e / n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingBound {
    pub p: f64,
    pub radius: f64,
    pub closed_form: f64,
    /// Largest single-disk `R_p^(1/p)` on the masked mesh.
    pub numeric: f64,
    pub per_disk: Vec<f64>,
    pub n: usize,
}

/// Closed-form and masked-mesh values of the three-disk bound at `p`.
pub fn packing_bound(p: f64, n: usize) -> Result<PackingBound> {
    let packing = three_disk_packing();
    let closed_form = packing_bound_closed_form(p, packing.radius)?;
    let m = packing.masked_mesh(n)?;
    let per_disk: Vec<f64> = disk_moments(&m, &packing, p)?.iter().map(|&(e, mass)| (e / mass).powf(1.0 / p)).collect();
    let numeric = per_disk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PackingBound { p, radius: packing.radius, closed_form, numeric, per_disk, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverPoint {
    pub p: f64,
    pub bound: f64,
    /// `boxbar(p; R_1)^(1/p)`.
    pub boxbar_root: f64,
    pub converged: bool,
}

/// Compares the closed-form three-disk bound with `boxbar(p; R_1)^(1/p)` on a
/// p-grid and returns the first grid point where the bound is smaller. The
/// grid point is only a computed indicator, not a proven threshold.
pub fn packing_crossover(grid: &[f64], n: usize, opts: &SolveOptions) -> Result<(Vec<CrossoverPoint>, Option<f64>)> {
    let r = three_disk_packing().radius;
    let scan = infinity_limit_scan(&DomainSpec::rectangle(0.5, 1.0), grid, n, opts)?;
    let points: Vec<CrossoverPoint> = scan
        .iter()
        .map(|s| {
            Ok(CrossoverPoint {
                p: s.p,
                bound: packing_bound_closed_form(s.p, r)?,
                boxbar_root: s.root,
                converged: s.converged,
            })
        })
        .collect::<Result<_>>()?;
    let first = points.iter().find(|c| c.bound < c.boxbar_root).map(|c| c.p);
    Ok((points, first))
}
