//! Structured crisscross triangulations of rectangles, the unit right
//! triangle and disk-masked rectangles.
//!
//! Every grid cell is split into four triangles through an added
//! cell-center vertex, so the triangulation of a rectangle is invariant
//! under both axis reflections and, on squares, under the diagonal swap.
//! Vertices carry integer lattice coordinates (grid vertices at even
//! positions, cell centers at odd positions) which make those symmetry
//! maps exact.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Rectangle,
    Triangle,
    MaskedRectangle,
    /// Piece of the square on one side of an anti-diagonal cut `x + y = c`.
    CutPiece,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn distance_to_center(&self, x: [f64; 2]) -> f64 {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1])
    }

    /// Distance to the circle for points inside the open disk, zero outside.
    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        (self.radius - self.distance_to_center(x)).max(0.0)
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.distance_to_center(x) < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Functions are supported inside the union of the disks.
    Include,
    /// The disks are holes.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskMask {
    pub disks: Vec<Disk>,
    pub mode: MaskMode,
}

/// Geometric description of a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub a: f64,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<DiskMask>,
    /// Position of the anti-diagonal cut for [`DomainKind::CutPiece`], with
    /// `below` selecting the piece containing the origin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<(f64, bool)>,
}

impl DomainSpec {
    pub fn rectangle(a: f64, b: f64) -> Self {
        Self { kind: DomainKind::Rectangle, a, b, mask: None, cut: None }
    }

    /// The rectangle `R_a = (0,a) x (0,1)`.
    pub fn r(a: f64) -> Self {
        Self::rectangle(a, 1.0)
    }

    /// Triangle with vertices (0,0), (1,0), (0,1).
    pub fn unit_triangle() -> Self {
        Self { kind: DomainKind::Triangle, a: 1.0, b: 1.0, mask: None, cut: None }
    }

    pub fn masked(a: f64, b: f64, mask: DiskMask) -> Self {
        Self { kind: DomainKind::MaskedRectangle, a, b, mask: Some(mask), cut: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::NonPositiveDimension { a: self.a, b: self.b });
        }
        if self.kind == DomainKind::Triangle && (self.a - self.b).abs() > GEOM_TOL * self.a {
            return Err(Error::InvalidOption("triangle legs must be equal".into()));
        }
        if let Some(mask) = &self.mask {
            validate_disks(self.a, self.b, &mask.disks)?;
        }
        Ok(())
    }

    /// Lebesgue measure of the (unmasked) region.
    pub fn area(&self) -> f64 {
        match self.kind {
            DomainKind::Rectangle | DomainKind::MaskedRectangle => self.a * self.b,
            DomainKind::Triangle => 0.5 * self.a * self.b,
            DomainKind::CutPiece => {
                let (c, below) = self.cut.unwrap_or((1.0, true));
                let s = self.a;
                let lower = if c <= s { 0.5 * c * c } else { s * s - 0.5 * (2.0 * s - c).powi(2) };
                if below {
                    lower
                } else {
                    s * s - lower
                }
            }
        }
    }
}

fn validate_disks(a: f64, b: f64, disks: &[Disk]) -> Result<()> {
    for (i, d) in disks.iter().enumerate() {
        let [cx, cy] = d.center;
        let r = d.radius;
        if !(r > 0.0) || cx - r < -GEOM_TOL || cy - r < -GEOM_TOL || cx + r > a + GEOM_TOL || cy + r > b + GEOM_TOL {
            return Err(Error::DiskOutsideDomain(i));
        }
    }
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            let dist = disks[i].distance_to_center(disks[j].center);
            if dist < disks[i].radius + disks[j].radius - GEOM_TOL {
                return Err(Error::OverlappingDisks(i, j));
            }
        }
    }
    Ok(())
}

/// Reflections preserved by the structured meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflection {
    /// `x -> a - x`
    FlipX,
    /// `y -> b - y`
    FlipY,
    /// `(x, y) -> (y, x)`
    Transpose,
}

/// Piecewise-linear discretization carrier.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub domain: DomainSpec,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub dirichlet: Vec<bool>,
    pub areas: Vec<f64>,
    /// Gradients of the three barycentric basis functions on each element:
    /// `grad u|_T = sum_k u[t[k]] * grad_ops[T][k]`.
    pub grad_ops: Vec<[[f64; 2]; 3]>,
    /// Largest cell side.
    pub h: f64,
    /// Cells per unit length requested at construction.
    pub resolution: usize,
    /// Free vertices inside each mask disk (empty without a mask).
    pub disk_vertices: Vec<Vec<usize>>,
    lattice: Vec<[i64; 2]>,
    cells: [usize; 2],
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&i| !self.dirichlet[i]).collect()
    }

    pub fn num_interior(&self) -> usize {
        self.dirichlet.iter().filter(|&&d| !d).count()
    }

    /// Cell counts `(nx, ny)` of the underlying grid.
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    /// Constant gradient of the piecewise-linear interpolant `u` on element `t`.
    #[inline]
    pub fn element_gradient(&self, t: usize, u: &[f64]) -> [f64; 2] {
        let tri = self.triangles[t];
        let g = &self.grad_ops[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            let v = u[tri[k]];
            out[0] += v * g[k][0];
            out[1] += v * g[k][1];
        }
        out
    }

    /// Vertex permutation `perm` with `perm[v]` the image of `v` under the
    /// reflection, or `None` when the vertex set is not mapped onto itself.
    pub fn reflection_map(&self, r: Reflection) -> Option<Vec<usize>> {
        let [nx, ny] = self.cells;
        let (mx, my) = (2 * nx as i64, 2 * ny as i64);
        let index: HashMap<[i64; 2], usize> = self.lattice.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        self.lattice
            .iter()
            .map(|&[x, y]| {
                let img = match r {
                    Reflection::FlipX => [mx - x, y],
                    Reflection::FlipY => [x, my - y],
                    Reflection::Transpose => [y, x],
                };
                index.get(&img).copied()
            })
            .collect()
    }

    /// Whether the triangle set and the Dirichlet flags are invariant under `r`.
    pub fn is_symmetric_under(&self, r: Reflection) -> bool {
        let Some(perm) = self.reflection_map(r) else {
            return false;
        };
        if (0..self.num_vertices()).any(|v| self.dirichlet[v] != self.dirichlet[perm[v]]) {
            return false;
        }
        let key = |t: [usize; 3]| {
            let mut t = t;
            t.sort_unstable();
            t
        };
        let set: std::collections::HashSet<[usize; 3]> = self.triangles.iter().map(|&t| key(t)).collect();
        self.triangles.iter().all(|t| set.contains(&key([perm[t[0]], perm[t[1]], perm[t[2]]])))
    }

    /// Undirected edges between vertices, each listed once with `i < j`.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut e: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]].map(|[i, j]| [i.min(j), i.max(j)]))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Connected components of the free (non-Dirichlet) vertices.
    pub fn free_components(&self) -> Vec<Vec<usize>> {
        let n = self.num_vertices();
        let mut adj = vec![Vec::new(); n];
        for [i, j] in self.edges() {
            if !self.dirichlet[i] && !self.dirichlet[j] {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if self.dirichlet[s] || seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut k = 0;
            while k < comp.len() {
                let v = comp[k];
                k += 1;
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Plain-text dump: rows `v x y dirichlet` followed by rows `t i j k`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (v, d) in self.vertices.iter().zip(&self.dirichlet) {
            writeln!(w, "v {} {} {}", v[0], v[1], u8::from(*d))?;
        }
        for t in &self.triangles {
            writeln!(w, "t {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Raw crisscross grid before boundary detection.
struct Grid {
    vertices: Vec<[f64; 2]>,
    lattice: Vec<[i64; 2]>,
    triangles: Vec<[usize; 3]>,
    hx: f64,
    hy: f64,
    nx: usize,
    ny: usize,
}

fn crisscross(nx: usize, ny: usize, hx: f64, hy: f64) -> Grid {
    let nv_grid = (nx + 1) * (ny + 1);
    let mut vertices = Vec::with_capacity(nv_grid + nx * ny);
    let mut lattice = Vec::with_capacity(nv_grid + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 * hx, j as f64 * hy]);
            lattice.push([2 * i as i64, 2 * j as i64]);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy]);
            lattice.push([2 * i as i64 + 1, 2 * j as i64 + 1]);
        }
    }
    let g = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = nv_grid + j * nx + i;
            let (v00, v10, v11, v01) = (g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1));
            triangles.push([v00, v10, c]);
            triangles.push([v10, v11, c]);
            triangles.push([v11, v01, c]);
            triangles.push([v01, v00, c]);
        }
    }
    Grid { vertices, lattice, triangles, hx, hy, nx, ny }
}

/// Keeps the triangles accepted by `keep`, drops unused vertices and flags
/// every vertex on a boundary edge as Dirichlet.
fn finish(grid: Grid, keep: impl Fn(&[[i64; 2]; 3]) -> bool, domain: DomainSpec, n: usize) -> TriMesh {
    let kept: Vec<[usize; 3]> = grid
        .triangles
        .iter()
        .copied()
        .filter(|t| keep(&[grid.lattice[t[0]], grid.lattice[t[1]], grid.lattice[t[2]]]))
        .collect();
    let mut used = vec![false; grid.vertices.len()];
    for t in &kept {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; grid.vertices.len()];
    let mut vertices = Vec::new();
    let mut lattice = Vec::new();
    for v in (0..grid.vertices.len()).filter(|&v| used[v]) {
        remap[v] = vertices.len();
        vertices.push(grid.vertices[v]);
        lattice.push(grid.lattice[v]);
    }
    let triangles: Vec<[usize; 3]> = kept.iter().map(|t| t.map(|v| remap[v])).collect();

    let mut edge_count: HashMap<[usize; 2], u8> = HashMap::with_capacity(triangles.len() * 2);
    for t in &triangles {
        for [i, j] in [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]] {
            *edge_count.entry([i.min(j), i.max(j)]).or_insert(0) += 1;
        }
    }
    let mut dirichlet = vec![false; vertices.len()];
    for (e, c) in &edge_count {
        if *c == 1 {
            dirichlet[e[0]] = true;
            dirichlet[e[1]] = true;
        }
    }

    let (areas, grad_ops) = element_geometry(&vertices, &triangles);
    TriMesh {
        domain,
        vertices,
        triangles,
        dirichlet,
        areas,
        grad_ops,
        h: grid.hx.max(grid.hy),
        resolution: n,
        disk_vertices: Vec::new(),
        lattice,
        cells: [grid.nx, grid.ny],
    }
}

fn element_geometry(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> (Vec<f64>, Vec<[[f64; 2]; 3]>) {
    triangles
        .iter()
        .map(|t| {
            let [x0, y0] = vertices[t[0]];
            let [x1, y1] = vertices[t[1]];
            let [x2, y2] = vertices[t[2]];
            let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
            let inv = 1.0 / det;
            (
                0.5 * det,
                [
                    [(y1 - y2) * inv, (x2 - x1) * inv],
                    [(y2 - y0) * inv, (x0 - x2) * inv],
                    [(y0 - y1) * inv, (x1 - x0) * inv],
                ],
            )
        })
        .unzip()
}

fn cell_count(len: f64, n: usize) -> Result<usize> {
    let c = (len * n as f64).round();
    if c < 2.0 {
        return Err(Error::ResolutionTooSmall { n });
    }
    Ok(c as usize)
}

fn check_resolution(n: usize) -> Result<()> {
    if n < 4 {
        Err(Error::ResolutionTooSmall { n })
    } else {
        Ok(())
    }
}

/// Crisscross triangulation of `(0,a) x (0,b)` with `n` cells per unit length.
pub fn build_rectangle_mesh(a: f64, b: f64, n: usize) -> Result<TriMesh> {
    let domain = DomainSpec::rectangle(a, b);
    domain.validate()?;
    check_resolution(n)?;
    let (nx, ny) = (cell_count(a, n)?, cell_count(b, n)?);
    let grid = crisscross(nx, ny, a / nx as f64, b / ny as f64);
    Ok(finish(grid, |_| true, domain, n))
}

/// Triangulation of the unit right triangle: the crisscross mesh of the unit
/// square restricted to `x + y < 1`. Symmetric under `(x, y) -> (y, x)`.
pub fn build_triangle_mesh(n: usize) -> Result<TriMesh> {
    check_resolution(n)?;
    let grid = crisscross(n, n, 1.0 / n as f64, 1.0 / n as f64);
    let limit = 6 * n as i64;
    Ok(finish(grid, |t| t.iter().map(|l| l[0] + l[1]).sum::<i64>() < limit, DomainSpec::unit_triangle(), n))
}

/// One piece of the unit square cut along `x + y = m / n`.
///
/// `below` keeps the piece containing the origin. The cut runs along
/// mesh edges, so the piece is an exact sub-mesh of the square mesh.
pub fn build_cut_square_piece(m: usize, n: usize, below: bool) -> Result<TriMesh> {
    check_resolution(n)?;
    if m == 0 || m >= 2 * n {
        return Err(Error::InvalidOption(format!("cut index {m} outside (0, {})", 2 * n)));
    }
    let grid = crisscross(n, n, 1.0 / n as f64, 1.0 / n as f64);
    let limit = 6 * m as i64;
    let domain =
        DomainSpec { kind: DomainKind::CutPiece, a: 1.0, b: 1.0, mask: None, cut: Some((m as f64 / n as f64, below)) };
    let mesh = finish(grid, |t| (t.iter().map(|l| l[0] + l[1]).sum::<i64>() < limit) == below, domain, n);
    if mesh.num_interior() == 0 {
        return Err(Error::ResolutionTooSmall { n });
    }
    Ok(mesh)
}

/// Uniformly scaled copy of `m`.
pub fn scale_mesh(m: &TriMesh, s: f64) -> Result<TriMesh> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::NonPositiveScale(s));
    }
    let mut out = m.clone();
    for v in &mut out.vertices {
        v[0] *= s;
        v[1] *= s;
    }
    for a in &mut out.areas {
        *a *= s * s;
    }
    for g in &mut out.grad_ops {
        for row in g.iter_mut() {
            row[0] /= s;
            row[1] /= s;
        }
    }
    out.h *= s;
    out.domain.a *= s;
    out.domain.b *= s;
    if let Some((c, below)) = out.domain.cut {
        out.domain.cut = Some((c * s, below));
    }
    if let Some(mask) = &mut out.domain.mask {
        for d in &mut mask.disks {
            d.center = [d.center[0] * s, d.center[1] * s];
            d.radius *= s;
        }
    }
    Ok(out)
}

/// Rectangle mesh whose free vertices are restricted by a disk mask.
///
/// In [`MaskMode::Include`] mode every vertex outside the union of the open
/// disks is Dirichlet, and so are both ends of any edge joining two disks;
/// the free vertices of each disk are reported in `disk_vertices`. An empty
/// disk list gives the plain rectangle mesh.
pub fn build_disk_masked_mesh(a: f64, b: f64, mask: DiskMask, n: usize) -> Result<TriMesh> {
    let domain = DomainSpec::masked(a, b, mask);
    domain.validate()?;
    let mut mesh = build_rectangle_mesh(a, b, n)?;
    let mask = domain.mask.clone().expect("masked domain");
    mesh.domain = domain;
    if mask.disks.is_empty() {
        return Ok(mesh);
    }
    let mut per_disk = vec![Vec::new(); mask.disks.len()];
    for (v, x) in mesh.vertices.iter().enumerate() {
        let inside = mask.disks.iter().position(|d| d.contains(*x));
        match mask.mode {
            MaskMode::Include => match inside {
                Some(k) if !mesh.dirichlet[v] => per_disk[k].push(v),
                _ => mesh.dirichlet[v] = true,
            },
            MaskMode::Exclude => {
                if mask.disks.iter().any(|d| d.distance_to_center(*x) <= d.radius) {
                    mesh.dirichlet[v] = true;
                }
            }
        }
    }
    if mask.mode == MaskMode::Include {
        // tangent disks: no element may carry free values of two disks
        let mut owner = vec![usize::MAX; mesh.num_vertices()];
        for (k, vs) in per_disk.iter().enumerate() {
            for &v in vs {
                owner[v] = k;
            }
        }
        for [i, j] in mesh.edges() {
            if owner[i] != usize::MAX && owner[j] != usize::MAX && owner[i] != owner[j] {
                mesh.dirichlet[i] = true;
                mesh.dirichlet[j] = true;
            }
        }
        for vs in &mut per_disk {
            vs.retain(|&v| !mesh.dirichlet[v]);
        }
        mesh.disk_vertices = per_disk;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn unit_square_counts_and_area() {
        let m = build_rectangle_mesh(1.0, 1.0, 4).unwrap();
        assert_eq!(m.num_triangles(), 64);
        assert!(rel(m.total_area(), 1.0) < 1e-12);
        let m = build_rectangle_mesh(1.0, 1.0, 64).unwrap();
        assert_eq!(m.num_vertices(), 65 * 65 + 64 * 64);
    }

    #[test]
    fn rectangle_symmetries() {
        let m = build_rectangle_mesh(2.0, 1.0, 4).unwrap();
        assert!(rel(m.total_area(), 2.0) < 1e-12);
        assert!(m.is_symmetric_under(Reflection::FlipX));
        assert!(m.is_symmetric_under(Reflection::FlipY));
        assert!(!m.is_symmetric_under(Reflection::Transpose));
        let sq = build_rectangle_mesh(1.0, 1.0, 8).unwrap();
        assert!(sq.is_symmetric_under(Reflection::Transpose));
    }

    #[test]
    fn orientation_is_counter_clockwise() {
        for m in [build_rectangle_mesh(1.3, 0.7, 10).unwrap(), build_triangle_mesh(9).unwrap()] {
            assert!(m.areas.iter().all(|&a| a > 0.0));
        }
    }

    #[test]
    fn boundary_flags_on_rectangle() {
        let m = build_rectangle_mesh(1.5, 1.0, 8).unwrap();
        for (v, x) in m.vertices.iter().enumerate() {
            let on =
                x[0].abs() < 1e-12 || x[1].abs() < 1e-12 || (x[0] - 1.5).abs() < 1e-12 || (x[1] - 1.0).abs() < 1e-12;
            assert_eq!(on, m.dirichlet[v], "vertex {v} at {x:?}");
        }
    }

    #[test]
    fn triangle_mesh() {
        let m = build_triangle_mesh(4).unwrap();
        assert!(rel(m.total_area(), 0.5) < 1e-12);
        assert!(m.is_symmetric_under(Reflection::Transpose));
        let m = build_triangle_mesh(64).unwrap();
        for (v, x) in m.vertices.iter().enumerate() {
            if m.dirichlet[v] {
                let on = x[0].abs() < 1e-12 || x[1].abs() < 1e-12 || (x[0] + x[1] - 1.0).abs() < 1e-12;
                assert!(on, "boundary vertex {x:?} off the edges");
            } else {
                assert!(x[0] > 0.0 && x[1] > 0.0 && x[0] + x[1] < 1.0);
            }
        }
    }

    #[test]
    fn resolution_and_dimension_errors() {
        assert!(matches!(build_rectangle_mesh(0.0, 1.0, 8), Err(Error::NonPositiveDimension { .. })));
        assert!(matches!(build_rectangle_mesh(1.0, -1.0, 8), Err(Error::NonPositiveDimension { .. })));
        assert!(matches!(build_rectangle_mesh(1.0, 1.0, 3), Err(Error::ResolutionTooSmall { .. })));
        assert!(matches!(build_rectangle_mesh(0.1, 1.0, 4), Err(Error::ResolutionTooSmall { .. })));
        assert!(matches!(build_triangle_mesh(2), Err(Error::ResolutionTooSmall { .. })));
    }

    #[test]
    fn scaling() {
        let m = build_rectangle_mesh(1.0, 1.0, 8).unwrap();
        let s2 = scale_mesh(&m, 2.0).unwrap();
        assert!(rel(s2.total_area(), 4.0) < 1e-12);
        let s1 = scale_mesh(&m, 1.0).unwrap();
        assert_eq!(s1.vertices, m.vertices);
        assert_eq!(s1.areas, m.areas);
        let half = scale_mesh(&m, 0.5).unwrap();
        let x: Vec<f64> = m.vertices.iter().map(|v| v[0]).collect();
        let xh: Vec<f64> = half.vertices.iter().map(|v| v[0]).collect();
        for t in 0..m.num_triangles() {
            let g = m.element_gradient(t, &x);
            let gh = half.element_gradient(t, &xh);
            // the coordinate function of the scaled mesh is x/2, so compare with the original field
            let gh_orig = half.element_gradient(t, &x);
            assert!((gh_orig[0] - 2.0 * g[0]).abs() < 1e-12);
            assert!((gh[0] - 1.0).abs() < 1e-12);
        }
        assert!(matches!(scale_mesh(&m, 0.0), Err(Error::NonPositiveScale(_))));
        assert!(matches!(scale_mesh(&m, -1.0), Err(Error::NonPositiveScale(_))));
    }

    #[test]
    fn affine_gradients_exact() {
        for m in [build_rectangle_mesh(1.2, 0.8, 12).unwrap(), build_triangle_mesh(10).unwrap()] {
            let (al, be, ga) = (0.7, -1.3, 0.25);
            let u: Vec<f64> = m.vertices.iter().map(|v| al * v[0] + be * v[1] + ga).collect();
            for t in 0..m.num_triangles() {
                let g = m.element_gradient(t, &u);
                assert!(rel(g[0], al) < 1e-12 && rel(g[1], be) < 1e-12);
            }
        }
    }

    #[test]
    fn single_disk_mask() {
        let mask = DiskMask { disks: vec![Disk::new([0.5, 0.5], 0.25)], mode: MaskMode::Include };
        let m = build_disk_masked_mesh(1.0, 1.0, mask, 64).unwrap();
        let h = m.h;
        let free = m.interior_vertices();
        assert!(!free.is_empty());
        for v in free {
            let x = m.vertices[v];
            assert!((x[0] - 0.5).hypot(x[1] - 0.5) <= 0.25 + h);
        }
        assert_eq!(m.disk_vertices.len(), 1);
    }

    #[test]
    fn empty_mask_is_plain_rectangle() {
        let mask = DiskMask { disks: vec![], mode: MaskMode::Include };
        let m = build_disk_masked_mesh(1.0, 1.0, mask, 16).unwrap();
        let r = build_rectangle_mesh(1.0, 1.0, 16).unwrap();
        assert_eq!(m.dirichlet, r.dirichlet);
        assert_eq!(m.triangles, r.triangles);
    }

    #[test]
    fn mask_errors() {
        let overlap =
            DiskMask { disks: vec![Disk::new([0.3, 0.5], 0.2), Disk::new([0.6, 0.5], 0.2)], mode: MaskMode::Include };
        assert!(matches!(build_disk_masked_mesh(1.0, 1.0, overlap, 16), Err(Error::OverlappingDisks(0, 1))));
        let outside = DiskMask { disks: vec![Disk::new([0.1, 0.5], 0.2)], mode: MaskMode::Include };
        assert!(matches!(build_disk_masked_mesh(1.0, 1.0, outside, 16), Err(Error::DiskOutsideDomain(0))));
    }

    #[test]
    fn cut_pieces_partition_square() {
        let n = 8;
        for m in [3, 8, 11] {
            let lo = build_cut_square_piece(m, n, true).unwrap();
            let hi = build_cut_square_piece(m, n, false).unwrap();
            assert!((lo.total_area() + hi.total_area() - 1.0).abs() < 1e-12);
            assert!(rel(lo.total_area(), lo.domain.area()) < 1e-12);
            assert!(rel(hi.total_area(), hi.domain.area()) < 1e-12);
        }
        let t = build_cut_square_piece(n, n, true).unwrap();
        let tri = build_triangle_mesh(n).unwrap();
        assert_eq!(t.num_vertices(), tri.num_vertices());
        assert_eq!(t.num_interior(), tri.num_interior());
    }

    #[test]
    fn dump_format() {
        let m = build_rectangle_mesh(1.0, 1.0, 4).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), m.num_vertices());
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 64);
        assert!(text.starts_with("v 0 0 1\n"));
    }
}
