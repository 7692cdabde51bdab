//! Sparse Cholesky factorization of weighted P1 stiffness matrices.
//!
//! The sparsity pattern of a mesh is fixed, so the fill-reducing ordering
//! (geometric nested dissection) and the symbolic factorization are computed
//! once per mesh; numeric factorizations for new element weights reuse them.
//! The numeric kernel is an up-looking row-by-row Cholesky driven by the
//! elimination tree.

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

const NONE: usize = usize::MAX;
const LEAF_SIZE: usize = 48;

/// Pattern, ordering and symbolic factor of the interior stiffness matrix.
#[derive(Debug, Clone)]
pub struct StiffnessPattern {
    n: usize,
    /// Degree-of-freedom index of each vertex, `NONE` on Dirichlet vertices.
    pub dof_of_vertex: Vec<usize>,
    pub vertex_of_dof: Vec<usize>,
    /// Permuted position of each dof.
    iperm: Vec<usize>,
    /// Upper triangle (row <= col) of the permuted matrix in CSC form.
    cp: Vec<usize>,
    ci: Vec<usize>,
    /// Value slots for the six unordered local pairs
    /// (0,0), (1,1), (2,2), (0,1), (1,2), (0,2) of every element.
    slots: Vec<[usize; 6]>,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

impl StiffnessPattern {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let mut dof_of_vertex = vec![NONE; mesh.num_vertices()];
        let mut vertex_of_dof = Vec::new();
        for (v, &d) in mesh.dirichlet.iter().enumerate() {
            if !d {
                dof_of_vertex[v] = vertex_of_dof.len();
                vertex_of_dof.push(v);
            }
        }
        let n = vertex_of_dof.len();
        if n == 0 {
            return Err(Error::EmptyInterior);
        }

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for [i, j] in mesh.edges() {
            let (di, dj) = (dof_of_vertex[i], dof_of_vertex[j]);
            if di != NONE && dj != NONE {
                adj[di].push(dj);
                adj[dj].push(di);
            }
        }
        let coords: Vec<[f64; 2]> = vertex_of_dof.iter().map(|&v| mesh.vertices[v]).collect();
        let perm = nested_dissection(&coords, &adj);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Column k of the upper triangle holds rows i <= k adjacent to k.
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for old in 0..n {
            let k = iperm[old];
            cols[k].push(k);
            for &nb in &adj[old] {
                let i = iperm[nb];
                if i < k {
                    cols[k].push(i);
                }
            }
        }
        let mut cp = Vec::with_capacity(n + 1);
        let mut ci = Vec::new();
        cp.push(0);
        for c in &mut cols {
            c.sort_unstable();
            c.dedup();
            ci.extend_from_slice(c);
            cp.push(ci.len());
        }

        let slot = |r: usize, c: usize| -> usize {
            let (r, c) = (r.min(c), r.max(c));
            let col = &ci[cp[c]..cp[c + 1]];
            cp[c] + col.binary_search(&r).expect("entry in pattern")
        };
        let slots = mesh
            .triangles
            .iter()
            .map(|t| {
                PAIRS.map(|(a, b)| {
                    let (da, db) = (dof_of_vertex[t[a]], dof_of_vertex[t[b]]);
                    if da == NONE || db == NONE {
                        NONE
                    } else {
                        slot(iperm[da], iperm[db])
                    }
                })
            })
            .collect();

        let parent = etree(n, &cp, &ci);
        let lp = column_pointers(n, &cp, &ci, &parent);
        Ok(Self { n, dof_of_vertex, vertex_of_dof, iperm, cp, ci, slots, parent, lp })
    }

    pub fn num_dofs(&self) -> usize {
        self.n
    }

    /// Number of stored entries of the Cholesky factor.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Assembles `sum_T weight[T] * area[T] * G_T^T G_T` restricted to the
    /// interior and factors it.
    pub fn factor_weighted(&self, mesh: &TriMesh, weights: &[f64]) -> Result<CholeskyFactor> {
        self.assemble_and_factor(mesh, |t| {
            let w = weights[t];
            [w, 0.0, w]
        })
    }

    /// Factors `sum_T |T| G_T^T C_T G_T` for symmetric element tensors
    /// `C_T = [[xx, xy], [xy, yy]]` given as `[xx, xy, yy]`.
    pub fn factor_tensor(&self, mesh: &TriMesh, tensors: &[[f64; 3]]) -> Result<CholeskyFactor> {
        self.assemble_and_factor(mesh, |t| tensors[t])
    }

    fn assemble_and_factor(&self, mesh: &TriMesh, tensor: impl Fn(usize) -> [f64; 3]) -> Result<CholeskyFactor> {
        let mut cx = vec![0.0; self.ci.len()];
        for (t, s) in self.slots.iter().enumerate() {
            let g = &mesh.grad_ops[t];
            let [xx, xy, yy] = tensor(t);
            let c = mesh.areas[t];
            for (k, &(a, b)) in PAIRS.iter().enumerate() {
                if s[k] != NONE {
                    let (ga, gb) = (g[a], g[b]);
                    let q = xx * ga[0] * gb[0] + xy * (ga[0] * gb[1] + ga[1] * gb[0]) + yy * ga[1] * gb[1];
                    cx[s[k]] += c * q;
                }
            }
        }
        self.factor(&cx)
    }

    fn factor(&self, cx: &[f64]) -> Result<CholeskyFactor> {
        let n = self.n;
        let nnz = self.lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut next = self.lp[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];

        for k in 0..n {
            let top = ereach(k, &self.cp, &self.ci, &self.parent, &mut stack, &mut mark);
            for p in self.cp[k]..self.cp[k + 1] {
                x[self.ci[p]] = cx[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..n] {
                let lki = x[i] / lx[self.lp[i]];
                x[i] = 0.0;
                for p in self.lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(CholeskyFactor { lp: self.lp.clone(), li, lx })
    }

    /// Solves `A x = b` with `b` and `x` indexed by dof.
    pub fn solve(&self, f: &CholeskyFactor, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for (old, &v) in b.iter().enumerate() {
            y[self.iperm[old]] = v;
        }
        for j in 0..n {
            let start = f.lp[j];
            y[j] /= f.lx[start];
            let yj = y[j];
            for p in start + 1..f.lp[j + 1] {
                y[f.li[p]] -= f.lx[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let start = f.lp[j];
            let mut s = y[j];
            for p in start + 1..f.lp[j + 1] {
                s -= f.lx[p] * y[f.li[p]];
            }
            y[j] = s / f.lx[start];
        }
        (0..n).map(|old| y[self.iperm[old]]).collect()
    }
}

/// Numeric Cholesky factor `L` stored by columns, diagonal first.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

fn etree(n: usize, cp: &[usize], ci: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &r in &ci[cp[k]..cp[k + 1]] {
            let mut i = r;
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal) in
/// topological order, returned as `stack[top..n]`.
fn ereach(k: usize, cp: &[usize], ci: &[usize], parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &r in &ci[cp[k]..cp[k + 1]] {
        let mut i = r;
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

fn column_pointers(n: usize, cp: &[usize], ci: &[usize], parent: &[usize]) -> Vec<usize> {
    let mut counts = vec![1usize; n];
    let mut stack = vec![0usize; n];
    let mut mark = vec![NONE; n];
    for k in 0..n {
        let top = ereach(k, cp, ci, parent, &mut stack, &mut mark);
        for &i in &stack[top..n] {
            counts[i] += 1;
        }
    }
    let mut lp = Vec::with_capacity(n + 1);
    lp.push(0);
    let mut acc = 0;
    for c in counts {
        acc += c;
        lp.push(acc);
    }
    lp
}

/// Geometric nested dissection: split at the coordinate median of the longer
/// bounding-box side, order both halves recursively, separator last.
fn nested_dissection(coords: &[[f64; 2]], adj: &[Vec<usize>]) -> Vec<usize> {
    let n = coords.len();
    let mut order = Vec::with_capacity(n);
    let mut label = vec![0u32; n];
    let mut next_label = 1u32;
    dissect((0..n).collect(), coords, adj, &mut label, &mut next_label, &mut order);
    order
}

fn dissect(
    mut set: Vec<usize>,
    coords: &[[f64; 2]],
    adj: &[Vec<usize>],
    label: &mut [u32],
    next_label: &mut u32,
    order: &mut Vec<usize>,
) {
    if set.len() <= LEAF_SIZE {
        order.extend(set);
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &v in &set {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[v][d]);
            hi[d] = hi[d].max(coords[v][d]);
        }
    }
    let dim = usize::from(hi[1] - lo[1] > hi[0] - lo[0]);
    let other = 1 - dim;
    set.sort_unstable_by(|&u, &v| {
        coords[u][dim].total_cmp(&coords[v][dim]).then(coords[u][other].total_cmp(&coords[v][other])).then(u.cmp(&v))
    });
    let right = set.split_off(set.len() / 2);
    let id = *next_label;
    *next_label += 1;
    for &v in &right {
        label[v] = id;
    }
    let (sep, left): (Vec<usize>, Vec<usize>) = set.into_iter().partition(|&v| adj[v].iter().any(|&w| label[w] == id));
    dissect(left, coords, adj, label, next_label, order);
    dissect(right, coords, adj, label, next_label, order);
    order.extend(sep);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rectangle_mesh, build_triangle_mesh};

    fn dense_stiffness(mesh: &TriMesh, pat: &StiffnessPattern, w: &[f64]) -> Vec<Vec<f64>> {
        let n = pat.num_dofs();
        let mut a = vec![vec![0.0; n]; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let g = &mesh.grad_ops[t];
            for i in 0..3 {
                for j in 0..3 {
                    let (di, dj) = (pat.dof_of_vertex[tri[i]], pat.dof_of_vertex[tri[j]]);
                    if di != NONE && dj != NONE {
                        a[di][dj] += w[t] * mesh.areas[t] * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    }
                }
            }
        }
        a
    }

    #[test]
    fn solves_weighted_system() {
        for mesh in [build_rectangle_mesh(1.0, 0.75, 12).unwrap(), build_triangle_mesh(10).unwrap()] {
            let pat = StiffnessPattern::new(&mesh).unwrap();
            let w: Vec<f64> = (0..mesh.num_triangles()).map(|t| 1.0 + (t % 7) as f64 * 0.3).collect();
            let f = pat.factor_weighted(&mesh, &w).unwrap();
            let n = pat.num_dofs();
            let b: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
            let x = pat.solve(&f, &b);
            let a = dense_stiffness(&mesh, &pat, &w);
            for i in 0..n {
                let ax: f64 = (0..n).map(|j| a[i][j] * x[j]).sum();
                assert!((ax - b[i]).abs() < 1e-9, "row {i}: {ax} vs {}", b[i]);
            }
        }
    }

    #[test]
    fn ordering_is_a_permutation_with_moderate_fill() {
        let mesh = build_rectangle_mesh(1.0, 1.0, 32).unwrap();
        let pat = StiffnessPattern::new(&mesh).unwrap();
        let mut seen = vec![false; pat.num_dofs()];
        for &i in &pat.iperm {
            assert!(!seen[i]);
            seen[i] = true;
        }
        // banded elimination would need roughly n * 2 * 32 entries
        assert!(pat.factor_nnz() < pat.num_dofs() * 40, "fill {}", pat.factor_nnz());
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mesh = build_rectangle_mesh(1.0, 1.0, 4).unwrap();
        let pat = StiffnessPattern::new(&mesh).unwrap();
        let w = vec![-1.0; mesh.num_triangles()];
        assert!(matches!(pat.factor_weighted(&mesh, &w), Err(Error::NotPositiveDefinite)));
    }
}
