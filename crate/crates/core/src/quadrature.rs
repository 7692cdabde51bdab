//! Gauss–Legendre rules and adaptive panel subdivision on rectangles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_estimate: f64,
    pub evaluations: usize,
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    fn quarters(&self) -> [Rect; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        [
            Rect::new(self.x0, xm, self.y0, ym),
            Rect::new(xm, self.x1, self.y0, ym),
            Rect::new(self.x0, xm, ym, self.y1),
            Rect::new(xm, self.x1, ym, self.y1),
        ]
    }
}

/// Tensor Gauss–Legendre rule mapped onto rectangles.
#[derive(Debug, Clone)]
pub struct TensorRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn evaluations(&self) -> usize {
        self.nodes.len() * self.nodes.len()
    }

    pub fn apply(&self, f: &impl Fn(f64, f64) -> f64, r: &Rect) -> f64 {
        let (cx, hx) = (0.5 * (r.x0 + r.x1), 0.5 * (r.x1 - r.x0));
        let (cy, hy) = (0.5 * (r.y0 + r.y1), 0.5 * (r.y1 - r.y0));
        let mut s = 0.0;
        for (xi, wi) in self.nodes.iter().zip(&self.weights) {
            let x = cx + hx * xi;
            let mut row = 0.0;
            for (yj, wj) in self.nodes.iter().zip(&self.weights) {
                row += wj * f(x, cy + hy * yj);
            }
            s += wi * row;
        }
        s * hx * hy
    }
}

struct Panel {
    rect: Rect,
    /// Rule value on each quarter; their sum is the panel estimate.
    quarters: [f64; 4],
    fine: f64,
    err: f64,
    id: u64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then(other.id.cmp(&self.id))
    }
}

/// Adaptive subdivision: every panel is compared with the sum over its four
/// quarters, the panel with the largest discrepancy is split until the
/// summed discrepancy drops to `target_err`.
pub fn integrate_2d(
    f: impl Fn(f64, f64) -> f64,
    domain: Rect,
    target_err: f64,
    order: usize,
    max_evals: usize,
) -> Result<QuadResult> {
    if !(target_err > 0.0) {
        return Err(Error::InvalidOption("target error must be positive".into()));
    }
    let rule = TensorRule::new(order);
    let mut evaluations = 0usize;
    let mut next_id = 0u64;
    let mut make = |rect: Rect, coarse: f64, evaluations: &mut usize| -> Panel {
        let quarters = rect.quarters().map(|q| rule.apply(&f, &q));
        *evaluations += 4 * rule.evaluations();
        let fine: f64 = quarters.iter().sum();
        next_id += 1;
        Panel { rect, quarters, fine, err: (fine - coarse).abs(), id: next_id }
    };
    let root_coarse = rule.apply(&f, &domain);
    evaluations += rule.evaluations();
    let mut heap = BinaryHeap::new();
    heap.push(make(domain, root_coarse, &mut evaluations));

    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        if total_err <= target_err {
            let mut panels = heap.into_vec();
            panels.sort_by_key(|p| p.id);
            let value = panels.iter().map(|p| p.fine).sum();
            return Ok(QuadResult { value, err_estimate: total_err, evaluations });
        }
        if evaluations >= max_evals {
            return Err(Error::QuadratureBudget { estimate: total_err, target: target_err });
        }
        let worst = heap.pop().expect("nonempty panel set");
        for (q, coarse) in worst.rect.quarters().into_iter().zip(worst.quarters) {
            heap.push(make(q, coarse, &mut evaluations));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        // int x ln x over the unit square is -1/4
        let f = |x: f64, _y: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
        let r = integrate_2d(f, Rect::new(0.0, 1.0, 0.0, 1.0), 1e-10, 8, 10_000_000).unwrap();
        assert!((r.value + 0.25).abs() < 1e-9, "{}", r.value);
        assert!(r.err_estimate <= 1e-10 && r.evaluations > 0);
    }

    #[test]
    fn budget_exhaustion() {
        let f = |x: f64, _y: f64| if x < 0.3 { 0.0 } else { 1.0 };
        let r = integrate_2d(f, Rect::new(0.0, 1.0, 0.0, 1.0), 1e-14, 4, 2000);
        assert!(matches!(r, Err(Error::QuadratureBudget { .. })));
    }
}
