//! Acceptance harness: per-criterion reporting and oracles that are
//! independent of the solver code paths under test.

use std::io::Write;

use plap::{Field, TriMesh};

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Collects sub-checks of one criterion and prints its verdict. Writes go
/// straight to the process stdout so they survive output capture.
pub struct Criterion {
    name: &'static str,
    lines: Vec<String>,
    ok: bool,
}

impl Criterion {
    pub fn new(name: &'static str) -> Self {
        Self { name, lines: Vec::new(), ok: true }
    }

    pub fn check(&mut self, what: &str, pass: bool, detail: String) {
        self.ok &= pass;
        self.lines.push(format!("    [{}] {what}: {detail}", if pass { "ok" } else { "not met" }));
    }

    /// Adds an informational line that does not affect the verdict.
    pub fn note(&mut self, line: String) {
        self.lines.push(format!("    {line}"));
    }

    pub fn passed(&self) -> bool {
        self.ok
    }

    /// Prints the verdict and sub-lines, then fails the calling test if any
    /// sub-check was not met.
    pub fn finish(self) {
        let mut out = std::io::stdout().lock();
        let verdict = if self.ok { "PASS" } else { "FAIL" };
        writeln!(out, "{verdict} {}", self.name).unwrap();
        for l in &self.lines {
            writeln!(out, "{l}").unwrap();
        }
        out.flush().unwrap();
        assert!(self.ok, "criterion not met: {}", self.name);
    }
}

/// `y^q` and `x^q - y^q` for `x = y + diff`, without cancellation.
pub fn pow_and_diff(y: f64, diff: f64, q: f64) -> (f64, f64) {
    let yq = y.powf(q);
    if y == 0.0 {
        return (0.0, diff.abs().powf(q));
    }
    (yq, yq * (q * (diff / y).ln_1p()).exp_m1())
}

/// `(R(u + h d) - R(u - h d)) / 2h` for the discrete Rayleigh quotient at
/// `eps = 0`. Every element and midpoint contribution is differenced before
/// summation, so the oracle is not limited by cancellation in `R` itself.
pub fn central_difference(m: &TriMesh, u: &Field, d: &Field, p: f64, h: f64) -> f64 {
    let (mut e_minus, mut de) = (0.0, 0.0);
    for t in 0..m.num_triangles() {
        let g = m.element_gradient(t, &u.values);
        let gd = m.element_gradient(t, &d.values);
        let minus = [g[0] - h * gd[0], g[1] - h * gd[1]];
        let s_minus = minus[0] * minus[0] + minus[1] * minus[1];
        // |g + h gd|^2 - |g - h gd|^2 = 4 h g.gd
        let ds = 4.0 * h * (g[0] * gd[0] + g[1] * gd[1]);
        let (base, diff) = pow_and_diff(s_minus, ds, 0.5 * p);
        e_minus += m.areas[t] * base;
        de += m.areas[t] * diff;
    }
    let (mut n_minus, mut dn) = (0.0, 0.0);
    for (tri, area) in m.triangles.iter().zip(&m.areas) {
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let mid = 0.5 * (u.values[tri[i]] + u.values[tri[j]]);
            let dmid = 0.5 * (d.values[tri[i]] + d.values[tri[j]]);
            let (lo, hi) = (mid - h * dmid, mid + h * dmid);
            let (base, diff) = if lo * hi > 0.0 {
                pow_and_diff(lo.abs(), hi.abs() - lo.abs(), p)
            } else {
                (lo.abs().powf(p), hi.abs().powf(p) - lo.abs().powf(p))
            };
            n_minus += area / 3.0 * base;
            dn += area / 3.0 * diff;
        }
    }
    let n_plus = n_minus + dn;
    // R+ - R- = (dE N- - E- dN) / (N+ N-)
    (de * n_minus - e_minus * dn) / (n_plus * n_minus) / (2.0 * h)
}
