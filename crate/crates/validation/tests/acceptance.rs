//! Acceptance criteria, one test per criterion. Each test prints a single
//! `PASS` or `FAIL` line followed by indented measurements.

use std::f64::consts::PI;
use std::time::Instant;

use plap::asymptotics::{
    disk_family_rayleigh, disk_moments, infinity_limit_scan, packing_bound, packing_bound_closed_form,
    three_disk_packing,
};
use plap::calculus::{
    branch_width_derivatives, dlambda1_da, dlambda1_dp, fd_derivative, numvalues_quadrature, ClosedFormEigenfunction,
};
use plap::eigsolve::{richardson_lambda1, solve_lambda1, EigenResult};
use plap::functional::{dirichlet_energy, p_mass, rayleigh, rayleigh_gradient};
use plap::mesh::{build_rectangle_mesh, scale_mesh, TriMesh};
use plap::spectra::{
    detect_crossing, lambda2_upper, lambda_boxbar, lambda_boxbslash, lambda_boxminus, PartitionFamily,
};
use plap::{BranchLabel, DomainSpec, EnergyOptions, Field, SolveOptions};
use plap_validation::{central_difference, rel, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI2: f64 = PI * PI;

fn solve(m: &TriMesh, p: f64, warm: Option<&Field>) -> EigenResult {
    solve_lambda1(m, p, &SolveOptions::default(), warm).unwrap()
}

#[test]
fn criterion_1_quadrature_constants() {
    let mut c = Criterion::new("criterion 1: closed-form derivative integrals");
    let start = Instant::now();
    let a = numvalues_quadrature(ClosedFormEigenfunction::HalfSquareU1, 1e-3).unwrap();
    let b = numvalues_quadrature(ClosedFormEigenfunction::TriangleU2, 1e-3).unwrap();
    let secs = start.elapsed().as_secs_f64();
    c.check(
        "half-square value",
        (a.value - 176.0407).abs() <= 0.01,
        format!("{:.6} (est. err {:.1e})", a.value, a.err_estimate),
    );
    c.check(
        "triangle value",
        (b.value - 171.8571).abs() <= 0.01,
        format!("{:.6} (est. err {:.1e})", b.value, b.err_estimate),
    );
    let gap = a.value - b.value;
    c.check("difference", (gap - 4.18).abs() <= 0.02, format!("{gap:.6}"));
    c.check("runtime", secs < 30.0, format!("{secs:.2} s"));
    c.finish();
}

#[test]
fn criterion_2_linear_oracles() {
    let mut c = Criterion::new("criterion 2: linear eigenvalue oracles at p = 2");
    let o = SolveOptions::default();
    let r = richardson_lambda1(&DomainSpec::r(1.0), 2.0, 32, &o).unwrap();
    c.check(
        "lambda_1(2; R_1), Richardson over n = 32, 64, 128",
        rel(r.extrapolated, 2.0 * PI2) < 1e-3,
        format!("{:.8} vs {:.8} (raw n=128 {:.8})", r.extrapolated, 2.0 * PI2, r.values[2]),
    );
    for a in [1.0f64, 1.05, 1.2] {
        let bar = lambda_boxbar(2.0, a, 64, &o, None).unwrap().lambda;
        let exact = PI2 * (4.0 / (a * a) + 1.0);
        c.check(&format!("boxbar(2; R_{a})"), rel(bar, exact) < 1e-3, format!("{bar:.6} vs {exact:.6}"));
        let minus = lambda_boxminus(2.0, a, 64, &o, None).unwrap().lambda;
        let exact = PI2 * (1.0 / (a * a) + 4.0);
        c.check(&format!("boxminus(2; R_{a})"), rel(minus, exact) < 1e-3, format!("{minus:.6} vs {exact:.6}"));
    }
    let (ub, _) = lambda2_upper(2.0, 1.0, 64, &PartitionFamily::ALL, &o).unwrap();
    c.check("lambda2 upper bound on R_1", rel(ub, 5.0 * PI2) < 1e-3, format!("{ub:.6} vs {:.6}", 5.0 * PI2));
    c.finish();
}

#[test]
fn criterion_3_derivative_formulas() {
    let mut c = Criterion::new("criterion 3: derivative formulas");
    let n = 128;
    for a in [1.0, 1.2] {
        let m = build_rectangle_mesh(a, 1.0, n).unwrap();
        for p in [2.0, 2.5] {
            let res = solve(&m, p, None);
            let formula = dlambda1_dp(&m, &res).unwrap();
            let fd = fd_derivative(|q| Ok(solve(&m, q, Some(&res.field)).lambda), p, 1e-3).unwrap();
            c.check(
                &format!("d/dp lambda_1 at p={p}, a={a}"),
                rel(formula, fd) < 1e-2,
                format!("formula {formula:.6}, central difference {fd:.6}"),
            );
        }
    }
    let m = build_rectangle_mesh(1.0, 1.0, n).unwrap();
    let res = solve(&m, 2.0, None);
    let da = dlambda1_da(&m, &res).unwrap();
    c.check("d/da lambda_1(2; R_1)", rel(da, -2.0 * PI2) < 3e-2, format!("{da:.6} vs {:.6}", -2.0 * PI2));
    let w = branch_width_derivatives(2.0, 1.0, n, &SolveOptions::default()).unwrap();
    c.check("d/da boxbar at a=1", rel(w.boxbar, -8.0 * PI2) < 3e-2, format!("{:.6} vs {:.6}", w.boxbar, -8.0 * PI2));
    c.check(
        "d/da boxminus at a=1",
        rel(w.boxminus, -2.0 * PI2) < 3e-2,
        format!("{:.6} vs {:.6}", w.boxminus, -2.0 * PI2),
    );
    c.check("d/da f(2, a) at a=1", rel(w.gap, 6.0 * PI2) < 3e-2, format!("{:.6} vs {:.6}", w.gap, 6.0 * PI2));
    c.finish();
}

#[test]
fn criterion_4_branch_orderings() {
    let mut c = Criterion::new("criterion 4: branch orderings");
    let o = SolveOptions::default();
    let n = 128;
    for (p, tri_below) in [(2.2, true), (1.8, false)] {
        let tri = lambda_boxbslash(p, n, &o, None).unwrap().lambda;
        let bar = lambda_boxbar(p, 1.0, n, &o, None).unwrap().lambda;
        let ok = if tri_below { tri < bar } else { tri > bar };
        c.check(&format!("boxbslash vs boxbar at p={p}"), ok, format!("{tri:.8} vs {bar:.8}"));
    }
    for p in [1.8, 2.0, 2.2] {
        let minus = lambda_boxminus(p, 1.05, n, &o, None).unwrap().lambda;
        let bar = lambda_boxbar(p, 1.05, n, &o, None).unwrap().lambda;
        c.check(&format!("f({p}, 1.05) > 0"), minus > bar, format!("{:.6}", minus - bar));
        let minus = lambda_boxminus(p, 1.0, n, &o, None).unwrap().lambda;
        let bar = lambda_boxbar(p, 1.0, n, &o, None).unwrap().lambda;
        c.check(&format!("f({p}, 1) = 0"), rel(minus, bar) < 1e-10, format!("relative {:.2e}", rel(minus, bar)));
    }
    c.finish();
}

#[test]
fn criterion_5_crossing_detection() {
    let mut c = Criterion::new("criterion 5: crossing of boxbar and boxbslash");
    let o = SolveOptions::default();
    let r = detect_crossing(BranchLabel::BoxBar, BranchLabel::BoxBslash, 1.0, (1.8, 2.2), 1e-3, 128, &o).unwrap();
    c.check(
        "p_star",
        (r.p_star - 2.0).abs() <= 0.05,
        format!("{:.6} in [{:.6}, {:.6}], residual {:.2e}", r.p_star, r.bracket.0, r.bracket.1, r.residual()),
    );
    c.finish();
}

#[test]
fn criterion_6_scaling_and_sandwich() {
    let mut c = Criterion::new("criterion 6: scaling identity and domain monotonicity");
    let m = build_rectangle_mesh(1.0, 1.0, 32).unwrap();
    for p in [1.5, 2.0, 3.0] {
        let base = solve(&m, p, None);
        for s in [0.5, 2.0] {
            let scaled = scale_mesh(&m, s).unwrap();
            let l = solve(&scaled, p, None).lambda;
            let expect = s.powf(-p) * base.lambda;
            c.check(&format!("p={p}, s={s}"), rel(l, expect) < 1e-10, format!("relative {:.2e}", rel(l, expect)));
        }
    }
    let (a, b) = (1.0f64, 1.2f64);
    let ma = build_rectangle_mesh(a, 1.0, 64).unwrap();
    let mb = build_rectangle_mesh(b, 1.0, 64).unwrap();
    let tol = SolveOptions::default().tol_lambda.sqrt();
    for p in [1.5, 2.0, 3.0] {
        let la = solve(&ma, p, None).lambda;
        let lb = solve(&mb, p, None).lambda;
        let upper = (b / a).powf(p) * lb;
        let ok = upper >= la * (1.0 - tol) && la >= lb * (1.0 - tol);
        c.check(&format!("sandwich at p={p}"), ok, format!("{upper:.6} >= {la:.6} >= {lb:.6}"));
    }
    c.finish();
}

#[test]
fn criterion_7_asymptotics() {
    let mut c = Criterion::new("criterion 7: large-p asymptotics");
    let scan =
        infinity_limit_scan(&DomainSpec::rectangle(0.5, 1.0), &[10.0, 20.0, 40.0], 128, &SolveOptions::default())
            .unwrap();
    for s in &scan {
        c.note(format!("p={} lambda^(1/p)={:.6} converged={}", s.p, s.root, s.converged));
    }
    let last = scan.last().unwrap();
    c.check(
        "lambda_1^(1/p)(40; R_1/2) within 5% of 4",
        rel(last.root, 4.0) <= 0.05,
        format!("{:.6}, relative {:.3}", last.root, rel(last.root, 4.0)),
    );
    let r = three_disk_packing().radius;
    let cf = packing_bound_closed_form(40.0, r).unwrap();
    c.check(
        "packing bound closed form at p=40 within 1% of 3.9318",
        rel(cf, 3.9318) <= 0.01,
        format!("{cf:.6}, relative {:.3}", rel(cf, 3.9318)),
    );
    let pb = packing_bound(4.0, 256).unwrap();
    c.check(
        "closed form vs masked mesh at p=4",
        rel(pb.numeric, pb.closed_form) <= 0.02,
        format!("{:.6} vs {:.6}", pb.numeric, pb.closed_form),
    );
    c.finish();
}

#[test]
fn criterion_8_property_suite() {
    let mut c = Criterion::new("criterion 8: property suite");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let m = build_rectangle_mesh(1.0, 1.0, 8).unwrap();
    let random_field = |rng: &mut ChaCha8Rng| {
        let mut f = Field::from_values((0..m.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        f.enforce_dirichlet(&m);
        f
    };

    let mut worst_h: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    for p in [1.5, 2.0, 2.5, 3.0] {
        let o = EnergyOptions::new(p);
        for _ in 0..10 {
            let u = random_field(&mut rng);
            let t = rng.gen_range(0.1..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let tu = u.scaled(t);
            let e = dirichlet_energy(&m, &u, o).unwrap();
            let n = p_mass(&m, &u, p).unwrap();
            worst_h = worst_h.max(rel(dirichlet_energy(&m, &tu, o).unwrap(), t.abs().powf(p) * e));
            worst_h = worst_h.max(rel(p_mass(&m, &tu, p).unwrap(), t.abs().powf(p) * n));
            worst_r = worst_r.max(rel(rayleigh(&m, &tu, o).unwrap(), rayleigh(&m, &u, o).unwrap()));
        }
    }
    c.check("energy and mass homogeneity", worst_h < 1e-12, format!("worst relative {worst_h:.2e}"));
    c.check("Rayleigh scale invariance", worst_r < 1e-12, format!("worst relative {worst_r:.2e}"));

    let mut worst_g: f64 = 0.0;
    for k in 0..100 {
        let p = [1.5, 2.0, 2.5, 3.0][k % 4];
        let o = EnergyOptions::new(p);
        let u = random_field(&mut rng);
        let d = random_field(&mut rng);
        let g = rayleigh_gradient(&m, &u, o).unwrap();
        let analytic = g.dot(&d);
        let fd = central_difference(&m, &u, &d, p, 1e-6);
        worst_g = worst_g.max((analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-300));
    }
    c.check("gradient vs central differences on 100 fields", worst_g < 1e-5, format!("worst relative {worst_g:.2e}"));

    let mut monotone = true;
    let mut signs = true;
    let mut solves = 0;
    for (mesh, p) in [
        (build_rectangle_mesh(1.0, 1.0, 16).unwrap(), 1.5),
        (build_rectangle_mesh(1.0, 1.0, 16).unwrap(), 2.0),
        (build_rectangle_mesh(0.5, 1.0, 16).unwrap(), 3.0),
        (build_rectangle_mesh(1.2, 1.0, 16).unwrap(), 6.0),
        (plap::mesh::build_triangle_mesh(16).unwrap(), 2.5),
    ] {
        let r = solve(&mesh, p, None);
        solves += 1;
        monotone &= r.is_monotone();
        signs &= r.converged && r.sign_constant;
    }
    c.check("descent monotonicity", monotone, format!("{solves} logged solves"));
    c.check("sign-constant first eigenfunctions", signs, format!("{solves} converged solves"));

    let pk = three_disk_packing();
    let mesh = pk.masked_mesh(64).unwrap();
    let mut mediant = true;
    for p in [2.0, 4.0] {
        let mom = disk_moments(&mesh, &pk, p).unwrap();
        let single = mom.iter().map(|&(e, n)| e / n).fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..50 {
            let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            mediant &= disk_family_rayleigh(&mom, &coeffs, p).unwrap() <= single * (1.0 + 1e-12);
        }
    }
    c.check("three-disk mediant bound", mediant, "50 random coefficient triples at p = 2, 4".into());
    c.finish();
}
