use std::collections::BTreeMap;

use masym::expr::{parse_plain, ExprSpec};
use masym::fd::{solve_scalar_fd, Discretization, ExprField, FdParams, GridSolution};
use masym::geometry::{critical_planes, norm, reflect_point, Domain};
use masym::linalg::Mat;
use masym::hypotheses::{check_hypotheses, Hypothesis, SampleBox, Status};
use masym::moving_plane::{reflected_derivatives, HessianMode, SolutionView};
use masym::radial::{integrate_source, solve_coupled_radial, uniform_grid, PowerSystem, RadialOptions};
use masym::rhs::{ComponentSpec, Part, RhsSpec, RhsSystem, SplitSpec};
use proptest::prelude::*;

fn unit(theta: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin()]
}

fn unit3(theta: f64, phi: f64) -> Vec<f64> {
    vec![phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()]
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn spec(components: Vec<ComponentSpec>, dim: usize) -> RhsSystem {
    RhsSystem::from_spec(RhsSpec {
        dim,
        components,
        params: BTreeMap::new(),
    })
    .unwrap()
}

fn plain(f: String) -> ComponentSpec {
    ComponentSpec {
        f: ExprSpec::Infix(f),
        split: None,
        lipschitz_z: None,
        lipschitz_p: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reflection_is_an_isometric_involution(
        x in prop::collection::vec(-5.0..5.0f64, 3),
        y in prop::collection::vec(-5.0..5.0f64, 3),
        theta in 0.0..std::f64::consts::TAU,
        phi in 0.0..std::f64::consts::PI,
        lambda in -3.0..3.0f64,
    ) {
        let nu = unit3(theta, phi);
        let xr = reflect_point(&x, &nu, lambda).unwrap();
        let back = reflect_point(&xr, &nu, lambda).unwrap();
        prop_assert!(dist(&back, &x) <= 1e-12);
        let yr = reflect_point(&y, &nu, lambda).unwrap();
        prop_assert!((dist(&xr, &yr) - dist(&x, &y)).abs() <= 1e-12);
        // the plane is fixed pointwise
        let on: Vec<f64> = x.iter().zip(&nu).map(|(a, n)| a - (masym::geometry::dot(&x, &nu) - lambda) * n).collect();
        prop_assert!(dist(&reflect_point(&on, &nu, lambda).unwrap(), &on) <= 1e-12);
    }

    #[test]
    fn reflected_caps_stay_inside_below_cap_lambda0(
        a in 0.5..2.0f64,
        b in 0.5..2.0f64,
        theta in 0.0..std::f64::consts::TAU,
        frac in 0.05..0.95f64,
    ) {
        let d = Domain::ellipse(vec![0.2, -0.1], vec![a, b]);
        let nu = unit(theta);
        let res = 1e-3;
        let p = critical_planes(&d, &nu, res).unwrap();
        let lambda = p.lambda0 + frac * (p.cap_lambda0 - res - p.lambda0);
        let (lo, hi) = d.bounding_box();
        let k = 40;
        for i in 0..=k {
            for j in 0..=k {
                let x = vec![lo[0] + (hi[0] - lo[0]) * i as f64 / k as f64, lo[1] + (hi[1] - lo[1]) * j as f64 / k as f64];
                if !d.contains(&x) || masym::geometry::dot(&x, &nu) >= lambda {
                    continue;
                }
                let xr = reflect_point(&x, &nu, lambda).unwrap();
                prop_assert!(d.level(&xr) <= 1e-9, "{x:?} -> {xr:?} at λ = {lambda}");
            }
        }
    }

    #[test]
    fn caps_leave_the_domain_past_cap_lambda0(
        a in 0.5..2.0f64,
        b in 0.5..2.0f64,
        theta in 0.0..std::f64::consts::TAU,
        frac in 0.05..1.0f64,
    ) {
        let d = Domain::ellipse(vec![0.0, 0.3], vec![a, b]);
        let nu = unit(theta);
        let res = 1e-3;
        let p = critical_planes(&d, &nu, res).unwrap();
        let far = -d.support_min(&nu.iter().map(|v| -v).collect::<Vec<_>>());
        let mu = p.cap_lambda0 + 2.0 * res + frac * (far - p.cap_lambda0 - 2.0 * res);
        let exits = d
            .boundary_samples(res)
            .iter()
            .filter(|s| masym::geometry::dot(&s.point, &nu) < mu)
            .any(|s| d.level(&reflect_point(&s.point, &nu, mu).unwrap()) > 0.0);
        prop_assert!(exits, "μ = {mu}, Λ₀ = {}", p.cap_lambda0);
    }

    #[test]
    fn power_quotients_are_non_positive(
        alpha in 0.2..4.0f64,
        beta in 0.2..4.0f64,
        z in prop::collection::vec(-2.0..-0.1f64, 2),
        h in -1.0..0.09f64,
        x in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        let sys = RhsSystem::power_coupled(alpha, beta, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = sys.d_ij(i, j, &x, &z, &[0.0, 0.0], h).unwrap();
                prop_assert!(d <= 0.0, "d_{i}{j} = {d} at h = {h}");
            }
        }
    }

    #[test]
    fn declared_split_adds_up(
        c in 0.1..3.0f64,
        k in 0.0..2.0f64,
        x in prop::collection::vec(-1.0..1.0f64, 2),
        z in prop::collection::vec(-2.0..2.0f64, 2),
        p in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let lip = format!("{k} * exp(-z1^2)");
        let mono = format!("{c} + exp(-z1) + x1^2 + p2^2");
        let sys = spec(vec![ComponentSpec {
            f: ExprSpec::Infix(format!("{lip} + {mono}")),
            split: Some(SplitSpec { lipschitz_part: ExprSpec::Infix(lip), monotone_part: ExprSpec::Infix(mono) }),
            lipschitz_z: None,
            lipschitz_p: None,
        }, plain("1".into())], 2);
        let full = sys.eval_part(0, Part::Full, &x, &z, &p).unwrap();
        let sum = sys.eval_part(0, Part::Lipschitz, &x, &z, &p).unwrap() + sys.eval_part(0, Part::Monotone, &x, &z, &p).unwrap();
        prop_assert!((full - sum).abs() <= 1e-12 * full.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn uniform_positivity_implies_positivity(
        c0 in -1.0..1.0f64,
        c1 in -1.0..1.0f64,
        c2 in -1.0..1.0f64,
    ) {
        let sys = spec(vec![plain(format!("{c0} + {c1} * x1^2 + {c2} * exp(z1)"))], 2);
        let bx = SampleBox::uniform(2, 1, [-1.0, 1.0], [-2.0, 0.0], [-1.0, 1.0]);
        let rep = check_hypotheses(&sys, &bx, 300, &[Hypothesis::F1, Hypothesis::F2], 3).unwrap();
        if rep.passes(Hypothesis::F2) {
            prop_assert!(rep.passes(Hypothesis::F1));
        }
        if !rep.passes(Hypothesis::F1) {
            prop_assert!(!rep.passes(Hypothesis::F2));
        }
    }

    #[test]
    fn rotation_invariance_implies_axis_flip_invariance(
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
        c in -1.0..1.0f64,
        which in 0usize..4,
    ) {
        // some sources are invariant under O(2), some only under the flip, some under neither
        let f = match which {
            0 => format!("2 + {a} * (x1^2 + x2^2) + {b} * sqrt(p1^2 + p2^2) - {c} * z1"),
            1 => format!("2 + {a} * x1^2 + {b} * x2 + {c} * p1^2"),
            2 => format!("2 + {a} * x1 + {b} * p1^2"),
            _ => format!("2 + {a} * x1^4 + {b} * x2^2 + {c} * p2"),
        };
        let sys = spec(vec![plain(f)], 2);
        let bx = SampleBox::uniform(2, 1, [-0.7, 0.7], [-1.0, 0.0], [-1.0, 1.0]);
        let rep = check_hypotheses(&sys, &bx, 200, &[Hypothesis::F6, Hypothesis::F7, Hypothesis::F8], 5).unwrap();
        if rep.passes(Hypothesis::F8) {
            prop_assert!(rep.passes(Hypothesis::F7));
        }
        if rep.passes(Hypothesis::F7) {
            // the endpoint y₁ = −x₁ of the reflection inequality holds with equality
            for x1 in [-0.7, -0.3, 0.0] {
                for p1 in [-1.0, -0.2] {
                    let x = [x1, 0.4];
                    let lhs = sys.eval_f(0, &[-x1, 0.4], &[-0.5], &[-p1, 0.3]).unwrap();
                    let rhs = sys.eval_f(0, &x, &[-0.5], &[p1, 0.3]).unwrap();
                    prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn radial_flux_identity(
        a in 0.2..4.0f64,
        b in 0.0..4.0f64,
        n in 2usize..4,
    ) {
        let r = uniform_grid(1.0, 400);
        let g: Vec<f64> = r.iter().map(|s| a + b * s * s).collect();
        let (_, du) = integrate_source(n, &r, &g, 0.0);
        let flux: Vec<f64> = du.iter().map(|d| d.powi(n as i32)).collect();
        let dr = r[1] - r[0];
        let scale = (a + b) * n as f64;
        for k in 1..r.len() - 1 {
            let lhs = (flux[k + 1] - flux[k - 1]) / (2.0 * dr);
            let rhs = n as f64 * r[k].powi(n as i32 - 1) * g[k];
            prop_assert!((lhs - rhs).abs() <= 1e-4 * scale, "k = {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn more_negative_partner_gives_more_negative_image(
        alpha in 0.3..3.0f64,
        beta in 0.3..3.0f64,
        s in 0.1..2.0f64,
        bump in 0.0..1.0f64,
    ) {
        let sys = PowerSystem::new(alpha, beta, 2, 1.0).unwrap();
        let r = uniform_grid(1.0, 200);
        let u1: Vec<f64> = r.iter().map(|x| s * (x * x - 1.0)).collect();
        let u2: Vec<f64> = u1.clone();
        let u2_lower: Vec<f64> = r.iter().zip(&u2).map(|(x, v)| v - bump * (1.0 - x * x)).collect();
        let (t1, _) = sys.pair_map(&r, &u1, &u2);
        let (t1_lower, _) = sys.pair_map(&r, &u1, &u2_lower);
        for k in 0..r.len() {
            prop_assert!(t1_lower[k] <= t1[k] + 1e-14);
        }
    }

    #[test]
    fn critical_pair_carries_the_scaling_family(
        alpha in 0.5..4.0f64,
        t in 0.1..10.0f64,
        s in 0.1..2.0f64,
    ) {
        let n = 2usize;
        let beta = (n * n) as f64 / alpha;
        let sys = PowerSystem::new(alpha, beta, n, 1.0).unwrap();
        let r = uniform_grid(1.0, 200);
        let u1: Vec<f64> = r.iter().map(|x| s * (x * x - 1.0)).collect();
        let u2: Vec<f64> = r.iter().map(|x| (x.powi(4) - 1.0) * s).collect();
        let e = n as f64 / alpha;
        let (a1, a2) = sys.pair_map(&r, &u1, &u2);
        let su1: Vec<f64> = u1.iter().map(|v| t * v).collect();
        let su2: Vec<f64> = u2.iter().map(|v| t.powf(e) * v).collect();
        let (b1, b2) = sys.pair_map(&r, &su1, &su2);
        for k in 0..r.len() {
            prop_assert!((b1[k] - t * a1[k]).abs() <= 1e-9 * (t * a1[k]).abs().max(1e-12));
            prop_assert!((b2[k] - t.powf(e) * a2[k]).abs() <= 1e-9 * (t.powf(e) * a2[k]).abs().max(1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn radial_power_solutions_vanish_on_the_sphere_and_are_negative_inside(
        alpha in 0.3..1.9f64,
        beta in 0.3..1.9f64,
    ) {
        let opts = RadialOptions { grid_size: 256, ..Default::default() };
        let out = solve_coupled_radial(alpha, beta, 2, 1.0, &opts, None).unwrap();
        let sol = out.solution().expect("αβ < 4 has a solution");
        for p in &sol.profiles {
            prop_assert_eq!(*p.u.last().unwrap(), 0.0);
            prop_assert!(p.u[..p.len() - 1].iter().all(|v| *v < 0.0));
        }
    }

    #[test]
    fn discrete_am_gm(
        a in 0.2..3.0f64,
        b in 0.2..3.0f64,
        c in -0.15..0.15f64,
        q in 0.0..1.0f64,
        width in 1usize..4,
    ) {
        let d = Domain::ellipse(vec![0.0, 0.0], vec![1.0, 0.8]);
        let disc = Discretization::new(&d, 1.0 / 16.0, width).unwrap();
        let u: Vec<f64> = (0..disc.grid.len())
            .map(|k| {
                let x = disc.grid.coords(k);
                a * x[0] * x[0] + b * x[1] * x[1] + c * x[0] * x[1] + q * x[0].powi(4) - 3.0
            })
            .collect();
        let bc = 0.0;
        // the field is not Dirichlet-consistent; only full stencils are tested
        for cc in 0..disc.num_interior() {
            if !disc.is_full(cc) {
                continue;
            }
            let ma = disc.ma_at(&u, bc, cc).0;
            prop_assert!(ma.sqrt() <= disc.laplacian(&u, bc, cc) / 2.0 + 1e-9);
        }
    }

    #[test]
    fn interior_lies_below_the_boundary_constant(
        g0 in 0.2..3.0f64,
        g1 in 0.0..2.0f64,
        bc in -2.0..2.0f64,
    ) {
        let d = Domain::ellipse(vec![0.1, 0.0], vec![1.0, 0.7]);
        let src = ExprField(parse_plain(&format!("{g0} + {g1} * x1^2")).unwrap());
        let sol = solve_scalar_fd(&d, &src, bc, &FdParams::with_h(1.0 / 16.0)).unwrap();
        let s = &sol.solution;
        prop_assert!(s.interior_nodes().all(|k| s.fields[0][k] < bc));
    }
}

#[test]
fn axis_flip_invariance_alone_does_not_give_the_reflection_inequality() {
    // even in x₁ but increasing in |x₁|: the inequality fails at y₁ = 0
    let sys = spec(vec![plain("1 + x1^2".into())], 2);
    let bx = SampleBox::uniform(2, 1, [-1.0, 1.0], [-1.0, 0.0], [-1.0, 1.0]);
    let rep = check_hypotheses(&sys, &bx, 500, &[Hypothesis::F6, Hypothesis::F7], 1).unwrap();
    assert!(rep.passes(Hypothesis::F7));
    let f6 = rep.get(Hypothesis::F6).unwrap();
    assert_eq!(f6.status, Status::Fail);
    assert!(f6.witness.as_ref().unwrap().recheck(&sys).unwrap());
}

#[test]
fn quarter_turn_equivariance_on_the_disk() {
    let d = Domain::unit_disk();
    for src in ["1 + x1^2 + x2^2", "2 + 0.5 * sqrt(p1^2 + p2^2) - 0.3 * z1"] {
        let g = ExprField(parse_plain(src).unwrap());
        let sol = solve_scalar_fd(&d, &g, 0.0, &FdParams::with_h(1.0 / 32.0)).unwrap();
        let s = &sol.solution;
        let mut worst: f64 = 0.0;
        for k in s.interior_nodes() {
            let r = s.grid.rotate90(k).expect("disk grid is closed under quarter turns");
            assert!(s.interior[r]);
            worst = worst.max((s.fields[0][k] - s.fields[0][r]).abs());
        }
        assert!(worst <= 1e-8, "{src}: {worst:e}");
    }
}

fn sample(d: &Domain, h: f64, f: impl Fn([f64; 2]) -> f64) -> GridSolution {
    let disc = Discretization::new(d, h, 2).unwrap();
    let u = (0..disc.grid.len())
        .map(|k| if disc.interior[k] { f(disc.grid.coords(k)) } else { 0.0 })
        .collect();
    GridSolution::from_fields(&disc, vec![u], vec![0.0])
}

/// `u = x² + y² + 0.3x³ + 0.2x²y`: convex near the plane, not symmetric.
fn cubic(x: [f64; 2]) -> f64 {
    x[0] * x[0] + x[1] * x[1] + 0.3 * x[0].powi(3) + 0.2 * x[0] * x[0] * x[1] - 1.0
}

fn cubic_jet(x: [f64; 2]) -> ([f64; 2], [f64; 3]) {
    (
        [2.0 * x[0] + 0.9 * x[0] * x[0] + 0.4 * x[0] * x[1], 2.0 * x[1] + 0.2 * x[0] * x[0]],
        [2.0 + 1.8 * x[0] + 0.4 * x[1], 0.4 * x[0], 2.0],
    )
}

#[test]
fn on_plane_gradient_and_hessian_of_the_difference() {
    let d = Domain::unit_disk();
    let mut errs = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let sol = sample(&d, h, cubic);
        let view = SolutionView::new(&sol, &d).unwrap();
        let lambda = -0.25;
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for &k in &view.disc.nodes {
            let x = view.disc.grid.coords(k);
            if (x[0] - lambda).abs() > 1e-12 || x[0] * x[0] + x[1] * x[1] > 0.5 {
                continue;
            }
            let (g, hs) = reflected_derivatives(&view, 0, &[1.0, 0.0], lambda, k).unwrap().unwrap();
            let (g0, h0) = cubic_jet(x);
            // ∇U = (−2∂₁u, 0) and the tangential second derivative of U vanishes
            worst = worst.max((g[0] - g0[0] + 2.0 * g0[0]).abs());
            worst = worst.max((g[1] - g0[1]).abs());
            worst = worst.max((hs[2] - h0[2]).abs());
            count += 1;
        }
        assert!(count > 10);
        errs.push(worst);
    }
    assert!(errs[1] <= 2e-2, "{errs:?}");
    assert!(errs[1] < 0.6 * errs[0] || errs[1] < 1e-10, "{errs:?}");
}

#[test]
fn reflected_hessian_determinant_matches_the_mirror_point() {
    let d = Domain::unit_disk();
    let nu = unit(0.3);
    let lambda = -0.2;
    let mut errs = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let sol = sample(&d, h, cubic);
        let view = SolutionView::with_mode(&sol, &d, HessianMode::Centered).unwrap();
        let mut worst: f64 = 0.0;
        for &k in &view.disc.nodes {
            let x = view.disc.grid.coords(k);
            let xr = reflect_point(&x, &nu, lambda).unwrap();
            if norm(&x) > 0.6 || norm(&xr) > 0.6 {
                continue;
            }
            // D²u_λ(x) = R D²u(x_λ) R with R the reflection matrix
            let hm = view.hessian_at(0, [xr[0], xr[1]]).unwrap();
            let r = Mat::from_rows(&[
                vec![1.0 - 2.0 * nu[0] * nu[0], -2.0 * nu[0] * nu[1]],
                vec![-2.0 * nu[0] * nu[1], 1.0 - 2.0 * nu[1] * nu[1]],
            ]);
            let det_reflected = r.mul(&hm).mul(&r).det();
            let (_, h0) = cubic_jet([xr[0], xr[1]]);
            worst = worst.max((det_reflected - (h0[0] * h0[2] - h0[1] * h0[1])).abs());
        }
        errs.push(worst);
    }
    // centred differences and bilinear interpolation are exact on this cubic's Hessian
    assert!(errs.iter().all(|e| *e <= 1e-9), "{errs:?}");
}
