//! The six commands. Each returns whether its certificate (if any) passed.

use std::fmt::Write as _;

use masym::error::Error;
use masym::fd::{solve_system_fd, Discretization, GridSolution, SystemFdReport};
use masym::geometry::{critical_planes, CriticalPlanes, Domain};
use masym::hypotheses::{check_hypotheses, Hypothesis};
use masym::moving_plane::{
    boundary_checks, build_frame, certify_monotonicity, certify_radial_increasing, certify_symmetry,
    default_quad_order, lambda_sweep, linearize, verify_elliptic_inequality, MovingPlaneFrame, SolutionView,
};
use masym::radial::{
    profiles_csv, solve_coupled_radial, solve_scalar_radial, uniqueness_probe, CoupledOutcome, ExprSource,
    UniquenessReport,
};
use masym::rhs::RhsSystem;
use masym::svg;
use serde::Serialize;

use crate::config::{Command, Loaded, SolutionSource};
use crate::output::{with_provenance, OutputDir};
use crate::CliError;

pub struct Context<'a> {
    pub loaded: &'a Loaded,
    pub out: &'a mut OutputDir,
    pub seed: u64,
    pub quiet: bool,
}

impl Context<'_> {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn svg(&mut self, name: &str, body: String, what: &str) -> Result<(), CliError> {
        let note = format!(
            "masym {} seed={} config-sha256={} data={what}",
            self.loaded.config.command.name(),
            self.seed,
            crate::output::sha256_hex(self.loaded.text.as_bytes())
        );
        self.out.write(name, with_provenance(body, &note).as_bytes())?;
        Ok(())
    }

    fn system(&self) -> Result<Option<RhsSystem>, CliError> {
        match &self.loaded.config.system {
            Some(spec) => Ok(Some(RhsSystem::from_spec(spec.clone())?)),
            None => Ok(None),
        }
    }

    fn boundary_values(&self, m: usize) -> Vec<f64> {
        self.loaded.config.boundary_values.clone().unwrap_or_else(|| vec![0.0; m])
    }
}

pub fn dispatch(ctx: &mut Context) -> Result<bool, CliError> {
    match ctx.loaded.config.command {
        Command::SolveRadial => solve_radial(ctx),
        Command::SolveGrid => solve_grid(ctx),
        Command::Certify => certify(ctx),
        Command::Hypotheses => hypotheses(ctx),
        Command::SweepTrichotomy => sweep_trichotomy(ctx),
        Command::Linearize => linearize_cmd(ctx),
    }
}

fn solve_radial(ctx: &mut Context) -> Result<bool, CliError> {
    let cfg = &ctx.loaded.config;
    let prob = cfg.radial.clone().expect("validated");
    let opts = cfg.radial_options;
    if let Some([alpha, beta]) = prob.power {
        let outcome = solve_coupled_radial(alpha, beta, prob.n, prob.radius, &opts, None)?;
        match &outcome {
            CoupledOutcome::Solution(sol) => {
                let [a, b] = &sol.profiles;
                ctx.out.write("profile.csv", profiles_csv(&[a, b]).as_bytes())?;
                #[derive(Serialize)]
                struct Summary<'a> {
                    outcome: &'static str,
                    alpha: f64,
                    beta: f64,
                    n: usize,
                    center_values: [f64; 2],
                    iterations: usize,
                    change: f64,
                    residuals: [f64; 2],
                    scale_corrected: bool,
                    increasing: [bool; 2],
                    warnings: &'a [String],
                }
                let summary = Summary {
                    outcome: "solution",
                    alpha,
                    beta,
                    n: prob.n,
                    center_values: [a.u[0], b.u[0]],
                    iterations: sol.iterations,
                    change: sol.change,
                    residuals: sol.residuals,
                    scale_corrected: sol.scale_corrected,
                    increasing: [certify_radial_increasing(a).pass, certify_radial_increasing(b).pass],
                    warnings: &sol.warnings,
                };
                ctx.out.write_json("summary.json", &summary)?;
                ctx.say(format!("solution: u1(0) = {}, u2(0) = {}", a.u[0], b.u[0]));
            }
            CoupledOutcome::NoSolution(rep) => {
                ctx.out.write_json("summary.json", &outcome)?;
                ctx.say(format!("no solution: drift {:?} after {} iterations", rep.drift, rep.iterations));
            }
        }
        return Ok(true);
    }
    let expr = prob.source.as_ref().expect("validated").resolve(&prob.params)?;
    let sol = solve_scalar_radial(&ExprSource(expr), prob.n, prob.radius, prob.boundary_value, &opts)?;
    ctx.out.write("profile.csv", profiles_csv(&[&sol.profile]).as_bytes())?;
    #[derive(Serialize)]
    struct Summary {
        outcome: &'static str,
        n: usize,
        center_value: f64,
        iterations: usize,
        change: f64,
        residual: f64,
        increasing: bool,
    }
    ctx.out.write_json(
        "summary.json",
        &Summary {
            outcome: "solution",
            n: prob.n,
            center_value: sol.profile.u[0],
            iterations: sol.iterations,
            change: sol.change,
            residual: sol.residual,
            increasing: certify_radial_increasing(&sol.profile).pass,
        },
    )?;
    ctx.say(format!("solution: u(0) = {}", sol.profile.u[0]));
    Ok(true)
}

/// Solves, loads or samples the field the grid commands work on.
fn obtain_solution(ctx: &mut Context, domain: &Domain) -> Result<(GridSolution, Option<SystemFdReport>), CliError> {
    let cfg = &ctx.loaded.config;
    match cfg.solution.clone().unwrap_or(SolutionSource::Solve) {
        SolutionSource::Solve => {
            let sys = ctx.system()?.expect("validated");
            let bv = ctx.boundary_values(sys.m());
            let sol = solve_system_fd(domain, &sys, &bv, &cfg.fd)?;
            Ok((sol.solution, Some(sol.report)))
        }
        SolutionSource::File { path } => {
            let path = ctx.loaded.resolve(&path);
            let bytes = std::fs::read(&path)?;
            let sol = if path.extension().is_some_and(|e| e == "bin") {
                GridSolution::from_binary(&bytes)?
            } else {
                let text = String::from_utf8(bytes)
                    .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
                let m = text.lines().find(|l| l.starts_with("x,")).map_or(1, |l| l.split(',').count() - 2);
                GridSolution::from_csv(&text, &ctx.boundary_values(m))?
            };
            Ok((sol, None))
        }
        SolutionSource::Expr { fields } => {
            let disc = Discretization::new(domain, cfg.fd.h, cfg.fd.stencil_width)?;
            let bv = ctx.boundary_values(fields.len());
            let mut out = Vec::new();
            for (spec, &c) in fields.iter().zip(&bv) {
                let e = spec.resolve(&Default::default())?;
                let mut u = vec![c; disc.grid.len()];
                for &k in &disc.nodes {
                    u[k] = e.eval(&disc.grid.coords(k), &[], &[])?;
                }
                out.push(u);
            }
            Ok((GridSolution::from_fields(&disc, out, bv), None))
        }
    }
}

fn field_values(sol: &GridSolution, i: usize) -> Vec<Option<f64>> {
    (0..sol.grid.len()).map(|k| sol.interior[k].then(|| sol.fields[i][k])).collect()
}

fn solve_grid(ctx: &mut Context) -> Result<bool, CliError> {
    let domain = ctx.loaded.config.domain.clone().expect("validated");
    let sys = ctx.system()?.expect("validated");
    let bv = ctx.boundary_values(sys.m());
    let sol = solve_system_fd(&domain, &sys, &bv, &ctx.loaded.config.fd)?;
    ctx.out.write("solution.csv", sol.solution.to_csv().as_bytes())?;
    ctx.out.write("solution.bin", &sol.solution.to_binary())?;
    ctx.out.write_json("report.json", &sol.report)?;
    for i in 0..sol.solution.m() {
        let body = svg::heatmap(&sol.solution.grid, &field_values(&sol.solution, i), &format!("u{}", i + 1));
        ctx.svg(&format!("u{}.svg", i + 1), body, &format!("solution.csv column u{}", i + 1))?;
    }
    let mins: Vec<String> = sol
        .solution
        .fields
        .iter()
        .map(|f| format!("{:.6e}", f.iter().cloned().fold(f64::INFINITY, f64::min)))
        .collect();
    ctx.say(format!(
        "solved in {} sweeps, residuals {:?}, min values [{}]",
        sol.report.sweeps,
        sol.report.residuals,
        mins.join(", ")
    ));
    Ok(true)
}

fn planes_for(domain: &Domain, nu: &[f64], h: f64) -> Result<CriticalPlanes, Error> {
    critical_planes(domain, nu, h / 4.0)
}

/// `U_λ` of the first component over `Σ_λ`.
fn frame_map(view: &SolutionView, frame: &MovingPlaneFrame, title: &str) -> String {
    let mut vals = vec![None; view.disc.grid.len()];
    for (s, &k) in frame.sigma.iter().enumerate() {
        if frame.exits.binary_search(&s).is_err() {
            vals[k] = Some(frame.big_u[0][s]);
        }
    }
    svg::heatmap(&view.disc.grid, &vals, title)
}

#[derive(Serialize)]
struct Certificate<'a> {
    pass: bool,
    failures: Vec<&'static str>,
    solver: Option<&'a SystemFdReport>,
    report: &'a masym::moving_plane::MovingPlaneReport,
}

fn certify(ctx: &mut Context) -> Result<bool, CliError> {
    let cfg = ctx.loaded.config.clone();
    let domain = cfg.domain.clone().expect("validated");
    let (sol, solver) = obtain_solution(ctx, &domain)?;
    let sys = ctx.system()?;
    let view = SolutionView::with_mode(&sol, &domain, cfg.hessian_mode)?;
    let nu = cfg.direction.unwrap_or([1.0, 0.0]);
    let h = view.h();
    let planes = planes_for(&domain, &nu, h)?;
    let mut report = lambda_sweep(&view, &nu, &planes, sys.as_ref(), &cfg.sweep)?;
    report.monotonicity = Some(certify_monotonicity(&view, &nu, &planes, None)?);
    let tol = cfg.sweep.tolerance_factor * h * h * view.hessian_scale().max(1.0);
    report.symmetry = Some(certify_symmetry(&view, &nu, planes.cap_lambda0, tol)?);
    report.boundary = Some(boundary_checks(&view)?);

    let mut failures = Vec::new();
    if !report.all_pass {
        failures.push("U_lambda sign");
    }
    if report.inequality_violations > 0 {
        failures.push("elliptic inequality");
    }
    if !report.monotonicity.as_ref().unwrap().pass {
        failures.push("monotonicity");
    }
    let sym = report.symmetry.as_ref().unwrap();
    if sym.applicable && !sym.pass {
        failures.push("symmetry");
    }
    let b = report.boundary.as_ref().unwrap();
    if !b.hopf_pass {
        failures.push("hopf");
    }
    if !b.laplacian_pass {
        failures.push("laplacian");
    }
    if b.corner.as_ref().is_some_and(|c| !c.pass) {
        failures.push("corner");
    }
    if !sol.convex.iter().all(|c| *c) {
        failures.push("convexity");
    }
    let pass = failures.is_empty();
    if solver.is_some() {
        ctx.out.write("solution.csv", sol.to_csv().as_bytes())?;
    }
    let cert = Certificate {
        pass,
        failures: failures.clone(),
        solver: solver.as_ref(),
        report: &report,
    };
    ctx.out.write_json("certificate.json", &cert)?;
    // the frame with the largest positive U_λ, else the middle one
    let worst = report
        .entries
        .iter()
        .filter(|e| e.worst.as_ref().is_some_and(|w| w.value > 0.0))
        .max_by(|a, b| {
            let (x, y) = (a.worst.as_ref().unwrap().value, b.worst.as_ref().unwrap().value);
            x.total_cmp(&y)
        })
        .or(report.entries.get(report.entries.len() / 2))
        .map(|e| e.lambda);
    if let Some(lambda) = worst {
        let frame = build_frame(&view, &nu, lambda)?;
        let body = frame_map(&view, &frame, &format!("U_lambda, lambda = {lambda}"));
        ctx.svg("u_lambda.svg", body, &format!("certificate.json entry lambda={lambda}"))?;
    }
    ctx.say(format!(
        "certificate {}: {} planes, inequality violations {}{}",
        if pass { "PASSED" } else { "FAILED" },
        report.entries.len(),
        report.inequality_violations,
        if pass { String::new() } else { format!(", failed: {}", failures.join(", ")) }
    ));
    Ok(pass)
}

fn hypotheses(ctx: &mut Context) -> Result<bool, CliError> {
    let cfg = &ctx.loaded.config;
    let sys = ctx.system()?.expect("validated");
    let spec = cfg.hypotheses.clone().expect("validated");
    let which = spec.which.clone().unwrap_or_else(|| Hypothesis::ALL.to_vec());
    let rep = check_hypotheses(&sys, &spec.sample_box, spec.samples, &which, ctx.seed)?;
    ctx.out.write_json("hypotheses.json", &rep)?;
    let failed: Vec<String> = rep
        .results
        .iter()
        .filter(|r| r.status == masym::hypotheses::Status::Fail)
        .map(|r| format!("{:?}", r.hypothesis))
        .collect();
    ctx.say(if failed.is_empty() {
        format!("all {} checked hypotheses hold on {} samples", rep.results.len(), rep.samples)
    } else {
        format!("violated: {}", failed.join(", "))
    });
    Ok(failed.is_empty())
}

#[derive(Serialize)]
struct TrichotomyRow {
    alpha: f64,
    beta: f64,
    alpha_beta: f64,
    kappa: f64,
    /// `solution`, `no_solution` or `diverged`.
    outcome: String,
    expected: &'static str,
    iterations: Option<usize>,
    center_values: Option<[f64; 2]>,
    detail: Option<String>,
    uniqueness: Option<UniquenessReport>,
}

fn sweep_trichotomy(ctx: &mut Context) -> Result<bool, CliError> {
    let cfg = &ctx.loaded.config;
    let spec = cfg.trichotomy.clone().expect("validated");
    let opts = cfg.radial_options;
    let n2 = (spec.n * spec.n) as f64;
    let mut rows = Vec::new();
    for &[alpha, beta] in &spec.pairs {
        let ab = alpha * beta;
        let expected = if (ab - n2).abs() <= 1e-12 * n2 {
            "no_solution"
        } else if ab < n2 {
            "unique_solution"
        } else {
            "solution"
        };
        let (outcome, iterations, center, detail) =
            match solve_coupled_radial(alpha, beta, spec.n, spec.radius, &opts, None) {
                Ok(CoupledOutcome::Solution(s)) => (
                    "solution".to_string(),
                    Some(s.iterations),
                    Some([s.profiles[0].u[0], s.profiles[1].u[0]]),
                    (!s.warnings.is_empty()).then(|| s.warnings.join("; ")),
                ),
                Ok(CoupledOutcome::NoSolution(r)) => (
                    "no_solution".to_string(),
                    Some(r.iterations),
                    None,
                    Some(format!("drift {:?}", r.drift)),
                ),
                Err(Error::Divergence(d)) => ("diverged".to_string(), Some(d.iterations), None, Some(d.reason)),
                Err(e) => return Err(e.into()),
            };
        let uniqueness = if spec.uniqueness_starts > 0 && outcome == "solution" {
            Some(uniqueness_probe(alpha, beta, spec.n, spec.radius, spec.uniqueness_starts, &opts)?)
        } else {
            None
        };
        rows.push(TrichotomyRow {
            alpha,
            beta,
            alpha_beta: ab,
            kappa: ab / n2,
            outcome,
            expected,
            iterations,
            center_values: center,
            detail,
            uniqueness,
        });
    }
    let mut csv = String::from("alpha,beta,alpha_beta,outcome,expected,iterations,u1_0,u2_0\n");
    for r in &rows {
        let c = r.center_values.map_or((String::new(), String::new()), |c| (c[0].to_string(), c[1].to_string()));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.alpha,
            r.beta,
            r.alpha_beta,
            r.outcome,
            r.expected,
            r.iterations.map_or(String::new(), |i| i.to_string()),
            c.0,
            c.1
        );
    }
    ctx.out.write("trichotomy.csv", csv.as_bytes())?;
    ctx.out.write_json("trichotomy.json", &rows)?;
    let table: Vec<String> = rows.iter().map(|r| format!("αβ={}: {}", r.alpha_beta, r.outcome)).collect();
    ctx.say(table.join(", "));
    Ok(true)
}

fn linearize_cmd(ctx: &mut Context) -> Result<bool, CliError> {
    let cfg = ctx.loaded.config.clone();
    let domain = cfg.domain.clone().expect("validated");
    let sys = ctx.system()?.expect("validated");
    let (sol, _) = obtain_solution(ctx, &domain)?;
    if sol.m() != sys.m() {
        return Err(CliError::Config(format!(
            "solution has {} components, the system {}",
            sol.m(),
            sys.m()
        )));
    }
    let view = SolutionView::with_mode(&sol, &domain, cfg.hessian_mode)?;
    let nu = cfg.direction.unwrap_or([1.0, 0.0]);
    let planes = planes_for(&domain, &nu, view.h())?;
    let lambda = cfg.lambda.unwrap_or(0.5 * (planes.lambda0 + planes.cap_lambda0));
    let frame = build_frame(&view, &nu, lambda)?;
    let quad = cfg.sweep.quad_order.unwrap_or(default_quad_order(2));
    let lin = linearize(&view, &frame, &sys, quad)?;
    let ineq = verify_elliptic_inequality(&lin, &frame, &view, cfg.sweep.inequality_factor);

    let m = sys.m();
    let mut csv = String::from("x,y");
    for i in 1..=m {
        let _ = write!(csv, ",U{i},a11_{i},a12_{i},a22_{i},b1_{i},b2_{i},c_{i}");
        for j in 1..=m {
            let _ = write!(csv, ",d{i}{j}");
        }
        let _ = write!(csv, ",flagged_{i}");
    }
    csv.push('\n');
    for (q, &k) in lin.nodes.iter().enumerate() {
        let x = view.disc.grid.coords(k);
        let _ = write!(csv, "{},{}", x[0], x[1]);
        for (i, c) in lin.components.iter().enumerate() {
            let a = &c.a[q];
            let _ = write!(
                csv,
                ",{},{},{},{},{},{},{}",
                frame.big_u[i][lin.sigma_pos[q]],
                a.get(0, 0),
                a.get(0, 1),
                a.get(1, 1),
                c.b[q][0],
                c.b[q][1],
                c.c
            );
            for d in &c.d[q] {
                let _ = write!(csv, ",{d}");
            }
            let _ = write!(csv, ",{}", c.flagged[q] as u8);
        }
        csv.push('\n');
    }
    ctx.out.write("linearization.csv", csv.as_bytes())?;
    #[derive(Serialize)]
    struct Summary<'a> {
        direction: [f64; 2],
        lambda: f64,
        planes: &'a CriticalPlanes,
        quad_order: usize,
        nodes: usize,
        flagged: usize,
        max_mean_value_residual: f64,
        positive_off_diagonal: usize,
        inequality: &'a masym::moving_plane::InequalityReport,
    }
    ctx.out.write_json(
        "linearization.json",
        &Summary {
            direction: nu,
            lambda,
            planes: &planes,
            quad_order: quad,
            nodes: lin.nodes.len(),
            flagged: lin.flagged_count(),
            max_mean_value_residual: lin.max_mean_value_residual(),
            positive_off_diagonal: lin.positive_off_diagonal(),
            inequality: &ineq,
        },
    )?;
    let body = frame_map(&view, &frame, &format!("U_lambda, lambda = {lambda}"));
    ctx.svg("u_lambda.svg", body, "linearization.csv column U1")?;
    let flagged: Vec<usize> = ineq.witnesses.iter().map(|w| w.node).collect();
    let body = svg::violation_map(&view.disc.grid, &view.disc.interior, &flagged, "inequality witnesses");
    ctx.svg("violations.svg", body, "linearization.json inequality.witnesses")?;
    ctx.say(format!(
        "linearized {} nodes at lambda = {lambda}: {} flagged, {} inequality violations",
        lin.nodes.len(),
        lin.flagged_count(),
        ineq.violations
    ));
    Ok(true)
}
