//! Subcommand implementations. Each command validates its inputs, runs the
//! solver library and writes deterministic artifacts (CSV bodies are pure
//! functions of the configuration, no timestamps).

use crate::config::{RunConfig, SweepPlan};
use crate::error::CliError;
use crate::fmt::fmt_sig;
use crate::vtk::write_vtk;
use fracell::eigen::{min_eigen, DEFAULT_EIGEN_MAX_ITER, DEFAULT_EIGEN_TOL};
use fracell::fem::{assemble, l2_project, m_norm};
use fracell::mesh::{mesh_stats, mesh_to_text, Mesh};
use fracell::oracle::{compare, dense_generalized_eig, fractional_apply, PowerSign};
use fracell::sparse::dot;
use fracell::stepper::{run_assembled, SolveResult};
use std::fmt::Write as _;
use std::fs;

/// Errors below this are converged-to-noise; ratio checks skip them.
const SWEEP_NOISE_FLOOR: f64 = 1e-9;

fn max_value(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn trace_csv(result: &SolveResult) -> String {
    let mut out = String::from("step,t,m_norm,energy,max_value\n");
    for record in &result.history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            record.step,
            fmt_sig(record.t, 12),
            fmt_sig(record.m_norm, 12),
            fmt_sig(record.energy, 12),
            fmt_sig(record.max_value, 12)
        );
    }
    out
}

fn summary_csv(config: &RunConfig, mesh: &Mesh, result: &SolveResult) -> String {
    let stats = mesh_stats(mesh);
    let mut out = String::from(
        "mesh,nodes,triangles,mu,k,c,alpha,sigma,steps,delta,lambda_min,v_max,u_m_norm,f_m_norm,cg_total_iterations\n",
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        config.mesh.label(),
        stats.node_count,
        stats.triangle_count,
        fmt_sig(config.mu, 12),
        fmt_sig(config.k, 12),
        fmt_sig(config.c, 12),
        fmt_sig(config.alpha, 12),
        fmt_sig(config.sigma, 12),
        config.steps,
        fmt_sig(result.delta, 12),
        fmt_sig(result.lambda_min, 12),
        fmt_sig(max_value(&result.u), 12),
        fmt_sig(result.u_m_norm, 12),
        fmt_sig(result.f_m_norm, 12),
        result.cg_total_iterations
    );
    out
}

fn solve_once(config: &RunConfig, mesh: &Mesh) -> Result<SolveResult, CliError> {
    let spec = config.problem_spec();
    spec.validate()?;
    let system = assemble(mesh, &spec)?;
    Ok(run_assembled(
        &system,
        &spec,
        config.sigma,
        config.steps,
        &config.delta,
    )?)
}

/// `solve`: one run, emitting trace.csv, summary.csv and solution.vtk.
pub fn cmd_solve(config: &RunConfig) -> Result<(), CliError> {
    let mesh = config.mesh.load()?;
    let result = solve_once(config, &mesh)?;
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("trace.csv"), trace_csv(&result))?;
    fs::write(
        config.out_dir.join("summary.csv"),
        summary_csv(config, &mesh, &result),
    )?;
    if config.emit_vtk {
        write_vtk(&mesh, &result.u, &config.out_dir.join("solution.vtk"))?;
    }
    println!("v_max = {}", fmt_sig(max_value(&result.u), 6));
    Ok(())
}

/// `eig`: smallest generalized eigenvalue of (K, M), Table-1 style.
pub fn cmd_eig(config: &RunConfig) -> Result<(), CliError> {
    let mesh = config.mesh.load()?;
    let spec = config.problem_spec();
    spec.validate()?;
    let system = assemble(&mesh, &spec)?;
    let eig = min_eigen(
        &system.stiffness,
        &system.mass,
        DEFAULT_EIGEN_TOL,
        DEFAULT_EIGEN_MAX_ITER,
    )?;
    fs::create_dir_all(&config.out_dir)?;
    let mut csv = String::from("mesh,mu,k,c,lambda_min,iterations,residual\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{}",
        config.mesh.label(),
        fmt_sig(config.mu, 12),
        fmt_sig(config.k, 12),
        fmt_sig(config.c, 12),
        fmt_sig(eig.lambda_min, 12),
        eig.iterations,
        fmt_sig(eig.residual, 6)
    );
    fs::write(config.out_dir.join("eig.csv"), csv)?;
    println!("lambda_min = {}", fmt_sig(eig.lambda_min, 12));
    Ok(())
}

struct SweepRow {
    steps: usize,
    alpha: f64,
    sigma: f64,
    mu: f64,
    delta: f64,
    v_max: f64,
    status: &'static str,
}

/// `sweep`: Cartesian product over (N, alpha, sigma, mu), one trace per run
/// plus a summary with each run's v_max error against the finest N of its
/// (alpha, sigma, mu) family. Failing runs are flagged, partial results kept.
pub fn cmd_sweep(plan: &SweepPlan) -> Result<(), CliError> {
    let mesh = plan.base.mesh.load()?;
    fs::create_dir_all(&plan.base.out_dir)?;
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut any_failed = false;
    for &alpha in &plan.alpha_list {
        for &sigma in &plan.sigma_list {
            for &mu in &plan.mu_list {
                for &steps in &plan.steps_list {
                    let run_config = RunConfig {
                        alpha,
                        sigma,
                        mu,
                        steps,
                        ..plan.base.clone()
                    };
                    let run_dir = plan
                        .base
                        .out_dir
                        .join(format!("N{steps}_alpha{alpha}_sigma{sigma}_mu{mu}"));
                    match solve_once(&run_config, &mesh) {
                        Ok(result) => {
                            fs::create_dir_all(&run_dir)?;
                            fs::write(run_dir.join("trace.csv"), trace_csv(&result))?;
                            rows.push(SweepRow {
                                steps,
                                alpha,
                                sigma,
                                mu,
                                delta: result.delta,
                                v_max: max_value(&result.u),
                                status: "ok",
                            });
                        }
                        Err(error) => {
                            eprintln!("sweep run N={steps} alpha={alpha} sigma={sigma} mu={mu} failed: {error}");
                            any_failed = true;
                            rows.push(SweepRow {
                                steps,
                                alpha,
                                sigma,
                                mu,
                                delta: f64::NAN,
                                v_max: f64::NAN,
                                status: "failed",
                            });
                        }
                    }
                }
            }
        }
    }

    // err_vs_finest_N compares within the (alpha, sigma, mu) family
    let finest = |alpha: f64, sigma: f64, mu: f64| -> Option<f64> {
        rows.iter()
            .filter(|r| {
                r.alpha == alpha && r.sigma == sigma && r.mu == mu && r.status == "ok"
            })
            .max_by_key(|r| r.steps)
            .map(|r| r.v_max)
    };

    let mut summary =
        String::from("N,alpha,sigma,mu,delta,v_max,err_vs_finest_N,status\n");
    for row in &rows {
        let err = finest(row.alpha, row.sigma, row.mu)
            .map(|reference| (row.v_max - reference).abs());
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            row.steps,
            fmt_sig(row.alpha, 12),
            fmt_sig(row.sigma, 12),
            fmt_sig(row.mu, 12),
            if row.status == "ok" { fmt_sig(row.delta, 12) } else { String::new() },
            if row.status == "ok" { fmt_sig(row.v_max, 12) } else { String::new() },
            err.map(|e| fmt_sig(e, 12)).unwrap_or_default(),
            row.status
        );
    }
    fs::write(plan.base.out_dir.join("sweep_summary.csv"), summary)?;

    // convergence-ratio diagnostics per doubling pair (N, 2N), recorded
    // always and enforced only under --strict
    let mut ratios = String::from(
        "alpha,sigma,mu,n_coarse,n_fine,err_coarse,err_fine,ratio,expected_low,expected_high,within\n",
    );
    let mut strict_violation = false;
    for &alpha in &plan.alpha_list {
        for &sigma in &plan.sigma_list {
            for &mu in &plan.mu_list {
                let Some(reference) = finest(alpha, sigma, mu) else {
                    continue;
                };
                let mut family: Vec<(usize, f64)> = rows
                    .iter()
                    .filter(|r| {
                        r.alpha == alpha && r.sigma == sigma && r.mu == mu && r.status == "ok"
                    })
                    .map(|r| (r.steps, (r.v_max - reference).abs()))
                    .collect();
                family.sort_by_key(|(steps, _)| *steps);
                // monotone decrease of the error, above the noise floor
                for pair in family.windows(2) {
                    let (_, coarse) = pair[0];
                    let (fine_steps, fine) = pair[1];
                    if fine_steps == family.last().unwrap().0 {
                        continue; // the reference row itself
                    }
                    if coarse > SWEEP_NOISE_FLOOR
                        && fine > SWEEP_NOISE_FLOOR
                        && fine > coarse * (1.0 + 1e-12)
                    {
                        strict_violation = true;
                    }
                }
                // the scheme order shows in the coarsest doubling pair:
                // first order halves the error, second order at least
                // quarters it
                let (low, high) = if sigma == 0.5 {
                    (3.2, f64::INFINITY)
                } else {
                    (1.6, 2.4)
                };
                let mut first_pair_done = false;
                for i in 0..family.len() {
                    for j in (i + 1)..family.len() {
                        if family[j].0 != 2 * family[i].0 || family[j].0 == family.last().unwrap().0
                        {
                            continue;
                        }
                        let (nc, ec) = family[i];
                        let (nf, ef) = family[j];
                        if ec <= SWEEP_NOISE_FLOOR || ef <= SWEEP_NOISE_FLOOR {
                            continue;
                        }
                        let ratio = ec / ef;
                        let enforced = !first_pair_done;
                        let within = ratio >= low && ratio <= high;
                        if enforced && !within {
                            strict_violation = true;
                        }
                        first_pair_done = true;
                        let _ = writeln!(
                            ratios,
                            "{},{},{},{},{},{},{},{},{},{},{}",
                            fmt_sig(alpha, 12),
                            fmt_sig(sigma, 12),
                            fmt_sig(mu, 12),
                            nc,
                            nf,
                            fmt_sig(ec, 12),
                            fmt_sig(ef, 12),
                            fmt_sig(ratio, 12),
                            fmt_sig(low, 12),
                            if high.is_finite() { fmt_sig(high, 12) } else { String::new() },
                            within
                        );
                    }
                }
            }
        }
    }
    fs::write(plan.base.out_dir.join("sweep_ratios.csv"), ratios)?;

    println!("sweep complete: {} runs", rows.len());
    if any_failed {
        return Err(CliError::Numerical(fracell::Error::InvalidParameter {
            name: "sweep",
            message: "one or more sweep runs failed; partial results kept".into(),
        }));
    }
    if plan.base.strict && strict_violation {
        return Err(CliError::Numerical(fracell::Error::StabilityMonitorViolation {
            step: 0,
            message: "strict sweep: convergence-ratio check failed, see sweep_ratios.csv".into(),
        }));
    }
    Ok(())
}

/// `oracle-check`: M-norm error of the time stepper against the dense
/// spectral solution over a list of N values, with observed orders.
pub fn cmd_oracle_check(config: &RunConfig, steps_list: &[usize]) -> Result<(), CliError> {
    let mesh = config.mesh.load()?;
    let spec = config.problem_spec();
    spec.validate()?;
    let system = assemble(&mesh, &spec)?;
    let decomposition = dense_generalized_eig(&system.stiffness, &system.mass)?;
    let f = l2_project(&system, &spec.f)?;
    let reference = fractional_apply(
        &decomposition,
        &system.mass,
        &f,
        config.alpha,
        PowerSign::Negative,
    )?;

    let mut steps_sorted = steps_list.to_vec();
    steps_sorted.sort_unstable();
    let mut csv = String::from("N,error_m_norm,observed_order\n");
    let mut previous: Option<f64> = None;
    for &steps in &steps_sorted {
        let run_config = RunConfig {
            steps,
            ..config.clone()
        };
        let result = solve_once(&run_config, &mesh)?;
        let record = compare(&result.u, &reference, &system.mass)?;
        let order = previous
            .map(|p| fmt_sig((p / record.m_norm).log2(), 12))
            .unwrap_or_default();
        let _ = writeln!(csv, "{},{},{}", steps, fmt_sig(record.m_norm, 12), order);
        previous = Some(record.m_norm);
    }
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("convergence.csv"), &csv)?;
    print!("{csv}");

    if config.alpha == 0.5 {
        // discrete square-root identity: u^T K u = f^T M f
        let uku = dot(&reference, &system.stiffness.spmv(&reference)?);
        let fmf = dot(&f, &system.mass.spmv(&f)?);
        let residual = (uku - fmf).abs() / fmf;
        println!("identity_residual = {}", fmt_sig(residual, 6));
    }
    let f_norm = m_norm(&system.mass, &f)?;
    let u_norm = m_norm(&system.mass, &reference)?;
    let bound = decomposition.lambdas[0].powf(-config.alpha) * f_norm;
    println!(
        "oracle_m_norm = {} (a priori bound {})",
        fmt_sig(u_norm, 12),
        fmt_sig(bound, 12)
    );
    Ok(())
}

/// `mesh-gen`: writes the generated mesh in the plain-text format and reports
/// its stats.
pub fn cmd_mesh_gen(config: &RunConfig) -> Result<(), CliError> {
    let mesh = config.mesh.load()?;
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("mesh.txt"), mesh_to_text(&mesh))?;
    let stats = mesh_stats(&mesh);
    println!(
        "{}: {} nodes, {} triangles, {} boundary edges, h_max = {}, min_angle = {} deg",
        config.mesh.label(),
        stats.node_count,
        stats.triangle_count,
        stats.boundary_edge_count,
        fmt_sig(stats.h_max, 6),
        fmt_sig(stats.min_angle, 6)
    );
    Ok(())
}

