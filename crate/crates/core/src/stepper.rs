//! Time integration of the discrete pseudo-parabolic problem
//!
//! ```text
//! (t D + delta M) dw/dt + alpha D w = 0,   D = K - delta M,
//! w(0) = delta^{-alpha} * (L2 projection of f),
//! ```
//!
//! from t = 0 to t = 1 with the implicit two-level weighted scheme. The final
//! layer w(1) is the fractional solve u = A^{-alpha} f in the Galerkin sense.
//! Rearranging the weighted scheme gives one SPD solve per step:
//!
//! ```text
//! [(t_w + alpha*sigma*tau) D + delta M] w^{n+1}
//!     = [(t_w - alpha*(1-sigma)*tau) D + delta M] w^n,
//! t_w = sigma t^{n+1} + (1-sigma) t^n.
//! ```
//!
//! Both matrices are formed per step from K and M via `add_scaled`; D itself
//! is never materialized. For sigma >= 0.5 the M-norm of the layers is
//! non-increasing; a step that grows it signals an implementation bug and is
//! a hard error. The energy E^n = delta ||w||_M^2 + 2 alpha t^n w^T D w is
//! recorded in the trace each layer; it is non-increasing for
//! 0.5 < alpha < 1 but may drift upward at the alpha = 0.5 boundary, so it
//! is asserted by tests rather than enforced here.

use crate::eigen::{min_eigen, resolve_delta, DeltaPolicy, DEFAULT_EIGEN_MAX_ITER, DEFAULT_EIGEN_TOL};
use crate::error::{Error, Result};
use crate::fem::{assemble, l2_project, m_norm, rhs_m_norm, AssembledSystem, ProblemSpec};
use crate::mesh::Mesh;
use crate::sparse::{add_scaled, cg_solve, dot};

/// Inner CG tolerance for the per-step solves, fixed rather than tau-coupled
/// so temporal-order measurements stay clean.
pub const STEP_CG_TOL: f64 = 1e-10;
/// Relative slack allowed on the layer-norm monotonicity monitor.
const NORM_MONITOR_SLACK: f64 = 1e-10;

/// Weighted-scheme parameters with the resolved spectral bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// Weight sigma in [0.5, 1]; 0.5 is second order in tau, larger first.
    pub sigma: f64,
    /// Number of time steps N; tau = 1/N.
    pub steps: usize,
    /// Fractional exponent, must match the problem spec.
    pub alpha: f64,
    /// Resolved spectral lower bound delta <= lambda_min.
    pub delta: f64,
}

impl SchemeConfig {
    pub fn tau(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.5 || self.sigma > 1.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: format!("weight must lie in [0.5, 1], got {}", self.sigma),
            });
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter {
                name: "steps",
                message: "need at least one time step".into(),
            });
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                message: format!("exponent must lie in (0, 1), got {}", self.alpha),
            });
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                message: format!("delta must be positive, got {}", self.delta),
            });
        }
        Ok(())
    }
}

/// Monitored quantities of one time layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// ||w^n||_M.
    pub m_norm: f64,
    /// E^n = delta ||w^n||_M^2 + 2 alpha t^n (w^n)^T D w^n.
    pub energy: f64,
    /// Maximum nodal coefficient of the layer.
    pub max_value: f64,
}

/// Evolving solution layer with its monitor trace.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    /// Current coefficient vector w^n.
    pub w: Vec<f64>,
    /// Step index n.
    pub step: usize,
    /// Current time t^n = n tau.
    pub t: f64,
    pub history: Vec<StepRecord>,
}

/// Outcome of a full integration run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Final layer w^N, the approximation of A^{-alpha} f.
    pub u: Vec<f64>,
    pub history: Vec<StepRecord>,
    pub cg_total_iterations: usize,
    pub delta: f64,
    pub lambda_min: f64,
    /// ||u||_M of the final layer.
    pub u_m_norm: f64,
    /// ||f||_M of the right-hand side.
    pub f_m_norm: f64,
}

/// E^n for the given layer; at t = 0 the D term vanishes and E^0 reduces to
/// delta ||w^0||_M^2.
pub fn monitor_energy(
    system: &AssembledSystem,
    config: &SchemeConfig,
    w: &[f64],
    t: f64,
) -> Result<f64> {
    let mw = system.mass.spmv(w)?;
    let kw = system.stiffness.spmv(w)?;
    let wmw = dot(w, &mw);
    let wdw = dot(w, &kw) - config.delta * wmw;
    Ok(config.delta * wmw + 2.0 * config.alpha * t * wdw)
}

fn record(
    system: &AssembledSystem,
    config: &SchemeConfig,
    w: &[f64],
    step: usize,
    t: f64,
) -> Result<StepRecord> {
    Ok(StepRecord {
        step,
        t,
        m_norm: m_norm(&system.mass, w)?,
        energy: monitor_energy(system, config, w, t)?,
        max_value: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Builds the initial layer w^0 = delta^{-alpha} * l2_project(f).
pub fn init_state(
    system: &AssembledSystem,
    spec: &ProblemSpec,
    config: &SchemeConfig,
) -> Result<EvolutionState> {
    config.validate()?;
    let scale = config.delta.powf(-config.alpha);
    let mut w = l2_project(system, &spec.f)?;
    for x in &mut w {
        *x *= scale;
    }
    let first = record(system, config, &w, 0, 0.0)?;
    Ok(EvolutionState {
        w,
        step: 0,
        t: 0.0,
        history: vec![first],
    })
}

/// Advances one layer by solving the per-step SPD system. Returns the number
/// of CG iterations spent.
pub fn step(
    state: &mut EvolutionState,
    system: &AssembledSystem,
    config: &SchemeConfig,
) -> Result<usize> {
    if state.step >= config.steps {
        return Err(Error::InvalidParameter {
            name: "step",
            message: format!("already at final layer {}", state.step),
        });
    }
    let tau = config.tau();
    let t_next = (state.step + 1) as f64 * tau;
    let t_weighted = config.sigma * t_next + (1.0 - config.sigma) * state.t;

    // c_l * D + delta * M  ==  c_l * K + delta * (1 - c_l) * M
    let c_l = t_weighted + config.alpha * config.sigma * tau;
    let c_r = t_weighted - config.alpha * (1.0 - config.sigma) * tau;
    let lhs = add_scaled(
        &system.stiffness,
        c_l,
        &system.mass,
        config.delta * (1.0 - c_l),
    )?;
    let rhs_matrix = add_scaled(
        &system.stiffness,
        c_r,
        &system.mass,
        config.delta * (1.0 - c_r),
    )?;
    let rhs = rhs_matrix.spmv(&state.w)?;

    let (w_next, report) = cg_solve(&lhs, &rhs, STEP_CG_TOL, 10 * system.n.max(10))?;
    report.require_converged("per-step CG solve")?;

    let next_record = record(system, config, &w_next, state.step + 1, t_next)?;
    let previous_norm = state.history[state.step].m_norm;
    if next_record.m_norm > previous_norm * (1.0 + NORM_MONITOR_SLACK) {
        return Err(Error::StabilityMonitorViolation {
            step: state.step + 1,
            message: format!(
                "layer M-norm grew from {previous_norm:.15e} to {:.15e} with sigma = {}",
                next_record.m_norm, config.sigma
            ),
        });
    }
    state.w = w_next;
    state.step += 1;
    state.t = t_next;
    state.history.push(next_record);
    Ok(report.iterations)
}

/// Full pipeline: assemble, estimate lambda_min, resolve delta, project the
/// initial layer and integrate N steps. The final layer is checked against
/// the a priori bound ||u||_M <= delta^{-alpha} ||f||_M.
pub fn run(
    mesh: &Mesh,
    spec: &ProblemSpec,
    sigma: f64,
    steps: usize,
    policy: &DeltaPolicy,
) -> Result<SolveResult> {
    spec.validate()?;
    let system = assemble(mesh, spec)?;
    run_assembled(&system, spec, sigma, steps, policy)
}

/// [`run`] on a pre-assembled system, for callers that reuse the matrices.
pub fn run_assembled(
    system: &AssembledSystem,
    spec: &ProblemSpec,
    sigma: f64,
    steps: usize,
    policy: &DeltaPolicy,
) -> Result<SolveResult> {
    let eig = min_eigen(
        &system.stiffness,
        &system.mass,
        DEFAULT_EIGEN_TOL,
        DEFAULT_EIGEN_MAX_ITER,
    )?;
    let delta = resolve_delta(policy, Some(&eig))?;
    let config = SchemeConfig {
        sigma,
        steps,
        alpha: spec.alpha,
        delta,
    };
    let mut state = init_state(system, spec, &config)?;
    let mut cg_total_iterations = 0;
    for _ in 0..steps {
        cg_total_iterations += step(&mut state, system, &config)?;
    }
    let u_m_norm = state.history[steps].m_norm;
    let f_m_norm = rhs_m_norm(system, &spec.f)?;
    let bound = delta.powf(-spec.alpha) * f_m_norm;
    if u_m_norm > bound * (1.0 + 1e-8) {
        return Err(Error::StabilityMonitorViolation {
            step: steps,
            message: format!(
                "final norm {u_m_norm:.15e} exceeds a priori bound {bound:.15e}"
            ),
        });
    }
    Ok(SolveResult {
        u: state.w,
        history: state.history,
        cg_total_iterations,
        delta,
        lambda_min: eig.lambda_min,
        u_m_norm,
        f_m_norm,
    })
}
