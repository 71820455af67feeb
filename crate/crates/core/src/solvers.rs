//! Proximal-gradient solvers for the three estimators.
//!
//! * [`solve_nuclear`]: `min F_n(X) + λ‖X‖_*` over the PSD ball (the initializer).
//! * [`solve_rsaa`]: `min F_n(X) + Σⱼ P_λ(σⱼ(X))` over the PSD ball, started
//!   from a feasible point and descending monotonically from it.
//! * [`solve_saa`]: `min F_n(X)` over the PSD ball.
//!
//! All three share one engine: a gradient step on `F_n` followed by a spectral
//! prox that also clamps eigenvalues to `[0, R]`, with Armijo backtracking on the
//! full objective so every accepted step decreases it.

use serde::{Deserialize, Serialize};

use crate::certificates::{band_violations, check_s3onc_with, penalized_objective, penalty_eigenvalues, S3oncCertificate};
use crate::error::{Error, Result};
use crate::penalty::{mcp_spectral_prox_ball_eigs, mcp_sum, McpParams};
use crate::problems::{Objective, ProblemInstance, SampleBatch};
use crate::spectral::{eig_sym, numerical_rank, project_psd_ball, SymMatrix, DEFAULT_RANK_TOL};

/// Consecutive stalled iterations that end a run.
const STALL_WINDOW: usize = 10;
/// Relative objective change below which an iteration may count as stalled.
/// It only counts when the residual has also stopped improving: near a
/// solution a linearly converging run changes `F` by less than this while
/// still making real progress.
const STALL_REL: f64 = 1e-12;
/// Iteration budget of each post-polish descent.
const POLISH_DESCENT_ITERS: usize = 100;
/// Polish rounds before giving up on the band.
const POLISH_ROUNDS: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    #[default]
    FixedBacktracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Tolerance on the prox-gradient residual `‖X_{k+1} − X_k‖_F / step`.
    pub kkt_tol: f64,
    pub step_rule: StepRule,
    /// First trial step; `None` uses `1/L` for the estimated gradient Lipschitz constant.
    pub initial_step: Option<f64>,
    pub backtrack_factor: f64,
    pub armijo_const: f64,
    /// Feasible radius; `None` uses the problem's `R`.
    pub radius: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 5000,
            kkt_tol: 1e-7,
            step_rule: StepRule::FixedBacktracking,
            initial_step: None,
            backtrack_factor: 0.5,
            armijo_const: 1e-4,
            radius: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::invalid("kkt_tol must be positive"));
        }
        if let Some(s) = self.initial_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("initial_step must be positive"));
            }
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid("backtrack_factor must lie in (0, 1)"));
        }
        if !(self.armijo_const > 0.0 && self.armijo_const < 1.0) {
            return Err(Error::invalid("armijo_const must lie in (0, 1)"));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("radius must be positive"));
            }
        }
        Ok(())
    }

    fn radius_for(&self, inst: &ProblemInstance) -> f64 {
        self.radius.unwrap_or(inst.radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Saa,
    Nuclear,
    Rsaa,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Saa => "saa",
            Method::Nuclear => "nuclear",
            Method::Rsaa => "rsaa",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Residual,
    Stalled,
    MaxIters,
    StepCollapsed,
}

/// One accepted iteration: objective after the step, the step size, and the
/// prox-gradient residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct TraceEntry {
    pub objective: f64,
    pub step: f64,
    pub residual: f64,
}

impl From<[f64; 3]> for TraceEntry {
    fn from(t: [f64; 3]) -> Self {
        TraceEntry { objective: t[0], step: t[1], residual: t[2] }
    }
}

impl From<TraceEntry> for [f64; 3] {
    fn from(t: TraceEntry) -> Self {
        [t.objective, t.step, t.residual]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub solution: SymMatrix,
    /// `F_n` at the solution.
    pub objective_empirical: f64,
    /// `F_n` plus the method's own penalty (zero for SAA, `λ‖X‖_*` for the
    /// nuclear stage, the spectral MCP for RSAA).
    pub objective_penalized: f64,
    pub lambda: f64,
    /// MCP parameters, RSAA only.
    pub mcp: Option<McpParams>,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub certificate: Option<S3oncCertificate>,
    pub trace: Vec<TraceEntry>,
}

/// Spectral part of the composite objective.
trait Regularizer {
    /// Penalty at a PSD matrix with (clipped) eigenvalues `w`.
    fn value_from_eigs(&self, w: &[f64]) -> f64;
    /// Prox of `step · penalty + indicator(ball)`; returns the point and its penalty value.
    fn prox(&self, v: &SymMatrix, step: f64) -> Result<(SymMatrix, f64)>;
    fn max_step(&self) -> f64 {
        f64::INFINITY
    }
}

struct Ball {
    radius: f64,
}

impl Regularizer for Ball {
    fn value_from_eigs(&self, _w: &[f64]) -> f64 {
        0.0
    }

    fn prox(&self, v: &SymMatrix, _step: f64) -> Result<(SymMatrix, f64)> {
        Ok((project_psd_ball(v, self.radius)?, 0.0))
    }
}

struct Nuclear {
    lambda: f64,
    radius: f64,
}

impl Regularizer for Nuclear {
    fn value_from_eigs(&self, w: &[f64]) -> f64 {
        self.lambda * w.iter().sum::<f64>()
    }

    fn prox(&self, v: &SymMatrix, step: f64) -> Result<(SymMatrix, f64)> {
        let d = eig_sym(v)?;
        let shrink = step * self.lambda;
        let w: Vec<f64> = d.eigenvalues.iter().map(|&t| (t - shrink).max(0.0).min(self.radius)).collect();
        Ok((d.reconstruct_with(&w), self.value_from_eigs(&w)))
    }
}

struct Mcp {
    prm: McpParams,
    radius: f64,
}

impl Regularizer for Mcp {
    fn value_from_eigs(&self, w: &[f64]) -> f64 {
        mcp_sum(w, &self.prm)
    }

    fn prox(&self, v: &SymMatrix, step: f64) -> Result<(SymMatrix, f64)> {
        // Evaluate the penalty on the assigned eigenvalues: re-decomposing x
        // would turn exact zeros into rounding noise worth about λ·ε‖x‖ each.
        let (x, w) = mcp_spectral_prox_ball_eigs(v, step, &self.prm, self.radius)?;
        Ok((x, mcp_sum(&w, &self.prm)))
    }

    fn max_step(&self) -> f64 {
        0.9 * self.prm.a()
    }
}

struct RunOutcome {
    x: SymMatrix,
    objective: f64,
    iterations: usize,
    reason: StopReason,
}

/// Proximal gradient with Armijo backtracking from a feasible `x0` whose
/// composite objective is `f0`.
#[allow(clippy::too_many_arguments)]
fn prox_gradient(
    obj: &Objective,
    reg: &dyn Regularizer,
    x0: SymMatrix,
    f0: f64,
    step0: f64,
    cfg: &SolverConfig,
    tol: f64,
    max_iters: usize,
    trace: &mut Vec<TraceEntry>,
) -> Result<RunOutcome> {
    let mut x = x0;
    let mut f = f0;
    let mut step = step0.min(reg.max_step());
    let mut stalled = 0;
    let mut best_residual = f64::INFINITY;
    for it in 0..max_iters {
        let g = obj.gradient(&x);
        let (next, f_next, dist2) = loop {
            let mut v = x.clone();
            v.axpy(-step, &g);
            let (cand, pen) = reg.prox(&v, step)?;
            let f_cand = obj.value(&cand) + pen;
            let dist2 = (&cand - &x).inner(&(&cand - &x));
            let slack = 4.0 * f64::EPSILON * f.abs().max(1.0);
            if f_cand <= f - cfg.armijo_const / (2.0 * step) * dist2 + slack {
                break (cand, f_cand, dist2);
            }
            step *= cfg.backtrack_factor;
            if step < 1e-16 * step0 {
                return Ok(RunOutcome { x, objective: f, iterations: it, reason: StopReason::StepCollapsed });
            }
        };
        let residual = dist2.sqrt() / step;
        trace.push(TraceEntry { objective: f_next, step, residual });
        let change = (f - f_next).abs();
        x = next;
        let prev = f;
        f = f_next.min(prev);
        if residual <= tol {
            return Ok(RunOutcome { x, objective: f, iterations: it + 1, reason: StopReason::Residual });
        }
        let improved = residual < best_residual;
        best_residual = best_residual.min(residual);
        if change <= STALL_REL * prev.abs().max(1.0) && !improved {
            stalled += 1;
            if stalled >= STALL_WINDOW {
                return Ok(RunOutcome { x, objective: f, iterations: it + 1, reason: StopReason::Stalled });
            }
        } else {
            stalled = 0;
        }
    }
    Ok(RunOutcome { x, objective: f, iterations: max_iters, reason: StopReason::MaxIters })
}

fn initial_step(obj: &Objective, cfg: &SolverConfig) -> f64 {
    cfg.initial_step.unwrap_or_else(|| {
        let lip = obj.lipschitz();
        if lip > 0.0 {
            1.0 / lip
        } else {
            1.0
        }
    })
}

fn check_inputs(inst: &ProblemInstance, batch: &SampleBatch, cfg: &SolverConfig) -> Result<Objective> {
    cfg.validate()?;
    Objective::new(inst, batch)
}

fn finish(
    method: Method,
    obj: &Objective,
    outcome: RunOutcome,
    lambda: f64,
    mcp: Option<McpParams>,
    certificate: Option<S3oncCertificate>,
    trace: Vec<TraceEntry>,
) -> Result<SolveReport> {
    let d = eig_sym(&outcome.x)?;
    let rank = numerical_rank(&d, DEFAULT_RANK_TOL);
    let objective_empirical = obj.value(&outcome.x);
    Ok(SolveReport {
        method,
        objective_empirical,
        objective_penalized: outcome.objective,
        lambda,
        mcp,
        rank,
        iterations: outcome.iterations,
        converged: outcome.reason != StopReason::MaxIters && outcome.reason != StopReason::StepCollapsed,
        stop_reason: outcome.reason,
        certificate,
        trace,
        solution: outcome.x,
    })
}

/// Nuclear-norm regularized SAA, started from zero.
pub fn solve_nuclear(
    inst: &ProblemInstance,
    batch: &SampleBatch,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    let obj = check_inputs(inst, batch, cfg)?;
    let reg = Nuclear { lambda, radius: cfg.radius_for(inst) };
    let x0 = SymMatrix::zeros(inst.p);
    let f0 = obj.value(&x0);
    let mut trace = Vec::new();
    let out = prox_gradient(&obj, &reg, x0, f0, initial_step(&obj, cfg), cfg, cfg.kkt_tol, cfg.max_iters, &mut trace)?;
    let objective = obj.value(&out.x) + lambda * out.x.trace();
    let out = RunOutcome { objective, ..out };
    finish(Method::Nuclear, &obj, out, lambda, None, None, trace)
}

/// Plain SAA over the PSD ball, started from zero.
pub fn solve_saa(inst: &ProblemInstance, batch: &SampleBatch, cfg: &SolverConfig) -> Result<SolveReport> {
    let obj = check_inputs(inst, batch, cfg)?;
    let reg = Ball { radius: cfg.radius_for(inst) };
    let x0 = SymMatrix::zeros(inst.p);
    let f0 = obj.value(&x0);
    let mut trace = Vec::new();
    let out = prox_gradient(&obj, &reg, x0, f0, initial_step(&obj, cfg), cfg, cfg.kkt_tol, cfg.max_iters, &mut trace)?;
    finish(Method::Saa, &obj, out, 0.0, None, None, trace)
}

/// Moves every band eigenvalue to whichever of `0` and `aλ` gives the lower
/// objective, keeping eigenvectors fixed. A move is kept only if it does not
/// increase the objective. Returns the new point, its objective and whether
/// anything changed.
fn polish_band(obj: &Objective, reg: &Mcp, x: &SymMatrix, f: f64) -> Result<(SymMatrix, f64, bool)> {
    let d = eig_sym(x)?;
    let mut w = penalty_eigenvalues(&d)?;
    let (violations, _, _) = band_violations(&w, &reg.prm);
    if violations.is_empty() {
        return Ok((x.clone(), f, false));
    }
    let knot = reg.prm.knot().min(reg.radius);
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut changed = false;
    for (j, _) in violations {
        let keep = w[j];
        let mut candidate = None;
        for target in [0.0, knot] {
            w[j] = target;
            let cx = d.reconstruct_with(&w);
            let cf = obj.value(&cx) + reg.value_from_eigs(&w);
            if cf <= best_f && candidate.as_ref().is_none_or(|(_, _, f)| cf < *f) {
                candidate = Some((target, cx, cf));
            }
        }
        match candidate {
            Some((target, cx, cf)) => {
                w[j] = target;
                best_x = cx;
                best_f = cf;
                changed = true;
            }
            None => w[j] = keep,
        }
    }
    Ok((best_x, best_f, changed))
}

/// MCP-regularized SAA started from a feasible `init`.
pub fn solve_rsaa(
    inst: &ProblemInstance,
    batch: &SampleBatch,
    prm: &McpParams,
    cfg: &SolverConfig,
    init: &SymMatrix,
) -> Result<SolveReport> {
    let obj = check_inputs(inst, batch, cfg)?;
    let radius = cfg.radius_for(inst);
    if init.dim() != inst.p {
        return Err(Error::invalid("initial point has the wrong dimension"));
    }
    let d0 = eig_sym(init)?;
    let scale = d0.spectral_radius().max(1.0);
    if d0.min_eigenvalue() < -1e-8 * scale || d0.max_eigenvalue() > radius * (1.0 + 1e-8) {
        return Err(Error::invalid("initial point is not PSD with spectral radius <= R"));
    }
    let reg = Mcp { prm: *prm, radius };
    let step0 = initial_step(&obj, cfg);
    let mut trace = Vec::new();

    let mut x = init.clone();
    let mut f = obj.value(&x) + mcp_sum(&penalty_eigenvalues(&d0)?, prm);
    let mut iterations = 0;
    let mut reason = StopReason::MaxIters;
    let mut tol = cfg.kkt_tol;
    let mut budget = cfg.max_iters;
    let mut certificate = None;

    // Descend, polish the band, and tighten the tolerance until the
    // certificate's own residual also meets kkt_tol.
    for _attempt in 0..3 {
        let out = prox_gradient(&obj, &reg, x, f, step0, cfg, tol, budget, &mut trace)?;
        iterations += out.iterations;
        budget = budget.saturating_sub(out.iterations);
        x = out.x;
        f = out.objective;
        reason = out.reason;

        for _ in 0..POLISH_ROUNDS {
            let (px, pf, changed) = polish_band(&obj, &reg, &x, f)?;
            if !changed {
                break;
            }
            x = px;
            f = pf;
            let iters = POLISH_DESCENT_ITERS.min(budget.max(1));
            let out = prox_gradient(&obj, &reg, x, f, step0, cfg, tol, iters, &mut trace)?;
            iterations += out.iterations;
            budget = budget.saturating_sub(out.iterations);
            x = out.x;
            f = out.objective;
            if out.reason != StopReason::MaxIters {
                reason = out.reason;
            }
        }

        let cert = check_s3onc_with(&obj, radius, &x, prm, cfg.kkt_tol)?;
        let residual_ok = cert.first_order_residual <= cfg.kkt_tol;
        certificate = Some(cert);
        if residual_ok || budget == 0 || reason == StopReason::StepCollapsed {
            break;
        }
        tol *= 0.1;
    }

    let out = RunOutcome { x, objective: f, iterations, reason };
    let mut report = finish(Method::Rsaa, &obj, out, prm.lambda(), Some(*prm), certificate, trace)?;
    // Report the penalized objective on the final spectrum.
    report.objective_penalized = penalized_objective(&obj, &report.solution, prm)?;
    Ok(report)
}

/// Nuclear stage with `prm.lambda`, then RSAA started at its solution.
pub fn solve_pipeline(
    inst: &ProblemInstance,
    batch: &SampleBatch,
    prm: &McpParams,
    cfg: &SolverConfig,
) -> Result<(SolveReport, SolveReport)> {
    let nuclear = solve_nuclear(inst, batch, prm.lambda(), cfg)?;
    let rsaa = solve_rsaa(inst, batch, prm, cfg, &nuclear.solution)?;
    let obj = Objective::new(inst, batch)?;
    let start = penalized_objective(&obj, &nuclear.solution, prm)?;
    if rsaa.objective_penalized > start + 1e-10 {
        return Err(Error::NumericalFailure(format!(
            "RSAA stage increased the penalized objective: {} > {}",
            rsaa.objective_penalized, start
        )));
    }
    Ok((nuclear, rsaa))
}

// ---------------------------------------------------------------------------
// JSON

/// On-disk form of a [`SolveReport`]; the solution is a flat row-major array
/// and the trace a list of `[objective, step, residual]` triples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportDocument {
    pub method: Method,
    pub p: usize,
    pub solution: Vec<f64>,
    pub objective_empirical: f64,
    pub objective_penalized: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcp: Option<McpParams>,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    #[serde(default)]
    pub certificate: Option<S3oncCertificate>,
    pub trace: Vec<TraceEntry>,
}

impl From<&SolveReport> for ReportDocument {
    fn from(r: &SolveReport) -> Self {
        ReportDocument {
            method: r.method,
            p: r.solution.dim(),
            solution: r.solution.as_slice().to_vec(),
            objective_empirical: r.objective_empirical,
            objective_penalized: r.objective_penalized,
            lambda: r.lambda,
            mcp: r.mcp,
            rank: r.rank,
            iterations: r.iterations,
            converged: r.converged,
            stop_reason: r.stop_reason,
            certificate: r.certificate.clone(),
            trace: r.trace.clone(),
        }
    }
}

impl ReportDocument {
    pub fn into_report(self) -> Result<SolveReport> {
        Ok(SolveReport {
            method: self.method,
            solution: SymMatrix::from_row_major(self.p, self.solution)?,
            objective_empirical: self.objective_empirical,
            objective_penalized: self.objective_penalized,
            lambda: self.lambda,
            mcp: self.mcp,
            rank: self.rank,
            iterations: self.iterations,
            converged: self.converged,
            stop_reason: self.stop_reason,
            certificate: self.certificate,
            trace: self.trace,
        })
    }
}

impl Serialize for SolveReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SolveReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ReportDocument::deserialize(d)?.into_report().map_err(serde::de::Error::custom)
    }
}
