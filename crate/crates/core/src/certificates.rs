//! Verifiable optimality certificates for solver outputs.
//!
//! * [`check_s3onc`]: first-order stationarity of the penalized empirical
//!   objective on the feasible set, plus the second-order band condition. With
//!   `a·U_L < 1` the curvature inequality `U_L − 1/a ≥ 0` can never hold, so the
//!   second-order condition is equivalent to having no eigenvalue strictly
//!   inside `(0, aλ)`.
//! * [`check_initial_gap`]: `F_{n,λ}(X^{ℓ1}) ≤ F_{n,λ}(X*) + λ‖X*‖_*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{mcp_spectral_gradient, mcp_sum, psd_eigenvalues, McpParams};
use crate::problems::{Objective, ProblemInstance, SampleBatch};
use crate::solvers::SolveReport;
use crate::spectral::{eig_sym, numerical_rank, project_psd_ball, SpectralDecomp, SymMatrix, DEFAULT_RANK_TOL};

/// Relative zero tolerance: eigenvalues at or below `ZERO_REL · max(1, σ_max)` count as zero.
pub const ZERO_REL: f64 = 1e-8;
/// Band tolerance relative to `aλ`.
pub const BAND_REL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct S3oncCertificate {
    /// `‖(X − Π(X − η·G))/η‖_F` with `G` the penalized gradient and `Π` the
    /// projection onto `{0 ⪯ X, σ_max ≤ R}`.
    pub first_order_residual: f64,
    /// Step `η` used in the residual.
    pub step: f64,
    pub kkt_tol: f64,
    /// `(j, σⱼ)` with `σⱼ` strictly inside `(tol_zero, aλ − tol_band)`.
    pub band_violations: Vec<(usize, f64)>,
    pub second_order_ok: bool,
    pub tol_zero: f64,
    pub tol_band: f64,
    pub passed: bool,
}

/// Eigenvalues of `x` that violate the thresholding rule, with the tolerances used.
pub fn band_violations(eigenvalues: &[f64], prm: &McpParams) -> (Vec<(usize, f64)>, f64, f64) {
    let sigma_max = eigenvalues.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let tol_zero = ZERO_REL * sigma_max.max(1.0);
    let tol_band = BAND_REL * prm.knot();
    let upper = prm.knot() - tol_band;
    let v = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > tol_zero && w < upper)
        .map(|(j, &w)| (j, w))
        .collect();
    (v, tol_zero, tol_band)
}

/// Clipped eigenvalues with those at or below the zero tolerance set to zero.
///
/// A rank-deficient matrix's null eigenvalues come back from the
/// decomposition as rounding noise of order `ε‖X‖`; since `P_λ(t) ≈ λt` near
/// zero that noise would otherwise leak into objective comparisons.
pub(crate) fn penalty_eigenvalues(d: &SpectralDecomp) -> Result<Vec<f64>> {
    let w = psd_eigenvalues(d)?;
    let tol_zero = ZERO_REL * d.spectral_radius().max(1.0);
    Ok(w.into_iter().map(|t| if t <= tol_zero { 0.0 } else { t }).collect())
}

/// `F_n(X) + Σⱼ P_λ(σⱼ(X))`, with eigenvalues below the zero tolerance counted as zero.
pub fn penalized_objective(obj: &Objective, x: &SymMatrix, prm: &McpParams) -> Result<f64> {
    let d = eig_sym(x)?;
    Ok(obj.value(x) + mcp_sum(&penalty_eigenvalues(&d)?, prm))
}

pub fn check_s3onc(
    inst: &ProblemInstance,
    batch: &SampleBatch,
    x: &SymMatrix,
    prm: &McpParams,
    kkt_tol: f64,
) -> Result<S3oncCertificate> {
    let obj = Objective::new(inst, batch)?;
    check_s3onc_with(&obj, inst.radius, x, prm, kkt_tol)
}

/// [`check_s3onc`] against a prepared objective and feasible radius.
pub fn check_s3onc_with(
    obj: &Objective,
    radius: f64,
    x: &SymMatrix,
    prm: &McpParams,
    kkt_tol: f64,
) -> Result<S3oncCertificate> {
    if x.dim() != obj.dim() {
        return Err(Error::invalid("matrix dimension does not match the problem"));
    }
    let lip = obj.lipschitz();
    let step = if lip > 0.0 { (0.9 * prm.a()).min(1.0 / lip) } else { 0.9 * prm.a() };

    let mut grad = obj.gradient(x);
    grad.axpy(1.0, &mcp_spectral_gradient(x, prm)?);
    let mut trial = x.clone();
    trial.axpy(-step, &grad);
    let projected = project_psd_ball(&trial, radius)?;
    let first_order_residual = (x - &projected).frobenius_norm() / step;

    let d = eig_sym(x)?;
    let (band_violations, tol_zero, tol_band) = band_violations(&d.eigenvalues, prm);
    let second_order_ok = band_violations.is_empty();
    let passed = first_order_residual <= kkt_tol && second_order_ok;
    Ok(S3oncCertificate {
        first_order_residual,
        step,
        kkt_tol,
        band_violations,
        second_order_ok,
        tol_zero,
        tol_band,
        passed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialGap {
    pub passed: bool,
    /// `F_{n,λ}(X^{ℓ1})`
    pub lhs: f64,
    /// `F_{n,λ}(X*) + λ‖X*‖_*`
    pub rhs: f64,
    /// `lhs − rhs`
    pub gap: f64,
}

pub fn check_initial_gap(
    inst: &ProblemInstance,
    batch: &SampleBatch,
    x_l1: &SymMatrix,
    prm: &McpParams,
    slack: f64,
) -> Result<InitialGap> {
    let obj = Objective::new(inst, batch)?;
    let lhs = penalized_objective(&obj, x_l1, prm)?;
    let truth = &inst.true_solution;
    // X* is PSD, so its nuclear norm is its trace.
    let rhs = penalized_objective(&obj, truth, prm)? + prm.lambda() * truth.trace();
    let gap = lhs - rhs;
    Ok(InitialGap { passed: gap <= slack, lhs, rhs, gap })
}

/// Outcome of re-checking a saved [`SolveReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCheck {
    /// No eigenvalue of the solution lies strictly inside `(0, aλ)`; `None` without MCP parameters.
    pub second_order_ok: Option<bool>,
    pub band_violations: Vec<(usize, f64)>,
    /// The recorded rank equals the numerical rank of the stored solution.
    pub rank_consistent: bool,
    /// The stored certificate's verdict agrees with its own residual and band fields.
    pub recorded_consistent: bool,
    /// Certificate recomputed from the problem and batch, when both were supplied.
    pub recomputed: Option<S3oncCertificate>,
    pub passed: bool,
}

/// Re-check `report`. Without `data` only checks needing no samples are run.
pub fn verify_report(
    report: &SolveReport,
    data: Option<(&ProblemInstance, &SampleBatch)>,
    kkt_tol: Option<f64>,
) -> Result<ReportCheck> {
    let d = eig_sym(&report.solution)?;
    let rank_consistent = numerical_rank(&d, DEFAULT_RANK_TOL) == report.rank;
    let (second_order_ok, band) = match &report.mcp {
        Some(prm) => {
            let (v, _, _) = band_violations(&d.eigenvalues, prm);
            (Some(v.is_empty()), v)
        }
        None => (None, Vec::new()),
    };
    let recorded_consistent = report.certificate.as_ref().is_none_or(|c| {
        c.passed == (c.first_order_residual <= c.kkt_tol && c.band_violations.is_empty())
            && c.second_order_ok == c.band_violations.is_empty()
    });
    let recomputed = match (data, &report.mcp) {
        (Some((inst, batch)), Some(prm)) => {
            let tol = kkt_tol
                .or(report.certificate.as_ref().map(|c| c.kkt_tol))
                .unwrap_or(crate::solvers::SolverConfig::default().kkt_tol);
            Some(check_s3onc(inst, batch, &report.solution, prm, tol)?)
        }
        _ => None,
    };
    let passed = rank_consistent
        && recorded_consistent
        && second_order_ok.unwrap_or(true)
        && report.certificate.as_ref().is_none_or(|c| c.passed)
        && recomputed.as_ref().is_none_or(|c| c.passed);
    Ok(ReportCheck { second_order_ok, band_violations: band, rank_consistent, recorded_consistent, recomputed, passed })
}
