//! Minimax concave penalty (MCP).
//!
//! `P_λ(t) = ∫₀ᵗ [aλ − s]₊ / a ds` on `t ≥ 0`, which is `λt − t²/(2a)` up to
//! `aλ` and the constant `aλ²/2` beyond. The spectral form sums `P_λ` over the
//! eigenvalues of a PSD matrix. The penalty is only defined on `[0, ∞)`;
//! callers on the PSD cone clip round-off negatives before evaluating it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{eig_sym, SpectralDecomp, SymMatrix};

/// Eigenvalues at or above `-PSD_CLIP_REL · σ_max` are clipped to zero silently.
pub const PSD_CLIP_REL: f64 = 1e-8;
/// Eigenvalues below `-PSD_REJECT_REL · σ_max` make the spectral penalty fail.
pub const PSD_REJECT_REL: f64 = 1e-6;

/// Penalty parameters `(a, λ)` together with the eigen-Lipschitz constant `U_L`
/// that `a` is validated against (`a·U_L < 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMcp", into = "RawMcp")]
pub struct McpParams {
    a: f64,
    lambda: f64,
    u_l: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMcp {
    a: f64,
    lambda: f64,
    u_l: f64,
}

impl TryFrom<RawMcp> for McpParams {
    type Error = Error;

    fn try_from(r: RawMcp) -> Result<Self> {
        McpParams::new(r.a, r.lambda, r.u_l)
    }
}

impl From<McpParams> for RawMcp {
    fn from(m: McpParams) -> Self {
        RawMcp { a: m.a, lambda: m.lambda, u_l: m.u_l }
    }
}

impl McpParams {
    pub fn new(a: f64, lambda: f64, u_l: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("MCP scale a must be positive, got {a}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("MCP level lambda must be nonnegative, got {lambda}")));
        }
        if !(u_l > 0.0 && u_l.is_finite()) {
            return Err(Error::invalid(format!("U_L must be positive, got {u_l}")));
        }
        if a * u_l >= 1.0 {
            return Err(Error::invalid(format!(
                "thresholding regime requires a * U_L < 1, got a = {a}, U_L = {u_l}"
            )));
        }
        Ok(McpParams { a, lambda, u_l })
    }

    /// `a = 1/(2·U_L)` with the given `λ`.
    pub fn tuned(lambda: f64, u_l: f64) -> Result<Self> {
        Self::new(0.5 / u_l, lambda, u_l)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn u_l(&self) -> f64 {
        self.u_l
    }

    /// `aλ`, where the penalty becomes flat.
    pub fn knot(&self) -> f64 {
        self.a * self.lambda
    }

    /// `aλ²/2`, the saturated penalty value.
    pub fn saturation(&self) -> f64 {
        0.5 * self.a * self.lambda * self.lambda
    }
}

fn check_arg(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("penalty argument must be finite, got {t}")))
    }
}

pub fn mcp_value(t: f64, prm: &McpParams) -> Result<f64> {
    check_arg(t)?;
    if t < 0.0 {
        return Err(Error::invalid(format!("MCP is defined on t >= 0, got {t}")));
    }
    Ok(value_unchecked(t, prm))
}

#[inline]
fn value_unchecked(t: f64, prm: &McpParams) -> f64 {
    if t <= prm.knot() {
        prm.lambda * t - t * t / (2.0 * prm.a)
    } else {
        prm.saturation()
    }
}

/// `P'_λ(t) = [aλ − t]₊ / a` for `t > 0`.
pub fn mcp_derivative(t: f64, prm: &McpParams) -> Result<f64> {
    check_arg(t)?;
    if t <= 0.0 {
        return Err(Error::invalid(format!("MCP derivative needs t > 0, got {t}")));
    }
    Ok(right_derivative(t, prm))
}

/// Right derivative on `[0, ∞)`; equals `λ` at `t = 0`.
#[inline]
pub(crate) fn right_derivative(t: f64, prm: &McpParams) -> f64 {
    (prm.lambda - t.max(0.0) / prm.a).max(0.0)
}

/// `P''_λ(t) = −1/a` on the open band `(0, aλ)`; undefined elsewhere.
pub fn mcp_second_derivative(t: f64, prm: &McpParams) -> Result<f64> {
    check_arg(t)?;
    if !(t > 0.0 && t < prm.knot()) {
        return Err(Error::invalid(format!(
            "MCP second derivative exists only on (0, {}), got {t}",
            prm.knot()
        )));
    }
    Ok(-1.0 / prm.a)
}

/// `argmin_{t ≥ 0} ½(t − v)² + step·P_λ(t)`, requiring `step < a`.
pub fn mcp_prox_scalar(v: f64, step: f64, prm: &McpParams) -> Result<f64> {
    check_arg(v)?;
    check_step(step, prm)?;
    Ok(prox_unchecked(v, step, prm))
}

fn check_step(step: f64, prm: &McpParams) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("prox step must be positive, got {step}")));
    }
    if step >= prm.a {
        return Err(Error::InvalidStep { step, a: prm.a });
    }
    Ok(())
}

#[inline]
fn prox_unchecked(v: f64, step: f64, prm: &McpParams) -> f64 {
    let kink = step * prm.lambda;
    if v <= kink {
        0.0
    } else if v >= prm.knot() {
        v
    } else {
        (v - kink) / (1.0 - step / prm.a)
    }
}

/// Eigenvalues of a (numerically) PSD matrix, with round-off negatives clipped.
pub(crate) fn psd_eigenvalues(d: &SpectralDecomp) -> Result<Vec<f64>> {
    let scale = d.spectral_radius();
    let lowest = d.min_eigenvalue();
    if lowest < -PSD_REJECT_REL * scale {
        return Err(Error::NotPsd { eigenvalue: lowest });
    }
    Ok(d.eigenvalues.iter().map(|&w| w.max(0.0)).collect())
}

/// `Σⱼ P_λ(wⱼ)` over already clipped eigenvalues.
pub fn mcp_sum(eigenvalues: &[f64], prm: &McpParams) -> f64 {
    eigenvalues.iter().map(|&w| value_unchecked(w.max(0.0), prm)).sum()
}

/// `Σⱼ P_λ(σⱼ(X))` for PSD `X`.
pub fn mcp_spectral_value(x: &SymMatrix, prm: &McpParams) -> Result<f64> {
    let d = eig_sym(x)?;
    Ok(mcp_sum(&psd_eigenvalues(&d)?, prm))
}

/// Spectral prox of the MCP: eigenvalues clipped to `[0, ∞)` then mapped by
/// [`mcp_prox_scalar`]. The result is PSD.
pub fn mcp_spectral_prox(x: &SymMatrix, step: f64, prm: &McpParams) -> Result<SymMatrix> {
    check_step(step, prm)?;
    let d = eig_sym(x)?;
    d.map(|w| prox_unchecked(w.max(0.0), step, prm))
}

/// Spectral prox of `MCP + indicator{0 ⪯ X, σ_max ≤ radius}`.
///
/// The scalar objective is strictly convex for `step < a`, so its minimizer on
/// `[0, radius]` is the clamp of the unconstrained one.
pub fn mcp_spectral_prox_ball(
    x: &SymMatrix,
    step: f64,
    prm: &McpParams,
    radius: f64,
) -> Result<SymMatrix> {
    Ok(mcp_spectral_prox_ball_eigs(x, step, prm, radius)?.0)
}

/// [`mcp_spectral_prox_ball`] together with the eigenvalues it assigned.
/// Those are exact (zeros are exactly zero), unlike a re-decomposition of the output.
pub(crate) fn mcp_spectral_prox_ball_eigs(
    x: &SymMatrix,
    step: f64,
    prm: &McpParams,
    radius: f64,
) -> Result<(SymMatrix, Vec<f64>)> {
    check_step(step, prm)?;
    let d = eig_sym(x)?;
    let w: Vec<f64> = d.eigenvalues.iter().map(|&t| prox_unchecked(t.max(0.0), step, prm).min(radius)).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite prox eigenvalue".into()));
    }
    Ok((d.reconstruct_with(&w), w))
}

/// Gradient of `X ↦ Σⱼ P_λ(σⱼ(X))` on the PSD cone: `U·diag(P'_λ(σⱼ))·Uᵀ`,
/// using the right derivative `λ` at zero eigenvalues.
pub fn mcp_spectral_gradient(x: &SymMatrix, prm: &McpParams) -> Result<SymMatrix> {
    eig_sym(x)?.map(|w| right_derivative(w, prm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prm(a: f64, lambda: f64) -> McpParams {
        McpParams::new(a, lambda, 0.5 / a * 0.99).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(McpParams::new(0.5, 1.0, 1.0).is_ok());
        assert!(McpParams::new(1.0, 1.0, 1.0).is_err());
        assert!(McpParams::new(0.0, 1.0, 1.0).is_err());
        assert!(McpParams::new(0.5, -1.0, 1.0).is_err());
        assert_eq!(McpParams::tuned(2.0, 4.0).unwrap().a(), 0.125);
        let raw = r#"{"a": 2.0, "lambda": 1.0, "u_l": 1.0}"#;
        assert!(serde_json::from_str::<McpParams>(raw).is_err());
    }

    #[test]
    fn value_examples() {
        let p = prm(2.0, 1.0);
        assert_eq!(mcp_value(0.0, &p).unwrap(), 0.0);
        assert_eq!(mcp_value(2.0, &p).unwrap(), 1.0);
        assert_eq!(mcp_value(1.0, &p).unwrap(), 0.75);
        assert_eq!(mcp_value(7.0, &p).unwrap(), 1.0);
        assert!(mcp_value(-0.1, &p).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = prm(2.0, 1.0);
        assert_eq!(mcp_derivative(0.5, &p).unwrap(), 0.75);
        assert_eq!(mcp_derivative(2.0, &p).unwrap(), 0.0);
        assert_eq!(mcp_derivative(3.0, &p).unwrap(), 0.0);
        assert!((mcp_derivative(1e-300, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!(mcp_derivative(0.0, &p).is_err());
    }

    #[test]
    fn second_derivative_band() {
        assert_eq!(mcp_second_derivative(1.0, &prm(2.0, 1.0)).unwrap(), -0.5);
        assert_eq!(mcp_second_derivative(0.5, &prm(0.25, 4.0)).unwrap(), -4.0);
        assert!(mcp_second_derivative(2.0, &prm(2.0, 1.0)).is_err());
        assert!(mcp_second_derivative(0.0, &prm(2.0, 1.0)).is_err());
    }

    #[test]
    fn prox_examples() {
        let p = prm(2.0, 1.0);
        assert_eq!(mcp_prox_scalar(0.0, 0.5, &p).unwrap(), 0.0);
        assert_eq!(mcp_prox_scalar(3.0, 0.5, &p).unwrap(), 3.0);
        assert!((mcp_prox_scalar(1.0, 0.5, &p).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // tie at v = step·λ resolves to zero
        assert_eq!(mcp_prox_scalar(0.5, 0.5, &p).unwrap(), 0.0);
        assert_eq!(mcp_prox_scalar(-4.0, 0.5, &p).unwrap(), 0.0);
        assert!(matches!(mcp_prox_scalar(1.0, 2.0, &p), Err(Error::InvalidStep { .. })));
    }

    #[test]
    fn spectral_value_examples() {
        let p = prm(2.0, 1.0);
        assert_eq!(mcp_spectral_value(&SymMatrix::zeros(3), &p).unwrap(), 0.0);
        let sat = SymMatrix::from_diag(&[p.knot(), p.knot()]);
        assert!((mcp_spectral_value(&sat, &p).unwrap() - 2.0 * p.saturation()).abs() < 1e-15);
        let x = SymMatrix::from_diag(&[1.0, 3.0]);
        assert_eq!(mcp_spectral_value(&x, &p).unwrap(), 1.75);
        let neg = SymMatrix::from_diag(&[1.0, -0.1]);
        assert!(matches!(mcp_spectral_value(&neg, &p), Err(Error::NotPsd { .. })));
        let tiny_neg = SymMatrix::from_diag(&[1.0, -1e-10]);
        assert_eq!(mcp_spectral_value(&tiny_neg, &p).unwrap(), 0.75);
    }

    #[test]
    fn spectral_prox_is_diagonal_on_diagonal_input() {
        let p = prm(2.0, 1.0);
        let x = SymMatrix::from_diag(&[3.0, 1.0, 0.2, -1.0]);
        let y = mcp_spectral_prox(&x, 0.5, &p).unwrap();
        let want = [3.0, 2.0 / 3.0, 0.0, 0.0];
        for (i, w) in want.iter().enumerate() {
            assert!((y.get(i, i) - w).abs() < 1e-14);
        }
        assert_eq!(mcp_spectral_prox(&SymMatrix::zeros(2), 0.5, &p).unwrap(), SymMatrix::zeros(2));
        let capped = mcp_spectral_prox_ball(&x, 0.5, &p, 2.5).unwrap();
        assert!((capped.get(0, 0) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn gradient_uses_right_derivative_at_zero() {
        let p = prm(2.0, 1.0);
        let g = mcp_spectral_gradient(&SymMatrix::from_diag(&[0.0, 1.0, 5.0]), &p).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((g.get(1, 1) - 0.5).abs() < 1e-15);
        assert!(g.get(2, 2).abs() < 1e-15);
    }
}
