//! Closed-form tuning parameters and sample-complexity bounds.
//!
//! The bounds contain universal constants (`c̃`, `C₁`, `C₂`) whose values are
//! not known; they are inputs defaulting to `1.0`, and every bound is only
//! meaningful up to those constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::McpParams;
use crate::problems::{AssumptionConstants, ProblemInstance};

/// Universal constants of the bounds. Their values are unknown; the defaults are placeholders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniversalConstants {
    pub c_tilde: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        UniversalConstants { c_tilde: 1.0, c1: 1.0, c2: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub p: usize,
    pub n: usize,
    pub s: usize,
    pub constants: AssumptionConstants,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub universal: UniversalConstants,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.s == 0 || self.s > self.p {
            return Err(Error::invalid(format!("need 1 <= s <= p, got s = {}, p = {}", self.s, self.p)));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be nonnegative"));
        }
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return Err(Error::invalid("R must be >= 1"));
        }
        self.constants.validate()?;
        let u = self.universal;
        if !(u.c_tilde > 0.0 && u.c1 > 0.0 && u.c2 > 0.0) {
            return Err(Error::invalid("universal constants must be positive"));
        }
        Ok(())
    }

    fn require_n_at_least_two(&self) -> Result<()> {
        self.validate()?;
        if self.n < 2 {
            return Err(Error::invalid("this evaluator needs n >= 2"));
        }
        Ok(())
    }

    fn pf(&self) -> f64 {
        self.p as f64
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn sf(&self) -> f64 {
        self.s as f64
    }
}

/// `Δ̃ = ln(18·R·(K_C + 𝒞_μ))`.
pub fn delta_tilde(constants: &AssumptionConstants, radius: f64) -> Result<f64> {
    let arg = 18.0 * radius * (constants.k_c + constants.c_mu);
    if !(arg > 0.0 && arg.is_finite()) {
        return Err(Error::invalid(format!("logarithm argument must be positive, got {arg}")));
    }
    Ok(arg.ln())
}

/// `ln(n^{1/3}·p) + Δ̃`, the logarithmic factor shared by every bound.
pub fn log_factor(inputs: &TheoryInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.nf().cbrt().ln() + inputs.pf().ln() + delta_tilde(&inputs.constants, inputs.radius)?)
}

/// `a = 1/(2·U_L)`.
pub fn tuned_a(inputs: &TheoryInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(1.0 / (2.0 * inputs.constants.u_l))
}

/// `λ = √(8K(2p+1)^{2/3} / (c·a·n^{2/3}) · [ln(n^{1/3}p) + Δ̃])` with `a = 1/(2U_L)`.
pub fn tuned_lambda(inputs: &TheoryInputs) -> Result<f64> {
    inputs.require_n_at_least_two()?;
    let a = tuned_a(inputs)?;
    let k = inputs.constants.k;
    let c = inputs.constants.bernstein_c;
    let dim = (2.0 * inputs.pf() + 1.0).powf(2.0 / 3.0);
    let n23 = inputs.nf().powf(2.0 / 3.0);
    Ok((8.0 * k * dim / (c * a * n23) * log_factor(inputs)?).sqrt())
}

/// Inputs for `inst` at sample size `n`, with `Γ = 0` and default universal constants.
/// `R` enters the logarithm floored at 1.
pub fn inputs_for(inst: &ProblemInstance, n: usize) -> TheoryInputs {
    TheoryInputs {
        p: inst.p,
        n,
        s: inst.s,
        constants: inst.constants,
        radius: inst.radius.max(1.0),
        gamma: 0.0,
        universal: UniversalConstants::default(),
    }
}

/// MCP parameters `(a, λ)` prescribed for `inst` at sample size `n ≥ 2`.
pub fn tuned_mcp(inst: &ProblemInstance, n: usize) -> Result<McpParams> {
    let lambda = tuned_lambda(&inputs_for(inst, n))?;
    McpParams::tuned(lambda, inst.constants.u_l)
}

/// Right-hand side of a sample-size condition evaluated at the given `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCondition {
    pub required_n: f64,
    pub satisfied: bool,
}

/// `n > C₁·[(Γ/K)³ + 1]·p + C₁·s·(ln(n^{1/3}p) + Δ̃)`.
pub fn sample_condition_i(inputs: &TheoryInputs) -> Result<SampleCondition> {
    let lf = log_factor(inputs)?;
    let c1 = inputs.universal.c1;
    let ratio = inputs.gamma / inputs.constants.k;
    let required_n = c1 * (ratio.powi(3) + 1.0) * inputs.pf() + c1 * inputs.sf() * lf;
    Ok(SampleCondition { required_n, satisfied: inputs.nf() > required_n })
}

/// Excess-risk bound for any certified point within `Γ` of `F_{n,λ}(X*)`:
///
/// `√(K p^{1/3} Γ / n^{1/3}) + Γ + C₁K·[s p^{2/3} L / n^{2/3} + √(s L / n) + p^{1/3}/n^{1/3}]`
/// with `L = ln(n^{1/3}p) + Δ̃`.
pub fn risk_bound_i(inputs: &TheoryInputs) -> Result<f64> {
    let lf = log_factor(inputs)?;
    let (p, n, s) = (inputs.pf(), inputs.nf(), inputs.sf());
    let k = inputs.constants.k;
    let g = inputs.gamma;
    let head = (k * p.cbrt() * g / n.cbrt()).sqrt() + g;
    let bracket = s * p.powf(2.0 / 3.0) * lf / n.powf(2.0 / 3.0) + (s * lf / n).sqrt() + p.cbrt() / n.cbrt();
    Ok(head + inputs.universal.c1 * k * bracket)
}

/// `n > C₂·p·U_L·[ln(n^{1/3}p) + Δ̃]·s^{3/2}·R^{3/2}`.
pub fn sample_condition_ii(inputs: &TheoryInputs) -> Result<SampleCondition> {
    let lf = log_factor(inputs)?;
    let required_n = inputs.universal.c2
        * inputs.pf()
        * inputs.constants.u_l
        * lf
        * inputs.sf().powf(1.5)
        * inputs.radius.powf(1.5);
    Ok(SampleCondition { required_n, satisfied: inputs.nf() > required_n })
}

/// Excess-risk bound for certified points that descend from the nuclear initializer:
///
/// `C₂·s·K·[p^{2/3} L / n^{2/3} + p^{1/3} R U_L^{1/2} √L / n^{1/3}]`.
pub fn risk_bound_ii(inputs: &TheoryInputs) -> Result<f64> {
    let lf = log_factor(inputs)?;
    let (p, n, s) = (inputs.pf(), inputs.nf(), inputs.sf());
    let k = inputs.constants.k;
    let first = p.powf(2.0 / 3.0) * lf / n.powf(2.0 / 3.0);
    let second = p.cbrt() * inputs.radius * inputs.constants.u_l.sqrt() * lf.sqrt() / n.cbrt();
    Ok(inputs.universal.c2 * s * k * (first + second))
}

/// `Δ₁(ε) = ln(18·(K_C + 𝒞_μ)·p·R / ε)`.
pub fn delta_one(inputs: &TheoryInputs, epsilon: f64) -> Result<f64> {
    inputs.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let c = &inputs.constants;
    Ok((18.0 * (c.k_c + c.c_mu) * inputs.pf() * inputs.radius / epsilon).ln())
}

/// Rank bound `p̃_u` on certified points in the `Γ`-sublevel set:
///
/// `⌈2c·n^{1/3} / (Δ₁·(2p+1)^{1/3}) + 2c·n^{2/3} / (K·Δ₁·(2p+1)^{2/3})·(Γ + 2ε) + 8s⌉`
/// with `Δ₁ = Δ₁(ε)`; the customary choice is `ε = n^{−1/3}`.
pub fn rank_bound(inputs: &TheoryInputs, epsilon: f64) -> Result<u64> {
    inputs.require_n_at_least_two()?;
    let d1 = delta_one(inputs, epsilon)?;
    if !(d1 > 0.0) {
        return Err(Error::invalid("Δ₁(ε) must be positive"));
    }
    let c = inputs.constants.bernstein_c;
    let k = inputs.constants.k;
    let dim = 2.0 * inputs.pf() + 1.0;
    let n = inputs.nf();
    let first = 2.0 * c * n.cbrt() / (d1 * dim.cbrt());
    let second = 2.0 * c * n.powf(2.0 / 3.0) / (k * d1 * dim.powf(2.0 / 3.0)) * (inputs.gamma + 2.0 * epsilon);
    Ok((first + second + 8.0 * inputs.sf()).ceil() as u64)
}

/// Log of the ε-net size bound `(9√r·R/ε)^{(2p+1)r}` for rank-`r` matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringNumber {
    pub log_count: f64,
    /// The bound fell below one point and was replaced by `log_count = 0`.
    pub trivial: bool,
}

pub fn covering_number(r: usize, radius: f64, epsilon: f64, p: usize) -> Result<CoveringNumber> {
    if r == 0 || p == 0 {
        return Err(Error::invalid("covering number needs r >= 1 and p >= 1"));
    }
    if !(epsilon > 0.0 && radius > 0.0) {
        return Err(Error::invalid("covering number needs epsilon > 0 and R > 0"));
    }
    let base = 9.0 * (r as f64).sqrt() * radius / epsilon;
    if base <= 1.0 {
        return Ok(CoveringNumber { log_count: 0.0, trivial: true });
    }
    Ok(CoveringNumber { log_count: ((2 * p + 1) * r) as f64 * base.ln(), trivial: false })
}

/// Classical SAA rate `scale·√(p²·ln n / n)`.
pub fn saa_classical_bound(p: usize, n: usize, scale: f64) -> Result<f64> {
    if n < 2 || p == 0 {
        return Err(Error::invalid("classical bound needs n >= 2 and p >= 1"));
    }
    let (p, n) = (p as f64, n as f64);
    Ok(scale * (p * p * n.ln() / n).sqrt())
}

/// Smallest `n = 2^k` (`k ≥ 1`) for which `condition` holds when evaluated at that `n`.
pub fn smallest_n_on_doubling_grid(
    inputs: &TheoryInputs,
    condition: impl Fn(&TheoryInputs) -> Result<SampleCondition>,
) -> Result<Option<u64>> {
    let mut trial = *inputs;
    for k in 1..63 {
        trial.n = 1usize << k;
        if condition(&trial)?.satisfied {
            return Ok(Some(trial.n as u64));
        }
    }
    Ok(None)
}

/// Every evaluator at one input point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub inputs: TheoryInputs,
    pub delta_tilde: f64,
    pub a: f64,
    pub lambda: f64,
    pub sample_condition_i: SampleCondition,
    pub risk_bound_i: f64,
    pub sample_condition_ii: SampleCondition,
    pub risk_bound_ii: f64,
    pub min_n_condition_i: Option<u64>,
    pub min_n_condition_ii: Option<u64>,
    /// `p̃_u` at `ε = n^{−1/3}`.
    pub rank_bound: u64,
    /// Covering number of rank-`p̃_u` matrices at `ε = n^{−1/3}` (capped at rank `p`).
    pub covering_number: CoveringNumber,
    pub saa_classical_bound: f64,
    /// Bounds hold only up to the unspecified universal constants.
    pub up_to_universal_constant: bool,
}

pub fn evaluate_all(inputs: &TheoryInputs) -> Result<TheoryReport> {
    inputs.require_n_at_least_two()?;
    let eps = 1.0 / inputs.nf().cbrt();
    let rb = rank_bound(inputs, eps)?;
    let r = (rb as usize).min(inputs.p);
    Ok(TheoryReport {
        inputs: *inputs,
        delta_tilde: delta_tilde(&inputs.constants, inputs.radius)?,
        a: tuned_a(inputs)?,
        lambda: tuned_lambda(inputs)?,
        sample_condition_i: sample_condition_i(inputs)?,
        risk_bound_i: risk_bound_i(inputs)?,
        sample_condition_ii: sample_condition_ii(inputs)?,
        risk_bound_ii: risk_bound_ii(inputs)?,
        min_n_condition_i: smallest_n_on_doubling_grid(inputs, sample_condition_i)?,
        min_n_condition_ii: smallest_n_on_doubling_grid(inputs, sample_condition_ii)?,
        rank_bound: rb,
        covering_number: covering_number(r, inputs.radius, eps, inputs.p)?,
        saa_classical_bound: saa_classical_bound(inputs.p, inputs.n, 1.0)?,
        up_to_universal_constant: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(p: usize, n: usize, s: usize) -> TheoryInputs {
        TheoryInputs {
            p,
            n,
            s,
            constants: AssumptionConstants::default(),
            radius: 1.0,
            gamma: 0.0,
            universal: UniversalConstants::default(),
        }
    }

    #[test]
    fn delta_tilde_values() {
        let c = AssumptionConstants::default();
        assert!((delta_tilde(&c, 1.0).unwrap() - 36f64.ln()).abs() < 1e-15);
        assert!((delta_tilde(&c, 2.0).unwrap() - 72f64.ln()).abs() < 1e-15);
        assert!(delta_tilde(&c, 3.0).unwrap() > delta_tilde(&c, 2.0).unwrap());
        assert!(delta_tilde(&c, -1.0).is_err());
    }

    #[test]
    fn a_is_half_inverse_ul() {
        assert_eq!(tuned_a(&base(10, 1000, 1)).unwrap(), 0.5);
        assert!(tuned_lambda(&base(10, 1, 1)).is_err());
    }

    #[test]
    fn condition_i_examples() {
        let mut i = base(10, 1_000_000, 1);
        assert!(sample_condition_i(&i).unwrap().satisfied);
        i.n = 1;
        assert!(!sample_condition_i(&i).unwrap().satisfied);
        i.n = 100;
        let r0 = sample_condition_i(&i).unwrap().required_n;
        i.gamma = 2.0;
        assert!(sample_condition_i(&i).unwrap().required_n > r0);
    }

    #[test]
    fn bound_i_structure() {
        let mut i = base(10, 10_000, 1);
        let lf = log_factor(&i).unwrap();
        let no_gamma = risk_bound_i(&i).unwrap();
        let bracket = 10f64.powf(2.0 / 3.0) * lf / 1e4f64.powf(2.0 / 3.0) + (lf / 1e4).sqrt() + (1e-3f64).cbrt();
        assert!((no_gamma - bracket).abs() < 1e-14);
        i.n = 1 << 40;
        assert!(risk_bound_i(&i).unwrap() < 1e-3);
    }

    #[test]
    fn bound_ii_structure() {
        let i = base(10, 1000, 1);
        let mut j = i;
        j.s = 2;
        let b1 = risk_bound_ii(&i).unwrap();
        assert!((risk_bound_ii(&j).unwrap() - 2.0 * b1).abs() < 1e-14 * b1);
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_number(1, 1.0, 9.0, 4).unwrap(), CoveringNumber { log_count: 0.0, trivial: true });
        let c = covering_number(1, 1.0, 1.0, 1).unwrap();
        assert!((c.log_count - 3.0 * 9f64.ln()).abs() < 1e-14);
        let c2 = covering_number(1, 2.0, 1.0, 1).unwrap();
        assert!((c2.log_count - c.log_count - 3.0 * 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn classical_examples() {
        let b = saa_classical_bound(10, 1000, 1.0).unwrap();
        assert!((b - (100.0 * 1000f64.ln() / 1000.0).sqrt()).abs() < 1e-15);
        assert!((saa_classical_bound(20, 1000, 1.0).unwrap() - 2.0 * b).abs() < 1e-14);
        assert!(saa_classical_bound(10, 2000, 1.0).unwrap() < b);
    }

    #[test]
    fn rank_bound_exceeds_s() {
        let i = base(10, 1000, 3);
        assert!(rank_bound(&i, 0.1).unwrap() > 3);
    }

    #[test]
    fn report_json_round_trip() {
        let r = evaluate_all(&base(10, 1000, 1)).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"R\""));
        let back: TheoryReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(r.up_to_universal_constant);
    }
}
