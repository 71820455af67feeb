//! Synthetic stochastic programs with a known low-rank PSD solution.
//!
//! Two families are provided:
//!
//! * **Denoising**: `Z = Y = X* + E` with symmetric noise `E`, cost
//!   `f(X, Y) = ½‖X − Y‖²_F`. The true risk is available in closed form,
//!   `𝔽(X) = ½‖X − X*‖²_F + ½·p²·σ²`, because the `p(p+1)/2` free entries of `E`
//!   each carry variance `σ²` and the off-diagonal ones are counted twice.
//! * **Sensing**: `Z = (A, y)` with a unit-Frobenius symmetric Gaussian `A`,
//!   `y = ⟨A, X*⟩ + ξ`, cost `f(X, Z) = ½(⟨A, X⟩ − y)²`. The true risk is
//!   estimated by Monte Carlo.
//!
//! All randomness flows from explicit seeds (see [`crate::rng`]).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix, stream, TAG_EVAL, TAG_PILOT, TAG_SAMPLE, TAG_TRUTH};
use crate::spectral::{eig_sym, rank_of, SymMatrix};

/// Default number of pilot scenarios used to estimate the assumption constants.
pub const DEFAULT_PILOT_SAMPLES: usize = 10_000;
/// Default number of fresh scenarios for Monte Carlo risk estimates.
pub const DEFAULT_EVAL_SAMPLES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Denoising,
    Sensing,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Denoising => "denoising",
            Family::Sensing => "sensing",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "denoising" => Ok(Family::Denoising),
            "sensing" => Ok(Family::Sensing),
            other => Err(Error::invalid(format!("unknown problem family {other:?}"))),
        }
    }
}

/// Distribution of the additive noise, always centered with standard deviation `noise_scale`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    Gaussian,
    /// `Exp(1) − 1`, a heavier (sub-exponential) right tail.
    Exponential,
}

impl Noise {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Noise::Gaussian => rng.sample(StandardNormal),
            Noise::Exponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
        }
    }
}

/// Constants of the regularity assumptions that feed the tuning formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// Lipschitz constant of the eigen-gradient, `U_L ≥ 1`.
    pub u_l: f64,
    /// Sub-exponential norm bound `K ≥ 1` of the centered cost.
    pub k: f64,
    /// Sub-exponential norm bound `K_C ≥ 1` of the centered Lipschitz envelope.
    pub k_c: f64,
    /// Mean Lipschitz envelope bound `𝒞_μ ≥ 1`.
    pub c_mu: f64,
    /// Bernstein constant `c ∈ (0, ½]`.
    pub bernstein_c: f64,
}

impl Default for AssumptionConstants {
    fn default() -> Self {
        AssumptionConstants { u_l: 1.0, k: 1.0, k_c: 1.0, c_mu: 1.0, bernstein_c: 0.5 }
    }
}

impl AssumptionConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("u_l", self.u_l), ("k", self.k), ("k_c", self.k_c), ("c_mu", self.c_mu)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::invalid(format!("constant {name} must be finite and >= 1, got {v}")));
            }
        }
        if !(self.bernstein_c > 0.0 && self.bernstein_c <= 0.5) {
            return Err(Error::invalid(format!(
                "bernstein_c must lie in (0, 0.5], got {}",
                self.bernstein_c
            )));
        }
        Ok(())
    }
}

/// Construction parameters for [`make_problem_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub family: Family,
    pub p: usize,
    pub s: usize,
    pub radius: f64,
    pub noise_scale: f64,
    #[serde(default)]
    pub noise: Noise,
    pub seed: u64,
    #[serde(default = "default_pilot")]
    pub pilot_samples: usize,
}

fn default_pilot() -> usize {
    DEFAULT_PILOT_SAMPLES
}

impl ProblemConfig {
    pub fn new(family: Family, p: usize, s: usize, radius: f64, noise_scale: f64, seed: u64) -> Self {
        ProblemConfig {
            family,
            p,
            s,
            radius,
            noise_scale,
            noise: Noise::Gaussian,
            seed,
            pilot_samples: DEFAULT_PILOT_SAMPLES,
        }
    }
}

/// A synthetic stochastic program with known true solution `X*`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub family: Family,
    pub p: usize,
    pub s: usize,
    pub radius: f64,
    pub noise_scale: f64,
    pub noise: Noise,
    pub seed: u64,
    pub true_solution: SymMatrix,
    pub constants: AssumptionConstants,
}

/// One realization of `Z`.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    Denoising { y: SymMatrix },
    Sensing { a: SymMatrix, y: f64 },
}

/// `n` i.i.d. scenarios.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub family: Family,
    pub p: usize,
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Monte Carlo (or exact, with zero standard error) risk value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl RiskEstimate {
    fn exact(value: f64) -> Self {
        RiskEstimate { value, std_error: 0.0 }
    }
}

pub fn make_problem(
    family: Family,
    p: usize,
    s: usize,
    radius: f64,
    noise_scale: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    make_problem_with(&ProblemConfig::new(family, p, s, radius, noise_scale, seed))
}

pub fn make_problem_with(cfg: &ProblemConfig) -> Result<ProblemInstance> {
    if cfg.p == 0 {
        return Err(Error::invalid("dimension p must be at least 1"));
    }
    if cfg.s == 0 || cfg.s > cfg.p {
        return Err(Error::invalid(format!("rank s must satisfy 1 <= s <= p, got s = {}, p = {}", cfg.s, cfg.p)));
    }
    if !(cfg.radius >= 1.0 && cfg.radius.is_finite()) {
        return Err(Error::invalid(format!("radius R must be >= 1, got {}", cfg.radius)));
    }
    if !(cfg.noise_scale >= 0.0 && cfg.noise_scale.is_finite()) {
        return Err(Error::invalid(format!("noise_scale must be >= 0, got {}", cfg.noise_scale)));
    }
    if cfg.pilot_samples < 2 {
        return Err(Error::invalid("pilot_samples must be at least 2"));
    }

    let true_solution = random_low_rank(cfg.p, cfg.s, cfg.radius, mix(&[cfg.seed, TAG_TRUTH]));
    let mut inst = ProblemInstance {
        family: cfg.family,
        p: cfg.p,
        s: cfg.s,
        radius: cfg.radius,
        noise_scale: cfg.noise_scale,
        noise: cfg.noise,
        seed: cfg.seed,
        true_solution,
        constants: AssumptionConstants::default(),
    };
    inst.constants = estimate_constants(&inst, cfg.pilot_samples);
    inst.validate()?;
    Ok(inst)
}

/// `V·diag(d)·Vᵀ` with `V` an orthonormal `p × s` frame and `dⱼ ~ U[R/2, R]`.
fn random_low_rank(p: usize, s: usize, radius: f64, seed: u64) -> SymMatrix {
    let mut rng = stream(seed);
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(s);
    while frame.len() < s {
        let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        // Modified Gram-Schmidt, applied twice.
        for _ in 0..2 {
            for u in &frame {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            frame.push(v);
        }
    }
    let scales: Vec<f64> = (0..s).map(|_| rng.gen_range(0.5 * radius..=radius).min(radius)).collect();
    SymMatrix::from_upper_fn(p, |i, j| {
        frame.iter().zip(&scales).map(|(v, d)| d * v[i] * v[j]).sum()
    })
}

fn gaussian_sym(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    SymMatrix::from_upper_fn(p, |_, _| rng.sample(StandardNormal))
}

fn noise_sym(p: usize, scale: f64, noise: Noise, rng: &mut ChaCha8Rng) -> SymMatrix {
    SymMatrix::from_upper_fn(p, |_, _| scale * noise.draw(rng))
}

impl ProblemInstance {
    pub fn validate(&self) -> Result<()> {
        if self.true_solution.dim() != self.p {
            return Err(Error::invalid("true solution dimension does not match p"));
        }
        if self.s == 0 || self.s > self.p {
            return Err(Error::invalid("rank s must satisfy 1 <= s <= p"));
        }
        if !(self.radius >= 1.0) {
            return Err(Error::invalid("radius R must be >= 1"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::invalid("noise_scale must be >= 0"));
        }
        self.constants.validate()?;
        let d = eig_sym(&self.true_solution)?;
        let tol = 1e-8 * d.spectral_radius().max(1.0);
        if d.min_eigenvalue() < -tol {
            return Err(Error::invalid("true solution is not PSD"));
        }
        if d.max_eigenvalue() > self.radius * (1.0 + 1e-12) {
            return Err(Error::invalid("true solution exceeds the radius"));
        }
        let rank = rank_of(&self.true_solution)?;
        if rank != self.s {
            return Err(Error::invalid(format!("true solution has rank {rank}, expected {}", self.s)));
        }
        Ok(())
    }

    /// Draws one scenario from `rng`.
    pub fn draw_scenario(&self, rng: &mut ChaCha8Rng) -> Scenario {
        match self.family {
            Family::Denoising => {
                let e = noise_sym(self.p, self.noise_scale, self.noise, rng);
                Scenario::Denoising { y: &self.true_solution + &e }
            }
            Family::Sensing => {
                let raw = gaussian_sym(self.p, rng);
                let a = raw.scale(1.0 / raw.frobenius_norm());
                let xi = self.noise_scale * self.noise.draw(rng);
                let y = a.inner(&self.true_solution) + xi;
                Scenario::Sensing { a, y }
            }
        }
    }

    /// `½ p² σ²`, the irreducible part of the Denoising risk.
    pub fn denoising_noise_constant(&self) -> f64 {
        0.5 * (self.p * self.p) as f64 * self.noise_scale * self.noise_scale
    }

    /// Lipschitz envelope `C(z)` of `X ↦ f(X, z)` on `{0 ⪯ X, σ_max(X) ≤ R}`.
    pub fn lipschitz_envelope(&self, z: &Scenario) -> f64 {
        let ball = self.radius * (self.p as f64).sqrt();
        match z {
            Scenario::Denoising { y } => ball + y.frobenius_norm(),
            Scenario::Sensing { a, y } => {
                let af = a.frobenius_norm();
                af * (af * ball + y.abs())
            }
        }
    }
}

/// `sup_{q∈{1,2,3}} q⁻¹·(E|W|^q)^{1/q}` for centered samples `W`.
pub fn psi1_moment_estimate(centered: &[f64]) -> f64 {
    let n = centered.len() as f64;
    (1..=3)
        .map(|q| {
            let qf = q as f64;
            let m = centered.iter().map(|w| w.abs().powi(q)).sum::<f64>() / n;
            m.powf(1.0 / qf) / qf
        })
        .fold(0.0, f64::max)
}

fn centered(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

/// Largest eigenvalue magnitude by power iteration (a lower bound on `‖A‖₂`).
fn spectral_norm_estimate(a: &SymMatrix) -> f64 {
    let p = a.dim();
    let mut v: Vec<f64> = (0..p).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut est = 0.0;
    for _ in 0..30 {
        let w: Vec<f64> = (0..p).map(|i| (0..p).map(|j| a.get(i, j) * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm / vnorm;
        v = w;
    }
    est
}

/// Empirical constants from `pilot` fresh scenarios, floored at the lower
/// bounds the assumptions require.
///
/// `K` is measured on the centered cost at `X*`; `𝒞_μ`, `K_C` on the Lipschitz
/// envelope over the feasible ball.
pub fn estimate_constants(inst: &ProblemInstance, pilot: usize) -> AssumptionConstants {
    let mut rng = stream(mix(&[inst.seed, TAG_PILOT]));
    let mut costs = Vec::with_capacity(pilot);
    let mut envelopes = Vec::with_capacity(pilot);
    let mut u_l: f64 = 1.0;
    for _ in 0..pilot {
        let z = inst.draw_scenario(&mut rng);
        costs.push(cost(inst, &inst.true_solution, &z));
        envelopes.push(inst.lipschitz_envelope(&z));
        if let Scenario::Sensing { a, .. } = &z {
            let sn = spectral_norm_estimate(a);
            u_l = u_l.max(sn * sn);
        }
    }
    let c_mean = envelopes.iter().map(|c| c.abs()).sum::<f64>() / pilot as f64;
    AssumptionConstants {
        u_l,
        k: psi1_moment_estimate(&centered(&costs)).max(1.0),
        k_c: psi1_moment_estimate(&centered(&envelopes)).max(1.0),
        c_mu: c_mean.max(1.0),
        bernstein_c: 0.5,
    }
}

/// `n` i.i.d. scenarios; deterministic in `(inst.seed, seed)`.
pub fn sample(inst: &ProblemInstance, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::invalid("sample size n must be at least 1"));
    }
    let mut rng = stream(mix(&[inst.seed, TAG_SAMPLE, seed]));
    let scenarios = (0..n).map(|_| inst.draw_scenario(&mut rng)).collect();
    Ok(SampleBatch { family: inst.family, p: inst.p, seed, scenarios })
}

/// `f(X, z)`.
pub fn cost(_inst: &ProblemInstance, x: &SymMatrix, z: &Scenario) -> f64 {
    match z {
        Scenario::Denoising { y } => 0.5 * (x - y).inner(&(x - y)),
        Scenario::Sensing { a, y } => {
            let r = a.inner(x) - y;
            0.5 * r * r
        }
    }
}

fn check_batch(inst: &ProblemInstance, x: &SymMatrix, batch: &SampleBatch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("sample batch is empty"));
    }
    if batch.family != inst.family || batch.p != inst.p {
        return Err(Error::invalid("sample batch does not belong to this problem"));
    }
    if x.dim() != inst.p {
        return Err(Error::invalid(format!("matrix dimension {} does not match p = {}", x.dim(), inst.p)));
    }
    Ok(())
}

/// `F_n(X) = (1/n)·Σᵢ f(X, Zᵢ)`.
pub fn empirical_objective(inst: &ProblemInstance, x: &SymMatrix, batch: &SampleBatch) -> Result<f64> {
    check_batch(inst, x, batch)?;
    let n = batch.len() as f64;
    Ok(batch.scenarios.iter().map(|z| cost(inst, x, z)).sum::<f64>() / n)
}

/// `∇F_n(X)`.
pub fn empirical_gradient(inst: &ProblemInstance, x: &SymMatrix, batch: &SampleBatch) -> Result<SymMatrix> {
    check_batch(inst, x, batch)?;
    Ok(Objective::new(inst, batch)?.gradient(x))
}

/// `F_n` with batch statistics precomputed, for repeated evaluation by solvers.
#[derive(Clone, Debug)]
pub struct Objective {
    kind: ObjectiveKind,
    p: usize,
}

#[derive(Clone, Debug)]
enum ObjectiveKind {
    /// `½‖X − Ȳ‖² + offset` with `offset = ½(mean‖Yᵢ‖² − ‖Ȳ‖²)`.
    Denoising { mean: SymMatrix, offset: f64 },
    Sensing { a: Vec<SymMatrix>, y: Vec<f64> },
}

impl Objective {
    pub fn new(inst: &ProblemInstance, batch: &SampleBatch) -> Result<Self> {
        check_batch(inst, &inst.true_solution, batch)?;
        let n = batch.len() as f64;
        let kind = match inst.family {
            Family::Denoising => {
                let mut mean = SymMatrix::zeros(inst.p);
                let mut sq = 0.0;
                for z in &batch.scenarios {
                    let Scenario::Denoising { y } = z else {
                        return Err(Error::invalid("scenario family mismatch"));
                    };
                    mean.axpy(1.0 / n, y);
                    sq += y.inner(y);
                }
                let offset = 0.5 * (sq / n - mean.inner(&mean)).max(0.0);
                ObjectiveKind::Denoising { mean, offset }
            }
            Family::Sensing => {
                let mut a = Vec::with_capacity(batch.len());
                let mut y = Vec::with_capacity(batch.len());
                for z in &batch.scenarios {
                    let Scenario::Sensing { a: ai, y: yi } = z else {
                        return Err(Error::invalid("scenario family mismatch"));
                    };
                    a.push(ai.clone());
                    y.push(*yi);
                }
                ObjectiveKind::Sensing { a, y }
            }
        };
        Ok(Objective { kind, p: inst.p })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn value(&self, x: &SymMatrix) -> f64 {
        match &self.kind {
            ObjectiveKind::Denoising { mean, offset } => {
                let d = x - mean;
                0.5 * d.inner(&d) + offset
            }
            ObjectiveKind::Sensing { a, y } => {
                let n = a.len() as f64;
                a.iter()
                    .zip(y)
                    .map(|(ai, yi)| {
                        let r = ai.inner(x) - yi;
                        0.5 * r * r
                    })
                    .sum::<f64>()
                    / n
            }
        }
    }

    pub fn gradient(&self, x: &SymMatrix) -> SymMatrix {
        match &self.kind {
            ObjectiveKind::Denoising { mean, .. } => x - mean,
            ObjectiveKind::Sensing { a, y } => {
                let n = a.len() as f64;
                let mut g = SymMatrix::zeros(self.p);
                for (ai, yi) in a.iter().zip(y) {
                    g.axpy((ai.inner(x) - yi) / n, ai);
                }
                g
            }
        }
    }

    /// The sample mean `Ȳ` for Denoising batches.
    pub fn denoising_mean(&self) -> Option<&SymMatrix> {
        match &self.kind {
            ObjectiveKind::Denoising { mean, .. } => Some(mean),
            ObjectiveKind::Sensing { .. } => None,
        }
    }

    /// Estimate of the Lipschitz constant of `∇F_n` (exact for Denoising,
    /// power iteration on the Gram operator for Sensing).
    pub fn lipschitz(&self) -> f64 {
        match &self.kind {
            ObjectiveKind::Denoising { .. } => 1.0,
            ObjectiveKind::Sensing { a, .. } => {
                let n = a.len() as f64;
                let mut rng = stream(0x5EED_1195);
                let mut v = gaussian_sym(self.p, &mut rng);
                v = v.scale(1.0 / v.frobenius_norm());
                let mut est = 0.0;
                for _ in 0..60 {
                    let mut w = SymMatrix::zeros(self.p);
                    for ai in a {
                        w.axpy(ai.inner(&v) / n, ai);
                    }
                    let norm = w.frobenius_norm();
                    if norm == 0.0 {
                        return 0.0;
                    }
                    est = norm;
                    v = w.scale(1.0 / norm);
                }
                est
            }
        }
    }
}

fn mc_eval(inst: &ProblemInstance, n_eval: usize, f: impl Fn(&Scenario) -> f64 + Sync) -> RiskEstimate {
    let values: Vec<f64> = (0..n_eval)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(mix(&[inst.seed, TAG_EVAL, i as u64]));
            f(&inst.draw_scenario(&mut rng))
        })
        .collect();
    let n = n_eval as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    RiskEstimate { value: mean, std_error: (var / n).sqrt() }
}

/// `𝔽(X) = E f(X, Z)`; closed form for Denoising, Monte Carlo for Sensing.
pub fn true_risk(inst: &ProblemInstance, x: &SymMatrix) -> Result<RiskEstimate> {
    true_risk_with(inst, x, DEFAULT_EVAL_SAMPLES)
}

pub fn true_risk_with(inst: &ProblemInstance, x: &SymMatrix, n_eval: usize) -> Result<RiskEstimate> {
    check_x(inst, x)?;
    match inst.family {
        Family::Denoising => {
            let d = x - &inst.true_solution;
            Ok(RiskEstimate::exact(0.5 * d.inner(&d) + inst.denoising_noise_constant()))
        }
        Family::Sensing => {
            if n_eval < 2 {
                return Err(Error::invalid("n_eval must be at least 2"));
            }
            Ok(mc_eval(inst, n_eval, |z| cost(inst, x, z)))
        }
    }
}

/// `𝔽(X) − 𝔽(X*)`.
///
/// Denoising: exactly `½‖X − X*‖²_F`. Sensing: common-random-number Monte
/// Carlo estimate of `½·E⟨A, X − X*⟩²`; the cross term `−ξ⟨A, X − X*⟩` has zero
/// mean and is dropped, so the estimate is never negative.
pub fn excess_risk(inst: &ProblemInstance, x: &SymMatrix) -> Result<RiskEstimate> {
    excess_risk_with(inst, x, DEFAULT_EVAL_SAMPLES)
}

pub fn excess_risk_with(inst: &ProblemInstance, x: &SymMatrix, n_eval: usize) -> Result<RiskEstimate> {
    check_x(inst, x)?;
    let delta = x - &inst.true_solution;
    match inst.family {
        Family::Denoising => Ok(RiskEstimate::exact(0.5 * delta.inner(&delta))),
        Family::Sensing => {
            if n_eval < 2 {
                return Err(Error::invalid("n_eval must be at least 2"));
            }
            if delta.max_abs() == 0.0 {
                return Ok(RiskEstimate::exact(0.0));
            }
            Ok(mc_eval(inst, n_eval, |z| match z {
                Scenario::Sensing { a, .. } => {
                    let r = a.inner(&delta);
                    0.5 * r * r
                }
                Scenario::Denoising { .. } => unreachable!("sensing instance produced a denoising scenario"),
            }))
        }
    }
}

fn check_x(inst: &ProblemInstance, x: &SymMatrix) -> Result<()> {
    if x.dim() != inst.p {
        return Err(Error::invalid(format!("matrix dimension {} does not match p = {}", x.dim(), inst.p)));
    }
    if !x.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON documents

/// On-disk form of a [`ProblemInstance`]; matrices are flat row-major arrays.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub family: Family,
    pub p: usize,
    pub s: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub noise_scale: f64,
    #[serde(default)]
    pub noise: Noise,
    pub seed: u64,
    pub constants: AssumptionConstants,
    /// Row-major `X*`. When absent it is regenerated from `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_solution: Option<Vec<f64>>,
}

impl From<&ProblemInstance> for ProblemDocument {
    fn from(inst: &ProblemInstance) -> Self {
        ProblemDocument {
            family: inst.family,
            p: inst.p,
            s: inst.s,
            radius: inst.radius,
            noise_scale: inst.noise_scale,
            noise: inst.noise,
            seed: inst.seed,
            constants: inst.constants,
            true_solution: Some(inst.true_solution.as_slice().to_vec()),
        }
    }
}

impl ProblemDocument {
    pub fn into_instance(self) -> Result<ProblemInstance> {
        let true_solution = match self.true_solution {
            Some(data) => SymMatrix::from_row_major(self.p, data)?,
            None => {
                if self.s == 0 || self.s > self.p {
                    return Err(Error::invalid("rank s must satisfy 1 <= s <= p"));
                }
                random_low_rank(self.p, self.s, self.radius, mix(&[self.seed, TAG_TRUTH]))
            }
        };
        let inst = ProblemInstance {
            family: self.family,
            p: self.p,
            s: self.s,
            radius: self.radius,
            noise_scale: self.noise_scale,
            noise: self.noise,
            seed: self.seed,
            true_solution,
            constants: self.constants,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// On-disk form of a [`SampleBatch`].
///
/// `matrices` holds the `n` observation (Denoising) or measurement (Sensing)
/// matrices back to back, each row-major; `responses` holds `yᵢ` for Sensing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchDocument {
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub matrices: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<f64>,
}

impl From<&SampleBatch> for BatchDocument {
    fn from(b: &SampleBatch) -> Self {
        let mut matrices = Vec::with_capacity(b.len() * b.p * b.p);
        let mut responses = Vec::new();
        for z in &b.scenarios {
            match z {
                Scenario::Denoising { y } => matrices.extend_from_slice(y.as_slice()),
                Scenario::Sensing { a, y } => {
                    matrices.extend_from_slice(a.as_slice());
                    responses.push(*y);
                }
            }
        }
        BatchDocument { family: b.family, p: b.p, n: b.len(), seed: b.seed, matrices, responses }
    }
}

impl BatchDocument {
    pub fn into_batch(self) -> Result<SampleBatch> {
        let pp = self.p * self.p;
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("batch needs n >= 1 and p >= 1"));
        }
        if self.matrices.len() != self.n * pp {
            return Err(Error::invalid(format!(
                "batch matrices hold {} values, expected n*p*p = {}",
                self.matrices.len(),
                self.n * pp
            )));
        }
        if self.matrices.iter().chain(&self.responses).any(|v| !v.is_finite()) {
            return Err(Error::invalid("batch contains non-finite values"));
        }
        let mut scenarios = Vec::with_capacity(self.n);
        match self.family {
            Family::Denoising => {
                for chunk in self.matrices.chunks(pp) {
                    scenarios.push(Scenario::Denoising { y: SymMatrix::from_row_major(self.p, chunk.to_vec())? });
                }
            }
            Family::Sensing => {
                if self.responses.len() != self.n {
                    return Err(Error::invalid("sensing batch needs one response per scenario"));
                }
                for (chunk, &y) in self.matrices.chunks(pp).zip(&self.responses) {
                    scenarios.push(Scenario::Sensing { a: SymMatrix::from_row_major(self.p, chunk.to_vec())?, y });
                }
            }
        }
        Ok(SampleBatch { family: self.family, p: self.p, seed: self.seed, scenarios })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: Family, noise: f64) -> ProblemInstance {
        let mut cfg = ProblemConfig::new(family, 4, 1, 1.0, noise, 7);
        cfg.pilot_samples = 500;
        make_problem_with(&cfg).unwrap()
    }

    #[test]
    fn constructor_contract() {
        let inst = small(Family::Denoising, 0.1);
        assert_eq!(rank_of(&inst.true_solution).unwrap(), 1);
        assert!(eig_sym(&inst.true_solution).unwrap().max_eigenvalue() <= 1.0);
        assert_eq!(inst.constants.u_l, 1.0);

        let full = make_problem(Family::Denoising, 2, 2, 1.0, 0.1, 3).unwrap();
        assert_eq!(rank_of(&full.true_solution).unwrap(), 2);

        assert!(make_problem(Family::Denoising, 2, 3, 1.0, 0.1, 3).is_err());
        assert!(make_problem(Family::Denoising, 2, 1, 0.5, 0.1, 3).is_err());
    }

    #[test]
    fn same_seed_same_truth() {
        let a = small(Family::Sensing, 0.2);
        let b = small(Family::Sensing, 0.2);
        assert_eq!(a, b);
        assert_eq!(a.true_solution.as_slice(), b.true_solution.as_slice());
    }

    #[test]
    fn noiseless_samples_are_exact() {
        let inst = small(Family::Denoising, 0.0);
        let batch = sample(&inst, 5, 1).unwrap();
        for z in &batch.scenarios {
            let Scenario::Denoising { y } = z else { panic!() };
            assert_eq!(y, &inst.true_solution);
        }
        let inst = small(Family::Sensing, 0.0);
        let batch = sample(&inst, 5, 1).unwrap();
        for z in &batch.scenarios {
            let Scenario::Sensing { a, y } = z else { panic!() };
            assert_eq!(*y, a.inner(&inst.true_solution));
            assert!((a.frobenius_norm() - 1.0).abs() < 1e-14);
        }
        assert!(sample(&inst, 0, 1).is_err());
    }

    #[test]
    fn cost_examples() {
        let inst = make_problem(Family::Denoising, 2, 1, 1.0, 0.1, 1).unwrap();
        let eye = SymMatrix::identity(2);
        assert_eq!(cost(&inst, &eye, &Scenario::Denoising { y: eye.clone() }), 0.0);
        assert_eq!(cost(&inst, &SymMatrix::zeros(2), &Scenario::Denoising { y: eye.clone() }), 1.0);
        let a = SymMatrix::from_diag(&[1.0, 0.0]);
        assert_eq!(cost(&inst, &eye, &Scenario::Sensing { a, y: 1.0 }), 0.0);
    }

    #[test]
    fn denoising_gradient_vanishes_at_mean() {
        let inst = small(Family::Denoising, 0.3);
        let batch = sample(&inst, 8, 2).unwrap();
        let obj = Objective::new(&inst, &batch).unwrap();
        let ybar = obj.denoising_mean().unwrap().clone();
        assert!(empirical_gradient(&inst, &ybar, &batch).unwrap().max_abs() < 1e-15);
        let x = SymMatrix::identity(4);
        let direct = empirical_objective(&inst, &x, &batch).unwrap();
        assert!((obj.value(&x) - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn single_scenario_objective_is_its_cost() {
        let inst = small(Family::Sensing, 0.3);
        let batch = sample(&inst, 1, 9).unwrap();
        let x = SymMatrix::identity(4).scale(0.3);
        let f = empirical_objective(&inst, &x, &batch).unwrap();
        assert_eq!(f, cost(&inst, &x, &batch.scenarios[0]));
        let empty = SampleBatch { family: Family::Sensing, p: 4, seed: 0, scenarios: vec![] };
        assert!(empirical_objective(&inst, &x, &empty).is_err());
        assert!(empirical_gradient(&inst, &x, &empty).is_err());
    }

    #[test]
    fn denoising_risk_is_exact() {
        let inst = small(Family::Denoising, 0.5);
        let r = true_risk(&inst, &inst.true_solution).unwrap();
        assert_eq!(r.value, 0.5 * 16.0 * 0.25);
        assert_eq!(excess_risk(&inst, &inst.true_solution).unwrap().value, 0.0);
        let mut x = inst.true_solution.clone();
        x.set(0, 0, x.get(0, 0) + 0.2);
        assert!((excess_risk(&inst, &x).unwrap().value - 0.02).abs() < 1e-15);
        let quiet = small(Family::Denoising, 0.0);
        assert_eq!(true_risk(&quiet, &quiet.true_solution).unwrap().value, 0.0);
    }

    #[test]
    fn batch_document_round_trip() {
        let inst = small(Family::Sensing, 0.1);
        let batch = sample(&inst, 3, 4).unwrap();
        let doc = BatchDocument::from(&batch);
        assert_eq!(doc.matrices.len(), 3 * 16);
        let text = serde_json::to_string(&doc).unwrap();
        let back: BatchDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_batch().unwrap(), batch);

        let pdoc = ProblemDocument::from(&inst);
        let text = serde_json::to_string(&pdoc).unwrap();
        let back: ProblemDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_instance().unwrap(), inst);
    }

    #[test]
    fn psi1_estimate_of_constant_is_its_magnitude() {
        assert!((psi1_moment_estimate(&[2.0, -2.0, 2.0, -2.0]) - 2.0).abs() < 1e-15);
    }
}
