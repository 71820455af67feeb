//! Monte Carlo sweeps over `(p, n)` comparing SAA, nuclear-only and RSAA.
//!
//! Every `(p, replication)` pair gets its own problem and every `(p, n,
//! replication)` cell its own batch; the three methods share both. Seeds come
//! from [`crate::rng::mix`] so a cell's output depends only on `base_seed` and
//! its key, never on scheduling. Records are produced in a fixed
//! `(p, n, replication, method)` order whatever the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::McpParams;
use crate::problems::{
    excess_risk_with, make_problem_with, sample, Family, Noise, ProblemConfig, ProblemInstance, DEFAULT_EVAL_SAMPLES,
    DEFAULT_PILOT_SAMPLES,
};
use crate::rng::mix;
use crate::solvers::{solve_nuclear, solve_pipeline, solve_saa, Method, SolveReport, SolverConfig};
use crate::spectral::SymMatrix;
use crate::theory::{inputs_for, rank_bound, tuned_mcp};

pub const CSV_HEADER: &str = "family,p,n,s,replication,method,lambda,excess_risk,rank,cert_passed,converged,wall_time_s";

/// Domain tags keeping problem and batch seeds apart.
const PROBLEM_TAG: u64 = 0x5052_4f42;
const BATCH_TAG: u64 = 0x4241_5443;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSource {
    /// [`tuned_lambda`] with the problem's estimated constants.
    #[default]
    Theory,
    Manual(f64),
}

/// Accuracy level for [`fit_scaling`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetEps {
    Fixed(f64),
    /// Mean excess risk of `method` at the `(p, n)` cell, read off the sweep.
    Reference { method: Method, p: usize, n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    pub p_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub s: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub noise_scale: f64,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub solver_cfg: SolverConfig,
    #[serde(default)]
    pub lambda_source: LambdaSource,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub target_eps: Option<TargetEps>,
    #[serde(default = "default_pilot")]
    pub pilot_samples: usize,
    /// Monte Carlo size for Sensing excess risk; Denoising is exact.
    #[serde(default = "default_eval")]
    pub eval_samples: usize,
    /// Record wall-clock times. Off by default so outputs are byte-reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_replications() -> usize {
    20
}

fn default_pilot() -> usize {
    DEFAULT_PILOT_SAMPLES
}

fn default_eval() -> usize {
    DEFAULT_EVAL_SAMPLES
}

impl ExperimentSpec {
    pub fn new(family: Family, p_grid: Vec<usize>, n_grid: Vec<usize>, s: usize, radius: f64, noise_scale: f64) -> Self {
        ExperimentSpec {
            family,
            p_grid,
            n_grid,
            s,
            radius,
            noise_scale,
            noise: Noise::default(),
            replications: default_replications(),
            base_seed: 0,
            solver_cfg: SolverConfig::default(),
            lambda_source: LambdaSource::Theory,
            output_path: None,
            target_eps: None,
            pilot_samples: default_pilot(),
            eval_samples: default_eval(),
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::invalid("p_grid and n_grid must be nonempty"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.s == 0 || self.p_grid.iter().any(|&p| p < self.s) {
            return Err(Error::invalid("need 1 <= s <= p for every p in the grid"));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("R must be positive"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid("noise_scale must be nonnegative"));
        }
        if let LambdaSource::Manual(v) = self.lambda_source {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("manual lambda must be nonnegative"));
            }
        }
        if self.eval_samples == 0 {
            return Err(Error::invalid("eval_samples must be positive"));
        }
        self.solver_cfg.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub s: usize,
    pub replication: usize,
    pub method: Method,
    pub lambda: f64,
    /// NaN when the solve failed.
    pub excess_risk: f64,
    /// Monte Carlo standard error of `excess_risk` (zero for Denoising).
    pub excess_risk_stderr: f64,
    pub rank: usize,
    /// Only RSAA carries a certificate.
    pub certificate_passed: Option<bool>,
    pub converged: bool,
    pub wall_time_s: f64,
    /// `p̃_u` at `ε = n^{−1/3}` with this replication's estimated constants (RSAA only).
    pub rank_bound: Option<u64>,
    #[serde(skip)]
    pub solution: Option<SymMatrix>,
    /// Failure message when the solve errored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub p: usize,
    pub n: usize,
    pub method: Method,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub method: Method,
    /// `None` with fewer than two usable `p`.
    pub slope: Option<f64>,
    /// `None` with fewer than three usable `p`.
    pub stderr: Option<f64>,
    /// `(p, n*(p))` used in the regression.
    pub points: Vec<(usize, f64)>,
    /// `p` where the target was never reached.
    pub excluded_p: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub p: usize,
    pub n: usize,
    pub max_rank: usize,
    pub min_rank_bound: u64,
    pub max_rank_bound: u64,
    /// Share of RSAA records with `rank > p̃_u − 1`.
    pub violation_fraction: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub family: Family,
    pub cells: Vec<CellSummary>,
    pub target_eps: Option<f64>,
    pub fits: Vec<ScalingFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    pub rank_table: Vec<RankRow>,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: ExperimentSummary,
}

pub fn problem_seed(base_seed: u64, p: usize, replication: usize) -> u64 {
    mix(&[PROBLEM_TAG, base_seed, p as u64, replication as u64])
}

pub fn batch_seed(base_seed: u64, p: usize, n: usize, replication: usize) -> u64 {
    mix(&[BATCH_TAG, base_seed, p as u64, n as u64, replication as u64])
}

/// The problem every cell of `(p, replication)` is drawn from.
pub fn build_problem(spec: &ExperimentSpec, p: usize, replication: usize) -> Result<ProblemInstance> {
    let mut cfg = ProblemConfig::new(
        spec.family,
        p,
        spec.s,
        spec.radius,
        spec.noise_scale,
        problem_seed(spec.base_seed, p, replication),
    );
    cfg.noise = spec.noise;
    cfg.pilot_samples = spec.pilot_samples;
    make_problem_with(&cfg)
}

/// MCP parameters a cell uses.
pub fn cell_mcp(spec: &ExperimentSpec, inst: &ProblemInstance, n: usize) -> Result<McpParams> {
    match spec.lambda_source {
        LambdaSource::Manual(v) => McpParams::tuned(v, inst.constants.u_l),
        LambdaSource::Theory => tuned_mcp(inst, n.max(2)),
    }
}

struct Cell<'a> {
    spec: &'a ExperimentSpec,
    inst: &'a ProblemInstance,
    n: usize,
    replication: usize,
}

impl Cell<'_> {
    fn record(&self, method: Method, lambda: f64) -> ExperimentRecord {
        ExperimentRecord {
            family: self.spec.family,
            p: self.inst.p,
            n: self.n,
            s: self.spec.s,
            replication: self.replication,
            method,
            lambda,
            excess_risk: f64::NAN,
            excess_risk_stderr: f64::NAN,
            rank: 0,
            certificate_passed: None,
            converged: false,
            wall_time_s: 0.0,
            rank_bound: None,
            solution: None,
            error: None,
        }
    }

    fn fill(&self, rec: &mut ExperimentRecord, outcome: Result<SolveReport>, started: Instant) {
        if self.spec.record_wall_time {
            rec.wall_time_s = started.elapsed().as_secs_f64();
        }
        let report = match outcome {
            Ok(r) => r,
            Err(e) => {
                rec.error = Some(e.to_string());
                return;
            }
        };
        match excess_risk_with(self.inst, &report.solution, self.spec.eval_samples) {
            Ok(risk) => {
                rec.excess_risk = risk.value;
                rec.excess_risk_stderr = risk.std_error;
                rec.converged = report.converged;
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec.rank = report.rank;
        if let Some(cert) = &report.certificate {
            rec.certificate_passed = Some(cert.passed);
            // An uncertified RSAA output does not count as a successful solve.
            rec.converged &= cert.passed;
        }
        rec.solution = Some(report.solution);
    }

    fn run(&self) -> Vec<ExperimentRecord> {
        let cfg = &self.spec.solver_cfg;
        let prm = cell_mcp(self.spec, self.inst, self.n);
        let lambda = prm.as_ref().map(|m| m.lambda()).unwrap_or(f64::NAN);
        let mut saa = self.record(Method::Saa, 0.0);
        let mut nuc = self.record(Method::Nuclear, lambda);
        let mut rsaa = self.record(Method::Rsaa, lambda);

        let batch = match sample(self.inst, self.n, batch_seed(self.spec.base_seed, self.inst.p, self.n, self.replication)) {
            Ok(b) => b,
            Err(e) => {
                for r in [&mut saa, &mut nuc, &mut rsaa] {
                    r.error = Some(e.to_string());
                }
                return vec![saa, nuc, rsaa];
            }
        };

        let t = Instant::now();
        self.fill(&mut saa, solve_saa(self.inst, &batch, cfg), t);

        match prm {
            Ok(prm) => {
                let t = Instant::now();
                match solve_pipeline(self.inst, &batch, &prm, cfg) {
                    Ok((n_rep, r_rep)) => {
                        let elapsed = t.elapsed();
                        // Split the pipeline time by iteration count.
                        let share = n_rep.iterations as f64 / (n_rep.iterations + r_rep.iterations).max(1) as f64;
                        self.fill(&mut nuc, Ok(n_rep), t);
                        self.fill(&mut rsaa, Ok(r_rep), t);
                        if self.spec.record_wall_time {
                            nuc.wall_time_s = elapsed.as_secs_f64() * share;
                            rsaa.wall_time_s = elapsed.as_secs_f64() * (1.0 - share);
                        }
                    }
                    Err(e) => {
                        // Keep the nuclear record when only the second stage failed.
                        let t = Instant::now();
                        self.fill(&mut nuc, solve_nuclear(self.inst, &batch, prm.lambda(), cfg), t);
                        rsaa.error = Some(e.to_string());
                    }
                }
                let inputs = inputs_for(self.inst, self.n.max(2));
                rsaa.rank_bound = rank_bound(&inputs, 1.0 / (inputs.n as f64).cbrt()).ok();
            }
            Err(e) => {
                nuc.error = Some(e.to_string());
                rsaa.error = Some(e.to_string());
            }
        }
        vec![saa, nuc, rsaa]
    }
}

/// Run the sweep on `workers` threads (`0` uses the rayon default).
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentOutput> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::NumericalFailure(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(spec))
}

fn run_in_pool(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let keys: Vec<(usize, usize)> = spec
        .p_grid
        .iter()
        .flat_map(|&p| (0..spec.replications).map(move |r| (p, r)))
        .collect();
    let problems: Vec<ProblemInstance> =
        keys.par_iter().map(|&(p, r)| build_problem(spec, p, r)).collect::<Result<_>>()?;
    let index: BTreeMap<(usize, usize), &ProblemInstance> = keys.iter().copied().zip(problems.iter()).collect();

    let mut cells = Vec::new();
    for &p in &spec.p_grid {
        for &n in &spec.n_grid {
            for r in 0..spec.replications {
                cells.push(Cell { spec, inst: index[&(p, r)], n, replication: r });
            }
        }
    }
    let records: Vec<ExperimentRecord> = cells.par_iter().flat_map_iter(|c| c.run()).collect();
    let summary = summarize(spec, &records);
    Ok(ExperimentOutput { records, summary })
}

fn method_order(m: Method) -> usize {
    match m {
        Method::Saa => 0,
        Method::Nuclear => 1,
        Method::Rsaa => 2,
    }
}

fn usable(r: &ExperimentRecord) -> bool {
    r.converged && r.excess_risk.is_finite()
}

/// Mean and standard error of excess risk per `(p, n, method)`, excluding failed solves.
pub fn cell_summaries(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    // (p, n, method order) -> (method, usable excess risks, excluded count)
    type Group = (Method, Vec<f64>, usize);
    let mut groups: BTreeMap<(usize, usize, usize), Group> = BTreeMap::new();
    for r in records {
        let e = groups
            .entry((r.p, r.n, method_order(r.method)))
            .or_insert_with(|| (r.method, Vec::new(), 0));
        if usable(r) {
            e.1.push(r.excess_risk);
        } else {
            e.2 += 1;
        }
    }
    groups
        .into_iter()
        .map(|((p, n, _), (method, values, excluded))| {
            let (mean, stderr) = mean_stderr(&values);
            CellSummary { p, n, method, mean, stderr, count: values.len(), excluded }
        })
        .collect()
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

fn resolve_target(target: &TargetEps, cells: &[CellSummary]) -> Option<f64> {
    match *target {
        TargetEps::Fixed(v) => Some(v),
        TargetEps::Reference { method, p, n } => cells
            .iter()
            .find(|c| c.method == method && c.p == p && c.n == n && c.count > 0)
            .map(|c| c.mean),
    }
}

fn summarize(spec: &ExperimentSpec, records: &[ExperimentRecord]) -> ExperimentSummary {
    let cells = cell_summaries(records);
    let target_eps = spec.target_eps.as_ref().and_then(|t| resolve_target(t, &cells));
    let (fits, fit_error) = match target_eps {
        Some(eps) => match fit_scaling(records, eps) {
            Ok(f) => (f, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        },
        None if spec.target_eps.is_some() => (Vec::new(), Some("reference cell has no usable records".into())),
        None => (Vec::new(), None),
    };
    ExperimentSummary {
        family: spec.family,
        cells,
        target_eps,
        fits,
        fit_error,
        rank_table: rank_vs_bound(records),
        failures: records.iter().filter(|r| !usable(r)).count(),
    }
}

/// Smallest `n` whose mean excess risk reaches `eps`, linear in `ln n` between grid points.
fn required_n(curve: &[(usize, f64)], eps: f64) -> Option<f64> {
    let k = curve.iter().position(|&(_, m)| m <= eps)?;
    if k == 0 {
        return Some(curve[0].0 as f64);
    }
    let (n0, m0) = curve[k - 1];
    let (n1, m1) = curve[k];
    let (l0, l1) = ((n0 as f64).ln(), (n1 as f64).ln());
    let t = (m0 - eps) / (m0 - m1);
    Some((l0 + t * (l1 - l0)).exp())
}

/// Exponent of the required sample size in `p`, per method.
///
/// For each method and `p` the smallest `n` reaching `target_eps` is found on
/// the grid, then `ln n*` is regressed on `ln p` by least squares.
pub fn fit_scaling(records: &[ExperimentRecord], target_eps: f64) -> Result<Vec<ScalingFit>> {
    if !target_eps.is_finite() {
        return Err(Error::invalid("target_eps must be finite"));
    }
    let cells = cell_summaries(records);
    let mut methods: Vec<Method> = cells.iter().map(|c| c.method).collect();
    methods.sort_by_key(|&m| method_order(m));
    methods.dedup();

    let mut fits = Vec::new();
    for method in methods {
        let mut curves: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for c in cells.iter().filter(|c| c.method == method && c.count > 0) {
            curves.entry(c.p).or_default().push((c.n, c.mean));
        }
        let wide = curves.values().filter(|c| c.len() >= 4).count();
        if wide < 3 {
            return Err(Error::invalid(format!(
                "{}: need at least 3 values of p with 4 values of n each",
                method.as_str()
            )));
        }
        let mut points = Vec::new();
        let mut excluded_p = Vec::new();
        for (&p, curve) in &curves {
            match required_n(curve, target_eps) {
                Some(n) => points.push((p, n)),
                None => excluded_p.push(p),
            }
        }
        let xy: Vec<(f64, f64)> = points.iter().map(|&(p, n)| ((p as f64).ln(), n.ln())).collect();
        let (slope, stderr) = ols_slope(&xy);
        fits.push(ScalingFit { method, slope, stderr, points, excluded_p });
    }
    Ok(fits)
}

fn ols_slope(xy: &[(f64, f64)]) -> (Option<f64>, Option<f64>) {
    let m = xy.len();
    if m < 2 {
        return (None, None);
    }
    let mx = xy.iter().map(|v| v.0).sum::<f64>() / m as f64;
    let my = xy.iter().map(|v| v.1).sum::<f64>() / m as f64;
    let sxx: f64 = xy.iter().map(|v| (v.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (None, None);
    }
    let sxy: f64 = xy.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum();
    let slope = sxy / sxx;
    if m < 3 {
        return (Some(slope), None);
    }
    let icept = my - slope * mx;
    let ssr: f64 = xy.iter().map(|v| (v.1 - icept - slope * v.0).powi(2)).sum();
    (Some(slope), Some((ssr / (m - 2) as f64 / sxx).sqrt()))
}

/// Empirical RSAA rank against `p̃_u` per `(p, n)`.
pub fn rank_vs_bound(records: &[ExperimentRecord]) -> Vec<RankRow> {
    let mut rows: BTreeMap<(usize, usize), RankRow> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == Method::Rsaa) {
        let Some(bound) = r.rank_bound else { continue };
        if r.solution.is_none() && r.error.is_some() {
            continue;
        }
        let row = rows.entry((r.p, r.n)).or_insert(RankRow {
            p: r.p,
            n: r.n,
            max_rank: 0,
            min_rank_bound: u64::MAX,
            max_rank_bound: 0,
            violation_fraction: 0.0,
            count: 0,
        });
        row.max_rank = row.max_rank.max(r.rank);
        row.min_rank_bound = row.min_rank_bound.min(bound);
        row.max_rank_bound = row.max_rank_bound.max(bound);
        // Accumulate violations in the fraction slot, normalized below.
        if r.rank as u64 + 1 > bound {
            row.violation_fraction += 1.0;
        }
        row.count += 1;
    }
    rows.into_values()
        .map(|mut row| {
            row.violation_fraction /= row.count as f64;
            row
        })
        .collect()
}

/// `%.12g`: 12 significant digits, trailing zeros dropped.
pub fn format_g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mant.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    let mut buf = String::with_capacity(64 * (records.len() + 1));
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for r in records {
        let cert = match r.certificate_passed {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        let _ = writeln!(
            buf,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.family.as_str(),
            r.p,
            r.n,
            r.s,
            r.replication,
            r.method.as_str(),
            format_g12(r.lambda),
            format_g12(r.excess_risk),
            r.rank,
            cert,
            r.converged,
            format_g12(r.wall_time_s),
        );
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// Write `records.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("records.csv");
    let json = dir.join("summary.json");
    write_csv(&output.records, std::io::BufWriter::new(std::fs::File::create(&csv)?))?;
    let text = serde_json::to_string_pretty(&output.summary)?;
    std::fs::write(&json, text + "\n")?;
    Ok((csv, json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_formatting() {
        assert_eq!(format_g12(0.0), "0");
        assert_eq!(format_g12(1.0), "1");
        assert_eq!(format_g12(0.1), "0.1");
        assert_eq!(format_g12(-2.5), "-2.5");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(123456789012.0), "123456789012");
        assert_eq!(format_g12(1234567890123.0), "1.23456789012e+12");
        assert_eq!(format_g12(1.5e-7), "1.5e-07");
        assert_eq!(format_g12(1e-5), "1e-05");
        assert_eq!(format_g12(1e-4), "0.0001");
        assert_eq!(format_g12(f64::NAN), "nan");
    }

    #[test]
    fn seeds_separate_keys() {
        assert_ne!(problem_seed(1, 8, 0), problem_seed(1, 8, 1));
        assert_ne!(batch_seed(1, 8, 25, 0), batch_seed(1, 8, 50, 0));
        assert_eq!(batch_seed(42, 16, 100, 3), batch_seed(42, 16, 100, 3));
    }

    #[test]
    fn required_n_interpolates_on_log_n() {
        let curve = [(10, 4.0), (100, 2.0), (1000, 0.5)];
        assert_eq!(required_n(&curve, 5.0), Some(10.0));
        let n = required_n(&curve, 3.0).unwrap();
        assert!((n - 10f64.powf(1.5)).abs() < 1e-9);
        assert_eq!(required_n(&curve, 0.1), None);
    }

    #[test]
    fn ols_exact_line() {
        let xy: Vec<(f64, f64)> = (1..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (s, e) = ols_slope(&xy);
        assert!((s.unwrap() - 2.0).abs() < 1e-14);
        assert!(e.unwrap() < 1e-7);
    }

    #[test]
    fn spec_json_defaults() {
        let text = r#"{"family":"denoising","p_grid":[4],"n_grid":[5],"s":1,"R":2.0,
                       "noise_scale":0.1,"base_seed":3,"lambda_source":{"manual":0.2},
                       "target_eps":{"reference":{"method":"saa","p":4,"n":5}}}"#;
        let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.replications, 20);
        assert_eq!(spec.lambda_source, LambdaSource::Manual(0.2));
        assert!(spec.validate().is_ok());
        let mut bad = spec.clone();
        bad.replications = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tiny_sweep_is_deterministic() {
        let mut spec = ExperimentSpec::new(Family::Denoising, vec![4], vec![5, 10], 1, 2.0, 0.1);
        spec.replications = 2;
        spec.pilot_samples = 200;
        let a = run_experiment(&spec, 1).unwrap();
        let b = run_experiment(&spec, 3).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_csv(&a.records, &mut ca).unwrap();
        write_csv(&b.records, &mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.records.len(), 12);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(!text.contains('\r'));
    }
}
