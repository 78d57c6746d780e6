//! Cross-checks between the samplers, the quadrature and the closed forms.
//!
//! Every check reports named metrics with their tolerance. The `fast` suite
//! runs all checks with reduced Monte Carlo sample sizes; `full` uses the
//! reference sizes.

use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use treedyn::analytic::{self, GridParams, FlowModel};
use treedyn::clocks::{derive_seed, ClockStream};
use treedyn::coalescing::{self, ParticleQuery};
use treedyn::ising::{self, CouplingSchedule};
use treedyn::stats::binomial_upper_tail;
use treedyn::tree::TreeWindow;
use treedyn::{voter, CostGuards};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Report, Table};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const CHECK_COUNT: u32 = 12;

/// Monte Carlo acceptance band in standard errors.
const Z_BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Fast,
    Full,
}

impl Scale {
    pub fn parse(suite: &str) -> Result<Self, CliError> {
        match suite {
            "fast" => Ok(Self::Fast),
            "full" => Ok(Self::Full),
            other => Err(CliError::Config(format!(
                "unknown verify suite {other:?}; expected fast or full"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fast => "fast",
            Self::Full => "full",
        }
    }

    fn pick<T>(self, fast: T, full: T) -> T {
        match self {
            Self::Fast => fast,
            Self::Full => full,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub metrics: Vec<Metric>,
}

struct Check {
    id: u32,
    name: &'static str,
    metrics: Vec<Metric>,
}

impl Check {
    fn new(id: u32, name: &'static str) -> Self {
        Self { id, name, metrics: Vec::new() }
    }

    fn below(&mut self, name: impl Into<String>, value: f64, limit: f64) -> &mut Self {
        self.push(name, value, format!("< {limit:e}"), value < limit)
    }

    fn within(&mut self, name: impl Into<String>, value: f64, target: f64, tol: f64) -> &mut Self {
        let ok = (value - target).abs() <= tol;
        self.push(name, value, format!("{target} ± {tol:e}"), ok)
    }

    fn between(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> &mut Self {
        self.push(name, value, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&value))
    }

    fn push(&mut self, name: impl Into<String>, value: f64, tolerance: String, passed: bool) -> &mut Self {
        self.metrics.push(Metric { name: name.into(), value, tolerance, passed });
        self
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            id: self.id,
            name: self.name.into(),
            passed: self.metrics.iter().all(|m| m.passed),
            metrics: self.metrics,
        }
    }
}

/// Runs check `id` (1 to 12).
pub fn run_check(id: u32, scale: Scale, seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let seed = derive_seed(seed, u64::from(id));
    Ok(match id {
        1 => one_layer_law(seed, guards)?,
        2 => closed_form_sanity()?,
        3 => fixed_point_residual()?,
        4 => agreement_triangle()?,
        5 => monte_carlo_vs_quadrature(scale, seed, guards)?,
        6 => majority_perturbation(),
        7 => voter_mixing(scale, seed, guards)?,
        8 => disagreement_bound(scale, seed, guards)?,
        9 => infection(scale, seed, guards)?,
        10 => determinism(seed, guards)?,
        11 => monotonicity(scale, seed, guards)?,
        12 => lattice(seed, guards)?,
        _ => return Err(CliError::Config(format!("no check {id}"))),
    })
}

fn one_layer_law(seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(1, "one-layer flow law");
    let horizons = [0.5, 1.0, 2.0];
    let est = coalescing::estimate_rho_curve(2, 1, &horizons, 100_000, seed, guards)?;
    for (t, e) in horizons.iter().zip(&est) {
        let z = (e.value - (1.0 - (-t).exp())) / e.std_error;
        c.between(format!("z(T={t})"), z, -Z_BAND, Z_BAND);
    }
    Ok(c.finish())
}

fn closed_form_sanity() -> Result<CheckResult, CliError> {
    let mut c = Check::new(2, "closed form sanity");
    c.within("rho(0)", analytic::closed_form_rho_inf(0.0), 0.0, 1e-12);
    let h = 1e-5;
    let slope = (analytic::closed_form_rho_inf(h) - analytic::closed_form_rho_inf(-h)) / (2.0 * h);
    c.within("rho'(0)", slope, 3f64.sqrt().recip(), 1e-6);
    let closed = analytic::closed_form_grid(GridParams::new(1e-3, 15.0)?)?;
    c.below("ode_residual", analytic::ode_residual(&FlowModel::coalescing(), &closed), 1e-5);
    Ok(c.finish())
}

fn fixed_point_residual() -> Result<CheckResult, CliError> {
    let mut c = Check::new(3, "fixed-point residual");
    let closed = analytic::closed_form_grid(GridParams::new(0.01, 15.0)?)?;
    let r = analytic::fixed_point_residual(&FlowModel::coalescing(), &closed)?;
    c.below("sup|chi(rho) - rho|", r, 5e-3);
    Ok(c.finish())
}

fn agreement_triangle() -> Result<CheckResult, CliError> {
    let mut c = Check::new(4, "agreement triangle");
    let params = GridParams::default();
    let model = FlowModel::coalescing();
    let limit = analytic::chi_limit(&model, params, 1e-10, 500)?.function;
    let ode = analytic::solve_heteroclinic(&model, params)?;
    let closed = analytic::closed_form_grid(params)?;
    c.below("limit-ode", limit.sup_distance(&ode, 10.0), 5e-3);
    c.below("limit-closed", limit.sup_distance(&closed, 10.0), 5e-3);
    c.below("ode-closed", ode.sup_distance(&closed, 10.0), 5e-3);
    Ok(c.finish())
}

fn monte_carlo_vs_quadrature(scale: Scale, seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(5, "Monte Carlo vs quadrature");
    let params = GridParams::default();
    // The maximal element is already the one-layer curve, so seven
    // applications give the eight-layer curve.
    let coal = analytic::chi_iterate(&FlowModel::coalescing(), 7, params)?;
    let want = coal[6].value_at(1.0);
    let e = coalescing::estimate_rho(8, 1.0, scale.pick(20_000, 100_000), derive_seed(seed, 0), guards)?;
    c.between("z(coalescing n=8, T=1)", (e.value - want) / e.std_error, -Z_BAND, Z_BAND);
    let vot = analytic::chi_iterate(&FlowModel::voter(), 6, params)?;
    let want = 1.0 - vot[5].value_at(1.0);
    let e = voter::estimate_autocorr(6, 1.0, scale.pick(10_000, 100_000), derive_seed(seed, 1), guards)?;
    c.between("z(voter n=6, T=1)", (e.value - want) / e.std_error, -Z_BAND, Z_BAND);
    Ok(c.finish())
}

fn majority_perturbation() -> CheckResult {
    let mut c = Check::new(6, "majority perturbation polynomial");
    let mut worst: f64 = 0.0;
    for i in 0..=10 {
        let p = f64::from(i) / 10.0;
        let mut brute = 0.0;
        for coins in 0..8u32 {
            for flips in 0..8u32 {
                let k = flips.count_ones() as i32;
                if (coins.count_ones() >= 2) != ((coins ^ flips).count_ones() >= 2) {
                    brute += p.powi(k) * (1.0 - p).powi(3 - k) / 8.0;
                }
            }
        }
        worst = worst.max((voter::majority_flip_prob(p) - brute).abs());
    }
    c.below("max |M(p) - enumeration|", worst, 1e-12);
    c.finish()
}

fn voter_mixing(scale: Scale, seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(7, "voter mixing rate");
    let rho = analytic::solve_heteroclinic(&FlowModel::voter(), GridParams::new(0.01, 30.0)?)?;
    c.within("ode slope on [10, 20]", analytic::tail_decay_slope(&rho, 10.0, 20.0)?, -0.5, 0.01);
    let lags = [2.0, 3.0, 4.0, 5.0, 6.0];
    let est = voter::estimate_autocorr_curve(6, &lags, scale.pick(20_000, 50_000), seed, guards)?;
    let points: Vec<(f64, f64)> = lags.iter().zip(&est).map(|(t, e)| (*t, e.value)).collect();
    c.between("simulated slope on [2, 6]", analytic::log_slope(&points)?, -1.0, -0.25);
    Ok(c.finish())
}

fn disagreement_bound(scale: Scale, seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(8, "disagreement creation bound");
    let schedule = CouplingSchedule::k_squared();
    for (i, beta) in [1.0, 3.0].into_iter().enumerate() {
        let s = derive_seed(seed, i as u64);
        let tallies = ising::coupled_replicas(8, beta, &schedule, 50.0, scale.pick(1, 4), s, guards)?;
        let p = tallies
            .iter()
            .map(|t| binomial_upper_tail(t.creations, t.opportunities, t.bound))
            .fold(1.0, f64::min);
        c.push(format!("min layer p-value (beta={beta})"), p, "> 1e-2".into(), p > 0.01);
    }
    Ok(c.finish())
}

fn infection(scale: Scale, seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(9, "infection boundedness");
    let schedule = CouplingSchedule::k_squared();
    let sum = ising::infection_rate_sum(2.0, &schedule, 1e-6)?;
    c.within("rate sum (beta=2)", sum.sum, 0.018353, 1e-6);
    let runs = ising::infection_replicas(12, 2.0, &schedule, 200.0, scale.pick(8, 32), seed, guards)?;
    let mean = runs.iter().map(|r| r.time_average).sum::<f64>() / runs.len() as f64;
    c.below("mean time-averaged infected count", mean, 0.1);
    let violations: u64 = runs.iter().map(|r| r.closure_violations).sum();
    c.push("closure violations", violations as f64, "= 0".into(), violations == 0);
    Ok(c.finish())
}

/// Reruns a few stochastic estimators on one thread and on eight and
/// compares the outputs bit for bit.
fn determinism(seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(10, "worker-count independence");
    let work = || -> Result<Vec<u64>, CliError> {
        let mut bits = Vec::new();
        let coal = coalescing::estimate_rho_curve(2, 4, &[0.5, 1.0, 2.0], 4_000, seed, guards)?;
        bits.extend(coal.iter().map(|e| e.value.to_bits()));
        let vot = voter::estimate_autocorr_curve(3, &[0.5, 1.0], 2_000, seed, guards)?;
        bits.extend(vot.iter().map(|e| e.value.to_bits()));
        let runs = ising::infection_replicas(8, 1.0, &CouplingSchedule::k_squared(), 20.0, 4, seed, guards)?;
        bits.extend(runs.iter().map(|r| r.time_average.to_bits()));
        Ok(bits)
    };
    let in_pool = |threads: usize| -> Result<Vec<u64>, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(work)
    };
    let one = in_pool(1)?;
    let eight = in_pool(8)?;
    let mismatches = one.iter().zip(&eight).filter(|(a, b)| a != b).count();
    c.push("mismatched values (1 vs 8 workers)", mismatches as f64, "= 0".into(), mismatches == 0);
    Ok(c.finish())
}

fn monotonicity(scale: Scale, seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(11, "monotonicity");
    let params = GridParams::default();
    for model in [FlowModel::coalescing(), FlowModel::voter()] {
        let it = analytic::chi_iterate(&model, 10, params)?;
        let rise = it
            .windows(2)
            .flat_map(|w| w[1].values().iter().zip(w[0].values()).map(|(b, a)| b - a))
            .fold(f64::NEG_INFINITY, f64::max);
        c.below(format!("max iterate increase ({})", model.kind().name()), rise, 1e-9);
    }

    let anchor = 7;
    let mut violations = 0u64;
    for s in 0..10_000u64 {
        let clock_seed = derive_seed(seed, s);
        let mut previous = false;
        for base in 0..anchor {
            let w = TreeWindow::new(2, anchor, base)?;
            let flow = ParticleQuery::new(w, ClockStream::new(clock_seed)).flow_event(1.0)?;
            violations += u64::from(previous && !flow);
            previous = flow;
        }
    }
    c.push("shared-clock coupling violations", violations as f64, "= 0".into(), violations == 0);

    let samples = scale.pick(5_000, 20_000);
    let est = (1..=8)
        .map(|n| coalescing::estimate_rho(n, 1.0, samples, derive_seed(seed, 100 + u64::from(n)), guards))
        .collect::<Result<Vec<_>, _>>()?;
    let worst = est
        .windows(2)
        .map(|w| (w[1].value - w[0].value) / w[0].std_error.hypot(w[1].std_error))
        .fold(f64::NEG_INFINITY, f64::max);
    c.below("max z of increase in n", worst, Z_BAND);
    Ok(c.finish())
}

fn lattice(seed: u64, guards: &CostGuards) -> Result<CheckResult, CliError> {
    let mut c = Check::new(12, "torus density decay");
    let d = coalescing::lattice_density_decay(32, 2, 50, seed, guards)?;
    let rises = d.windows(2).filter(|w| w[1] > w[0]).count();
    c.push("density increases", rises as f64, "= 0".into(), rises == 0);
    c.below("final density", *d.last().unwrap(), 0.2);
    Ok(c.finish())
}

/// Outcome of a suite: the report, per-check wall-clock seconds, and
/// whether everything passed.
pub struct SuiteOutcome {
    pub report: Report,
    pub elapsed: Vec<(String, f64)>,
    pub passed: bool,
}

pub fn run_suite(config: &mut ExperimentConfig, guards: CostGuards, suite: &str) -> Result<SuiteOutcome, CliError> {
    let scale = Scale::parse(suite)?;
    let seed = *config.sampling.seed.get_or_insert(DEFAULT_SEED);
    let mut results = Vec::new();
    let mut elapsed = Vec::new();
    for id in 1..=CHECK_COUNT {
        let start = Instant::now();
        let r = run_check(id, scale, seed, &guards)?;
        elapsed.push((format!("{id}:{}", r.name), start.elapsed().as_secs_f64()));
        results.push(r);
    }
    let passed = results.iter().all(|r| r.passed);
    let mut table = Table::new(
        format!("verify-{}", scale.name()),
        &["id", "check", "metric", "value", "tolerance", "passed"],
    );
    for r in &results {
        for m in &r.metrics {
            table.push(vec![
                r.id.into(),
                r.name.clone().into(),
                m.name.clone().into(),
                m.value.into(),
                m.tolerance.clone().into(),
                m.passed.into(),
            ]);
        }
    }
    let summary = json!({
        "suite": scale.name(),
        "passed": passed,
        "failed": results.iter().filter(|r| !r.passed).map(|r| r.id).collect::<Vec<_>>(),
        "checks": results,
    });
    let report = Report {
        name: format!("verify-{}", scale.name()),
        config: config.clone(),
        guards,
        summary,
        tables: vec![table],
    };
    Ok(SuiteOutcome { report, elapsed, passed })
}
