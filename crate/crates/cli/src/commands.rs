//! Command implementations. Each fills the defaults it uses into the
//! configuration and returns a report.

use std::path::Path;

use serde_json::{json, Value};
use treedyn::analytic::{self, GridFunction, GridParams, FlowModel};
use treedyn::ising::{self, CouplingSchedule};
use treedyn::stats::binomial_upper_tail;
use treedyn::{coalescing, voter, CostGuards};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Cell, Report, Table};

/// Significance of the one-sided bound test on disagreement creation.
const BOUND_TEST_LEVEL: f64 = 0.01;

fn stem(command: &str) -> String {
    command.replace(' ', "-")
}

fn finish(config: &ExperimentConfig, guards: CostGuards, summary: Value, tables: Vec<Table>) -> Report {
    Report {
        name: stem(config.command.as_deref().unwrap_or("run")),
        config: config.clone(),
        guards,
        summary,
        tables,
    }
}

fn single_horizon(config: &mut ExperimentConfig, default: f64) -> Result<f64, CliError> {
    let t = config.model.t.get_or_insert_with(|| vec![default]);
    match t[..] {
        [x] => Ok(x),
        _ => Err(CliError::Config("this command takes a single horizon T".into())),
    }
}

fn grid(config: &mut ExperimentConfig) -> Result<GridParams, CliError> {
    let d = GridParams::default();
    let h = *config.grid.h.get_or_insert(d.h);
    let t_max = *config.grid.t_max.get_or_insert(d.t_max);
    Ok(GridParams::new(h, t_max)?)
}

fn model_spec(config: &mut ExperimentConfig) -> Result<FlowModel, CliError> {
    let kind = config.model.kind.get_or_insert_with(|| "coalescing".into()).clone();
    match kind.as_str() {
        "coalescing" => {
            config.model.d = Some(2);
            Ok(FlowModel::coalescing())
        }
        "voter" => {
            config.model.d = Some(3);
            Ok(FlowModel::voter())
        }
        "general" => {
            let d = *config.model.d.get_or_insert(2);
            Ok(FlowModel::general(d)?)
        }
        other => Err(CliError::Config(format!(
            "unknown model {other:?}; expected coalescing, voter or general"
        ))),
    }
}

fn schedule(config: &mut ExperimentConfig) -> Result<CouplingSchedule, CliError> {
    let id = config.model.schedule.get_or_insert_with(|| "ksq".into());
    Ok(CouplingSchedule::parse(id)?)
}

pub fn run(config: &mut ExperimentConfig, guards: CostGuards, input: Option<&Path>) -> Result<Report, CliError> {
    let command = config
        .command
        .clone()
        .ok_or_else(|| CliError::Config("no command given".into()))?;
    match command.as_str() {
        "simulate coalescing" => simulate_coalescing(config, guards),
        "simulate voter" => simulate_voter(config, guards),
        "simulate lattice-demo" => lattice_demo(config, guards),
        "ising coupled" => ising_coupled(config, guards),
        "ising infection" => ising_infection(config, guards),
        "ising rate-sum" => rate_sum(config, guards),
        "analytic iterate" => analytic_iterate(config, guards),
        "analytic ode" => analytic_ode(config, guards),
        "analytic closed-form" => closed_form(config, guards),
        "analytic residual" => residual(config, guards, input),
        other => Err(CliError::Config(format!("unknown command {other:?}"))),
    }
}

fn simulate_coalescing(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let seed = config.seed()?;
    let n = *config.model.n.get_or_insert(1);
    let d = *config.model.d.get_or_insert(2);
    let horizons = config.model.t.get_or_insert_with(|| vec![1.0]).clone();
    let samples = *config.sampling.samples.get_or_insert(10_000);
    let est = coalescing::estimate_rho_curve(d, n, &horizons, samples, seed, &guards)?;
    let mut table = Table::new(
        "simulate-coalescing",
        &["n", "T", "samples", "estimate", "ci_low", "ci_high", "seed"],
    );
    for (t, e) in horizons.iter().zip(&est) {
        table.push(vec![
            n.into(),
            (*t).into(),
            samples.into(),
            e.value.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            seed.into(),
        ]);
    }
    let summary = json!({
        "estimates": horizons.iter().zip(&est).map(|(t, e)| json!({
            "T": t, "estimate": e.value, "std_error": e.std_error,
            "ci_low": e.ci_low, "ci_high": e.ci_high,
        })).collect::<Vec<_>>(),
    });
    Ok(finish(config, guards, summary, vec![table]))
}

fn simulate_voter(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let seed = config.seed()?;
    let n = *config.model.n.get_or_insert(1);
    config.model.d = Some(3);
    let lags = config.model.t.get_or_insert_with(|| vec![1.0]).clone();
    let samples = *config.sampling.samples.get_or_insert(10_000);
    let est = voter::estimate_autocorr_curve(n, &lags, samples, seed, &guards)?;
    let mut table = Table::new(
        "simulate-voter",
        &["n", "T", "samples", "rho_bar", "ci_low", "ci_high", "seed"],
    );
    for (t, e) in lags.iter().zip(&est) {
        table.push(vec![
            n.into(),
            (*t).into(),
            samples.into(),
            e.value.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            seed.into(),
        ]);
    }
    let points: Vec<(f64, f64)> = lags.iter().zip(&est).map(|(t, e)| (*t, e.value)).collect();
    let slope = analytic::log_slope(&points).ok();
    let summary = json!({
        "estimates": lags.iter().zip(&est).map(|(t, e)| json!({
            "T": t, "rho_bar": e.value, "std_error": e.std_error,
            "ci_low": e.ci_low, "ci_high": e.ci_high,
        })).collect::<Vec<_>>(),
        "log_slope": slope,
    });
    Ok(finish(config, guards, summary, vec![table]))
}

fn lattice_demo(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let seed = config.seed()?;
    let side = *config.model.side.get_or_insert(32);
    let dim = *config.model.dim.get_or_insert(2);
    let t = single_horizon(config, 50.0)?;
    if t.fract() != 0.0 || t < 0.0 {
        return Err(CliError::Config(format!("lattice horizon must be a whole number, got {t}")));
    }
    let density = coalescing::lattice_density_decay(side, dim, t as u32, seed, &guards)?;
    let mut table = Table::new("simulate-lattice-demo", &["t", "density"]);
    for (i, d) in density.iter().enumerate() {
        table.push(vec![(i as u64).into(), (*d).into()]);
    }
    let summary = json!({
        "final_density": density.last(),
        "non_increasing": density.windows(2).all(|w| w[1] <= w[0]),
    });
    Ok(finish(config, guards, summary, vec![table]))
}

fn ising_coupled(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let seed = config.seed()?;
    let beta = *config.model.beta.get_or_insert(1.0);
    let sched = schedule(config)?;
    let depth = *config.model.depth.get_or_insert(8);
    let t = single_horizon(config, 50.0)?;
    let replicas = *config.sampling.replicas.get_or_insert(1);
    let mut tables = Vec::new();
    let tallies = if replicas == 1 {
        let r = ising::coupled_simulate(depth, beta, &sched, t, seed, &guards)?;
        let mut traj = Table::new("ising-coupled-trajectory", &["time", "disagreements"]);
        for (time, count) in &r.trajectory {
            traj.push(vec![(*time).into(), (*count).into()]);
        }
        tables.push(traj);
        r.tallies
    } else {
        ising::coupled_replicas(depth, beta, &sched, t, replicas, seed, &guards)?
    };
    let mut table = Table::new(
        "ising-coupled",
        &["layer", "opportunities", "creations", "frequency", "bound", "p_value"],
    );
    let mut within = true;
    let mut creations = 0;
    for x in &tallies {
        let p = binomial_upper_tail(x.creations, x.opportunities, x.bound);
        within &= p > BOUND_TEST_LEVEL;
        creations += x.creations;
        let freq = if x.opportunities > 0 {
            x.creations as f64 / x.opportunities as f64
        } else {
            0.0
        };
        table.push(vec![
            x.layer.into(),
            x.opportunities.into(),
            x.creations.into(),
            freq.into(),
            x.bound.into(),
            p.into(),
        ]);
    }
    tables.insert(0, table);
    let summary = json!({
        "depth": depth,
        "beta": beta,
        "schedule": sched.id(),
        "replicas": replicas,
        "total_creations": creations,
        "within_bound": within,
        "test_level": BOUND_TEST_LEVEL,
    });
    Ok(finish(config, guards, summary, tables))
}

fn ising_infection(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let seed = config.seed()?;
    let beta = *config.model.beta.get_or_insert(2.0);
    let sched = schedule(config)?;
    let depth = *config.model.depth.get_or_insert(12);
    let t = single_horizon(config, 200.0)?;
    let replicas = *config.sampling.replicas.get_or_insert(1);
    let runs = if replicas == 1 {
        vec![ising::infection_simulate(depth, beta, &sched, t, seed, &guards)?]
    } else {
        ising::infection_replicas(depth, beta, &sched, t, replicas, seed, &guards)?
    };
    let mut traj = Table::new("ising-infection", &["time", "infected"]);
    for (time, count) in &runs[0].trajectory {
        traj.push(vec![(*time).into(), (*count).into()]);
    }
    let mut per_run = Table::new(
        "ising-infection-replicas",
        &["replica", "time_average", "max_count", "originations", "cures", "closure_violations"],
    );
    for (i, r) in runs.iter().enumerate() {
        per_run.push(vec![
            (i as u64).into(),
            r.time_average.into(),
            r.max_count.into(),
            r.originations.into(),
            r.cures.into(),
            r.closure_violations.into(),
        ]);
    }
    let mean = runs.iter().map(|r| r.time_average).sum::<f64>() / runs.len() as f64;
    let summary = json!({
        "depth": depth,
        "beta": beta,
        "schedule": sched.id(),
        "replicas": replicas,
        "mean_time_average": mean,
        "max_count": runs.iter().map(|r| r.max_count).max(),
        "closure_violations": runs.iter().map(|r| r.closure_violations).sum::<u64>(),
    });
    Ok(finish(config, guards, summary, vec![traj, per_run]))
}

fn rate_sum(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let beta = *config.model.beta.get_or_insert(2.0);
    let sched = schedule(config)?;
    let tol = *config.model.tol.get_or_insert(1e-6);
    let r = ising::infection_rate_sum(beta, &sched, tol)?;
    let mut table = Table::new("ising-rate-sum", &["beta", "schedule", "sum", "terms", "bounded"]);
    table.push(vec![
        beta.into(),
        sched.id().into(),
        r.sum.into(),
        r.terms.into(),
        r.bounded.into(),
    ]);
    let summary = json!({
        "beta": beta, "schedule": sched.id(), "sum": r.sum, "terms": r.terms,
        "bounded": r.bounded, "tol": tol,
    });
    Ok(finish(config, guards, summary, vec![table]))
}

fn analytic_iterate(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let model = model_spec(config)?;
    let params = grid(config)?;
    let n = *config.model.n.get_or_insert(5);
    if n < 1 {
        return Err(CliError::Config("need at least one iteration".into()));
    }
    let iterates = analytic::chi_iterate(&model, n as usize, params)?;
    let mut columns = vec!["T".to_string()];
    columns.extend((1..=n).map(|k| format!("iterate_{k}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("analytic-iterate", &cols);
    for i in 0..iterates[0].values().len() {
        let mut row: Vec<Cell> = vec![iterates[0].time(i).into()];
        row.extend(iterates.iter().map(|f| Cell::from(f.values()[i])));
        table.push(row);
    }
    let last = iterates.last().unwrap();
    let change = if iterates.len() > 1 {
        Some(last.sup_distance(&iterates[iterates.len() - 2], f64::INFINITY))
    } else {
        None
    };
    let summary = json!({
        "model": model.kind().name(),
        "d": model.branching(),
        "iterations": n,
        "value_at_1": iterates.iter().map(|f| f.value_at(1.0)).collect::<Vec<_>>(),
        "last_sup_change": change,
    });
    Ok(finish(config, guards, summary, vec![table]))
}

fn curve_table(name: &str, f: &GridFunction) -> Table {
    let mut table = Table::new(name, &["T", "value"]);
    for (i, v) in f.values().iter().enumerate() {
        table.push(vec![f.time(i).into(), (*v).into()]);
    }
    table
}

fn analytic_ode(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let model = model_spec(config)?;
    let params = grid(config)?;
    let rho = analytic::solve_heteroclinic(&model, params)?;
    let tail = analytic::tail_decay_slope(&rho, params.t_max / 2.0, params.t_max).ok();
    let summary = json!({
        "model": model.kind().name(),
        "d": model.branching(),
        "initial_slope": (2.0 * model.potential(1.0)).sqrt(),
        "energy_deviation": analytic::energy_deviation(&model, &rho),
        "ode_residual": analytic::ode_residual(&model, &rho),
        "tail_decay_slope": tail,
        "tail_rate": model.tail_rate(),
    });
    Ok(finish(config, guards, summary, vec![curve_table("analytic-ode", &rho)]))
}

fn closed_form(config: &mut ExperimentConfig, guards: CostGuards) -> Result<Report, CliError> {
    let table = if let Some(times) = config.model.t.clone() {
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
            return Err(CliError::Config(format!("times must be >= 0, got {t}")));
        }
        let mut table = Table::new("analytic-closed-form", &["T", "value"]);
        for t in times {
            table.push(vec![t.into(), analytic::closed_form_rho_inf(t).into()]);
        }
        table
    } else {
        let params = grid(config)?;
        curve_table("analytic-closed-form", &analytic::closed_form_grid(params)?)
    };
    let summary = json!({ "points": table.rows.len() });
    Ok(finish(config, guards, summary, vec![table]))
}

/// Reads a curve either in the metadata-tagged grid format or as a plain
/// `T,value` table on a uniform grid.
fn read_curve(path: &Path, model: &FlowModel) -> Result<GridFunction, CliError> {
    let text = std::fs::read_to_string(path)?;
    if text.starts_with("# model=") {
        return Ok(GridFunction::from_csv(&text)?.2);
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).skip(1) {
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad row {line:?} in {}", path.display())))
        };
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| CliError::Config(format!("bad row {line:?} in {}", path.display())))?;
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    if times.len() < 3 {
        return Err(CliError::Config(format!("{} holds fewer than three points", path.display())));
    }
    let h = times[1] - times[0];
    if times
        .iter()
        .enumerate()
        .any(|(i, t)| (t - i as f64 * h).abs() > 1e-9 * (1.0 + t.abs()))
    {
        return Err(CliError::Config(format!("{} is not on a uniform grid from 0", path.display())));
    }
    Ok(GridFunction::new(h, values, model.tail_rate())?)
}

fn residual(config: &mut ExperimentConfig, guards: CostGuards, input: Option<&Path>) -> Result<Report, CliError> {
    let model = model_spec(config)?;
    let (source, rho) = match input {
        Some(path) => (path.display().to_string(), read_curve(path, &model)?),
        None => {
            let params = grid(config)?;
            if model.kind() == analytic::ModelKind::Coalescing {
                ("closed-form".to_string(), analytic::closed_form_grid(params)?)
            } else {
                ("ode".to_string(), analytic::solve_heteroclinic(&model, params)?)
            }
        }
    };
    let fixed = analytic::fixed_point_residual(&model, &rho)?;
    let ode = analytic::ode_residual(&model, &rho);
    let energy = analytic::energy_deviation(&model, &rho);
    let mut table = Table::new("analytic-residual", &["metric", "value"]);
    table.push(vec!["fixed_point_residual".into(), fixed.into()]);
    table.push(vec!["ode_residual".into(), ode.into()]);
    table.push(vec!["energy_deviation".into(), energy.into()]);
    let summary = json!({
        "model": model.kind().name(),
        "source": source,
        "h": rho.h(),
        "t_max": rho.t_max(),
        "fixed_point_residual": fixed,
        "ode_residual": ode,
        "energy_deviation": energy,
    });
    Ok(finish(config, guards, summary, vec![table]))
}
