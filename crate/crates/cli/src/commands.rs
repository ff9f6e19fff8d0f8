//! The four subcommands. Each turns a configuration into output tables.

use rtp_game::equilibrium::ClosedFormInfo;
use rtp_game::montecarlo::run_rng;
use rtp_game::{
    analytic_report, closed_form_complete, closed_form_private, ensemble as run_ensemble,
    equilibrium_residual, run_time_zone, solve_bne, AnalyticReport, EnsembleReport, Information,
    PublicBeliefs, SigmaCorrelation,
};

use crate::config::RunConfig;
use crate::output::{Cell, Table};
use crate::CliError;

/// First-slot equilibrium coefficients with their residual, next to the
/// closed forms for private and complete information.
///
/// Long format: `quantity, agent, index, value`, where `v` rows carry the
/// coordinate of the augmented profile in `index`.
pub fn solve(config: &RunConfig) -> Result<Vec<Table>, CliError> {
    let scenario = config.scenario()?;
    let constants = scenario.constants_at(0)?;
    let public = PublicBeliefs::from_prior(&scenario.prior)?;
    let coeffs = solve_bne(&constants, &public.weights, config.omega_bar)?;
    let residual = equilibrium_residual(&coeffs, &public.weights, &constants, config.omega_bar);

    let mut table = Table::new("solve", vec!["quantity", "agent", "index", "value"]);
    let scalar = |name: &str, value: f64| vec![name.into(), Cell::Empty, Cell::Empty, value.into()];
    table.push(scalar("rho", constants.rho));
    table.push(scalar("coupling", constants.coupling()));
    table.push(scalar("residual", residual));
    let n = config.n;
    if let Ok(cf) = closed_form_private(&constants, config.sigma, n) {
        table.push(scalar("a_private", cf.a));
        table.push(scalar("b_private", cf.b));
    }
    if let Ok(cf) = closed_form_complete(&constants, config.sigma, n) {
        table.push(scalar("a_complete", cf.a));
        table.push(scalar("b_complete", cf.b));
    }
    for (i, v) in coeffs.v.iter().enumerate() {
        for (k, x) in v.iter().enumerate() {
            table.push(vec!["v".into(), i.into(), k.into(), (*x).into()]);
        }
        table.push(vec!["r".into(), i.into(), Cell::Empty, coeffs.r[i].into()]);
    }
    Ok(vec![table])
}

const TRACE_HEADER: [&str; 9] = [
    "slot",
    "agent",
    "consumption",
    "total",
    "price",
    "utility",
    "U",
    "NR",
    "W",
];

/// One simulated time zone, identical to run 0 of an ensemble with the same
/// seed. Under action sharing the communication graph is emitted as well.
pub fn simulate(config: &RunConfig) -> Result<Vec<Table>, CliError> {
    let scenario = config.scenario()?;
    let trace = run_time_zone(&scenario, &mut run_rng(config.seed, 0))?;
    let mut table = Table::new("trace", TRACE_HEADER.to_vec());
    for record in &trace.slots {
        for (i, (&l, &u)) in record
            .consumptions
            .iter()
            .zip(&record.utilities)
            .enumerate()
        {
            table.push(vec![
                record.slot.into(),
                i.into(),
                l.into(),
                record.total.into(),
                record.price.into(),
                u.into(),
                record.aggregate_utility.into(),
                record.net_revenue.into(),
                record.welfare.into(),
            ]);
        }
    }
    let mut tables = vec![table];
    if let Some(graph) = &scenario.graph {
        let mut edges = Table::new("edges", vec!["source", "target"]);
        for (a, b) in graph.edges() {
            edges.push(vec![a.into(), b.into()]);
        }
        tables.push(edges);
    }
    Ok(tables)
}

/// Closed-form predictions that apply to `slot`: private information at the
/// first slot and throughout under P, complete information from the second
/// slot under B, nothing after the first slot under AS.
pub fn analytic_for_slot(config: &RunConfig, slot: usize) -> Option<AnalyticReport> {
    let info = match (config.info, slot) {
        (_, 0) | (Information::Private, _) => ClosedFormInfo::Private,
        (Information::Broadcast, _) => ClosedFormInfo::Complete,
        (Information::ActionSharing, _) => return None,
    };
    let policy = config.policy().ok()?;
    let prior = SigmaCorrelation::new(config.sigma, config.pref_var).ok()?;
    analytic_report(
        config.behavior,
        info,
        &policy,
        config.n,
        prior,
        config.g_bar,
        config.omega_bar,
    )
    .ok()
}

const ENSEMBLE_HEADER: [&str; 15] = [
    "slot",
    "runs",
    "demand_mean",
    "demand_se",
    "demand_var",
    "demand_var_se",
    "utility_mean",
    "utility_se",
    "welfare_mean",
    "welfare_se",
    "analytic_demand",
    "analytic_demand_var",
    "analytic_utility",
    "analytic_welfare",
    "negative_consumptions",
];

fn stats_cells(report: &EnsembleReport, slot: usize) -> Vec<Cell> {
    let s = &report.slots[slot];
    vec![
        s.demand.mean.into(),
        s.demand.std_error.into(),
        s.demand.variance.into(),
        s.demand.variance_std_error.into(),
        s.utility.mean.into(),
        s.utility.std_error.into(),
        s.welfare.mean.into(),
        s.welfare.std_error.into(),
    ]
}

fn analytic_cells(analytic: Option<&AnalyticReport>) -> Vec<Cell> {
    match analytic {
        Some(a) => vec![
            a.expected_demand_per_capita.into(),
            a.demand_variance.into(),
            a.expected_utility_per_capita.into(),
            a.expected_welfare_per_capita.into(),
        ],
        None => vec![Cell::Empty; 4],
    }
}

/// Per-slot ensemble statistics of `L/N`, `U/N` and `W/N` with the matching
/// closed-form predictions.
pub fn ensemble(config: &RunConfig) -> Result<Vec<Table>, CliError> {
    let scenario = config.scenario()?;
    let report = run_ensemble(&scenario, config.runs)?;
    let mut table = Table::new("ensemble", ENSEMBLE_HEADER.to_vec());
    for slot in 0..report.slots.len() {
        let mut row: Vec<Cell> = vec![slot.into(), report.runs.into()];
        row.extend(stats_cells(&report, slot));
        row.extend(analytic_cells(analytic_for_slot(config, slot).as_ref()));
        row.push(report.negative_consumptions.into());
        table.push(row);
    }
    Ok(vec![table])
}

fn slot_average(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let collected: Option<Vec<f64>> = values.collect();
    collected
        .filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// One row per sweep value with statistics averaged over the slots. Every
/// point reuses the same seed, so neighboring points share random numbers.
pub fn sweep(config: &RunConfig) -> Result<Vec<Table>, CliError> {
    let points = config.sweep_points()?;
    let axis = config.sweep_axis.expect("checked by sweep_points");
    let mut header = vec!["axis", "value"];
    header.extend(&ENSEMBLE_HEADER[1..]);
    let mut table = Table::new("sweep", header);
    for (label, point) in points {
        let scenario = point.scenario()?;
        let report = run_ensemble(&scenario, point.runs)?;
        let horizon = report.slots.len();
        let per_slot: Vec<Vec<Cell>> = (0..horizon).map(|h| stats_cells(&report, h)).collect();
        let mut row: Vec<Cell> = vec![axis.key().into(), label.into(), report.runs.into()];
        for column in 0..per_slot[0].len() {
            let average = slot_average(per_slot.iter().map(|cells| match cells[column] {
                Cell::Float(x) => Some(x),
                _ => None,
            }));
            row.push(average.into());
        }
        let analytic: Vec<Option<AnalyticReport>> =
            (0..horizon).map(|h| analytic_for_slot(&point, h)).collect();
        let pick = |f: fn(&AnalyticReport) -> Option<f64>| {
            slot_average(analytic.iter().map(|a| a.as_ref().and_then(f)))
        };
        row.push(pick(|a| Some(a.expected_demand_per_capita)).into());
        row.push(pick(|a| Some(a.demand_variance)).into());
        row.push(pick(|a| a.expected_utility_per_capita).into());
        row.push(pick(|a| a.expected_welfare_per_capita).into());
        row.push(report.negative_consumptions.into());
        table.push(row);
    }
    Ok(vec![table])
}
