//! Seeded simulation of whole time zones and ensemble statistics.
//!
//! Run `k` of an ensemble draws from a ChaCha8 stream keyed by the master
//! seed and stream number `k`, so results do not depend on how runs are
//! scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::beliefs::GameSchedule;
use crate::error::{Error, Result};
use crate::model::{system_metrics, PreferencePrior, Scenario, SimulationTrace, SlotRecord};

/// Relative eigenvalue cutoff of [`PreferenceSampler`].
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Multivariate normal sampler for a preference prior.
#[derive(Debug, Clone)]
pub struct PreferenceSampler {
    g_bar: f64,
    factor: DMatrix<f64>,
}

impl PreferenceSampler {
    /// Factors the covariance by Cholesky, or by a symmetric square root when
    /// the covariance is singular or nearly so. Eigenvalues below
    /// `RANK_TOLERANCE` of the largest are dropped, so exactly correlated
    /// preferences come out exactly equal.
    pub fn new(prior: &PreferencePrior) -> Result<Self> {
        let cov = prior.covariance().clone();
        let scale = cov.diagonal().amax();
        let cholesky = cov
            .clone()
            .cholesky()
            .map(|ch| ch.l())
            .filter(|l| (0..l.nrows()).all(|i| l[(i, i)] * l[(i, i)] > RANK_TOLERANCE * scale));
        let factor = match cholesky {
            Some(l) => l,
            None => {
                let eig = cov.symmetric_eigen();
                let top = eig.eigenvalues.amax();
                if eig.eigenvalues.min() < -1e-10 * top.max(1.0) {
                    return Err(Error::InvalidPrior("covariance cannot be factored".into()));
                }
                let roots = eig.eigenvalues.map(|x| {
                    if x > RANK_TOLERANCE * top {
                        x.sqrt()
                    } else {
                        0.0
                    }
                });
                &eig.eigenvectors * DMatrix::from_diagonal(&roots)
            }
        };
        Ok(Self {
            g_bar: prior.g_bar(),
            factor,
        })
    }

    pub fn n(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.n(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.factor * z).iter().map(|x| self.g_bar + x).collect()
    }
}

pub fn sample_preferences<R: Rng + ?Sized>(
    prior: &PreferencePrior,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(PreferenceSampler::new(prior)?.sample(rng))
}

/// Random stream of run `index` under master seed `seed`.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates one time zone: preferences once, then a fresh renewable term
/// every slot.
pub fn run_time_zone<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<SimulationTrace> {
    let schedule = GameSchedule::build(scenario)?;
    let sampler = PreferenceSampler::new(&scenario.prior)?;
    run_with_schedule(scenario, &schedule, &sampler, rng)
}

/// [`run_time_zone`] reusing a precomputed schedule and sampler.
pub fn run_with_schedule<R: Rng + ?Sized>(
    scenario: &Scenario,
    schedule: &GameSchedule,
    sampler: &PreferenceSampler,
    rng: &mut R,
) -> Result<SimulationTrace> {
    let preferences = sampler.sample(rng);
    let played = schedule.play(&scenario.prior, &preferences)?;
    let mut negative_consumptions = 0;
    let slots = played
        .into_iter()
        .enumerate()
        .map(|(slot, consumptions)| {
            let forecast = scenario.forecast_at(slot);
            let z: f64 = rng.sample(StandardNormal);
            let omega = forecast.omega_bar + forecast.omega_std * z;
            negative_consumptions += consumptions.iter().filter(|&&l| l < 0.0).count();
            let m = system_metrics(&consumptions, omega, scenario.policy_at(slot), &preferences);
            SlotRecord {
                slot,
                consumptions,
                total: m.total,
                omega,
                price: m.price,
                utilities: m.utilities,
                aggregate_utility: m.aggregate_utility,
                cost: m.cost,
                net_revenue: m.net_revenue,
                welfare: m.welfare,
            }
        })
        .collect();
    Ok(SimulationTrace {
        preferences,
        slots,
        negative_consumptions,
    })
}

/// Sample mean and spread of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub mean: f64,
    /// Unbiased sample variance; `NaN` with fewer than two runs.
    pub variance: f64,
    /// `sqrt(variance / runs)`.
    pub std_error: f64,
    pub runs: usize,
    /// Standard error of `variance`, `sqrt((m4 − s⁴)/runs)`.
    pub variance_std_error: f64,
}

impl EnsembleStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        let runs = samples.len();
        let nf = runs as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        if runs < 2 {
            return Self {
                mean,
                variance: f64::NAN,
                std_error: f64::NAN,
                runs,
                variance_std_error: f64::NAN,
            };
        }
        let (m2, m4) = samples.iter().fold((0.0, 0.0), |(m2, m4), &x| {
            let d2 = (x - mean) * (x - mean);
            (m2 + d2, m4 + d2 * d2)
        });
        let variance = m2 / (nf - 1.0);
        let m4 = m4 / nf;
        Self {
            mean,
            variance,
            std_error: (variance / nf).sqrt(),
            runs,
            variance_std_error: ((m4 - variance * variance).max(0.0) / nf).sqrt(),
        }
    }

    /// `|mean − target| ≤ k·std_error`.
    pub fn mean_within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }

    /// `|variance − target| ≤ k·variance_std_error`.
    pub fn variance_within(&self, target: f64, k: f64) -> bool {
        (self.variance - target).abs() <= k * self.variance_std_error
    }
}

/// Per-capita outcome of one run: `L/N`, `U/N` and `W/N` by slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub demand: Vec<f64>,
    pub utility: Vec<f64>,
    pub welfare: Vec<f64>,
    pub negative_consumptions: usize,
}

impl From<&SimulationTrace> for RunSummary {
    fn from(trace: &SimulationTrace) -> Self {
        let n = trace.preferences.len() as f64;
        Self {
            demand: trace.slots.iter().map(|s| s.total / n).collect(),
            utility: trace
                .slots
                .iter()
                .map(|s| s.aggregate_utility / n)
                .collect(),
            welfare: trace.slots.iter().map(|s| s.welfare / n).collect(),
            negative_consumptions: trace.negative_consumptions,
        }
    }
}

/// Ensemble statistics of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotStats {
    pub slot: usize,
    pub demand: EnsembleStats,
    pub utility: EnsembleStats,
    pub welfare: EnsembleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub runs: usize,
    pub seed: u64,
    pub slots: Vec<SlotStats>,
    pub negative_consumptions: usize,
}

impl EnsembleReport {
    pub fn from_summaries(seed: u64, summaries: &[RunSummary]) -> Self {
        let horizon = summaries.first().map_or(0, |s| s.demand.len());
        let column = |f: &dyn Fn(&RunSummary) -> f64| -> EnsembleStats {
            EnsembleStats::from_samples(&summaries.iter().map(f).collect::<Vec<_>>())
        };
        let slots = (0..horizon)
            .map(|h| SlotStats {
                slot: h,
                demand: column(&|s| s.demand[h]),
                utility: column(&|s| s.utility[h]),
                welfare: column(&|s| s.welfare[h]),
            })
            .collect();
        Self {
            runs: summaries.len(),
            seed,
            slots,
            negative_consumptions: summaries.iter().map(|s| s.negative_consumptions).sum(),
        }
    }
}

/// Per-run summaries, computed in parallel and returned in run order.
pub fn run_summaries(
    scenario: &Scenario,
    schedule: &GameSchedule,
    runs: usize,
    seed: u64,
) -> Result<Vec<RunSummary>> {
    let sampler = PreferenceSampler::new(&scenario.prior)?;
    (0..runs as u64)
        .into_par_iter()
        .map(|k| {
            let trace = run_with_schedule(scenario, schedule, &sampler, &mut run_rng(seed, k))?;
            Ok(RunSummary::from(&trace))
        })
        .collect()
}

fn check_runs(runs: usize) -> Result<()> {
    if runs == 0 {
        Err(Error::Configuration(
            "an ensemble needs at least one run".into(),
        ))
    } else {
        Ok(())
    }
}

/// Ensemble over `runs` independent time zones seeded from `scenario.seed`.
pub fn ensemble(scenario: &Scenario, runs: usize) -> Result<EnsembleReport> {
    check_runs(runs)?;
    let schedule = GameSchedule::build(scenario)?;
    let summaries = run_summaries(scenario, &schedule, runs, scenario.seed)?;
    Ok(EnsembleReport::from_summaries(scenario.seed, &summaries))
}

/// [`ensemble`] on the calling thread only.
pub fn ensemble_serial(scenario: &Scenario, runs: usize) -> Result<EnsembleReport> {
    check_runs(runs)?;
    let schedule = GameSchedule::build(scenario)?;
    let sampler = PreferenceSampler::new(&scenario.prior)?;
    let summaries = (0..runs as u64)
        .map(|k| {
            let trace = run_with_schedule(
                scenario,
                &schedule,
                &sampler,
                &mut run_rng(scenario.seed, k),
            )?;
            Ok(RunSummary::from(&trace))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleReport::from_summaries(scenario.seed, &summaries))
}
