//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; blank lines and anything after `#` are ignored.
//! Every key is optional and defaults to the single-zone setup used for the
//! total-consumption figures (N = 10 selfish consumers, broadcast).

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtp_game::model::{
    DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_G_BAR, DEFAULT_HORIZON, DEFAULT_KAPPA,
};
use rtp_game::model::{DEFAULT_OMEGA_STD, DEFAULT_PREFERENCE_VARIANCE};
use rtp_game::{
    Behavior, CommunicationGraph, Information, PreferencePrior, PricingPolicy, RenewableForecast,
    Scenario, SigmaCorrelation,
};
use serde::Serialize;

use crate::CliError;

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    OmegaBar,
    Sigma,
    Gamma,
    N,
    Behavior,
    Info,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::OmegaBar => "omega_bar",
            SweepAxis::Sigma => "sigma",
            SweepAxis::Gamma => "gamma",
            SweepAxis::N => "n",
            SweepAxis::Behavior => "behavior",
            SweepAxis::Info => "info",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepAxis::OmegaBar,
            SweepAxis::Sigma,
            SweepAxis::Gamma,
            SweepAxis::N,
            SweepAxis::Behavior,
            SweepAxis::Info,
        ]
        .into_iter()
        .find(|a| a.key() == s.trim())
        .ok_or_else(|| CliError::Config(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub gamma: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub g_bar: f64,
    /// Common preference variance `σ_ii`.
    pub pref_var: f64,
    /// Common correlation `σ_ij / σ_ii`.
    pub sigma: f64,
    pub omega_bar: f64,
    pub omega_std: f64,
    pub horizon: usize,
    pub behavior: Behavior,
    pub info: Information,
    pub graph_width: f64,
    pub graph_height: f64,
    pub graph_radius: f64,
    /// Seed of the communication graph; the run seed when unset.
    pub graph_seed: Option<u64>,
    pub seed: u64,
    pub runs: usize,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 10,
            gamma: DEFAULT_GAMMA,
            kappa: DEFAULT_KAPPA,
            alpha: DEFAULT_ALPHA,
            g_bar: DEFAULT_G_BAR,
            pref_var: DEFAULT_PREFERENCE_VARIANCE,
            sigma: 0.0,
            omega_bar: 0.0,
            omega_std: DEFAULT_OMEGA_STD,
            horizon: DEFAULT_HORIZON,
            behavior: Behavior::Selfish,
            info: Information::Broadcast,
            graph_width: 3.0,
            graph_height: 5.0,
            graph_radius: 2.0,
            graph_seed: None,
            seed: 0,
            runs: 100,
            sweep_axis: None,
            sweep_values: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (number, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", number + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::Config(format!("override `{assignment}` is not `key=value`"))
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "n" => self.n = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "g_bar" => self.g_bar = parse(key, value)?,
            "pref_var" => self.pref_var = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "omega_bar" => self.omega_bar = parse(key, value)?,
            "omega_std" => self.omega_std = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "behavior" => {
                self.behavior = value
                    .parse()
                    .map_err(|e: rtp_game::Error| CliError::Config(e.to_string()))?
            }
            "info" => {
                self.info = value
                    .parse()
                    .map_err(|e: rtp_game::Error| CliError::Config(e.to_string()))?
            }
            "graph_width" => self.graph_width = parse(key, value)?,
            "graph_height" => self.graph_height = parse(key, value)?,
            "graph_radius" => self.graph_radius = parse(key, value)?,
            "graph_seed" => self.graph_seed = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "sweep_axis" => self.sweep_axis = Some(value.parse()?),
            "sweep_values" => {
                self.sweep_values = value
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect()
            }
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn prior(&self) -> Result<PreferencePrior, CliError> {
        let corr = SigmaCorrelation::new(self.sigma, self.pref_var)?;
        Ok(PreferencePrior::sigma_correlated(self.n, self.g_bar, corr)?)
    }

    pub fn policy(&self) -> Result<PricingPolicy, CliError> {
        Ok(PricingPolicy::new(self.gamma, self.kappa, self.alpha)?)
    }

    pub fn graph(&self) -> CommunicationGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(self.graph_seed.unwrap_or(self.seed));
        CommunicationGraph::random_geometric(
            self.n,
            self.graph_width,
            self.graph_height,
            self.graph_radius,
            &mut rng,
        )
    }

    /// The scenario this configuration describes, validated.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        if self.horizon == 0 {
            return Err(CliError::Config("horizon must be at least one slot".into()));
        }
        if !(self.graph_width > 0.0 && self.graph_height > 0.0 && self.graph_radius >= 0.0) {
            return Err(CliError::Config(
                "graph area and radius must be positive".into(),
            ));
        }
        let mut scenario = Scenario::new(self.prior()?, self.behavior, self.info)
            .with_policy(self.policy()?)
            .with_forecast(RenewableForecast::new(self.omega_bar, self.omega_std)?)
            .with_horizon(self.horizon)
            .with_seed(self.seed);
        if self.info == Information::ActionSharing {
            scenario = scenario.with_graph(self.graph());
        }
        scenario.validate()?;
        Ok(scenario)
    }

    /// One configuration per sweep value.
    pub fn sweep_points(&self) -> Result<Vec<(String, RunConfig)>, CliError> {
        let axis = self
            .sweep_axis
            .ok_or_else(|| CliError::Config("sweep needs `sweep_axis`".into()))?;
        if self.sweep_values.is_empty() {
            return Err(CliError::Config("sweep needs `sweep_values`".into()));
        }
        self.sweep_values
            .iter()
            .map(|v| {
                let mut point = self.clone();
                point.set(axis.key(), v)?;
                point.scenario()?;
                Ok((v.clone(), point))
            })
            .collect()
    }
}
