//! Domain types and the primitive economic functions of the pricing game.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::CommunicationGraph;
use crate::scalar::Scalar;

pub const DEFAULT_GAMMA: f64 = 1.2;
pub const DEFAULT_KAPPA: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_G_BAR: f64 = 30.0;
pub const DEFAULT_PREFERENCE_VARIANCE: f64 = 4.0;
pub const DEFAULT_OMEGA_STD: f64 = 2.0;
pub const DEFAULT_HORIZON: usize = 5;

/// What each consumer maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Behavior {
    /// Own utility (S).
    Selfish,
    /// Aggregate utility of the population (U).
    Altruistic,
    /// Aggregate utility plus the operator's net revenue (W).
    Welfare,
}

impl Behavior {
    pub const ALL: [Behavior; 3] = [Behavior::Selfish, Behavior::Altruistic, Behavior::Welfare];

    pub fn tag(self) -> &'static str {
        match self {
            Behavior::Selfish => "S",
            Behavior::Altruistic => "U",
            Behavior::Welfare => "W",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S" | "SELFISH" => Ok(Behavior::Selfish),
            "U" | "ALTRUISTIC" => Ok(Behavior::Altruistic),
            "W" | "WELFARE" => Ok(Behavior::Welfare),
            other => Err(invalid(
                "behavior",
                format!("unknown behavior model `{other}`"),
            )),
        }
    }
}

/// What each consumer gets to observe between slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Information {
    /// Only the own preference (P).
    Private,
    /// Neighbors' past consumption over a communication graph (AS).
    ActionSharing,
    /// Past total consumption announced by the operator (B).
    Broadcast,
}

impl Information {
    pub const ALL: [Information; 3] = [
        Information::Private,
        Information::ActionSharing,
        Information::Broadcast,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Information::Private => "P",
            Information::ActionSharing => "AS",
            Information::Broadcast => "B",
        }
    }
}

impl fmt::Display for Information {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Information {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P" | "PRIVATE" => Ok(Information::Private),
            "AS" | "ACTION-SHARING" | "ACTION_SHARING" => Ok(Information::ActionSharing),
            "B" | "BROADCAST" => Ok(Information::Broadcast),
            other => Err(invalid(
                "info",
                format!("unknown information model `{other}`"),
            )),
        }
    }
}

/// Real-time pricing parameters of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingPolicy<F = f64> {
    /// Price slope.
    pub gamma: F,
    /// Quadratic generation cost coefficient.
    pub kappa: F,
    /// Utility decay coefficient.
    pub alpha: F,
}

impl<F: Scalar> PricingPolicy<F> {
    pub fn new(gamma: F, kappa: F, alpha: F) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("kappa", kappa)?;
        positive("alpha", alpha)?;
        Ok(Self {
            gamma,
            kappa,
            alpha,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.gamma, self.kappa, self.alpha).map(|_| ())
    }
}

impl<F: Scalar> Default for PricingPolicy<F> {
    fn default() -> Self {
        Self {
            gamma: F::lit(DEFAULT_GAMMA),
            kappa: F::lit(DEFAULT_KAPPA),
            alpha: F::lit(DEFAULT_ALPHA),
        }
    }
}

/// Announced distribution of the renewable price adjustment ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewableForecast<F = f64> {
    pub omega_bar: F,
    pub omega_std: F,
}

impl<F: Scalar> RenewableForecast<F> {
    pub fn new(omega_bar: F, omega_std: F) -> Result<Self> {
        if !omega_bar.is_finite() {
            return Err(invalid("omega_bar", "must be finite"));
        }
        if omega_std < F::zero() || !omega_std.is_finite() {
            return Err(invalid("omega_std", "must be finite and non-negative"));
        }
        Ok(Self {
            omega_bar,
            omega_std,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.omega_bar, self.omega_std).map(|_| ())
    }
}

impl<F: Scalar> Default for RenewableForecast<F> {
    fn default() -> Self {
        Self {
            omega_bar: F::zero(),
            omega_std: F::lit(DEFAULT_OMEGA_STD),
        }
    }
}

/// Homogeneous preference covariance: equal variances, equal pairwise correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCorrelation<F = f64> {
    /// Common correlation coefficient (off-diagonal over diagonal).
    pub sigma: F,
    /// Common variance.
    pub diag: F,
}

impl<F: Scalar> SigmaCorrelation<F> {
    pub fn new(sigma: F, diag: F) -> Result<Self> {
        unit_interval("sigma", sigma)?;
        positive("diag", diag)?;
        Ok(Self { sigma, diag })
    }
}

/// Gaussian prior `N(ḡ·1, Σ)` on the preference profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePrior {
    g_bar: f64,
    covariance: DMatrix<f64>,
}

impl PreferencePrior {
    /// Validates symmetry and positive semidefiniteness. Zero variances are
    /// accepted here (they sample deterministically); the belief filter
    /// rejects them separately because it conditions on each agent's own draw.
    pub fn new(g_bar: f64, covariance: DMatrix<f64>) -> Result<Self> {
        if g_bar <= 0.0 || !g_bar.is_finite() {
            return Err(Error::InvalidPrior(format!(
                "mean preference must be positive, got {g_bar}"
            )));
        }
        let n = covariance.nrows();
        if n == 0 || covariance.ncols() != n {
            return Err(Error::InvalidPrior(
                "covariance must be a non-empty square matrix".into(),
            ));
        }
        if covariance.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPrior(
                "covariance has non-finite entries".into(),
            ));
        }
        let scale = covariance.amax().max(1.0);
        for i in 0..n {
            if covariance[(i, i)] < 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "negative variance at index {i}"
                )));
            }
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidPrior(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = covariance.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::InvalidPrior(format!(
                "covariance not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { g_bar, covariance })
    }

    pub fn sigma_correlated(n: usize, g_bar: f64, corr: SigmaCorrelation<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "population must have at least one consumer"));
        }
        SigmaCorrelation::new(corr.sigma, corr.diag)?;
        let off = corr.sigma * corr.diag;
        let cov = DMatrix::from_fn(n, n, |i, j| if i == j { corr.diag } else { off });
        Self::new(g_bar, cov)
    }

    pub fn n(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn g_bar(&self) -> f64 {
        self.g_bar
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `σ_ij / σ_ii`: the weight of `g_i` in `E[g_j | g_i]`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.covariance[(j, i)] / self.covariance[(i, i)]
    }

    /// The homogeneous structure, when the covariance has one.
    pub fn homogeneous(&self) -> Option<SigmaCorrelation<f64>> {
        let n = self.n();
        let diag = self.covariance[(0, 0)];
        if diag <= 0.0 {
            return None;
        }
        let off = if n > 1 { self.covariance[(0, 1)] } else { 0.0 };
        let tol = 1e-12 * diag;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { diag } else { off };
                if (self.covariance[(i, j)] - expect).abs() > tol {
                    return None;
                }
            }
        }
        SigmaCorrelation::new(off / diag, diag).ok()
    }
}

/// Best-response constants `(λ, μ, τ, ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorConstants<F = f64> {
    pub lambda: F,
    pub mu: F,
    pub tau: F,
    /// `1 / (2(τ + α))`.
    pub rho: F,
}

/// Best-response constants of a behavior model.
///
/// S: `λ = μ = τ = γ/N`; U: `λ = 2γ/N, μ = τ = γ/N`; W: `λ = 2κ/N, μ = 0, τ = κ/N`.
pub fn behavior_constants<F: Scalar>(
    model: Behavior,
    gamma: F,
    kappa: F,
    alpha: F,
    n: usize,
) -> Result<BehaviorConstants<F>> {
    positive("gamma", gamma)?;
    positive("kappa", kappa)?;
    positive("alpha", alpha)?;
    if n == 0 {
        return Err(invalid("n", "population must have at least one consumer"));
    }
    let nf = F::from_usize(n);
    let two = F::lit(2.0);
    let (lambda, mu, tau) = match model {
        Behavior::Selfish => (gamma / nf, gamma / nf, gamma / nf),
        Behavior::Altruistic => (two * gamma / nf, gamma / nf, gamma / nf),
        Behavior::Welfare => (two * kappa / nf, F::zero(), kappa / nf),
    };
    Ok(BehaviorConstants {
        lambda,
        mu,
        tau,
        rho: F::one() / (two * (tau + alpha)),
    })
}

impl<F: Scalar> BehaviorConstants<F> {
    pub fn for_policy(model: Behavior, policy: &PricingPolicy<F>, n: usize) -> Result<Self> {
        behavior_constants(model, policy.gamma, policy.kappa, policy.alpha, n)
    }

    /// Interaction strength `ρλ`.
    pub fn coupling(&self) -> F {
        self.rho * self.lambda
    }
}

/// Per-unit price `(γ/N)(L + ω)`.
pub fn price<F: Scalar>(total_load: F, omega: F, gamma: F, n: usize) -> F {
    gamma / F::from_usize(n) * (total_load + omega)
}

/// Consumer utility `−l·p + g·l − α l²`.
pub fn utility<F: Scalar>(
    consumption: F,
    total_load: F,
    preference: F,
    omega: F,
    gamma: F,
    alpha: F,
    n: usize,
) -> F {
    let p = price(total_load, omega, gamma, n);
    -consumption * p + preference * consumption - alpha * consumption * consumption
}

/// Quadratic generation cost `(κ/N) L²`.
pub fn generation_cost<F: Scalar>(total_load: F, kappa: F, n: usize) -> F {
    kappa / F::from_usize(n) * total_load * total_load
}

/// System-level outcome of one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemMetrics<F = f64> {
    pub total: F,
    pub price: F,
    pub utilities: Vec<F>,
    pub aggregate_utility: F,
    pub cost: F,
    pub net_revenue: F,
    pub welfare: F,
}

pub fn system_metrics<F: Scalar>(
    consumptions: &[F],
    omega: F,
    policy: &PricingPolicy<F>,
    preferences: &[F],
) -> SystemMetrics<F> {
    assert_eq!(
        consumptions.len(),
        preferences.len(),
        "one preference per consumption"
    );
    let n = consumptions.len();
    let total = consumptions.iter().fold(F::zero(), |acc, &l| acc + l);
    let p = price(total, omega, policy.gamma, n);
    let utilities: Vec<F> = consumptions
        .iter()
        .zip(preferences)
        .map(|(&l, &g)| utility(l, total, g, omega, policy.gamma, policy.alpha, n))
        .collect();
    let aggregate_utility = utilities.iter().fold(F::zero(), |acc, &u| acc + u);
    let cost = generation_cost(total, policy.kappa, n);
    let net_revenue = p * total - cost;
    SystemMetrics {
        total,
        price: p,
        utilities,
        aggregate_utility,
        cost,
        net_revenue,
        welfare: aggregate_utility + net_revenue,
    }
}

/// A parameter that is either constant over the horizon or given per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSlot<T>(Vec<T>);

impl<T: Clone> PerSlot<T> {
    pub fn constant(value: T) -> Self {
        Self(vec![value])
    }

    pub fn sequence(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("per-slot sequence", "must not be empty"));
        }
        Ok(Self(values))
    }

    pub fn at(&self, slot: usize) -> &T {
        if self.0.len() == 1 {
            &self.0[0]
        } else {
            &self.0[slot]
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    fn fits(&self, horizon: usize) -> bool {
        self.0.len() == 1 || self.0.len() == horizon
    }
}

impl<T: Clone> From<T> for PerSlot<T> {
    fn from(value: T) -> Self {
        Self::constant(value)
    }
}

/// Exogenous description of one time zone.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub prior: PreferencePrior,
    pub policy: PerSlot<PricingPolicy>,
    pub forecast: PerSlot<RenewableForecast>,
    pub horizon: usize,
    pub behavior: Behavior,
    pub info: Information,
    pub graph: Option<CommunicationGraph>,
    pub seed: u64,
}

impl Scenario {
    /// Scenario with default pricing, forecast and horizon. Action-sharing
    /// scenarios still need [`Scenario::with_graph`].
    pub fn new(prior: PreferencePrior, behavior: Behavior, info: Information) -> Self {
        Self {
            prior,
            policy: PerSlot::constant(PricingPolicy::default()),
            forecast: PerSlot::constant(RenewableForecast::default()),
            horizon: DEFAULT_HORIZON,
            behavior,
            info,
            graph: None,
            seed: 0,
        }
    }

    pub fn with_policy(mut self, policy: impl Into<PerSlot<PricingPolicy>>) -> Self {
        self.policy = policy.into();
        self
    }

    pub fn with_forecast(mut self, forecast: impl Into<PerSlot<RenewableForecast>>) -> Self {
        self.forecast = forecast.into();
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_graph(mut self, graph: CommunicationGraph) -> Self {
        self.graph = Some(graph);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n(&self) -> usize {
        self.prior.n()
    }

    pub fn policy_at(&self, slot: usize) -> &PricingPolicy {
        self.policy.at(slot)
    }

    pub fn forecast_at(&self, slot: usize) -> &RenewableForecast {
        self.forecast.at(slot)
    }

    pub fn constants_at(&self, slot: usize) -> Result<BehaviorConstants> {
        BehaviorConstants::for_policy(self.behavior, self.policy_at(slot), self.n())
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least one slot"));
        }
        if !self.policy.fits(self.horizon) {
            return Err(Error::Configuration(format!(
                "pricing sequence has {} entries for a horizon of {}",
                self.policy.len(),
                self.horizon
            )));
        }
        if !self.forecast.fits(self.horizon) {
            return Err(Error::Configuration(format!(
                "forecast sequence has {} entries for a horizon of {}",
                self.forecast.len(),
                self.horizon
            )));
        }
        for p in self.policy.values() {
            p.validate()?;
        }
        for f in self.forecast.values() {
            f.validate()?;
        }
        match (&self.graph, self.info) {
            (None, Information::ActionSharing) => Err(Error::Configuration(
                "action-sharing requires a communication graph".into(),
            )),
            (Some(_), Information::Private | Information::Broadcast) => {
                Err(Error::Configuration(format!(
                    "a communication graph is only used by action-sharing, not {}",
                    self.info
                )))
            }
            (Some(g), Information::ActionSharing) if g.n() != self.n() => {
                Err(Error::Configuration(format!(
                    "graph has {} nodes but the population has {}",
                    g.n(),
                    self.n()
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Realized outcome of one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub consumptions: Vec<f64>,
    pub total: f64,
    pub omega: f64,
    pub price: f64,
    pub utilities: Vec<f64>,
    pub aggregate_utility: f64,
    pub cost: f64,
    pub net_revenue: f64,
    pub welfare: f64,
}

/// Full record of one simulated time zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    /// Preference profile, fixed over the zone.
    pub preferences: Vec<f64>,
    pub slots: Vec<SlotRecord>,
    /// Number of (agent, slot) pairs with negative consumption. Strategies are
    /// affine and left unclamped.
    pub negative_consumptions: usize,
}

impl SimulationTrace {
    pub fn totals(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.total).collect()
    }
}

fn positive<F: Scalar>(name: &'static str, x: F) -> Result<()> {
    if x > F::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            name,
            format!("must be positive and finite, got {x:?}"),
        ))
    }
}

pub(crate) fn unit_interval<F: Scalar>(name: &'static str, x: F) -> Result<()> {
    if x >= F::zero() && x <= F::one() {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in [0, 1], got {x:?}")))
    }
}
