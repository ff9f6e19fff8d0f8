//! Sequential game filter: Gaussian belief propagation inside the game.
//!
//! Every agent tracks the posterior of the augmented profile `g̃ = [g; ḡ]`.
//! Since all observations are linear in `g̃`, posterior means stay linear,
//! `E_i[g̃] = T_i g̃`, and the weights `T_i` together with the error
//! covariances `M_i` evolve from public quantities alone. They are the same
//! for every agent that emulates the network, so they are computed once per
//! slot ([`PublicBeliefs`]) and shared. The private part is each agent's own
//! mean, updated from its own observation.

use nalgebra::{DMatrix, DVector};

use crate::equilibrium::{solve_bne, StrategyCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, symmetrize, Svd, PINV_TOLERANCE};
use crate::model::{BehaviorConstants, Information, PreferencePrior, Scenario};
use crate::network::CommunicationGraph;

/// Negative eigenvalues of an updated covariance down to
/// `-PSD_TOLERANCE · max(1, max|M|)` are rounding and get clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// `[g; ḡ]`.
pub fn augmented(preferences: &[f64], g_bar: f64) -> DVector<f64> {
    DVector::from_iterator(
        preferences.len() + 1,
        preferences.iter().copied().chain(std::iter::once(g_bar)),
    )
}

fn check_prior(prior: &PreferencePrior) -> Result<()> {
    let cov = prior.covariance();
    match (0..prior.n()).find(|&i| cov[(i, i)] <= 0.0) {
        Some(i) => Err(Error::InvalidPrior(format!(
            "agent {i} has zero preference variance"
        ))),
        None => Ok(()),
    }
}

/// Weights of `E[g̃ | g_i]`: row `i` and the mean row are unit rows, every
/// other row mixes `g_i` and `ḡ` by the correlation `σ_ij / σ_ii`.
pub fn initial_weights(prior: &PreferencePrior, i: usize) -> DMatrix<f64> {
    let n = prior.n();
    let mut t = DMatrix::zeros(n + 1, n + 1);
    for j in 0..n {
        if j == i {
            t[(j, i)] = 1.0;
        } else {
            let c = prior.correlation(i, j);
            t[(j, i)] = c;
            t[(j, n)] = 1.0 - c;
        }
    }
    t[(n, n)] = 1.0;
    t
}

/// Error covariance of `g̃` given `g_i`: the Schur complement on the unknown
/// preferences, zero on `g_i` and `ḡ`.
pub fn initial_covariance(prior: &PreferencePrior, i: usize) -> DMatrix<f64> {
    let n = prior.n();
    let s = prior.covariance();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for j in (0..n).filter(|&j| j != i) {
        for k in (0..n).filter(|&k| k != i) {
            m[(j, k)] = s[(j, k)] - s[(j, i)] * s[(i, k)] / s[(i, i)];
        }
    }
    m
}

/// `E[g̃ | g_i]` evaluated at the agent's own draw.
pub fn initial_mean(prior: &PreferencePrior, i: usize, own_preference: f64) -> DVector<f64> {
    let n = prior.n();
    let g_bar = prior.g_bar();
    DVector::from_fn(n + 1, |j, _| {
        if j == n {
            g_bar
        } else if j == i {
            own_preference
        } else {
            let c = prior.correlation(i, j);
            (1.0 - c) * g_bar + c * own_preference
        }
    })
}

fn initial_means(prior: &PreferencePrior, preferences: &[f64]) -> Result<Vec<DVector<f64>>> {
    if preferences.len() != prior.n() {
        return Err(Error::Configuration(format!(
            "{} preferences for a population of {}",
            preferences.len(),
            prior.n()
        )));
    }
    Ok(preferences
        .iter()
        .enumerate()
        .map(|(i, &g)| initial_mean(prior, i, g))
        .collect())
}

/// Estimation weights and error covariances of every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicBeliefs {
    pub weights: Vec<DMatrix<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    /// Square-root factors `S_i` with `S_i S_iᵀ = M_i`.
    pub factors: Vec<DMatrix<f64>>,
    /// `Z_i` with `T_i = I + S_i Z_i`, so estimation errors stay inside the
    /// span of the factor.
    pub loadings: Vec<DMatrix<f64>>,
}

impl PublicBeliefs {
    pub fn from_prior(prior: &PreferencePrior) -> Result<Self> {
        check_prior(prior)?;
        let n = prior.n();
        let weights: Vec<_> = (0..n).map(|i| initial_weights(prior, i)).collect();
        let covariances: Vec<_> = (0..n).map(|i| initial_covariance(prior, i)).collect();
        let factors: Vec<_> = covariances.iter().map(covariance_factor).collect();
        let loadings = weights
            .iter()
            .zip(&factors)
            .map(|(t, s)| {
                let error = t - DMatrix::identity(n + 1, n + 1);
                pseudo_inverse(s, PINV_TOLERANCE * s.amax()) * error
            })
            .collect();
        Ok(Self {
            weights,
            covariances,
            factors,
            loadings,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Applies the gain of every agent to its weights and covariance.
    pub fn advance(&self, plan: &SlotPlan) -> Self {
        if plan.observations.is_empty() {
            return self.clone();
        }
        let m = self.n() + 1;
        let loadings: Vec<DMatrix<f64>> = plan
            .posteriors
            .iter()
            .zip(&self.loadings)
            .map(|(c, z)| c.null_basis.transpose() * z)
            .collect();
        let weights = plan
            .posteriors
            .iter()
            .zip(&loadings)
            .map(|(c, z)| DMatrix::identity(m, m) + &c.factor * z)
            .collect();
        Self {
            weights,
            covariances: plan
                .posteriors
                .iter()
                .map(|c| c.covariance.clone())
                .collect(),
            factors: plan.posteriors.iter().map(|c| c.factor.clone()).collect(),
            loadings,
        }
    }
}

/// Complete belief state of a population: the shared public part and each
/// agent's own posterior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub public: PublicBeliefs,
    pub means: Vec<DVector<f64>>,
}

impl BeliefState {
    pub fn init(prior: &PreferencePrior, preferences: &[f64]) -> Result<Self> {
        let means = initial_means(prior, preferences)?;
        Ok(Self {
            public: PublicBeliefs::from_prior(prior)?,
            means,
        })
    }

    /// Largest gap between `T_i g̃` and the locally filtered mean.
    pub fn representation_error(&self, g_tilde: &DVector<f64>) -> f64 {
        self.public
            .weights
            .iter()
            .zip(&self.means)
            .map(|(t, mean)| (t * g_tilde - mean).amax())
            .fold(0.0, f64::max)
    }
}

/// What an agent sees after a slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    Nothing,
    /// Consumptions of these agents, in this order.
    Agents(Vec<usize>),
    /// Total consumption.
    Total,
}

/// Observation model `y = H g̃ + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub h: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub observed: Observed,
}

impl ObservationMatrix {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Extracts the observation from the slot's realized consumptions.
    pub fn observe(&self, consumptions: &[f64]) -> DVector<f64> {
        match &self.observed {
            Observed::Nothing => DVector::zeros(0),
            Observed::Agents(who) => {
                DVector::from_iterator(who.len(), who.iter().map(|&j| consumptions[j]))
            }
            Observed::Total => DVector::from_element(1, consumptions.iter().sum()),
        }
    }

    /// What an agent with posterior mean `mean` expects to observe.
    pub fn predict(&self, mean: &DVector<f64>) -> DVector<f64> {
        &self.h * mean + &self.offset
    }
}

/// Observation matrix of agent `i`: no rows under private information, one
/// row `v_jᵀT_j` per neighbor under action sharing, and the single row
/// `Σ_j v_jᵀT_j` under broadcast.
pub fn observation_matrix(
    info: Information,
    graph: Option<&CommunicationGraph>,
    coeffs: &StrategyCoefficients,
    weights: &[DMatrix<f64>],
    i: usize,
) -> Result<ObservationMatrix> {
    let effective = |j: usize| weights[j].tr_mul(&coeffs.v[j]);
    observation_from_rows(info, graph, coeffs, &effective, weights.len(), i)
}

fn observation_from_rows(
    info: Information,
    graph: Option<&CommunicationGraph>,
    coeffs: &StrategyCoefficients,
    effective: &dyn Fn(usize) -> DVector<f64>,
    n: usize,
    i: usize,
) -> Result<ObservationMatrix> {
    match info {
        Information::Private => Ok(ObservationMatrix {
            h: DMatrix::zeros(0, n + 1),
            offset: DVector::zeros(0),
            observed: Observed::Nothing,
        }),
        Information::ActionSharing => {
            let graph = graph.ok_or_else(|| {
                Error::Configuration("action-sharing requires a communication graph".into())
            })?;
            let who = graph.neighbors(i).to_vec();
            let mut h = DMatrix::zeros(who.len(), n + 1);
            for (row, &j) in who.iter().enumerate() {
                h.row_mut(row).tr_copy_from(&effective(j));
            }
            let offset = DVector::from_iterator(who.len(), who.iter().map(|&j| coeffs.r[j]));
            Ok(ObservationMatrix {
                h,
                offset,
                observed: Observed::Agents(who),
            })
        }
        Information::Broadcast => {
            let total = (0..n).fold(DVector::zeros(n + 1), |acc, j| acc + effective(j));
            Ok(ObservationMatrix {
                h: DMatrix::from_row_slice(1, n + 1, total.as_slice()),
                offset: DVector::from_element(1, coeffs.r.iter().sum()),
                observed: Observed::Total,
            })
        }
    }
}

/// `K = M Hᵀ (H M Hᵀ)⁺`.
///
/// The pseudo-inverse drops directions with no innovation variance, so an
/// observation the agent can already predict leaves its beliefs untouched.
pub fn kalman_gain(covariance: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let cross = covariance * h.transpose();
    let innovation = h * &cross;
    let scale = h.norm_squared() * covariance.amax();
    cross * pseudo_inverse(&innovation, scale)
}

/// Relative eigenvalue cutoff below which a covariance direction counts as
/// known when it is factored.
pub const FACTOR_TOLERANCE: f64 = 1e-12;

/// Square-root factor `S` with `S Sᵀ = M`. Rows of `M` that are exactly zero
/// give exactly zero rows of `S`.
pub fn covariance_factor(covariance: &DMatrix<f64>) -> DMatrix<f64> {
    let m = covariance.nrows();
    let active: Vec<usize> = (0..m)
        .filter(|&r| covariance.row(r).iter().any(|&x| x != 0.0))
        .collect();
    if active.is_empty() {
        return DMatrix::zeros(m, 0);
    }
    let sub = DMatrix::from_fn(active.len(), active.len(), |a, b| {
        covariance[(active[a], active[b])]
    });
    let eig = symmetrize(&sub).symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..active.len())
        .filter(|&k| eig.eigenvalues[k] > FACTOR_TOLERANCE * top)
        .collect();
    let mut factor = DMatrix::zeros(m, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        let root = eig.eigenvalues[k].sqrt();
        for (a, &r) in active.iter().enumerate() {
            factor[(r, col)] = eig.eigenvectors[(a, k)] * root;
        }
    }
    factor
}

/// Gain and posterior of one noise-free observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    pub gain: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub factor: DMatrix<f64>,
    /// Orthonormal basis `V₀` of the unobserved directions, `factor = S V₀`.
    pub null_basis: DMatrix<f64>,
}

/// Conditions `N(·, M)` on `H g̃`, factoring `M` first.
pub fn condition(covariance: &DMatrix<f64>, h: &DMatrix<f64>) -> Conditioning {
    condition_factor(&covariance_factor(covariance), h)
}

/// Conditions `N(·, S Sᵀ)` on `H g̃` in square-root form. With `A = H S`
/// and `A = U Σ Vᵀ`, the gain is `S A⁺` (equal to `M Hᵀ (H M Hᵀ)⁺`) and the
/// posterior factor is `S V₀`, where `V₀` spans the null space of `A`.
pub fn condition_factor(factor: &DMatrix<f64>, h: &DMatrix<f64>) -> Conditioning {
    let (m, d) = (factor.nrows(), h.nrows());
    if d == 0 || factor.ncols() == 0 {
        return Conditioning {
            gain: DMatrix::zeros(m, d),
            covariance: factor * factor.transpose(),
            factor: factor.clone(),
            null_basis: DMatrix::identity(factor.ncols(), factor.ncols()),
        };
    }
    let r = factor.ncols();
    let svd = Svd::new(&(h * factor));
    let reference = svd.singular_values.max().max(h.norm() * factor.norm());
    let cutoff = PINV_TOLERANCE * reference;
    let mut gain = DMatrix::zeros(m, d);
    let mut null = Vec::new();
    for k in 0..r {
        let sv = svd.singular_values[k];
        if sv > cutoff {
            gain += (factor * svd.v.column(k)) * (svd.u.column(k).transpose() / sv);
        } else {
            null.push(svd.v.column(k).into_owned());
        }
    }
    let null_basis = if null.is_empty() {
        DMatrix::zeros(r, 0)
    } else {
        DMatrix::from_columns(&null)
    };
    let posterior = factor * &null_basis;
    Conditioning {
        gain,
        covariance: symmetrize(&(&posterior * posterior.transpose())),
        factor: posterior,
        null_basis,
    }
}

/// `T' = T + K(H − H T)`.
pub fn propagate_weights(
    weights: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> DMatrix<f64> {
    if gain.ncols() == 0 {
        return weights.clone();
    }
    weights + gain * (h - h * weights)
}

/// `M' = M − K H M`, symmetrized and projected back onto the PSD cone.
///
/// Evaluated as `(I − KH) M (I − KH)ᵀ`, which equals `M − KHM` for this gain
/// and stays positive semidefinite in floating point.
pub fn propagate_covariance(
    covariance: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if gain.ncols() == 0 {
        return Ok(covariance.clone());
    }
    let mut keep = -(gain * h);
    for d in 0..keep.nrows() {
        keep[(d, d)] += 1.0;
    }
    let next = symmetrize(&(&keep * covariance * keep.transpose()));
    let tol = PSD_TOLERANCE * next.amax().max(1.0);
    let eig = next.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::Numerical(format!(
            "updated covariance has eigenvalue {min:.3e} below tolerance"
        )));
    }
    if min >= 0.0 {
        return Ok(next);
    }
    let clamped = eig.eigenvalues.map(|x| x.max(0.0));
    let mut fixed =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    // rows that carried no uncertainty stay exactly zero
    for r in 0..covariance.nrows() {
        if covariance.row(r).iter().all(|&x| x == 0.0) {
            fixed.row_mut(r).fill(0.0);
            fixed.column_mut(r).fill(0.0);
        }
    }
    Ok(symmetrize(&fixed))
}

/// `mean' = mean + K (observed − predicted)`.
pub fn local_mean_update(
    mean: &DVector<f64>,
    gain: &DMatrix<f64>,
    observed: &DVector<f64>,
    predicted: &DVector<f64>,
) -> DVector<f64> {
    if gain.ncols() == 0 {
        return mean.clone();
    }
    mean + gain * (observed - predicted)
}

/// Everything public about one slot: the equilibrium and, when information
/// flows, every agent's observation matrix and gain.
#[derive(Debug, Clone)]
pub struct SlotPlan {
    pub slot: usize,
    pub constants: BehaviorConstants,
    pub omega_bar: f64,
    pub coeffs: StrategyCoefficients,
    /// Empty under private information.
    pub observations: Vec<ObservationMatrix>,
    /// Empty under private information.
    pub gains: Vec<DMatrix<f64>>,
    /// Error covariances after this slot's observation. Empty under private
    /// information.
    pub posteriors: Vec<Conditioning>,
}

impl SlotPlan {
    /// Equilibrium consumption of every agent given their posterior means.
    pub fn play(&self, means: &[DVector<f64>]) -> Vec<f64> {
        means
            .iter()
            .enumerate()
            .map(|(i, mean)| self.coeffs.consumption(i, mean))
            .collect()
    }

    /// Each agent's own Bayesian update from what it observed this slot.
    pub fn update_means(&self, means: &[DVector<f64>], consumptions: &[f64]) -> Vec<DVector<f64>> {
        if self.observations.is_empty() {
            return means.to_vec();
        }
        means
            .iter()
            .enumerate()
            .map(|(i, mean)| {
                let obs = &self.observations[i];
                local_mean_update(
                    mean,
                    &self.gains[i],
                    &obs.observe(consumptions),
                    &obs.predict(mean),
                )
            })
            .collect()
    }
}

/// Solves the slot's equilibrium and builds all observation matrices and
/// gains (full-network emulation).
pub fn plan_slot(scenario: &Scenario, slot: usize, public: &PublicBeliefs) -> Result<SlotPlan> {
    let constants = scenario.constants_at(slot)?;
    let omega_bar = scenario.forecast_at(slot).omega_bar;
    let coeffs = solve_bne(&constants, &public.weights, omega_bar)?;
    let (observations, gains, posteriors) = if scenario.info == Information::Private {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        let effective = coeffs.effective_weights(&public.weights);
        let n = public.n();
        let observations = (0..n)
            .map(|i| {
                observation_from_rows(
                    scenario.info,
                    scenario.graph.as_ref(),
                    &coeffs,
                    &|j| effective[j].clone(),
                    n,
                    i,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let posteriors: Vec<Conditioning> = observations
            .iter()
            .zip(&public.factors)
            .map(|(obs, s)| condition_factor(s, &obs.h))
            .collect();
        let gains = posteriors.iter().map(|c| c.gain.clone()).collect();
        (observations, gains, posteriors)
    };
    Ok(SlotPlan {
        slot,
        constants,
        omega_bar,
        coeffs,
        observations,
        gains,
        posteriors,
    })
}

/// Result of one filter step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub consumptions: Vec<f64>,
    pub plan: SlotPlan,
    pub next: BeliefState,
}

/// One slot of the filter for the whole population: equilibrium, play,
/// observation matrices, gains, weight and covariance updates, then every
/// agent's local mean update.
pub fn filter_step(scenario: &Scenario, slot: usize, state: &BeliefState) -> Result<StepOutcome> {
    if slot >= scenario.horizon {
        return Err(Error::Configuration(format!(
            "slot {slot} outside a horizon of {}",
            scenario.horizon
        )));
    }
    let plan = plan_slot(scenario, slot, &state.public)?;
    let consumptions = plan.play(&state.means);
    let next = BeliefState {
        public: state.public.advance(&plan),
        means: plan.update_means(&state.means, &consumptions),
    };
    Ok(StepOutcome {
        consumptions,
        plan,
        next,
    })
}

/// Public side of a whole time zone, computed once and reused by every run
/// with the same scenario.
#[derive(Debug, Clone)]
pub struct GameSchedule {
    pub plans: Vec<SlotPlan>,
    /// Public beliefs at the start of each slot.
    pub beliefs: Vec<PublicBeliefs>,
}

impl GameSchedule {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let mut public = PublicBeliefs::from_prior(&scenario.prior)?;
        let mut plans = Vec::with_capacity(scenario.horizon);
        let mut beliefs = Vec::with_capacity(scenario.horizon);
        for slot in 0..scenario.horizon {
            let plan = plan_slot(scenario, slot, &public)?;
            let next = if slot + 1 < scenario.horizon {
                Some(public.advance(&plan))
            } else {
                None
            };
            beliefs.push(public);
            plans.push(plan);
            match next {
                Some(p) => public = p,
                None => break,
            }
        }
        Ok(Self { plans, beliefs })
    }

    /// Consumption of every slot for one preference profile, together with
    /// the means held at the start of each slot.
    pub fn play(&self, prior: &PreferencePrior, preferences: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut means = initial_means(prior, preferences)?;
        let mut out = Vec::with_capacity(self.plans.len());
        for plan in &self.plans {
            let consumptions = plan.play(&means);
            means = plan.update_means(&means, &consumptions);
            out.push(consumptions);
        }
        Ok(out)
    }
}
