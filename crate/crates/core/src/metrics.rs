//! Analytic expectations for σ-correlated populations.
//!
//! Unless a function takes an explicit `variance`, second moments are per
//! unit preference variance (`σ_ii = 1`). Utility and welfare expressions
//! assume `ω̄ = 0`.

use serde::Serialize;

use crate::equilibrium::{
    closed_form_complete, closed_form_private, ClosedFormCoefficients, ClosedFormInfo,
};
use crate::error::Result;
use crate::model::{unit_interval, Behavior, BehaviorConstants, PricingPolicy, SigmaCorrelation};
use crate::scalar::Scalar;

/// `b(ḡ − ω̄μ)`, the same under every information structure.
pub fn expected_demand<F: Scalar>(b: F, g_bar: F, omega_bar: F, mu: F) -> F {
    b * (g_bar - omega_bar * mu)
}

/// Fraction of a single preference's variance carried by the population
/// mean: `(1 + (N−1)σ)/N`.
fn mean_share<F: Scalar>(sigma: F, n: usize) -> F {
    let nf = F::from_usize(n);
    (F::one() + (nf - F::one()) * sigma) / nf
}

/// `Var(L/N) = ((1 + (N−1)σ)/N)·a²` under private information.
pub fn demand_variance_private<F: Scalar>(a: F, sigma: F, n: usize) -> F {
    mean_share(sigma, n) * a * a
}

/// `((N−1)/N²)·a²`.
///
/// This is the spread of the `a`-weighted deviation terms alone. Realized
/// demand under complete information also moves with the population mean;
/// see [`demand_variance_complete_total`].
pub fn demand_variance_complete<F: Scalar>(a: F, n: usize) -> F {
    let nf = F::from_usize(n);
    (nf - F::one()) / (nf * nf) * a * a
}

/// Variance of `L/N` under complete information. Deviations from the
/// realized mean cancel in the total, so `L/N = b(ĝ − μω̄)` and the variance
/// is that of `b·ĝ`: `b²(1 + (N−1)σ)/N`.
pub fn demand_variance_complete_total<F: Scalar>(b: F, sigma: F, n: usize) -> F {
    mean_share(sigma, n) * b * b
}

/// Large-population form of the private demand variance, `σ/(Nλσ + 2α)²`.
pub fn demand_variance_private_large_n<F: Scalar>(sigma: F, lambda: F, alpha: F, n: usize) -> F {
    let d = F::from_usize(n) * lambda * sigma + F::lit(2.0) * alpha;
    sigma / (d * d)
}

/// `d/dσ` of [`demand_variance_private_large_n`]:
/// `(2α − Nλσ)/(Nλσ + 2α)³`. Positive while `Nλσ < 2α`.
pub fn variance_sensitivity_private<F: Scalar>(sigma: F, lambda: F, alpha: F, n: usize) -> F {
    let nls = F::from_usize(n) * lambda * sigma;
    let two_alpha = F::lit(2.0) * alpha;
    let d = nls + two_alpha;
    (two_alpha - nls) / (d * d * d)
}

#[allow(clippy::too_many_arguments)]
fn quadratic_form<F: Scalar>(
    a: F,
    b: F,
    price: F,
    alpha: F,
    sigma: F,
    n: usize,
    g_bar: F,
    variance: F,
) -> F {
    let nf = F::from_usize(n);
    let spread = (nf - F::one()) / nf * price * sigma + price / nf + alpha;
    (b - (price + alpha) * b * b) * g_bar * g_bar + variance * (a - spread * a * a)
}

/// `E[U]/N = (b − (γ+α)b²)ḡ² − (((N−1)/N)γσ + γ/N + α)a² + a`.
pub fn expected_aggregate_utility<F: Scalar>(
    a: F,
    b: F,
    gamma: F,
    alpha: F,
    sigma: F,
    n: usize,
    g_bar: F,
) -> F {
    quadratic_form(a, b, gamma, alpha, sigma, n, g_bar, F::one())
}

/// [`expected_aggregate_utility`] for preference variance `variance`.
#[allow(clippy::too_many_arguments)]
pub fn expected_aggregate_utility_scaled<F: Scalar>(
    a: F,
    b: F,
    gamma: F,
    alpha: F,
    sigma: F,
    n: usize,
    g_bar: F,
    variance: F,
) -> F {
    quadratic_form(a, b, gamma, alpha, sigma, n, g_bar, variance)
}

/// `E[W]/N`: the utility form with `γ` replaced by `κ`. Price payments are a
/// transfer between consumers and the operator, so only the cost curvature
/// remains.
pub fn expected_welfare<F: Scalar>(
    a: F,
    b: F,
    kappa: F,
    alpha: F,
    sigma: F,
    n: usize,
    g_bar: F,
) -> F {
    quadratic_form(a, b, kappa, alpha, sigma, n, g_bar, F::one())
}

/// [`expected_welfare`] for preference variance `variance`.
#[allow(clippy::too_many_arguments)]
pub fn expected_welfare_scaled<F: Scalar>(
    a: F,
    b: F,
    kappa: F,
    alpha: F,
    sigma: F,
    n: usize,
    g_bar: F,
    variance: F,
) -> F {
    quadratic_form(a, b, kappa, alpha, sigma, n, g_bar, variance)
}

/// `E[U]/N` (or `E[W]/N` with `price = κ`) when every agent plays
/// `a(g_i − ĝ) + bĝ` with `ĝ` the realized mean:
/// `(b − (p+α)b²)ḡ² + d[(1−q)(a − αa²) + q(b − (p+α)b²)]`, `q = (1+(N−1)σ)/N`.
#[allow(clippy::too_many_arguments)]
pub fn expected_quadratic_complete<F: Scalar>(
    a: F,
    b: F,
    price: F,
    alpha: F,
    sigma: F,
    n: usize,
    g_bar: F,
    variance: F,
) -> F {
    let q = mean_share(sigma, n);
    let level = b - (price + alpha) * b * b;
    level * g_bar * g_bar + variance * ((F::one() - q) * (a - alpha * a * a) + q * level)
}

/// `d/dσ` of [`expected_welfare`] at fixed coefficients: `−((N−1)/N)κa²`.
/// With complete-information `a` and large `N` this tends to `−κ/(4α²)`.
pub fn welfare_sensitivity<F: Scalar>(a: F, kappa: F, n: usize) -> F {
    let nf = F::from_usize(n);
    -(nf - F::one()) / nf * kappa * a * a
}

/// Large-population ratios between behavior models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorollaryRatios<F = f64> {
    /// `E[s^S]/E[s^U] = 2(γ+α)/(γ+2α)`.
    pub demand_s_over_u: F,
    /// `E[s^W]/E[s^U] = (γ+α)/(κ+α)`.
    pub demand_w_over_u: F,
    /// `E[s^S]/E[s^W] = 2(κ+α)/(γ+2α)`.
    pub demand_s_over_w: F,
    /// `E[U^S]/E[U^U] = (4α²+4αγ)/(4α²+4αγ+γ²)`.
    pub utility_s_over_u: F,
    /// `E[U^W]/E[U^U] = (γ+α)(2κ+α−γ)/(κ+α)²`.
    pub utility_w_over_u: F,
    /// `E[W^S]/E[W^W] = (4α²+4αγ+4κ(γ−κ))/(4α²+4αγ+γ²)`.
    pub welfare_s_over_w: F,
    /// `E[W^U]/E[W^W] = (κ+α)(2γ+α−κ)/(γ+α)²`.
    pub welfare_u_over_w: F,
}

pub fn corollary_ratios<F: Scalar>(gamma: F, kappa: F, alpha: F) -> CorollaryRatios<F> {
    let (two, four) = (F::lit(2.0), F::lit(4.0));
    let ga = gamma + alpha;
    let ka = kappa + alpha;
    let base = four * alpha * alpha + four * alpha * gamma;
    let full = base + gamma * gamma;
    CorollaryRatios {
        demand_s_over_u: two * ga / (gamma + two * alpha),
        demand_w_over_u: ga / ka,
        demand_s_over_w: two * ka / (gamma + two * alpha),
        utility_s_over_u: base / full,
        utility_w_over_u: ga * (two * kappa + alpha - gamma) / (ka * ka),
        welfare_s_over_w: (base + four * kappa * (gamma - kappa)) / full,
        welfare_u_over_w: ka * (two * gamma + alpha - kappa) / (ga * ga),
    }
}

/// Analytic per-capita predictions for one behavior and information model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticReport<F = f64> {
    pub behavior: Behavior,
    pub info: ClosedFormInfo,
    pub policy: PricingPolicy<F>,
    pub n: usize,
    pub prior: SigmaCorrelation<F>,
    pub g_bar: F,
    pub omega_bar: F,
    pub coefficients: ClosedFormCoefficients<F>,
    pub expected_demand_per_capita: F,
    /// `Var(L/N)` at the prior's variance.
    pub demand_variance: F,
    /// Only defined for `ω̄ = 0`.
    pub expected_utility_per_capita: Option<F>,
    /// Only defined for `ω̄ = 0`.
    pub expected_welfare_per_capita: Option<F>,
}

pub fn analytic_report<F: Scalar>(
    behavior: Behavior,
    info: ClosedFormInfo,
    policy: &PricingPolicy<F>,
    n: usize,
    prior: SigmaCorrelation<F>,
    g_bar: F,
    omega_bar: F,
) -> Result<AnalyticReport<F>> {
    unit_interval("sigma", prior.sigma)?;
    let constants = BehaviorConstants::for_policy(behavior, policy, n)?;
    let sigma = prior.sigma;
    let d = prior.diag;
    let coefficients = match info {
        ClosedFormInfo::Private => closed_form_private(&constants, sigma, n)?,
        ClosedFormInfo::Complete => closed_form_complete(&constants, sigma, n)?,
    };
    let (a, b) = (coefficients.a, coefficients.b);
    let (gamma, kappa, alpha) = (policy.gamma, policy.kappa, policy.alpha);
    let demand_variance = d * match info {
        ClosedFormInfo::Private => demand_variance_private(a, sigma, n),
        ClosedFormInfo::Complete => demand_variance_complete_total(b, sigma, n),
    };
    let (utility, welfare) = if omega_bar == F::zero() {
        match info {
            ClosedFormInfo::Private => (
                expected_aggregate_utility_scaled(a, b, gamma, alpha, sigma, n, g_bar, d),
                expected_welfare_scaled(a, b, kappa, alpha, sigma, n, g_bar, d),
            ),
            ClosedFormInfo::Complete => (
                expected_quadratic_complete(a, b, gamma, alpha, sigma, n, g_bar, d),
                expected_quadratic_complete(a, b, kappa, alpha, sigma, n, g_bar, d),
            ),
        }
    } else {
        (F::nan(), F::nan())
    };
    let defined = |x: F| (!x.is_nan()).then_some(x);
    Ok(AnalyticReport {
        behavior,
        info,
        policy: *policy,
        n,
        prior,
        g_bar,
        omega_bar,
        coefficients,
        expected_demand_per_capita: expected_demand(b, g_bar, omega_bar, constants.mu),
        demand_variance,
        expected_utility_per_capita: defined(utility),
        expected_welfare_per_capita: defined(welfare),
    })
}
