//! Linear Bayesian Nash equilibrium strategies.
//!
//! Agent `i` plays `s_i = v_iᵀ E_i[g̃] + r_i` where `E_i[g̃] = T_i g̃` is its
//! posterior mean of the augmented profile `g̃ = [g; ḡ]`. Substituting into
//! the best response and matching coefficients of `g̃` gives, for every `i`,
//!
//! ```text
//! v_iᵀ T_i + ρλ Σ_{j≠i} v_jᵀ T_j T_i = ρ e_iᵀ
//! r_i      + ρλ Σ_{j≠i} r_j          = −ρ μ ω̄
//! ```
//!
//! The `v` system is rank deficient whenever some `T_i` is (private
//! information at the first slot, for instance): only `T_iᵀ v_i` is pinned
//! down. Because row `i` of `T_i` is `e_iᵀ`, any solution of
//!
//! ```text
//! v_i + ρλ Σ_{j≠i} T_jᵀ v_j = ρ e_i
//! ```
//!
//! also solves the system above, and this one is nonsingular for `ρλ < 1`.
//! [`solve_bne`] reduces it to a single `(N+1)`-dimensional solve through
//! `S = Σ_j T_jᵀ v_j`; [`solve_bne_stacked`] assembles the full
//! `N(N+1)`-dimensional system and factors it directly.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::condition_estimate;
use crate::model::{unit_interval, BehaviorConstants};
use crate::scalar::Scalar;

/// Residual bound every solved equilibrium must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Per-agent linear strategy `(v_i, r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyCoefficients {
    pub v: Vec<DVector<f64>>,
    pub r: Vec<f64>,
}

impl StrategyCoefficients {
    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// Consumption of agent `i` given its posterior mean of `g̃`.
    pub fn consumption(&self, i: usize, mean: &DVector<f64>) -> f64 {
        self.v[i].dot(mean) + self.r[i]
    }

    /// `T_iᵀ v_i`: the coefficients of realized consumption on `g̃`. Unlike
    /// `v_i` itself these are unique.
    pub fn effective_weights(&self, weights: &[DMatrix<f64>]) -> Vec<DVector<f64>> {
        self.v
            .iter()
            .zip(weights)
            .map(|(v, t)| t.tr_mul(v))
            .collect()
    }
}

fn check_weights(weights: &[DMatrix<f64>]) -> Result<usize> {
    let n = weights.len();
    if n == 0 {
        return Err(invalid("weights", "need at least one agent"));
    }
    for (i, t) in weights.iter().enumerate() {
        if t.shape() != (n + 1, n + 1) {
            return Err(invalid(
                "weights",
                format!("T_{i} is {:?}, expected {}x{}", t.shape(), n + 1, n + 1),
            ));
        }
    }
    Ok(n)
}

/// Solves for the unique linear equilibrium given every agent's estimation
/// weights.
pub fn solve_bne(
    constants: &BehaviorConstants,
    weights: &[DMatrix<f64>],
    omega_bar: f64,
) -> Result<StrategyCoefficients> {
    let n = check_weights(weights)?;
    let m = n + 1;
    let (rho, c) = (constants.rho, constants.coupling());
    let identity = DMatrix::<f64>::identity(m, m);

    // P_j = (I − c T_jᵀ)⁻¹ and B_j = T_jᵀ P_j
    let mut resolvents = Vec::with_capacity(n);
    let mut sum_b = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (j, t) in weights.iter().enumerate() {
        let a = &identity - t.transpose() * c;
        let p = a
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::SolverFailure {
                condition: condition_estimate(&a),
            })?;
        let b = t.tr_mul(&p);
        rhs.axpy(rho, &b.column(j), 1.0);
        sum_b += &b;
        resolvents.push(p);
    }
    let system = &identity + sum_b * c;
    let s = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolverFailure {
            condition: condition_estimate(&system),
        })?;

    let v = resolvents
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut target = -&s * c;
            target[i] += rho;
            p * target
        })
        .collect();
    let coeffs = StrategyCoefficients {
        v,
        r: solve_offsets(constants, n, omega_bar)?,
    };
    verify(coeffs, weights, constants, omega_bar)
}

/// Same equilibrium as [`solve_bne`], by dense LU with partial pivoting on the
/// stacked `N(N+1)` system. Cubic in `N(N+1)`; meant for small populations
/// and for cross-checking.
pub fn solve_bne_stacked(
    constants: &BehaviorConstants,
    weights: &[DMatrix<f64>],
    omega_bar: f64,
) -> Result<StrategyCoefficients> {
    let n = check_weights(weights)?;
    let m = n + 1;
    let (rho, c) = (constants.rho, constants.coupling());
    let dim = n * m;
    let mut system = DMatrix::<f64>::identity(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for i in 0..n {
        rhs[i * m + i] = rho;
        for (j, t) in weights.iter().enumerate() {
            if j != i {
                system
                    .view_mut((i * m, j * m), (m, m))
                    .copy_from(&(t.transpose() * c));
            }
        }
    }
    let x = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolverFailure {
            condition: condition_estimate(&system),
        })?;
    let v = (0..n).map(|i| x.rows(i * m, m).into_owned()).collect();
    let coeffs = StrategyCoefficients {
        v,
        r: solve_offsets(constants, n, omega_bar)?,
    };
    verify(coeffs, weights, constants, omega_bar)
}

fn verify(
    coeffs: StrategyCoefficients,
    weights: &[DMatrix<f64>],
    constants: &BehaviorConstants,
    omega_bar: f64,
) -> Result<StrategyCoefficients> {
    let residual = equilibrium_residual(&coeffs, weights, constants, omega_bar);
    if residual <= RESIDUAL_TOLERANCE {
        Ok(coeffs)
    } else {
        Err(Error::Numerical(format!(
            "equilibrium residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:.0e}"
        )))
    }
}

/// Solves `r_i + ρλ Σ_{j≠i} r_j = −ρμω̄` by LU on the `N×N` system.
pub fn solve_offsets(constants: &BehaviorConstants, n: usize, omega_bar: f64) -> Result<Vec<f64>> {
    let c = constants.coupling();
    let system = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { c });
    let rhs = DVector::from_element(n, -constants.rho * constants.mu * omega_bar);
    let r = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolverFailure {
            condition: condition_estimate(&system),
        })?;
    Ok(r.iter().copied().collect())
}

/// Max-norm residual of both coefficient systems; zero at an exact
/// equilibrium.
pub fn equilibrium_residual(
    coeffs: &StrategyCoefficients,
    weights: &[DMatrix<f64>],
    constants: &BehaviorConstants,
    omega_bar: f64,
) -> f64 {
    let n = coeffs.n();
    let (rho, c) = (constants.rho, constants.coupling());
    let w = coeffs.effective_weights(weights);
    let total_w = w.iter().fold(DVector::zeros(n + 1), |acc, wi| acc + wi);
    let mut worst = 0.0f64;
    for i in 0..n {
        let inner = &coeffs.v[i] + (&total_w - &w[i]) * c;
        let mut res = weights[i].tr_mul(&inner);
        res[i] -= rho;
        worst = worst.max(res.amax());
    }
    let total_r: f64 = coeffs.r.iter().sum();
    for &ri in &coeffs.r {
        let res = ri + c * (total_r - ri) + rho * constants.mu * omega_bar;
        worst = worst.max(res.abs());
    }
    worst
}

/// Best response `(g_i − μω̄ − λ Σ_{j≠i} E_i[s_j]) / (2(τ + α))`.
pub fn best_response<F: Scalar>(
    constants: &BehaviorConstants<F>,
    preference: F,
    omega_bar: F,
    expected_sum_of_others: F,
) -> F {
    constants.rho
        * (preference - constants.mu * omega_bar - constants.lambda * expected_sum_of_others)
}

/// Which static information structure a closed form describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClosedFormInfo {
    Private,
    Complete,
}

/// Symmetric equilibrium `s_i = a(g_i − m) + b(m − μω̄)` where `m` is the
/// prior mean (private information) or the realized population mean
/// (complete information).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormCoefficients<F = f64> {
    /// Weight on the own deviation.
    pub a: F,
    /// Weight on the mean level.
    pub b: F,
    pub mu: F,
    pub info: ClosedFormInfo,
}

impl<F: Scalar> ClosedFormCoefficients<F> {
    pub fn strategy(&self, preference: F, reference_mean: F, omega_bar: F) -> F {
        self.a * (preference - reference_mean) + self.b * (reference_mean - omega_bar * self.mu)
    }
}

impl ClosedFormCoefficients<f64> {
    /// Writes the closed form as `(v, r)` coefficients over `g̃` for a
    /// population of `n`. For complete information the population mean is
    /// read off the posterior mean, which equals the realized mean once the
    /// sum of preferences is known.
    pub fn embed(&self, n: usize, omega_bar: f64) -> StrategyCoefficients {
        let v = (0..n)
            .map(|i| {
                let mut v = DVector::zeros(n + 1);
                match self.info {
                    ClosedFormInfo::Private => {
                        v[n] = self.b - self.a;
                    }
                    ClosedFormInfo::Complete => {
                        let share = (self.b - self.a) / n as f64;
                        v.rows_mut(0, n).fill(share);
                    }
                }
                v[i] += self.a;
                v
            })
            .collect();
        StrategyCoefficients {
            v,
            r: vec![-self.b * omega_bar * self.mu; n],
        }
    }
}

fn check_population(n: usize) -> Result<()> {
    if n == 0 {
        Err(invalid("n", "population must have at least one consumer"))
    } else {
        Ok(())
    }
}

/// Equilibrium under private information with σ-correlated preferences:
/// `a = ρ / (1 + λρσ(N−1))`, `b = ρ / (1 + λρ(N−1))`.
pub fn closed_form_private<F: Scalar>(
    constants: &BehaviorConstants<F>,
    sigma: F,
    n: usize,
) -> Result<ClosedFormCoefficients<F>> {
    unit_interval("sigma", sigma)?;
    check_population(n)?;
    let others = F::from_usize(n - 1);
    let c = constants.coupling();
    Ok(ClosedFormCoefficients {
        a: constants.rho / (F::one() + c * sigma * others),
        b: constants.rho / (F::one() + c * others),
        mu: constants.mu,
        info: ClosedFormInfo::Private,
    })
}

/// Equilibrium under complete information: `a = ρ / (1 − λρ)` with the same
/// `b` as the private case.
pub fn closed_form_complete<F: Scalar>(
    constants: &BehaviorConstants<F>,
    sigma: F,
    n: usize,
) -> Result<ClosedFormCoefficients<F>> {
    unit_interval("sigma", sigma)?;
    check_population(n)?;
    let c = constants.coupling();
    let gap = F::one() - c;
    if gap.abs() <= F::epsilon() * F::lit(16.0) {
        return Err(Error::Degenerate(format!(
            "λρ = {c:?} makes the complete-information weight unbounded"
        )));
    }
    let others = F::from_usize(n - 1);
    Ok(ClosedFormCoefficients {
        a: constants.rho / gap,
        b: constants.rho / (F::one() + c * others),
        mu: constants.mu,
        info: ClosedFormInfo::Complete,
    })
}
