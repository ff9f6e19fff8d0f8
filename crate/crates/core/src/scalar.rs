//! Scalar abstraction for the closed-form parts of the crate.
//!
//! Everything that is a plain formula (prices, utilities, equilibrium
//! constants, analytic demand and welfare expressions) is written against
//! [`Scalar`] so it runs in `f32` or `f64`. The matrix machinery (equilibrium
//! solver, belief filter, Monte Carlo) is `f64` only: its tolerances sit well
//! below `f32` resolution.

use std::fmt::Debug;

use num_traits::Float;

pub trait Scalar: Float + Debug + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Never fails for the float types we support.
    fn lit(x: f64) -> Self {
        Self::from(x).expect("literal representable in scalar type")
    }

    fn from_usize(n: usize) -> Self {
        Self::from(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where T: Float + Debug + Default + Send + Sync + 'static {}
