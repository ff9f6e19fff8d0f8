//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative cut-off for singular values treated as zero.
pub const PINV_TOLERANCE: f64 = 1e-10;

/// Moore–Penrose pseudo-inverse.
///
/// Singular values below `PINV_TOLERANCE · max(σ_max, reference_scale)` are
/// treated as zero. `reference_scale` is the magnitude the matrix would have
/// without cancellation; passing it keeps a matrix made only of rounding
/// noise from being inverted.
pub fn pseudo_inverse(m: &DMatrix<f64>, reference_scale: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = Svd::new(m);
    let sigma_max = svd.singular_values.max();
    let cutoff = PINV_TOLERANCE * sigma_max.max(reference_scale.abs());
    let mut p = DMatrix::zeros(c, r);
    for k in 0..c {
        let s = svd.singular_values[k];
        if s > cutoff && s > 0.0 {
            p += svd.v.column(k) * (svd.u.column(k).transpose() / s);
        }
    }
    p
}

/// Singular value decomposition `A = U diag(s) Vᵀ` by one-sided Jacobi
/// rotations.
///
/// `V` is a full orthonormal `c × c` basis, so columns with `s = 0` span the
/// null space. Columns of `U` belonging to zero singular values are zero.
/// Small singular values come out with high relative accuracy, which the
/// filter relies on when information arrives through tiny coefficients.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    const MAX_SWEEPS: usize = 60;

    pub fn new(a: &DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let mut w = a.clone();
        let mut v = DMatrix::<f64>::identity(cols, cols);
        for _ in 0..Self::MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..cols {
                for q in p + 1..cols {
                    let alpha = w.column(p).norm_squared();
                    let beta = w.column(q).norm_squared();
                    let gamma = w.column(p).dot(&w.column(q));
                    if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = cs * t;
                    rotate(&mut w, p, q, cs, sn);
                    rotate(&mut v, p, q, cs, sn);
                }
            }
            if !rotated {
                break;
            }
        }
        let singular_values = DVector::from_fn(cols, |k, _| w.column(k).norm());
        let mut u = DMatrix::zeros(rows, cols);
        for k in 0..cols {
            let s = singular_values[k];
            if s > 0.0 {
                u.set_column(k, &(w.column(k) / s));
            }
        }
        Self {
            u,
            singular_values,
            v,
        }
    }
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, cs: f64, sn: f64) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, p)], m[(r, q)]);
        m[(r, p)] = cs * a - sn * b;
        m[(r, q)] = sn * a + cs * b;
    }
}

/// Ratio of extreme singular values; infinite for singular matrices.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = m.clone().singular_values();
    let (max, min) = (s.max(), s.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let p = pseudo_inverse(&m, 0.0);
        assert_relative_eq!(&m * &p, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let p = pseudo_inverse(&DMatrix::zeros(3, 2), 1.0);
        assert_eq!(p, DMatrix::zeros(2, 3));
    }

    #[test]
    fn rounding_noise_is_not_inverted() {
        let m = DMatrix::from_element(1, 1, 1e-17);
        assert_eq!(pseudo_inverse(&m, 1.0)[(0, 0)], 0.0);
        assert_relative_eq!(pseudo_inverse(&m, 0.0)[(0, 0)], 1e17, max_relative = 1e-12);
    }

    #[test]
    fn jacobi_svd_reconstructs() {
        let a = DMatrix::from_row_slice(
            3,
            4,
            &[
                1.0, 2.0, 0.0, -1.0, 2.0, 4.0, 0.0, -2.0, 0.5, 0.0, 3.0, 1e-9,
            ],
        );
        let svd = Svd::new(&a);
        let rebuilt = &svd.u * DMatrix::from_diagonal(&svd.singular_values) * svd.v.transpose();
        assert_relative_eq!(rebuilt, a, epsilon = 1e-14);
        assert_relative_eq!(
            svd.v.transpose() * &svd.v,
            DMatrix::identity(4, 4),
            epsilon = 1e-14
        );
        let zero = svd.singular_values.iter().filter(|&&s| s < 1e-12).count();
        assert_eq!(zero, 2);
    }

    #[test]
    fn jacobi_svd_resolves_tiny_singular_values() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-12]));
        let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let svd = Svd::new(&(&rot * a * rot.transpose()));
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(f64::total_cmp);
        assert_relative_eq!(s[0], 1e-12, max_relative = 1e-3);
    }

    #[test]
    fn rank_deficient_pinv_satisfies_penrose() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let p = pseudo_inverse(&m, 0.0);
        assert_relative_eq!(&m * &p * &m, m, epsilon = 1e-12);
        assert_relative_eq!(&p * &m * &p, p, epsilon = 1e-12);
    }
}
