//! Least-norm solution plus null-space correction for an underdetermined linear
//! allocation `A Δu = W` with box limits on `u = u0 + Δu`.
//!
//! Everything here works on plain `DMatrix`/`DVector` so it can be exercised on
//! small synthetic problems as well as on the 6×12 vehicle matrix.

use super::qp::{self, QpError};
use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for rank, pseudo-inverse and null space.
pub const SVD_RELATIVE_TOL: f64 = 1e-10;

/// Pseudo-inverse, orthonormal null-space basis and numerical rank of a matrix.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub pinv: DMatrix<f64>,
    pub null_basis: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: DVector<f64>,
}

/// SVD-based decomposition. The matrix is padded with zero rows to a square
/// one so the full right-singular basis, including the null space, is available.
pub fn decompose(a: &DMatrix<f64>) -> Decomposition {
    let (m, n) = a.shape();
    if n == 0 {
        return Decomposition {
            pinv: DMatrix::zeros(0, m),
            null_basis: DMatrix::zeros(0, 0),
            rank: 0,
            singular_values: DVector::zeros(0),
        };
    }
    let size = m.max(n);
    let mut padded = DMatrix::zeros(size, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sv = svd.singular_values;
    let sigma_max = sv.amax();
    let cutoff = SVD_RELATIVE_TOL * sigma_max;

    let mut pinv = DMatrix::zeros(n, m);
    let mut null_cols = Vec::new();
    let mut rank = 0;
    for k in 0..sv.len().min(n) {
        let vk = v_t.row(k).transpose();
        if sigma_max > 0.0 && sv[k] > cutoff {
            rank += 1;
            let uk = u.column(k).rows(0, m).into_owned();
            pinv += (vk * uk.transpose()) / sv[k];
        } else {
            null_cols.push(vk);
        }
    }
    let null_basis = if null_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    Decomposition { pinv, null_basis, rank, singular_values: sv }
}

/// `Δu_LN = A⁺ W`, the minimum-norm (least-squares) solution.
pub fn least_norm(pinv: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    pinv * w
}

/// Data for the box-constrained quadratic over null-space coefficients λ:
///
/// ```text
/// u_sp = u0 + Δu_LN + Ñ λ
/// J    = (u_sp − u_pref)ᵀ R (u_sp − u_pref)
/// lower ≤ u_sp ≤ upper
/// ```
#[derive(Debug, Clone)]
pub struct NullSpaceProblem<'a> {
    pub null_basis: &'a DMatrix<f64>,
    pub du_ln: &'a DVector<f64>,
    pub u0: &'a DVector<f64>,
    pub u_pref: &'a DVector<f64>,
    /// Diagonal of R, all entries positive.
    pub weights: &'a DVector<f64>,
    pub lower: &'a DVector<f64>,
    pub upper: &'a DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct LambdaSolution {
    pub lambda: DVector<f64>,
    pub du: DVector<f64>,
    pub u_sp: DVector<f64>,
    pub objective: f64,
    /// Stationarity residual of the reduced KKT system.
    pub kkt_residual: f64,
    pub lower_active: Vec<bool>,
    pub upper_active: Vec<bool>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LambdaError {
    #[error("no null-space motion keeps the setpoint within limits")]
    Infeasible,
    #[error("reduced problem is degenerate: {0}")]
    Solver(QpError),
}

pub fn objective(u: &DVector<f64>, u_pref: &DVector<f64>, weights: &DVector<f64>) -> f64 {
    let d = u - u_pref;
    d.iter().zip(weights.iter()).map(|(di, wi)| wi * di * di).sum()
}

/// Minimizes J over λ subject to the box, returning a KKT point.
pub fn solve_lambda(p: &NullSpaceProblem<'_>) -> Result<LambdaSolution, LambdaError> {
    let n = p.u0.len();
    let r = p.null_basis.ncols();
    let base = p.u0 + p.du_ln;
    let tol = |i: usize| 1e-12 * (1.0 + p.lower[i].abs().max(p.upper[i].abs()));

    if r == 0 {
        if (0..n).any(|i| base[i] < p.lower[i] - tol(i) || base[i] > p.upper[i] + tol(i)) {
            return Err(LambdaError::Infeasible);
        }
        let u_sp = clamp_into(&base, p.lower, p.upper);
        return Ok(LambdaSolution {
            lambda: DVector::zeros(0),
            du: p.du_ln.clone(),
            objective: objective(&u_sp, p.u_pref, p.weights),
            lower_active: (0..n).map(|i| u_sp[i] <= p.lower[i]).collect(),
            upper_active: (0..n).map(|i| u_sp[i] >= p.upper[i]).collect(),
            u_sp,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }

    // J(λ) = λᵀ (ÑᵀRÑ) λ + 2 λᵀ ÑᵀR (base − u_pref) + const  →  H = 2ÑᵀRÑ, g = 2ÑᵀR d
    let rn = DMatrix::from_diagonal(p.weights) * p.null_basis;
    let h = 2.0 * p.null_basis.transpose() * &rn;
    let g = 2.0 * rn.transpose() * (&base - p.u_pref);

    // lower_i ≤ base_i + Ñ_i λ ≤ upper_i
    let mut c = DMatrix::zeros(2 * n, r);
    let mut b = DVector::zeros(2 * n);
    for i in 0..n {
        let row = p.null_basis.row(i);
        c.row_mut(i).copy_from(&row);
        b[i] = p.lower[i] - base[i];
        c.row_mut(n + i).copy_from(&(-row));
        b[n + i] = base[i] - p.upper[i];
    }

    let sol = qp::solve(&h, &g, &c, &b).map_err(|e| match e {
        QpError::Infeasible { .. } => LambdaError::Infeasible,
        other => LambdaError::Solver(other),
    })?;
    let kkt_residual = sol.stationarity(&h, &g, &c);
    let du = p.du_ln + p.null_basis * &sol.x;
    // rounding can leave a bound violated by ~1e-16; the contract is exact bounds
    let u_sp = clamp_into(&(p.u0 + &du), p.lower, p.upper);
    let du = &u_sp - p.u0;
    Ok(LambdaSolution {
        objective: objective(&u_sp, p.u_pref, p.weights),
        lower_active: (0..n).map(|i| sol.active.contains(&i)).collect(),
        upper_active: (0..n).map(|i| sol.active.contains(&(n + i))).collect(),
        lambda: sol.x,
        du,
        u_sp,
        kkt_residual,
        iterations: sol.iterations,
    })
}

fn clamp_into(u: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(u.len(), (0..u.len()).map(|i| u[i].clamp(lower[i], upper[i])))
}

/// Box-constrained weighted least squares used when no exact solution fits the limits:
/// minimize `‖A Δu − W‖²_S + μ J(u0 + Δu)` with `lower ≤ u0 + Δu ≤ upper`.
pub struct LeastViolation<'a> {
    pub a: &'a DMatrix<f64>,
    pub w: &'a DVector<f64>,
    /// Row weights S (diagonal).
    pub row_weights: &'a DVector<f64>,
    pub u0: &'a DVector<f64>,
    pub u_pref: &'a DVector<f64>,
    pub weights: &'a DVector<f64>,
    pub regularization: f64,
    pub lower: &'a DVector<f64>,
    pub upper: &'a DVector<f64>,
}

pub fn least_violation(p: &LeastViolation<'_>) -> Result<DVector<f64>, QpError> {
    let n = p.u0.len();
    let sa = DMatrix::from_diagonal(p.row_weights) * p.a;
    let h = 2.0 * (p.a.transpose() * &sa + p.regularization * DMatrix::from_diagonal(p.weights));
    let g = -2.0 * sa.transpose() * p.w
        + 2.0 * p.regularization * p.weights.component_mul(&(p.u0 - p.u_pref));
    let mut c = DMatrix::zeros(2 * n, n);
    let mut b = DVector::zeros(2 * n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        b[i] = p.lower[i] - p.u0[i];
        c[(n + i, i)] = -1.0;
        b[n + i] = p.u0[i] - p.upper[i];
    }
    let sol = qp::solve(&h, &g, &c, &b)?;
    let u = clamp_into(&(p.u0 + sol.x), p.lower, p.upper);
    Ok(u - p.u0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_of_wide_matrix() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, -1.0]);
        let d = decompose(&a);
        assert_eq!(d.rank, 2);
        assert_eq!(d.null_basis.ncols(), 2);
        assert!((&a * &d.null_basis).amax() < 1e-12);
        let gram = d.null_basis.transpose() * &d.null_basis;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-12);
        // A A⁺ A = A
        assert!((&a * &d.pinv * &a - &a).amax() < 1e-12);
    }

    #[test]
    fn decomposition_rank_deficient() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let d = decompose(&a);
        assert_eq!(d.rank, 1);
        assert_eq!(d.null_basis.ncols(), 2);
    }

    #[test]
    fn zero_wrench_gives_zero_least_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let d = decompose(&a);
        let du = least_norm(&d.pinv, &DVector::zeros(1));
        assert_eq!(du, DVector::zeros(2));
    }

    #[test]
    fn orthogonal_request_is_reported_not_hidden() {
        // range(A) = span(e1); W = e2
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let d = decompose(&a);
        let w = DVector::from_vec(vec![0.0, 3.0]);
        let du = least_norm(&d.pinv, &w);
        assert!(du.amax() < 1e-15);
        assert!(((&a * du - &w).norm() - 3.0).abs() < 1e-12);
    }

    fn toy(upper0: f64) -> LambdaSolution {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let d = decompose(&a);
        let du_ln = least_norm(&d.pinv, &DVector::from_vec(vec![1.0]));
        let zeros = DVector::zeros(2);
        let weights = DVector::from_element(2, 1.0);
        let lower = DVector::zeros(2);
        let upper = DVector::from_vec(vec![upper0, 0.6]);
        solve_lambda(&NullSpaceProblem {
            null_basis: &d.null_basis,
            du_ln: &du_ln,
            u0: &zeros,
            u_pref: &zeros,
            weights: &weights,
            lower: &lower,
            upper: &upper,
        })
        .unwrap()
    }

    #[test]
    fn two_actuator_toy() {
        let s = toy(0.6);
        assert!((s.u_sp[0] - 0.5).abs() < 1e-12 && (s.u_sp[1] - 0.5).abs() < 1e-12);
        let s = toy(0.4);
        assert!((s.u_sp[0] - 0.4).abs() < 1e-12 && (s.u_sp[1] - 0.6).abs() < 1e-12);
        assert!(s.upper_active[0]);
    }

    #[test]
    fn slack_bounds_stay_at_trim() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let d = decompose(&a);
        let du_ln = DVector::zeros(3);
        let u0 = DVector::from_vec(vec![0.2, 0.3, 0.4]);
        let weights = DVector::from_element(3, 1.0);
        let lower = DVector::from_element(3, -10.0);
        let upper = DVector::from_element(3, 10.0);
        let s = solve_lambda(&NullSpaceProblem {
            null_basis: &d.null_basis,
            du_ln: &du_ln,
            u0: &u0,
            u_pref: &u0,
            weights: &weights,
            lower: &lower,
            upper: &upper,
        })
        .unwrap();
        assert!(s.lambda.amax() < 1e-12);
        assert!(s.objective < 1e-20);
    }

    #[test]
    fn infeasible_box() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let d = decompose(&a);
        let du_ln = least_norm(&d.pinv, &DVector::from_vec(vec![5.0]));
        let zeros = DVector::zeros(2);
        let weights = DVector::from_element(2, 1.0);
        let upper = DVector::from_element(2, 1.0);
        let r = solve_lambda(&NullSpaceProblem {
            null_basis: &d.null_basis,
            du_ln: &du_ln,
            u0: &zeros,
            u_pref: &zeros,
            weights: &weights,
            lower: &zeros,
            upper: &upper,
        });
        assert_eq!(r.unwrap_err(), LambdaError::Infeasible);
    }
}
