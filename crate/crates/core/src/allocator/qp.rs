//! Dense strictly convex QP with inequality constraints, solved by a dual active-set
//! iteration (Goldfarb–Idnani).
//!
//! ```text
//! minimize    ½ xᵀ H x + gᵀ x
//! subject to  C x ≥ b        (row j of C is constraint j)
//! ```
//!
//! The problems seen by the allocator have at most a dozen variables, so every
//! iteration re-solves the small projected systems from scratch instead of
//! maintaining factorization updates. Violated constraints are added in index
//! order (lowest first), which makes the iterate sequence reproducible.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("constraints are infeasible (detected at iteration {iterations})")]
    Infeasible { iterations: usize },
    #[error("active-set iteration did not converge in {iterations} iterations")]
    NotConverged { iterations: usize },
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Indices of active constraints at the solution.
    pub active: Vec<usize>,
    /// Lagrange multiplier per constraint (zero for inactive ones).
    pub multipliers: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl QpSolution {
    /// `‖H x + g − Cᵀ μ‖∞`, the stationarity residual of the KKT system.
    pub fn stationarity(&self, h: &DMatrix<f64>, g: &DVector<f64>, c: &DMatrix<f64>) -> f64 {
        let r = h * &self.x + g - c.transpose() * &self.multipliers;
        r.amax()
    }
}

pub fn solve(h: &DMatrix<f64>, g: &DVector<f64>, c: &DMatrix<f64>, b: &DVector<f64>) -> Result<QpSolution, QpError> {
    let n = h.nrows();
    let m = c.nrows();
    debug_assert_eq!(c.ncols(), n);
    debug_assert_eq!(b.len(), m);

    let chol = h.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let hinv = chol.inverse();
    let mut x = -(&hinv * g);

    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let max_iter = 20 * (m + n) + 50;
    let row_norms: Vec<f64> = (0..m).map(|j| c.row(j).norm()).collect();
    let mut iterations = 0;

    loop {
        let viol_tol = |j: usize, x: &DVector<f64>| 1e-11 * (1.0 + b[j].abs() + row_norms[j] * x.amax());
        let slack = |j: usize, x: &DVector<f64>| c.row(j).dot(&x.transpose()) - b[j];

        let Some(p) = (0..m).find(|&j| !active.contains(&j) && slack(j, &x) < -viol_tol(j, &x)) else {
            break;
        };
        let np: DVector<f64> = c.row(p).transpose();
        let mut up = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::NotConverged { iterations });
            }
            let (z, r) = step_directions(&hinv, c, &active, &np);

            // largest dual step that keeps active multipliers non-negative
            let mut t1 = f64::INFINITY;
            let mut block = None;
            for (i, &ri) in r.iter().enumerate() {
                if ri > 1e-14 {
                    let ratio = mult[i] / ri;
                    if ratio < t1 {
                        t1 = ratio;
                        block = Some(i);
                    }
                }
            }

            // np in the span of the active normals: no primal step changes constraint p
            let z_small = z.dot(&np) <= 1e-12 * np.dot(&(&hinv * &np));
            if z_small {
                let Some(k) = block else {
                    return Err(QpError::Infeasible { iterations });
                };
                for (i, mi) in mult.iter_mut().enumerate() {
                    *mi -= t1 * r[i];
                }
                up += t1;
                active.remove(k);
                mult.remove(k);
                continue;
            }

            let s = slack(p, &x);
            let t2 = -s / z.dot(&np);
            let t = t2.min(t1);
            x += t * &z;
            for (i, mi) in mult.iter_mut().enumerate() {
                *mi = (*mi - t * r[i]).max(0.0);
            }
            up += t;
            if t2 <= t1 {
                active.push(p);
                mult.push(up);
                break;
            }
            let k = block.expect("partial step implies a blocking constraint");
            active.remove(k);
            mult.remove(k);
        }
    }

    // Near-infeasible boxes drive the multipliers up until the active set loses
    // precision and the iterate leaves a constraint it believes is held. The margin
    // sits well above rounding on ill-conditioned Hessians.
    let broken = (0..m).any(|j| {
        let s = c.row(j).dot(&x.transpose()) - b[j];
        s < -1e-6 * (1.0 + b[j].abs() + row_norms[j] * x.amax())
    });
    if broken {
        return Err(QpError::Infeasible { iterations });
    }

    let mut multipliers = DVector::zeros(m);
    for (&j, &mu) in active.iter().zip(mult.iter()) {
        multipliers[j] = mu;
    }
    let objective = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
    Ok(QpSolution { x, active, multipliers, objective, iterations })
}

/// Primal direction `z` and dual direction `r` for adding constraint normal `np`.
fn step_directions(
    hinv: &DMatrix<f64>,
    c: &DMatrix<f64>,
    active: &[usize],
    np: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let hn = hinv * np;
    if active.is_empty() {
        return (hn, DVector::zeros(0));
    }
    let n = hinv.nrows();
    let mut nmat = DMatrix::zeros(n, active.len());
    for (k, &j) in active.iter().enumerate() {
        nmat.set_column(k, &c.row(j).transpose());
    }
    let hn_act = hinv * &nmat;
    let gram = nmat.transpose() * &hn_act;
    let rhs = nmat.transpose() * &hn;
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.pseudo_inverse(1e-14).map(|pinv| pinv * &rhs).unwrap_or_else(|_| DVector::zeros(active.len())),
    };
    let z = hn - hn_act * &r;
    (z, r)
}
