//! Dynamic control allocation.
//!
//! The wrench map is linearized around an operating point (`A = ∂h/∂u`), the
//! requested wrench deviation is met by a least-norm solution, and the remaining
//! freedom in `null(A)` is spent on keeping the setpoint close to the trim input
//! while respecting actuator limits. Failed actuators are taken out of `A` and
//! their locked contribution is moved to the right-hand side.

pub mod nullspace;
pub mod qp;
mod trim;

pub use trim::{failure_trim, find_trim, TrimError, TrimPhase, TrimPoint, CRUISE_ALPHA_RANGE};

use crate::model::{self, ModelError, RigidBodyState, Wrench};
use crate::params::{ActuatorBounds, ActuatorVector, Vehicle, ACTUATOR_NAMES, NUM_ACTUATORS, NUM_ROTORS, OMEGA, TILT};
use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3};
use nullspace::{LambdaError, LeastViolation, NullSpaceProblem};

pub type EffMatrix = SMatrix<f64, 6, NUM_ACTUATORS>;
pub type AllocVector = SVector<f64, NUM_ACTUATORS>;

/// Variables the allocator solves in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coordinates {
    /// Actuator values as commanded (rad/s, rad).
    #[default]
    Actuator,
    /// Rotor channels replaced by `t = ω²`; the rotor part of the wrench is then linear
    /// in `t` for fixed tilts.
    SquaredRotorSpeed,
}

impl Coordinates {
    fn is_rotor(i: usize) -> bool {
        (OMEGA..OMEGA + NUM_ROTORS).contains(&i)
    }

    pub fn value(self, i: usize, u: f64) -> f64 {
        match self {
            Coordinates::SquaredRotorSpeed if Self::is_rotor(i) => u * u,
            _ => u,
        }
    }

    pub fn actuator_value(self, i: usize, v: f64) -> f64 {
        match self {
            Coordinates::SquaredRotorSpeed if Self::is_rotor(i) => v.max(0.0).sqrt(),
            _ => v,
        }
    }

    pub fn to_alloc(self, u: &ActuatorVector) -> AllocVector {
        AllocVector::from_fn(|i, _| self.value(i, u[i]))
    }

    pub fn from_alloc(self, v: &AllocVector) -> ActuatorVector {
        ActuatorVector(AllocVector::from_fn(|i, _| self.actuator_value(i, v[i])))
    }
}

/// Finite-difference steps for the effectiveness Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    /// rad/s
    pub omega: f64,
    /// rad, tilts and control surfaces
    pub angle: f64,
    /// rad²/s², rotor channels in squared coordinates
    pub squared_omega: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { omega: 1.0, angle: 1e-3, squared_omega: 1000.0 }
    }
}

/// Actuator stuck at a known value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorFailure {
    pub index: usize,
    pub lock_value: f64,
}

/// Diagonal of the objective weight R, per actuator group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorWeights {
    /// Applied to `ω / ω_max` (or `t / ω_max²` in squared coordinates).
    pub rotor: f64,
    pub tilt: f64,
    pub surface: f64,
}

impl Default for ActuatorWeights {
    fn default() -> Self {
        Self { rotor: 1.0, tilt: 10.0, surface: 1.0 }
    }
}

impl ActuatorWeights {
    pub fn diagonal(&self, coords: Coordinates, bounds: &ActuatorBounds) -> AllocVector {
        let w_max = bounds.omega_max();
        let rotor_scale = match coords {
            Coordinates::Actuator => w_max * w_max,
            Coordinates::SquaredRotorSpeed => w_max.powi(4),
        };
        AllocVector::from_fn(|i, _| {
            if i < TILT {
                self.rotor / rotor_scale
            } else if i < TILT + NUM_ROTORS {
                self.tilt
            } else {
                self.surface
            }
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.rotor > 0.0 && self.tilt > 0.0 && self.surface > 0.0 {
            Ok(())
        } else {
            Err("allocator weights must be positive".into())
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum AllocError {
    #[error("actuator index {0} out of range")]
    InvalidIndex(usize),
    #[error("actuator {0} listed as failed more than once")]
    DuplicateFailure(usize),
    #[error("lock value {value} for {name} is outside its limits")]
    LockOutOfBounds { name: &'static str, value: f64 },
    #[error("requested wrench is outside the attainable set (least-violation residual {})", .0.wrench_residual)]
    Saturated(Box<AllocationResult>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Linearization of the wrench map at an operating point.
#[derive(Debug, Clone)]
pub struct EffectivenessMatrix {
    /// `∂h/∂v` with failed columns zeroed; rows `[M; F]`.
    pub a: EffMatrix,
    /// Jacobian before zeroing.
    pub nominal: EffMatrix,
    /// 12×6 pseudo-inverse; rows of failed actuators are zero.
    pub pinv: SMatrix<f64, NUM_ACTUATORS, 6>,
    /// Orthonormal basis of `null(A)` over the functioning actuators (failed rows zero).
    pub null_basis: DMatrix<f64>,
    pub failed_mask: [bool; NUM_ACTUATORS],
    pub rank: usize,
    pub coordinates: Coordinates,
    /// Actuator input the Jacobian was taken at.
    pub u0: ActuatorVector,
    /// Set when `rank(A) < 6`; allocation then works in the attainable subspace.
    pub degenerate_authority: bool,
}

impl EffectivenessMatrix {
    pub fn free_indices(&self) -> Vec<usize> {
        (0..NUM_ACTUATORS).filter(|&i| !self.failed_mask[i]).collect()
    }

    /// Re-decomposes with a different failure mask, keeping the same Jacobian.
    pub fn with_failed(&self, failed: &[usize]) -> EffectivenessMatrix {
        build_effectiveness(self.nominal, failed, self.coordinates, self.u0)
    }
}

fn build_effectiveness(
    nominal: EffMatrix,
    failed: &[usize],
    coordinates: Coordinates,
    u0: ActuatorVector,
) -> EffectivenessMatrix {
    let mut failed_mask = [false; NUM_ACTUATORS];
    for &k in failed {
        failed_mask[k] = true;
    }
    let mut a = nominal;
    for k in 0..NUM_ACTUATORS {
        if failed_mask[k] {
            a.column_mut(k).fill(0.0);
        }
    }
    let free: Vec<usize> = (0..NUM_ACTUATORS).filter(|&i| !failed_mask[i]).collect();
    let mut a_free = DMatrix::zeros(6, free.len());
    for (c, &i) in free.iter().enumerate() {
        a_free.set_column(c, &a.column(i));
    }
    let dec = nullspace::decompose(&a_free);
    let mut pinv = SMatrix::<f64, NUM_ACTUATORS, 6>::zeros();
    let mut null_basis = DMatrix::zeros(NUM_ACTUATORS, dec.null_basis.ncols());
    for (r, &i) in free.iter().enumerate() {
        pinv.row_mut(i).copy_from(&dec.pinv.row(r));
        null_basis.row_mut(i).copy_from(&dec.null_basis.row(r));
    }
    EffectivenessMatrix {
        a,
        nominal,
        pinv,
        null_basis,
        failed_mask,
        rank: dec.rank,
        coordinates,
        u0,
        degenerate_authority: dec.rank < 6,
    }
}

/// Central-difference Jacobian of the wrench map with respect to the allocation
/// variables at `(state, u0)`, then failed columns removed.
pub fn effectiveness_at(
    vehicle: &Vehicle,
    state: &RigidBodyState,
    wind: &Vector3<f64>,
    u0: &ActuatorVector,
    failed: &[usize],
    coordinates: Coordinates,
    steps: &FdSteps,
) -> Result<EffectivenessMatrix, AllocError> {
    for &k in failed {
        if k >= NUM_ACTUATORS {
            return Err(AllocError::InvalidIndex(k));
        }
    }
    let eval = |v: &AllocVector| model::vehicle_wrench(&coordinates.from_alloc(v), state, wind, vehicle);
    let v0 = coordinates.to_alloc(u0);
    let mut nominal = EffMatrix::zeros();
    for i in 0..NUM_ACTUATORS {
        let squared = coordinates == Coordinates::SquaredRotorSpeed && Coordinates::is_rotor(i);
        let h = if squared {
            steps.squared_omega
        } else if Coordinates::is_rotor(i) {
            steps.omega
        } else {
            steps.angle
        };
        let mut hi = v0;
        hi[i] += h;
        let mut lo = v0;
        // ω² is only defined for t ≥ 0; the map is linear in t, so a one-sided step is exact
        let (lo_step, denom) = if squared && v0[i] < h { (0.0, h) } else { (h, 2.0 * h) };
        lo[i] -= lo_step;
        let col = (eval(&hi)?.0 - eval(&lo)?.0) / denom;
        nominal.set_column(i, &col);
    }
    Ok(build_effectiveness(nominal, failed, coordinates, *u0))
}

/// Effectiveness matrix at a trim point with the given actuators failed.
pub fn effectiveness(
    vehicle: &Vehicle,
    trim: &TrimPoint,
    failures: &[ActuatorFailure],
    steps: &FdSteps,
) -> Result<EffectivenessMatrix, AllocError> {
    let failed: Vec<usize> = failures.iter().map(|f| f.index).collect();
    effectiveness_at(vehicle, &trim.state, &Vector3::zeros(), &trim.u, &failed, Coordinates::Actuator, steps)
}

/// Minimum-norm solution `Δu_LN = A⁺ W` over the functioning actuators.
pub fn least_norm(eff: &EffectivenessMatrix, w: &Wrench) -> AllocVector {
    eff.pinv * w.0
}

#[derive(Clone, Copy)]
pub struct AllocationRequest<'a> {
    /// Wrench deviation `W` to realize through `A Δu`.
    pub desired: Wrench,
    pub effectiveness: &'a EffectivenessMatrix,
    /// Trim input the objective pulls towards (`u_sp,trim`).
    pub preferred: ActuatorVector,
    pub failures: &'a [ActuatorFailure],
    pub weights: &'a ActuatorWeights,
    pub bounds: &'a ActuatorBounds,
}

#[derive(Debug, Clone)]
pub struct AllocationResult {
    pub u_sp: ActuatorVector,
    /// `Δu_LN`, minimum-norm in the normalized variables, allocation coordinates.
    pub du_ln: AllocVector,
    /// `Ã λ`, allocation coordinates.
    pub du_null: AllocVector,
    pub lambda: DVector<f64>,
    /// Right-hand side `W − W_k − W_trim,i≠k` (equals `W` without failures).
    pub rhs: Wrench,
    /// `W_k = Σ a_k u_f`.
    pub failure_wrench: Wrench,
    /// `W_trim,i≠k = ᵏA u_trim,i≠k`.
    pub functioning_trim_wrench: Wrench,
    /// `‖ᵏA Δu − rhs‖`.
    pub wrench_residual: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub lower_active: [bool; NUM_ACTUATORS],
    pub upper_active: [bool; NUM_ACTUATORS],
    pub iterations: usize,
    pub saturated: bool,
}

impl AllocationResult {
    /// `Δu = Δu_LN + Ã λ`.
    pub fn du(&self) -> AllocVector {
        self.du_ln + self.du_null
    }
}

fn validate_failures(failures: &[ActuatorFailure], bounds: &ActuatorBounds) -> Result<(), AllocError> {
    let mut seen = [false; NUM_ACTUATORS];
    for f in failures {
        if f.index >= NUM_ACTUATORS {
            return Err(AllocError::InvalidIndex(f.index));
        }
        if seen[f.index] {
            return Err(AllocError::DuplicateFailure(f.index));
        }
        seen[f.index] = true;
        if !bounds.contains_index(f.index, f.lock_value) {
            return Err(AllocError::LockOutOfBounds { name: ACTUATOR_NAMES[f.index], value: f.lock_value });
        }
    }
    Ok(())
}

/// Row weights of the least-violation fallback: moments before forces.
const SATURATION_ROW_WEIGHTS: [f64; 6] = [10.0, 10.0, 10.0, 0.1, 0.1, 1.0];
const SATURATION_REGULARIZATION: f64 = 1e-4;

/// Allocates the requested wrench deviation.
///
/// With failures, the locked wrench `W_k = a_k u_f` uses the unzeroed column and the
/// functioning trim wrench is `ᵏA u0`; both are taken relative to the linear-model total
/// `A u0 + W`, so `ᵏA Δu = W − a_k (u_f − u0_k)`.
pub fn allocate(req: &AllocationRequest<'_>) -> Result<AllocationResult, AllocError> {
    validate_failures(req.failures, req.bounds)?;
    // a collapsed box is an equality the dual active-set search cannot hold; pin it instead
    let collapsed: Vec<ActuatorFailure> = (0..NUM_ACTUATORS)
        .filter(|&i| !req.failures.iter().any(|f| f.index == i))
        .filter(|&i| req.bounds.upper[i] - req.bounds.lower[i] <= 1e-12 * (1.0 + req.bounds.upper[i].abs()))
        .map(|i| ActuatorFailure { index: i, lock_value: req.bounds.lower[i] })
        .collect();
    if !collapsed.is_empty() {
        let pinned: Vec<ActuatorFailure> = req.failures.iter().copied().chain(collapsed).collect();
        return allocate(&AllocationRequest { failures: &pinned, ..*req });
    }
    let failed: Vec<usize> = req.failures.iter().map(|f| f.index).collect();
    let mask_matches = (0..NUM_ACTUATORS).all(|i| req.effectiveness.failed_mask[i] == failed.contains(&i));
    let owned;
    let eff = if mask_matches {
        req.effectiveness
    } else {
        owned = req.effectiveness.with_failed(&failed);
        &owned
    };
    let coords = eff.coordinates;

    let v0 = coords.to_alloc(&eff.u0);
    let v_pref = coords.to_alloc(&req.preferred);
    let lower = coords.to_alloc(&req.bounds.lower);
    let upper = coords.to_alloc(&req.bounds.upper);
    let weights = req.weights.diagonal(coords, req.bounds);

    let mut v_fail = AllocVector::zeros();
    for f in req.failures {
        v_fail[f.index] = coords.value(f.index, f.lock_value);
    }
    let total = eff.nominal * v0 + req.desired.0;
    let failure_wrench = eff.nominal * v_fail;
    let functioning_trim = eff.a * v0;
    let rhs = total - failure_wrench - functioning_trim;

    let free = eff.free_indices();
    let nf = free.len();
    let pick = |v: &AllocVector| DVector::from_iterator(nf, free.iter().map(|&i| v[i]));
    let (v0_f, pref_f, w_f, lo_f, hi_f) = (pick(&v0), pick(&v_pref), pick(&weights), pick(&lower), pick(&upper));

    // The bounded search runs on normalized variables: in squared rotor coordinates
    // the raw weights span twelve orders of magnitude.
    let w_max = req.bounds.omega_max();
    let rotor_unit = match coords {
        Coordinates::Actuator => w_max,
        Coordinates::SquaredRotorSpeed => w_max * w_max,
    };
    let scale = DVector::from_iterator(nf, free.iter().map(|&i| if i < TILT { rotor_unit } else { 1.0 }));
    let a_free = DMatrix::from_fn(6, nf, |r, c| eff.a[(r, free[c])]);
    let a_scaled = &a_free * DMatrix::from_diagonal(&scale);
    let dec = nullspace::decompose(&a_scaled);
    // the particular solution comes from the normalized matrix too; the raw one is badly conditioned
    let du_ln_s = nullspace::least_norm(&dec.pinv, &DVector::from_column_slice(rhs.as_slice()));
    let mut du_ln_full = AllocVector::zeros();
    for (r, &i) in free.iter().enumerate() {
        du_ln_full[i] = du_ln_s[r] * scale[r];
    }
    let (v0_s, pref_s, lo_s, hi_s) = (
        v0_f.component_div(&scale),
        pref_f.component_div(&scale),
        lo_f.component_div(&scale),
        hi_f.component_div(&scale),
    );
    let w_s = w_f.component_mul(&scale).component_mul(&scale);
    let problem = NullSpaceProblem {
        null_basis: &dec.null_basis,
        du_ln: &du_ln_s,
        u0: &v0_s,
        u_pref: &pref_s,
        weights: &w_s,
        lower: &lo_s,
        upper: &hi_s,
    };

    let assemble = |v_free: &DVector<f64>, lambda: DVector<f64>, kkt: f64, iters: usize, saturated: bool| {
        let mut v_sp = AllocVector::zeros();
        let mut lower_active = [false; NUM_ACTUATORS];
        let mut upper_active = [false; NUM_ACTUATORS];
        for (r, &i) in free.iter().enumerate() {
            v_sp[i] = v_free[r];
            lower_active[i] = v_free[r] <= lower[i];
            upper_active[i] = v_free[r] >= upper[i];
        }
        let mut u_sp = coords.from_alloc(&v_sp);
        for f in req.failures {
            u_sp[f.index] = f.lock_value;
            v_sp[f.index] = v_fail[f.index];
        }
        let u_sp = req.bounds.clamp(&u_sp);
        let mut du = v_sp - v0;
        for f in req.failures {
            du[f.index] = 0.0;
        }
        let du_null = du - du_ln_full;
        let residual = (eff.a * du - rhs).norm();
        AllocationResult {
            objective: (0..NUM_ACTUATORS)
                .filter(|i| !eff.failed_mask[*i])
                .map(|i| weights[i] * (v_sp[i] - v_pref[i]).powi(2))
                .sum(),
            u_sp,
            du_ln: du_ln_full,
            du_null,
            lambda,
            rhs: Wrench(rhs),
            failure_wrench: Wrench(failure_wrench),
            functioning_trim_wrench: Wrench(functioning_trim),
            wrench_residual: residual,
            kkt_residual: kkt,
            lower_active,
            upper_active,
            iterations: iters,
            saturated,
        }
    };

    match nullspace::solve_lambda(&problem) {
        Ok(sol) => Ok(assemble(&sol.u_sp.component_mul(&scale), sol.lambda, sol.kkt_residual, sol.iterations, false)),
        Err(LambdaError::Infeasible) => {
            let rhs_d = DVector::from_column_slice(rhs.as_slice());
            let row_w = DVector::from_column_slice(&SATURATION_ROW_WEIGHTS);
            let du = nullspace::least_violation(&LeastViolation {
                a: &a_scaled,
                w: &rhs_d,
                row_weights: &row_w,
                u0: &v0_s,
                u_pref: &pref_s,
                weights: &w_s,
                regularization: SATURATION_REGULARIZATION,
                lower: &lo_s,
                upper: &hi_s,
            })
            .map_err(|e| AllocError::Solver(e.to_string()))?
            .component_mul(&scale);
            let v_free = &v0_f + du;
            Err(AllocError::Saturated(Box::new(assemble(&v_free, DVector::zeros(0), f64::NAN, 0, true))))
        }
        Err(LambdaError::Solver(e)) => Err(AllocError::Solver(e.to_string())),
    }
}
