use crate::model::{self, AeroState, ModelError, RigidBodyState, Wrench};
use crate::params::{ActuatorVector, Vehicle, AILERON_LEFT, NUM_ACTUATORS, NUM_ROTORS, OMEGA, TILT};
use nalgebra::{DMatrix, DVector, Matrix4, UnitQuaternion, Vector3, Vector4};
use std::f64::consts::FRAC_PI_2;

/// Accepted angle-of-attack window for cruise trims, rad. Outside it the linear lift
/// model is not trusted, so this acts as the stall limit.
pub const CRUISE_ALPHA_RANGE: (f64, f64) = (-0.2, 0.6);
const TRIM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrimPhase {
    Hover,
    /// Level flight north at the given airspeed, m/s.
    Cruise { airspeed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimPoint {
    pub phase: TrimPhase,
    pub state: RigidBodyState,
    pub aero: AeroState,
    pub u: ActuatorVector,
    /// Largest absolute wrench component at `(state, u)`.
    pub residual: f64,
}

impl TrimPoint {
    pub fn wrench(&self, vehicle: &Vehicle) -> Result<Wrench, ModelError> {
        model::vehicle_wrench(&self.u, &self.state, &Vector3::zeros(), vehicle)
    }

    /// Pitch angle of the trimmed attitude, rad.
    pub fn pitch(&self) -> f64 {
        self.state.euler().1
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrimError {
    #[error("no trim found (best residual {best_residual:.3e})")]
    NoTrimFound { best_residual: f64 },
    #[error("level flight balances only at angle of attack {alpha:.3} rad, outside the trusted lift range")]
    OutsideEnvelope { alpha: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn find_trim(phase: TrimPhase, vehicle: &Vehicle) -> Result<TrimPoint, TrimError> {
    match phase {
        TrimPhase::Hover => hover_trim(vehicle),
        TrimPhase::Cruise { airspeed } => cruise_trim(airspeed, vehicle),
    }
}

fn make_point(phase: TrimPhase, state: RigidBodyState, u: ActuatorVector, vehicle: &Vehicle) -> Result<TrimPoint, TrimError> {
    let w = model::vehicle_wrench(&u, &state, &Vector3::zeros(), vehicle)?;
    let aero = model::aero_angles(&model::air_velocity_body(&state, &Vector3::zeros())?, &vehicle.params);
    Ok(TrimPoint { phase, state, aero, u, residual: w.max_abs() })
}

/// Level hover with upright rotors: moments and vertical force are linear in `ω²`.
fn hover_trim(vehicle: &Vehicle) -> Result<TrimPoint, TrimError> {
    let p = &vehicle.params;
    let g = &vehicle.geometry;
    let mut m = Matrix4::zeros();
    for i in 0..NUM_ROTORS {
        let r = g.positions[i];
        let thrust = Vector3::new(0.0, 0.0, -p.thrust_coeff);
        let moment = r.cross(&thrust) + Vector3::new(0.0, 0.0, -g.spin[i].sign() * p.torque_coeff);
        m[(0, i)] = moment.x;
        m[(1, i)] = moment.y;
        m[(2, i)] = moment.z;
        m[(3, i)] = p.thrust_coeff;
    }
    let rhs = Vector4::new(0.0, 0.0, 0.0, p.weight());
    let t = m.lu().solve(&rhs).ok_or(TrimError::NoTrimFound { best_residual: f64::INFINITY })?;
    let mut u = ActuatorVector::zeros();
    for i in 0..NUM_ROTORS {
        if t[i] < 0.0 || !vehicle.bounds.contains_index(OMEGA + i, t[i].sqrt()) {
            return Err(TrimError::NoTrimFound { best_residual: f64::INFINITY });
        }
        u[OMEGA + i] = t[i].sqrt();
    }
    let point = make_point(TrimPhase::Hover, RigidBodyState::default(), u, vehicle)?;
    if point.residual > TRIM_TOL {
        return Err(TrimError::NoTrimFound { best_residual: point.residual });
    }
    Ok(point)
}

fn cruise_state(airspeed: f64, alpha: f64) -> RigidBodyState {
    RigidBodyState {
        velocity: Vector3::new(airspeed, 0.0, 0.0),
        attitude: *UnitQuaternion::from_euler_angles(0.0, alpha, 0.0).quaternion(),
        ..Default::default()
    }
}

/// Unknowns: angle of attack (= pitch in level flight), rotor speeds and the four
/// surfaces; tilts held at full forward.
fn cruise_input(x: &DVector<f64>, omega_scale: f64) -> ActuatorVector {
    let mut u = ActuatorVector::zeros();
    for i in 0..NUM_ROTORS {
        u[OMEGA + i] = x[1 + i].abs() * omega_scale;
        u[TILT + i] = FRAC_PI_2;
    }
    for j in 0..4 {
        u[AILERON_LEFT + j] = x[5 + j];
    }
    u
}

fn cruise_trim(airspeed: f64, vehicle: &Vehicle) -> Result<TrimPoint, TrimError> {
    let phase = TrimPhase::Cruise { airspeed };
    if !(airspeed.is_finite() && airspeed > model::AIRSPEED_EPSILON) {
        return Err(TrimError::NoTrimFound { best_residual: f64::INFINITY });
    }
    let scale = vehicle.bounds.omega_max();
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>, ModelError> {
        let w = model::vehicle_wrench(&cruise_input(x, scale), &cruise_state(airspeed, x[0]), &Vector3::zeros(), vehicle)?;
        Ok(DVector::from_column_slice(w.0.as_slice()))
    };

    let mut best = f64::INFINITY;
    let mut balanced_alpha = None;
    for &(alpha0, w0) in &[(0.1, 0.3), (0.3, 0.2), (0.0, 0.5), (0.5, 0.1), (0.2, 0.6)] {
        let mut x = DVector::zeros(9);
        x[0] = alpha0;
        for i in 0..NUM_ROTORS {
            x[1 + i] = w0;
        }
        let mut r = residual(&x)?;
        for _ in 0..100 {
            if r.amax() <= 1e-10 {
                break;
            }
            let mut jac = DMatrix::zeros(6, 9);
            for j in 0..9 {
                let h = 1e-6;
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                jac.set_column(j, &((residual(&xp)? - residual(&xm)?) / (2.0 * h)));
            }
            let Ok(pinv) = jac.pseudo_inverse(1e-12) else { break };
            let dx = -(pinv * &r);
            let mut step = 1.0;
            let mut improved = false;
            while step > 1e-6 {
                let xn = &x + step * &dx;
                let rn = residual(&xn)?;
                if rn.norm() < r.norm() {
                    x = xn;
                    r = rn;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let u = cruise_input(&x, scale);
        let point = make_point(phase, cruise_state(airspeed, x[0]), u, vehicle)?;
        let in_envelope = x[0] >= CRUISE_ALPHA_RANGE.0 && x[0] <= CRUISE_ALPHA_RANGE.1;
        if point.residual <= TRIM_TOL && vehicle.bounds.contains(&u) {
            if in_envelope {
                return Ok(point);
            }
            balanced_alpha.get_or_insert(x[0]);
        }
        best = best.min(point.residual);
    }
    Err(match balanced_alpha {
        Some(alpha) => TrimError::OutsideEnvelope { alpha },
        None => TrimError::NoTrimFound { best_residual: best },
    })
}

/// Re-trims `base` with actuators stuck at their lock values: same state, nearest
/// balancing input for the working actuators. Working rotors are kept at or above
/// `rotor_floor` so none of them idles at its lower limit.
pub fn failure_trim(
    vehicle: &Vehicle,
    base: &TrimPoint,
    failures: &[super::ActuatorFailure],
    rotor_floor: f64,
) -> Result<TrimPoint, TrimError> {
    let bounds = &vehicle.bounds;
    let failed: Vec<usize> = failures.iter().map(|f| f.index).collect();
    let free: Vec<usize> = (0..NUM_ACTUATORS).filter(|i| !failed.contains(i)).collect();
    let mut lower = bounds.lower;
    for i in 0..NUM_ROTORS {
        lower[OMEGA + i] = lower[OMEGA + i].max(rotor_floor.min(bounds.upper[OMEGA + i]));
    }
    let mut u0 = base.u;
    for f in failures {
        u0[f.index] = f.lock_value;
    }
    let input = |x: &DVector<f64>| {
        let mut u = u0;
        for (j, &i) in free.iter().enumerate() {
            u[i] = (x[j] * bounds.range(i)).clamp(lower[i], bounds.upper[i]);
        }
        u
    };
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>, ModelError> {
        let w = model::vehicle_wrench(&input(x), &base.state, &Vector3::zeros(), vehicle)?;
        Ok(DVector::from_column_slice(w.0.as_slice()))
    };
    let n = free.len();
    let mut best = f64::INFINITY;
    for start in 0..3 {
        let mut x = DVector::from_fn(n, |j, _| u0[free[j]] / bounds.range(free[j]));
        for (j, &i) in free.iter().enumerate() {
            if (TILT..TILT + NUM_ROTORS).contains(&i) {
                x[j] += [0.0, 0.2, -0.2][start];
            }
            x[j] = x[j].clamp(lower[i] / bounds.range(i), bounds.upper[i] / bounds.range(i));
        }
        let mut r = residual(&x)?;
        for _ in 0..200 {
            if r.amax() <= 1e-10 {
                break;
            }
            let mut jac = DMatrix::zeros(6, n);
            for j in 0..n {
                let h = 1e-6;
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                jac.set_column(j, &((residual(&xp)? - residual(&xm)?) / (2.0 * h)));
            }
            // channels pinned at a limit and pushed outward drop out of the step
            let Ok(pinv) = jac.clone().pseudo_inverse(1e-12) else { break };
            let mut dx = -(&pinv * &r);
            let mut cols = jac.clone();
            for (j, &i) in free.iter().enumerate() {
                let v = x[j] * bounds.range(i);
                let at_lo = v <= lower[i] + 1e-12 && dx[j] < 0.0;
                let at_hi = v >= bounds.upper[i] - 1e-12 && dx[j] > 0.0;
                if at_lo || at_hi {
                    cols.column_mut(j).fill(0.0);
                }
            }
            if let Ok(p) = cols.pseudo_inverse(1e-12) {
                dx = -(p * &r);
            }
            let mut step = 1.0;
            let mut improved = false;
            while step > 1e-8 {
                let mut xn = &x + step * &dx;
                for (j, &i) in free.iter().enumerate() {
                    xn[j] = xn[j].clamp(lower[i] / bounds.range(i), bounds.upper[i] / bounds.range(i));
                }
                let rn = residual(&xn)?;
                if rn.norm() < r.norm() {
                    x = xn;
                    r = rn;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let point = make_point(base.phase, base.state, input(&x), vehicle)?;
        if point.residual <= TRIM_TOL {
            return Ok(point);
        }
        best = best.min(point.residual);
    }
    Err(TrimError::NoTrimFound { best_residual: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ELEVATOR, RUDDER};

    #[test]
    fn hover_trim_matches_closed_form() {
        let v = Vehicle::default();
        let t = find_trim(TrimPhase::Hover, &v).unwrap();
        let expected = (v.params.weight() / (4.0 * v.params.thrust_coeff)).sqrt();
        for i in 0..4 {
            assert!((t.u[i] - expected).abs() / expected < 1e-12);
            assert_eq!(t.u[TILT + i], 0.0);
        }
        assert!((expected - 713.4).abs() < 0.1);
        assert!(t.residual <= 1e-6);
    }

    #[test]
    fn cruise_trim_balances_wrench() {
        let v = Vehicle::default();
        let t = find_trim(TrimPhase::Cruise { airspeed: 20.0 }, &v).unwrap();
        let w = t.wrench(&v).unwrap();
        assert!(w.force().norm() <= 1e-6 && w.moment().norm() <= 1e-6);
        assert!((t.aero.airspeed - 20.0).abs() < 1e-12);
        assert!((t.aero.alpha - t.pitch()).abs() < 1e-9);
        assert!(t.aero.alpha > 0.0);
        for i in 0..4 {
            assert_eq!(t.u[TILT + i], FRAC_PI_2);
            assert!((t.u[i] - t.u[0]).abs() < 1e-6);
        }
        assert!(t.u[ELEVATOR].abs() < 1e-9 && t.u[RUDDER].abs() < 1e-9);
    }

    #[test]
    fn motor_out_hover_retrim_keeps_rotors_spinning() {
        let v = Vehicle::default();
        let hover = find_trim(TrimPhase::Hover, &v).unwrap();
        let failures = [crate::allocator::ActuatorFailure { index: OMEGA, lock_value: 0.0 }];
        let t = failure_trim(&v, &hover, &failures, 300.0).unwrap();
        assert_eq!(t.u[OMEGA], 0.0);
        assert!(t.residual <= 1e-6);
        for i in 1..4 {
            assert!(t.u[OMEGA + i] >= 300.0 - 1e-9);
        }
    }

    #[test]
    fn zero_airspeed_has_no_cruise_trim() {
        let v = Vehicle::default();
        assert!(matches!(
            find_trim(TrimPhase::Cruise { airspeed: 0.0 }, &v),
            Err(TrimError::NoTrimFound { .. })
        ));
    }

    #[test]
    fn slow_cruise_needs_too_much_lift() {
        let v = Vehicle::default();
        match find_trim(TrimPhase::Cruise { airspeed: 15.0 }, &v) {
            Err(TrimError::OutsideEnvelope { alpha }) => assert!(alpha > CRUISE_ALPHA_RANGE.1),
            other => panic!("{other:?}"),
        }
    }
}
