//! Nonlinear wrench map: actuator inputs and vehicle state to body-frame moments and forces.
//!
//! Frames: inertial NED, body front-right-down. A rotor tilt of zero points the rotor
//! axis up (`-z`), a tilt of π/2 points it forward (`+x`).

use crate::params::{ActuatorVector, RotorGeometry, Vehicle, VehicleParams, NUM_ROTORS};
use nalgebra::{Matrix3, Quaternion, SVector, UnitQuaternion, Vector3};
use std::ops::{Add, Mul, Sub};

/// Airspeed below which angle of attack and sideslip are reported as zero.
pub const AIRSPEED_EPSILON: f64 = 0.1;
/// Tolerance on `‖q‖ - 1` for attitude quaternions.
pub const UNIT_QUATERNION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("attitude quaternion must be normalized (|q| = {norm})")]
    NonUnitQuaternion { norm: f64 },
}

/// Rigid-body state: NED position and velocity, body-to-inertial attitude, body rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Quaternion<f64>,
    pub angular_rate: Vector3<f64>,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: Quaternion::identity(),
            angular_rate: Vector3::zeros(),
        }
    }
}

impl RigidBodyState {
    pub fn unit_attitude(&self) -> Result<UnitQuaternion<f64>, ModelError> {
        let norm = self.attitude.norm();
        if (norm - 1.0).abs() > UNIT_QUATERNION_TOL {
            return Err(ModelError::NonUnitQuaternion { norm });
        }
        Ok(UnitQuaternion::new_unchecked(self.attitude))
    }

    /// Altitude above the NED origin, m.
    pub fn altitude(&self) -> f64 {
        -self.position.z
    }

    /// (roll, pitch, yaw) in rad.
    pub fn euler(&self) -> (f64, f64, f64) {
        UnitQuaternion::new_normalize(self.attitude).euler_angles()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.attitude.coords.iter().all(|x| x.is_finite())
            && self.angular_rate.iter().all(|x| x.is_finite())
    }
}

/// Air-data quantities derived from the air-relative velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AeroState {
    pub airspeed: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dynamic_pressure: f64,
}

/// Body wrench stored as `[M; F]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench(pub SVector<f64, 6>);

impl Wrench {
    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    pub fn new(moment: Vector3<f64>, force: Vector3<f64>) -> Self {
        let mut v = SVector::<f64, 6>::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&moment);
        v.fixed_rows_mut::<3>(3).copy_from(&force);
        Self(v)
    }

    pub fn moment(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn force(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench(self.0 + rhs.0)
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench(self.0 - rhs.0)
    }
}

impl Mul<f64> for Wrench {
    type Output = Wrench;
    fn mul(self, s: f64) -> Wrench {
        Wrench(self.0 * s)
    }
}

/// Unit rotor axis `[sin χ, 0, -cos χ]` in the body frame.
#[inline]
pub fn rotor_axis(tilt: f64) -> Vector3<f64> {
    let (s, c) = tilt.sin_cos();
    Vector3::new(s, 0.0, -c)
}

/// Thrust magnitude `c_F ω²` and signed drag torque `(-1)^d c_K ω²` of one rotor.
pub fn rotor_thrust_torque(omega: f64, spin: crate::params::SpinDirection, params: &VehicleParams) -> (f64, f64) {
    let w2 = omega * omega;
    (params.thrust_coeff * w2, spin.sign() * params.torque_coeff * w2)
}

/// Weight expressed in the body frame.
pub fn gravity_force(attitude: &Quaternion<f64>, params: &VehicleParams) -> Result<Vector3<f64>, ModelError> {
    let norm = attitude.norm();
    if (norm - 1.0).abs() > UNIT_QUATERNION_TOL {
        return Err(ModelError::NonUnitQuaternion { norm });
    }
    let q = UnitQuaternion::new_unchecked(*attitude);
    let body_from_inertial: Matrix3<f64> = q.to_rotation_matrix().matrix().transpose();
    Ok(body_from_inertial * Vector3::new(0.0, 0.0, params.weight()))
}

pub fn thrust_force(u: &ActuatorVector, params: &VehicleParams) -> Vector3<f64> {
    (0..NUM_ROTORS).fold(Vector3::zeros(), |acc, i| {
        acc + params.thrust_coeff * u.omega(i).powi(2) * rotor_axis(u.tilt(i))
    })
}

/// Airspeed, angle of attack, sideslip and dynamic pressure from the body-frame air velocity.
pub fn aero_angles(v_body: &Vector3<f64>, params: &VehicleParams) -> AeroState {
    let airspeed = v_body.norm();
    let dynamic_pressure = 0.5 * params.air_density * airspeed * airspeed;
    if airspeed < AIRSPEED_EPSILON {
        return AeroState { airspeed, alpha: 0.0, beta: 0.0, dynamic_pressure };
    }
    let alpha = v_body.z.atan2(v_body.x);
    let beta = (v_body.y / airspeed).clamp(-1.0, 1.0).asin();
    AeroState { airspeed, alpha, beta, dynamic_pressure }
}

/// Body-from-wind rotation for the given angle of attack and sideslip.
pub fn body_from_wind(alpha: f64, beta: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Matrix3::new(
        ca * cb, -ca * sb, -sa,
        sb, cb, 0.0,
        sa * cb, -sa * sb, ca,
    )
}

/// Drag along `-x_w`, lift along `-z_w`, no side force; rotated into the body frame.
pub fn aero_force(aero: &AeroState, _u: &ActuatorVector, params: &VehicleParams) -> Vector3<f64> {
    let qs = aero.dynamic_pressure * params.wing_area;
    let drag = qs * (params.drag_coeff_0 + params.drag_coeff_alpha * aero.alpha * aero.alpha);
    let lift = qs * (params.lift_coeff_0 + params.lift_coeff_alpha * aero.alpha);
    body_from_wind(aero.alpha, aero.beta) * Vector3::new(-drag, 0.0, -lift)
}

pub fn thrust_moment(u: &ActuatorVector, geom: &RotorGeometry, params: &VehicleParams) -> Vector3<f64> {
    (0..NUM_ROTORS).fold(Vector3::zeros(), |acc, i| {
        let thrust = params.thrust_coeff * u.omega(i).powi(2) * rotor_axis(u.tilt(i));
        acc + geom.positions[i].cross(&thrust)
    })
}

/// Rotor drag torques acting on the airframe.
pub fn resisting_moment(u: &ActuatorVector, geom: &RotorGeometry, params: &VehicleParams) -> Vector3<f64> {
    (0..NUM_ROTORS).fold(Vector3::zeros(), |acc, i| {
        let (_, tau) = rotor_thrust_torque(u.omega(i), geom.spin[i], params);
        acc + tau * rotor_axis(u.tilt(i))
    })
}

/// Control-surface moments `[L, M, N]`.
pub fn aero_moment(aero: &AeroState, u: &ActuatorVector, params: &VehicleParams) -> Vector3<f64> {
    let qs = aero.dynamic_pressure * params.wing_area;
    Vector3::new(
        qs * params.wingspan * params.aileron_coeff * u.aileron_effective(),
        qs * params.mean_chord * params.elevator_coeff * u.elevator(),
        qs * params.wingspan * params.rudder_coeff * u.rudder(),
    )
}

/// Individual contributions to the total wrench; `total()` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchTerms {
    pub thrust_force: Vector3<f64>,
    pub aero_force: Vector3<f64>,
    pub gravity_force: Vector3<f64>,
    pub thrust_moment: Vector3<f64>,
    pub resisting_moment: Vector3<f64>,
    pub aero_moment: Vector3<f64>,
}

impl WrenchTerms {
    pub fn total(&self) -> Wrench {
        Wrench::new(
            self.thrust_moment + self.resisting_moment + self.aero_moment,
            self.thrust_force + self.aero_force + self.gravity_force,
        )
    }
}

/// Body-frame air velocity for a state in a steady wind (NED, m/s).
pub fn air_velocity_body(state: &RigidBodyState, wind: &Vector3<f64>) -> Result<Vector3<f64>, ModelError> {
    let q = state.unit_attitude()?;
    Ok(q.inverse_transform_vector(&(state.velocity - wind)))
}

pub fn wrench_terms(
    u: &ActuatorVector,
    state: &RigidBodyState,
    wind: &Vector3<f64>,
    vehicle: &Vehicle,
) -> Result<WrenchTerms, ModelError> {
    let params = &vehicle.params;
    let aero = aero_angles(&air_velocity_body(state, wind)?, params);
    Ok(WrenchTerms {
        thrust_force: thrust_force(u, params),
        aero_force: aero_force(&aero, u, params),
        gravity_force: gravity_force(&state.attitude, params)?,
        thrust_moment: thrust_moment(u, &vehicle.geometry, params),
        resisting_moment: resisting_moment(u, &vehicle.geometry, params),
        aero_moment: aero_moment(&aero, u, params),
    })
}

/// Total body wrench `[M_r + M_g + M_a; F_r + F_a + F_g]` in still air.
pub fn total_wrench(
    u: &ActuatorVector,
    state: &RigidBodyState,
    geom: &RotorGeometry,
    params: &VehicleParams,
) -> Result<Wrench, ModelError> {
    let vehicle = Vehicle { params: *params, geometry: *geom, bounds: Default::default() };
    Ok(wrench_terms(u, state, &Vector3::zeros(), &vehicle)?.total())
}

/// Total wrench with the vehicle bundle and an explicit steady wind.
pub fn vehicle_wrench(
    u: &ActuatorVector,
    state: &RigidBodyState,
    wind: &Vector3<f64>,
    vehicle: &Vehicle,
) -> Result<Wrench, ModelError> {
    Ok(wrench_terms(u, state, wind, vehicle)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SpinDirection;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn p() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn rotor_thrust_examples() {
        assert_eq!(rotor_thrust_torque(0.0, SpinDirection::Ccw, &p()), (0.0, 0.0));
        let (t, tau) = rotor_thrust_torque(713.4, SpinDirection::Ccw, &p());
        assert_relative_eq!(t, 2.2164e-5 * 713.4 * 713.4, max_relative = 1e-14);
        assert!((t - 11.28).abs() < 5e-3);
        assert!(tau > 0.0);
        let omega = (27.36f64 / 2.2164e-5).sqrt();
        assert!((omega - 1111.1).abs() < 0.1);
        let (t, tau) = rotor_thrust_torque(omega, SpinDirection::Cw, &p());
        assert_relative_eq!(t, 27.36, max_relative = 1e-12);
        assert!(tau < 0.0);
    }

    #[test]
    fn gravity_examples() {
        let g = gravity_force(&Quaternion::identity(), &p()).unwrap();
        assert_relative_eq!(g, Vector3::new(0.0, 0.0, 45.126), epsilon = 1e-12);
        let nose_up = UnitQuaternion::from_euler_angles(0.0, FRAC_PI_2, 0.0);
        let g = gravity_force(nose_up.quaternion(), &p()).unwrap();
        assert_relative_eq!(g, Vector3::new(-45.126, 0.0, 0.0), epsilon = 1e-12);
        let bad = Quaternion::new(1.1, 0.0, 0.0, 0.0);
        assert!(matches!(gravity_force(&bad, &p()), Err(ModelError::NonUnitQuaternion { .. })));
    }

    #[test]
    fn thrust_force_examples() {
        let hover = ActuatorVector::from_parts([713.4; 4], [0.0; 4], [0.0; 2], 0.0, 0.0);
        let f = thrust_force(&hover, &p());
        assert_eq!(f.x, 0.0);
        assert_eq!(f.y, 0.0);
        assert!((f.z + 45.13).abs() < 0.01);

        let fwd = ActuatorVector::from_parts([500.0; 4], [FRAC_PI_2; 4], [0.0; 2], 0.0, 0.0);
        let t = 2.2164e-5 * 500.0 * 500.0;
        assert_relative_eq!(thrust_force(&fwd, &p()), Vector3::new(4.0 * t, 0.0, 0.0), epsilon = 1e-12);

        let mixed = ActuatorVector::from_parts([500.0; 4], [0.0, 0.0, FRAC_PI_2, FRAC_PI_2], [0.0; 2], 0.0, 0.0);
        assert_relative_eq!(thrust_force(&mixed, &p()), Vector3::new(2.0 * t, 0.0, -2.0 * t), epsilon = 1e-12);
    }

    #[test]
    fn aero_angle_examples() {
        let a = aero_angles(&Vector3::new(20.0, 0.0, 0.0), &p());
        assert_eq!((a.airspeed, a.alpha, a.beta), (20.0, 0.0, 0.0));
        assert_relative_eq!(a.dynamic_pressure, 245.0, max_relative = 1e-14);
        let a = aero_angles(&Vector3::zeros(), &p());
        assert_eq!(a, AeroState::default());
        let a = aero_angles(&Vector3::new(20.0, 0.0, 2.0), &p());
        assert_relative_eq!(a.alpha, 2f64.atan2(20.0), max_relative = 1e-14);
        assert!((a.alpha - 0.0997).abs() < 1e-4);
        // below the airspeed threshold the angles are zero but q̄ is still ρV²/2
        let a = aero_angles(&Vector3::new(0.0, 0.05, 0.05), &p());
        assert_eq!((a.alpha, a.beta), (0.0, 0.0));
        assert_eq!(a.dynamic_pressure, 0.5 * 1.225 * a.airspeed * a.airspeed);
    }

    #[test]
    fn aero_force_examples() {
        let u = ActuatorVector::zeros();
        assert_eq!(aero_force(&AeroState::default(), &u, &p()), Vector3::zeros());
        let a = aero_angles(&Vector3::new(20.0, 0.0, 0.0), &p());
        let f = aero_force(&a, &u, &p());
        assert_relative_eq!(f, Vector3::new(-1.078, 0.0, -37.73), epsilon = 1e-9);

        // α = 0.1: compare magnitudes in the wind frame
        let a = AeroState { airspeed: 20.0, alpha: 0.1, beta: 0.0, dynamic_pressure: 245.0 };
        let f_wind = body_from_wind(0.1, 0.0).transpose() * aero_force(&a, &u, &p());
        assert_relative_eq!(-f_wind.z, 245.0 * 0.44 * 0.361, max_relative = 1e-12);
        assert_relative_eq!(-f_wind.x, 245.0 * 0.44 * 0.012, max_relative = 1e-12);
    }

    #[test]
    fn thrust_moment_examples() {
        let g = RotorGeometry::default();
        let hover = ActuatorVector::from_parts([700.0; 4], [0.0; 4], [0.0; 2], 0.0, 0.0);
        assert_eq!(thrust_moment(&hover, &g, &p()), Vector3::zeros());

        let mut off = hover;
        off[0] = 0.0;
        let t = 2.2164e-5 * 700.0 * 700.0;
        let expected = -g.positions[0].cross(&Vector3::new(0.0, 0.0, -t));
        assert_relative_eq!(thrust_moment(&off, &g, &p()), expected, epsilon = 1e-12);
        assert!(expected.x > 0.0 && expected.y < 0.0);

        // single rotor at [1, 0, 0] producing 10 N upward
        let mut single = g;
        single.positions[0] = Vector3::new(1.0, 0.0, 0.0);
        let omega = (10.0f64 / 2.2164e-5).sqrt();
        let u = ActuatorVector::from_parts([omega, 0.0, 0.0, 0.0], [0.0; 4], [0.0; 2], 0.0, 0.0);
        assert_relative_eq!(thrust_moment(&u, &single, &p()), Vector3::new(0.0, 10.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn resisting_moment_examples() {
        let g = RotorGeometry::default();
        let hover = ActuatorVector::from_parts([700.0; 4], [0.0; 4], [0.0; 2], 0.0, 0.0);
        assert_eq!(resisting_moment(&hover, &g, &p()), Vector3::zeros());

        // rotor 2 spins CW (d = 1): torque along -axis = +z when upright
        let u = ActuatorVector::from_parts([0.0, 700.0, 0.0, 0.0], [0.0; 4], [0.0; 2], 0.0, 0.0);
        let m = resisting_moment(&u, &g, &p());
        assert_relative_eq!(m.z, 1.1082e-6 * 490_000.0, max_relative = 1e-14);
        assert!((m.z - 0.543).abs() < 1e-3);

        let fwd = ActuatorVector::from_parts([700.0; 4], [FRAC_PI_2; 4], [0.0; 2], 0.0, 0.0);
        assert_eq!(resisting_moment(&fwd, &g, &p()).x, 0.0);
    }

    #[test]
    fn aero_moment_examples() {
        let u = ActuatorVector::from_parts([0.0; 4], [0.0; 4], [0.0; 2], 0.1047, 0.0);
        assert_eq!(aero_moment(&AeroState::default(), &u, &p()), Vector3::zeros());
        let a = aero_angles(&Vector3::new(20.0, 0.0, 0.0), &p());
        let m = aero_moment(&a, &u, &p());
        assert!((m.y - 1.381).abs() < 1e-3);
        let u = ActuatorVector::from_parts([0.0; 4], [0.0; 4], [0.1, -0.1], 0.0, 0.0);
        let m = aero_moment(&a, &u, &p());
        assert!((m.x - 2.529).abs() < 1e-3);
    }

    #[test]
    fn hover_total_wrench() {
        let omega = 700.0;
        let u = ActuatorVector::from_parts([omega; 4], [0.0; 4], [0.0; 2], 0.0, 0.0);
        let w = total_wrench(&u, &RigidBodyState::default(), &RotorGeometry::default(), &p()).unwrap();
        assert_eq!(w.moment(), Vector3::zeros());
        let expected_fz = 45.126 - 4.0 * 2.2164e-5 * omega * omega;
        assert_relative_eq!(w.force(), Vector3::new(0.0, 0.0, expected_fz), epsilon = 1e-12);
    }
}
