use super::SimError;
use crate::model::{self, RigidBodyState, Wrench};
use crate::params::{ActuatorVector, Vehicle, NUM_ACTUATORS, NUM_ROTORS, TILT};
use nalgebra::{Matrix3, Quaternion, Vector3};

/// Largest accepted integration step, s.
pub const MAX_DT: f64 = 0.01;

/// First-order time constants between command and effective actuator value, s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLags {
    pub rotor: f64,
    pub tilt: f64,
    pub surface: f64,
}

impl Default for ActuatorLags {
    fn default() -> Self {
        Self { rotor: 0.05, tilt: 0.20, surface: 0.05 }
    }
}

impl ActuatorLags {
    pub fn time_constant(&self, i: usize) -> f64 {
        if i < TILT {
            self.rotor
        } else if i < TILT + NUM_ROTORS {
            self.tilt
        } else {
            self.surface
        }
    }

    /// Exact discretization of `τ u̇ = u_cmd − u` over one step with the command held.
    pub fn apply(&self, u_eff: &ActuatorVector, u_cmd: &ActuatorVector, dt: f64) -> ActuatorVector {
        let mut out = *u_eff;
        for i in 0..NUM_ACTUATORS {
            let tau = self.time_constant(i);
            let k = if tau > 0.0 { 1.0 - (-dt / tau).exp() } else { 1.0 };
            out[i] += (u_cmd[i] - u_eff[i]) * k;
        }
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.rotor >= 0.0 && self.tilt >= 0.0 && self.surface >= 0.0 {
            Ok(())
        } else {
            Err("actuator time constants must be non-negative".into())
        }
    }
}

/// Rigid body plus the bits of the environment the integrator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub vehicle: Vehicle,
    /// Body inertia, kg·m².
    pub inertia: Matrix3<f64>,
    /// Steady wind, NED m/s.
    pub wind: Vector3<f64>,
}

impl Plant {
    pub fn new(vehicle: Vehicle, inertia_diag: Vector3<f64>) -> Self {
        Self { vehicle, inertia: Matrix3::from_diagonal(&inertia_diag), wind: Vector3::zeros() }
    }

    pub fn wrench(&self, u: &ActuatorVector, state: &RigidBodyState) -> Result<Wrench, SimError> {
        Ok(model::vehicle_wrench(u, state, &self.wind, &self.vehicle)?)
    }
}

#[derive(Debug, Clone, Copy)]
struct Derivative {
    position: Vector3<f64>,
    velocity: Vector3<f64>,
    attitude: Quaternion<f64>,
    angular_rate: Vector3<f64>,
}

fn normalized(state: &RigidBodyState) -> RigidBodyState {
    RigidBodyState { attitude: state.attitude.normalize(), ..*state }
}

fn derivative(plant: &Plant, state: &RigidBodyState, u: &ActuatorVector) -> Result<Derivative, SimError> {
    let s = normalized(state);
    let w = plant.wrench(u, &s)?;
    let q = s.unit_attitude()?;
    let inertia_inv = plant.inertia.try_inverse().ok_or(SimError::Diverged { time: f64::NAN })?;
    let omega = s.angular_rate;
    let omega_q = Quaternion::new(0.0, omega.x, omega.y, omega.z);
    Ok(Derivative {
        position: s.velocity,
        velocity: q.transform_vector(&w.force()) / plant.vehicle.params.mass,
        attitude: state.attitude * omega_q * 0.5,
        angular_rate: inertia_inv * (w.moment() - omega.cross(&(plant.inertia * omega))),
    })
}

fn advance(state: &RigidBodyState, d: &Derivative, h: f64) -> RigidBodyState {
    RigidBodyState {
        position: state.position + d.position * h,
        velocity: state.velocity + d.velocity * h,
        attitude: state.attitude + d.attitude * h,
        angular_rate: state.angular_rate + d.angular_rate * h,
    }
}

/// One RK4 step with the effective input held; the attitude is renormalized afterwards.
pub fn step(plant: &Plant, state: &RigidBodyState, u_eff: &ActuatorVector, dt: f64) -> Result<RigidBodyState, SimError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(SimError::InvalidStep(dt));
    }
    let k1 = derivative(plant, state, u_eff)?;
    let k2 = derivative(plant, &advance(state, &k1, dt / 2.0), u_eff)?;
    let k3 = derivative(plant, &advance(state, &k2, dt / 2.0), u_eff)?;
    let k4 = derivative(plant, &advance(state, &k3, dt), u_eff)?;
    let combine = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>, d: Vector3<f64>| (a + (b + c) * 2.0 + d) * (dt / 6.0);
    let next = RigidBodyState {
        position: state.position + combine(k1.position, k2.position, k3.position, k4.position),
        velocity: state.velocity + combine(k1.velocity, k2.velocity, k3.velocity, k4.velocity),
        attitude: (state.attitude + (k1.attitude + (k2.attitude + k3.attitude) * 2.0 + k4.attitude) * (dt / 6.0)).normalize(),
        angular_rate: state.angular_rate + combine(k1.angular_rate, k2.angular_rate, k3.angular_rate, k4.angular_rate),
    };
    if !next.is_finite() {
        return Err(SimError::Diverged { time: f64::NAN });
    }
    Ok(next)
}
