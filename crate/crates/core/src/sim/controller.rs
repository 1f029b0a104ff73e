//! Cascaded position/velocity/attitude/rate control producing a desired body wrench.

use super::phase::FlightPhase;
use crate::model::{RigidBodyState, Wrench};
use crate::params::VehicleParams;
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeGains {
    /// Attitude error to body rate, 1/s, per axis.
    pub att_p: Vector3<f64>,
    /// Rate error to angular acceleration, 1/s, per axis.
    pub rate_p: Vector3<f64>,
    pub rate_i: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Horizontal position to velocity, 1/s.
    pub pos_p: f64,
    /// Vertical position to velocity, 1/s.
    pub pos_z_p: f64,
    pub vel_p: f64,
    pub vel_i: f64,
    pub vel_z_p: f64,
    pub vel_z_i: f64,
    /// m/s
    pub max_horizontal_speed: f64,
    /// m/s
    pub max_vertical_speed: f64,
    /// m/s²
    pub max_accel: f64,
    /// Multirotor roll/pitch limit, rad.
    pub max_tilt: f64,
    /// Multirotor and transitions.
    pub hover_attitude: AttitudeGains,
    pub cruise_attitude: AttitudeGains,
    /// Fixed wing: altitude error to pitch offset, rad/m.
    pub fw_alt_p: f64,
    pub fw_alt_i: f64,
    /// Fixed wing: climb rate to pitch offset, rad per m/s.
    pub fw_climb_d: f64,
    /// Fixed wing: altitude error to vertical acceleration, 1/s².
    pub fw_vertical_p: f64,
    /// Fixed wing: climb rate to vertical acceleration, 1/s.
    pub fw_vertical_d: f64,
    /// Fixed wing: airspeed error to forward acceleration, 1/s.
    pub fw_speed_p: f64,
    /// Fixed wing: cross-track error to course offset, rad/m.
    pub fw_track_p: f64,
    /// Fixed wing: course error to bank, rad/rad.
    pub fw_course_p: f64,
    pub fw_max_bank: f64,
    pub fw_max_pitch_offset: f64,
    /// Wrench envelope: moment limits, N·m.
    pub max_moment: Vector3<f64>,
    /// Wrench envelope: force magnitude limit as a multiple of weight.
    pub max_force_ratio: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            pos_p: 0.8,
            pos_z_p: 1.0,
            vel_p: 1.8,
            vel_i: 0.3,
            vel_z_p: 3.0,
            vel_z_i: 0.8,
            max_horizontal_speed: 3.0,
            max_vertical_speed: 2.0,
            max_accel: 4.0,
            max_tilt: 25f64.to_radians(),
            hover_attitude: AttitudeGains {
                att_p: Vector3::new(2.5, 2.5, 2.0),
                rate_p: Vector3::new(8.0, 8.0, 3.0),
                rate_i: Vector3::new(1.5, 1.5, 0.5),
            },
            cruise_attitude: AttitudeGains {
                att_p: Vector3::new(6.0, 6.0, 3.0),
                rate_p: Vector3::new(12.0, 12.0, 6.0),
                rate_i: Vector3::new(4.0, 4.0, 2.0),
            },
            fw_alt_p: 0.04,
            fw_alt_i: 0.01,
            fw_climb_d: 0.04,
            fw_vertical_p: 0.3,
            fw_vertical_d: 0.8,
            fw_speed_p: 0.8,
            fw_track_p: 0.03,
            fw_course_p: 1.2,
            fw_max_bank: 30f64.to_radians(),
            fw_max_pitch_offset: 12f64.to_radians(),
            max_moment: Vector3::new(8.0, 8.0, 4.0),
            max_force_ratio: 2.0,
        }
    }
}

/// What the vehicle should do right now.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    /// Hover: hold point. Fixed wing: a point on the straight path. NED, m.
    pub position: Vector3<f64>,
    /// Heading to hold in hover, path course in fixed wing, rad.
    pub yaw: f64,
    /// Fixed wing and transition target airspeed, m/s.
    pub airspeed: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ControlInput<'a> {
    pub state: &'a RigidBodyState,
    pub setpoint: &'a Setpoint,
    pub phase: FlightPhase,
    pub airspeed: f64,
    /// Pitch the vehicle trims at in cruise, rad.
    pub cruise_pitch: f64,
    /// Wrench the model predicts at the linearization input; channels the phase does
    /// not control are held at these values.
    pub current_wrench: &'a Wrench,
    /// Hold the integrators, e.g. while the last allocation was saturated.
    pub hold_integrators: bool,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Desired total body wrench.
    pub wrench: Wrench,
    /// (roll, pitch, yaw) setpoint, rad.
    pub attitude: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub gains: ControllerGains,
    params: VehicleParams,
    inertia: Matrix3<f64>,
    vel_integral: Vector3<f64>,
    rate_integral: Vector3<f64>,
    alt_integral: f64,
    hold: bool,
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn clamp_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

fn clamp_horizontal(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let h = clamp_norm(Vector3::new(v.x, v.y, 0.0), max);
    Vector3::new(h.x, h.y, v.z)
}

impl Controller {
    pub fn new(gains: ControllerGains, params: VehicleParams, inertia: Matrix3<f64>) -> Self {
        Self {
            gains,
            params,
            inertia,
            vel_integral: Vector3::zeros(),
            rate_integral: Vector3::zeros(),
            alt_integral: 0.0,
            hold: false,
        }
    }

    pub fn reset_integrators(&mut self) {
        self.vel_integral = Vector3::zeros();
        self.rate_integral = Vector3::zeros();
        self.alt_integral = 0.0;
    }

    /// Desired NED acceleration from the position and velocity loops.
    fn hover_acceleration(&mut self, s: &RigidBodyState, sp: &Setpoint, v_sp_override: Option<Vector3<f64>>, dt: f64) -> Vector3<f64> {
        let g = &self.gains;
        let e = sp.position - s.position;
        let mut v_sp = clamp_horizontal(Vector3::new(g.pos_p * e.x, g.pos_p * e.y, 0.0), g.max_horizontal_speed);
        v_sp.z = (g.pos_z_p * e.z).clamp(-g.max_vertical_speed, g.max_vertical_speed);
        if let Some(v) = v_sp_override {
            v_sp.x = v.x;
            v_sp.y = v.y;
        }
        let ev = v_sp - s.velocity;
        if !self.hold {
            self.vel_integral += ev * dt;
        }
        let lim = g.max_accel / g.vel_i.max(1e-9);
        self.vel_integral = clamp_norm(self.vel_integral, lim);
        let mut a = Vector3::new(
            g.vel_p * ev.x + g.vel_i * self.vel_integral.x,
            g.vel_p * ev.y + g.vel_i * self.vel_integral.y,
            g.vel_z_p * ev.z + g.vel_z_i * self.vel_integral.z,
        );
        a = clamp_horizontal(a, g.max_accel);
        a.z = a.z.clamp(-g.max_accel, g.max_accel);
        a
    }

    /// Attitude setpoint that points the rotor thrust along the required force.
    fn thrust_attitude(&self, f: &Vector3<f64>, yaw: f64) -> (f64, f64) {
        let (sy, cy) = yaw.sin_cos();
        let fx = cy * f.x + sy * f.y;
        let fy = -sy * f.x + cy * f.y;
        let pitch = (-fx).atan2(-f.z);
        let roll = fy.atan2((fx * fx + f.z * f.z).sqrt());
        (roll.clamp(-self.gains.max_tilt, self.gains.max_tilt), pitch.clamp(-self.gains.max_tilt, self.gains.max_tilt))
    }

    fn moment(&mut self, s: &RigidBodyState, attitude_sp: &Vector3<f64>, phase: FlightPhase, dt: f64) -> Vector3<f64> {
        let g = &self.gains;
        let a = if phase == FlightPhase::FixedWing { &g.cruise_attitude } else { &g.hover_attitude };
        let q = UnitQuaternion::new_normalize(s.attitude);
        let q_sp = UnitQuaternion::from_euler_angles(attitude_sp.x, attitude_sp.y, attitude_sp.z);
        let mut qe = q.inverse() * q_sp;
        if qe.w < 0.0 {
            qe = UnitQuaternion::new_unchecked(-qe.into_inner());
        }
        let err = qe.imag() * 2.0;
        let rate_sp = a.att_p.component_mul(&err);
        let er = rate_sp - s.angular_rate;
        if !self.hold {
            self.rate_integral += er * dt;
        }
        for k in 0..3 {
            let lim = g.max_moment[k] / (self.inertia[(k, k)] * a.rate_i[k].max(1e-9));
            self.rate_integral[k] = self.rate_integral[k].clamp(-lim, lim);
        }
        let accel = a.rate_p.component_mul(&er) + a.rate_i.component_mul(&self.rate_integral);
        let w = s.angular_rate;
        let m = self.inertia * accel + w.cross(&(self.inertia * w));
        Vector3::from_fn(|k, _| m[k].clamp(-g.max_moment[k], g.max_moment[k]))
    }

    pub fn update(&mut self, input: &ControlInput<'_>) -> ControlOutput {
        self.hold = input.hold_integrators;
        let s = input.state;
        let sp = input.setpoint;
        let m = self.params.mass;
        let weight = self.params.weight();
        let q = UnitQuaternion::new_normalize(s.attitude);
        let gravity_body = q.inverse_transform_vector(&Vector3::new(0.0, 0.0, weight));
        let sched = (input.airspeed / sp.airspeed.max(1e-9)).clamp(0.0, 1.0);

        let (attitude, force) = match input.phase {
            FlightPhase::Multirotor => {
                let a = self.hover_acceleration(s, sp, None, input.dt);
                let f = (a - Vector3::new(0.0, 0.0, self.params.gravity)) * m;
                let (roll, pitch) = self.thrust_attitude(&f, sp.yaw);
                let z_body = q.transform_vector(&Vector3::z());
                let collective = (-f.dot(&z_body)).clamp(0.1 * weight, self.gains.max_force_ratio * weight);
                (Vector3::new(roll, pitch, sp.yaw), gravity_body - Vector3::new(0.0, 0.0, collective))
            }
            FlightPhase::TransitionFw | FlightPhase::TransitionMc => {
                let (sy, cy) = sp.yaw.sin_cos();
                let target_speed = if input.phase == FlightPhase::TransitionFw { sp.airspeed } else { 0.0 };
                let v_sp = Vector3::new(cy, sy, 0.0) * target_speed;
                let a = self.hover_acceleration(s, sp, Some(v_sp), input.dt);
                let f = (a - Vector3::new(0.0, 0.0, self.params.gravity)) * m;
                let (roll, _) = self.thrust_attitude(&f, sp.yaw);
                let pitch = sched * input.cruise_pitch;
                (Vector3::new(roll, pitch, sp.yaw), q.inverse_transform_vector(&(a * m)))
            }
            FlightPhase::FixedWing => {
                let g = self.gains;
                let (sy, cy) = sp.yaw.sin_cos();
                let rel = s.position - sp.position;
                let cross_track = -sy * rel.x + cy * rel.y;
                let course_cmd = sp.yaw - (g.fw_track_p * cross_track).clamp(-PI / 4.0, PI / 4.0);
                let course = s.velocity.y.atan2(s.velocity.x);
                let bank = (g.fw_course_p * wrap(course_cmd - course)).clamp(-g.fw_max_bank, g.fw_max_bank);
                let alt_err = s.altitude() - (-sp.position.z);
                let step = if self.hold { 0.0 } else { alt_err * input.dt };
                self.alt_integral = (self.alt_integral + step)
                    .clamp(-g.fw_max_pitch_offset / g.fw_alt_i.max(1e-9), g.fw_max_pitch_offset / g.fw_alt_i.max(1e-9));
                let climb = -s.velocity.z;
                let offset = (-g.fw_alt_p * alt_err - g.fw_alt_i * self.alt_integral - g.fw_climb_d * climb)
                    .clamp(-g.fw_max_pitch_offset, g.fw_max_pitch_offset);
                let pitch = input.cruise_pitch + offset;
                let horizontal = Vector3::new(s.velocity.x, s.velocity.y, 0.0);
                let dir = if horizontal.norm() > 1e-6 { horizontal.normalize() } else { Vector3::new(cy, sy, 0.0) };
                let mut a = dir * (g.fw_speed_p * (sp.airspeed - input.airspeed)).clamp(-g.max_accel, g.max_accel);
                a.z = (g.fw_vertical_p * alt_err + g.fw_vertical_d * climb).clamp(-g.max_accel, g.max_accel);
                let f = q.inverse_transform_vector(&(a * m));
                let held = input.current_wrench.force();
                (Vector3::new(bank, pitch, course_cmd), Vector3::new(f.x, held.y, f.z))
            }
        };
        let force = clamp_norm(force, self.gains.max_force_ratio * weight);
        let moment = self.moment(s, &attitude, input.phase, input.dt);
        ControlOutput { wrench: Wrench::new(moment, force), attitude }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn controller() -> Controller {
        Controller::new(ControllerGains::default(), VehicleParams::default(), Matrix3::from_diagonal(&Vector3::new(0.45, 0.45, 0.7)))
    }

    fn hover_input<'a>(s: &'a RigidBodyState, sp: &'a Setpoint, w: &'a Wrench) -> ControlInput<'a> {
        ControlInput {
            state: s,
            setpoint: sp,
            phase: FlightPhase::Multirotor,
            airspeed: 0.0,
            cruise_pitch: 0.4,
            current_wrench: w,
            hold_integrators: false,
            dt: 0.004,
        }
    }

    #[test]
    fn at_setpoint_requests_hover_wrench() {
        let mut c = controller();
        let s = RigidBodyState::default();
        let sp = Setpoint { position: Vector3::zeros(), yaw: 0.0, airspeed: 20.0 };
        let w = Wrench::zeros();
        let out = c.update(&hover_input(&s, &sp, &w));
        assert!(out.wrench.max_abs() < 1e-12);
    }

    #[test]
    fn altitude_error_asks_for_more_lift_only() {
        let mut c = controller();
        let s = RigidBodyState::default();
        // setpoint 1 m above (NED z is down)
        let sp = Setpoint { position: Vector3::new(0.0, 0.0, -1.0), yaw: 0.0, airspeed: 20.0 };
        let w = Wrench::zeros();
        let out = c.update(&hover_input(&s, &sp, &w));
        assert!(out.wrench.force().z < 0.0);
        assert!(out.wrench.moment().norm() < 1e-12);
        assert!(out.wrench.force().x.abs() < 1e-12 && out.wrench.force().y.abs() < 1e-12);
    }

    #[test]
    fn roll_error_gives_proportional_moment() {
        let s = RigidBodyState {
            attitude: *UnitQuaternion::from_euler_angles(-10f64.to_radians(), 0.0, 0.0).quaternion(),
            ..Default::default()
        };
        let sp = Setpoint { position: Vector3::zeros(), yaw: 0.0, airspeed: 20.0 };
        let w = Wrench::zeros();
        let mut c = controller();
        let g = c.gains;
        let out = c.update(&hover_input(&s, &sp, &w));
        let err = 2.0 * 5f64.to_radians().sin();
        let a = g.hover_attitude;
        let expected = 0.45 * (a.rate_p.x * a.att_p.x * err + a.rate_i.x * a.att_p.x * err * 0.004);
        assert!(out.wrench.moment().x > 0.0);
        assert!((out.wrench.moment().x - expected).abs() < 1e-9);
        assert!(out.wrench.moment().y.abs() < 1e-12 && out.wrench.moment().z.abs() < 1e-12);
    }
}
