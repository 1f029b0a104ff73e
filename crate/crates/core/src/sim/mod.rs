//! Closed-loop flight simulation with failure injection.

pub mod controller;
pub mod dynamics;
pub mod phase;
mod runner;
pub mod scenario;
pub mod trace;

pub use controller::{AttitudeGains, ControlInput, ControlOutput, Controller, ControllerGains, Setpoint};
pub use dynamics::{step, ActuatorLags, Plant, MAX_DT};
pub use phase::{FlightPhase, PhaseCommand, PhaseMachine, PhaseThresholds};
pub use runner::{run_scenario, summarize, RunOutput, Summary, Trace, TraceRecord};
pub use scenario::{FailureSpec, Scenario, StartCondition};

use crate::allocator::{ActuatorWeights, AllocError, FdSteps, TrimError};
use crate::model::ModelError;
use crate::params::{ActuatorBounds, ActuatorVector, Vehicle, NUM_ACTUATORS};
use nalgebra::Vector3;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("integration step {0} s is outside (0, 0.01]")]
    InvalidStep(f64),
    #[error("simulation diverged at t = {time} s")]
    Diverged { time: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trim(#[from] TrimError),
    #[error(transparent)]
    Allocation(#[from] AllocError),
}

/// Largest command change per second the allocator may ask for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimits {
    /// rad/s²
    pub rotor: f64,
    /// rad/s
    pub tilt: f64,
    /// rad/s
    pub surface: f64,
}

impl Default for RateLimits {
    fn default() -> Self {
        Self { rotor: 1e6, tilt: 1e6, surface: 1e6 }
    }
}

impl RateLimits {
    pub fn per_channel(&self) -> ActuatorVector {
        ActuatorVector::from_parts([self.rotor; 4], [self.tilt; 4], [self.surface; 2], self.surface, self.surface)
    }

    /// Position limits intersected with what is reachable from `u` within `dt`.
    pub fn step_bounds(&self, bounds: &ActuatorBounds, u: &ActuatorVector, dt: f64) -> ActuatorBounds {
        let r = self.per_channel();
        let mut out = *bounds;
        for i in 0..NUM_ACTUATORS {
            let lo = (u[i] - r[i] * dt).clamp(bounds.lower[i], bounds.upper[i]);
            let hi = (u[i] + r[i] * dt).clamp(bounds.lower[i], bounds.upper[i]);
            out.lower[i] = lo;
            out.upper[i] = hi;
        }
        out
    }
}

/// Everything about the vehicle and the loop that is not scenario-specific.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub vehicle: Vehicle,
    /// Principal moments of inertia, kg·m².
    pub inertia: Vector3<f64>,
    pub lags: ActuatorLags,
    pub rate_limits: RateLimits,
    pub weights: ActuatorWeights,
    pub fd_steps: FdSteps,
    /// Control steps between relinearizations outside transitions.
    pub steady_cadence: usize,
    /// Relinearize early once any command moves this fraction of its range away from
    /// the last linearization input.
    pub relinearize_drift: f64,
    /// After an informed failure the hover preference is re-trimmed with every working
    /// rotor at least this fraction of the nominal hover speed.
    pub failure_rotor_floor: f64,
    /// Lowest speed a working rotor is commanded to outside the multirotor phase, rad/s.
    /// A stopped rotor has no thrust derivative in actuator coordinates.
    pub rotor_idle: f64,
    /// Time constant with which the preferred input follows its target, s.
    pub preference_time_constant: f64,
    pub gains: ControllerGains,
    pub thresholds: PhaseThresholds,
    /// NED, m/s.
    pub wind: Vector3<f64>,
    /// Settling threshold on normalized command rate, 1/s.
    pub convergence_rate: f64,
    /// Time the commands must stay settled, s.
    pub convergence_hold: f64,
    /// Roll or pitch magnitude that counts as a crash, rad.
    pub crash_attitude: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            vehicle: Vehicle::default(),
            inertia: Vector3::new(0.45, 0.45, 0.70),
            lags: ActuatorLags::default(),
            rate_limits: RateLimits::default(),
            weights: ActuatorWeights::default(),
            fd_steps: FdSteps::default(),
            steady_cadence: 50,
            relinearize_drift: 0.02,
            failure_rotor_floor: 0.8,
            rotor_idle: 100.0,
            preference_time_constant: 0.5,
            gains: ControllerGains::default(),
            thresholds: PhaseThresholds::default(),
            wind: Vector3::zeros(),
            convergence_rate: 0.02,
            convergence_hold: 2.0,
            crash_attitude: 75f64.to_radians(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.vehicle.validate()?;
        self.lags.validate()?;
        self.weights.validate()?;
        if self.inertia.iter().any(|&v| !(v > 0.0)) {
            return Err("inertia must be positive".into());
        }
        if !(self.rate_limits.rotor > 0.0 && self.rate_limits.tilt > 0.0 && self.rate_limits.surface > 0.0) {
            return Err("rate limits must be positive".into());
        }
        if self.steady_cadence == 0 {
            return Err("relinearization cadence must be at least 1".into());
        }
        if !(self.fd_steps.omega > 0.0 && self.fd_steps.angle > 0.0 && self.fd_steps.squared_omega > 0.0) {
            return Err("finite-difference steps must be positive".into());
        }
        Ok(())
    }

    pub fn plant(&self) -> Plant {
        let mut p = Plant::new(self.vehicle, self.inertia);
        p.wind = self.wind;
        p
    }
}
