use crate::params::{ActuatorVector, NUM_ROTORS, TILT};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlightPhase {
    Multirotor,
    TransitionFw,
    FixedWing,
    TransitionMc,
}

impl FlightPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            FlightPhase::Multirotor => "multirotor",
            FlightPhase::TransitionFw => "transition_fw",
            FlightPhase::FixedWing => "fixed_wing",
            FlightPhase::TransitionMc => "transition_mc",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            FlightPhase::Multirotor => 0,
            FlightPhase::TransitionFw => 1,
            FlightPhase::FixedWing => 2,
            FlightPhase::TransitionMc => 3,
        }
    }

    pub fn is_transition(self) -> bool {
        matches!(self, FlightPhase::TransitionFw | FlightPhase::TransitionMc)
    }
}

impl fmt::Display for FlightPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlightPhase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "multirotor" => Ok(FlightPhase::Multirotor),
            "transition_fw" => Ok(FlightPhase::TransitionFw),
            "fixed_wing" => Ok(FlightPhase::FixedWing),
            "transition_mc" => Ok(FlightPhase::TransitionMc),
            _ => Err(format!("unknown phase {s:?}")),
        }
    }
}

/// Pilot request that starts a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseCommand {
    ToFixedWing,
    ToMultirotor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseThresholds {
    /// Airspeed that completes the forward transition, m/s.
    pub forward_airspeed: f64,
    /// Airspeed below which the back transition may complete, m/s.
    pub back_airspeed: f64,
    /// Allowed tilt error when checking "fully tilted" or "upright", rad.
    pub tilt_tolerance: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        Self { forward_airspeed: 14.0, back_airspeed: 2.0, tilt_tolerance: 2f64.to_radians() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMachine {
    pub phase: FlightPhase,
    pub thresholds: PhaseThresholds,
}

impl PhaseMachine {
    pub fn new(phase: FlightPhase, thresholds: PhaseThresholds) -> Self {
        Self { phase, thresholds }
    }

    fn tilts_near(&self, u: &ActuatorVector, target: f64) -> bool {
        (0..NUM_ROTORS).all(|i| (u[TILT + i] - target).abs() <= self.thresholds.tilt_tolerance)
    }

    /// Advances the machine. `u_eff` supplies the actual rotor tilts.
    pub fn update(&mut self, airspeed: f64, u_eff: &ActuatorVector, command: Option<PhaseCommand>) -> FlightPhase {
        use FlightPhase::*;
        self.phase = match (self.phase, command) {
            (Multirotor, Some(PhaseCommand::ToFixedWing)) => TransitionFw,
            (FixedWing, Some(PhaseCommand::ToMultirotor)) => TransitionMc,
            (TransitionFw, Some(PhaseCommand::ToMultirotor)) => TransitionMc,
            (TransitionMc, Some(PhaseCommand::ToFixedWing)) => TransitionFw,
            (TransitionFw, _) if airspeed >= self.thresholds.forward_airspeed && self.tilts_near(u_eff, FRAC_PI_2) => {
                FixedWing
            }
            (TransitionMc, _) if airspeed <= self.thresholds.back_airspeed && self.tilts_near(u_eff, 0.0) => Multirotor,
            (p, _) => p,
        };
        self.phase
    }
}
