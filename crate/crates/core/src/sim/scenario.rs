use super::phase::PhaseCommand;
use crate::params::{Vehicle, ACTUATOR_NAMES, AILERON_LEFT, ELEVATOR, NUM_ACTUATORS, OMEGA, TILT};
use std::f64::consts::FRAC_PI_2;

/// Actuator stuck at `lock_value` from `inject_time` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureSpec {
    pub index: usize,
    pub lock_value: f64,
    /// s
    pub inject_time: f64,
    /// Whether the allocator is told about the failure.
    pub informed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartCondition {
    /// Level hover at the trim input.
    Hover,
    /// Level cruise at the cruise trim.
    Cruise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub start: StartCondition,
    /// Initial altitude, m.
    pub altitude: f64,
    /// Cruise airspeed, m/s; also the target speed of forward transitions.
    pub cruise_airspeed: f64,
    /// Initial heading and fixed-wing path course, rad.
    pub heading: f64,
    /// Timed transition requests, s.
    pub commands: Vec<(f64, PhaseCommand)>,
    pub failures: Vec<FailureSpec>,
    /// s
    pub duration: f64,
    /// s
    pub dt: f64,
    pub seed: u64,
    /// Amplitude of a seeded initial attitude perturbation, rad.
    pub perturbation: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "hover_hold".into(),
            start: StartCondition::Hover,
            altitude: 20.0,
            cruise_airspeed: 20.0,
            heading: 0.0,
            commands: Vec::new(),
            failures: Vec::new(),
            duration: 30.0,
            dt: 0.004,
            seed: 0,
            perturbation: 0.0,
        }
    }
}

impl Scenario {
    pub fn validate(&self, vehicle: &Vehicle) -> Result<(), String> {
        if !(self.dt > 0.0 && self.dt <= super::dynamics::MAX_DT) {
            return Err(format!("dt must be in (0, {}] s", super::dynamics::MAX_DT));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err("duration must be positive".into());
        }
        if !(self.altitude > 0.0) {
            return Err("altitude must be positive".into());
        }
        if !(self.cruise_airspeed > 0.0) {
            return Err("cruise airspeed must be positive".into());
        }
        if !(self.perturbation >= 0.0) {
            return Err("perturbation must be non-negative".into());
        }
        let mut seen = [false; NUM_ACTUATORS];
        for f in &self.failures {
            if f.index >= NUM_ACTUATORS {
                return Err(format!("failure index {} out of range", f.index));
            }
            if seen[f.index] {
                return Err(format!("actuator {} fails twice", ACTUATOR_NAMES[f.index]));
            }
            seen[f.index] = true;
            if !vehicle.bounds.contains_index(f.index, f.lock_value) {
                return Err(format!("lock value {} outside limits of {}", f.lock_value, ACTUATOR_NAMES[f.index]));
            }
            if !(f.inject_time >= 0.0) {
                return Err("inject time must be non-negative".into());
            }
            if f.inject_time > self.duration {
                return Err("duration must cover every inject time".into());
            }
        }
        Ok(())
    }

    /// Earliest failure injection, if any.
    pub fn first_injection(&self) -> Option<f64> {
        self.failures.iter().map(|f| f.inject_time).fold(None, |acc, t| Some(acc.map_or(t, |a: f64| a.min(t))))
    }

    /// Same scenario with every failure's informed flag set.
    pub fn with_informed(&self, informed: bool) -> Scenario {
        let mut s = self.clone();
        for f in &mut s.failures {
            f.informed = informed;
        }
        let suffix = if informed { "informed" } else { "uninformed" };
        s.name = format!("{}_{suffix}", self.name);
        s
    }
}

pub const INJECT_TIME: f64 = 10.0;
pub const CASE_DURATION: f64 = 40.0;

fn case(name: &str, start: StartCondition, index: usize, lock_value: f64) -> Scenario {
    Scenario {
        name: name.into(),
        start,
        altitude: if start == StartCondition::Hover { 20.0 } else { 50.0 },
        failures: vec![FailureSpec { index, lock_value, inject_time: INJECT_TIME, informed: true }],
        duration: CASE_DURATION,
        ..Default::default()
    }
}

/// The five single-actuator failure cases, informed.
pub fn failure_corpus() -> Vec<Scenario> {
    vec![
        case("hover_tilt_lock", StartCondition::Hover, TILT, 60f64.to_radians()),
        case("hover_motor_failure", StartCondition::Hover, OMEGA, 0.0),
        case("cruise_motor_failure", StartCondition::Cruise, OMEGA, 0.0),
        case("cruise_elevator_lock", StartCondition::Cruise, ELEVATOR, 6f64.to_radians()),
        case("cruise_aileron_lock", StartCondition::Cruise, AILERON_LEFT, 15f64.to_radians()),
    ]
}

/// Hover tilt locks at the extremes of the servo travel used in flight tests.
pub fn tilt_lock_extremes() -> Vec<Scenario> {
    vec![
        case("hover_tilt_lock_plus90", StartCondition::Hover, TILT, FRAC_PI_2),
        case("hover_tilt_lock_minus90", StartCondition::Hover, TILT, -FRAC_PI_2),
    ]
}

/// Every corpus case as an informed and an uninformed run.
pub fn suite() -> Vec<Scenario> {
    failure_corpus().iter().flat_map(|s| [s.with_informed(true), s.with_informed(false)]).collect()
}

/// Hover, transition forward, cruise, transition back, hover.
pub fn full_mission() -> Scenario {
    Scenario {
        name: "full_mission".into(),
        commands: vec![(5.0, PhaseCommand::ToFixedWing), (45.0, PhaseCommand::ToMultirotor)],
        duration: 90.0,
        altitude: 30.0,
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_valid() {
        let v = Vehicle::default();
        for s in failure_corpus().iter().chain(tilt_lock_extremes().iter()) {
            s.validate(&v).unwrap();
        }
        assert_eq!(suite().len(), 10);
    }

    #[test]
    fn rejects_duplicate_and_late_failures() {
        let v = Vehicle::default();
        let mut s = failure_corpus()[1].clone();
        s.failures.push(s.failures[0]);
        assert!(s.validate(&v).is_err());
        let mut s = failure_corpus()[1].clone();
        s.failures[0].inject_time = 100.0;
        assert!(s.validate(&v).is_err());
    }
}
