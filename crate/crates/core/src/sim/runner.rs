use super::controller::{ControlInput, Controller, Setpoint};
use super::phase::{FlightPhase, PhaseCommand, PhaseMachine, PhaseThresholds};
use super::scenario::{Scenario, StartCondition};
use super::{dynamics, SimConfig, SimError};
use crate::allocator::{
    allocate, effectiveness_at, failure_trim, find_trim, ActuatorFailure, AllocError, AllocationRequest, Coordinates, EffectivenessMatrix,
    TrimPhase, TrimPoint,
};
use crate::model::{self, AeroState, RigidBodyState, Wrench};
use crate::params::{ActuatorBounds, ActuatorVector, NUM_ACTUATORS, NUM_ROTORS, TILT};
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub state: RigidBodyState,
    pub aero: AeroState,
    pub phase: FlightPhase,
    pub u_cmd: ActuatorVector,
    pub u_eff: ActuatorVector,
    /// Total wrench requested by the controller.
    pub desired: Wrench,
    /// Model wrench at the effective input.
    pub achieved: Wrench,
    pub objective: f64,
    /// `‖h(u_sp, x) − W_desired‖`: what linearization and saturation leave unmet.
    pub residual: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub name: String,
    pub crashed: bool,
    pub crash_time: Option<f64>,
    /// Reference time for the post-event metrics (first injection, or 0).
    pub reference_time: f64,
    /// Seconds after the reference time until the commands settle; `None` if they never do.
    pub time_to_converge: Option<f64>,
    pub max_attitude_dev_deg: f64,
    pub max_heading_dev_deg: f64,
    pub altitude_variation_m: f64,
    pub max_cross_track_m: f64,
    pub saturation_count: usize,
    pub final_phase: FlightPhase,
    pub simulated_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub summary: Summary,
}

fn blend(a: &ActuatorVector, b: &ActuatorVector, s: f64) -> ActuatorVector {
    ActuatorVector(a.0 * (1.0 - s) + b.0 * s)
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn initial_state(scenario: &Scenario, cruise: Option<&TrimPoint>) -> Result<RigidBodyState, SimError> {
    let yaw = UnitQuaternion::from_euler_angles(0.0, 0.0, scenario.heading);
    let mut s = match scenario.start {
        StartCondition::Hover => RigidBodyState { attitude: *yaw.quaternion(), ..Default::default() },
        StartCondition::Cruise => {
            let trim = cruise.ok_or_else(|| SimError::InvalidScenario("no cruise trim".into()))?;
            let q = yaw * UnitQuaternion::new_normalize(trim.state.attitude);
            RigidBodyState {
                velocity: yaw.transform_vector(&trim.state.velocity),
                attitude: *q.quaternion(),
                ..Default::default()
            }
        }
    };
    s.position = Vector3::new(0.0, 0.0, -scenario.altitude);
    if scenario.perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let a = scenario.perturbation;
        let d = UnitQuaternion::from_euler_angles(rng.random_range(-a..=a), rng.random_range(-a..=a), rng.random_range(-a..=a));
        s.attitude = *(UnitQuaternion::new_normalize(s.attitude) * d).quaternion();
    }
    Ok(s)
}

/// Narrows the tilt range during transitions so the rotors follow the airspeed: fully
/// forward once the forward threshold is reached, fully up at the back threshold.
fn schedule_tilts(bounds: &mut ActuatorBounds, phase: FlightPhase, airspeed: f64, th: &PhaseThresholds, failed: &[usize]) {
    let (lo, hi) = match phase {
        FlightPhase::TransitionFw => ((airspeed / th.forward_airspeed).clamp(0.0, 1.0) * FRAC_PI_2, FRAC_PI_2),
        FlightPhase::TransitionMc => {
            let s = ((airspeed - th.back_airspeed) / (th.forward_airspeed - th.back_airspeed)).clamp(0.0, 1.0);
            (0.0, s * FRAC_PI_2)
        }
        _ => return,
    };
    for i in TILT..TILT + NUM_ROTORS {
        if failed.contains(&i) {
            continue;
        }
        let l = bounds.lower[i].max(lo).min(bounds.upper[i]);
        let h = bounds.upper[i].min(hi).max(bounds.lower[i]);
        bounds.lower[i] = l.min(h);
        bounds.upper[i] = h.max(l);
    }
}

/// Runs the closed loop: phase machine, controller, allocator, actuator lags, failure
/// clamp, integration. Ends early when the vehicle crashes.
pub fn run_scenario(config: &SimConfig, scenario: &Scenario) -> Result<RunOutput, SimError> {
    config.validate().map_err(SimError::InvalidScenario)?;
    scenario.validate(&config.vehicle).map_err(SimError::InvalidScenario)?;
    let vehicle = &config.vehicle;
    let plant = config.plant();
    let dt = scenario.dt;

    let hover = find_trim(TrimPhase::Hover, vehicle)?;
    let needs_cruise = scenario.start == StartCondition::Cruise
        || scenario.commands.iter().any(|(_, c)| *c == PhaseCommand::ToFixedWing);
    let cruise = if needs_cruise {
        Some(find_trim(TrimPhase::Cruise { airspeed: scenario.cruise_airspeed }, vehicle)?)
    } else {
        find_trim(TrimPhase::Cruise { airspeed: scenario.cruise_airspeed }, vehicle).ok()
    };
    let cruise_u = cruise.map(|c| c.u).unwrap_or(hover.u);
    let cruise_pitch = cruise.map(|c| c.pitch()).unwrap_or(0.0);

    let mut state = initial_state(scenario, cruise.as_ref())?;
    let (mut machine, mut u_cmd) = match scenario.start {
        StartCondition::Hover => (PhaseMachine::new(FlightPhase::Multirotor, config.thresholds), hover.u),
        StartCondition::Cruise => (PhaseMachine::new(FlightPhase::FixedWing, config.thresholds), cruise_u),
    };
    let mut u_eff = u_cmd;
    let mut setpoint = Setpoint { position: state.position, yaw: scenario.heading, airspeed: scenario.cruise_airspeed };
    let inertia = Matrix3::from_diagonal(&config.inertia);
    let mut controller = Controller::new(config.gains, vehicle.params, inertia);

    let steps = (scenario.duration / dt).round() as usize;
    let mut records = Vec::with_capacity(steps);
    let mut eff: Option<EffectivenessMatrix> = None;
    let mut last_relin = 0usize;
    let mut lin_point = u_cmd;
    let mut informed_prev: Vec<usize> = Vec::new();
    let mut crash_time = None;
    let mut was_saturated = false;
    let mut hover_pref = hover.u;
    let mut preferred_prev: Option<ActuatorVector> = None;
    let mut cruise_pref = cruise_u;

    for k in 0..steps {
        let t = k as f64 * dt;
        let active: Vec<_> = scenario.failures.iter().filter(|f| f.inject_time <= t + 1e-12).collect();
        let informed: Vec<ActuatorFailure> = active
            .iter()
            .filter(|f| f.informed)
            .map(|f| ActuatorFailure { index: f.index, lock_value: f.lock_value })
            .collect();
        let informed_idx: Vec<usize> = informed.iter().map(|f| f.index).collect();

        let aero = model::aero_angles(&model::air_velocity_body(&state, &plant.wind)?, &vehicle.params);
        let command = scenario
            .commands
            .iter()
            .find(|(tc, _)| *tc >= t - 1e-12 && *tc < t + dt - 1e-12)
            .map(|(_, c)| *c);
        let prev_phase = machine.phase;
        let phase = machine.update(aero.airspeed, &u_eff, command);
        let phase_changed = phase != prev_phase;
        if phase_changed {
            let (_, _, yaw) = state.euler();
            match phase {
                FlightPhase::Multirotor => {
                    setpoint.position = state.position;
                    setpoint.yaw = yaw;
                }
                FlightPhase::FixedWing => {
                    setpoint.position = state.position;
                    setpoint.position.z = -scenario.altitude;
                }
                _ => {}
            }
        }

        let coords = if phase == FlightPhase::Multirotor { Coordinates::SquaredRotorSpeed } else { Coordinates::Actuator };
        if informed_idx != informed_prev {
            let floor = config.failure_rotor_floor * hover.u[0];
            hover_pref = failure_trim(vehicle, &hover, &informed, floor).map_or(hover.u, |p| p.u);
            cruise_pref = cruise.and_then(|c| failure_trim(vehicle, &c, &informed, config.rotor_idle).ok()).map_or(cruise_u, |p| p.u);
        }
        let mut u_lin = u_cmd;
        for f in &informed {
            u_lin[f.index] = f.lock_value;
        }
        let drifted = eff.is_some()
            && (0..NUM_ACTUATORS).any(|i| (u_lin[i] - lin_point[i]).abs() > config.relinearize_drift * vehicle.bounds.range(i));
        let relin = eff.is_none()
            || drifted
            || phase.is_transition()
            || phase_changed
            || informed_idx != informed_prev
            || k - last_relin >= config.steady_cadence;
        if relin {
            eff = Some(effectiveness_at(vehicle, &state, &plant.wind, &u_lin, &informed_idx, coords, &config.fd_steps)?);
            last_relin = k;
            lin_point = u_lin;
            informed_prev = informed_idx.clone();
        }
        let e = eff.as_mut().expect("linearization present");
        e.u0 = u_lin;

        let w_lin = plant.wrench(&u_lin, &state)?;
        let out = controller.update(&ControlInput {
            state: &state,
            setpoint: &setpoint,
            phase,
            airspeed: aero.airspeed,
            cruise_pitch,
            current_wrench: &w_lin,
            hold_integrators: was_saturated,
            dt,
        });
        let target = match phase {
            FlightPhase::Multirotor => hover_pref,
            FlightPhase::FixedWing => cruise_pref,
            _ => blend(&hover_pref, &cruise_pref, (aero.airspeed / scenario.cruise_airspeed).clamp(0.0, 1.0)),
        };
        let preferred = match preferred_prev {
            Some(p) if !phase_changed => blend(&p, &target, 1.0 - (-dt / config.preference_time_constant).exp()),
            _ => target,
        };
        preferred_prev = Some(preferred);
        let mut step_bounds = config.rate_limits.step_bounds(&vehicle.bounds, &u_lin, dt);
        schedule_tilts(&mut step_bounds, phase, aero.airspeed, &config.thresholds, &informed_idx);
        if phase != FlightPhase::Multirotor {
            for i in (0..NUM_ROTORS).filter(|i| !informed_idx.contains(i)) {
                step_bounds.lower[i] = step_bounds.lower[i].max(config.rotor_idle.min(step_bounds.upper[i]));
            }
        }
        let request = AllocationRequest {
            desired: out.wrench - w_lin,
            effectiveness: e,
            preferred,
            failures: &informed,
            weights: &config.weights,
            bounds: &step_bounds,
        };
        let (result, saturated) = match allocate(&request) {
            Ok(r) => (r, false),
            Err(AllocError::Saturated(lv)) => (*lv, true),
            Err(err) => return Err(err.into()),
        };
        u_cmd = result.u_sp;
        was_saturated = saturated;
        let residual = (plant.wrench(&u_cmd, &state)? - out.wrench).norm();

        u_eff = config.lags.apply(&u_eff, &u_cmd, dt);
        for f in &active {
            u_eff[f.index] = f.lock_value;
        }
        let achieved = plant.wrench(&u_eff, &state)?;
        records.push(TraceRecord {
            t,
            state,
            aero,
            phase,
            u_cmd,
            u_eff,
            desired: out.wrench,
            achieved,
            objective: result.objective,
            residual,
            saturated,
        });

        match dynamics::step(&plant, &state, &u_eff, dt) {
            Ok(next) => state = next,
            Err(SimError::Diverged { .. }) => {
                crash_time = Some(t + dt);
                break;
            }
            Err(e) => return Err(e),
        }
        let (roll, pitch, _) = state.euler();
        if roll.abs() > config.crash_attitude || pitch.abs() > config.crash_attitude || state.altitude() < 0.0 {
            crash_time = Some(t + dt);
            break;
        }
    }

    let trace = Trace { scenario: scenario.name.clone(), records };
    let summary = summarize(config, scenario, &trace, crash_time);
    Ok(RunOutput { trace, summary })
}

/// Post-event metrics over a trace.
pub fn summarize(config: &SimConfig, scenario: &Scenario, trace: &Trace, crash_time: Option<f64>) -> Summary {
    let t_ref = scenario.first_injection().unwrap_or(0.0);
    let recs = &trace.records;
    let start = recs.iter().position(|r| r.t >= t_ref - 1e-12).unwrap_or(recs.len());
    let after = &recs[start..];
    let bounds = &config.vehicle.bounds;

    let (roll0, pitch0, yaw0) = after.first().map(|r| r.state.euler()).unwrap_or((0.0, 0.0, 0.0));
    let mut max_att: f64 = 0.0;
    let mut max_heading: f64 = 0.0;
    let mut alt_min = f64::INFINITY;
    let mut alt_max = f64::NEG_INFINITY;
    let mut max_cross: f64 = 0.0;
    let (sy, cy) = scenario.heading.sin_cos();
    let origin = recs.first().map(|r| r.state.position).unwrap_or_default();
    for r in after {
        let (roll, pitch, yaw) = r.state.euler();
        max_att = max_att.max(wrap(roll - roll0).abs()).max(wrap(pitch - pitch0).abs());
        max_heading = max_heading.max(wrap(yaw - yaw0).abs());
        alt_min = alt_min.min(r.state.altitude());
        alt_max = alt_max.max(r.state.altitude());
        let rel = r.state.position - origin;
        max_cross = max_cross.max((-sy * rel.x + cy * rel.y).abs());
    }

    // settling: normalized command rate stays below threshold for the hold time
    let hold = (config.convergence_hold / scenario.dt).round() as usize;
    let mut time_to_converge = None;
    if crash_time.is_none() && after.len() > 1 {
        let rates: Vec<f64> = after
            .windows(2)
            .map(|w| {
                (0..NUM_ACTUATORS)
                    .map(|i| ((w[1].u_cmd[i] - w[0].u_cmd[i]) / scenario.dt).abs() / bounds.range(i))
                    .fold(0.0, f64::max)
            })
            .collect();
        let mut run = 0usize;
        for (j, &rate) in rates.iter().enumerate() {
            if rate <= config.convergence_rate {
                run += 1;
                if run >= hold {
                    let first = j + 1 - run;
                    time_to_converge = Some(after[first].t - t_ref);
                    break;
                }
            } else {
                run = 0;
            }
        }
    }

    Summary {
        name: scenario.name.clone(),
        crashed: crash_time.is_some(),
        crash_time,
        reference_time: t_ref,
        time_to_converge,
        max_attitude_dev_deg: max_att.to_degrees(),
        max_heading_dev_deg: max_heading.to_degrees(),
        altitude_variation_m: if after.is_empty() { 0.0 } else { alt_max - alt_min },
        max_cross_track_m: max_cross,
        saturation_count: recs.iter().filter(|r| r.saturated).count(),
        final_phase: recs.last().map(|r| r.phase).unwrap_or(FlightPhase::Multirotor),
        simulated_time: recs.last().map(|r| r.t + scenario.dt).unwrap_or(0.0),
    }
}
