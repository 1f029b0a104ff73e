//! Line-oriented `section.key = value` configuration files.
//!
//! Every quantity is in SI units (m, kg, s, rad, rad/s). Keys that are absent keep
//! their defaults, so an empty file describes the default vehicle hovering in place.
//! `scenario.command` and `scenario.failure` may repeat; every other key may appear
//! once. Lines starting with `#` are comments.

use crate::params::{
    ActuatorVector, SpinDirection, Vehicle, ACTUATOR_NAMES, AILERON_LEFT, ELEVATOR, NUM_ROTORS, OMEGA, RUDDER, TILT,
};
use crate::sim::{FailureSpec, PhaseCommand, Scenario, SimConfig, StartCondition};
use nalgebra::Vector3;
use std::fmt::Write as _;
use std::path::Path;

pub const SECTIONS: [&str; 7] = ["vehicle", "geometry", "bounds", "allocator", "controller", "sim", "scenario"];

/// Simulator configuration plus the scenario to fly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub sim: SimConfig,
    pub scenario: Scenario,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `section.key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given more than once")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    /// 1-based line of the offending entry, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::Duplicate { line, .. }
            | ConfigError::Value { line, .. } => Some(*line),
            _ => None,
        }
    }
}

type Getter = fn(&ConfigFile) -> String;
type Setter = fn(&mut ConfigFile, &str) -> Result<(), String>;

struct Field {
    key: &'static str,
    get: Getter,
    set: Setter,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn parse_num(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_num(p)?;
    }
    Ok(out)
}

fn vec3(v: &Vector3<f64>) -> String {
    format!("{}, {}, {}", v.x, v.y, v.z)
}

fn parse_vec3(s: &str) -> Result<Vector3<f64>, String> {
    parse_list::<3>(s).map(Vector3::from)
}

fn spin(s: SpinDirection) -> String {
    match s {
        SpinDirection::Ccw => "ccw".into(),
        SpinDirection::Cw => "cw".into(),
    }
}

fn parse_spin(s: &str) -> Result<SpinDirection, String> {
    match s {
        "ccw" => Ok(SpinDirection::Ccw),
        "cw" => Ok(SpinDirection::Cw),
        _ => Err(format!("expected `ccw` or `cw`, got `{s}`")),
    }
}

fn range(u_lo: &ActuatorVector, u_hi: &ActuatorVector, i: usize) -> String {
    format!("{}, {}", u_lo[i], u_hi[i])
}

fn set_range(c: &mut ConfigFile, s: &str, indices: std::ops::Range<usize>) -> Result<(), String> {
    let [lo, hi] = parse_list::<2>(s)?;
    if !(lo < hi) {
        return Err(format!("lower limit {lo} is not below upper limit {hi}"));
    }
    for i in indices {
        c.sim.vehicle.bounds.lower[i] = lo;
        c.sim.vehicle.bounds.upper[i] = hi;
    }
    Ok(())
}

macro_rules! float {
    ($key:literal, $($f:ident).+) => {
        Field { key: $key, get: |c| num(c.$($f).+), set: |c, s| { c.$($f).+ = parse_num(s)?; Ok(()) } }
    };
}

macro_rules! vector {
    ($key:literal, $($f:ident).+) => {
        Field { key: $key, get: |c| vec3(&c.$($f).+), set: |c, s| { c.$($f).+ = parse_vec3(s)?; Ok(()) } }
    };
}

macro_rules! rotor {
    ($n:literal, $i:literal) => {
        [
            Field {
                key: concat!("geometry.rotor", $n),
                get: |c| vec3(&c.sim.vehicle.geometry.positions[$i]),
                set: |c, s| {
                    c.sim.vehicle.geometry.positions[$i] = parse_vec3(s)?;
                    Ok(())
                },
            },
            Field {
                key: concat!("geometry.spin", $n),
                get: |c| spin(c.sim.vehicle.geometry.spin[$i]),
                set: |c, s| {
                    c.sim.vehicle.geometry.spin[$i] = parse_spin(s)?;
                    Ok(())
                },
            },
        ]
    };
}

macro_rules! bound {
    ($key:literal, $first:expr, $range:expr) => {
        Field {
            key: $key,
            get: |c| range(&c.sim.vehicle.bounds.lower, &c.sim.vehicle.bounds.upper, $first),
            set: |c, s| set_range(c, s, $range),
        }
    };
}

fn fields() -> Vec<Field> {
    let mut f = vec![
        float!("vehicle.mass", sim.vehicle.params.mass),
        float!("vehicle.wingspan", sim.vehicle.params.wingspan),
        float!("vehicle.air_density", sim.vehicle.params.air_density),
        float!("vehicle.mean_chord", sim.vehicle.params.mean_chord),
        float!("vehicle.wing_area", sim.vehicle.params.wing_area),
        float!("vehicle.thrust_coeff", sim.vehicle.params.thrust_coeff),
        float!("vehicle.torque_coeff", sim.vehicle.params.torque_coeff),
        float!("vehicle.aileron_coeff", sim.vehicle.params.aileron_coeff),
        float!("vehicle.elevator_coeff", sim.vehicle.params.elevator_coeff),
        float!("vehicle.rudder_coeff", sim.vehicle.params.rudder_coeff),
        float!("vehicle.lift_coeff_0", sim.vehicle.params.lift_coeff_0),
        float!("vehicle.lift_coeff_alpha", sim.vehicle.params.lift_coeff_alpha),
        float!("vehicle.drag_coeff_0", sim.vehicle.params.drag_coeff_0),
        float!("vehicle.drag_coeff_alpha", sim.vehicle.params.drag_coeff_alpha),
        float!("vehicle.gravity", sim.vehicle.params.gravity),
        vector!("vehicle.inertia", sim.inertia),
    ];
    f.extend(rotor!("1", 0));
    f.extend(rotor!("2", 1));
    f.extend(rotor!("3", 2));
    f.extend(rotor!("4", 3));
    f.extend([
        bound!("bounds.omega", OMEGA, OMEGA..OMEGA + NUM_ROTORS),
        bound!("bounds.tilt", TILT, TILT..TILT + NUM_ROTORS),
        bound!("bounds.aileron", AILERON_LEFT, AILERON_LEFT..AILERON_LEFT + 2),
        bound!("bounds.elevator", ELEVATOR, ELEVATOR..ELEVATOR + 1),
        bound!("bounds.rudder", RUDDER, RUDDER..RUDDER + 1),
        float!("allocator.weight_rotor", sim.weights.rotor),
        float!("allocator.weight_tilt", sim.weights.tilt),
        float!("allocator.weight_surface", sim.weights.surface),
        float!("allocator.fd_omega", sim.fd_steps.omega),
        float!("allocator.fd_angle", sim.fd_steps.angle),
        float!("allocator.fd_squared_omega", sim.fd_steps.squared_omega),
        Field {
            key: "allocator.cadence",
            get: |c| c.sim.steady_cadence.to_string(),
            set: |c, s| {
                c.sim.steady_cadence = s.parse().map_err(|_| format!("`{s}` is not a step count"))?;
                Ok(())
            },
        },
        float!("allocator.relinearize_drift", sim.relinearize_drift),
        float!("allocator.failure_rotor_floor", sim.failure_rotor_floor),
        float!("allocator.rotor_idle", sim.rotor_idle),
        float!("allocator.preference_time_constant", sim.preference_time_constant),
        float!("controller.pos_p", sim.gains.pos_p),
        float!("controller.pos_z_p", sim.gains.pos_z_p),
        float!("controller.vel_p", sim.gains.vel_p),
        float!("controller.vel_i", sim.gains.vel_i),
        float!("controller.vel_z_p", sim.gains.vel_z_p),
        float!("controller.vel_z_i", sim.gains.vel_z_i),
        float!("controller.max_horizontal_speed", sim.gains.max_horizontal_speed),
        float!("controller.max_vertical_speed", sim.gains.max_vertical_speed),
        float!("controller.max_accel", sim.gains.max_accel),
        float!("controller.max_tilt", sim.gains.max_tilt),
        vector!("controller.hover_att_p", sim.gains.hover_attitude.att_p),
        vector!("controller.hover_rate_p", sim.gains.hover_attitude.rate_p),
        vector!("controller.hover_rate_i", sim.gains.hover_attitude.rate_i),
        vector!("controller.cruise_att_p", sim.gains.cruise_attitude.att_p),
        vector!("controller.cruise_rate_p", sim.gains.cruise_attitude.rate_p),
        vector!("controller.cruise_rate_i", sim.gains.cruise_attitude.rate_i),
        float!("controller.fw_alt_p", sim.gains.fw_alt_p),
        float!("controller.fw_alt_i", sim.gains.fw_alt_i),
        float!("controller.fw_climb_d", sim.gains.fw_climb_d),
        float!("controller.fw_vertical_p", sim.gains.fw_vertical_p),
        float!("controller.fw_vertical_d", sim.gains.fw_vertical_d),
        float!("controller.fw_speed_p", sim.gains.fw_speed_p),
        float!("controller.fw_track_p", sim.gains.fw_track_p),
        float!("controller.fw_course_p", sim.gains.fw_course_p),
        float!("controller.fw_max_bank", sim.gains.fw_max_bank),
        float!("controller.fw_max_pitch_offset", sim.gains.fw_max_pitch_offset),
        vector!("controller.max_moment", sim.gains.max_moment),
        float!("controller.max_force_ratio", sim.gains.max_force_ratio),
        float!("sim.lag_rotor", sim.lags.rotor),
        float!("sim.lag_tilt", sim.lags.tilt),
        float!("sim.lag_surface", sim.lags.surface),
        float!("sim.rate_rotor", sim.rate_limits.rotor),
        float!("sim.rate_tilt", sim.rate_limits.tilt),
        float!("sim.rate_surface", sim.rate_limits.surface),
        vector!("sim.wind", sim.wind),
        float!("sim.forward_airspeed", sim.thresholds.forward_airspeed),
        float!("sim.back_airspeed", sim.thresholds.back_airspeed),
        float!("sim.tilt_tolerance", sim.thresholds.tilt_tolerance),
        float!("sim.convergence_rate", sim.convergence_rate),
        float!("sim.convergence_hold", sim.convergence_hold),
        float!("sim.crash_attitude", sim.crash_attitude),
        Field {
            key: "scenario.name",
            get: |c| c.scenario.name.clone(),
            set: |c, s| {
                if s.is_empty() || !s.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                    return Err("names use letters, digits, `_` and `-` only".into());
                }
                c.scenario.name = s.to_string();
                Ok(())
            },
        },
        Field {
            key: "scenario.start",
            get: |c| match c.scenario.start {
                StartCondition::Hover => "hover".into(),
                StartCondition::Cruise => "cruise".into(),
            },
            set: |c, s| {
                c.scenario.start = match s {
                    "hover" => StartCondition::Hover,
                    "cruise" => StartCondition::Cruise,
                    _ => return Err(format!("expected `hover` or `cruise`, got `{s}`")),
                };
                Ok(())
            },
        },
        float!("scenario.altitude", scenario.altitude),
        float!("scenario.cruise_airspeed", scenario.cruise_airspeed),
        float!("scenario.heading", scenario.heading),
        float!("scenario.duration", scenario.duration),
        float!("scenario.dt", scenario.dt),
        Field {
            key: "scenario.seed",
            get: |c| c.scenario.seed.to_string(),
            set: |c, s| {
                c.scenario.seed = s.parse().map_err(|_| format!("`{s}` is not an unsigned integer"))?;
                Ok(())
            },
        },
        float!("scenario.perturbation", scenario.perturbation),
    ]);
    f
}

const COMMAND_KEY: &str = "scenario.command";
const FAILURE_KEY: &str = "scenario.failure";

fn command_text(t: f64, c: PhaseCommand) -> String {
    let target = match c {
        PhaseCommand::ToFixedWing => "fixed_wing",
        PhaseCommand::ToMultirotor => "multirotor",
    };
    format!("{}, {target}", num(t))
}

fn parse_command(s: &str) -> Result<(f64, PhaseCommand), String> {
    let (t, target) = s.split_once(',').ok_or("expected `<time>, fixed_wing|multirotor`")?;
    let cmd = match target.trim() {
        "fixed_wing" => PhaseCommand::ToFixedWing,
        "multirotor" => PhaseCommand::ToMultirotor,
        other => return Err(format!("unknown transition target `{other}`")),
    };
    Ok((parse_num(t.trim())?, cmd))
}

fn failure_text(f: &FailureSpec) -> String {
    let informed = if f.informed { "informed" } else { "uninformed" };
    format!("{}, {}, {}, {informed}", ACTUATOR_NAMES[f.index], num(f.lock_value), num(f.inject_time))
}

fn parse_failure(s: &str) -> Result<FailureSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [name, lock, time, informed] = parts[..] else {
        return Err("expected `<actuator>, <lock value>, <time>, informed|uninformed`".into());
    };
    let index = ACTUATOR_NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| format!("unknown actuator `{name}`; expected one of {}", ACTUATOR_NAMES.join(", ")))?;
    let informed = match informed {
        "informed" => true,
        "uninformed" => false,
        _ => return Err(format!("expected `informed` or `uninformed`, got `{informed}`")),
    };
    Ok(FailureSpec { index, lock_value: parse_num(lock)?, inject_time: parse_num(time)?, informed })
}

impl ConfigFile {
    pub fn new(sim: SimConfig, scenario: Scenario) -> Self {
        Self { sim, scenario }
    }

    pub fn vehicle(&self) -> &Vehicle {
        &self.sim.vehicle
    }

    /// Parses and validates a configuration; entries override the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table = fields();
        let mut cfg = ConfigFile::default();
        let mut seen = vec![false; table.len()];
        let mut commands = Vec::new();
        let mut failures = Vec::new();

        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let Some((section, _)) = key.split_once('.') else {
                return Err(ConfigError::Syntax { line });
            };
            if !SECTIONS.contains(&section) {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            }
            let value_err = |message: String| ConfigError::Value { line, key: key.into(), message };
            match key {
                COMMAND_KEY => commands.push(parse_command(value).map_err(value_err)?),
                FAILURE_KEY => failures.push(parse_failure(value).map_err(value_err)?),
                _ => {
                    let i = table
                        .iter()
                        .position(|f| f.key == key)
                        .ok_or_else(|| ConfigError::UnknownKey { line, key: key.into() })?;
                    if seen[i] {
                        return Err(ConfigError::Duplicate { line, key: key.into() });
                    }
                    seen[i] = true;
                    (table[i].set)(&mut cfg, value).map_err(value_err)?;
                }
            }
        }
        cfg.scenario.commands = commands;
        cfg.scenario.failures = failures;
        cfg.sim.validate().map_err(ConfigError::Invalid)?;
        cfg.scenario.validate(&cfg.sim.vehicle).map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Writes every key, grouped by section, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for f in fields() {
            let s = f.key.split_once('.').map_or("", |(s, _)| s);
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = s;
            }
            let _ = writeln!(out, "{} = {}", f.key, (f.get)(self));
        }
        for &(t, c) in &self.scenario.commands {
            let _ = writeln!(out, "{COMMAND_KEY} = {}", command_text(t, c));
        }
        for f in &self.scenario.failures {
            let _ = writeln!(out, "{FAILURE_KEY} = {}", failure_text(f));
        }
        out
    }
}
