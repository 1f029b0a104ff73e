//! Physical constants, rotor layout and actuator limits of the airframe.

use nalgebra::{SVector, Vector3};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Number of actuators: 4 rotor speeds, 4 tilt angles, 2 ailerons, elevator, rudder.
pub const NUM_ACTUATORS: usize = 12;
/// Number of rotors.
pub const NUM_ROTORS: usize = 4;

/// Index of the first rotor speed in an [`ActuatorVector`].
pub const OMEGA: usize = 0;
/// Index of the first tilt angle in an [`ActuatorVector`].
pub const TILT: usize = 4;
/// Left aileron.
pub const AILERON_LEFT: usize = 8;
/// Right aileron.
pub const AILERON_RIGHT: usize = 9;
pub const ELEVATOR: usize = 10;
pub const RUDDER: usize = 11;

/// Short channel names in storage order, used by reports and trace headers.
pub const ACTUATOR_NAMES: [&str; NUM_ACTUATORS] = [
    "omega1", "omega2", "omega3", "omega4", "chi1", "chi2", "chi3", "chi4", "aileron1",
    "aileron2", "elevator", "rudder",
];

/// Vehicle constants. Defaults are the identified values of the prototype airframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// m
    pub wingspan: f64,
    /// kg/m³
    pub air_density: f64,
    /// m
    pub mean_chord: f64,
    /// m²
    pub wing_area: f64,
    /// Rotor thrust coefficient, N·s²/rad².
    pub thrust_coeff: f64,
    /// Rotor drag-torque coefficient, N·m·s²/rad².
    pub torque_coeff: f64,
    pub aileron_coeff: f64,
    pub elevator_coeff: f64,
    pub rudder_coeff: f64,
    pub lift_coeff_0: f64,
    pub lift_coeff_alpha: f64,
    pub drag_coeff_0: f64,
    pub drag_coeff_alpha: f64,
    /// m/s²
    pub gravity: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 4.6,
            wingspan: 2.0,
            air_density: 1.2250,
            mean_chord: 0.22,
            wing_area: 0.44,
            thrust_coeff: 2.2164e-5,
            torque_coeff: 1.1082e-6,
            aileron_coeff: 0.1173,
            elevator_coeff: 0.5560,
            rudder_coeff: 0.0881,
            lift_coeff_0: 0.35,
            lift_coeff_alpha: 0.11,
            drag_coeff_0: 0.01,
            drag_coeff_alpha: 0.2,
            gravity: 9.81,
        }
    }
}

impl VehicleParams {
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("mass", self.mass),
            ("air_density", self.air_density),
            ("wing_area", self.wing_area),
            ("thrust_coeff", self.thrust_coeff),
            ("torque_coeff", self.torque_coeff),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("vehicle.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Spin sense of a rotor; sets the sign of its drag torque, `(-1)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinDirection {
    /// d = 0
    Ccw,
    /// d = 1
    Cw,
}

impl SpinDirection {
    pub fn sign(self) -> f64 {
        match self {
            SpinDirection::Ccw => 1.0,
            SpinDirection::Cw => -1.0,
        }
    }

    pub fn from_bit(d: u8) -> Option<Self> {
        match d {
            0 => Some(SpinDirection::Ccw),
            1 => Some(SpinDirection::Cw),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            SpinDirection::Ccw => 0,
            SpinDirection::Cw => 1,
        }
    }
}

/// Rotor arm base positions (body frame, m) and spin directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorGeometry {
    pub positions: [Vector3<f64>; NUM_ROTORS],
    pub spin: [SpinDirection; NUM_ROTORS],
}

impl Default for RotorGeometry {
    /// Quad-X: front-right, front-left, rear-right, rear-left; diagonals share a spin sense.
    fn default() -> Self {
        Self {
            positions: [
                Vector3::new(0.25, 0.40, 0.0),
                Vector3::new(0.25, -0.40, 0.0),
                Vector3::new(-0.25, 0.40, 0.0),
                Vector3::new(-0.25, -0.40, 0.0),
            ],
            spin: [
                SpinDirection::Ccw,
                SpinDirection::Cw,
                SpinDirection::Cw,
                SpinDirection::Ccw,
            ],
        }
    }
}

impl RotorGeometry {
    pub fn validate(&self) -> Result<(), String> {
        for i in 0..NUM_ROTORS {
            for j in (i + 1)..NUM_ROTORS {
                if (self.positions[i] - self.positions[j]).norm() == 0.0 {
                    return Err(format!("rotor {} and rotor {} share a position", i + 1, j + 1));
                }
            }
        }
        let net: f64 = self.spin.iter().map(|s| s.sign()).sum();
        if net != 0.0 {
            return Err("spin directions must be two CW and two CCW".into());
        }
        Ok(())
    }
}

/// Flat actuator vector `[ω1..ω4, χ1..χ4, δa1, δa2, δe, δr]` (rad/s and rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorVector(pub SVector<f64, NUM_ACTUATORS>);

impl ActuatorVector {
    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    pub fn from_parts(omega: [f64; 4], tilt: [f64; 4], aileron: [f64; 2], elevator: f64, rudder: f64) -> Self {
        let mut v = SVector::<f64, NUM_ACTUATORS>::zeros();
        for i in 0..NUM_ROTORS {
            v[OMEGA + i] = omega[i];
            v[TILT + i] = tilt[i];
        }
        v[AILERON_LEFT] = aileron[0];
        v[AILERON_RIGHT] = aileron[1];
        v[ELEVATOR] = elevator;
        v[RUDDER] = rudder;
        Self(v)
    }

    pub fn omega(&self, rotor: usize) -> f64 {
        self.0[OMEGA + rotor]
    }

    pub fn tilt(&self, rotor: usize) -> f64 {
        self.0[TILT + rotor]
    }

    /// Effective roll deflection, half the left/right difference.
    pub fn aileron_effective(&self) -> f64 {
        0.5 * (self.0[AILERON_LEFT] - self.0[AILERON_RIGHT])
    }

    pub fn elevator(&self) -> f64 {
        self.0[ELEVATOR]
    }

    pub fn rudder(&self) -> f64 {
        self.0[RUDDER]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

impl Index<usize> for ActuatorVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ActuatorVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Display for ActuatorVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, name) in ACTUATOR_NAMES.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{name}={:.6}", self.0[i])?;
        }
        Ok(())
    }
}

/// Box limits for every actuator channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorBounds {
    pub lower: ActuatorVector,
    pub upper: ActuatorVector,
}

impl Default for ActuatorBounds {
    fn default() -> Self {
        let surf = 30f64.to_radians();
        Self::from_channels((0.0, 1200.0), (-FRAC_PI_2, 0.75 * PI), (-surf, surf), (-surf, surf), (-surf, surf))
    }
}

impl ActuatorBounds {
    pub fn from_channels(
        omega: (f64, f64),
        tilt: (f64, f64),
        aileron: (f64, f64),
        elevator: (f64, f64),
        rudder: (f64, f64),
    ) -> Self {
        let lower = ActuatorVector::from_parts([omega.0; 4], [tilt.0; 4], [aileron.0; 2], elevator.0, rudder.0);
        let upper = ActuatorVector::from_parts([omega.1; 4], [tilt.1; 4], [aileron.1; 2], elevator.1, rudder.1);
        Self { lower, upper }
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, u: &ActuatorVector) -> bool {
        (0..NUM_ACTUATORS).all(|i| u[i] >= self.lower[i] && u[i] <= self.upper[i])
    }

    pub fn contains_index(&self, i: usize, value: f64) -> bool {
        value >= self.lower[i] && value <= self.upper[i]
    }

    /// True when every channel is at least `fraction` of its range away from both limits.
    pub fn is_interior(&self, u: &ActuatorVector, fraction: f64, skip: &[usize]) -> bool {
        (0..NUM_ACTUATORS).filter(|i| !skip.contains(i)).all(|i| {
            let margin = fraction * self.range(i);
            u[i] >= self.lower[i] + margin && u[i] <= self.upper[i] - margin
        })
    }

    pub fn clamp(&self, u: &ActuatorVector) -> ActuatorVector {
        let mut out = *u;
        for i in 0..NUM_ACTUATORS {
            out[i] = u[i].clamp(self.lower[i], self.upper[i]);
        }
        out
    }

    pub fn omega_max(&self) -> f64 {
        (0..NUM_ROTORS).map(|i| self.upper[OMEGA + i]).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), String> {
        for i in 0..NUM_ACTUATORS {
            if !(self.lower[i] < self.upper[i]) {
                return Err(format!("bounds for {} are empty", ACTUATOR_NAMES[i]));
            }
        }
        if (0..NUM_ROTORS).any(|i| self.lower[OMEGA + i] < 0.0) {
            return Err("rotor speed lower bound must be non-negative".into());
        }
        Ok(())
    }
}

/// Airframe description shared by every module: constants, rotor layout and limits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vehicle {
    pub params: VehicleParams,
    pub geometry: RotorGeometry,
    pub bounds: ActuatorBounds,
}

impl Vehicle {
    pub fn validate(&self) -> Result<(), String> {
        self.params.validate()?;
        self.geometry.validate()?;
        self.bounds.validate()
    }
}
