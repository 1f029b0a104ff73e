//! Feasible wrench sets and the static-hover / cruise feasibility conditions.

use crate::allocator::{find_trim, ActuatorFailure, TrimError, TrimPhase};
use crate::model::{self, ModelError, RigidBodyState, Wrench, AIRSPEED_EPSILON};
use crate::params::{ActuatorVector, Vehicle, ACTUATOR_NAMES, NUM_ACTUATORS, NUM_ROTORS, OMEGA, TILT};
use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;

/// Witnesses must sit this fraction of each actuator range away from both limits.
pub const INTERIOR_FRACTION: f64 = 0.01;
pub const MULTI_START_COUNT: usize = 16;
const RANK_TOL: f64 = 1e-8;
/// Thrust surplus demanded by the nonlinear hover search, as a fraction of weight.
const HOVER_SURPLUS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WrenchConfig {
    /// Tilts upright, surfaces neutral, still air.
    Multirotor,
    /// Tilts full forward at the cruise trim state for this airspeed.
    FixedWing { airspeed: f64 },
}

impl fmt::Display for WrenchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WrenchConfig::Multirotor => write!(f, "multirotor"),
            WrenchConfig::FixedWing { airspeed } => write!(f, "fixed-wing({airspeed} m/s)"),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum WrenchSpaceError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("actuator index {0} out of range")]
    InvalidIndex(usize),
    #[error("lock value {value} for {name} is outside its limits")]
    LockOutOfBounds { name: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trim(#[from] TrimError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrenchSetSample {
    pub points: Vec<Wrench>,
    pub config: WrenchConfig,
    pub failed_actuator: Option<usize>,
    pub sample_count: usize,
}

fn check_failure(vehicle: &Vehicle, failed: Option<&ActuatorFailure>) -> Result<(), WrenchSpaceError> {
    if let Some(f) = failed {
        if f.index >= NUM_ACTUATORS {
            return Err(WrenchSpaceError::InvalidIndex(f.index));
        }
        if !vehicle.bounds.contains_index(f.index, f.lock_value) {
            return Err(WrenchSpaceError::LockOutOfBounds { name: ACTUATOR_NAMES[f.index], value: f.lock_value });
        }
    }
    Ok(())
}

/// State and pinned channels for a sampling configuration.
fn config_base(vehicle: &Vehicle, config: WrenchConfig) -> Result<(RigidBodyState, ActuatorVector, Vec<usize>), WrenchSpaceError> {
    match config {
        WrenchConfig::Multirotor => {
            let pinned = (TILT..NUM_ACTUATORS).collect();
            Ok((RigidBodyState::default(), ActuatorVector::zeros(), pinned))
        }
        WrenchConfig::FixedWing { airspeed } => {
            let trim = find_trim(TrimPhase::Cruise { airspeed }, vehicle)?;
            let mut base = ActuatorVector::zeros();
            for i in 0..NUM_ROTORS {
                base[TILT + i] = FRAC_PI_2;
            }
            Ok((trim.state, base, (TILT..TILT + NUM_ROTORS).collect()))
        }
    }
}

/// Monte Carlo image of the actuator box under the wrench map.
pub fn sample_wrench_set(
    vehicle: &Vehicle,
    config: WrenchConfig,
    failed: Option<&ActuatorFailure>,
    n_samples: usize,
    seed: u64,
) -> Result<WrenchSetSample, WrenchSpaceError> {
    if n_samples == 0 {
        return Err(WrenchSpaceError::NoSamples);
    }
    check_failure(vehicle, failed)?;
    let (state, base, pinned) = config_base(vehicle, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<ActuatorVector> = (0..n_samples)
        .map(|_| {
            let mut u = base;
            for i in 0..NUM_ACTUATORS {
                if !pinned.contains(&i) {
                    u[i] = rng.random_range(vehicle.bounds.lower[i]..=vehicle.bounds.upper[i]);
                }
            }
            if let Some(f) = failed {
                u[f.index] = f.lock_value;
            }
            u
        })
        .collect();
    let points = inputs
        .par_iter()
        .map(|u| model::vehicle_wrench(u, &state, &Vector3::zeros(), vehicle))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WrenchSetSample { sample_count: points.len(), points, config, failed_actuator: failed.map(|f| f.index) })
}

pub fn export_wrench_cloud(sample: &WrenchSetSample, path: &Path) -> io::Result<()> {
    let mut out = io::BufWriter::new(std::fs::File::create(path)?);
    write_wrench_cloud(sample, &mut out)?;
    out.flush()
}

pub fn write_wrench_cloud<W: Write>(sample: &WrenchSetSample, out: &mut W) -> io::Result<()> {
    writeln!(out, "Mx,My,Mz,Fx,Fy,Fz")?;
    for p in &sample.points {
        let row: Vec<String> = p.0.iter().map(|v| format!("{v:.8e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_wrench_cloud(path: &Path) -> io::Result<Vec<Wrench>> {
    let file = io::BufReader::new(std::fs::File::open(path)?);
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut points = Vec::new();
    for (n, line) in file.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != "Mx,My,Mz,Fx,Fy,Fz" {
                return Err(bad(format!("unexpected header {line:?}")));
            }
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 1))))
            .collect::<Result<_, _>>()?;
        if vals.len() != 6 {
            return Err(bad(format!("line {}: expected 6 fields", n + 1)));
        }
        points.push(Wrench(nalgebra::SVector::from_column_slice(&vals)));
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoverFeasibility {
    /// Rank of the rotor force map over the functioning rotors.
    pub rank_fm: usize,
    /// Rank of the rotor moment map over the functioning rotors.
    pub rank_gm: usize,
    pub feasible: bool,
    pub witness_u: Option<ActuatorVector>,
    /// Upward force minus weight at the witness, N.
    pub margin: f64,
    /// True when a negative answer comes from local search and may be conservative.
    pub conservative: bool,
    pub tilt_free: bool,
}

impl fmt::Display for HoverFeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tilt_free = {}", self.tilt_free)?;
        writeln!(f, "rank_fm = {}", self.rank_fm)?;
        writeln!(f, "rank_gm = {}", self.rank_gm)?;
        writeln!(f, "feasible = {}", self.feasible)?;
        writeln!(f, "margin_n = {:.6}", self.margin)?;
        writeln!(f, "conservative = {}", self.conservative)?;
        match &self.witness_u {
            Some(u) => writeln!(f, "witness = {u}"),
            None => writeln!(f, "witness = none"),
        }
    }
}

fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= RANK_TOL * max).count()
}

/// Per-rotor force and moment per unit `ω²` at the given tilt.
fn rotor_columns(vehicle: &Vehicle, i: usize, tilt: f64) -> (Vector3<f64>, Vector3<f64>) {
    let p = &vehicle.params;
    let axis = model::rotor_axis(tilt);
    let force = p.thrust_coeff * axis;
    let moment = vehicle.geometry.positions[i].cross(&force) + vehicle.geometry.spin[i].sign() * p.torque_coeff * axis;
    (force, moment)
}

fn hover_tilts(failed: Option<&ActuatorFailure>) -> [f64; NUM_ROTORS] {
    let mut tilts = [0.0; NUM_ROTORS];
    if let Some(f) = failed {
        if (TILT..TILT + NUM_ROTORS).contains(&f.index) {
            tilts[f.index - TILT] = f.lock_value;
        }
    }
    tilts
}

/// Static-hover condition in multirotor configuration.
///
/// With tilts held, the rotor wrench is linear in `t = ω²` and the check is an exact
/// linear program (maximize upward force with zero moment over the interior box),
/// solved by vertex enumeration. With tilts free, a multi-start nonlinear search looks
/// for an interior input with zero moment, no horizontal force and a small thrust surplus.
pub fn static_hover_check(
    vehicle: &Vehicle,
    failed: Option<&ActuatorFailure>,
    allow_tilt: bool,
) -> Result<HoverFeasibility, WrenchSpaceError> {
    check_failure(vehicle, failed)?;
    let tilts = hover_tilts(failed);
    let failed_rotor = failed.filter(|f| f.index < NUM_ROTORS);
    let free: Vec<usize> = (0..NUM_ROTORS).filter(|&i| failed_rotor.is_none_or(|f| f.index != i)).collect();

    let mut fm = DMatrix::zeros(3, free.len());
    let mut gm = DMatrix::zeros(3, free.len());
    for (c, &i) in free.iter().enumerate() {
        let (f, m) = rotor_columns(vehicle, i, tilts[i]);
        fm.set_column(c, &f);
        gm.set_column(c, &m);
    }
    let (rank_fm, rank_gm) = (rank(&fm), rank(&gm));

    let mut report = if allow_tilt {
        hover_tilt_free(vehicle, failed)?
    } else {
        hover_tilt_locked(vehicle, failed, &tilts, &free, &gm)?
    };
    report.rank_fm = rank_fm;
    report.rank_gm = rank_gm;
    Ok(report)
}

fn hover_tilt_locked(
    vehicle: &Vehicle,
    failed: Option<&ActuatorFailure>,
    tilts: &[f64; NUM_ROTORS],
    free: &[usize],
    gm: &DMatrix<f64>,
) -> Result<HoverFeasibility, WrenchSpaceError> {
    let b = &vehicle.bounds;
    let weight = vehicle.params.weight();
    // locked rotor speed contributes a constant wrench
    let mut m_fixed = Vector3::zeros();
    let mut up_fixed = 0.0;
    if let Some(f) = failed.filter(|f| f.index < NUM_ROTORS) {
        let (force, moment) = rotor_columns(vehicle, f.index, tilts[f.index]);
        let t = f.lock_value * f.lock_value;
        m_fixed += moment * t;
        up_fixed -= force.z * t;
    }
    let up: Vec<f64> = free.iter().map(|&i| -rotor_columns(vehicle, i, tilts[i]).0.z).collect();
    let lo: Vec<f64> = free
        .iter()
        .map(|&i| (b.lower[OMEGA + i] + INTERIOR_FRACTION * b.range(OMEGA + i)).powi(2))
        .collect();
    let hi: Vec<f64> = free
        .iter()
        .map(|&i| (b.upper[OMEGA + i] - INTERIOR_FRACTION * b.range(OMEGA + i)).powi(2))
        .collect();

    let n = free.len();
    let r = rank(gm).min(n);
    let mut best: Option<(f64, DVector<f64>)> = None;
    // vertices: n - r coordinates at a bound, the rest from the moment equality
    for fixed in subsets(n, n - r) {
        let rest: Vec<usize> = (0..n).filter(|j| !fixed.contains(j)).collect();
        for pattern in 0..(1usize << fixed.len()) {
            let mut t = DVector::zeros(n);
            for (bit, &j) in fixed.iter().enumerate() {
                t[j] = if pattern >> bit & 1 == 1 { hi[j] } else { lo[j] };
            }
            let rhs = -(m_fixed + gm * &t);
            let sub = DMatrix::from_fn(3, rest.len(), |row, c| gm[(row, rest[c])]);
            let Ok(pinv) = sub.clone().pseudo_inverse(1e-12) else { continue };
            let sol = pinv * rhs;
            for (c, &j) in rest.iter().enumerate() {
                t[j] = sol[c];
            }
            let scale = 1.0 + gm.amax() * hi.iter().cloned().fold(0.0, f64::max);
            if (m_fixed + gm * &t).amax() > 1e-9 * scale {
                continue;
            }
            let tol = 1e-9 * hi.iter().cloned().fold(1.0, f64::max);
            if (0..n).any(|j| t[j] < lo[j] - tol || t[j] > hi[j] + tol) {
                continue;
            }
            for j in 0..n {
                t[j] = t[j].clamp(lo[j], hi[j]);
            }
            let upward = up_fixed + (0..n).map(|j| up[j] * t[j]).sum::<f64>();
            if best.as_ref().is_none_or(|(v, _)| upward > *v) {
                best = Some((upward, t));
            }
        }
    }

    let Some((upward, t)) = best else {
        return Ok(HoverFeasibility {
            rank_fm: 0,
            rank_gm: 0,
            feasible: false,
            witness_u: None,
            margin: -weight,
            conservative: false,
            tilt_free: false,
        });
    };
    let mut u = ActuatorVector::zeros();
    for i in 0..NUM_ROTORS {
        u[TILT + i] = tilts[i];
    }
    if let Some(f) = failed {
        u[f.index] = f.lock_value;
    }
    for (j, &i) in free.iter().enumerate() {
        u[OMEGA + i] = t[j].sqrt();
    }
    let feasible = upward >= weight;
    Ok(HoverFeasibility {
        rank_fm: 0,
        rank_gm: 0,
        feasible,
        witness_u: feasible.then_some(u),
        margin: upward - weight,
        conservative: false,
        tilt_free: false,
    })
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..1usize << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|j| m >> j & 1 == 1).collect())
        .collect()
}

/// Damped Gauss-Newton on `r(x) = 0`; returns the final iterate and residual norm.
fn levenberg_marquardt<F>(f: F, mut x: DVector<f64>, max_iter: usize) -> Result<(DVector<f64>, f64), ModelError>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, ModelError>,
{
    let n = x.len();
    let mut r = f(&x)?;
    let mut mu = 1e-3;
    for _ in 0..max_iter {
        if r.amax() <= 1e-12 {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), n);
        for j in 0..n {
            let h = 1e-7;
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            jac.set_column(j, &((f(&xp)? - f(&xm)?) / (2.0 * h)));
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let mut accepted = false;
        for _ in 0..30 {
            let lhs = &jtj + DMatrix::identity(n, n) * mu;
            let Some(dx) = lhs.cholesky().map(|c| c.solve(&-&g)) else {
                mu *= 10.0;
                continue;
            };
            let xn = &x + dx;
            let rn = f(&xn)?;
            if rn.norm() < r.norm() {
                x = xn;
                r = rn;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    let norm = r.norm();
    Ok((x, norm))
}

/// Variable layout shared by the nonlinear searches: for every free actuator in
/// `vars`, a scaled value (rotors by `ω_max`, angles as is).
fn unpack(vars: &[usize], x: &DVector<f64>, base: &ActuatorVector, omega_scale: f64, offset: usize) -> ActuatorVector {
    let mut u = *base;
    for (j, &i) in vars.iter().enumerate() {
        u[i] = if i < TILT { x[offset + j].abs() * omega_scale } else { x[offset + j] };
    }
    u
}

fn hover_tilt_free(vehicle: &Vehicle, failed: Option<&ActuatorFailure>) -> Result<HoverFeasibility, WrenchSpaceError> {
    let weight = vehicle.params.weight();
    let target = weight * (1.0 + HOVER_SURPLUS);
    let scale = vehicle.bounds.omega_max();
    let mut base = ActuatorVector::zeros();
    if let Some(f) = failed {
        base[f.index] = f.lock_value;
    }
    let vars: Vec<usize> = (0..TILT + NUM_ROTORS).filter(|&i| failed.is_none_or(|f| f.index != i)).collect();
    let state = RigidBodyState::default();
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>, ModelError> {
        let u = unpack(&vars, x, &base, scale, 0);
        let w = model::thrust_moment(&u, &vehicle.geometry, &vehicle.params)
            + model::resisting_moment(&u, &vehicle.geometry, &vehicle.params);
        let f = model::thrust_force(&u, &vehicle.params);
        Ok(DVector::from_vec(vec![w.x, w.y, w.z, f.x, f.y, (-f.z - target) / weight]))
    };

    let skip: Vec<usize> = failed.map(|f| f.index).into_iter().chain(TILT + NUM_ROTORS..NUM_ACTUATORS).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..MULTI_START_COUNT {
        let x0 = DVector::from_fn(vars.len(), |j, _| {
            if vars[j] < TILT {
                rng.random_range(0.4..0.9)
            } else {
                rng.random_range(-0.6..1.6)
            }
        });
        let (x, _) = levenberg_marquardt(residual, x0, 200)?;
        let u = unpack(&vars, &x, &base, scale, 0);
        if !vehicle.bounds.is_interior(&u, INTERIOR_FRACTION, &skip) {
            continue;
        }
        // substitution check on the full model
        let w = model::vehicle_wrench(&u, &state, &Vector3::zeros(), vehicle)?;
        let upward = -(w.force().z - weight);
        let horizontal = w.force().x.hypot(w.force().y);
        if w.moment().norm() <= 1e-6 && horizontal <= 1e-6 && upward >= weight {
            return Ok(HoverFeasibility {
                rank_fm: 0,
                rank_gm: 0,
                feasible: true,
                witness_u: Some(u),
                margin: upward - weight,
                conservative: false,
                tilt_free: true,
            });
        }
    }
    Ok(HoverFeasibility {
        rank_fm: 0,
        rank_gm: 0,
        feasible: false,
        witness_u: None,
        margin: f64::NAN,
        conservative: true,
        tilt_free: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CruiseFeasibility {
    pub airspeed: f64,
    pub feasible: bool,
    pub witness_u: Option<ActuatorVector>,
    /// Angle of attack (= pitch) of the witness, rad.
    pub witness_alpha: Option<f64>,
    /// Net forward force in the level frame, N (≥ 0 required).
    pub forward_force: f64,
    /// Upward force from rotors and wing in the level frame, N (≥ mg required).
    pub upward_force: f64,
    pub moment_norm: f64,
    pub diagnostic: String,
}

impl fmt::Display for CruiseFeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "airspeed_mps = {}", self.airspeed)?;
        writeln!(f, "feasible = {}", self.feasible)?;
        writeln!(f, "forward_force_n = {:.6}", self.forward_force)?;
        writeln!(f, "upward_force_n = {:.6}", self.upward_force)?;
        writeln!(f, "moment_norm_nm = {:.3e}", self.moment_norm)?;
        if let Some(a) = self.witness_alpha {
            writeln!(f, "alpha_rad = {a:.6}")?;
        }
        match &self.witness_u {
            Some(u) => writeln!(f, "witness = {u}")?,
            None => writeln!(f, "witness = none")?,
        }
        writeln!(f, "diagnostic = {}", self.diagnostic)
    }
}

fn level_state(airspeed: f64, alpha: f64) -> RigidBodyState {
    RigidBodyState {
        velocity: Vector3::new(airspeed, 0.0, 0.0),
        attitude: *UnitQuaternion::from_euler_angles(0.0, alpha, 0.0).quaternion(),
        ..Default::default()
    }
}

fn level_from_body(alpha: f64) -> Matrix3<f64> {
    *UnitQuaternion::from_euler_angles(0.0, alpha, 0.0).to_rotation_matrix().matrix()
}

/// Cruise condition at airspeed: interior input and angle of attack with zero net
/// moment, net upward force balancing weight and non-negative forward force.
pub fn cruise_check(
    vehicle: &Vehicle,
    failed: Option<&ActuatorFailure>,
    airspeed: f64,
) -> Result<CruiseFeasibility, WrenchSpaceError> {
    check_failure(vehicle, failed)?;
    let infeasible = |diagnostic: String| CruiseFeasibility {
        airspeed,
        feasible: false,
        witness_u: None,
        witness_alpha: None,
        forward_force: f64::NAN,
        upward_force: f64::NAN,
        moment_norm: f64::NAN,
        diagnostic,
    };
    if !(airspeed >= AIRSPEED_EPSILON) {
        return Ok(infeasible("airspeed below threshold: no dynamic pressure, wing lift and surface authority vanish".into()));
    }
    let trim = match find_trim(TrimPhase::Cruise { airspeed }, vehicle) {
        Ok(t) => t,
        Err(TrimError::NoTrimFound { best_residual }) => {
            return Ok(infeasible(format!("no nominal trim at this airspeed (best residual {best_residual:.3e})")));
        }
        Err(TrimError::OutsideEnvelope { alpha }) => {
            return Ok(infeasible(format!("level flight needs angle of attack {alpha:.3} rad, outside the lift model range")));
        }
        Err(e) => return Err(e.into()),
    };
    let weight = vehicle.params.weight();
    let scale = vehicle.bounds.omega_max();
    let mut base = trim.u;
    if let Some(f) = failed {
        base[f.index] = f.lock_value;
    }
    let vars: Vec<usize> = (0..NUM_ACTUATORS).filter(|&i| failed.is_none_or(|f| f.index != i)).collect();
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>, ModelError> {
        let u = unpack(&vars, x, &base, scale, 1);
        let w = model::vehicle_wrench(&u, &level_state(airspeed, x[0]), &Vector3::zeros(), vehicle)?;
        let f = level_from_body(x[0]) * w.force();
        Ok(DVector::from_vec(vec![w.0[0], w.0[1], w.0[2], f.x / weight, f.y / weight, f.z / weight]))
    };
    let pack = |alpha: f64, u: &ActuatorVector| {
        let mut x = DVector::zeros(vars.len() + 1);
        x[0] = alpha;
        for (j, &i) in vars.iter().enumerate() {
            x[1 + j] = if i < TILT { u[i] / scale } else { u[i] };
        }
        x
    };

    let skip: Vec<usize> = failed.map(|f| f.index).into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc401);
    let mut best_norm = f64::INFINITY;
    for start in 0..MULTI_START_COUNT {
        let mut x0 = pack(trim.aero.alpha, &trim.u);
        if start > 0 {
            for v in x0.iter_mut() {
                *v += rng.random_range(-0.05..0.05);
            }
        }
        let (x, norm) = levenberg_marquardt(residual, x0, 200)?;
        best_norm = best_norm.min(norm);
        let u = unpack(&vars, &x, &base, scale, 1);
        if !vehicle.bounds.is_interior(&u, INTERIOR_FRACTION, &skip) {
            continue;
        }
        let w = model::vehicle_wrench(&u, &level_state(airspeed, x[0]), &Vector3::zeros(), vehicle)?;
        let f_level = level_from_body(x[0]) * w.force();
        let forward = f_level.x;
        // weight acts along +z in the level frame; the rest must hold it up
        let upward = -(f_level.z - weight);
        if w.moment().norm() <= 1e-6 && forward >= -1e-6 && upward >= weight - 1e-6 && f_level.y.abs() <= 1e-6 {
            return Ok(CruiseFeasibility {
                airspeed,
                feasible: true,
                witness_u: Some(u),
                witness_alpha: Some(x[0]),
                forward_force: forward,
                upward_force: upward,
                moment_norm: w.moment().norm(),
                diagnostic: "witness verified by substitution".into(),
            });
        }
    }
    Ok(infeasible(format!(
        "no interior witness from {MULTI_START_COUNT} starts (best residual {best_norm:.3e}); result may be conservative"
    )))
}
