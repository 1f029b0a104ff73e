//! Acceptance criteria. Runs as a plain binary so every verdict line reaches stdout.

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};
use tiltalloc::allocator::nullspace::{self, NullSpaceProblem};
use tiltalloc::allocator::{
    allocate, effectiveness_at, failure_trim, find_trim, ActuatorFailure, ActuatorWeights, AllocationRequest, Coordinates,
    FdSteps, TrimPhase, TrimPoint,
};
use tiltalloc::model::{self, RigidBodyState, Wrench};
use tiltalloc::params::{ActuatorVector, Vehicle, NUM_ACTUATORS, NUM_ROTORS, OMEGA, TILT};
use tiltalloc::sim::{run_scenario, scenario, RunOutput, Scenario, SimConfig, StartCondition};
use tiltalloc::wrench_space::{static_hover_check, INTERIOR_FRACTION};

type Criterion = (&'static str, fn(&mut Verdict));

struct Verdict {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn within(&mut self, elapsed: Duration, limit_s: f64, what: &str) {
        self.note(format!("{what} {:.2}s", elapsed.as_secs_f64()));
        self.check(elapsed.as_secs_f64() < limit_s, format!("{what} took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()));
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> RigidBodyState {
    let q = UnitQuaternion::from_euler_angles(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-3.0..3.0),
    );
    RigidBodyState {
        position: Vector3::zeros(),
        velocity: Vector3::new(rng.random_range(-25.0..25.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
        attitude: *q.quaternion(),
        angular_rate: Vector3::zeros(),
    }
}

fn random_input(rng: &mut ChaCha8Rng, v: &Vehicle) -> ActuatorVector {
    let mut u = ActuatorVector::zeros();
    for i in 0..NUM_ACTUATORS {
        u[i] = rng.random_range(v.bounds.lower[i]..=v.bounds.upper[i]);
    }
    u
}

fn parameter_fidelity(v: &mut Verdict) {
    let t0 = Instant::now();
    let p = Vehicle::default().params;
    let table = [
        ("mass", p.mass, 4.6),
        ("wingspan", p.wingspan, 2.0),
        ("air density", p.air_density, 1.2250),
        ("mean chord", p.mean_chord, 0.22),
        ("wing area", p.wing_area, 0.44),
        ("thrust coefficient", p.thrust_coeff, 2.2164e-5),
        ("torque coefficient", p.torque_coeff, 1.1082e-6),
        ("aileron moment coefficient", p.aileron_coeff, 0.1173),
        ("elevator moment coefficient", p.elevator_coeff, 0.5560),
        ("rudder moment coefficient", p.rudder_coeff, 0.0881),
        ("lift coefficient at zero alpha", p.lift_coeff_0, 0.35),
        ("lift slope", p.lift_coeff_alpha, 0.11),
        ("drag coefficient at zero alpha", p.drag_coeff_0, 0.01),
        ("drag growth", p.drag_coeff_alpha, 0.2),
    ];
    for (name, got, want) in table {
        v.check(got == want, format!("{name}: {got} != {want}"));
    }
    v.note(format!("{} values", table.len()));
    v.within(t0.elapsed(), 1.0, "runtime");
}

/// Rotor columns in squared-speed coordinates and tilt columns, written out by hand.
fn analytic_multirotor_jacobian(vehicle: &Vehicle, u: &ActuatorVector) -> [[f64; 6]; 2 * NUM_ROTORS] {
    let p = &vehicle.params;
    let mut cols = [[0.0; 6]; 2 * NUM_ROTORS];
    for i in 0..NUM_ROTORS {
        let (s, c) = u[TILT + i].sin_cos();
        let axis = Vector3::new(s, 0.0, -c);
        let axis_rate = Vector3::new(c, 0.0, s);
        let r = vehicle.geometry.positions[i];
        let spin = vehicle.geometry.spin[i].sign();
        let t = u[OMEGA + i] * u[OMEGA + i];
        let per_t = (r.cross(&(p.thrust_coeff * axis)) + spin * p.torque_coeff * axis, p.thrust_coeff * axis);
        let per_tilt = (
            r.cross(&(p.thrust_coeff * t * axis_rate)) + spin * p.torque_coeff * t * axis_rate,
            p.thrust_coeff * t * axis_rate,
        );
        for k in 0..3 {
            cols[i][k] = per_t.0[k];
            cols[i][3 + k] = per_t.1[k];
            cols[NUM_ROTORS + i][k] = per_tilt.0[k];
            cols[NUM_ROTORS + i][3 + k] = per_tilt.1[k];
        }
    }
    cols
}

fn decomposition_and_jacobian(v: &mut Verdict) {
    let t0 = Instant::now();
    let vehicle = Vehicle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let state = random_state(&mut rng);
        let u = random_input(&mut rng, &vehicle);
        let p = &vehicle.params;
        let g = &vehicle.geometry;
        let aero = model::aero_angles(&model::air_velocity_body(&state, &Vector3::zeros()).unwrap(), p);
        let force = model::thrust_force(&u, p) + model::aero_force(&aero, &u, p) + model::gravity_force(&state.attitude, p).unwrap();
        let moment = model::thrust_moment(&u, g, p) + model::resisting_moment(&u, g, p) + model::aero_moment(&aero, &u, p);
        let total = model::total_wrench(&u, &state, g, p).unwrap();
        if total != Wrench::new(moment, force) {
            mismatches += 1;
        }
    }
    v.check(mismatches == 0, format!("{mismatches} of 1000 wrenches differ from the sum of their terms"));

    let mut worst: f64 = 0.0;
    let hover = RigidBodyState::default();
    for _ in 0..50 {
        let mut u = random_input(&mut rng, &vehicle);
        for i in 0..NUM_ROTORS {
            u[OMEGA + i] = rng.random_range(200.0..1100.0);
        }
        let eff =
            effectiveness_at(&vehicle, &hover, &Vector3::zeros(), &u, &[], Coordinates::SquaredRotorSpeed, &FdSteps::default())
                .unwrap();
        let analytic = analytic_multirotor_jacobian(&vehicle, &u);
        for (j, col) in analytic.iter().enumerate() {
            let scale = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (k, &want) in col.iter().enumerate() {
                let got = eff.nominal[(k, j)];
                worst = worst.max((got - want).abs() / want.abs().max(scale));
            }
        }
        for j in 2 * NUM_ROTORS..NUM_ACTUATORS {
            // surfaces have no authority without airflow
            worst = worst.max(eff.nominal.column(j).amax());
        }
    }
    v.note(format!("worst jacobian relative error {worst:.2e}"));
    v.check(worst <= 1e-6, format!("jacobian relative error {worst:.2e} > 1e-6"));
    v.within(t0.elapsed(), 5.0, "runtime");
}

fn hover_trim(v: &mut Verdict) {
    let vehicle = Vehicle::default();
    let p = &vehicle.params;
    let expected = (p.mass * p.gravity / (4.0 * p.thrust_coeff)).sqrt();
    match find_trim(TrimPhase::Hover, &vehicle) {
        Ok(t) => {
            for i in 0..NUM_ROTORS {
                let rel = (t.u[OMEGA + i] - expected).abs() / expected;
                v.check(rel <= 1e-6, format!("rotor {i}: {} vs {expected}", t.u[OMEGA + i]));
            }
            v.note(format!("omega {:.4} rad/s, closed form {expected:.4}", t.u[OMEGA]));
        }
        Err(e) => v.check(false, format!("hover trim failed: {e}")),
    }
}

fn hover_witness_holds(vehicle: &Vehicle, u: &ActuatorVector, failed: usize) -> Result<(), String> {
    let w = model::vehicle_wrench(u, &RigidBodyState::default(), &Vector3::zeros(), vehicle).map_err(|e| e.to_string())?;
    if w.moment().norm() > 1e-6 {
        return Err(format!("witness moment {:.2e}", w.moment().norm()));
    }
    if w.force().x.abs() > 1e-6 || w.force().y.abs() > 1e-6 {
        return Err(format!("witness horizontal force {:?}", w.force()));
    }
    if w.force().z > 1e-6 {
        return Err(format!("witness lacks upward thrust, net down force {:.3}", w.force().z));
    }
    if !vehicle.bounds.is_interior(u, INTERIOR_FRACTION, &[failed]) {
        return Err("witness touches a bound".into());
    }
    if u[failed] != 0.0 {
        return Err("witness spins the failed rotor".into());
    }
    Ok(())
}

fn static_hover_trichotomy(v: &mut Verdict) {
    let t0 = Instant::now();
    let vehicle = Vehicle::default();
    let motor = ActuatorFailure { index: OMEGA, lock_value: 0.0 };
    match static_hover_check(&vehicle, None, false) {
        Ok(h) => v.check(h.feasible, "nominal vehicle cannot hover"),
        Err(e) => v.check(false, format!("nominal check: {e}")),
    }
    match static_hover_check(&vehicle, Some(&motor), false) {
        Ok(h) => v.check(!h.feasible, "one motor out with tilts held is reported hoverable"),
        Err(e) => v.check(false, format!("locked-tilt check: {e}")),
    }
    match static_hover_check(&vehicle, Some(&motor), true) {
        Ok(h) => match (h.feasible, h.witness_u) {
            (true, Some(u)) => {
                if let Err(e) = hover_witness_holds(&vehicle, &u, OMEGA) {
                    v.check(false, e);
                }
                v.note(format!("free-tilt thrust margin {:.3} N", h.margin));
            }
            _ => v.check(false, "one motor out with free tilts has no witness"),
        },
        Err(e) => v.check(false, format!("free-tilt check: {e}")),
    }
    v.within(t0.elapsed(), 30.0, "runtime");
}

struct Synthetic {
    a: DMatrix<f64>,
    u0: DVector<f64>,
    w: DVector<f64>,
    pref: DVector<f64>,
    weights: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

fn synthetic(rng: &mut ChaCha8Rng) -> Synthetic {
    let (rows, n) = [(2, 3), (3, 4), (2, 4), (1, 2), (1, 3)][rng.random_range(0..5)];
    let a = DMatrix::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0));
    let lower = DVector::from_fn(n, |_, _| rng.random_range(-1.0..0.0));
    let upper = DVector::from_fn(n, |i, _| lower[i] + rng.random_range(0.5..1.5));
    let within = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| DVector::from_fn(n, |i, _| {
        lower[i] + rng.random_range(lo..hi) * (upper[i] - lower[i])
    });
    let reachable = within(rng, 0.3, 0.7);
    let u0 = within(rng, 0.0, 1.0);
    let pref = within(rng, 0.0, 1.0);
    let w = &a * (&reachable - &u0);
    let weights = DVector::from_fn(n, |_, _| rng.random_range(0.2..2.0));
    Synthetic { a, u0, w, pref, weights, lower, upper }
}

/// Feasible interval of `t` for `lower ≤ base + dir·t ≤ upper`, or `None` when empty.
fn interval(base: &DVector<f64>, dir: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..base.len() {
        if dir[i].abs() < 1e-14 {
            if base[i] < lower[i] || base[i] > upper[i] {
                return None;
            }
            continue;
        }
        let (a, b) = ((lower[i] - base[i]) / dir[i], (upper[i] - base[i]) / dir[i]);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo <= hi).then_some((lo, hi))
}

fn grid(lo: f64, hi: f64, h: f64) -> impl Iterator<Item = f64> {
    let first = (lo / h).ceil() as i64;
    let last = (hi / h).floor() as i64;
    (first..=last).map(move |k| k as f64 * h)
}

/// Best objective over the λ lattice of spacing `h`.
fn brute_force(s: &Synthetic, null: &DMatrix<f64>, base: &DVector<f64>, h: f64) -> Option<f64> {
    let cost = |u: &DVector<f64>| nullspace::objective(u, &s.pref, &s.weights);
    let mut best: Option<f64> = None;
    let mut keep = |j: f64| best = Some(best.map_or(j, |b: f64| b.min(j)));
    let first = null.column(0).into_owned();
    match null.ncols() {
        1 => {
            let (lo, hi) = interval(base, &first, &s.lower, &s.upper)?;
            for t in grid(lo, hi, h) {
                keep(cost(&(base + &first * t)));
            }
        }
        2 => {
            let second = null.column(1).into_owned();
            let radius = (0..base.len())
                .map(|i| (s.upper[i] - base[i]).abs().max((s.lower[i] - base[i]).abs()).powi(2))
                .sum::<f64>()
                .sqrt();
            for t1 in grid(-radius, radius, h) {
                let row = base + &first * t1;
                if let Some((lo, hi)) = interval(&row, &second, &s.lower, &s.upper) {
                    for t2 in grid(lo, hi, h) {
                        keep(cost(&(&row + &second * t2)));
                    }
                }
            }
        }
        _ => unreachable!("instances have one or two redundant directions"),
    }
    best
}

fn allocator_optimality(v: &mut Verdict) {
    let h = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_gap, mut worst_null): (f64, f64) = (0.0, 0.0);
    for case in 0..100 {
        let s = synthetic(&mut rng);
        let dec = nullspace::decompose(&s.a);
        let du_ln = nullspace::least_norm(&dec.pinv, &s.w);
        let base = &s.u0 + &du_ln;
        let problem = NullSpaceProblem {
            null_basis: &dec.null_basis,
            du_ln: &du_ln,
            u0: &s.u0,
            u_pref: &s.pref,
            weights: &s.weights,
            lower: &s.lower,
            upper: &s.upper,
        };
        let sol = match nullspace::solve_lambda(&problem) {
            Ok(sol) => sol,
            Err(e) => {
                v.check(false, format!("instance {case}: {e}"));
                continue;
            }
        };
        let null_wrench = (&s.a * (&dec.null_basis * &sol.lambda)).norm();
        worst_null = worst_null.max(null_wrench);
        v.check(null_wrench <= 1e-9, format!("instance {case}: null-space motion produces {null_wrench:.2e}"));
        let in_box = (0..s.u0.len()).all(|i| sol.u_sp[i] >= s.lower[i] && sol.u_sp[i] <= s.upper[i]);
        v.check(in_box, format!("instance {case}: setpoint leaves the box"));

        let Some(grid_best) = brute_force(&s, &dec.null_basis, &base, h) else {
            v.check(false, format!("instance {case}: grid found no feasible point"));
            continue;
        };
        // J is Lipschitz over the box; one lattice cell moves it by at most this much
        let diameter = (&s.upper - &s.lower).norm();
        let slope = 2.0 * s.weights.max() * diameter;
        let cell = h * (dec.null_basis.ncols() as f64).sqrt();
        let gap = grid_best - sol.objective;
        worst_gap = worst_gap.max(gap.abs());
        v.check(sol.objective <= grid_best + 1e-9, format!("instance {case}: grid beats solver by {:.2e}", -gap));
        v.check(gap <= slope * cell, format!("instance {case}: solver {:.6} vs grid {:.6}", sol.objective, grid_best));
    }
    v.note(format!("worst |J_grid - J| {worst_gap:.2e}, worst null-space wrench {worst_null:.2e}"));
}

fn failure_balance_at(
    v: &mut Verdict,
    vehicle: &Vehicle,
    label: &str,
    trim: &TrimPoint,
    coords: Coordinates,
    lock: ActuatorFailure,
) -> bool {
    let weights = ActuatorWeights::default();
    let desired = Wrench::new(Vector3::new(0.05, -0.03, 0.02), Vector3::new(0.2, 0.0, -0.3));
    let eff = effectiveness_at(vehicle, &trim.state, &Vector3::zeros(), &trim.u, &[lock.index], coords, &FdSteps::default())
        .unwrap();
    let Ok(result) = allocate(&AllocationRequest {
        desired,
        effectiveness: &eff,
        preferred: trim.u,
        failures: &[lock],
        weights: &weights,
        bounds: &vehicle.bounds,
    }) else {
        v.note(format!("{label} saturated"));
        return false;
    };
    let mut reduced = eff.nominal;
    reduced.column_mut(lock.index).fill(0.0);
    let v0 = coords.to_alloc(&trim.u);
    let du = coords.to_alloc(&result.u_sp) - v0;
    let total = eff.nominal * v0 + desired.0;
    let locked = eff.nominal.column(lock.index) * coords.value(lock.index, lock.lock_value);
    let working_trim = reduced * v0;
    let err = (reduced * du - (total - locked - working_trim)).norm();
    v.note(format!("{label} {err:.1e}"));
    v.check(err <= 1e-8, format!("{label}: residual {err:.2e}"));
    v.check(result.u_sp[lock.index] == lock.lock_value, format!("{label}: failed actuator not at its lock"));
    true
}

fn failure_balance(v: &mut Verdict) {
    let vehicle = Vehicle::default();
    let cfg = SimConfig::default();
    let hover = find_trim(TrimPhase::Hover, &vehicle).unwrap();
    let cruise = find_trim(TrimPhase::Cruise { airspeed: 20.0 }, &vehicle).unwrap();
    for s in scenario::failure_corpus() {
        let f = s.failures[0];
        let lock = ActuatorFailure { index: f.index, lock_value: f.lock_value };
        let (trim, coords, floor) = match s.start {
            StartCondition::Hover => (&hover, Coordinates::SquaredRotorSpeed, cfg.failure_rotor_floor * hover.u[OMEGA]),
            StartCondition::Cruise => (&cruise, Coordinates::Actuator, cfg.rotor_idle),
        };
        let mut solved = failure_balance_at(v, &vehicle, &s.name, trim, coords, lock);
        match failure_trim(&vehicle, trim, &[lock], floor) {
            Ok(retrim) => solved |= failure_balance_at(v, &vehicle, &format!("{} retrimmed", s.name), &retrim, coords, lock),
            Err(e) => v.note(format!("{} has no retrim: {e}", s.name)),
        }
        v.check(solved, format!("{}: no operating point where the solver succeeds", s.name));
    }
}

fn fly(cfg: &SimConfig, s: &Scenario, v: &mut Verdict) -> Option<RunOutput> {
    let t0 = Instant::now();
    match run_scenario(cfg, s) {
        Ok(out) => {
            v.within(t0.elapsed(), 60.0, &s.name);
            Some(out)
        }
        Err(e) => {
            v.check(false, format!("{}: {e}", s.name));
            None
        }
    }
}

fn corpus_case(name: &str) -> Scenario {
    scenario::failure_corpus().into_iter().find(|s| s.name == name).expect("corpus case")
}

fn hover_motor_failure(v: &mut Verdict) {
    let cfg = SimConfig::default();
    let case = corpus_case("hover_motor_failure");
    if let Some(run) = fly(&cfg, &case.with_informed(true), v) {
        let s = &run.summary;
        v.note(format!(
            "informed converge {:?}s, altitude variation {:.2}m",
            s.time_to_converge, s.altitude_variation_m
        ));
        v.check(!s.crashed, "informed run crashed");
        v.check(s.time_to_converge.is_some_and(|t| t <= 15.0), format!("time to converge {:?}", s.time_to_converge));
        v.check(s.altitude_variation_m <= 3.0, format!("altitude variation {:.2} m", s.altitude_variation_m));
    }
    if let Some(run) = fly(&cfg, &case.with_informed(false), v) {
        v.note(format!("uninformed crash at {:?}s", run.summary.crash_time));
        v.check(run.summary.crashed, "uninformed run did not crash");
    }
}

fn hover_tilt_lock(v: &mut Verdict) {
    let cfg = SimConfig::default();
    if let Some(run) = fly(&cfg, &corpus_case("hover_tilt_lock").with_informed(true), v) {
        let s = &run.summary;
        v.note(format!("60 deg lock attitude deviation {:.2} deg", s.max_attitude_dev_deg));
        v.check(!s.crashed, "60 deg lock crashed");
        v.check(s.max_attitude_dev_deg < 30.0, format!("attitude deviation {:.1} deg", s.max_attitude_dev_deg));
    }
    for case in scenario::tilt_lock_extremes() {
        if let Some(run) = fly(&cfg, &case.with_informed(true), v) {
            v.check(!run.summary.crashed, format!("{} crashed", case.name));
            let ran = run.summary.simulated_time;
            v.check((ran - case.duration).abs() < 1e-6, format!("{} ended at {ran:.2}s", case.name));
        }
    }
}

fn mean_command(run: &RunOutput, index: usize, from: f64) -> f64 {
    let tail: Vec<f64> = run.trace.records.iter().filter(|r| r.t >= from).map(|r| r.u_cmd[index]).collect();
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

fn cruise_elevator_lock(v: &mut Verdict) {
    let cfg = SimConfig::default();
    let case = corpus_case("cruise_elevator_lock").with_informed(true);
    if let Some(run) = fly(&cfg, &case, v) {
        let s = &run.summary;
        v.check(!s.crashed, "crashed");
        v.check(s.altitude_variation_m <= 10.0, format!("altitude variation {:.2} m", s.altitude_variation_m));
        let settle = case.duration - 10.0;
        let front: Vec<f64> = (0..2).map(|i| mean_command(&run, TILT + i, settle)).collect();
        let rear: Vec<f64> = (2..4).map(|i| mean_command(&run, TILT + i, settle)).collect();
        v.note(format!(
            "altitude variation {:.2}m, front tilts {:.1}/{:.1} deg, rear {:.1}/{:.1} deg",
            s.altitude_variation_m,
            front[0].to_degrees(),
            front[1].to_degrees(),
            rear[0].to_degrees(),
            rear[1].to_degrees()
        ));
        v.check(front.iter().all(|&t| t > FRAC_PI_2), "front rotors do not tilt past full forward");
        v.check(rear.iter().all(|&t| t < FRAC_PI_2), "rear rotors do not tilt back");
    }
}

fn cruise_aileron_lock(v: &mut Verdict) {
    let cfg = SimConfig::default();
    if let Some(run) = fly(&cfg, &corpus_case("cruise_aileron_lock").with_informed(true), v) {
        let s = &run.summary;
        v.note(format!("heading deviation {:.3} deg", s.max_heading_dev_deg));
        v.check(!s.crashed, "crashed");
        v.check(s.max_heading_dev_deg <= 15.0, format!("heading deviation {:.1} deg", s.max_heading_dev_deg));
    }
}

fn cruise_motor_failure(v: &mut Verdict) {
    let cfg = SimConfig::default();
    let case = corpus_case("cruise_motor_failure");
    let informed = fly(&cfg, &case.with_informed(true), v);
    let uninformed = fly(&cfg, &case.with_informed(false), v);
    if let (Some(i), Some(u)) = (&informed, &uninformed) {
        v.note(format!(
            "cross-track informed {:.3}m, uninformed {:.3}m",
            i.summary.max_cross_track_m, u.summary.max_cross_track_m
        ));
        v.check(
            i.summary.max_cross_track_m < u.summary.max_cross_track_m,
            "informed run deviates at least as far as the uninformed one",
        );
        let inject = case.failures[0].inject_time;
        let worst = i
            .trace
            .records
            .iter()
            .filter(|r| r.t >= inject)
            .flat_map(|r| (0..NUM_ROTORS).map(move |k| (r.u_cmd[TILT + k] - FRAC_PI_2).abs()))
            .fold(0.0, f64::max);
        v.note(format!("largest tilt departure from full forward {:.2} deg", worst.to_degrees()));
        v.check(worst <= 5f64.to_radians(), format!("tilts leave full forward by {:.2} deg", worst.to_degrees()));
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("parameter fidelity", parameter_fidelity),
        ("model decomposition and jacobian", decomposition_and_jacobian),
        ("hover trim", hover_trim),
        ("static hover trichotomy", static_hover_trichotomy),
        ("allocator optimality", allocator_optimality),
        ("failure wrench balance", failure_balance),
        ("motor failure in hover", hover_motor_failure),
        ("tilt lock in hover", hover_tilt_lock),
        ("elevator lock in cruise", cruise_elevator_lock),
        ("aileron lock in cruise", cruise_aileron_lock),
        ("motor failure in cruise", cruise_motor_failure),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let mut v = Verdict::new();
        run(&mut v);
        let status = if v.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {name} [{}]", n + 1, v.notes.join("; "));
        for f in &v.failures {
            println!("    {f}");
        }
        failed += usize::from(!v.failures.is_empty());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
