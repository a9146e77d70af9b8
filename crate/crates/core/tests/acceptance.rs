//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each check and exits nonzero if any check fails.

use std::time::Instant;

use maats::allocator::objective::pack;
use maats::allocator::{constraints, eval_objective, sqp_solve, AllocProblem, AllocSolution, SolveStatus, SqpSettings};
use maats::dynamics::{rk4_step, uav_positions, uav_velocities, PlantInputs, PlantParams, PlantState};
use maats::harness::{bench_allocator, compute_metrics, output, simulate, sweep_mu, MetricsReport, TimeSeriesRecord};
use maats::math::{UnitVec3, Vec3};
use maats::scenario::{AllocatorKind, ScenarioConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances, pinned.
const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-6;
const FD_MIN_POINTS: usize = 100;
const FD_TIME_LIMIT_S: f64 = 5.0;

const KKT_CASES: usize = 1000;
const KKT_BALANCE_TOL: f64 = 1e-6;
const KKT_UNIT_TOL: f64 = 1e-9;
const KKT_TENSION_FLOOR: f64 = -1e-9;
const KKT_MAX_ITER: usize = 50;
const KKT_PASS_FRACTION: f64 = 0.99;

const SINGLE_CABLE_TOL: f64 = 1e-9;
const EQUAL_SPLIT_TOL: f64 = 1e-6;
const CONE_OBJECTIVE_TOL: f64 = 1e-4;

const SPIRAL_RMS_MAX: f64 = 0.05;
const SPIRAL_ERR_MAX: f64 = 0.10;
const SPIRAL_MIN_ANGLE_DEG: f64 = 40.0;
const SPIRAL_PEAK_TO_MEAN_MAX: f64 = 1.5;
const SPIRAL_WALL_CLOCK_S: f64 = 60.0;

const BASELINE_ANGLE_BELOW_DEG: f64 = 30.0;

const SWEEP_MU: [f64; 3] = [0.15, 0.75, 1.35];
const SWEEP_JT_REFERENCE: [f64; 3] = [26.8, 32.1, 33.7];
const SWEEP_JT_BAND: f64 = 0.30;
const SWEEP_RMS_VARIATION_MAX: f64 = 0.20;
/// Slack for "non-decreasing" comparisons (deg and N s).
const MONOTONE_SLACK: f64 = 1e-6;

const BENCH_SAMPLES: usize = 5000;
const BENCH_MEAN_MAX_S: f64 = 2e-3;
const BENCH_P99_MAX_S: f64 = 5e-3;

const ENERGY_DRIFT_MAX: f64 = 1e-3;
const BALANCE_RESIDUAL_MAX: f64 = 1e-9;
const HOVER_RMS_MAX: f64 = 1e-3;

const G: f64 = 9.81;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        println!("criterion {id:<3} {}  {detail}", if pass { "PASS" } else { "FAIL" });
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if (0.1..=1.0).contains(&n) {
            return v / n;
        }
    }
}

fn central_difference(z: &DVector<f64>, k: usize, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> DVector<f64> {
    let mut p = z.clone();
    let mut m = z.clone();
    p[k] += FD_STEP;
    m[k] -= FD_STEP;
    (f(&p) - f(&m)) / (2.0 * FD_STEP)
}

fn criterion_1(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let sizes = [2, 3, 4, 6];
    let points = 120;
    for k in 0..points {
        let n = sizes[k % sizes.len()];
        let mu = rng.gen_range(0.0..=2.0);
        let tensions: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let dirs: Vec<Vec3> = (0..n).map(|_| random_unit(&mut rng) * rng.gen_range(0.5..1.5)).collect();
        let u = random_unit(&mut rng) * rng.gen_range(0.5..10.0);
        let z = pack(&tensions, &dirs);

        let (_, grad) = eval_objective(&z, mu);
        let (_, jac) = constraints(&z, &u);
        for k in 0..z.len() {
            let dj = central_difference(&z, k, |x| DVector::from_element(1, eval_objective(x, mu).0));
            worst = worst.max((grad[k] - dj[0]).abs() / dj[0].abs().max(1.0));
            let col = central_difference(&z, k, |x| constraints(x, &u).0);
            worst = worst.max((jac.column(k) - &col).norm() / col.norm().max(1.0));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    r.check(
        "1",
        points >= FD_MIN_POINTS && worst <= FD_REL_TOL && elapsed < FD_TIME_LIMIT_S,
        format!("gradient/Jacobian vs central differences: {points} points, worst rel err {worst:.2e}, {elapsed:.2} s"),
    );
}

fn solve(u: Vec3, n: usize, mu: f64) -> AllocSolution {
    sqp_solve(&AllocProblem { u_l: u, n, mu, prev: None }, &SqpSettings::default()).expect("well-posed demand")
}

fn criterion_2(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut good = 0;
    let mut worst_iter = 0;
    for _ in 0..KKT_CASES {
        let u = random_unit(&mut rng) * rng.gen_range(0.5..=10.0);
        let sol = solve(u, 4, 0.15);
        let balance = (sol.resultant() + u).norm();
        let unit = sol.directions.iter().map(|d| (d.norm() - 1.0).abs()).fold(0.0, f64::max);
        let ok = sol.status == SolveStatus::Converged
            && balance <= KKT_BALANCE_TOL * u.norm().max(1.0)
            && unit <= KKT_UNIT_TOL
            && sol.tensions.iter().all(|&t| t >= KKT_TENSION_FLOOR)
            && sol.iterations <= KKT_MAX_ITER;
        good += usize::from(ok);
        worst_iter = worst_iter.max(sol.iterations);
    }
    let frac = good as f64 / KKT_CASES as f64;
    r.check(
        "2",
        frac >= KKT_PASS_FRACTION,
        format!("KKT quality on {KKT_CASES} random demands: {:.1}% pass, max iterations {worst_iter}", frac * 100.0),
    );
}

/// Four-cable symmetric cone at polar angle `theta` carrying `w` axially.
fn cone_cost(theta: f64, w: f64, mu: f64) -> f64 {
    let x = theta.cos().powi(2);
    let t = w / (4.0 * theta.cos());
    2.0 * t * t + mu * (4.0 * x * x + 2.0 * (2.0 * x - 1.0).powi(2))
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-12 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn criterion_3(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut single = 0.0f64;
    let mut split = 0.0f64;
    for _ in 0..50 {
        let u = random_unit(&mut rng) * rng.gen_range(0.5..10.0);
        let one = solve(u, 1, rng.gen_range(0.0..2.0));
        single = single.max((one.tensions[0] - u.norm()).abs() / u.norm().max(1.0));
        single = single.max((*one.directions[0] + u.normalize()).norm());

        let two = solve(u, 2, 0.0);
        for t in &two.tensions {
            split = split.max((t - 0.5 * u.norm()).abs() / u.norm().max(1.0));
        }
    }
    r.check(
        "3a",
        single <= SINGLE_CABLE_TOL,
        format!("n = 1 exact solution: worst error {single:.2e}"),
    );
    r.check("3b", split <= EQUAL_SPLIT_TOL, format!("n = 2, mu = 0 equal split: worst error {split:.2e}"));

    let w = 0.225 * G;
    let mut cone = 0.0f64;
    for mu in SWEEP_MU {
        let theta = golden_min(|t| cone_cost(t, w, mu), 1e-3, 80f64.to_radians());
        let sol = solve(Vec3::new(0.0, 0.0, -w), 4, mu);
        cone = cone.max((sol.objective(mu) - cone_cost(theta, w, mu)).abs());
    }
    r.check("3c", cone <= CONE_OBJECTIVE_TOL, format!("n = 4 hover vs cone-angle search: worst objective gap {cone:.2e}"));
}

struct Run {
    records: Vec<TimeSeriesRecord>,
    metrics: MetricsReport,
    seconds: f64,
}

fn run(cfg: &ScenarioConfig) -> Run {
    let start = Instant::now();
    let records = simulate(cfg).expect("simulation").records;
    let seconds = start.elapsed().as_secs_f64();
    let metrics = compute_metrics(&records).expect("metrics");
    Run { records, metrics, seconds }
}

fn min_angle(records: &[TimeSeriesRecord]) -> f64 {
    records.iter().map(|r| r.min_angle()).fold(180.0, f64::min)
}

fn criterion_4(r: &mut Report, sqp: &Run) {
    let m = &sqp.metrics;
    r.check(
        "4a",
        m.rms_error <= SPIRAL_RMS_MAX && m.max_error <= SPIRAL_ERR_MAX,
        format!("spiral tracking: rms {:.2e} m, max {:.2e} m", m.rms_error, m.max_error),
    );
    let angle = min_angle(&sqp.records);
    r.check("4b", angle >= SPIRAL_MIN_ANGLE_DEG, format!("spiral min pairwise angle {angle:.2} deg"));
    r.check(
        "4c",
        m.peak_to_mean_ratio <= SPIRAL_PEAK_TO_MEAN_MAX,
        format!("spiral peak/mean total tension {:.3}", m.peak_to_mean_ratio),
    );
    r.check("4d", sqp.seconds <= SPIRAL_WALL_CLOCK_S, format!("spiral wall clock {:.2} s", sqp.seconds));
}

fn criterion_5(r: &mut Report, sqp: &Run, cfg: &ScenarioConfig) {
    let mut base_cfg = cfg.clone();
    base_cfg.alloc.kind = AllocatorKind::Baseline;
    let base = run(&base_cfg);
    let angle = min_angle(&base.records);
    r.check(
        "5a",
        angle < BASELINE_ANGLE_BELOW_DEG,
        format!("baseline min pairwise angle {angle:.2} deg (needs < {BASELINE_ANGLE_BELOW_DEG})"),
    );
    r.check(
        "5b",
        base.metrics.mean_tension_spread > sqp.metrics.mean_tension_spread,
        format!(
            "tension spread baseline {:.4} N vs sqp {:.4} N",
            base.metrics.mean_tension_spread, sqp.metrics.mean_tension_spread
        ),
    );
}

fn criterion_6(r: &mut Report, cfg: &ScenarioConfig) {
    let sweep = sweep_mu(cfg, &SWEEP_MU).expect("sweep");
    let angles: Vec<f64> = sweep.iter().map(|e| e.metrics.min_pairwise_angle).collect();
    let jt: Vec<f64> = sweep.iter().map(|e| e.metrics.j_t).collect();
    let rms: Vec<f64> = sweep.iter().map(|e| e.metrics.rms_error).collect();
    let fmt = |v: &[f64], p: usize| v.iter().map(|x| format!("{x:.p$}")).collect::<Vec<_>>().join(", ");

    let non_decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK);
    r.check("6a", non_decreasing(&angles), format!("min angle across mu: [{}] deg", fmt(&angles, 3)));
    r.check("6b", non_decreasing(&jt), format!("J_T across mu: [{}] N s", fmt(&jt, 3)));

    let in_band = jt.iter().zip(SWEEP_JT_REFERENCE).all(|(j, r)| (j - r).abs() <= SWEEP_JT_BAND * r);
    r.check(
        "6c",
        in_band,
        format!("J_T [{}] vs reference [{}] +/- 30%", fmt(&jt, 2), fmt(&SWEEP_JT_REFERENCE, 1)),
    );

    let (lo, hi) = rms.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mean = rms.iter().sum::<f64>() / rms.len() as f64;
    let variation = (hi - lo) / mean;
    r.check(
        "6d",
        variation < SWEEP_RMS_VARIATION_MAX,
        format!("rms across mu: [{}] m, (max - min) / mean = {:.1}%", fmt(&rms, 6), variation * 100.0),
    );
}

fn criterion_7(r: &mut Report, cfg: &ScenarioConfig) {
    let b = bench_allocator(cfg, BENCH_SAMPLES).expect("bench");
    r.check(
        "7",
        b.mean <= BENCH_MEAN_MAX_S && b.p99 <= BENCH_P99_MAX_S,
        format!("solver latency over {} cycles: mean {:.3} ms, p99 {:.3} ms", b.samples, b.mean * 1e3, b.p99 * 1e3),
    );
}

fn pendulum_energy(p: &PlantParams, s: &PlantState, thrust: f64) -> f64 {
    let xi = uav_positions(p, s)[0];
    let vi = uav_velocities(p, s)[0];
    let (ml, m) = (p.load_mass, p.uav_masses[0]);
    0.5 * ml * s.load_vel.norm_squared() + 0.5 * m * vi.norm_squared() + ml * G * s.load_pos.z + m * G * xi.z
        - thrust * xi.z
}

fn criterion_8(r: &mut Report, sqp: &Run) {
    // One UAV with constant thrust equal to the total weight: the pair swings
    // about its fixed centre of mass with no controller in the loop.
    let p = PlantParams::uniform(1, 0.225, 0.5, Vec3::new(2.1e-2, 1.87e-2, 3.97e-2), 1.0);
    let at = |deg: f64| {
        let t = deg.to_radians();
        PlantState::at_rest(Vec3::zeros(), vec![UnitVec3::new_normalize(Vec3::new(t.sin(), 0.0, t.cos())).unwrap()])
    };
    let mut u = PlantInputs::zeros(1);
    u.thrusts[0] = (0.5 + 0.225) * G;
    let mut s = at(30.0);
    let e0 = pendulum_energy(&p, &s, u.thrusts[0]);
    let swing = e0 - pendulum_energy(&p, &at(0.0), u.thrusts[0]);
    let mut drift = 0.0f64;
    for _ in 0..10_000 {
        s = rk4_step(&p, &s, &u, 1e-3).unwrap();
        drift = drift.max((pendulum_energy(&p, &s, u.thrusts[0]) - e0).abs());
    }
    let rel = drift / swing;
    r.check(
        "8a",
        rel <= ENERGY_DRIFT_MAX,
        format!("pendulum energy drift over 10 s: {:.3e} of swing energy", rel),
    );

    let hover = run(&ScenarioConfig::hover());
    let residual = sqp.metrics.max_balance_residual.max(hover.metrics.max_balance_residual);
    r.check(
        "8b",
        residual <= BALANCE_RESIDUAL_MAX,
        format!("momentum balance residual, worst tick of spiral and hover runs: {residual:.2e} N"),
    );
    r.check(
        "8c",
        hover.metrics.rms_error <= HOVER_RMS_MAX,
        format!("hover-hold rms {:.2e} m", hover.metrics.rms_error),
    );
}

fn criterion_9(r: &mut Report, sqp: &Run, cfg: &ScenarioConfig) {
    let again = run(cfg);
    let a = output::strip_timing_column(&output::csv_string(&sqp.records).unwrap());
    let b = output::strip_timing_column(&output::csv_string(&again.records).unwrap());
    r.check(
        "9",
        a == b,
        format!("repeat run CSV identical excluding {}: {} bytes", output::TIMING_COLUMN, a.len()),
    );
}

fn main() {
    let mut r = Report { passed: 0, failed: 0 };
    let cfg = ScenarioConfig::default();

    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    let sqp = run(&cfg);
    criterion_4(&mut r, &sqp);
    criterion_5(&mut r, &sqp, &cfg);
    criterion_6(&mut r, &cfg);
    criterion_7(&mut r, &cfg);
    criterion_8(&mut r, &sqp);
    criterion_9(&mut r, &sqp, &cfg);

    println!("acceptance: {} passed, {} failed", r.passed, r.failed);
    if r.failed > 0 {
        std::process::exit(1);
    }
}
