//! The acceptance suite: ten end-to-end checks against closed forms and
//! structural properties. Each check yields a pass/fail verdict, a one-line
//! summary, and CSV rows; the last check reruns the others with a different
//! number of workers and compares the rows byte for byte.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constructor::{smoothness_order, standard_junctions, theorem2_pair};
use crate::error::Result;
use crate::fields::{
    lemma1_extension, linear_rotation, scale_field, theorem2_piecewise, twist_field, zero_field, ActionProfile,
    Gradient, HamiltonianField,
};
use crate::flow::{integrate, map_distance, IntegratorConfig, PoincareMap, Scheme};
use crate::geometry::{from_action_angle, to_action_angle, wrap_angle, ActionAngle, Disk, PhasePoint};
use crate::invariants::{calabi, form_helicity, helicity, quantization_check, MapCheck, QuadratureGrid};
use crate::linking::asymptotic_linking;
use crate::report::{to_csv_string, Row};

pub const CRITERIA: [&str; 10] = [
    "helicity oracle",
    "calabi limit of the cap extension",
    "quantization of two rotations",
    "smooth flow with shifted helicity",
    "invariance suite",
    "form identity",
    "discontinuity handling",
    "flow quality",
    "linking interpretation",
    "determinism",
];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub passed: bool,
    pub summary: String,
    pub rows: Vec<Row>,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        CRITERIA[self.id - 1]
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<36} {}  ({:.2} s) {}",
            self.id,
            self.name(),
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.summary
        )
    }
}

struct Check {
    failures: Vec<String>,
    info: String,
    rows: Vec<Row>,
}

impl Check {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            info: String::new(),
            rows: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl fmt::Display) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn summary(&self) -> String {
        if self.passed() {
            self.info.clone()
        } else {
            format!("failed: {} | {}", self.failures.join("; "), self.info)
        }
    }
}

fn unit() -> Disk {
    Disk::unit()
}

fn grid() -> QuadratureGrid {
    QuadratureGrid::default()
}

/// `w I + (I - I0)(a p cos t + b q sin 2t)`: constant on the boundary
/// circle but without rotational symmetry.
pub fn skewed_field(disk: Disk, w: f64, a: f64, b: f64) -> HamiltonianField {
    let i0 = disk.i0();
    HamiltonianField::from_fn(
        format!("skewed({w},{a},{b})"),
        TAU,
        move |x: PhasePoint, t: f64| {
            let i = x.action();
            w * i + (i - i0) * (a * x.p * t.cos() + b * x.q * (2.0 * t).sin())
        },
        move |x: PhasePoint, t: f64| {
            let i = x.action();
            let (c, s) = (a * t.cos(), b * (2.0 * t).sin());
            let bump = c * x.p + s * x.q;
            Gradient::new(w * x.p + x.p * bump + (i - i0) * c, w * x.q + x.q * bump + (i - i0) * s)
        },
    )
    .expect("period is positive")
    .with_invariant_disk(disk)
}

fn criterion_1(c: &mut Check) -> Result<()> {
    let h = linear_rotation(1.0, unit());
    let start = Instant::now();
    let r = helicity(&h, unit(), grid())?;
    let secs = start.elapsed().as_secs_f64();
    let want = -2.0 * PI * PI;
    c.require((r.value - want).abs() <= 1e-8, format_args!("helicity {} vs {want}", r.value));
    c.require(secs < 1.0, format_args!("took {secs:.3} s"));
    c.rows.push(
        Row::new("helicity", h.label(), 1.0, r.value)
            .grid(r.grid)
            .err_proxy(r.refinement_delta),
    );
    c.info = format!("value {:.12} (closed form {want:.12})", r.value);
    Ok(())
}

fn criterion_2(c: &mut Check) -> Result<()> {
    let eps = [0.2, 0.1, 0.05, 0.025];
    let mut orders = Vec::new();
    for n in [1i64, 2, -3] {
        let limit = -2.0 * PI * PI * n as f64;
        let mut errs = Vec::new();
        for &e in &eps {
            let h = lemma1_extension(n, 1.0, e)?;
            let r = calabi(&h, Disk::new(1.0 + e)?, grid())?;
            let err = (r.value - limit).abs();
            c.require(
                err <= 5.0 * e * n.abs() as f64 * 2.0 * PI * PI,
                format_args!("n={n} eps={e}: {} too far from {limit}", r.value),
            );
            errs.push(err);
            c.rows.push(
                Row::new("lemma1-limit", h.label(), 1.0, r.value)
                    .grid(r.grid)
                    .err_proxy(err)
                    .extra("n", n)
                    .extra_float("eps", e),
            );
        }
        let order = fitted_slope(&eps, &errs);
        c.require(order >= 0.9, format_args!("n={n}: order {order:.3}"));
        orders.push(order);
    }
    c.info = format!("empirical orders {orders:.3?}");
    Ok(())
}

/// Least-squares slope of `log err` against `log x`.
fn fitted_slope(x: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(err).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = pts.iter().map(|(a, _)| (a - mx) * (a - mx)).sum();
    num / den
}

fn criterion_3(c: &mut Check) -> Result<()> {
    let h1 = linear_rotation(0.3, unit());
    let h2 = linear_rotation(1.3, unit());
    let q = quantization_check(&h1, &h2, unit(), grid(), &MapCheck::default())?;
    c.require(q.residual < 1e-6, format_args!("residual {:e}", q.residual));
    c.require(q.n_nearest.abs() == 1, format_args!("n = {}", q.n_nearest));
    c.rows.push(
        Row::new("quantize", format!("{}|{}", h1.label(), h2.label()), 1.0, q.delta)
            .grid(grid())
            .err_proxy(q.residual)
            .extra("n", q.n_nearest)
            .extra_float("map_distance", q.map_distance),
    );
    c.info = format!("delta {:.10}, n = {}, residual {:.2e}", q.delta, q.n_nearest, q.residual);
    Ok(())
}

fn criterion_4(c: &mut Check) -> Result<()> {
    let d = unit();
    let h1 = linear_rotation(0.3, d);
    let m1 = PoincareMap::new(h1.clone());
    let base = helicity(&h1, d, grid())?.value;
    let s2 = d.area() * d.area();
    let mut worst_map: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    for k in [1u32, 3] {
        let mut shifts = Vec::new();
        for n in -2i64..=2 {
            let h2 = theorem2_pair(&h1, n, d, k)?;
            let dist = map_distance(&m1, &PoincareMap::new(h2.clone()), d, 50)?;
            let shift = helicity(&h2, d, grid())?.value - base;
            let order = smoothness_order(&h2, &standard_junctions(), 4);
            c.require(dist < 1e-6, format_args!("k={k} n={n}: map distance {dist:e}"));
            let miss = (shift.abs() - n.unsigned_abs() as f64 * s2 / 2.0).abs();
            c.require(miss <= 1e-5 * s2, format_args!("k={k} n={n}: shift {shift}"));
            c.require(order >= k as usize, format_args!("k={k} n={n}: smoothness {order}"));
            worst_map = worst_map.max(dist);
            worst_shift = worst_shift.max(miss / s2);
            shifts.push((n, shift));
            c.rows.push(
                Row::new("theorem2", h2.label(), 1.0, shift)
                    .grid(grid())
                    .err_proxy(miss)
                    .extra("n", n)
                    .extra("k", k)
                    .extra_float("map_distance", dist)
                    .extra("smoothness", order),
            );
        }
        let unit_shift = shifts.iter().find(|s| s.0 == 1).map(|s| s.1).unwrap_or(0.0);
        for &(n, shift) in &shifts {
            c.require(
                (shift - n as f64 * unit_shift).abs() <= 1e-5 * s2,
                format_args!("k={k}: shift({n}) = {shift} not {n} x {unit_shift}"),
            );
        }
    }
    c.info = format!("max map distance {worst_map:.2e}, max shift error {worst_shift:.2e} S^2");
    Ok(())
}

fn criterion_5(c: &mut Check) -> Result<()> {
    let d = unit();
    let h = skewed_field(d, 0.8, 0.3, 0.2);
    let base = helicity(&h, d, grid())?.value;
    let mut worst: f64 = 0.0;
    let mut compare = |c: &mut Check, what: String, v: f64| {
        let diff = (v - base).abs();
        c.require(diff <= 1e-8, format_args!("{what}: {v} vs {base}"));
        worst = worst.max(diff);
        c.rows.push(Row::new("invariance", what, 1.0, v).grid(grid()).err_proxy(diff));
    };
    for angle in [0.7, 2.0] {
        let v = helicity(&h.rotated(angle), d, grid())?.value;
        compare(c, format!("rotated({angle})"), v);
    }
    let sine = HamiltonianField::from_fn("sin(t)", TAU, |_, t: f64| t.sin(), |_, _| Gradient::ZERO)?;
    let v = helicity(&h.plus(&sine)?, d, grid())?.value;
    compare(c, "gauge(sin t)".into(), v);
    for mu in [0.5, 2.0, 3.0] {
        let v = helicity(&scale_field(&h, mu)?, d, grid())?.value;
        compare(c, format!("rescaled({mu})"), v);
    }
    c.rows.insert(0, Row::new("invariance", h.label(), 1.0, base).grid(grid()));
    c.info = format!("helicity {base:.12}, max deviation {worst:.2e}");
    Ok(())
}

fn criterion_6(c: &mut Check) -> Result<()> {
    let d = unit();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = twist_field(ActionProfile::polynomial(0.0, coeffs), d);
        let hel = helicity(&h, d, grid())?.value;
        let form = form_helicity(&h, d, grid())?;
        let diff = (form + 2.0 * hel).abs();
        c.require(diff <= 1e-6, format_args!("{}: form {form} vs helicity {hel}", h.label()));
        worst = worst.max(diff);
        c.rows.push(
            Row::new("form-helicity", h.label(), 1.0, form)
                .grid(grid())
                .err_proxy(diff)
                .extra_float("helicity", hel),
        );
    }
    c.info = format!("max |form + 2 helicity| {worst:.2e}");
    Ok(())
}

fn criterion_7(c: &mut Check) -> Result<()> {
    let d = unit();
    let (omega, n) = (0.3, 1i64);
    let h = theorem2_piecewise(&linear_rotation(omega, d), n, d)?;
    let v = helicity(&h, d, grid())?.value;
    // each half period integrates slope * (I - I0) over the disk: -pi I0^2 * slope * pi
    let i0 = d.i0();
    let closed = -PI * PI * i0 * i0 * (2.0 * omega + 2.0 * n as f64);
    let diff = (v - closed).abs();
    c.require(diff <= 1e-6, format_args!("{v} vs {closed}"));
    c.rows.push(Row::new("helicity", h.label(), i0, v).grid(grid()).err_proxy(diff));
    c.info = format!("value {v:.12} (two-panel closed form {closed:.12})");
    Ok(())
}

fn criterion_8(c: &mut Check) -> Result<()> {
    let d = unit();
    let h = skewed_field(d, 0.8, 0.3, 0.2);
    let map = PoincareMap::new(h.clone());
    let mut worst: f64 = 0.0;
    for (action, angle) in [(0.1, 0.3), (0.4, 2.0), (0.7, 4.0), (0.9, 5.5)] {
        let x = from_action_angle(ActionAngle::new(action, angle))?;
        let det = map.jacobian_determinant(x, 1e-5)?;
        c.require((det - 1.0).abs() <= 1e-4, format_args!("det {det} at I={action}"));
        worst = worst.max((det - 1.0).abs());
        c.rows.push(
            Row::new("jacobian", h.label(), 1.0, det)
                .err_proxy((det - 1.0).abs())
                .extra_float("action", action)
                .extra_float("angle", angle),
        );
    }
    let slope = midpoint_convergence_slope(&mut c.rows)?;
    c.require((slope - 2.0).abs() <= 0.1, format_args!("convergence slope {slope}"));
    c.info = format!("max |det - 1| {worst:.2e}, midpoint slope {slope:.4}");
    Ok(())
}

/// Phase error of implicit midpoint on `linear_rotation(1)` over one period
/// at three step sizes; returns the fitted order.
fn midpoint_convergence_slope(rows: &mut Vec<Row>) -> Result<f64> {
    let h = linear_rotation(1.0, unit());
    let x0 = from_action_angle(ActionAngle::new(0.5, 0.0))?;
    let steps = [TAU / 50.0, TAU / 100.0, TAU / 200.0];
    let mut errs = Vec::new();
    for &s in &steps {
        let cfg = IntegratorConfig::default().with_step(s).with_scheme(Scheme::ImplicitMidpoint);
        let end = integrate(&h, x0, 0.0, TAU, &cfg)?.end().phase();
        let err = wrap_angle(to_action_angle(end).angle).abs();
        errs.push(err);
        rows.push(Row::new("midpoint-convergence", h.label(), 1.0, err).extra_float("step", s));
    }
    Ok(fitted_slope(&steps, &errs))
}

fn criterion_9(c: &mut Check) -> Result<()> {
    let d = unit();
    let h = linear_rotation(1.0, d);
    let twice = 2.0 * helicity(&h, d, grid())?.value;
    let scaled = scale_field(&h, 2.0)?;
    let mut estimates = Vec::new();
    for seed in [1u64, 2, 3] {
        let est = asymptotic_linking(&h, d, 16, 64, seed)?;
        let rel = (est.calibrated() - twice).abs() / twice.abs();
        c.require(rel <= 0.15, format_args!("seed {seed}: {} vs {twice}", est.calibrated()));
        let est2 = asymptotic_linking(&scaled, d, 16, 64, seed)?;
        let bars = 3.0 * (est.std_error + est2.std_error) + 1e-9 * est.mean_total.abs();
        c.require(
            (est.mean_total - est2.mean_total).abs() <= bars,
            format_args!("seed {seed}: rescaled {} vs {}", est2.mean_total, est.mean_total),
        );
        for (label, e) in [(h.label(), est), (scaled.label(), est2)] {
            c.rows.push(
                Row::new("linking", label, 1.0, e.mean_total)
                    .err_proxy(e.std_error)
                    .extra("seed", seed)
                    .extra("periods", e.periods)
                    .extra("pairs", e.pairs)
                    .extra("orientation_sign", e.orientation_sign),
            );
        }
        estimates.push(est.calibrated());
    }
    let zero = asymptotic_linking(&zero_field(d), d, 16, 64, 1)?;
    c.require(zero.mean_total == 0.0, format_args!("zero field gave {}", zero.mean_total));
    c.rows.push(Row::new("linking", "zero", 1.0, zero.mean_total).err_proxy(zero.std_error));
    c.info = format!("calibrated {estimates:.6?} vs 2 x helicity {twice:.6}");
    Ok(())
}

fn run_one(id: usize) -> Outcome {
    let start = Instant::now();
    let mut check = Check::new();
    let res = match id {
        1 => criterion_1(&mut check),
        2 => criterion_2(&mut check),
        3 => criterion_3(&mut check),
        4 => criterion_4(&mut check),
        5 => criterion_5(&mut check),
        6 => criterion_6(&mut check),
        7 => criterion_7(&mut check),
        8 => criterion_8(&mut check),
        9 => criterion_9(&mut check),
        _ => panic!("criterion {id} is not a numerical check"),
    };
    if let Err(e) = res {
        check.require(false, format_args!("error: {e}"));
    }
    let elapsed = start.elapsed();
    if id == 9 && elapsed.as_secs_f64() >= 60.0 {
        check.require(false, format_args!("runtime {:.1} s", elapsed.as_secs_f64()));
    }
    Outcome {
        id,
        passed: check.passed(),
        summary: check.summary(),
        rows: check.rows,
        elapsed,
    }
}

/// Criteria 1 to 9 in order, on the current rayon pool.
pub fn run_numerical() -> Vec<Outcome> {
    (1..=9).map(run_one).collect()
}

/// CSV of all rows of criteria 1 to 9, in order.
pub fn csv_of(outcomes: &[Outcome]) -> String {
    let rows: Vec<Row> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    to_csv_string(&rows)
}

/// Reruns criteria 1 to 9 on a pool of `workers` threads and compares the
/// CSV with `reference`.
pub fn determinism(reference: &[Outcome], workers: usize) -> Outcome {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
    let (passed, summary) = match pool {
        Ok(pool) => {
            let again = pool.install(run_numerical);
            let (a, b) = (csv_of(reference), csv_of(&again));
            if a == b {
                (true, format!("{} bytes identical with {workers} worker(s)", a.len()))
            } else {
                let line = a.lines().zip(b.lines()).position(|(x, y)| x != y).unwrap_or(0);
                (false, format!("failed: CSV differs with {workers} worker(s) at line {}", line + 1))
            }
        }
        Err(e) => (false, format!("failed: could not build a pool: {e}")),
    };
    Outcome {
        id: 10,
        passed,
        summary,
        rows: Vec::new(),
        elapsed: start.elapsed(),
    }
}

/// All ten criteria. The reference run uses the current pool; the rerun
/// uses one worker if the current pool has several, four otherwise.
pub fn run_all() -> Vec<Outcome> {
    let mut out = run_numerical();
    let workers = if rayon::current_num_threads() > 1 { 1 } else { 4 };
    let det = determinism(&out, workers);
    out.push(det);
    out
}
