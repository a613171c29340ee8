//! Integration of `p' = -H_q, q' = H_p`, period maps, and rotation
//! diagnostics.
//!
//! Steps never straddle a time break of the field: every span is cut at the
//! field's discontinuities and junctions and each panel is covered by an
//! integer number of equal steps. Stage times of all schemes lie strictly
//! inside their panel, so a jump is always seen from the correct side.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::HamiltonianField;
use crate::geometry::{disk_samples, to_action_angle, wrap_angle, Disk, ExtendedPoint, PhasePoint};

/// Allowed relative overshoot of the action past the invariant disk.
pub const ESCAPE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Second order, symplectic for nonautonomous Hamiltonians.
    ImplicitMidpoint,
    /// Fourth-order symmetric triple-jump composition of implicit midpoint
    /// steps; still symplectic.
    Composition4,
    /// Classical Runge–Kutta, not symplectic. Used only as an oracle.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub scheme: Scheme,
    /// Tolerance of the fixed-point solve of the implicit stage equation.
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: TAU / 2000.0,
            scheme: Scheme::Composition4,
            solver_tol: 1e-14,
            solver_max_iter: 200,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(self, step: f64) -> Self {
        Self { step, ..self }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if !(self.solver_tol > 0.0) || self.solver_max_iter == 0 {
            return Err(Error::InvalidArgument("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<ExtendedPoint>,
    pub field_label: String,
}

impl Trajectory {
    pub fn start(&self) -> ExtendedPoint {
        self.samples[0]
    }

    pub fn end(&self) -> ExtendedPoint {
        *self.samples.last().expect("trajectory has at least one sample")
    }
}

#[inline]
fn velocity(h: &HamiltonianField, x: PhasePoint, t: f64) -> (f64, f64) {
    let g = h.gradient(x, t);
    (-g.dq, g.dp)
}

/// Solves the midpoint stage equation `m = x + dt/2 v(m, t + dt/2)`.
///
/// Fixed-point iteration first; if that stalls, Newton with a
/// finite-difference Jacobian taken at the current iterate. The latter also
/// handles fields whose velocity reverses across an invariant circle, where
/// the fixed-point map cycles between the two sides.
fn midpoint_step(h: &HamiltonianField, x: PhasePoint, t: f64, dt: f64, cfg: &IntegratorConfig) -> Result<PhasePoint> {
    let tm = t + 0.5 * dt;
    let half = 0.5 * dt;
    let converged = |change: f64, m: PhasePoint| change <= cfg.solver_tol * (1.0 + m.p.abs().max(m.q.abs()));
    let finish = |m: PhasePoint| PhasePoint::new(2.0 * m.p - x.p, 2.0 * m.q - x.q);

    let (vp, vq) = velocity(h, x, tm);
    let predictor = PhasePoint::new(x.p + half * vp, x.q + half * vq);
    let mut m = predictor;
    let fixed_point_budget = (cfg.solver_max_iter / 4).max(1);
    for _ in 0..fixed_point_budget {
        let (vp, vq) = velocity(h, m, tm);
        let next = PhasePoint::new(x.p + half * vp, x.q + half * vq);
        let change = (next.p - m.p).abs().max((next.q - m.q).abs());
        m = next;
        if converged(change, m) {
            return Ok(finish(m));
        }
    }

    m = predictor;
    for _ in fixed_point_budget..cfg.solver_max_iter {
        let (vp, vq) = velocity(h, m, tm);
        let (gp, gq) = (m.p - x.p - half * vp, m.q - x.q - half * vq);
        let d = 1e-7 * (1.0 + m.p.abs().max(m.q.abs()));
        let (a_pp, a_qp) = velocity(h, PhasePoint::new(m.p + d, m.q), tm);
        let (a_pm, a_qm) = velocity(h, PhasePoint::new(m.p - d, m.q), tm);
        let (b_pp, b_qp) = velocity(h, PhasePoint::new(m.p, m.q + d), tm);
        let (b_pm, b_qm) = velocity(h, PhasePoint::new(m.p, m.q - d), tm);
        // Jacobian of G(m) = m - x - dt/2 v(m)
        let j11 = 1.0 - half * (a_pp - a_pm) / (2.0 * d);
        let j21 = -half * (a_qp - a_qm) / (2.0 * d);
        let j12 = -half * (b_pp - b_pm) / (2.0 * d);
        let j22 = 1.0 - half * (b_qp - b_qm) / (2.0 * d);
        let det = j11 * j22 - j12 * j21;
        if !(det.abs() > 1e-300) {
            break;
        }
        let dp = (j22 * gp - j12 * gq) / det;
        let dq = (-j21 * gp + j11 * gq) / det;
        m = PhasePoint::new(m.p - dp, m.q - dq);
        if converged(dp.abs().max(dq.abs()), m) {
            // One more residual evaluation to confirm.
            let (vp, vq) = velocity(h, m, tm);
            let res = (m.p - x.p - half * vp).abs().max((m.q - x.q - half * vq).abs());
            if converged(res, m) {
                return Ok(finish(m));
            }
        }
    }
    Err(Error::SolverDivergence {
        time: t,
        iterations: cfg.solver_max_iter,
    })
}

fn rk4_step(h: &HamiltonianField, x: PhasePoint, t: f64, dt: f64) -> PhasePoint {
    let at = |x: PhasePoint, s: f64, k: (f64, f64)| PhasePoint::new(x.p + s * k.0, x.q + s * k.1);
    let k1 = velocity(h, x, t);
    let k2 = velocity(h, at(x, 0.5 * dt, k1), t + 0.5 * dt);
    let k3 = velocity(h, at(x, 0.5 * dt, k2), t + 0.5 * dt);
    // Last stage nudged inside the panel so a jump at the panel end is not seen.
    let k4 = velocity(h, at(x, dt, k3), t + dt * (1.0 - 1e-12));
    PhasePoint::new(
        x.p + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        x.q + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

fn step(h: &HamiltonianField, x: PhasePoint, t: f64, dt: f64, cfg: &IntegratorConfig) -> Result<PhasePoint> {
    match cfg.scheme {
        Scheme::ImplicitMidpoint => midpoint_step(h, x, t, dt, cfg),
        Scheme::Composition4 => {
            let g1 = 1.0 / (2.0 - 2f64.cbrt());
            let g2 = 1.0 - 2.0 * g1;
            let y = midpoint_step(h, x, t, g1 * dt, cfg)?;
            let y = midpoint_step(h, y, t + g1 * dt, g2 * dt, cfg)?;
            midpoint_step(h, y, t + (g1 + g2) * dt, g1 * dt, cfg)
        }
        Scheme::Rk4 => Ok(rk4_step(h, x, t, dt)),
    }
}

/// Panel boundaries from `t0` to `t1` (either direction), including both ends.
fn panel_edges(h: &HamiltonianField, t0: f64, t1: f64) -> Vec<f64> {
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let period = h.period();
    let guard = 1e-12 * period.max(hi.abs());
    let mut edges = vec![lo];
    let breaks = h.time_breaks();
    if !breaks.is_empty() {
        let k0 = (lo / period).floor() as i64 - 1;
        let k1 = (hi / period).ceil() as i64 + 1;
        for k in k0..=k1 {
            for b in &breaks {
                let t = b + k as f64 * period;
                if t > lo + guard && t < hi - guard {
                    edges.push(t);
                }
            }
        }
    }
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    if t0 > t1 {
        edges.reverse();
    }
    edges
}

/// Runs the integrator from `(x, t0)` to `t1`, calling `visit` after every step.
fn run(
    h: &HamiltonianField,
    x0: PhasePoint,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut visit: impl FnMut(PhasePoint, f64) -> Result<()>,
) -> Result<PhasePoint> {
    cfg.validate()?;
    let limit = h.invariant_disk().map(|d| d.i0() * (1.0 + ESCAPE_TOLERANCE));
    let mut x = x0;
    for pair in panel_edges(h, t0, t1).windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = b - a;
        if len == 0.0 {
            continue;
        }
        let n = (len.abs() / cfg.step - 1e-9).ceil().max(1.0) as usize;
        let dt = len / n as f64;
        for k in 0..n {
            let t = a + dt * k as f64;
            x = step(h, x, t, dt, cfg)?;
            let t_next = if k + 1 == n { b } else { t + dt };
            if let Some(limit) = limit {
                let action = x.action();
                if !(action <= limit) {
                    return Err(Error::Escape { action, limit, time: t_next });
                }
            }
            visit(x, t_next)?;
        }
    }
    Ok(x)
}

/// Endpoint of the flow from `(x, t0)` to time `t1`; `t1 < t0` runs backward.
pub fn transport(h: &HamiltonianField, x: PhasePoint, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<PhasePoint> {
    run(h, x, t0, t1, cfg, |_, _| Ok(()))
}

/// Full trajectory, one sample per integrator step.
pub fn integrate(h: &HamiltonianField, x0: PhasePoint, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let mut samples = vec![ExtendedPoint::new(x0, t0)];
    run(h, x0, t0, t1, cfg, |x, t| {
        samples.push(ExtendedPoint::new(x, t));
        Ok(())
    })?;
    Ok(Trajectory {
        samples,
        field_label: h.label().to_owned(),
    })
}

/// Trajectory recorded at `intervals + 1` equally spaced times; the
/// integrator still uses `cfg.step` internally.
pub fn integrate_sampled(
    h: &HamiltonianField,
    x0: PhasePoint,
    t0: f64,
    t1: f64,
    intervals: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(t1 > t0) || intervals == 0 {
        return Err(Error::InvalidArgument(format!(
            "need t1 > t0 and at least one interval, got [{t0}, {t1}] / {intervals}"
        )));
    }
    let dt = (t1 - t0) / intervals as f64;
    let mut samples = Vec::with_capacity(intervals + 1);
    samples.push(ExtendedPoint::new(x0, t0));
    let mut x = x0;
    for k in 0..intervals {
        let a = t0 + dt * k as f64;
        let b = if k + 1 == intervals { t1 } else { a + dt };
        x = transport(h, x, a, b, cfg)?;
        samples.push(ExtendedPoint::new(x, b));
    }
    Ok(Trajectory {
        samples,
        field_label: h.label().to_owned(),
    })
}

/// The time-`periods * period` map of a field, started at `t = 0`.
#[derive(Debug, Clone)]
pub struct PoincareMap {
    pub field: HamiltonianField,
    pub periods: usize,
    pub config: IntegratorConfig,
}

impl PoincareMap {
    pub fn new(field: HamiltonianField) -> Self {
        Self {
            field,
            periods: 1,
            config: IntegratorConfig::default(),
        }
    }

    pub fn with_periods(mut self, periods: usize) -> Self {
        self.periods = periods;
        self
    }

    pub fn with_config(mut self, config: IntegratorConfig) -> Self {
        self.config = config;
        self
    }

    pub fn span(&self) -> f64 {
        self.periods as f64 * self.field.period()
    }

    pub fn apply(&self, x: PhasePoint) -> Result<PhasePoint> {
        poincare_apply(self, x)
    }

    /// Determinant of the central-difference Jacobian at `x`.
    pub fn jacobian_determinant(&self, x: PhasePoint, h: f64) -> Result<f64> {
        let img = |p: f64, q: f64| self.apply(PhasePoint::new(p, q));
        let (pp, pm) = (img(x.p + h, x.q)?, img(x.p - h, x.q)?);
        let (qp, qm) = (img(x.p, x.q + h)?, img(x.p, x.q - h)?);
        let a = (pp.p - pm.p) / (2.0 * h);
        let c = (pp.q - pm.q) / (2.0 * h);
        let b = (qp.p - qm.p) / (2.0 * h);
        let d = (qp.q - qm.q) / (2.0 * h);
        Ok(a * d - b * c)
    }
}

pub fn poincare_apply(m: &PoincareMap, x: PhasePoint) -> Result<PhasePoint> {
    if m.periods == 0 {
        return Err(Error::InvalidArgument("a Poincare map needs at least one period".into()));
    }
    transport(&m.field, x, 0.0, m.span(), &m.config)
}

/// Largest Euclidean distance between the images of `samples` deterministic
/// low-discrepancy points of the disk. The points are processed in parallel.
pub fn map_distance(a: &PoincareMap, b: &PoincareMap, disk: Disk, samples: usize) -> Result<f64> {
    let points = disk_samples(disk, samples);
    let distances: Vec<Result<f64>> = points
        .par_iter()
        .map(|&x| Ok(a.apply(x)?.distance(b.apply(x)?)))
        .collect();
    distances.into_iter().try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// Net number of turns made by the boundary point `(I0, 0)` over
/// `[0, total_time]`, by unwrapping the angle step by step.
pub fn boundary_rotation_number(h: &HamiltonianField, disk: Disk, total_time: f64, cfg: &IntegratorConfig) -> Result<f64> {
    if total_time == 0.0 {
        return Ok(0.0);
    }
    let start = disk.boundary_point(0.0);
    let mut angle = to_action_angle(start).angle;
    let mut total = 0.0;
    run(h, start, 0.0, total_time, cfg, |x, _| {
        let next = to_action_angle(x).angle;
        let inc = wrap_angle(next - angle);
        if inc.abs() >= FRAC_PI_2 {
            return Err(Error::AngleStepTooLarge { increment: inc });
        }
        let drift = (x.action() - disk.i0()).abs();
        if drift > 1e-6 * disk.i0() {
            return Err(Error::BoundaryNotInvariant { drift });
        }
        total += inc;
        angle = next;
        Ok(())
    })?;
    Ok(total / TAU)
}
