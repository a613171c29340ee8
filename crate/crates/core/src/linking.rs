//! Pairwise linking of closed-up trajectory segments in the solid torus
//! `D x S^1`, and its Monte-Carlo average.
//!
//! The solid torus is placed in space untwisted:
//! `(p, q, t) -> ((R + q) cos theta, (R + q) sin theta, p)` with
//! `theta = 2 pi t / period` and `R` three disk radii, so fibers `{x} x S^1`
//! are coaxial circles with linking number zero.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::HamiltonianField;
use crate::flow::{integrate_sampled, IntegratorConfig, Trajectory, ESCAPE_TOLERANCE};
use crate::geometry::{from_action_angle, to_action_angle, wrap_angle, ActionAngle, Disk, ExtendedPoint};
use crate::quadrature::pairwise_sum;

/// Sign relating the crossing count in the embedding above to the
/// orientation `dp dq dt`: with it, `ORIENTATION_SIGN * mean_total`
/// estimates twice the helicity. Fixed on `linear_rotation(1)`.
pub const ORIENTATION_SIGN: f64 = -1.0;

pub const SAMPLES_PER_PERIOD: usize = 128;

/// Closest allowed approach of the two curves at a crossing, in space.
pub const MIN_SEPARATION: f64 = 1e-6;

const CLOSURE_ANGLE_STEP: f64 = PI / 32.0;
const PROJECTION_ATTEMPTS: usize = 4;
const DEFAULT_PROJECTION_SEED: u64 = 0x6c69_6e6b;

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// A closed loop in `D x S^1`: the trajectory samples followed by the
/// closure path, with an implicit last edge back to the first point.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub points: Vec<ExtendedPoint>,
    /// Number of leading points that come from the trajectory.
    pub trajectory_len: usize,
    /// Length in the `(p, q)` plane of the closure path.
    pub closure_length: f64,
}

impl ClosedLoop {
    /// Net number of turns around the time circle.
    pub fn t_degree(&self, period: f64) -> f64 {
        let n = self.points.len();
        let total: f64 = (0..n)
            .map(|i| {
                let dt = self.points[(i + 1) % n].t - self.points[i].t;
                // the implicit last edge returns within one fiber
                if i + 1 == n {
                    dt - (dt / period).round() * period
                } else {
                    dt
                }
            })
            .sum();
        total / period
    }
}

/// Closes a trajectory spanning an integer number of periods inside the end
/// fiber: along the circle of the endpoint's action to the start angle, then
/// radially to the start point.
pub fn close_trajectory(traj: &Trajectory, disk: Disk, period: f64) -> Result<ClosedLoop> {
    let start = traj.start();
    let end = traj.end();
    let turns = (end.t - start.t) / period;
    if traj.samples.len() < 2 || (turns - turns.round()).abs() > 1e-9 * turns.abs().max(1.0) || turns.round() < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "closure needs a whole number of periods, trajectory spans {turns}"
        )));
    }
    let limit = disk.i0() * (1.0 + ESCAPE_TOLERANCE);
    let a_end = to_action_angle(end.phase());
    if !(a_end.action <= limit) {
        return Err(Error::EndpointOutsideDisk {
            action: a_end.action,
            limit,
        });
    }
    let a_start = to_action_angle(start.phase());
    let mut points = traj.samples.clone();
    let radius = (2.0 * a_end.action).sqrt();
    let sweep = wrap_angle(a_start.angle - a_end.angle);
    let steps = (sweep.abs() / CLOSURE_ANGLE_STEP).ceil() as usize;
    for k in 1..=steps {
        let angle = a_end.angle + sweep * k as f64 / steps as f64;
        let x = from_action_angle(ActionAngle::new(a_end.action, angle))?;
        points.push(ExtendedPoint::new(x, end.t));
    }
    let closure_length = radius * sweep.abs() + (radius - (2.0 * a_start.action).sqrt()).abs();
    Ok(ClosedLoop {
        points,
        trajectory_len: traj.samples.len(),
        closure_length,
    })
}

/// A closed polygon in space; consecutive duplicate vertices are dropped.
#[derive(Debug, Clone)]
pub struct ClosedPolyline {
    points: Vec<Vec3>,
}

impl ClosedPolyline {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("polyline has non-finite vertices".into()));
        }
        let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
        for p in points {
            if out.last().is_none_or(|&l| norm(sub(p, l)) > 1e-12) {
                out.push(p);
            }
        }
        while out.len() > 1 && norm(sub(out[0], *out.last().unwrap())) <= 1e-12 {
            out.pop();
        }
        if out.len() < 3 {
            return Err(Error::InvalidArgument("a closed polyline needs three distinct vertices".into()));
        }
        Ok(Self { points: out })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn segment(&self, i: usize) -> (Vec3, Vec3) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }
}

/// The untwisted placement of `D x S^1` in space.
#[derive(Debug, Clone, Copy)]
pub struct SolidTorusEmbedding {
    major: f64,
    period: f64,
}

impl SolidTorusEmbedding {
    pub fn new(disk: Disk, period: f64) -> Self {
        Self {
            major: 3.0 * disk.radius(),
            period,
        }
    }

    pub fn embed(&self, e: ExtendedPoint) -> Vec3 {
        let theta = TAU * e.t / self.period;
        let rho = self.major + e.q;
        [rho * theta.cos(), rho * theta.sin(), e.p]
    }

    pub fn embed_loop(&self, l: &ClosedLoop) -> Result<ClosedPolyline> {
        ClosedPolyline::new(l.points.iter().map(|&e| self.embed(e)).collect())
    }
}

enum Crossings {
    Sum(i64),
    Degenerate,
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let a: f64 = rng.gen_range(0.0..TAU);
    let s = (1.0 - z * z).sqrt();
    [s * a.cos(), s * a.sin(), z]
}

fn projection_basis(d: Vec3) -> (Vec3, Vec3) {
    let helper = if d[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(d, helper);
    let n1 = norm(e1);
    let e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    (e1, cross(d, e1))
}

/// Uniform bucket grid over the projected segments of one curve.
struct Buckets {
    lo: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    cells: Vec<Vec<u32>>,
}

impl Buckets {
    fn new(lo: [f64; 2], hi: [f64; 2], count: usize) -> Self {
        let g = ((count as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let span = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
        Self {
            lo,
            cell: [span[0] / g as f64, span[1] / g as f64],
            dims: [g, g],
            cells: vec![Vec::new(); g * g],
        }
    }

    fn range(&self, a: [f64; 2], b: [f64; 2]) -> ([usize; 2], [usize; 2]) {
        let idx = |v: f64, k: usize| (((v - self.lo[k]) / self.cell[k]).floor().max(0.0) as usize).min(self.dims[k] - 1);
        (
            [idx(a[0].min(b[0]), 0), idx(a[1].min(b[1]), 1)],
            [idx(a[0].max(b[0]), 0), idx(a[1].max(b[1]), 1)],
        )
    }

    fn insert(&mut self, a: [f64; 2], b: [f64; 2], id: u32) {
        let (lo, hi) = self.range(a, b);
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                self.cells[i * self.dims[1] + j].push(id);
            }
        }
    }
}

fn crossing_sum(a: &ClosedPolyline, b: &ClosedPolyline, d: Vec3) -> Result<Crossings> {
    let (e1, e2) = projection_basis(d);
    let project = |p: Vec3| [dot(p, e1), dot(p, e2)];
    let pa: Vec<[f64; 2]> = a.points.iter().map(|&p| project(p)).collect();
    let pb: Vec<[f64; 2]> = b.points.iter().map(|&p| project(p)).collect();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pa.iter().chain(&pb) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let (na, nb) = (a.len(), b.len());
    let mut buckets = Buckets::new(lo, hi, na + nb);
    for i in 0..na {
        buckets.insert(pa[i], pa[(i + 1) % na], i as u32);
    }
    let mut stamp = vec![u32::MAX; na];
    let mut sum = 0i64;
    for j in 0..nb {
        let (q0, q1) = (pb[j], pb[(j + 1) % nb]);
        let (clo, chi) = buckets.range(q0, q1);
        for ci in clo[0]..=chi[0] {
            for cj in clo[1]..=chi[1] {
                for &i in &buckets.cells[ci * buckets.dims[1] + cj] {
                    let i = i as usize;
                    if stamp[i] == j as u32 {
                        continue;
                    }
                    stamp[i] = j as u32;
                    let (p0, p1) = (pa[i], pa[(i + 1) % na]);
                    let r = [p1[0] - p0[0], p1[1] - p0[1]];
                    let w = [q1[0] - q0[0], q1[1] - q0[1]];
                    let denom = r[0] * w[1] - r[1] * w[0];
                    let diff = [q0[0] - p0[0], q0[1] - p0[1]];
                    let scale = (r[0].hypot(r[1]) * w[0].hypot(w[1])).max(1e-300);
                    if denom.abs() <= 1e-12 * scale {
                        // parallel: only a problem if the lines coincide
                        let off = (diff[0] * r[1] - diff[1] * r[0]).abs() / r[0].hypot(r[1]).max(1e-300);
                        if off <= 1e-12 * (1.0 + scale.sqrt()) {
                            return Ok(Crossings::Degenerate);
                        }
                        continue;
                    }
                    let s = (diff[0] * w[1] - diff[1] * w[0]) / denom;
                    let u = (diff[0] * r[1] - diff[1] * r[0]) / denom;
                    const EDGE: f64 = 1e-10;
                    let near = |v: f64| v.abs() <= EDGE || (v - 1.0).abs() <= EDGE;
                    if (near(s) && (-EDGE..=1.0 + EDGE).contains(&u)) || (near(u) && (-EDGE..=1.0 + EDGE).contains(&s)) {
                        return Ok(Crossings::Degenerate);
                    }
                    if !(s > 0.0 && s < 1.0 && u > 0.0 && u < 1.0) {
                        continue;
                    }
                    let (a0, a1) = a.segment(i);
                    let (b0, b1) = b.segment(j);
                    let ra = sub(a1, a0);
                    let rb = sub(b1, b0);
                    let ha = dot(a0, d) + s * dot(ra, d);
                    let hb = dot(b0, d) + u * dot(rb, d);
                    if (ha - hb).abs() < MIN_SEPARATION {
                        return Err(Error::CurvesTooClose {
                            distance: (ha - hb).abs(),
                        });
                    }
                    let orient = dot(cross(ra, rb), d);
                    sum += if (ha > hb) == (orient > 0.0) { 1 } else { -1 };
                }
            }
        }
    }
    if sum % 2 != 0 {
        return Ok(Crossings::Degenerate);
    }
    Ok(Crossings::Sum(sum))
}

/// Linking number by signed crossings in a projection along a direction
/// drawn from `seed`; degenerate projections are retried with fresh
/// directions.
pub fn linking_number_seeded(a: &ClosedPolyline, b: &ClosedPolyline, seed: u64) -> Result<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..PROJECTION_ATTEMPTS {
        let d = random_direction(&mut rng);
        if let Crossings::Sum(s) = crossing_sum(a, b, d)? {
            return Ok(s / 2);
        }
    }
    Err(Error::DegenerateProjection {
        attempts: PROJECTION_ATTEMPTS,
    })
}

pub fn linking_number(a: &ClosedPolyline, b: &ClosedPolyline) -> Result<i64> {
    linking_number_seeded(a, b, DEFAULT_PROJECTION_SEED)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkingEstimate {
    /// `(period * S(D))^2` times the mean of `linking / T^2` over pairs.
    pub mean_total: f64,
    pub std_error: f64,
    pub pairs: usize,
    pub periods: usize,
    pub orientation_sign: f64,
}

impl LinkingEstimate {
    /// `orientation_sign * mean_total`, an estimate of twice the helicity.
    pub fn calibrated(&self) -> f64 {
        self.orientation_sign * self.mean_total
    }
}

fn closed_orbit(
    h: &HamiltonianField,
    disk: Disk,
    start: ExtendedPoint,
    periods: usize,
    cfg: &IntegratorConfig,
) -> Result<ClosedPolyline> {
    let period = h.period();
    let traj = integrate_sampled(
        h,
        start.phase(),
        start.t,
        start.t + periods as f64 * period,
        periods * SAMPLES_PER_PERIOD,
        cfg,
    )?;
    let closed = close_trajectory(&traj, disk, period)?;
    SolidTorusEmbedding::new(disk, period).embed_loop(&closed)
}

/// Linking number of the closed orbits of two starting points.
pub fn orbit_linking(
    h: &HamiltonianField,
    disk: Disk,
    a: ExtendedPoint,
    b: ExtendedPoint,
    periods: usize,
    cfg: &IntegratorConfig,
) -> Result<i64> {
    let ca = closed_orbit(h, disk, a, periods, cfg)?;
    let cb = closed_orbit(h, disk, b, periods, cfg)?;
    linking_number(&ca, &cb)
}

fn uniform_point(rng: &mut ChaCha8Rng, disk: Disk, period: f64) -> Result<ExtendedPoint> {
    let action = disk.i0() * rng.gen::<f64>();
    let angle = TAU * rng.gen::<f64>();
    let t = period * rng.gen::<f64>();
    Ok(ExtendedPoint::new(from_action_angle(ActionAngle::new(action, angle))?, t))
}

/// Monte-Carlo average of pairwise linking over `periods` periods, starting
/// points uniform in `D x S^1`. Pairs run in parallel; the result does not
/// depend on the number of workers.
pub fn asymptotic_linking(
    h: &HamiltonianField,
    disk: Disk,
    periods: usize,
    pairs: usize,
    seed: u64,
) -> Result<LinkingEstimate> {
    asymptotic_linking_with(h, disk, periods, pairs, seed, &IntegratorConfig::default())
}

pub fn asymptotic_linking_with(
    h: &HamiltonianField,
    disk: Disk,
    periods: usize,
    pairs: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<LinkingEstimate> {
    if periods < 4 || pairs < 16 {
        return Err(Error::InvalidArgument(format!(
            "need periods >= 4 and pairs >= 16, got {periods} and {pairs}"
        )));
    }
    let period = h.period();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = (0..pairs)
        .map(|_| Ok((uniform_point(&mut rng, disk, period)?, uniform_point(&mut rng, disk, period)?)))
        .collect::<Result<Vec<_>>>()?;
    let span = periods as f64 * period;
    let weight = (period * disk.area()).powi(2);
    let values = starts
        .par_iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let ca = closed_orbit(h, disk, a, periods, cfg)?;
            let cb = closed_orbit(h, disk, b, periods, cfg)?;
            let lk = linking_number_seeded(&ca, &cb, seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))?;
            Ok(weight * lk as f64 / (span * span))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = pairwise_sum(&values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    Ok(LinkingEstimate {
        mean_total: mean,
        std_error: (var / n).sqrt(),
        pairs,
        periods,
        orientation_sign: ORIENTATION_SIGN,
    })
}

/// A point of `D x S^1` from action-angle data.
pub fn extended_point(action: f64, angle: f64, t: f64) -> Result<ExtendedPoint> {
    Ok(ExtendedPoint::new(from_action_angle(ActionAngle::new(action, angle))?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{linear_rotation, scale_field, twist_field, zero_field, ActionProfile};
    use crate::flow::integrate;
    use crate::invariants::{helicity, QuadratureGrid};
    use approx::assert_abs_diff_eq;

    fn disk() -> Disk {
        Disk::unit()
    }

    /// Gauss linking integral, exact per segment pair (signed solid angle of
    /// the quadrilateral spanned by the two segments).
    fn gauss_linking(a: &ClosedPolyline, b: &ClosedPolyline) -> f64 {
        let unit = |v: Vec3| {
            let n = norm(v);
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let mut total = 0.0;
        for i in 0..a.len() {
            let (p1, p2) = a.segment(i);
            for j in 0..b.len() {
                let (p3, p4) = b.segment(j);
                let (r13, r14, r23, r24) = (sub(p3, p1), sub(p4, p1), sub(p3, p2), sub(p4, p2));
                let n1 = unit(cross(r13, r14));
                let n2 = unit(cross(r14, r24));
                let n3 = unit(cross(r24, r23));
                let n4 = unit(cross(r23, r13));
                let omega = dot(n1, n2).clamp(-1.0, 1.0).asin()
                    + dot(n2, n3).clamp(-1.0, 1.0).asin()
                    + dot(n3, n4).clamp(-1.0, 1.0).asin()
                    + dot(n4, n1).clamp(-1.0, 1.0).asin();
                let sign = dot(cross(sub(p4, p3), sub(p2, p1)), r13).signum();
                total += omega * sign;
            }
        }
        total / (4.0 * PI)
    }

    fn circle(center: Vec3, u: Vec3, v: Vec3, r: f64, n: usize) -> ClosedPolyline {
        let pts = (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                let (s, c) = a.sin_cos();
                [
                    center[0] + r * (c * u[0] + s * v[0]),
                    center[1] + r * (c * u[1] + s * v[1]),
                    center[2] + r * (c * u[2] + s * v[2]),
                ]
            })
            .collect();
        ClosedPolyline::new(pts).unwrap()
    }

    fn orbit(h: &HamiltonianField, action: f64, angle: f64, t0: f64, periods: usize) -> ClosedPolyline {
        closed_orbit(h, disk(), extended_point(action, angle, t0).unwrap(), periods, &IntegratorConfig::default()).unwrap()
    }

    #[test]
    fn hopf_link_matches_gauss_integral() {
        let a = circle([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 60);
        let b = circle([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, 60);
        let lk = linking_number(&a, &b).unwrap();
        assert_eq!(lk.abs(), 1);
        assert_abs_diff_eq!(gauss_linking(&a, &b), lk as f64, epsilon = 1e-9);
        let far = circle([5.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, 60);
        assert_eq!(linking_number(&a, &far).unwrap(), 0);
    }

    #[test]
    fn projection_seed_does_not_matter() {
        let h = linear_rotation(0.3, disk());
        let a = orbit(&h, 0.2, 0.1, 0.0, 4);
        let b = orbit(&h, 0.7, 2.0, 1.3, 4);
        let base = linking_number(&a, &b).unwrap();
        for seed in 0..8 {
            assert_eq!(linking_number_seeded(&a, &b, seed).unwrap(), base);
        }
        assert_abs_diff_eq!(gauss_linking(&a, &b), base as f64, epsilon = 1e-6);
    }

    #[test]
    fn vertical_fibers_are_unlinked() {
        let h = zero_field(disk());
        let a = orbit(&h, 0.3, 0.0, 0.0, 1);
        let b = orbit(&h, 0.6, 2.0, 0.5, 1);
        assert_eq!(linking_number(&a, &b).unwrap(), 0);
    }

    #[test]
    fn helical_orbits_link_once_per_period_squared() {
        let h = linear_rotation(1.0, disk());
        let one = linking_number(&orbit(&h, 0.3, 0.0, 0.0, 1), &orbit(&h, 0.6, 0.0, 0.0, 1)).unwrap();
        assert_eq!(one.abs(), 1);
        let two = linking_number(&orbit(&h, 0.3, 0.0, 0.0, 2), &orbit(&h, 0.6, 0.0, 0.0, 2)).unwrap();
        assert_eq!(two, 4 * one);
        let a = orbit(&h, 0.3, 0.0, 0.0, 2);
        let b = orbit(&h, 0.6, 0.0, 0.0, 2);
        assert_abs_diff_eq!(gauss_linking(&a, &b), two as f64, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_on_random_pairs() {
        let twist = twist_field(ActionProfile::polynomial(1.0, vec![0.0, 0.7, 1.0]), disk());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = uniform_point(&mut rng, disk(), TAU).unwrap();
            let b = uniform_point(&mut rng, disk(), TAU).unwrap();
            let cfg = IntegratorConfig::default();
            let ca = closed_orbit(&twist, disk(), a, 4, &cfg).unwrap();
            let cb = closed_orbit(&twist, disk(), b, 4, &cfg).unwrap();
            assert_eq!(linking_number(&ca, &cb).unwrap(), linking_number(&cb, &ca).unwrap());
        }
    }

    #[test]
    fn closure_of_periodic_orbit_is_trivial() {
        let h = linear_rotation(1.0, disk());
        let x0 = from_action_angle(ActionAngle::new(0.5, 0.3)).unwrap();
        let traj = integrate(&h, x0, 0.0, 2.0 * TAU, &IntegratorConfig::default()).unwrap();
        let closed = close_trajectory(&traj, disk(), TAU).unwrap();
        assert!(closed.closure_length < 1e-9);
        assert_abs_diff_eq!(closed.t_degree(TAU), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_turn_closure() {
        let h = linear_rotation(0.25, disk());
        let x0 = from_action_angle(ActionAngle::new(0.5, 0.0)).unwrap();
        let traj = integrate(&h, x0, 0.0, TAU, &IntegratorConfig::default()).unwrap();
        let closed = close_trajectory(&traj, disk(), TAU).unwrap();
        let first_closure = closed.points[closed.trajectory_len];
        assert_abs_diff_eq!(first_closure.t, TAU, epsilon = 1e-12);
        let end = to_action_angle(traj.end().phase());
        assert_abs_diff_eq!(end.angle, PI / 2.0, epsilon = 1e-9);
        // a quarter of the circle of radius 1 at constant action
        assert_abs_diff_eq!(closed.closure_length, PI / 2.0, epsilon = 1e-8);
        let last = to_action_angle(closed.points.last().unwrap().phase());
        assert_abs_diff_eq!(wrap_angle(last.angle), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(closed.t_degree(TAU), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closure_rejects_partial_periods_and_escapes() {
        let h = linear_rotation(1.0, disk());
        let x0 = from_action_angle(ActionAngle::new(0.5, 0.0)).unwrap();
        let traj = integrate(&h, x0, 0.0, 3.0, &IntegratorConfig::default()).unwrap();
        assert!(matches!(close_trajectory(&traj, disk(), TAU), Err(Error::InvalidArgument(_))));
        let full = integrate(&h, x0, 0.0, TAU, &IntegratorConfig::default()).unwrap();
        let small = Disk::new(0.25).unwrap();
        assert!(matches!(close_trajectory(&full, small, TAU), Err(Error::EndpointOutsideDisk { .. })));
    }

    #[test]
    fn zero_field_estimate_is_exactly_zero() {
        let est = asymptotic_linking(&zero_field(disk()), disk(), 4, 16, 1).unwrap();
        assert_eq!(est.mean_total, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn calibrated_estimate_for_linear_rotation() {
        let h = linear_rotation(1.0, disk());
        let twice = 2.0 * helicity(&h, disk(), QuadratureGrid::default()).unwrap().value;
        let est = asymptotic_linking(&h, disk(), 16, 64, 7).unwrap();
        assert!((est.calibrated() - twice).abs() <= 0.15 * twice.abs(), "{est:?} vs {twice}");
    }

    #[test]
    fn orientation_calibration() {
        // every pair of linear(1) orbits links exactly periods^2 times
        let h = linear_rotation(1.0, disk());
        let est = asymptotic_linking(&h, disk(), 4, 16, 2).unwrap();
        assert_abs_diff_eq!(est.mean_total, 4.0 * PI * PI, epsilon = 1e-9);
        assert_eq!(est.orientation_sign, ORIENTATION_SIGN);
        assert_eq!(ORIENTATION_SIGN, -1.0);
    }

    #[test]
    fn closure_bias_shrinks_with_periods() {
        let h = linear_rotation(0.3, disk());
        let twice = 2.0 * helicity(&h, disk(), QuadratureGrid::default()).unwrap().value;
        let errors: Vec<f64> = [4usize, 8, 16]
            .iter()
            .map(|&periods| {
                let sum: f64 = (0..3)
                    .map(|seed| asymptotic_linking(&h, disk(), periods, 16, seed).unwrap().calibrated())
                    .sum();
                (sum / 3.0 - twice).abs()
            })
            .collect();
        assert!(errors[1] <= errors[0] && errors[2] <= errors[1], "{errors:?}");
    }

    #[test]
    fn twist_estimate_tracks_helicity() {
        let h = twist_field(ActionProfile::polynomial(1.0, vec![0.0, -0.5, 1.0]), disk());
        let twice = 2.0 * helicity(&h, disk(), QuadratureGrid::default()).unwrap().value;
        let est = asymptotic_linking(&h, disk(), 16, 64, 11).unwrap();
        let tol = 0.15 * twice.abs() + 3.0 * est.std_error;
        assert!((est.calibrated() - twice).abs() <= tol, "{est:?} vs {twice}");
    }

    #[test]
    fn invariant_under_time_rescaling() {
        let h = linear_rotation(1.0, disk());
        let a = asymptotic_linking(&h, disk(), 8, 16, 5).unwrap();
        let b = asymptotic_linking(&scale_field(&h, 2.0).unwrap(), disk(), 8, 16, 5).unwrap();
        let tol = 3.0 * (a.std_error + b.std_error) + 1e-9 * a.mean_total.abs();
        assert!((a.mean_total - b.mean_total).abs() <= tol, "{a:?} {b:?}");
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let h = twist_field(ActionProfile::polynomial(1.0, vec![0.0, 0.3, 0.5]), disk());
        let run = |workers: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(|| asymptotic_linking(&h, disk(), 4, 16, 9).unwrap())
        };
        let one = run(1);
        let three = run(3);
        assert_eq!(one.mean_total.to_bits(), three.mean_total.to_bits());
        assert_eq!(one.std_error.to_bits(), three.std_error.to_bits());
    }

    #[test]
    fn rejects_small_runs() {
        let h = linear_rotation(1.0, disk());
        assert!(asymptotic_linking(&h, disk(), 3, 16, 0).is_err());
        assert!(asymptotic_linking(&h, disk(), 4, 15, 0).is_err());
    }
}
