//! Helicity `int H~ dp dq dt` over the solid torus `D x S^1` and related
//! integrals.
//!
//! Quadrature runs in action-angle coordinates, where `dp dq = dI dphi` and
//! the disk is the box `[0, I0] x [0, 2 pi)`: Gauss–Legendre in the action
//! (split at the field's action breaks), the periodic trapezoid rule in the
//! angle, and in time either the periodic trapezoid rule (smooth fields) or
//! Gauss–Legendre on every panel between time breaks. Work is spread over
//! time nodes and summed pairwise in node order, so values are bit-identical
//! for any number of workers.
//!
//! Sign convention: the measure is positive, so `H = omega (I - I0)` on the
//! unit disk has helicity `-2 pi^2 omega` over one `2 pi` period.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{normalize, HamiltonianField, NormalizedField};
use crate::flow::{map_distance, IntegratorConfig, PoincareMap};
use crate::geometry::{from_action_angle, ActionAngle, Disk, PhasePoint};
use crate::quadrature::{pairwise_sum, Rule};

/// Tolerance of the Calabi boundary condition (value and gradient).
pub const CALABI_BOUNDARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureGrid {
    pub n_action: usize,
    pub n_angle: usize,
    /// Nodes per smooth time panel.
    pub n_time: usize,
}

impl QuadratureGrid {
    pub const MIN_NODES: usize = 4;

    pub fn new(n_action: usize, n_angle: usize, n_time: usize) -> Result<Self> {
        if n_action < Self::MIN_NODES || n_angle < Self::MIN_NODES || n_time < Self::MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "quadrature grid needs at least {} nodes per axis, got {n_action}x{n_angle}x{n_time}",
                Self::MIN_NODES
            )));
        }
        Ok(Self {
            n_action,
            n_angle,
            n_time,
        })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    /// Half resolution along every axis, floored at the minimum.
    pub fn coarsened(self) -> Self {
        let half = |n: usize| (n / 2).max(Self::MIN_NODES);
        Self {
            n_action: half(self.n_action),
            n_angle: half(self.n_angle),
            n_time: half(self.n_time),
        }
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self {
            n_action: 64,
            n_angle: 64,
            n_time: 64,
        }
    }
}

impl std::fmt::Display for QuadratureGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.n_action, self.n_angle, self.n_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelicityResult {
    pub value: f64,
    pub grid: QuadratureGrid,
    /// `|value - value on the coarsened grid|`.
    pub refinement_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationReport {
    /// `helicity(H1) - helicity(H2)`.
    pub delta: f64,
    /// `S(D)^2 / 2`.
    pub lattice_unit: f64,
    pub n_nearest: i64,
    pub residual: f64,
    /// Measured distance between the two period maps.
    pub map_distance: f64,
}

/// How the "same period map" precondition of [`quantization_check`] is verified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCheck {
    pub samples: usize,
    pub tolerance: f64,
    pub config: IntegratorConfig,
}

impl Default for MapCheck {
    fn default() -> Self {
        Self {
            samples: 50,
            tolerance: 1e-6,
            config: IntegratorConfig::default(),
        }
    }
}

fn action_rule(disk: Disk, breaks: &[f64], n: usize) -> Rule {
    let mut edges = vec![0.0];
    edges.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < disk.i0()));
    edges.push(disk.i0());
    Rule::composite_gauss(&edges, n)
}

fn time_rule(h: &HamiltonianField, n: usize) -> Rule {
    let period = h.period();
    let breaks = h.time_breaks();
    if breaks.is_empty() {
        return Rule::periodic(0.0, period, n);
    }
    let mut edges = breaks.clone();
    edges.push(breaks[0] + period);
    Rule::composite_gauss(&edges, n)
}

/// `int_0^P int_D f(x, t) dp dq dt` for a field's period and break structure.
fn solid_torus_integral(
    h: &HamiltonianField,
    disk: Disk,
    grid: QuadratureGrid,
    f: impl Fn(PhasePoint, f64) -> f64 + Sync,
) -> f64 {
    let actions = action_rule(disk, h.action_breaks(), grid.n_action);
    let angles = Rule::periodic(0.0, TAU, grid.n_angle);
    let times = time_rule(h, grid.n_time);

    let mut points = Vec::with_capacity(actions.len() * angles.len());
    for (i, wi) in actions.nodes.iter().zip(&actions.weights) {
        for (a, wa) in angles.nodes.iter().zip(&angles.weights) {
            let x = from_action_angle(ActionAngle::new(*i, *a)).expect("Gauss nodes are positive");
            points.push((x, wi * wa));
        }
    }
    let slices: Vec<f64> = times
        .nodes
        .par_iter()
        .zip(times.weights.par_iter())
        .map(|(&t, &wt)| {
            let terms: Vec<f64> = points.iter().map(|&(x, w)| w * f(x, t)).collect();
            wt * pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&slices)
}

fn normalized_integral(n: &NormalizedField, grid: QuadratureGrid) -> f64 {
    solid_torus_integral(n.base(), n.disk(), grid, |x, t| n.value(x, t))
}

pub fn helicity(h: &HamiltonianField, disk: Disk, grid: QuadratureGrid) -> Result<HelicityResult> {
    let n = normalize(h, disk)?;
    let value = normalized_integral(&n, grid);
    let coarse = normalized_integral(&n, grid.coarsened());
    Ok(HelicityResult {
        value,
        grid,
        refinement_delta: (value - coarse).abs(),
    })
}

/// `int (p H~_p - H~) dp dq dt`, the integral of the 3-form built from
/// `p dq - H~ dt`. Integrating `p H~_p` by parts against the vanishing
/// boundary values gives `form_helicity = -2 helicity`.
pub fn form_helicity(h: &HamiltonianField, disk: Disk, grid: QuadratureGrid) -> Result<f64> {
    let n = normalize(h, disk)?;
    Ok(solid_torus_integral(h, disk, grid, |x, t| {
        x.p * n.gradient(x, t).dp - n.value(x, t)
    }))
}

/// The helicity of a field whose normalized value and gradient both vanish on
/// the boundary torus, i.e. the Calabi invariant of its period map.
pub fn calabi(h: &HamiltonianField, disk: Disk, grid: QuadratureGrid) -> Result<HelicityResult> {
    let n = normalize(h, disk)?;
    let mut worst_value: f64 = 0.0;
    let mut worst_gradient: f64 = 0.0;
    for t in crate::fields::normalize_boundary_times(h) {
        for a in crate::fields::normalize_boundary_angles() {
            let b = disk.boundary_point(a);
            worst_value = worst_value.max(n.value(b, t).abs());
            worst_gradient = worst_gradient.max(n.gradient(b, t).norm());
        }
    }
    if worst_value > CALABI_BOUNDARY_TOLERANCE || worst_gradient > CALABI_BOUNDARY_TOLERANCE {
        return Err(Error::BoundaryNotFlat {
            value: worst_value,
            gradient: worst_gradient,
        });
    }
    helicity(h, disk, grid)
}

/// Compares the helicities of two generating flows of the same disk map
/// against the lattice `Z * S(D)^2 / 2`.
pub fn quantization_check(
    h1: &HamiltonianField,
    h2: &HamiltonianField,
    disk: Disk,
    grid: QuadratureGrid,
    check: &MapCheck,
) -> Result<QuantizationReport> {
    let m1 = PoincareMap::new(h1.clone()).with_config(check.config);
    let m2 = PoincareMap::new(h2.clone()).with_config(check.config);
    let distance = map_distance(&m1, &m2, disk, check.samples)?;
    if !(distance <= check.tolerance) {
        return Err(Error::MapMismatch {
            distance,
            tolerance: check.tolerance,
        });
    }
    let delta = helicity(h1, disk, grid)?.value - helicity(h2, disk, grid)?.value;
    let lattice_unit = disk.lattice_unit();
    let n_nearest = (delta / lattice_unit).round();
    Ok(QuantizationReport {
        delta,
        lattice_unit,
        n_nearest: n_nearest as i64,
        residual: (delta - n_nearest * lattice_unit).abs(),
        map_distance: distance,
    })
}

/// The representative of `value + Z * unit` in `(-unit/2, unit/2]`.
pub fn lattice_reduce(value: f64, unit: f64) -> f64 {
    let shift = (value / unit - 0.5).ceil();
    value - shift * unit
}

/// Helicity of minimal absolute value among all flows with the same period
/// map: the helicity reduced modulo `S(D)^2 / 2`, ties going to the
/// non-negative representative.
pub fn generalized_calabi(h: &HamiltonianField, disk: Disk, grid: QuadratureGrid) -> Result<f64> {
    let value = helicity(h, disk, grid)?.value;
    Ok(lattice_reduce(value, disk.lattice_unit()))
}
