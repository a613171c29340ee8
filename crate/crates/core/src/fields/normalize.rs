use std::f64::consts::TAU;

use super::{Gradient, HamiltonianField};
use crate::error::{Error, Result};
use crate::geometry::{Disk, PhasePoint};

/// Allowed variation of `H` along the boundary circle, relative to
/// `max(1, max |H|)` on the boundary sample grid.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

const BOUNDARY_ANGLES: usize = 32;
const BOUNDARY_TIMES: usize = 32;

/// `H - offset(t)`, with `offset(t) = H(boundary reference point, t)`, so that
/// the normalized field vanishes on `dD x S^1`. The gradient is untouched.
#[derive(Debug, Clone)]
pub struct NormalizedField {
    base: HamiltonianField,
    disk: Disk,
    reference: PhasePoint,
}

impl NormalizedField {
    pub fn base(&self) -> &HamiltonianField {
        &self.base
    }

    pub fn disk(&self) -> Disk {
        self.disk
    }

    #[inline]
    pub fn offset(&self, t: f64) -> f64 {
        self.base.value(self.reference, t)
    }

    #[inline]
    pub fn value(&self, x: PhasePoint, t: f64) -> f64 {
        self.base.value(x, t) - self.offset(t)
    }

    #[inline]
    pub fn gradient(&self, x: PhasePoint, t: f64) -> Gradient {
        self.base.gradient(x, t)
    }

    pub fn period(&self) -> f64 {
        self.base.period()
    }
}

/// Boundary sample times: a uniform grid plus both sides of every time break.
pub(crate) fn boundary_times(h: &HamiltonianField) -> Vec<f64> {
    let period = h.period();
    let mut times: Vec<f64> = (0..BOUNDARY_TIMES)
        .map(|k| period * (k as f64 + 0.5) / BOUNDARY_TIMES as f64)
        .collect();
    for b in h.time_breaks() {
        times.push(b);
        times.push((b - 1e-9 * period).rem_euclid(period));
    }
    times
}

pub(crate) fn boundary_angles() -> impl Iterator<Item = f64> {
    (0..BOUNDARY_ANGLES).map(|k| TAU * k as f64 / BOUNDARY_ANGLES as f64)
}

pub fn normalize(h: &HamiltonianField, disk: Disk) -> Result<NormalizedField> {
    let reference = disk.boundary_point(0.0);
    let boundary: Vec<PhasePoint> = boundary_angles().map(|a| disk.boundary_point(a)).collect();
    let times = boundary_times(h);
    let mut scale: f64 = 1.0;
    let mut worst = (0.0, 0.0);
    for &t in &times {
        let h_ref = h.value(reference, t);
        scale = scale.max(h_ref.abs());
        for &b in &boundary {
            let dev = (h.value(b, t) - h_ref).abs();
            if dev > worst.0 {
                worst = (dev, t);
            }
        }
    }
    if worst.0 > BOUNDARY_TOLERANCE * scale {
        return Err(Error::BoundaryInhomogeneous {
            deviation: worst.0,
            time: worst.1,
        });
    }
    Ok(NormalizedField {
        base: h.clone(),
        disk,
        reference,
    })
}
