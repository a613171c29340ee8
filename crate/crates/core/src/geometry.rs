//! Phase-space coordinates, the invariant disk, and the polar action-angle chart.
//!
//! The chart is `p = sqrt(2I) cos(phi)`, `q = sqrt(2I) sin(phi)`, so that
//! `dI ^ dphi = dp ^ dq` and the Hamiltonian `H = omega * I` advances the
//! angle at rate `+omega` under `p' = -H_q`, `q' = H_p`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasePoint {
    pub p: f64,
    pub q: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    /// Action `(p^2 + q^2) / 2`.
    #[inline]
    pub fn action(self) -> f64 {
        0.5 * (self.p * self.p + self.q * self.q)
    }

    pub fn distance(self, other: PhasePoint) -> f64 {
        (self.p - other.p).hypot(self.q - other.q)
    }

    /// Rotates the point by `angle` in the direction of increasing `phi`.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            p: c * self.p - s * self.q,
            q: s * self.p + c * self.q,
        }
    }

    pub fn is_finite(self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }
}

/// A point of the extended phase space; `t` is read modulo the field period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtendedPoint {
    pub p: f64,
    pub q: f64,
    pub t: f64,
}

impl ExtendedPoint {
    pub fn new(x: PhasePoint, t: f64) -> Self {
        Self { p: x.p, q: x.q, t }
    }

    pub fn phase(self) -> PhasePoint {
        PhasePoint::new(self.p, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionAngle {
    pub action: f64,
    /// In `[0, 2 pi)`.
    pub angle: f64,
}

impl ActionAngle {
    pub fn new(action: f64, angle: f64) -> Self {
        Self { action, angle }
    }
}

/// The invariant disk `I <= I0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    i0: f64,
}

impl Disk {
    pub fn new(i0: f64) -> Result<Self> {
        if i0.is_finite() && i0 > 0.0 {
            Ok(Self { i0 })
        } else {
            Err(Error::InvalidArgument(format!(
                "disk action radius must be positive and finite, got {i0}"
            )))
        }
    }

    pub fn unit() -> Self {
        Self { i0: 1.0 }
    }

    #[inline]
    pub fn i0(self) -> f64 {
        self.i0
    }

    /// Euclidean radius `sqrt(2 I0)`.
    pub fn radius(self) -> f64 {
        (2.0 * self.i0).sqrt()
    }

    /// Symplectic area `2 pi I0`.
    pub fn area(self) -> f64 {
        disk_area(self)
    }

    /// The helicity lattice spacing `S(D)^2 / 2`.
    pub fn lattice_unit(self) -> f64 {
        let s = self.area();
        0.5 * s * s
    }

    pub fn contains(self, x: PhasePoint, rel_tol: f64) -> bool {
        x.action() <= self.i0 * (1.0 + rel_tol)
    }

    pub fn boundary_point(self, angle: f64) -> PhasePoint {
        from_action_angle(ActionAngle::new(self.i0, angle)).expect("I0 > 0")
    }
}

pub fn disk_area(d: Disk) -> f64 {
    TAU * d.i0
}

pub fn to_action_angle(x: PhasePoint) -> ActionAngle {
    let action = x.action();
    if action == 0.0 {
        return ActionAngle::new(0.0, 0.0);
    }
    let mut angle = x.q.atan2(x.p);
    if angle < 0.0 {
        angle += TAU;
    }
    // atan2 can return values that round up to exactly 2 pi after the shift.
    if angle >= TAU {
        angle = 0.0;
    }
    ActionAngle::new(action, angle)
}

pub fn from_action_angle(a: ActionAngle) -> Result<PhasePoint> {
    if a.action < 0.0 || a.action.is_nan() {
        return Err(Error::NegativeAction(a.action));
    }
    let r = (2.0 * a.action).sqrt();
    let (s, c) = a.angle.sin_cos();
    Ok(PhasePoint::new(r * c, r * s))
}

/// Radical inverse of `index` in the given prime base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Deterministic low-discrepancy points, uniform with respect to area, in the
/// open disk. Uses the (2, 3) Halton sequence mapped through `I = I0 u`,
/// `phi = 2 pi v`, skipping the origin.
pub fn disk_samples(disk: Disk, count: usize) -> Vec<PhasePoint> {
    (1..=count as u64)
        .map(|k| {
            let u = radical_inverse(k, 2);
            let v = radical_inverse(k, 3);
            from_action_angle(ActionAngle::new(disk.i0 * u, TAU * v)).expect("u >= 0")
        })
        .collect()
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(delta: f64) -> f64 {
    let mut d = delta.rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn center_maps_to_zero_angle() {
        let a = to_action_angle(PhasePoint::ORIGIN);
        assert_eq!(a, ActionAngle::new(0.0, 0.0));
        let x = from_action_angle(ActionAngle::new(0.0, 1.234)).unwrap();
        assert_eq!(x.p.abs() + x.q.abs(), 0.0);
    }

    #[test]
    fn chart_values() {
        let a = to_action_angle(PhasePoint::new(1.0, 0.0));
        assert_abs_diff_eq!(a.action, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a.angle, 0.0, epsilon = 1e-15);

        let a = to_action_angle(PhasePoint::new(0.0, 1.0));
        assert_abs_diff_eq!(a.action, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a.angle, PI / 2.0, epsilon = 1e-15);

        let x = from_action_angle(ActionAngle::new(0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(x.p, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.q, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_action_rejected() {
        assert_eq!(
            from_action_angle(ActionAngle::new(-0.1, 0.0)),
            Err(Error::NegativeAction(-0.1))
        );
    }

    #[test]
    fn area_values() {
        for (i0, want) in [(1.0, TAU), (0.5, PI), (2.0, 2.0 * TAU)] {
            assert_eq!(disk_area(Disk::new(i0).unwrap()), want);
        }
        assert!(Disk::new(0.0).is_err());
        assert!(Disk::new(-1.0).is_err());
    }

    #[test]
    fn round_trip_hundred_points() {
        let mut worst: f64 = 0.0;
        for x in disk_samples(Disk::new(3.0).unwrap(), 100) {
            let y = from_action_angle(to_action_angle(x)).unwrap();
            worst = worst.max(x.distance(y));
        }
        assert!(worst < 1e-12, "round trip error {worst}");
    }

    #[test]
    fn disk_samples_stay_inside() {
        let d = Disk::new(0.7).unwrap();
        let pts = disk_samples(d, 500);
        assert!(pts.iter().all(|x| x.action() < d.i0()));
        // Area-uniform: roughly half the points in I < I0/2.
        let inner = pts.iter().filter(|x| x.action() < 0.35).count();
        assert!((240..=260).contains(&inner), "{inner}");
    }

    proptest! {
        #[test]
        fn chart_round_trip(action in 1e-6f64..10.0, angle in 0.0f64..TAU) {
            let x = from_action_angle(ActionAngle::new(action, angle)).unwrap();
            let a = to_action_angle(x);
            prop_assert!((a.action - action).abs() < 1e-12 * action.max(1.0));
            prop_assert!(wrap_angle(a.angle - angle).abs() < 1e-9);
        }

        #[test]
        fn chart_is_area_preserving(action in 0.05f64..5.0, angle in 0.0f64..TAU) {
            let h = 1e-6;
            let f = |i: f64, a: f64| from_action_angle(ActionAngle::new(i, a)).unwrap();
            let di_p = (f(action + h, angle).p - f(action - h, angle).p) / (2.0 * h);
            let di_q = (f(action + h, angle).q - f(action - h, angle).q) / (2.0 * h);
            let da_p = (f(action, angle + h).p - f(action, angle - h).p) / (2.0 * h);
            let da_q = (f(action, angle + h).q - f(action, angle - h).q) / (2.0 * h);
            // d(p, q) / d(I, phi)
            let det = di_p * da_q - da_p * di_q;
            prop_assert!((det - 1.0).abs() < 1e-6, "det = {}", det);
        }
    }
}
