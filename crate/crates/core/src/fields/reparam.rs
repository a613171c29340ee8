//! Period-preserving monotone time changes `t = map(tau)` whose derivative
//! vanishes at `tau = 0` and `tau = pi`, used to smooth fields that jump at
//! those times.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use super::{is_standard_period, FieldFn, Gradient, HamiltonianField};
use crate::error::{Error, Result};
use crate::geometry::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeReparametrization {
    Identity,
    /// `tau - sin(2(tau - pi)) / 2`.
    C1,
    /// `tau - sin(2(tau - pi)) / 2 - sin^3(2(tau - pi)) / 12`.
    C3,
}

pub fn reparam_c1() -> TimeReparametrization {
    TimeReparametrization::C1
}

pub fn reparam_c3() -> TimeReparametrization {
    TimeReparametrization::C3
}

/// Splits `tau = m pi + u` with `|u| <= pi/2`. Both formulas are
/// `pi`-periodic in their correction term, and evaluating the correction in
/// `u` keeps it accurate near the junctions, where it is `O(u^3)` or `O(u^5)`.
#[inline]
fn split(tau: f64) -> (f64, f64) {
    let m = (tau / PI).round();
    (m * PI, tau - m * PI)
}

impl TimeReparametrization {
    /// Smoothness order produced at the junctions; 0 for the identity.
    pub fn order_k(self) -> u32 {
        match self {
            Self::Identity => 0,
            Self::C1 => 1,
            Self::C3 => 3,
        }
    }

    pub fn map(self, tau: f64) -> f64 {
        if self == Self::Identity {
            return tau;
        }
        let (anchor, u) = split(tau);
        anchor + self.correction(u)
    }

    /// `map(m pi + u) - m pi` for `|u| <= pi/2`; odd and increasing in `u`.
    /// Near `u = 0` the closed form cancels catastrophically, so the Taylor
    /// series in `x = 2u` is summed instead.
    fn correction(self, u: f64) -> f64 {
        if self == Self::Identity {
            return u;
        }
        if u.abs() < 0.5 {
            return self.correction_series(2.0 * u);
        }
        let (s, c) = u.sin_cos();
        let c1 = u - s * c;
        if self == Self::C1 {
            return c1;
        }
        let s2 = 2.0 * s * c;
        c1 - s2 * s2 * s2 / 12.0
    }

    // (x - sin x)/2 and sin^3 x = (3 sin x - sin 3x)/4, term by term.
    fn correction_series(self, x: f64) -> f64 {
        let x2 = x * x;
        let mut pow = x; // x^n / n!
        let mut pow3 = 3.0 * x; // (3x)^n / n!
        let mut sum = 0.0;
        let mut sign = -1.0;
        for n in (3..=33).step_by(2) {
            let k = ((n - 1) * n) as f64;
            pow *= x2 / k;
            pow3 *= 9.0 * x2 / k;
            // coefficient of x^n in sin x is sign / n!
            let mut term = -0.5 * sign * pow;
            if self == Self::C3 {
                term -= sign * (3.0 * pow - pow3) / 48.0;
            }
            sum += term;
            sign = -sign;
        }
        sum
    }

    /// `dt/dtau`, in the factored forms `2 sin^2 u` and
    /// `2 sin^4 u (1 + 2 cos^2 u)`.
    pub fn derivative(self, tau: f64) -> f64 {
        let (_, u) = split(tau);
        let (s, c) = u.sin_cos();
        match self {
            Self::Identity => 1.0,
            Self::C1 => 2.0 * s * s,
            Self::C3 => {
                let s2 = s * s;
                2.0 * s2 * s2 * (1.0 + 2.0 * c * c)
            }
        }
    }

    /// Solves `map(tau) = t` by bisection on the local offset from the
    /// nearest multiple of `pi`, where the correction is resolved even though
    /// `map` itself is flat to rounding near the junctions.
    pub fn inverse(self, t: f64) -> f64 {
        if self == Self::Identity {
            return t;
        }
        let (anchor, target) = split(t);
        let (mut lo, mut hi) = (-FRAC_PI_2, FRAC_PI_2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.correction(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        anchor + 0.5 * (lo + hi)
    }
}

struct Reparametrized {
    base: HamiltonianField,
    r: TimeReparametrization,
}

impl Reparametrized {
    /// `map(tau)`, kept strictly below the junction when `tau` is: the
    /// correction is far below rounding there, and a base field that jumps
    /// at the junction must still be read from the left.
    fn base_time(&self, tau: f64) -> f64 {
        let (anchor, u) = split(tau);
        let t = anchor + self.r.correction(u);
        if u < 0.0 && t >= anchor {
            anchor.next_down()
        } else {
            t
        }
    }
}

impl FieldFn for Reparametrized {
    fn value(&self, x: PhasePoint, tau: f64) -> f64 {
        let w = self.r.derivative(tau);
        if w == 0.0 {
            return 0.0;
        }
        w * self.base.value(x, self.base_time(tau))
    }

    fn gradient(&self, x: PhasePoint, tau: f64) -> Gradient {
        let w = self.r.derivative(tau);
        if w == 0.0 {
            return Gradient::ZERO;
        }
        self.base.gradient(x, self.base_time(tau)).scaled(w)
    }
}

/// `H'(x, tau) = map'(tau) H(x, map(tau))`. Its flow over `tau` is the flow
/// of `H` over `t = map(tau)`, so both have the same period map and the same
/// helicity. Jumps of `H` located where `map'` vanishes become junctions of
/// finite smoothness.
pub fn reparametrize(h: &HamiltonianField, r: TimeReparametrization) -> Result<HamiltonianField> {
    if r == TimeReparametrization::Identity {
        return Ok(h.clone());
    }
    if !is_standard_period(h.period()) {
        return Err(Error::InvalidArgument(format!(
            "reparametrization needs a 2 pi periodic field, got period {}",
            h.period()
        )));
    }
    let mut disc = Vec::new();
    let mut junc: Vec<f64> = h.junctions().iter().map(|&t| r.inverse(t)).collect();
    for &t in h.discontinuities() {
        let tau = r.inverse(t);
        if r.derivative(tau).abs() < 1e-12 {
            junc.push(tau);
        } else {
            disc.push(tau);
        }
    }
    let label = format!("reparam_c{}({})", r.order_k(), h.label());
    let mut out = HamiltonianField::new(label, h.period(), Arc::new(Reparametrized { base: h.clone(), r }))?
        .with_discontinuities(disc)
        .with_junctions(junc)
        .with_action_breaks(h.action_breaks().to_vec());
    if let Some(d) = h.invariant_disk() {
        out = out.with_invariant_disk(d);
    }
    if let Some((lo, hi)) = h.action_domain() {
        out = out.with_action_domain(lo, hi);
    }
    Ok(out)
}
