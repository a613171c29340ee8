//! Time-periodic Hamiltonian fields on the plane.
//!
//! A [`HamiltonianField`] is an immutable, cheaply clonable handle around an
//! evaluator plus the metadata the integrator and the quadrature need: the
//! period, the times where the field jumps or is only finitely smooth, and
//! the action levels where it has a kink.

mod builtin;
mod normalize;
mod reparam;

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

pub use builtin::{
    annulus_cap, lemma1_constant, lemma1_extension, linear_rotation, theorem2_piecewise,
    twist_field, zero_field, ActionProfile,
};
pub use normalize::{normalize, NormalizedField, BOUNDARY_TOLERANCE};
pub(crate) use normalize::{boundary_angles as normalize_boundary_angles, boundary_times as normalize_boundary_times};
pub use reparam::{reparam_c1, reparam_c3, reparametrize, TimeReparametrization};

use crate::error::{Error, Result};
use crate::geometry::{Disk, PhasePoint};

/// `(H_p, H_q)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gradient {
    pub dp: f64,
    pub dq: f64,
}

impl Gradient {
    pub const ZERO: Gradient = Gradient { dp: 0.0, dq: 0.0 };

    pub fn new(dp: f64, dq: f64) -> Self {
        Self { dp, dq }
    }

    pub fn scaled(self, s: f64) -> Self {
        Self::new(s * self.dp, s * self.dq)
    }

    pub fn norm(self) -> f64 {
        self.dp.hypot(self.dq)
    }
}

/// Evaluator behind a field. `t` is always reduced to `[0, period]` before
/// these are called.
pub trait FieldFn: Send + Sync {
    fn value(&self, x: PhasePoint, t: f64) -> f64;
    fn gradient(&self, x: PhasePoint, t: f64) -> Gradient;
}

struct ClosureField<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FieldFn for ClosureField<V, G>
where
    V: Fn(PhasePoint, f64) -> f64 + Send + Sync,
    G: Fn(PhasePoint, f64) -> Gradient + Send + Sync,
{
    fn value(&self, x: PhasePoint, t: f64) -> f64 {
        (self.value)(x, t)
    }

    fn gradient(&self, x: PhasePoint, t: f64) -> Gradient {
        (self.gradient)(x, t)
    }
}

#[derive(Clone)]
pub struct HamiltonianField {
    func: Arc<dyn FieldFn>,
    period: f64,
    discontinuities: Vec<f64>,
    junctions: Vec<f64>,
    action_breaks: Vec<f64>,
    action_domain: Option<(f64, f64)>,
    invariant_disk: Option<Disk>,
    label: String,
}

impl fmt::Debug for HamiltonianField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianField")
            .field("label", &self.label)
            .field("period", &self.period)
            .field("discontinuities", &self.discontinuities)
            .field("junctions", &self.junctions)
            .field("action_breaks", &self.action_breaks)
            .field("invariant_disk", &self.invariant_disk)
            .finish()
    }
}

fn sorted_times(mut times: Vec<f64>, period: f64) -> Vec<f64> {
    for t in times.iter_mut() {
        *t = t.rem_euclid(period);
        // Values within rounding of the period are the start of the next cycle.
        if (period - *t).abs() <= 1e-12 * period {
            *t = 0.0;
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * period);
    times
}

impl HamiltonianField {
    pub fn new(label: impl Into<String>, period: f64, func: Arc<dyn FieldFn>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "field period must be positive, got {period}"
            )));
        }
        Ok(Self {
            func,
            period,
            discontinuities: Vec::new(),
            junctions: Vec::new(),
            action_breaks: Vec::new(),
            action_domain: None,
            invariant_disk: None,
            label: label.into(),
        })
    }

    /// Builds a field from a value closure and its analytic gradient.
    pub fn from_fn<V, G>(label: impl Into<String>, period: f64, value: V, gradient: G) -> Result<Self>
    where
        V: Fn(PhasePoint, f64) -> f64 + Send + Sync + 'static,
        G: Fn(PhasePoint, f64) -> Gradient + Send + Sync + 'static,
    {
        Self::new(label, period, Arc::new(ClosureField { value, gradient }))
    }

    pub fn with_discontinuities(mut self, times: Vec<f64>) -> Self {
        self.discontinuities = sorted_times(times, self.period);
        self
    }

    pub fn with_junctions(mut self, times: Vec<f64>) -> Self {
        self.junctions = sorted_times(times, self.period);
        self
    }

    pub fn with_action_breaks(mut self, mut levels: Vec<f64>) -> Self {
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        self.action_breaks = levels;
        self
    }

    pub fn with_action_domain(mut self, lo: f64, hi: f64) -> Self {
        self.action_domain = Some((lo, hi));
        self
    }

    pub fn with_invariant_disk(mut self, disk: Disk) -> Self {
        self.invariant_disk = Some(disk);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Reinterprets the period. Only meaningful for autonomous fields or when
    /// the evaluator is already periodic with the new period.
    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "field period must be positive, got {period}"
            )));
        }
        self.period = period;
        self.discontinuities = sorted_times(std::mem::take(&mut self.discontinuities), period);
        self.junctions = sorted_times(std::mem::take(&mut self.junctions), period);
        Ok(self)
    }

    #[inline]
    fn reduce(&self, t: f64) -> f64 {
        t.rem_euclid(self.period)
    }

    /// Unchecked evaluation. At a discontinuity time the right limit is returned.
    #[inline]
    pub fn value(&self, x: PhasePoint, t: f64) -> f64 {
        self.func.value(x, self.reduce(t))
    }

    #[inline]
    pub fn gradient(&self, x: PhasePoint, t: f64) -> Gradient {
        self.func.gradient(x, self.reduce(t))
    }

    /// Evaluation that rejects points outside the declared action domain.
    pub fn evaluate(&self, x: PhasePoint, t: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.value(x, t))
    }

    pub fn evaluate_gradient(&self, x: PhasePoint, t: f64) -> Result<Gradient> {
        self.check_domain(x)?;
        Ok(self.gradient(x, t))
    }

    fn check_domain(&self, x: PhasePoint) -> Result<()> {
        if let Some((lo, hi)) = self.action_domain {
            let action = x.action();
            let slack = 1e-12 * hi.abs().max(1.0);
            if action < lo - slack || action > hi + slack {
                return Err(Error::OutsideDomain { action, lo, hi });
            }
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn discontinuities(&self) -> &[f64] {
        &self.discontinuities
    }

    pub fn junctions(&self) -> &[f64] {
        &self.junctions
    }

    pub fn action_breaks(&self) -> &[f64] {
        &self.action_breaks
    }

    pub fn action_domain(&self) -> Option<(f64, f64)> {
        self.action_domain
    }

    pub fn invariant_disk(&self) -> Option<Disk> {
        self.invariant_disk
    }

    /// Sorted union of discontinuities and junctions in `[0, period)`: the
    /// times where panels are split.
    pub fn time_breaks(&self) -> Vec<f64> {
        let mut all = self.discontinuities.clone();
        all.extend_from_slice(&self.junctions);
        sorted_times(all, self.period)
    }

    /// `H(R x, t)` for the rotation `R` by `angle`; same dynamics in rotated
    /// symplectic coordinates.
    pub fn rotated(&self, angle: f64) -> HamiltonianField {
        let base = self.clone();
        let inner = self.clone();
        let (s, c) = angle.sin_cos();
        let mut out = HamiltonianField::from_fn(
            format!("rotated({},{angle})", self.label),
            self.period,
            move |x, t| base.value(x.rotated(angle), t),
            move |x, t| {
                let g = inner.gradient(x.rotated(angle), t);
                Gradient::new(c * g.dp + s * g.dq, -s * g.dp + c * g.dq)
            },
        )
        .expect("period already validated");
        out.copy_metadata_from(self);
        out
    }

    /// Pointwise sum. Periods must agree.
    pub fn plus(&self, other: &HamiltonianField) -> Result<HamiltonianField> {
        if (self.period - other.period).abs() > 1e-12 * self.period {
            return Err(Error::InvalidArgument(format!(
                "cannot add fields with periods {} and {}",
                self.period, other.period
            )));
        }
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        let mut out = HamiltonianField::from_fn(
            format!("{}+{}", self.label, other.label),
            self.period,
            move |x, t| a.value(x, t) + b.value(x, t),
            move |x, t| {
                let (u, v) = (ga.gradient(x, t), gb.gradient(x, t));
                Gradient::new(u.dp + v.dp, u.dq + v.dq)
            },
        )?;
        let mut disc = self.discontinuities.clone();
        disc.extend_from_slice(&other.discontinuities);
        let mut junc = self.junctions.clone();
        junc.extend_from_slice(&other.junctions);
        let mut breaks = self.action_breaks.clone();
        breaks.extend_from_slice(&other.action_breaks);
        out = out
            .with_discontinuities(disc)
            .with_junctions(junc)
            .with_action_breaks(breaks);
        out.invariant_disk = match (self.invariant_disk, other.invariant_disk) {
            (Some(d), Some(e)) if d == e => Some(d),
            (Some(d), None) | (None, Some(d)) => Some(d),
            _ => None,
        };
        out.action_domain = match (self.action_domain, other.action_domain) {
            (Some((a0, a1)), Some((b0, b1))) => Some((a0.max(b0), a1.min(b1))),
            (d, None) | (None, d) => d,
        };
        Ok(out)
    }

    fn copy_metadata_from(&mut self, other: &HamiltonianField) {
        self.discontinuities = other.discontinuities.clone();
        self.junctions = other.junctions.clone();
        self.action_breaks = other.action_breaks.clone();
        self.action_domain = other.action_domain;
        self.invariant_disk = other.invariant_disk;
    }
}

/// `mu * H(x, mu t)` with period `period / mu`: the same orbits traversed
/// `mu` times faster.
pub fn scale_field(h: &HamiltonianField, mu: f64) -> Result<HamiltonianField> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale factor must be positive, got {mu}"
        )));
    }
    if mu == 1.0 {
        return Ok(h.clone());
    }
    let (a, b) = (h.clone(), h.clone());
    let mut out = HamiltonianField::from_fn(
        format!("scaled({},{mu})", h.label),
        h.period / mu,
        move |x, t| mu * a.value(x, mu * t),
        move |x, t| b.gradient(x, mu * t).scaled(mu),
    )?;
    out.copy_metadata_from(h);
    out.discontinuities = sorted_times(h.discontinuities.iter().map(|t| t / mu).collect(), out.period);
    out.junctions = sorted_times(h.junctions.iter().map(|t| t / mu).collect(), out.period);
    Ok(out)
}

pub(crate) fn is_standard_period(period: f64) -> bool {
    (period - TAU).abs() <= 1e-12 * TAU
}
