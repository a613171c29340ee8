use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use super::{is_standard_period, FieldFn, Gradient, HamiltonianField};
use crate::error::{Error, Result};
use crate::geometry::{Disk, PhasePoint};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A smooth function of the action together with its derivative.
#[derive(Clone)]
pub struct ActionProfile {
    value: ScalarFn,
    derivative: ScalarFn,
    label: String,
}

impl fmt::Debug for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActionProfile({})", self.label)
    }
}

impl ActionProfile {
    pub fn new<V, D>(label: impl Into<String>, value: V, derivative: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            label: label.into(),
        }
    }

    /// `sum_k coeffs[k] * (I - center)^k`.
    pub fn polynomial(center: f64, coeffs: Vec<f64>) -> Self {
        let label = format!(
            "poly[{}]",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("|")
        );
        let dcoeffs: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        let horner = |cs: &[f64], s: f64| cs.iter().rev().fold(0.0, |acc, c| acc * s + c);
        Self::new(
            label,
            move |i| horner(&coeffs, i - center),
            move |i| horner(&dcoeffs, i - center),
        )
    }

    #[inline]
    pub fn value(&self, action: f64) -> f64 {
        (self.value)(action)
    }

    #[inline]
    pub fn derivative(&self, action: f64) -> f64 {
        (self.derivative)(action)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

struct Twist {
    profile: ActionProfile,
}

impl FieldFn for Twist {
    fn value(&self, x: PhasePoint, _t: f64) -> f64 {
        self.profile.value(x.action())
    }

    fn gradient(&self, x: PhasePoint, _t: f64) -> Gradient {
        // dI/dp = p, dI/dq = q
        let d = self.profile.derivative(x.action());
        Gradient::new(d * x.p, d * x.q)
    }
}

/// Autonomous field `H = profile(I)`; its time-`T` map is the twist
/// `(I, phi) -> (I, phi + T * profile'(I))`.
pub fn twist_field(profile: ActionProfile, disk: Disk) -> HamiltonianField {
    let label = format!("twist({})", profile.label());
    HamiltonianField::new(label, TAU, Arc::new(Twist { profile }))
        .expect("2 pi is a valid period")
        .with_invariant_disk(disk)
}

/// `omega * (I - I0)`: rigid rotation at rate `omega`, zero on the boundary.
pub fn linear_rotation(omega: f64, disk: Disk) -> HamiltonianField {
    let i0 = disk.i0();
    twist_field(
        ActionProfile::new(format!("{omega}"), move |i| omega * (i - i0), move |_| omega),
        disk,
    )
    .with_label(format!("linear({omega})"))
}

pub fn zero_field(disk: Disk) -> HamiltonianField {
    HamiltonianField::from_fn("zero", TAU, |_, _| 0.0, |_, _| Gradient::ZERO)
        .expect("2 pi is a valid period")
        .with_invariant_disk(disk)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("annulus width must be positive, got {eps}")))
    }
}

/// `(n / 4 eps) (I0 + eps - I)^2` on the annulus `I0 <= I <= I0 + eps`.
///
/// Vanishes to first order on the outer circle. On the inner circle the value
/// is `n eps / 4` and `dH/dI = -n/2`.
pub fn annulus_cap(n: i64, i0: f64, eps: f64) -> Result<HamiltonianField> {
    check_eps(eps)?;
    let outer = Disk::new(i0 + eps)?;
    let k = n as f64 / (4.0 * eps);
    let value = move |x: PhasePoint, _t: f64| {
        let s = i0 + eps - x.action();
        k * s * s
    };
    let gradient = move |x: PhasePoint, _t: f64| {
        let d = -2.0 * k * (i0 + eps - x.action());
        Gradient::new(d * x.p, d * x.q)
    };
    Ok(HamiltonianField::from_fn(format!("annulus_cap({n},{i0},{eps})"), TAU, value, gradient)?
        .with_action_domain(i0, i0 + eps)
        .with_invariant_disk(outer))
}

/// The constant `c = n eps / 4 - n I0 / 2` that makes the inner linear piece
/// meet the annulus cap at `I = I0`.
pub fn lemma1_constant(n: i64, i0: f64, eps: f64) -> f64 {
    let n = n as f64;
    n * eps / 4.0 - n * i0 / 2.0
}

/// `n I / 2 + c` on `I <= I0`, the annulus cap on `I0 <= I <= I0 + eps`, and
/// zero beyond. Period `4 pi`, over which the inner disk turns by `2 pi n`.
///
/// The two pieces agree in value at `I0`; their action derivatives there are
/// `+n/2` and `-n/2`.
pub fn lemma1_extension(n: i64, i0: f64, eps: f64) -> Result<HamiltonianField> {
    check_eps(eps)?;
    let outer = Disk::new(i0 + eps)?;
    Disk::new(i0)?;
    let c = lemma1_constant(n, i0, eps);
    let half_n = n as f64 / 2.0;
    let k = n as f64 / (4.0 * eps);
    let profile = ActionProfile::new(
        format!("lemma1({n},{eps})"),
        move |i| {
            if i <= i0 {
                half_n * i + c
            } else if i <= i0 + eps {
                let s = i0 + eps - i;
                k * s * s
            } else {
                0.0
            }
        },
        move |i| {
            if i <= i0 {
                half_n
            } else if i <= i0 + eps {
                -2.0 * k * (i0 + eps - i)
            } else {
                0.0
            }
        },
    );
    Ok(twist_field(profile, outer)
        .with_period(2.0 * TAU)?
        .with_action_breaks(vec![i0])
        .with_label(format!("lemma1({n},{i0},{eps})")))
}

struct Theorem2Piecewise {
    base: HamiltonianField,
    slope: f64,
    i0: f64,
}

impl FieldFn for Theorem2Piecewise {
    fn value(&self, x: PhasePoint, t: f64) -> f64 {
        if t < PI {
            2.0 * self.base.value(x, 2.0 * t)
        } else {
            self.slope * (x.action() - self.i0)
        }
    }

    fn gradient(&self, x: PhasePoint, t: f64) -> Gradient {
        if t < PI {
            self.base.gradient(x, 2.0 * t).scaled(2.0)
        } else {
            Gradient::new(self.slope * x.p, self.slope * x.q)
        }
    }
}

/// The piecewise-in-time field: `2 H1(x, 2t)` on `[0, pi)` (the whole
/// `H1` flow run at double speed) followed by `2n (I - I0)` on `[pi, 2 pi)`,
/// which turns the disk `n` full times. The period map equals that of `H1`.
pub fn theorem2_piecewise(h1: &HamiltonianField, n: i64, disk: Disk) -> Result<HamiltonianField> {
    if !is_standard_period(h1.period()) {
        return Err(Error::InvalidArgument(format!(
            "base field must have period 2 pi, got {}",
            h1.period()
        )));
    }
    let mut disc = vec![0.0, PI];
    disc.extend(h1.discontinuities().iter().map(|t| t / 2.0));
    let junc = h1.junctions().iter().map(|t| t / 2.0).collect();
    let func = Theorem2Piecewise {
        base: h1.clone(),
        slope: 2.0 * n as f64,
        i0: disk.i0(),
    };
    Ok(HamiltonianField::new(format!("theorem2({},{n})", h1.label()), TAU, Arc::new(func))?
        .with_discontinuities(disc)
        .with_junctions(junc)
        .with_action_breaks(h1.action_breaks().to_vec())
        .with_invariant_disk(disk))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::gradient_mismatch;
    use super::*;
    use crate::geometry::{from_action_angle, ActionAngle};
    use approx::assert_abs_diff_eq;

    fn disk() -> Disk {
        Disk::new(1.0).unwrap()
    }

    fn at(action: f64, angle: f64) -> PhasePoint {
        from_action_angle(ActionAngle::new(action, angle)).unwrap()
    }

    #[test]
    fn linear_rotation_values() {
        let zero = linear_rotation(0.0, disk());
        assert_eq!(zero.value(at(0.4, 1.0), 0.3), 0.0);
        assert_eq!(zero.gradient(at(0.4, 1.0), 0.3), Gradient::ZERO);

        let h = linear_rotation(1.0, disk());
        assert_abs_diff_eq!(h.value(at(0.5, 2.0), 0.0), -0.5, epsilon = 1e-15);
        let g = h.gradient(PhasePoint::new(1.0, 0.0), 0.0);
        assert_eq!((g.dp, g.dq), (1.0, 0.0));
    }

    #[test]
    fn twist_examples() {
        let d = disk();
        let lin = twist_field(ActionProfile::polynomial(1.0, vec![0.0, 1.0]), d);
        let reference = linear_rotation(1.0, d);
        let x = at(0.37, 0.2);
        assert_abs_diff_eq!(lin.value(x, 0.0), reference.value(x, 0.0), epsilon = 1e-15);

        let sq = twist_field(ActionProfile::polynomial(1.0, vec![0.0, 0.0, 1.0]), d);
        let b = d.boundary_point(0.9);
        assert_abs_diff_eq!(sq.value(b, 0.0), 0.0, epsilon = 1e-15);
        assert!(sq.gradient(b, 0.0).norm() < 1e-14);

        let sine = twist_field(ActionProfile::new("sin", |i| (i - 1.0).sin(), |i| (i - 1.0).cos()), d);
        let x = PhasePoint::new(0.6, -0.3);
        let want = (x.action() - 1.0).cos() * x.p;
        assert_abs_diff_eq!(sine.gradient(x, 0.0).dp, want, epsilon = 1e-15);
    }

    #[test]
    fn annulus_cap_values() {
        for n in [1i64, 2, -3] {
            let eps = 0.1;
            let h = annulus_cap(n, 1.0, eps).unwrap();
            let outer = at(1.0 + eps, 0.4);
            assert_abs_diff_eq!(h.evaluate(outer, 0.0).unwrap(), 0.0, epsilon = 1e-15);
            assert!(h.evaluate_gradient(outer, 0.0).unwrap().norm() < 1e-14);
            let inner = at(1.0, 0.4);
            assert_abs_diff_eq!(h.evaluate(inner, 0.0).unwrap(), n as f64 * eps / 4.0, epsilon = 1e-14);
            // dH/dI = grad . (p, q) / (2 I)
            let g = h.gradient(inner, 0.0);
            let dhdi = (g.dp * inner.p + g.dq * inner.q) / (2.0 * inner.action());
            assert_abs_diff_eq!(dhdi.abs(), (n as f64).abs() / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(dhdi, -(n as f64) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn annulus_cap_rejects_outside_points() {
        let h = annulus_cap(1, 1.0, 0.1).unwrap();
        assert!(matches!(h.evaluate(at(0.5, 0.0), 0.0), Err(Error::OutsideDomain { .. })));
        assert!(matches!(h.evaluate(at(1.2, 0.0), 0.0), Err(Error::OutsideDomain { .. })));
        assert!(annulus_cap(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn lemma1_constant_and_continuity() {
        assert_abs_diff_eq!(lemma1_constant(1, 1.0, 0.1), -0.475, epsilon = 1e-15);
        for n in [1i64, 2, -3] {
            let eps = 0.1;
            let h = lemma1_extension(n, 1.0, eps).unwrap();
            let inner = h.value(at(1.0, 0.0), 0.0);
            let outer = h.value(at(1.0 + 1e-13, 0.0), 0.0);
            assert_abs_diff_eq!(inner, n as f64 * eps / 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(inner, outer, epsilon = 1e-12);
            let rim = at(1.0 + eps, 2.0);
            assert_abs_diff_eq!(h.value(rim, 0.0), 0.0, epsilon = 1e-14);
            assert!(h.gradient(rim, 0.0).norm() < 1e-13);
            assert!((h.period() - 2.0 * TAU).abs() < 1e-15);
        }
    }

    #[test]
    fn theorem2_piecewise_values() {
        let d = disk();
        let h1 = linear_rotation(0.3, d);
        let h = theorem2_piecewise(&h1, 2, d).unwrap();
        let x = at(0.4, 1.0);
        assert_abs_diff_eq!(h.value(x, PI / 2.0), 2.0 * h1.value(x, PI), epsilon = 1e-15);
        assert_abs_diff_eq!(h.value(d.boundary_point(0.3), 1.5 * PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.value(x, 1.5 * PI), 4.0 * (0.4 - 1.0), epsilon = 1e-15);
        // Right limit at the discontinuities.
        assert_abs_diff_eq!(h.value(x, PI), 4.0 * (0.4 - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(h.value(x, 0.0), 2.0 * h1.value(x, 0.0), epsilon = 1e-15);
        assert_eq!(h.discontinuities(), &[0.0, PI]);
    }

    #[test]
    fn theorem2_requires_standard_period() {
        let h = lemma1_extension(1, 1.0, 0.1).unwrap();
        assert!(theorem2_piecewise(&h, 1, disk()).is_err());
    }

    #[test]
    fn builtin_gradients_match_finite_differences() {
        let d = disk();
        let fields = [
            linear_rotation(0.7, d),
            twist_field(ActionProfile::polynomial(1.0, vec![0.0, 0.3, 1.0, -0.5]), d),
            twist_field(ActionProfile::new("sin", |i| (i - 1.0).sin(), |i| (i - 1.0).cos()), d),
            lemma1_extension(2, 1.0, 0.1).unwrap(),
            theorem2_piecewise(&linear_rotation(0.3, d), -1, d).unwrap(),
        ];
        for (k, h) in fields.iter().enumerate() {
            let hi = h.invariant_disk().unwrap().i0();
            let err = gradient_mismatch(h, 0.01, hi, 10 + k as u64);
            assert!(err < 1e-5, "{}: {err}", h.label());
        }
        let cap = annulus_cap(3, 1.0, 0.2).unwrap();
        assert!(gradient_mismatch(&cap, 1.0 + 1e-4, 1.2, 99) < 1e-5);
    }
}
