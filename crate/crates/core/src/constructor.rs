//! Smooth flows with a prescribed helicity shift and an unchanged period map,
//! and a finite-difference probe of smoothness in time.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::fields::{reparametrize, theorem2_piecewise, HamiltonianField, TimeReparametrization};
use crate::geometry::{disk_samples, Disk, PhasePoint};

/// Step of the one-sided difference stencils.
pub const FD_STEP: f64 = 1e-3;

/// Largest derivative order [`smoothness_order`] can resolve.
pub const MAX_PROBE_ORDER: usize = 4;

/// Runs `H1` at double speed on `[0, pi)`, then the twist `2n(I - I0)` for
/// the remaining half period, and smooths the two jumps by a time change of
/// order `k` (1 or 3). The period map is that of `H1` and the helicity
/// differs from `helicity(H1)` by `-n S(D)^2 / 2`.
pub fn theorem2_pair(h1: &HamiltonianField, n: i64, disk: Disk, k: u32) -> Result<HamiltonianField> {
    let r = match k {
        1 => TimeReparametrization::C1,
        3 => TimeReparametrization::C3,
        _ => {
            return Err(Error::InvalidArgument(format!("smoothing order must be 1 or 3, got {k}")));
        }
    };
    let tilde = theorem2_piecewise(h1, n, disk)?;
    Ok(reparametrize(&tilde, r)?.with_label(format!("theorem2_c{k}({},n={n})", h1.label())))
}

/// Finite-difference weights for the derivatives `0..=order` at `z` from
/// samples at `nodes` (Fornberg's recursion). `w[m][i]` multiplies `f(nodes[i])`
/// in the `m`-th derivative.
pub fn fd_weights(z: f64, nodes: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// One-sided estimates of `d^m H / dtau^m (x, tau)`, `m = 0..=order`, from
/// the right (`side > 0`) or the left. Nodes sit at half-integer multiples of
/// `step` so the point `tau` itself is never evaluated.
pub fn one_sided_derivatives(
    h: &HamiltonianField,
    x: PhasePoint,
    tau: f64,
    order: usize,
    side: f64,
    step: f64,
) -> Vec<f64> {
    let count = order + 4;
    let offsets: Vec<f64> = (0..count).map(|i| side.signum() * (i as f64 + 0.5) * step).collect();
    let w = fd_weights(0.0, &offsets, order);
    let values: Vec<f64> = offsets.iter().map(|&o| h.value(x, tau + o)).collect();
    w.iter()
        .map(|row| row.iter().zip(&values).map(|(a, b)| a * b).sum())
        .collect()
}

/// Largest `j <= max_order` such that left and right difference estimates
/// of the derivatives `0..=j` agree at every `tau` in `tau_points` and every
/// probe point of the disk. Tolerances scale with `max |H|` and grow by a
/// factor 4 per order. `max_order` above [`MAX_PROBE_ORDER`] is clamped.
pub fn smoothness_order(h: &HamiltonianField, tau_points: &[f64], max_order: usize) -> usize {
    let max_order = max_order.min(MAX_PROBE_ORDER);
    let disk = h.invariant_disk().unwrap_or_else(Disk::unit);
    let probes = disk_samples(disk, 16);
    let period = h.period();
    let mut scale: f64 = 0.0;
    for &x in &probes {
        for k in 0..64 {
            scale = scale.max(h.value(x, period * k as f64 / 64.0).abs());
        }
        for &tau in tau_points {
            for s in [-1.0, 1.0] {
                scale = scale.max(h.value(x, tau + s * 0.5 * FD_STEP).abs());
            }
        }
    }
    if scale == 0.0 {
        return max_order;
    }
    let mut best = max_order;
    for &x in &probes {
        for &tau in tau_points {
            let left = one_sided_derivatives(h, x, tau, max_order, -1.0, FD_STEP);
            let right = one_sided_derivatives(h, x, tau, max_order, 1.0, FD_STEP);
            let matched = (0..=max_order)
                .take_while(|&j| (left[j] - right[j]).abs() <= 1e-3 * scale * 4f64.powi(j as i32))
                .count();
            if matched == 0 {
                return 0;
            }
            best = best.min(matched - 1);
        }
    }
    best
}

/// The natural probe times of a 2 pi periodic construction: its junctions.
pub fn standard_junctions() -> [f64; 2] {
    [0.0, 0.5 * TAU]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{linear_rotation, reparam_c1, reparam_c3, twist_field, ActionProfile};
    use crate::flow::{map_distance, PoincareMap};
    use crate::invariants::{helicity, QuadratureGrid};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn disk() -> Disk {
        Disk::unit()
    }

    #[test]
    fn fd_weights_reproduce_polynomials() {
        let nodes = [0.5, 1.5, 2.5, 3.5, 4.5, 5.5];
        let w = fd_weights(0.0, &nodes, 3);
        // f(x) = 1 + 2x + 3x^2 - x^3 at 0: f=1, f'=2, f''=6, f'''=-6
        let f = |x: f64| 1.0 + 2.0 * x + 3.0 * x * x - x * x * x;
        let want = [1.0, 2.0, 6.0, -6.0];
        for (m, row) in w.iter().enumerate() {
            let got: f64 = row.iter().zip(&nodes).map(|(a, &x)| a * f(x)).sum();
            assert_abs_diff_eq!(got, want[m], epsilon = 1e-10);
        }
    }

    #[test]
    fn central_three_point_weights() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_abs_diff_eq!(w[1][0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1][2], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2][1], -2.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_unsupported_order() {
        let h = linear_rotation(0.3, disk());
        assert!(matches!(theorem2_pair(&h, 1, disk(), 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn smoothness_of_piecewise_and_smoothed() {
        let h1 = linear_rotation(0.3, disk());
        let tilde = theorem2_piecewise(&h1, 1, disk()).unwrap();
        assert_eq!(smoothness_order(&tilde, &[PI], 4), 0);
        let c1 = reparametrize(&tilde, reparam_c1()).unwrap();
        let c3 = reparametrize(&tilde, reparam_c3()).unwrap();
        assert_eq!(smoothness_order(&c1, &standard_junctions(), 4), 1);
        assert_eq!(smoothness_order(&c3, &standard_junctions(), 4), 3);
    }

    #[test]
    fn smooth_builtins_report_max_order() {
        let twist = twist_field(ActionProfile::polynomial(1.0, vec![0.0, 0.0, 1.0]), disk());
        for h in [linear_rotation(0.3, disk()), twist] {
            for m in 0..=4 {
                assert_eq!(smoothness_order(&h, &[0.0, PI, 1.0], m), m);
            }
        }
        assert_eq!(smoothness_order(&linear_rotation(1.0, disk()), &[PI], 9), MAX_PROBE_ORDER);
    }

    #[test]
    fn one_sided_derivatives_agree_at_junctions() {
        let h1 = linear_rotation(0.3, disk());
        let x = PhasePoint::new(0.4, -0.7);
        let c1 = theorem2_pair(&h1, 1, disk(), 1).unwrap();
        let l = one_sided_derivatives(&c1, x, PI, 1, -1.0, FD_STEP);
        let r = one_sided_derivatives(&c1, x, PI, 1, 1.0, FD_STEP);
        assert!((l[1] - r[1]).abs() < 1e-6, "{l:?} {r:?}");
        let c3 = theorem2_pair(&h1, 1, disk(), 3).unwrap();
        let l = one_sided_derivatives(&c3, x, PI, 3, -1.0, FD_STEP);
        let r = one_sided_derivatives(&c3, x, PI, 3, 1.0, FD_STEP);
        for m in 1..=3 {
            assert!((l[m] - r[m]).abs() < 1e-4, "order {m}: {l:?} {r:?}");
        }
    }

    #[test]
    fn zero_shift_keeps_helicity() {
        let h1 = linear_rotation(0.3, disk());
        let h2 = theorem2_pair(&h1, 0, disk(), 1).unwrap();
        let grid = QuadratureGrid::default();
        let a = helicity(&h1, disk(), grid).unwrap().value;
        let b = helicity(&h2, disk(), grid).unwrap().value;
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
    }

    #[test]
    fn map_preserved_for_small_shifts() {
        let twist = twist_field(ActionProfile::polynomial(1.0, vec![0.0, 0.0, 1.0]), disk());
        for h1 in [linear_rotation(0.3, disk()), twist] {
            let m1 = PoincareMap::new(h1.clone());
            for n in -2..=2 {
                let h2 = theorem2_pair(&h1, n, disk(), 1).unwrap();
                let d = map_distance(&m1, &PoincareMap::new(h2), disk(), 50).unwrap();
                assert!(d < 1e-6, "{} n={n}: {d}", h1.label());
            }
        }
    }

    #[test]
    fn helicity_shift_is_linear_in_n() {
        let h1 = linear_rotation(0.3, disk());
        let grid = QuadratureGrid::default();
        let base = helicity(&h1, disk(), grid).unwrap().value;
        let shift = |n: i64| helicity(&theorem2_pair(&h1, n, disk(), 3).unwrap(), disk(), grid).unwrap().value - base;
        let s1 = shift(1);
        assert_abs_diff_eq!(s1, -disk().lattice_unit(), epsilon = 1e-6);
        for n in [2, 3] {
            let sn = shift(n);
            assert!((sn - n as f64 * s1).abs() <= 1e-5 * sn.abs(), "n={n}: {sn} vs {s1}");
        }
    }
}
