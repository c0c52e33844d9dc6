//! Euclidean projection onto the scaled l1 ball `{x : ||x||_1 <= tau}`.

use crate::error::{Error, Result};
use crate::vecops::norm1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub x: Vec<f64>,
    /// Soft-threshold applied to every magnitude; zero for interior inputs.
    pub theta: f64,
    /// Number of coordinates that survive the threshold.
    pub support_size: usize,
}

/// Projects `c` onto the l1 ball of radius `tau`.
///
/// Sort-based: with magnitudes sorted in descending order, the threshold is
/// `theta_k = (sum_{i<=k} |c|_(i) - tau) / k` for the largest `k` such that
/// `|c|_(k) > theta_k`. Every coordinate is then shrunk by `theta` toward zero.
pub fn project_l1(c: &[f64], tau: f64) -> Result<ProjectionResult> {
    let mut x = c.to_vec();
    let (theta, support_size) = project_l1_in_place(&mut x, tau)?;
    Ok(ProjectionResult {
        x,
        theta,
        support_size,
    })
}

/// In-place variant used by the solvers; returns `(theta, support_size)`.
pub fn project_l1_in_place(c: &mut [f64], tau: f64) -> Result<(f64, usize)> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "l1 radius must be finite and nonnegative, got {tau}"
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "projection input has non-finite entries".into(),
        ));
    }
    if norm1(c) <= tau {
        let support = c.iter().filter(|v| **v != 0.0).count();
        return Ok((0.0, support));
    }
    if tau == 0.0 {
        c.fill(0.0);
        return Ok((0.0, 0));
    }

    let theta = threshold(c, tau);
    let mut support = 0;
    for v in c.iter_mut() {
        let shrunk = v.abs() - theta;
        if shrunk > 0.0 {
            *v = v.signum() * shrunk;
            support += 1;
        } else {
            *v = 0.0;
        }
    }
    Ok((theta, support))
}

fn threshold(c: &[f64], tau: f64) -> f64 {
    let mut mags: Vec<f64> = c.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - tau) / (i + 1) as f64;
        if m > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Largest violation of the projection's optimality conditions.
///
/// Active coordinates must satisfy `|c_i| - |x_i| = theta`, inactive ones
/// `|c_i| <= theta`, and a positive threshold requires `||x||_1 = tau`.
pub fn kkt_residual(c: &[f64], tau: f64, result: &ProjectionResult) -> f64 {
    let theta = result.theta;
    let mut worst: f64 = 0.0;
    for (ci, xi) in c.iter().zip(&result.x) {
        let v = if *xi != 0.0 {
            (ci.abs() - xi.abs() - theta).abs()
        } else {
            (ci.abs() - theta).max(0.0)
        };
        worst = worst.max(v);
    }
    if theta > 0.0 {
        worst = worst.max((norm1(&result.x) - tau).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bisection on `theta -> sum max(|c_i| - theta, 0) = tau`.
    fn bisection_oracle(c: &[f64], tau: f64) -> Vec<f64> {
        if norm1(c) <= tau {
            return c.to_vec();
        }
        let (mut lo, mut hi) = (0.0, c.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = c.iter().map(|v| (v.abs() - mid).max(0.0)).sum();
            if s > tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        c.iter()
            .map(|v| v.signum() * (v.abs() - theta).max(0.0))
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn interior_point_is_unchanged() {
        let c = [0.5, -0.25];
        let p = project_l1(&c, 1.0).unwrap();
        assert_eq!(p.x, c.to_vec());
        assert_eq!(p.theta, 0.0);
        assert_eq!(kkt_residual(&c, 1.0, &p), 0.0);
    }

    #[test]
    fn hand_checked_projections() {
        let p = project_l1(&[3.0, 1.0], 2.0).unwrap();
        assert_close(&p.x, &[2.0, 0.0], 1e-15);
        assert!((p.theta - 1.0).abs() < 1e-15);
        assert_eq!(p.support_size, 1);
        assert_close(&p.x, &bisection_oracle(&[3.0, 1.0], 2.0), 1e-12);

        let p = project_l1(&[1.0, 1.0, 1.0], 1.5).unwrap();
        assert_close(&p.x, &[0.5, 0.5, 0.5], 1e-15);
        assert!((p.theta - 0.5).abs() < 1e-15);

        let p = project_l1(&[-3.0, 1.0], 2.0).unwrap();
        assert_close(&p.x, &[-2.0, 0.0], 1e-15);
        assert_close(&p.x, &bisection_oracle(&[-3.0, 1.0], 2.0), 1e-12);
    }

    #[test]
    fn zero_radius() {
        let p = project_l1(&[1.0, -2.0], 0.0).unwrap();
        assert_eq!(p.x, vec![0.0, 0.0]);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(project_l1(&[1.0], -1.0), Err(Error::Domain(_))));
        assert!(matches!(
            project_l1(&[f64::NAN], 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            project_l1(&[f64::INFINITY], 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn kkt_detects_perturbation() {
        let c = [3.0, 2.0, 0.5, -1.5];
        let mut p = project_l1(&c, 2.0).unwrap();
        assert!(kkt_residual(&c, 2.0, &p) <= 1e-10);
        let i = p.x.iter().position(|v| *v != 0.0).unwrap();
        p.x[i] += 1e-3;
        assert!(kkt_residual(&c, 2.0, &p) >= 5e-4);
    }

    #[test]
    fn ties_are_order_independent() {
        let a = project_l1(&[2.0, 2.0, 1.0, 2.0], 3.0).unwrap();
        let b = project_l1(&[1.0, 2.0, 2.0, 2.0], 3.0).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_close(&a.x, &bisection_oracle(&[2.0, 2.0, 1.0, 2.0], 3.0), 1e-12);
    }

    fn vec_and_tau() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (prop::collection::vec(-10.0f64..10.0, 1..40), 0.0f64..20.0)
    }

    proptest! {
        #[test]
        fn feasible_and_on_boundary((c, tau) in vec_and_tau()) {
            let p = project_l1(&c, tau).unwrap();
            prop_assert!(norm1(&p.x) <= tau + 1e-12 * tau.max(1.0));
            if norm1(&c) > tau {
                prop_assert!((norm1(&p.x) - tau).abs() <= 1e-10 * tau.max(1.0));
                prop_assert!(tau == 0.0 || p.theta > 0.0);
            }
            for (ci, xi) in c.iter().zip(&p.x) {
                prop_assert!(*xi == 0.0 || xi.signum() == ci.signum());
            }
            prop_assert!(kkt_residual(&c, tau, &p) <= 1e-9);
        }

        #[test]
        fn idempotent((c, tau) in vec_and_tau()) {
            let once = project_l1(&c, tau).unwrap();
            let twice = project_l1(&once.x, tau).unwrap();
            for (a, b) in once.x.iter().zip(&twice.x) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn non_expansive(
            (a, tau) in vec_and_tau(),
            shift in prop::collection::vec(-3.0f64..3.0, 40),
        ) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let pa = project_l1(&a, tau).unwrap();
            let pb = project_l1(&b, tau).unwrap();
            let d_in = crate::vecops::dist2(&a, &b);
            let d_out = crate::vecops::dist2(&pa.x, &pb.x);
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn preserves_magnitude_order((c, tau) in vec_and_tau()) {
            let p = project_l1(&c, tau).unwrap();
            for i in 0..c.len() {
                for j in 0..c.len() {
                    if c[i].abs() <= c[j].abs() {
                        prop_assert!(p.x[i].abs() <= p.x[j].abs() + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn matches_bisection_oracle((c, tau) in vec_and_tau()) {
            let p = project_l1(&c, tau).unwrap();
            let oracle = bisection_oracle(&c, tau);
            for (a, b) in p.x.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}
