//! Complexity-conditioned path routing.
//!
//! A scene's estimated intrinsic dimension d_hat selects one of three
//! processing paths of increasing depth and width. The soft assignment
//! is a softmax over negative absolute distances to learnable path
//! centers c_j with sharpness beta:
//!
//! ```text
//!     w_j = exp(-beta |d_hat - c_j|) / sum_m exp(-beta |d_hat - c_m|)
//! ```
//!
//! evaluated with max-subtraction so large beta cannot overflow. Two
//! hard decision rules sit on top: `hard_route` takes the argmax of the
//! soft weights, and `threshold_route` compares d_hat against two fixed
//! thresholds, which is the cheap rule used at inference time. Both map
//! the winning index through the fixed path table:
//!
//! ```text
//!     path 0: rounds = 2, subspace dim = 8     (shallow)
//!     path 1: rounds = 4, subspace dim = 16    (medium)
//!     path 2: rounds = 6, subspace dim = 32    (deep)
//! ```
//!
//! For training, `soft_weights_gradient` returns the exact derivatives
//! of the weights with respect to d_hat, the centers, and beta. With
//! a_j = |d_hat - c_j| and s_j = sign(d_hat - c_j):
//!
//! ```text
//!     dw_j/d d_hat = beta w_j (sum_m w_m s_m - s_j)
//!     dw_j/d c_m   = beta w_j (delta_jm - w_m) s_m
//!     dw_j/d beta  = w_j (sum_m w_m a_m - a_j)
//! ```
//!
//! The absolute value has no derivative at d_hat = c_j, and the routine
//! refuses to evaluate there rather than pick a subgradient silently.
//! `anneal_beta` provides the geometric sharpening schedule used to move
//! from nearly uniform routing to nearly hard routing over training.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of routing paths.
pub const NUM_PATHS: usize = 3;

/// Depth and width of one processing path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSpec {
    /// Message-passing rounds the path runs.
    pub rounds: usize,
    /// Subspace dimension the path operates at.
    pub subspace_dim: usize,
}

/// The fixed path table, shallow to deep.
pub const PATHS: [PathSpec; NUM_PATHS] = [
    PathSpec {
        rounds: 2,
        subspace_dim: 8,
    },
    PathSpec {
        rounds: 4,
        subspace_dim: 16,
    },
    PathSpec {
        rounds: 6,
        subspace_dim: 32,
    },
];

/// Router parameters. Construct with [`RouterParams::new`] to get the
/// domain checks, or use [`RouterParams::default`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouterParams {
    /// Path centers in estimated-dimension units, one per path.
    pub centers: [f64; NUM_PATHS],
    /// Softmax sharpness, strictly positive.
    pub beta: f64,
    /// Threshold between the shallow and medium paths.
    pub tau1: f64,
    /// Threshold between the medium and deep paths.
    pub tau2: f64,
}

impl RouterParams {
    pub fn new(centers: [f64; NUM_PATHS], beta: f64, tau1: f64, tau2: f64) -> Result<Self> {
        let params = Self {
            centers,
            beta,
            tau1,
            tau2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("centers must be finite".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(self.tau1 < self.tau2) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy tau1 < tau2, got {} and {}",
                self.tau1, self.tau2
            )));
        }
        Ok(())
    }
}

impl Default for RouterParams {
    fn default() -> Self {
        Self {
            centers: [3.0, 8.0, 13.0],
            beta: 1.0,
            tau1: 5.0,
            tau2: 12.0,
        }
    }
}

/// A routing outcome: soft weights plus the selected path expanded
/// through the path table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub weights: [f64; NUM_PATHS],
    /// Index of the chosen path.
    pub selected: usize,
    pub rounds: usize,
    pub subspace_dim: usize,
}

impl RouteDecision {
    fn from_selection(weights: [f64; NUM_PATHS], selected: usize) -> Self {
        let spec = PATHS[selected];
        Self {
            weights,
            selected,
            rounds: spec.rounds,
            subspace_dim: spec.subspace_dim,
        }
    }
}

fn check_signal(d_hat: f64) -> Result<()> {
    if !d_hat.is_finite() {
        return Err(Error::InvalidComplexitySignal);
    }
    Ok(())
}

/// Soft path weights for a complexity signal; positive and summing
/// to one.
pub fn soft_weights(d_hat: f64, params: &RouterParams) -> Result<[f64; NUM_PATHS]> {
    check_signal(d_hat)?;
    params.validate()?;
    let logits: [f64; NUM_PATHS] =
        std::array::from_fn(|j| -params.beta * (d_hat - params.centers[j]).abs());
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: [f64; NUM_PATHS] = std::array::from_fn(|j| (logits[j] - max).exp());
    let total: f64 = exps.iter().sum();
    Ok(std::array::from_fn(|j| exps[j] / total))
}

/// Picks the path with the largest soft weight; ties resolve to the
/// smaller index, preferring the cheaper path.
pub fn hard_route(d_hat: f64, params: &RouterParams) -> Result<RouteDecision> {
    let weights = soft_weights(d_hat, params)?;
    let mut selected = 0;
    for j in 1..NUM_PATHS {
        if weights[j] > weights[selected] {
            selected = j;
        }
    }
    Ok(RouteDecision::from_selection(weights, selected))
}

/// Threshold rule: `d_hat <= tau1` takes the shallow path,
/// `d_hat <= tau2` the medium one, anything above the deep one. Weights
/// in the decision are one-hot.
pub fn threshold_route(d_hat: f64, params: &RouterParams) -> Result<RouteDecision> {
    check_signal(d_hat)?;
    params.validate()?;
    let selected = if d_hat <= params.tau1 {
        0
    } else if d_hat <= params.tau2 {
        1
    } else {
        2
    };
    let mut weights = [0.0; NUM_PATHS];
    weights[selected] = 1.0;
    Ok(RouteDecision::from_selection(weights, selected))
}

/// Exact derivatives of the soft weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightGradients {
    /// `d_dhat[j] = dw_j / d d_hat`.
    pub d_dhat: [f64; NUM_PATHS],
    /// `d_centers[j][m] = dw_j / d c_m`.
    pub d_centers: [[f64; NUM_PATHS]; NUM_PATHS],
    /// `d_beta[j] = dw_j / d beta`.
    pub d_beta: [f64; NUM_PATHS],
}

/// Analytic gradients of [`soft_weights`] at `d_hat`. Refuses points
/// where `d_hat` equals a center, since the absolute value in the logit
/// has no derivative there.
pub fn soft_weights_gradient(d_hat: f64, params: &RouterParams) -> Result<WeightGradients> {
    check_signal(d_hat)?;
    params.validate()?;
    if params.centers.iter().any(|c| d_hat == *c) {
        return Err(Error::NondifferentiablePoint);
    }
    let w = soft_weights(d_hat, params)?;
    let a: [f64; NUM_PATHS] = std::array::from_fn(|j| (d_hat - params.centers[j]).abs());
    let s: [f64; NUM_PATHS] = std::array::from_fn(|j| (d_hat - params.centers[j]).signum());
    let mean_s: f64 = (0..NUM_PATHS).map(|m| w[m] * s[m]).sum();
    let mean_a: f64 = (0..NUM_PATHS).map(|m| w[m] * a[m]).sum();
    let beta = params.beta;
    Ok(WeightGradients {
        d_dhat: std::array::from_fn(|j| beta * w[j] * (mean_s - s[j])),
        d_centers: std::array::from_fn(|j| {
            std::array::from_fn(|m| {
                let delta = if j == m { 1.0 } else { 0.0 };
                beta * w[j] * (delta - w[m]) * s[m]
            })
        }),
        d_beta: std::array::from_fn(|j| w[j] * (mean_a - a[j])),
    })
}

/// Geometric sharpening schedule for beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    /// Starting sharpness.
    pub beta0: f64,
    /// Final sharpness, at least `beta0`.
    pub beta_max: f64,
    /// Steps over which the schedule runs.
    pub steps: u64,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            beta_max: 10.0,
            steps: 1000,
        }
    }
}

/// Sharpness at `step`:
/// `beta(t) = beta0 * (beta_max / beta0)^(min(t, steps) / steps)`.
/// The value saturates at `beta_max` past the end of the schedule.
pub fn anneal_beta(step: u64, schedule: &BetaSchedule) -> Result<f64> {
    if !(schedule.beta0 > 0.0) || !schedule.beta0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta0 must be positive and finite, got {}",
            schedule.beta0
        )));
    }
    if !(schedule.beta_max >= schedule.beta0) || !schedule.beta_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta_max must be finite and at least beta0, got {}",
            schedule.beta_max
        )));
    }
    if schedule.steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let t = step.min(schedule.steps) as f64 / schedule.steps as f64;
    Ok(schedule.beta0 * (schedule.beta_max / schedule.beta0).powf(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_weights_match_direct_formula() {
        let params = RouterParams::default();
        let w = soft_weights(4.0, &params).unwrap();
        // Direct evaluation without max-subtraction.
        let raw = [(-1.0f64).exp(), (-4.0f64).exp(), (-9.0f64).exp()];
        let total: f64 = raw.iter().sum();
        for j in 0..NUM_PATHS {
            assert!(
                (w[j] - raw[j] / total).abs() <= 1e-12,
                "weight {j}: {} vs direct {}",
                w[j],
                raw[j] / total
            );
        }
    }

    #[test]
    fn weights_are_a_distribution() {
        let params = RouterParams::default();
        for i in 0..100 {
            let d_hat = i as f64 * 0.17;
            let w = soft_weights(d_hat, &params).unwrap();
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "weights sum to {sum}");
            assert!(w.iter().all(|x| *x > 0.0), "nonpositive weight at {d_hat}");
        }
    }

    #[test]
    fn large_beta_does_not_overflow() {
        let params = RouterParams {
            beta: 900.0,
            ..RouterParams::default()
        };
        let w = soft_weights(4.0, &params).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(w[0] > 0.999, "sharp routing should concentrate, got {:?}", w);
    }

    #[test]
    fn equidistant_signal_splits_evenly() {
        let params = RouterParams::default();
        let w = soft_weights(5.5, &params).unwrap();
        assert_eq!(w[0].to_bits(), w[1].to_bits(), "equidistant weights differ");
        assert!(w[2] < w[0]);
    }

    #[test]
    fn hard_route_picks_nearest_center() {
        let params = RouterParams::default();
        assert_eq!(hard_route(3.2, &params).unwrap().selected, 0);
        assert_eq!(hard_route(14.5, &params).unwrap().selected, 2);
        // Equidistant between the first two centers: the tie goes to the
        // cheaper path.
        assert_eq!(hard_route(5.5, &params).unwrap().selected, 0);
    }

    #[test]
    fn threshold_route_obeys_the_table() {
        let params = RouterParams::default();
        let low = threshold_route(3.2, &params).unwrap();
        assert_eq!((low.selected, low.rounds, low.subspace_dim), (0, 2, 8));
        assert_eq!(low.weights, [1.0, 0.0, 0.0]);
        let mid = threshold_route(8.0, &params).unwrap();
        assert_eq!((mid.selected, mid.rounds, mid.subspace_dim), (1, 4, 16));
        let high = threshold_route(12.7, &params).unwrap();
        assert_eq!((high.selected, high.rounds, high.subspace_dim), (2, 6, 32));
        // Boundaries belong to the cheaper path.
        assert_eq!(threshold_route(5.0, &params).unwrap().selected, 0);
        assert_eq!(threshold_route(12.0, &params).unwrap().selected, 1);
    }

    #[test]
    fn nonfinite_signal_is_rejected() {
        let params = RouterParams::default();
        for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(matches!(
                soft_weights(bad, &params),
                Err(Error::InvalidComplexitySignal)
            ));
            assert!(matches!(
                threshold_route(bad, &params),
                Err(Error::InvalidComplexitySignal)
            ));
        }
    }

    #[test]
    fn bad_params_are_rejected() {
        assert!(RouterParams::new([3.0, 8.0, 13.0], 0.0, 5.0, 12.0).is_err());
        assert!(RouterParams::new([3.0, 8.0, 13.0], 1.0, 12.0, 5.0).is_err());
        assert!(RouterParams::new([3.0, f64::NAN, 13.0], 1.0, 5.0, 12.0).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let params = RouterParams {
            centers: [3.0, 8.0, 13.0],
            beta: 1.7,
            tau1: 5.0,
            tau2: 12.0,
        };
        let h = 1e-6;
        let check = |analytic: f64, fd: f64, what: &str| {
            let err = (analytic - fd).abs() / analytic.abs().max(1e-3);
            assert!(err <= 1e-5, "{what}: analytic {analytic} vs fd {fd}, rel {err:.2e}");
        };
        let mut checked = 0;
        let mut i = 0;
        while checked < 100 {
            i += 1;
            let d_hat = (i as f64 * 0.731).rem_euclid(16.0);
            if params.centers.iter().any(|c| (d_hat - c).abs() < 0.05) {
                continue;
            }
            checked += 1;
            let g = soft_weights_gradient(d_hat, &params).unwrap();

            let wp = soft_weights(d_hat + h, &params).unwrap();
            let wm = soft_weights(d_hat - h, &params).unwrap();
            for j in 0..NUM_PATHS {
                check(g.d_dhat[j], (wp[j] - wm[j]) / (2.0 * h), "d/d d_hat");
            }

            for m in 0..NUM_PATHS {
                let mut up = params;
                up.centers[m] += h;
                let mut down = params;
                down.centers[m] -= h;
                let wp = soft_weights(d_hat, &up).unwrap();
                let wm = soft_weights(d_hat, &down).unwrap();
                for j in 0..NUM_PATHS {
                    check(g.d_centers[j][m], (wp[j] - wm[j]) / (2.0 * h), "d/d c");
                }
            }

            let mut up = params;
            up.beta += h;
            let mut down = params;
            down.beta -= h;
            let wp = soft_weights(d_hat, &up).unwrap();
            let wm = soft_weights(d_hat, &down).unwrap();
            for j in 0..NUM_PATHS {
                check(g.d_beta[j], (wp[j] - wm[j]) / (2.0 * h), "d/d beta");
            }
        }
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let params = RouterParams::default();
        for d_hat in [1.3, 6.1, 10.9, 15.2] {
            let g = soft_weights_gradient(d_hat, &params).unwrap();
            let s: f64 = g.d_dhat.iter().sum();
            assert!(s.abs() <= 1e-12, "sum of dw/d d_hat = {s:.3e} at {d_hat}");
            let sb: f64 = g.d_beta.iter().sum();
            assert!(sb.abs() <= 1e-12, "sum of dw/d beta = {sb:.3e} at {d_hat}");
        }
    }

    #[test]
    fn gradient_refuses_kinks() {
        let params = RouterParams::default();
        assert!(matches!(
            soft_weights_gradient(8.0, &params),
            Err(Error::NondifferentiablePoint)
        ));
    }

    #[test]
    fn tiny_beta_flattens_center_sensitivity() {
        let params = RouterParams {
            beta: 1e-9,
            ..RouterParams::default()
        };
        let w = soft_weights(6.0, &params).unwrap();
        for x in w {
            assert!((x - 1.0 / 3.0).abs() <= 1e-8, "weight {x} far from uniform");
        }
        let g = soft_weights_gradient(6.0, &params).unwrap();
        for row in g.d_centers {
            for v in row {
                assert!(v.abs() <= 1e-8, "center gradient {v:.3e} survives beta -> 0");
            }
        }
    }

    #[test]
    fn anneal_endpoints_and_midpoint() {
        let sched = BetaSchedule::default();
        assert_eq!(anneal_beta(0, &sched).unwrap(), 1.0);
        assert_eq!(anneal_beta(1000, &sched).unwrap(), 10.0);
        assert_eq!(anneal_beta(5000, &sched).unwrap(), 10.0, "schedule must saturate");
        let wide = BetaSchedule {
            beta0: 1.0,
            beta_max: 100.0,
            steps: 1000,
        };
        let mid = anneal_beta(500, &wide).unwrap();
        assert!((mid - 10.0).abs() <= 1e-12, "geometric midpoint is {mid}");
        let mut prev = 0.0;
        for t in 0..=1000 {
            let b = anneal_beta(t, &sched).unwrap();
            assert!(b >= prev, "schedule decreased at step {t}");
            prev = b;
        }
    }

    #[test]
    fn anneal_rejects_bad_schedules() {
        for sched in [
            BetaSchedule {
                beta0: 0.0,
                beta_max: 10.0,
                steps: 100,
            },
            BetaSchedule {
                beta0: 2.0,
                beta_max: 1.0,
                steps: 100,
            },
            BetaSchedule {
                beta0: 1.0,
                beta_max: 10.0,
                steps: 0,
            },
        ] {
            assert!(matches!(
                anneal_beta(0, &sched),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn decision_serializes_with_expected_fields() {
        let params = RouterParams::default();
        let d = threshold_route(3.2, &params).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"weights\""));
        assert!(json.contains("\"selected\":0"));
        assert!(json.contains("\"rounds\":2"));
        assert!(json.contains("\"subspace_dim\":8"));
    }
}
