//! Trip costs: schedule deviation, queueing, and the payoff inverse.
//!
//! Arriving at `t` costs `phi2(t) = beta max(t_star - t, 0) +
//! gamma max(t - t_star, 0)` for missing the preferred time, plus
//! `phi1 = alpha * upsilon` for time spent queueing. The *scheduling
//! payoff* is `x = -phi2(t)`; inverting it yields the two arrival times
//! (one early, one late) that share a payoff level — the two ends of every
//! payoff cell's preimage.

use crate::config::{SimConfig, ValidatedConfig};
use crate::error::SimError;
use crate::grid::Grids;
use crate::queue::FlowProfile;
use crate::{Result, Scalar};

/// Schedule-deviation cost `phi2(t)` ($).
pub fn scheduling_cost<T: Scalar>(cfg: &SimConfig<T>, t: T) -> T {
    let early = (cfg.t_star - t).max(T::zero());
    let late = (t - cfg.t_star).max(T::zero());
    cfg.beta * early + cfg.gamma * late
}

/// The early and late arrival times with scheduling payoff `x <= 0`.
///
/// Returns `(t1, t2)` with `t1 <= t_star <= t2`,
/// `phi2(t1) = phi2(t2) = -x`. Lower payoffs map to *outer* times: for
/// `x < y <= 0`, `t1(x) < t1(y)` and `t2(y) < t2(x)`.
///
/// # Errors
///
/// [`SimError::PayoffOutOfRange`] unless `-L <= x <= 0`.
pub fn payoff_inverse<T: Scalar>(cfg: &ValidatedConfig<T>, x: T) -> Result<(T, T)> {
    if x > T::zero() || x < -cfg.tube_len() || !x.is_finite() {
        return Err(SimError::PayoffOutOfRange {
            x: x.to_f64().unwrap_or(f64::NAN),
            min: -cfg.tube_len().to_f64().unwrap_or(f64::NAN),
        });
    }
    let t_star = cfg.cfg().t_star;
    Ok((t_star + x / cfg.cfg().beta, t_star - x / cfg.cfg().gamma))
}

/// Per-interval cost profiles of one day ($).
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile<T> {
    /// Queueing cost `alpha * upsilon` at each interval's end boundary.
    pub phi1: Vec<T>,
    /// Schedule-deviation cost at each interval center.
    pub phi2: Vec<T>,
    /// Total trip cost `phi1 + phi2`.
    pub phi: Vec<T>,
}

/// Evaluates queueing, scheduling, and total costs for a day's flows.
pub fn total_costs<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    flows: &FlowProfile<T>,
) -> CostProfile<T> {
    let alpha = cfg.cfg().alpha;
    let m = cfg.n_intervals();
    let phi1: Vec<T> = (0..m).map(|mi| alpha * flows.upsilon[mi + 1]).collect();
    let phi2: Vec<T> = grids
        .time
        .centers
        .iter()
        .map(|&t| scheduling_cost(cfg.cfg(), t))
        .collect();
    let phi = phi1.iter().zip(&phi2).map(|(&a, &b)| a + b).collect();
    CostProfile { phi1, phi2, phi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate;
    use crate::demo::demo_config;
    use approx::assert_relative_eq;

    fn demo() -> ValidatedConfig<f64> {
        validate(demo_config::<f64>()).unwrap()
    }

    #[test]
    fn scheduling_cost_is_v_shaped_around_t_star() {
        let cfg = demo_config::<f64>();
        assert_relative_eq!(scheduling_cost(&cfg, 0.0), 0.0);
        assert_relative_eq!(scheduling_cost(&cfg, -2.0), 50.0); // beta * 2
        assert_relative_eq!(scheduling_cost(&cfg, 0.5), 50.0); // gamma * 0.5
        assert_relative_eq!(scheduling_cost(&cfg, -4.0), 100.0);
        assert_relative_eq!(scheduling_cost(&cfg, 1.0), 100.0);
    }

    #[test]
    fn payoff_inverse_hits_the_known_window() {
        let v = demo();
        let (t1, t2) = payoff_inverse(&v, -40.0).unwrap();
        assert_relative_eq!(t1, -1.6, epsilon = 1e-12);
        assert_relative_eq!(t2, 0.4, epsilon = 1e-12);
        let (a, b) = payoff_inverse(&v, 0.0).unwrap();
        assert_relative_eq!(a, 0.0);
        assert_relative_eq!(b, 0.0);
    }

    #[test]
    fn payoff_inverse_rejects_values_outside_the_tube() {
        let v = demo();
        assert!(payoff_inverse(&v, 0.5).is_err());
        assert!(payoff_inverse(&v, -100.5).is_err());
        assert!(payoff_inverse(&v, f64::NAN).is_err());
    }

    #[test]
    fn payoff_inverse_costs_match_and_nest() {
        let v = demo();
        let cfg = demo_config::<f64>();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=100 {
            let x = -f64::from(i); // -L..0
            let (t1, t2) = payoff_inverse(&v, x).unwrap();
            assert!(t1 <= 0.0 && 0.0 <= t2);
            assert_relative_eq!(scheduling_cost(&cfg, t1), -x, epsilon = 1e-12);
            assert_relative_eq!(scheduling_cost(&cfg, t2), -x, epsilon = 1e-12);
            if let Some((p1, p2)) = prev {
                // lower payoff (more negative) lies strictly outside
                assert!(t1 < p1 && p2 < t2);
            }
            prev = Some((t1, t2));
        }
    }
}
