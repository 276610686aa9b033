//! Built-in demonstration scenario.
//!
//! One bottleneck, 3600 commuters, capacity 1800 veh/h, cost rates
//! alpha/beta/gamma = 50/25/100 $/h around a preferred arrival time of 0,
//! study period [-4, 1] h. The payoff tube is 100 $ long with jam density
//! 90 veh/$; the equilibrium block is [-40, 0] and the equilibrium trip
//! cost is 40 $. The initial departure profile is deliberately lumpy
//! (alternating under- and over-capacity pieces) so the day-to-day
//! dynamics have something to smooth out.

use crate::config::SimConfig;
use crate::Scalar;

/// Scenario parameters for the demonstration run.
pub fn demo_config<T: Scalar>() -> SimConfig<T> {
    SimConfig {
        n: T::of(3600.0),
        c: T::of(1800.0),
        alpha: T::of(50.0),
        beta: T::of(25.0),
        gamma: T::of(100.0),
        t_star: T::of(0.0),
        t0: T::of(-4.0),
        t0p: T::of(1.0),
        u: T::of(1.0),
        w: T::of(1.0),
        dt: T::of(1e-3),
        dx: T::of(0.5),
        dr: T::of(0.5),
        jam_tol: T::of(1e-3),
        ue_gap_tol: T::of(1e-3),
        max_days: T::of(1000.0),
    }
}

/// Initial departure profile as `(t_start, rate)` pieces; each rate holds
/// until the next piece starts (the last one until `t0p`). Total mass is
/// exactly `N` = 3600 vehicles.
pub fn demo_departure_pieces<T: Scalar>() -> Vec<(T, T)> {
    let c = 1800.0;
    [
        (-4.0, 0.0),
        (-2.2, c / 2.0),
        (-1.4, 2.0 * c),
        (-1.1, c / 4.0),
        (-0.3, 2.0 * c),
        (0.0, 0.4 * c),
        (0.5, 0.0),
    ]
    .into_iter()
    .map(|(t, f)| (T::of(t), T::of(f)))
    .collect()
}
