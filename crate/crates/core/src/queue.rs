//! Discrete point queue at the bottleneck.
//!
//! Departures join a vertical queue served at capacity `C`. With
//! per-interval departure rates `f[m]`, the queue length at interval
//! boundaries follows
//!
//! ```text
//! delta[m+1] = max(0, delta[m] + (f[m] - C) dt)
//! g[m]       = min(delta[m] / dt + f[m], C)
//! ```
//!
//! where `g` is the arrival (service) rate. Cumulative departures `F` are
//! the running sum of `f`; cumulative arrivals are stored as `G = F -
//! delta`, which equals the running sum of `g` in exact arithmetic and
//! keeps the first-in-first-out inversion below immune to roundoff dust
//! (`G <= F` holds bitwise).
//!
//! The queueing time of the vehicle *arriving* at boundary `m` is the
//! largest wait consistent with the cumulative curves:
//! `upsilon[m] = max { y : F~(t_m - y) = G[m] }` with `F~` the
//! piecewise-linear interpolation of `F`. Concretely: find the last
//! boundary `m'` with `F[m'] < G[m]` and cross the segment above it. When
//! departures pause at exactly the arrival level (a flat stretch of `F`),
//! this picks the moment the level was first reached — the vehicle's true
//! departure — rather than reporting a zero wait. Boundaries at which no
//! fresh vehicle arrives (`G` flat over the preceding interval) carry a
//! zero queueing time: there is no vehicle whose wait they could measure.

use crate::config::ValidatedConfig;
use crate::error::SimError;
use crate::{Result, Scalar};

/// Departure/arrival flows and queue state of one day.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowProfile<T> {
    /// Start of the study period (hours).
    pub t0: T,
    /// Interval width (hours).
    pub dt: T,
    /// Departure rates per interval (veh/h).
    pub f: Vec<T>,
    /// Arrival rates per interval (veh/h), capped at capacity.
    pub g: Vec<T>,
    /// Cumulative departures at interval boundaries (veh).
    pub cum_f: Vec<T>,
    /// Cumulative arrivals at interval boundaries (veh).
    pub cum_g: Vec<T>,
    /// Queue length at interval boundaries (veh).
    pub delta: Vec<T>,
    /// Queueing time of the vehicle arriving at each boundary (hours).
    pub upsilon: Vec<T>,
}

impl<T: Scalar> FlowProfile<T> {
    /// Piecewise-linear cumulative departures `F~(t)`, clamped to the
    /// study period.
    pub fn cumulative_departures_at(&self, t: T) -> T {
        let m = self.f.len();
        let pos = ((t - self.t0) / self.dt).max(T::zero());
        let seg = pos.floor().to_usize().unwrap_or(0).min(m.saturating_sub(1));
        let t_seg = self.t0 + T::of(seg as f64) * self.dt;
        (self.cum_f[seg] + (t - t_seg) * self.f[seg]).min(self.cum_f[m])
    }

    /// Largest FIFO inconsistency `|F~(t_m - upsilon[m]) - G[m]|` (veh).
    pub fn fifo_residual(&self) -> T {
        let mut worst = T::zero();
        for m in 0..self.cum_g.len() {
            let t = self.t0 + T::of(m as f64) * self.dt;
            let back = self.cumulative_departures_at(t - self.upsilon[m]);
            worst = worst.max((back - self.cum_g[m]).abs());
        }
        worst
    }
}

/// Runs the queue recursion over a full day of departure rates.
///
/// # Errors
///
/// [`SimError::LengthMismatch`] when `f` does not have `M` entries.
///
/// # Panics
///
/// When a departure rate is negative or non-finite (caller contract).
pub fn propagate_queue<T: Scalar>(cfg: &ValidatedConfig<T>, f: &[T]) -> Result<FlowProfile<T>> {
    let m = cfg.n_intervals();
    if f.len() != m {
        return Err(SimError::LengthMismatch {
            what: "departure rates f",
            got: f.len(),
            want: m,
        });
    }
    let (c, dt) = (cfg.cfg().c, cfg.cfg().dt);

    let mut cum_f = Vec::with_capacity(m + 1);
    let mut delta = Vec::with_capacity(m + 1);
    let mut g = Vec::with_capacity(m);
    cum_f.push(T::zero());
    delta.push(T::zero());
    for (mi, &rate) in f.iter().enumerate() {
        assert!(
            rate >= T::zero() && rate.is_finite(),
            "departure rate f[{mi}] = {rate} must be finite and nonnegative"
        );
        cum_f.push(cum_f[mi] + rate * dt);
        delta.push((delta[mi] + (rate - c) * dt).max(T::zero()));
        g.push((delta[mi] / dt + rate).min(c));
    }
    let cum_g: Vec<T> = cum_f.iter().zip(&delta).map(|(&a, &b)| a - b).collect();

    let upsilon = queueing_times(&cum_f, &cum_g, f, dt)?;
    Ok(FlowProfile {
        t0: cfg.cfg().t0,
        dt,
        f: f.to_vec(),
        g,
        cum_f,
        cum_g,
        delta,
        upsilon,
    })
}

/// Inverts the cumulative curves into per-boundary queueing times.
///
/// `cum_f`/`cum_g` are the cumulative departures/arrivals on `M + 1`
/// boundaries and `f` the `M` per-interval departure rates (the slopes of
/// `cum_f`).
///
/// # Errors
///
/// [`SimError::LengthMismatch`] on inconsistent slice lengths;
/// [`SimError::NonInvertible`] when an arrival level exceeds every
/// cumulative departure value (impossible for profiles built by
/// [`propagate_queue`]).
pub fn queueing_times<T: Scalar>(cum_f: &[T], cum_g: &[T], f: &[T], dt: T) -> Result<Vec<T>> {
    let m = f.len();
    if cum_f.len() != m + 1 || cum_g.len() != m + 1 {
        return Err(SimError::LengthMismatch {
            what: "cumulative curves",
            got: cum_f.len().max(cum_g.len()),
            want: m + 1,
        });
    }
    let mut upsilon = vec![T::zero(); m + 1];
    let mut mp = 0usize; // last boundary with cum_f[mp] < level; nondecreasing
    for mi in 1..=m {
        let level = cum_g[mi];
        // no fresh arrival at this boundary: nothing waited here
        if level <= T::zero() || level <= cum_g[mi - 1] {
            continue;
        }
        while mp < m && cum_f[mp + 1] < level {
            mp += 1;
        }
        if mp >= m {
            return Err(SimError::NonInvertible {
                index: mi,
                level: level.to_f64().unwrap_or(f64::NAN),
            });
        }
        // level crosses the segment above mp, whose slope is f[mp] > 0;
        // clamp away negative roundoff dust
        let wait = T::of((mi - mp) as f64) * dt - (level - cum_f[mp]) / f[mp];
        upsilon[mi] = wait.max(T::zero());
    }
    Ok(upsilon)
}
