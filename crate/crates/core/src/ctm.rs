//! Between-days density update and multi-day evolution.
//!
//! Overnight, the payoff density advances by one explicit finite-volume
//! step of the conservation law with triangular flux: per-cell demand
//! `u * min(k, kappa_c)`, supply `w * (kappa - max(k, kappa_c))`, boundary
//! flux `min(demand upstream, supply downstream)`, and closed ends (no
//! mass enters or leaves the tube). Densities drift toward `x = 0`, stack
//! up against the downstream wall, and the jammed block grows until it
//! holds all `N` vehicles — the user-equilibrium fixed point.
//!
//! [`run_until`] iterates the step day after day, evaluating each day's
//! cost-balanced arrival pattern and equilibrium gap, until a [`StopRule`]
//! fires.

use crate::balance::balance;
use crate::config::ValidatedConfig;
use crate::density::DensityProfile;
use crate::grid::Grids;
use crate::{Result, Scalar};

/// Demand, supply, and boundary fluxes of one update step.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxState<T> {
    /// Per-cell sending capacity `u * min(k, kappa_c)`.
    pub demand: Vec<T>,
    /// Per-cell receiving capacity `w * (kappa - max(k, kappa_c))`.
    pub supply: Vec<T>,
    /// Fluxes across the `I + 1` cell boundaries; both ends are closed
    /// (`flux[0] = flux[I] = 0`).
    pub flux: Vec<T>,
}

/// Evaluates demand, supply, and boundary fluxes for a density profile.
pub fn compute_flux<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    density: &DensityProfile<T>,
) -> FluxState<T> {
    let (u, w) = (cfg.cfg().u, cfg.cfg().w);
    let (kappa, kappa_c) = (cfg.kappa(), cfg.kappa_c());
    let n = density.k.len();
    let demand: Vec<T> = density.k.iter().map(|&k| u * k.min(kappa_c)).collect();
    let supply: Vec<T> = density
        .k
        .iter()
        .map(|&k| w * (kappa - k.max(kappa_c)))
        .collect();
    let mut flux = vec![T::zero(); n + 1];
    for b in 1..n {
        flux[b] = demand[b - 1].min(supply[b]);
    }
    FluxState {
        demand,
        supply,
        flux,
    }
}

/// Advances the density by one day.
///
/// The update `k[i] += (dr/dx) (flux[i] - flux[i+1])` conserves mass
/// exactly (closed boundaries) and, whenever `dx/dr >= max(u, w)`, provably
/// keeps every cell inside `[0, kappa]`. Values that drift outside the
/// interval by float roundoff (up to `kappa * 1e-12`) are snapped back to
/// the nearest end.
///
/// # Panics
///
/// When the profile does not have one entry per payoff cell, or when a
/// cell leaves `[0, kappa]` by more than the roundoff allowance — possible
/// only for configurations with `min(u, w) <= dx/dr < max(u, w)`, which
/// validation accepts but the scheme does not tolerate.
pub fn day_step<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    density: &DensityProfile<T>,
) -> DensityProfile<T> {
    assert_eq!(
        density.k.len(),
        cfg.n_cells(),
        "density must have one entry per payoff cell"
    );
    let fs = compute_flux(cfg, density);
    let lambda = cfg.cfg().dr / cfg.cfg().dx;
    let kappa = cfg.kappa();
    let slack = kappa * T::of(1e-12);
    let k = density
        .k
        .iter()
        .enumerate()
        .map(|(i, &ki)| {
            let v = ki + lambda * (fs.flux[i] - fs.flux[i + 1]);
            if v < T::zero() {
                assert!(v >= -slack, "cell {i} left [0, kappa]: k = {v}");
                T::zero()
            } else if v > kappa {
                assert!(v <= kappa + slack, "cell {i} left [0, kappa]: k = {v}");
                kappa
            } else {
                v
            }
        })
        .collect();
    DensityProfile {
        k,
        kappa: density.kappa,
        kappa_c: density.kappa_c,
        dx: density.dx,
    }
}

/// When a multi-day evolution should stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule<T> {
    /// Maximum number of day steps (`max_days` steps span `max_days * dr`
    /// days on the day clock).
    pub max_days: usize,
    /// Stationarity threshold, relative to `kappa`: stop when no cell
    /// changed by more than `density_change_tol * kappa` overnight.
    pub density_change_tol: T,
    /// Equilibrium-gap threshold; `0` disables the gap stop.
    pub ue_gap_tol: T,
}

/// Why a multi-day evolution stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The relative equilibrium gap fell to or below `ue_gap_tol`.
    Converged,
    /// No cell changed by more than `density_change_tol * kappa`.
    Stationary,
    /// `max_days` day steps were taken.
    DayCap,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::Stationary => "stationary",
            StopReason::DayCap => "day-cap",
        })
    }
}

impl<T: Scalar> StopRule<T> {
    /// The rule implied by a configuration: its day cap (truncated to a
    /// whole number of steps) and gap tolerance, with a `1e-10` relative
    /// stationarity threshold.
    pub fn from_config(cfg: &ValidatedConfig<T>) -> Self {
        StopRule {
            max_days: cfg.cfg().max_days.to_usize().unwrap_or(usize::MAX),
            density_change_tol: T::of(1e-10),
            ue_gap_tol: cfg.cfg().ue_gap_tol,
        }
    }

    /// Stop decision for the day just recorded. `steps` counts completed
    /// day updates; `change` is the largest per-cell density change of the
    /// most recent update (`None` on the initial day).
    pub fn check(&self, steps: usize, gap: T, change: Option<T>, kappa: T) -> Option<StopReason> {
        if self.ue_gap_tol > T::zero() && gap <= self.ue_gap_tol {
            return Some(StopReason::Converged);
        }
        if let Some(chg) = change {
            if chg < self.density_change_tol * kappa {
                return Some(StopReason::Stationary);
            }
        }
        if steps >= self.max_days {
            return Some(StopReason::DayCap);
        }
        None
    }
}

/// Day clock, gap, and plateau payoff of every day of an evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTrajectory<T> {
    /// Day clock `r = steps * dr` of each recorded day, starting at 0.
    pub days: Vec<T>,
    /// Relative equilibrium gap of each day's balanced arrival pattern.
    pub gaps: Vec<T>,
    /// Balanced-plateau payoff `x* = -jam_cells * dx` of each day.
    pub x_stars: Vec<T>,
    /// Density of the last recorded day.
    pub final_density: DensityProfile<T>,
    /// Which stop fired.
    pub reason: StopReason,
}

/// Evolves a density day by day until the stop rule fires.
///
/// Every day — including day 0 — is cost-balanced to obtain its gap, so
/// the rule is checked against the initial profile too.
///
/// # Errors
///
/// Propagates length mismatches from the balancing step.
pub fn run_until<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    initial: DensityProfile<T>,
    rule: &StopRule<T>,
) -> Result<DensityTrajectory<T>> {
    let dr = cfg.cfg().dr;
    let kappa = cfg.kappa();
    let mut k = initial;
    let mut days = Vec::new();
    let mut gaps = Vec::new();
    let mut x_stars = Vec::new();
    let mut change: Option<T> = None;
    let mut steps = 0usize;
    let reason = loop {
        let day = balance(cfg, grids, &k)?;
        days.push(T::of(steps as f64) * dr);
        gaps.push(day.gap);
        x_stars.push(day.x_star);
        if let Some(reason) = rule.check(steps, day.gap, change, kappa) {
            break reason;
        }
        let next = day_step(cfg, &k);
        change = Some(next.max_abs_diff(&k));
        k = next;
        steps += 1;
    };
    Ok(DensityTrajectory {
        days,
        gaps,
        x_stars,
        final_density: k,
        reason,
    })
}
