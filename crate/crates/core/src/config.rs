//! Simulation parameters, validation, and derived grid constants.
//!
//! [`SimConfig`] carries the raw scenario (demand, capacity, cost rates,
//! study period, tube speeds, step sizes) exactly as it appears in a config
//! file. [`validate`] checks the physical and numerical preconditions once
//! and returns a [`ValidatedConfig`] from which every integer grid constant
//! (cell counts, centers-per-cell, index of the preferred arrival time) has
//! been extracted exactly; all later index arithmetic uses those integers so
//! float comparisons never decide cell membership.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Raw scenario parameters. Field names match the config-file keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: Deserialize<'de> + num_traits::FromPrimitive"))]
pub struct SimConfig<T> {
    /// Total number of commuters (vehicles) that must pass the bottleneck.
    #[serde(rename = "N")]
    pub n: T,
    /// Bottleneck capacity (vehicles per hour).
    #[serde(rename = "C")]
    pub c: T,
    /// Queueing-time cost rate ($ per hour of waiting).
    pub alpha: T,
    /// Earliness cost rate ($ per hour early); must satisfy `beta < alpha`.
    pub beta: T,
    /// Lateness cost rate ($ per hour late).
    pub gamma: T,
    /// Preferred arrival time (hours).
    pub t_star: T,
    /// Start of the study period (hours).
    pub t0: T,
    /// End of the study period (hours).
    pub t0p: T,
    /// Free-flow speed of the payoff tube ($ per day).
    pub u: T,
    /// Congestion wave speed of the payoff tube ($ per day).
    pub w: T,
    /// Time step (hours).
    pub dt: T,
    /// Payoff cell size ($).
    pub dx: T,
    /// Day step (days).
    pub dr: T,
    /// Relative density slack below jam density that still counts as jammed.
    #[serde(default = "default_tol")]
    pub jam_tol: T,
    /// Demand-weighted equilibrium-gap threshold that stops a run
    /// (0 disables the gap stop).
    #[serde(default = "default_tol")]
    pub ue_gap_tol: T,
    /// Day cap for a run.
    #[serde(default = "default_max_days")]
    pub max_days: T,
}

fn default_tol<T: num_traits::FromPrimitive>() -> T {
    T::from_f64(1e-3).expect("default tolerance must be representable")
}

fn default_max_days<T: num_traits::FromPrimitive>() -> T {
    T::from_f64(1000.0).expect("default day cap must be representable")
}

/// Configuration rejected by [`validate`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// A key that must be strictly positive is zero or negative.
    #[error("config key {key} must be positive (got {value})")]
    NonPositive { key: &'static str, value: String },

    /// Cost rates are unusable: nonpositive, or `beta >= alpha` (a queue
    /// would then be cheaper than arriving early and no equilibrium exists).
    #[error("bad cost rates: {detail}")]
    BadCosts { detail: String },

    /// The study period does not bracket `t_star` symmetrically in cost.
    #[error("bad study period: {detail}")]
    BadHorizon { detail: String },

    /// The day step is too large for the cell size: `dx/dr < min(u, w)`.
    #[error(
        "CFL condition violated: dx/dr = {ratio} is below min(u, w) = {min_uw} \
         (decrease dr or coarsen dx)"
    )]
    CflViolation { ratio: String, min_uw: String },

    /// Steps do not tile the study period / payoff axis exactly.
    #[error("misaligned grids: {detail}")]
    MisalignedGrids { detail: String },
}

/// A [`SimConfig`] that passed validation, plus exactly-derived constants.
///
/// Immutable by construction; obtain one through [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedConfig<T> {
    cfg: SimConfig<T>,
    tube_len: T,
    kappa: T,
    kappa_c: T,
    n_cells: usize,
    n_intervals: usize,
    early_per_cell: usize,
    late_per_cell: usize,
    m_star: usize,
}

impl<T: Scalar> ValidatedConfig<T> {
    /// The underlying raw parameters.
    pub fn cfg(&self) -> &SimConfig<T> {
        &self.cfg
    }

    /// Tube length `L = beta * (t_star - t0)` ($).
    pub fn tube_len(&self) -> T {
        self.tube_len
    }

    /// Jam density `kappa = (1/beta + 1/gamma) * C` (vehicles per $).
    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Critical density `kappa_c = w / (u + w) * kappa` (vehicles per $).
    pub fn kappa_c(&self) -> T {
        self.kappa_c
    }

    /// Number of payoff cells `I = L / dx`.
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of time intervals `M = (t0p - t0) / dt`.
    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    /// Early-arrival interval centers per payoff cell, `dx / (beta * dt)`.
    pub fn early_per_cell(&self) -> usize {
        self.early_per_cell
    }

    /// Late-arrival interval centers per payoff cell, `dx / (gamma * dt)`.
    pub fn late_per_cell(&self) -> usize {
        self.late_per_cell
    }

    /// Boundary index of the preferred arrival time, `(t_star - t0) / dt`.
    pub fn m_star(&self) -> usize {
        self.m_star
    }
}

fn require_positive<T: Scalar>(key: &'static str, value: T) -> Result<(), ConfigError> {
    if value > T::zero() {
        Ok(())
    } else {
        Err(ConfigError::NonPositive {
            key,
            value: format!("{value}"),
        })
    }
}

/// Rounds `value` to the integer it must equal; errors when it is not an
/// integer within the alignment tolerance.
fn exact_integer<T: Scalar>(value: T, what: &str) -> Result<usize, ConfigError> {
    // 1e-9 relative, widened to a few epsilon for scalars (f32) whose
    // roundoff exceeds that
    let tol = T::of(1e-9).max(T::epsilon() * T::of(8.0));
    let rounded = value.round();
    if rounded < T::one() || (value - rounded).abs() > tol * value.abs().max(T::one()) {
        return Err(ConfigError::MisalignedGrids {
            detail: format!("{what} = {value} must be a positive integer"),
        });
    }
    Ok(rounded.to_usize().expect("positive integer fits usize"))
}

/// Checks all preconditions and derives the integer grid constants.
///
/// # Errors
///
/// [`ConfigError::NonPositive`] for nonpositive `N`, `C`, `u`, `w`, `dt`,
/// `dx`, `dr`, `max_days`; [`ConfigError::BadCosts`] for nonpositive
/// `alpha`/`beta`/`gamma` or `beta >= alpha`; [`ConfigError::BadHorizon`]
/// when `t0 < t_star < t0p` fails, when the boundary costs differ
/// (`beta * (t_star - t0) != gamma * (t0p - t_star)`), or when the demand
/// cannot fit the tube (`N > kappa * L`); [`ConfigError::CflViolation`]
/// when `dx/dr < min(u, w)`; [`ConfigError::MisalignedGrids`] when
/// `dx/(beta*dt)`, `dx/(gamma*dt)`, `(t_star-t0)/dt`, `(t0p-t_star)/dt` or
/// `L/dx` are not positive integers, or when those integers are mutually
/// inconsistent.
pub fn validate<T: Scalar>(cfg: SimConfig<T>) -> Result<ValidatedConfig<T>, ConfigError> {
    require_positive("N", cfg.n)?;
    require_positive("C", cfg.c)?;
    require_positive("u", cfg.u)?;
    require_positive("w", cfg.w)?;
    require_positive("dt", cfg.dt)?;
    require_positive("dx", cfg.dx)?;
    require_positive("dr", cfg.dr)?;
    require_positive("max_days", cfg.max_days)?;

    for (key, value) in [
        ("alpha", cfg.alpha),
        ("beta", cfg.beta),
        ("gamma", cfg.gamma),
    ] {
        if value <= T::zero() {
            return Err(ConfigError::BadCosts {
                detail: format!("cost rate {key} must be positive (got {value})"),
            });
        }
    }
    if cfg.beta >= cfg.alpha {
        return Err(ConfigError::BadCosts {
            detail: format!(
                "beta must be < alpha (beta = {}, alpha = {})",
                cfg.beta, cfg.alpha
            ),
        });
    }
    if cfg.jam_tol < T::zero() || cfg.jam_tol >= T::one() {
        return Err(ConfigError::NonPositive {
            key: "jam_tol",
            value: format!("{} (must lie in [0, 1))", cfg.jam_tol),
        });
    }
    if cfg.ue_gap_tol < T::zero() {
        return Err(ConfigError::NonPositive {
            key: "ue_gap_tol",
            value: format!("{} (must be >= 0; 0 disables the gap stop)", cfg.ue_gap_tol),
        });
    }

    if !(cfg.t0 < cfg.t_star && cfg.t_star < cfg.t0p) {
        return Err(ConfigError::BadHorizon {
            detail: format!(
                "need t0 < t_star < t0p (t0 = {}, t_star = {}, t0p = {})",
                cfg.t0, cfg.t_star, cfg.t0p
            ),
        });
    }
    let early_span = cfg.beta * (cfg.t_star - cfg.t0);
    let late_span = cfg.gamma * (cfg.t0p - cfg.t_star);
    let horizon_tol = T::of(1e-12).max(T::epsilon() * T::of(8.0));
    if (early_span - late_span).abs() > horizon_tol * early_span.abs() {
        return Err(ConfigError::BadHorizon {
            detail: format!(
                "boundary costs differ: beta*(t_star-t0) = {early_span} but \
                 gamma*(t0p-t_star) = {late_span} (the tube needs equal ends)"
            ),
        });
    }
    let tube_len = early_span;

    let kappa = (T::one() / cfg.beta + T::one() / cfg.gamma) * cfg.c;
    let kappa_c = cfg.w / (cfg.u + cfg.w) * kappa;
    if cfg.n > kappa * tube_len * (T::one() + horizon_tol) {
        return Err(ConfigError::BadHorizon {
            detail: format!(
                "demand N = {} exceeds what the study period can serve \
                 (kappa * L = {})",
                cfg.n,
                kappa * tube_len
            ),
        });
    }

    let ratio = cfg.dx / cfg.dr;
    let min_uw = cfg.u.min(cfg.w);
    if ratio < min_uw {
        return Err(ConfigError::CflViolation {
            ratio: format!("{ratio}"),
            min_uw: format!("{min_uw}"),
        });
    }

    let early_per_cell = exact_integer(cfg.dx / (cfg.beta * cfg.dt), "dx/(beta*dt)")?;
    let late_per_cell = exact_integer(cfg.dx / (cfg.gamma * cfg.dt), "dx/(gamma*dt)")?;
    let m_star = exact_integer((cfg.t_star - cfg.t0) / cfg.dt, "(t_star-t0)/dt")?;
    let m_late = exact_integer((cfg.t0p - cfg.t_star) / cfg.dt, "(t0p-t_star)/dt")?;
    let n_cells = exact_integer(tube_len / cfg.dx, "L/dx")?;
    if n_cells * early_per_cell != m_star || n_cells * late_per_cell != m_late {
        return Err(ConfigError::MisalignedGrids {
            detail: format!(
                "inconsistent tiling: L/dx = {n_cells} cells with {early_per_cell} early and \
                 {late_per_cell} late centers must give (t_star-t0)/dt = {m_star} and \
                 (t0p-t_star)/dt = {m_late}"
            ),
        });
    }

    Ok(ValidatedConfig {
        cfg,
        tube_len,
        kappa,
        kappa_c,
        n_cells,
        n_intervals: m_star + m_late,
        early_per_cell,
        late_per_cell,
        m_star,
    })
}
