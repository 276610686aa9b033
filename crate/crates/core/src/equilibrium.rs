//! The analytic equilibrium, equilibrium certificates, and stability
//! experiments.
//!
//! At user equilibrium all `N` vehicles occupy the downstream stretch
//! `[-L*, 0]` of the payoff tube at jam density, with `L* = N / kappa`.
//! The corresponding day departs at rate `C / (1 - beta/alpha)` from
//! `t1* = t_star - L*/beta` until the switch time, then at
//! `C / (1 + gamma/alpha)` until `t2* = t_star + L*/gamma`; everyone pays
//! exactly `L*`.
//!
//! [`check_ue`] certifies a balanced day from both sides: no used arrival
//! interval beats the cheapest used cost, and no departing vehicle can
//! gain by the time it reaches the bottleneck. The perturbation
//! experiments push the equilibrium off balance and watch the disturbance
//! decay at the predicted geometric rate `1 - min(u, w) dr / L*` per day
//! step.

use crate::balance::BalancedDay;
use crate::config::ValidatedConfig;
use crate::ctm::day_step;
use crate::density::DensityProfile;
use crate::error::SimError;
use crate::grid::Grids;
use crate::{Result, Scalar};

/// The closed-form equilibrium of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SpueSolution<T> {
    /// Jammed tube length `N / kappa` ($); also the common trip cost.
    pub l_star: T,
    /// Arrival window `(t1*, t2*)`.
    pub window: (T, T),
    /// Departure-rate switch time.
    pub t_switch: T,
    /// Departure rates before and after the switch.
    pub rates: (T, T),
    /// Number of fully jammed payoff cells.
    pub jam_cells: usize,
    /// Per-interval departure rates (exact when the window is
    /// grid-aligned, otherwise quantised to whole intervals).
    pub f: Vec<T>,
    /// Equilibrium density: `kappa` over the jammed cells plus, when `L*`
    /// is not a whole number of cells, one partial upstream cell sized so
    /// the mass is exactly `N`.
    pub density: DensityProfile<T>,
}

/// Builds the closed-form equilibrium.
pub fn analytic_spue<T: Scalar>(cfg: &ValidatedConfig<T>, grids: &Grids<T>) -> SpueSolution<T> {
    let c = cfg.cfg().c;
    let kappa = cfg.kappa();
    let l_star = cfg.cfg().n / kappa;
    let t_star = cfg.cfg().t_star;
    let t1 = t_star - l_star / cfg.cfg().beta;
    let t2 = t_star + l_star / cfg.cfg().gamma;
    let ba = cfg.cfg().beta / cfg.cfg().alpha;
    let t_switch = ba * t1 + (T::one() - ba) * t_star;
    let rate1 = c / (T::one() - ba);
    let rate2 = c / (T::one() + cfg.cfg().gamma / cfg.cfg().alpha);

    let f = grids
        .time
        .centers
        .iter()
        .map(|&t| {
            if t >= t1 && t < t_switch {
                rate1
            } else if t >= t_switch && t < t2 {
                rate2
            } else {
                T::zero()
            }
        })
        .collect();

    let n_cells = cfg.n_cells();
    let dx = cfg.cfg().dx;
    let full = (l_star / dx)
        .floor()
        .to_usize()
        .unwrap_or(n_cells)
        .min(n_cells);
    let mut k = vec![T::zero(); n_cells];
    for cell in k.iter_mut().skip(n_cells - full) {
        *cell = kappa;
    }
    let remainder = (cfg.cfg().n - kappa * dx * T::of(full as f64)) / dx;
    if full < n_cells && remainder > T::zero() {
        k[n_cells - full - 1] = remainder.min(kappa);
    }

    SpueSolution {
        l_star,
        window: (t1, t2),
        t_switch,
        rates: (rate1, rate2),
        jam_cells: full,
        f,
        density: DensityProfile {
            k,
            kappa,
            kappa_c: cfg.kappa_c(),
            dx,
        },
    }
}

/// Equilibrium certificate of a balanced day ($ everywhere).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeReport<T> {
    /// Cheapest used-trip cost.
    pub phi_min: T,
    /// Largest excess over `phi_min` among used arrival intervals.
    pub arrival_residual: T,
    /// Largest deviation from `phi_min` of the cost met at the arrival
    /// time implied by each used departure interval (queue delay added,
    /// cost interpolated between interval centers).
    pub departure_residual: T,
    /// Smallest cost disadvantage of the unused arrival intervals
    /// (infinite when every interval is used).
    pub unused_margin: T,
}

/// Linear interpolation of per-interval values at time `t`, clamped to
/// the span of the interval centers.
fn interp_at_centers<T: Scalar>(grids: &Grids<T>, values: &[T], t: T) -> T {
    let centers = &grids.time.centers;
    let last = centers.len() - 1;
    let pos = (t - centers[0]) / grids.time.dt;
    if pos <= T::zero() {
        return values[0];
    }
    let seg = pos.floor().to_usize().unwrap_or(last).min(last - 1);
    let lambda = (pos - T::of(seg as f64)).min(T::one());
    values[seg] * (T::one() - lambda) + values[seg + 1] * lambda
}

/// Certifies how close a balanced day is to user equilibrium.
pub fn check_ue<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    day: &BalancedDay<T>,
) -> UeReport<T> {
    let used_tol = cfg.cfg().c * T::of(1e-6);
    let phi = &day.costs.phi;

    let mut phi_min = T::infinity();
    for (&gm, &ph) in day.flows.g.iter().zip(phi) {
        if gm > used_tol {
            phi_min = phi_min.min(ph);
        }
    }
    if !phi_min.is_finite() {
        return UeReport {
            phi_min: T::zero(),
            arrival_residual: T::zero(),
            departure_residual: T::zero(),
            unused_margin: T::infinity(),
        };
    }

    let mut arrival_residual = T::zero();
    let mut unused_margin = T::infinity();
    for (&gm, &ph) in day.flows.g.iter().zip(phi) {
        if gm > used_tol {
            arrival_residual = arrival_residual.max(ph - phi_min);
        } else {
            unused_margin = unused_margin.min(ph - phi_min);
        }
    }

    let c = cfg.cfg().c;
    let mut departure_residual = T::zero();
    for (m, &fm) in day.flows.f.iter().enumerate() {
        if fm > used_tol {
            let t_arrive = grids.time.centers[m] + day.flows.delta[m + 1] / c;
            let cost = interp_at_centers(grids, phi, t_arrive);
            departure_residual = departure_residual.max((cost - phi_min).abs());
        }
    }

    UeReport {
        phi_min,
        arrival_residual,
        departure_residual,
        unused_margin,
    }
}

/// Predicted fraction of an equilibrium perturbation remaining after `r`
/// days: `exp(-min(u, w) r / L*)`.
pub fn analytic_decay<T: Scalar>(cfg: &ValidatedConfig<T>, r: T) -> T {
    let l_star = cfg.cfg().n / cfg.kappa();
    (-(cfg.cfg().u.min(cfg.cfg().w)) * r / l_star).exp()
}

/// Measured decay of an equilibrium perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult<T> {
    /// Initial disturbance (vehicles per $).
    pub epsilon0: T,
    /// Day clock of each sample.
    pub days: Vec<T>,
    /// Disturbance remaining at each sample.
    pub epsilons: Vec<T>,
    /// Exact per-step shrink factor `1 - min(u, w) dr / L*`.
    pub per_step_factor: T,
    /// Decay rate fitted to `ln(epsilon)` by least squares (per day).
    pub fitted_rate: T,
    /// Continuum prediction `min(u, w) / L*` (per day).
    pub theory_rate: T,
    /// Goodness of the log-linear fit.
    pub r_squared: T,
}

fn ensure_small<T: Scalar>(cfg: &ValidatedConfig<T>, epsilon0: T) -> Result<T> {
    assert!(
        epsilon0 >= T::zero() && epsilon0.is_finite(),
        "perturbation must be nonnegative and finite (got {epsilon0})"
    );
    let limit = cfg.kappa_c() * T::of(0.1);
    if epsilon0 > limit {
        return Err(SimError::PerturbationTooLarge {
            epsilon0: epsilon0.to_f64().unwrap_or(f64::NAN),
            limit: limit.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(limit)
}

/// Two-section stability experiment.
///
/// Aggregates the tube into two sections of width `L*`: the jammed block,
/// short of `epsilon0` vehicles per $, and the stretch upstream holding
/// exactly that surplus. Each day step moves `min(u, w) * epsilon * dr/L*`
/// of the surplus downstream, so the disturbance shrinks geometrically;
/// the result reports the fitted and predicted rates.
///
/// A zero disturbance stays identically zero; the log-linear fit is then
/// vacuous and the closed-form rate is reported for both rates.
///
/// # Errors
///
/// [`SimError::PerturbationTooLarge`] when `epsilon0 > 0.1 kappa_c`
/// (larger disturbances leave the linear decay regime).
///
/// # Panics
///
/// When `epsilon0` is negative or not finite, or `steps < 2`.
pub fn perturbation_experiment<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    epsilon0: T,
    steps: usize,
) -> Result<PerturbationResult<T>> {
    ensure_small(cfg, epsilon0)?;
    assert!(steps >= 2, "need at least two day steps to fit a rate");

    let (u, w) = (cfg.cfg().u, cfg.cfg().w);
    let (kappa, kappa_c) = (cfg.kappa(), cfg.kappa_c());
    let l_star = cfg.cfg().n / kappa;
    let dr = cfg.cfg().dr;
    let lambda = dr / l_star;

    if epsilon0 == T::zero() {
        let theory = u.min(w) / l_star;
        return Ok(PerturbationResult {
            epsilon0,
            days: (0..=steps).map(|j| T::of(j as f64) * dr).collect(),
            epsilons: vec![T::zero(); steps + 1],
            per_step_factor: T::one() - u.min(w) * lambda,
            fitted_rate: theory,
            theory_rate: theory,
            r_squared: T::one(),
        });
    }

    let mut upstream = epsilon0;
    let mut jammed = kappa - epsilon0;
    let mut epsilons = vec![epsilon0];
    for _ in 0..steps {
        let demand = u * upstream.min(kappa_c);
        let supply = w * (kappa - jammed.max(kappa_c));
        let flux = demand.min(supply);
        upstream = upstream - lambda * flux;
        jammed = jammed + lambda * flux;
        epsilons.push(upstream);
    }
    let days: Vec<T> = (0..=steps).map(|j| T::of(j as f64) * dr).collect();

    let (slope, r_squared) = log_linear_fit(&days, &epsilons);
    Ok(PerturbationResult {
        epsilon0,
        days,
        epsilons,
        per_step_factor: T::one() - u.min(w) * lambda,
        fitted_rate: -slope,
        theory_rate: u.min(w) / l_star,
        r_squared,
    })
}

/// Least-squares slope and `R^2` of `ln(eps)` against `day`, over the
/// strictly positive samples.
fn log_linear_fit<T: Scalar>(days: &[T], epsilons: &[T]) -> (T, T) {
    let pts: Vec<(T, T)> = days
        .iter()
        .zip(epsilons)
        .filter(|(_, &e)| e > T::zero())
        .map(|(&r, &e)| (r, e.ln()))
        .collect();
    assert!(pts.len() >= 2, "need two positive samples to fit a rate");
    let n = T::of(pts.len() as f64);
    let sx: T = pts.iter().map(|&(x, _)| x).sum();
    let sy: T = pts.iter().map(|&(_, y)| y).sum();
    let sxx: T = pts.iter().map(|&(x, _)| x * x).sum();
    let sxy: T = pts.iter().map(|&(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;

    let mean = sy / n;
    let ss_tot: T = pts.iter().map(|&(_, y)| (y - mean) * (y - mean)).sum();
    let ss_res: T = pts
        .iter()
        .map(|&(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::one()
    };
    (slope, r_squared)
}

/// Full-grid stability experiment: swap `epsilon0` of density from the
/// most upstream jammed cell of the equilibrium profile to its upstream
/// neighbour, step the density forward, and report `max |k - k*|` per
/// day (index `j` is day `j * dr`).
///
/// On grids where one day step transports a full cell
/// (`dr min(u, w) = dx`), the disturbance dies in a single step.
///
/// # Errors
///
/// [`SimError::PerturbationTooLarge`] when the disturbance is beyond
/// `0.1 kappa_c` or does not fit in the upstream neighbour cell.
///
/// # Panics
///
/// When the equilibrium leaves no room to perturb (no jammed cell, or the
/// jam fills the whole tube), or `epsilon0` is negative or not finite.
pub fn perturbation_fine_grid<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    epsilon0: T,
    steps: usize,
) -> Result<Vec<T>> {
    ensure_small(cfg, epsilon0)?;
    let spue = analytic_spue(cfg, grids);
    let reference = spue.density;
    let n_cells = cfg.n_cells();
    assert!(
        spue.jam_cells >= 1 && spue.jam_cells < n_cells,
        "equilibrium must have a jammed block with room upstream"
    );
    let jam_start = n_cells - spue.jam_cells;
    let mut density = reference.clone();
    let bumped = density.k[jam_start - 1] + epsilon0;
    if bumped > cfg.kappa() {
        return Err(SimError::PerturbationTooLarge {
            epsilon0: epsilon0.to_f64().unwrap_or(f64::NAN),
            limit: (cfg.kappa() - reference.k[jam_start - 1])
                .to_f64()
                .unwrap_or(f64::NAN),
        });
    }
    density.k[jam_start] = density.k[jam_start] - epsilon0;
    density.k[jam_start - 1] = bumped;

    let mut deviations = Vec::with_capacity(steps + 1);
    deviations.push(density.max_abs_diff(&reference));
    for _ in 0..steps {
        density = day_step(cfg, &density);
        deviations.push(density.max_abs_diff(&reference));
    }
    Ok(deviations)
}
