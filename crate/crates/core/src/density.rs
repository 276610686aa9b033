//! Folding arrival flows into payoff densities and back.
//!
//! A day's arrival pattern `g(t)` becomes a density on the payoff axis by
//! collecting, per payoff cell, the vehicles arriving in that cell's early
//! and late preimages: `k[a] = (dt/dx) * sum of g over the preimage
//! centers`. The inverse spreads a cell's density back over its preimages
//! with the *equal-splitting* rule `g = (beta gamma / (beta + gamma)) k`
//! on both branches, which is exactly the split that makes a jammed cell
//! (`k = kappa`) produce capacity arrivals (`g = C`) on its whole
//! preimage. Under the grid alignment enforced at validation the two maps
//! are mutual inverses up to float roundoff: per cell the composition
//! multiplies by `split * (p + q) * dt / dx`, which is exactly 1.

use crate::config::ValidatedConfig;
use crate::error::SimError;
use crate::grid::Grids;
use crate::{Result, Scalar};

/// Vehicle density on the payoff tube (vehicles per $).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile<T> {
    /// Per-cell densities, upstream (most negative payoff) first.
    pub k: Vec<T>,
    /// Jam density the profile saturates at.
    pub kappa: T,
    /// Critical density separating free flow from congestion.
    pub kappa_c: T,
    /// Cell width ($).
    pub dx: T,
}

impl<T: Scalar> DensityProfile<T> {
    /// Total imaginary mass `sum k * dx` (vehicles).
    pub fn mass(&self) -> T {
        self.k.iter().copied().sum::<T>() * self.dx
    }

    /// Largest absolute per-cell difference to another profile.
    pub fn max_abs_diff(&self, other: &DensityProfile<T>) -> T {
        self.k
            .iter()
            .zip(&other.k)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Whether every cell lies in `[0, kappa]`.
    pub fn within_bounds(&self) -> bool {
        self.k.iter().all(|&k| k >= T::zero() && k <= self.kappa)
    }
}

/// Folds arrival rates into the payoff-cell densities.
///
/// # Errors
///
/// [`SimError::LengthMismatch`] when `g` does not have `M` entries.
pub fn density_from_arrivals<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    g: &[T],
) -> Result<DensityProfile<T>> {
    if g.len() != cfg.n_intervals() {
        return Err(SimError::LengthMismatch {
            what: "arrival rates g",
            got: g.len(),
            want: cfg.n_intervals(),
        });
    }
    let scale = cfg.cfg().dt / cfg.cfg().dx;
    let k = grids
        .payoff
        .cells
        .iter()
        .map(|pre| {
            let early: T = g[pre.early.clone()].iter().copied().sum();
            let late: T = g[pre.late.clone()].iter().copied().sum();
            (early + late) * scale
        })
        .collect();
    Ok(DensityProfile {
        k,
        kappa: cfg.kappa(),
        kappa_c: cfg.kappa_c(),
        dx: cfg.cfg().dx,
    })
}

/// Spreads cell densities back into arrival rates (equal splitting).
///
/// # Errors
///
/// [`SimError::LengthMismatch`] when the profile does not have `I` cells.
pub fn arrivals_from_density<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    density: &DensityProfile<T>,
) -> Result<Vec<T>> {
    if density.k.len() != cfg.n_cells() {
        return Err(SimError::LengthMismatch {
            what: "density cells k",
            got: density.k.len(),
            want: cfg.n_cells(),
        });
    }
    let (beta, gamma) = (cfg.cfg().beta, cfg.cfg().gamma);
    let split = beta * gamma / (beta + gamma);
    Ok(grids
        .payoff
        .cell_of_center
        .iter()
        .map(|&a| split * density.k[a])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate;
    use crate::demo::{demo_config, demo_departure_pieces};
    use crate::io::rates_from_pieces;
    use crate::queue::propagate_queue;
    use approx::assert_relative_eq;

    fn demo() -> (crate::ValidatedConfig<f64>, Grids<f64>) {
        let v = validate(demo_config::<f64>()).unwrap();
        let g = crate::grid::build_grids(&v);
        (v, g)
    }

    #[test]
    fn demo_initial_density_has_known_values() {
        let (v, gr) = demo();
        let f = rates_from_pieces(&v, &gr, &demo_departure_pieces()).unwrap();
        let p = propagate_queue(&v, &f).unwrap();
        let d = density_from_arrivals(&v, &gr, &p.g).unwrap();

        assert_relative_eq!(d.mass(), 3600.0, epsilon = 1e-8);
        // cell ending at x = 0: both preimages are inside queued stretches
        assert_relative_eq!(d.k[199], 90.0, epsilon = 1e-9);
        // cell (-25.5, -25]: early preimage (-1.02, -1] and late [0.25, 0.255)
        // are both served at capacity
        assert_relative_eq!(d.k[150], 90.0, epsilon = 1e-9);
        // cell (-54, -53.5]: early preimage carries 900 veh/h, late is empty
        assert_relative_eq!(d.k[92], 36.0, epsilon = 1e-9);
        assert!(d.within_bounds());
    }

    #[test]
    fn jammed_cells_split_into_capacity_arrivals() {
        let (v, gr) = demo();
        let d = DensityProfile {
            k: vec![v.kappa(); v.n_cells()],
            kappa: v.kappa(),
            kappa_c: v.kappa_c(),
            dx: v.cfg().dx,
        };
        let g = arrivals_from_density(&v, &gr, &d).unwrap();
        for &gm in &g {
            assert_relative_eq!(gm, 1800.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn round_trip_from_density_is_identity() {
        let (v, gr) = demo();
        // deterministic non-uniform profile in [0, kappa]
        let k: Vec<f64> = (0..v.n_cells())
            .map(|a| v.kappa() * 0.5 * (1.0 + ((a * 37 % 101) as f64 / 101.0).sin()))
            .collect();
        let d = DensityProfile {
            k: k.clone(),
            kappa: v.kappa(),
            kappa_c: v.kappa_c(),
            dx: v.cfg().dx,
        };
        let g = arrivals_from_density(&v, &gr, &d).unwrap();
        let d2 = density_from_arrivals(&v, &gr, &g).unwrap();
        for (a, (&ka, &kb)) in k.iter().zip(&d2.k).enumerate() {
            assert!(
                (ka - kb).abs() <= 1e-13 * ka.abs().max(1.0),
                "cell {a}: {ka} vs {kb}"
            );
        }
    }

    #[test]
    fn transform_preserves_mass_between_axes() {
        let (v, gr) = demo();
        let f = rates_from_pieces(&v, &gr, &demo_departure_pieces()).unwrap();
        let p = propagate_queue(&v, &f).unwrap();
        let d = density_from_arrivals(&v, &gr, &p.g).unwrap();
        let arrived: f64 = p.g.iter().sum::<f64>() * v.cfg().dt;
        assert_relative_eq!(d.mass(), arrived, epsilon = 1e-9);
        let g2 = arrivals_from_density(&v, &gr, &d).unwrap();
        let back: f64 = g2.iter().sum::<f64>() * v.cfg().dt;
        assert_relative_eq!(back, arrived, epsilon = 1e-8);
    }
}
