//! Time and payoff grids, and the exact map between them.
//!
//! The study period `[t0, t0p]` is split into `M` intervals of width `dt`;
//! rates (`f`, `g`) live on intervals, cumulative curves and queue lengths
//! on the `M + 1` boundaries. The payoff axis `[-L, 0]` is split into `I`
//! cells of width `dx`; cell `a` (array order, upstream first) covers the
//! payoff interval `((a - I) dx, (a - I + 1) dx]`.
//!
//! Every payoff cell has two preimages on the time axis: an early one left
//! of `t_star` (where the earliness cost `beta (t_star - t)` falls in the
//! cell) and a late one right of it. Because validation guarantees
//! `dx / (beta dt)` and `dx / (gamma dt)` are integers, both preimages
//! contain a fixed whole number of interval centers, and the assignment of
//! centers to cells is computed purely with integer arithmetic — no float
//! comparison can ever send a center to the wrong cell, and a center on
//! the `t_star` boundary cannot occur (centers sit at half-steps).

use crate::config::ValidatedConfig;
use crate::Scalar;

/// Uniform partition of the study period.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    /// Start of the study period (hours).
    pub t0: T,
    /// Interval width (hours).
    pub dt: T,
    /// Number of intervals `M`.
    pub n: usize,
    /// `M + 1` interval boundaries `t0 + m dt`.
    pub boundaries: Vec<T>,
    /// `M` interval centers `t0 + (m + 1/2) dt`.
    pub centers: Vec<T>,
}

impl<T: Scalar> TimeGrid<T> {
    fn build(cfg: &ValidatedConfig<T>) -> Self {
        let (t0, dt, n) = (cfg.cfg().t0, cfg.cfg().dt, cfg.n_intervals());
        let boundaries = (0..=n).map(|m| t0 + T::of(m as f64) * dt).collect();
        let centers = (0..n).map(|m| t0 + T::of(m as f64 + 0.5) * dt).collect();
        TimeGrid {
            t0,
            dt,
            n,
            boundaries,
            centers,
        }
    }
}

/// The two time-index ranges that map into one payoff cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preimage {
    /// Early-arrival interval indices (before `t_star`).
    pub early: std::ops::Range<usize>,
    /// Late-arrival interval indices (after `t_star`).
    pub late: std::ops::Range<usize>,
}

/// Uniform partition of the payoff axis with center/cell maps.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffGrid<T> {
    /// Cell width ($).
    pub dx: T,
    /// Number of cells `I`.
    pub n: usize,
    /// `I + 1` cell boundaries from `-L` up to `0`.
    pub x_boundaries: Vec<T>,
    /// `I` cell centers (array order: most negative payoff first).
    pub x_centers: Vec<T>,
    /// Per cell, the early and late time-interval ranges mapping into it.
    pub cells: Vec<Preimage>,
    /// Inverse map: payoff cell of each time-interval center.
    pub cell_of_center: Vec<usize>,
}

impl<T: Scalar> PayoffGrid<T> {
    fn build(cfg: &ValidatedConfig<T>) -> Self {
        let i = cfg.n_cells();
        let m = cfg.n_intervals();
        let (p, q, m_star) = (cfg.early_per_cell(), cfg.late_per_cell(), cfg.m_star());
        let dx = cfg.cfg().dx;

        let x_boundaries = (0..=i).map(|b| T::of(b as f64 - i as f64) * dx).collect();
        let x_centers = (0..i)
            .map(|a| T::of(a as f64 - i as f64 + 0.5) * dx)
            .collect();

        let mut cells = Vec::with_capacity(i);
        let mut cell_of_center = vec![usize::MAX; m];
        for a in 0..i {
            let early = (m_star - (i - a) * p)..(m_star - (i - a - 1) * p);
            let late = (m_star + (i - 1 - a) * q)..(m_star + (i - a) * q);
            for mi in early.clone().chain(late.clone()) {
                debug_assert_eq!(cell_of_center[mi], usize::MAX, "center claimed twice");
                cell_of_center[mi] = a;
            }
            cells.push(Preimage { early, late });
        }
        debug_assert!(cell_of_center.iter().all(|&a| a != usize::MAX));

        PayoffGrid {
            dx,
            n: i,
            x_boundaries,
            x_centers,
            cells,
            cell_of_center,
        }
    }

    /// Signed cell label counting down from the cell that ends at `x = 0`
    /// (label `0`) to the most upstream cell (label `-(I - 1)`).
    pub fn signed_label(&self, a: usize) -> isize {
        a as isize + 1 - self.n as isize
    }
}

/// Matched time and payoff grids for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids<T> {
    pub time: TimeGrid<T>,
    pub payoff: PayoffGrid<T>,
}

/// Builds both grids from a validated configuration.
pub fn build_grids<T: Scalar>(cfg: &ValidatedConfig<T>) -> Grids<T> {
    Grids {
        time: TimeGrid::build(cfg),
        payoff: PayoffGrid::build(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate;
    use crate::cost::scheduling_cost;
    use crate::demo::demo_config;
    use approx::assert_relative_eq;

    fn demo_grids() -> (crate::ValidatedConfig<f64>, Grids<f64>) {
        let v = validate(demo_config::<f64>()).unwrap();
        let g = build_grids(&v);
        (v, g)
    }

    #[test]
    fn grid_sizes_and_ends_match_the_config() {
        let (v, g) = demo_grids();
        assert_eq!(g.time.boundaries.len(), v.n_intervals() + 1);
        assert_eq!(g.time.centers.len(), v.n_intervals());
        assert_relative_eq!(g.time.boundaries[0], -4.0);
        assert_relative_eq!(*g.time.boundaries.last().unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(g.payoff.x_boundaries.len(), v.n_cells() + 1);
        assert_relative_eq!(g.payoff.x_boundaries[0], -100.0, epsilon = 1e-12);
        assert_relative_eq!(*g.payoff.x_boundaries.last().unwrap(), 0.0);
        assert_relative_eq!(*g.payoff.x_centers.last().unwrap(), -0.25);
    }

    #[test]
    fn every_center_belongs_to_exactly_one_cell() {
        let (v, g) = demo_grids();
        let mut counts = vec![0usize; v.n_intervals()];
        for pre in &g.payoff.cells {
            assert_eq!(pre.early.len(), v.early_per_cell());
            assert_eq!(pre.late.len(), v.late_per_cell());
            for mi in pre.early.clone().chain(pre.late.clone()) {
                counts[mi] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn inverse_map_agrees_with_the_ranges() {
        let (_, g) = demo_grids();
        for (a, pre) in g.payoff.cells.iter().enumerate() {
            for mi in pre.early.clone().chain(pre.late.clone()) {
                assert_eq!(g.payoff.cell_of_center[mi], a);
            }
        }
    }

    #[test]
    fn centers_around_t_star_split_early_late_into_the_last_cell() {
        let (v, g) = demo_grids();
        let last = v.n_cells() - 1;
        assert_eq!(g.payoff.cell_of_center[v.m_star() - 1], last);
        assert_eq!(g.payoff.cell_of_center[v.m_star()], last);
        assert_eq!(g.payoff.signed_label(last), 0);
        assert_eq!(g.payoff.signed_label(0), -(v.n_cells() as isize) + 1);
    }

    #[test]
    fn preimage_centers_cost_into_their_own_cell() {
        let (v, g) = demo_grids();
        for (a, pre) in g.payoff.cells.iter().enumerate() {
            let lo = g.payoff.x_boundaries[a];
            let hi = g.payoff.x_boundaries[a + 1];
            for mi in pre.early.clone().chain(pre.late.clone()) {
                let x = -scheduling_cost(v.cfg(), g.time.centers[mi]);
                assert!(
                    lo < x && x <= hi + 1e-12,
                    "center {mi} maps to payoff {x}, outside cell {a} ({lo}, {hi}]"
                );
            }
        }
    }
}
