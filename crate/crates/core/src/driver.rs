//! Simulation driver: from a first day's departure profile to the
//! day-to-day loop, streaming one record per day into a sink.
//!
//! Day 0 is special: its departure pattern is given, so its queue, costs,
//! and gap come from the queue recursion. Every later day starts from the
//! evolved density and is cost-balanced, which *defines* that day's flows
//! and costs. The stop rule is checked against every recorded day,
//! including day 0.

use crate::balance::{balance, detect_jammed_interval, ue_gap};
use crate::config::ValidatedConfig;
use crate::cost::{total_costs, CostProfile};
use crate::ctm::{day_step, StopReason, StopRule};
use crate::density::{density_from_arrivals, DensityProfile};
use crate::grid::Grids;
use crate::queue::{propagate_queue, FlowProfile};
use crate::{Result, Scalar};

/// Everything known about one simulated day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord<T> {
    /// Day clock `r = step * dr`.
    pub day: T,
    /// Number of overnight updates taken before this day.
    pub step: usize,
    /// Departure/arrival flows and queue state.
    pub flows: FlowProfile<T>,
    /// Queueing, schedule-deviation, and total costs.
    pub costs: CostProfile<T>,
    /// Payoff density the day folds into.
    pub density: DensityProfile<T>,
    /// Number of consecutive jammed cells at the downstream end.
    pub jam_cells: usize,
    /// Plateau payoff `-jam_cells * dx`.
    pub x_star: T,
    /// Relative equilibrium gap.
    pub gap: T,
    /// Cheapest used-trip cost.
    pub phi_min: T,
    /// Vehicles held by the density (should stay at `N`).
    pub mass: T,
    /// Largest per-cell density change of the overnight update that
    /// produced this day; `None` for day 0, which has no predecessor.
    pub density_change: Option<T>,
}

/// Receives each day's record as the simulation produces it.
pub trait DaySink<T> {
    /// Called once per simulated day, in day order.
    ///
    /// # Errors
    ///
    /// Sinks that persist records may fail with I/O errors; the run aborts.
    fn record(&mut self, day: &DayRecord<T>) -> Result<()>;
}

/// Sink that keeps every record in memory.
#[derive(Debug, Default)]
pub struct InMemorySink<T> {
    /// All records seen so far, in day order.
    pub days: Vec<DayRecord<T>>,
}

impl<T: Scalar> DaySink<T> for InMemorySink<T> {
    fn record(&mut self, day: &DayRecord<T>) -> Result<()> {
        self.days.push(day.clone());
        Ok(())
    }
}

/// How a finished run ended, plus its final state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T> {
    /// Number of days recorded (steps taken + 1).
    pub days: usize,
    /// Day clock of the last record.
    pub final_day: T,
    /// Gap of the last record.
    pub final_gap: T,
    /// Plateau payoff of the last record.
    pub final_x_star: T,
    /// Which stop fired.
    pub reason: StopReason,
    /// Whether the run ended at (numerical) user equilibrium: the gap
    /// stop fired, or the final gap is exactly zero (covers runs with the
    /// gap stop disabled that reach the fixed point).
    pub converged: bool,
    /// Largest `|mass - N|` seen over the run (vehicles).
    pub max_mass_error: T,
    /// Density of the last recorded day.
    pub final_density: DensityProfile<T>,
}

/// Builds the day-0 record from a given departure profile.
///
/// # Errors
///
/// [`crate::SimError::LengthMismatch`] when `f0` does not have `M` entries.
pub fn build_initial_day<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    f0: &[T],
) -> Result<DayRecord<T>> {
    let flows = propagate_queue(cfg, f0)?;
    let costs = total_costs(cfg, grids, &flows);
    let density = density_from_arrivals(cfg, grids, &flows.g)?;
    let (gap, phi_min) = ue_gap(cfg, &flows.g, &costs.phi)?;
    let jam_cells = detect_jammed_interval(cfg, &density);
    let mass = density.mass();
    Ok(DayRecord {
        day: T::zero(),
        step: 0,
        flows,
        costs,
        jam_cells,
        x_star: -T::of(jam_cells as f64) * cfg.cfg().dx,
        gap,
        phi_min,
        mass,
        density,
        density_change: None,
    })
}

/// Runs the full day-to-day simulation.
///
/// Records day 0 (from `f0`), then alternates overnight density updates
/// with within-day cost balancing until `rule` fires. Every record is
/// passed to `sink` before the rule is evaluated for that day.
///
/// # Errors
///
/// Propagates length mismatches from the pipeline and any error returned
/// by the sink.
pub fn run<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    f0: &[T],
    rule: &StopRule<T>,
    sink: &mut dyn DaySink<T>,
) -> Result<RunSummary<T>> {
    let dr = cfg.cfg().dr;
    let n = cfg.cfg().n;

    let day0 = build_initial_day(cfg, grids, f0)?;
    let mut density = day0.density.clone();
    let mut gap = day0.gap;
    let mut x_star = day0.x_star;
    let mut max_mass_error = (day0.mass - n).abs();
    sink.record(&day0)?;

    let mut change: Option<T> = None;
    let mut steps = 0usize;
    let reason = loop {
        if let Some(reason) = rule.check(steps, gap, change, cfg.kappa()) {
            break reason;
        }
        let next = day_step(cfg, &density);
        change = Some(next.max_abs_diff(&density));
        density = next;
        steps += 1;

        let day = balance(cfg, grids, &density)?;
        let mass = density.mass();
        max_mass_error = max_mass_error.max((mass - n).abs());
        gap = day.gap;
        x_star = day.x_star;
        let record = DayRecord {
            day: T::of(steps as f64) * dr,
            step: steps,
            flows: day.flows,
            costs: day.costs,
            density: density.clone(),
            jam_cells: day.jam_cells,
            x_star,
            gap,
            phi_min: day.phi_min,
            mass,
            density_change: change,
        };
        sink.record(&record)?;
    };

    let converged = matches!(reason, StopReason::Converged) || gap == T::zero();
    Ok(RunSummary {
        days: steps + 1,
        final_day: T::of(steps as f64) * dr,
        final_gap: gap,
        final_x_star: x_star,
        reason,
        converged,
        max_mass_error,
        final_density: density,
    })
}
