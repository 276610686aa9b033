//! Day-to-day dynamics of departure-time choice at a single bottleneck.
//!
//! A fixed number of commuters `N` must pass a bottleneck of capacity `C`.
//! Each trip costs the sum of a queueing cost `alpha * upsilon(t)` (time spent
//! in the point queue) and a schedule-deviation cost
//! `beta * max(t* - t, 0) + gamma * max(t - t*, 0)` around the preferred
//! arrival time `t*`. Day after day, commuters shift their departure times
//! toward cheaper arrival times.
//!
//! The adjustment process is modelled on the *scheduling payoff* axis
//! `x = -phi2(t) <= 0`: each payoff level `x` corresponds to exactly one
//! early and one late arrival time, so the arrival pattern of a day can be
//! folded into a density `k(x)` on a one-dimensional "tube" `[-L, 0]`.
//! Between days the density obeys a scalar conservation law with a
//! triangular flux (free-flow speed `u`, congestion wave speed `w`, jam
//! density `kappa = (1/beta + 1/gamma) * C`), solved here with the standard
//! first-order finite-volume (cell transmission) scheme. Densities drift
//! toward `x = 0`, pile up into a jammed block `[-N/kappa, 0]`, and the
//! corresponding arrival pattern converges to the user equilibrium in which
//! every used arrival time costs the same.
//!
//! The crate provides the full pipeline: validated configuration and grids,
//! the discrete point queue and its queueing-time inversion, cost profiles,
//! the arrival/density transform, the day map (cell update + cost
//! balancing), a simulation driver with CSV artifacts, and analytic
//! equilibrium/stability checks. All numerics are generic over the scalar
//! type via [`Scalar`]; `f64` aliases are exported at the crate root.

pub mod balance;
pub mod config;
pub mod cost;
pub mod ctm;
pub mod demo;
pub mod density;
pub mod driver;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod io;
pub mod queue;

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics if the value is not representable.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("scalar constant must be representable")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}

pub use balance::{balance, detect_jammed_interval, ue_gap, BalancedDay};
pub use config::{validate, ConfigError, SimConfig, ValidatedConfig};
pub use cost::{payoff_inverse, scheduling_cost, total_costs, CostProfile};
pub use ctm::{
    compute_flux, day_step, run_until, DensityTrajectory, FluxState, StopReason, StopRule,
};
pub use density::{arrivals_from_density, density_from_arrivals, DensityProfile};
pub use driver::{build_initial_day, run, DayRecord, DaySink, InMemorySink, RunSummary};
pub use equilibrium::{
    analytic_decay, analytic_spue, check_ue, perturbation_experiment, perturbation_fine_grid,
    PerturbationResult, SpueSolution, UeReport,
};
pub use error::SimError;
pub use grid::{build_grids, Grids, PayoffGrid, Preimage, TimeGrid};
pub use io::{
    config_to_string, fmt_sig, rates_from_pieces, read_config_file, read_departure_pieces, CsvSink,
};
pub use queue::{propagate_queue, queueing_times, FlowProfile};

/// `f64` configuration, the variant used by the command-line tool.
pub type SimConfig64 = SimConfig<f64>;
/// `f64` validated configuration.
pub type ValidatedConfig64 = ValidatedConfig<f64>;
/// `f32` configuration, mostly useful for precision experiments.
pub type SimConfig32 = SimConfig<f32>;

/// Crate result type.
pub type Result<T, E = SimError> = std::result::Result<T, E>;
