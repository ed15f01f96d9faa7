//! SIR epidemic domain types and exact forward simulators.

mod data;
mod events;
mod oracle;
pub(crate) mod period;
mod rate;
mod simulate;

pub use data::RemovalData;
pub use events::{trajectory_counts, EpidemicEvents, Event, EventKind, TimeScale};
pub use oracle::{final_size_oracle, MAX_ORACLE_POPULATION};
pub use period::{DiscretePeriod, InfectiousPeriodModel};
pub use rate::{Link, RateFunction};
pub use simulate::{
    simulate_continuous, simulate_continuous_with, simulate_discrete, simulate_discrete_with,
};
