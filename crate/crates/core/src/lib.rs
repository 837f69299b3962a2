//! Robust planning of virtual inertia and damping for a dynamic virtual power
//! plant under forecast disturbances with uncertain timing.

pub mod allocation;
pub mod cases;
pub mod config;
pub mod error;
pub mod export;
pub mod injection;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod pipeline;
#[cfg(test)]
mod properties;
pub mod region;
pub mod response;
pub mod scalar;
pub mod selection;
pub mod sim;
pub mod trajectory;
pub mod worst;

pub use config::Config;
pub use error::{Error, Result};
pub use pipeline::{Stage, StageError};

pub type Grid = model::GridParameters<f64>;
pub type Limits = model::SecurityLimits<f64>;
pub type Forecast = model::DisturbanceForecast<f64>;
pub type Scenario = model::DisturbanceScenario<f64>;
pub type Ibr = model::IbrSpec<f64>;
pub type Derived = response::DerivedSecondOrder<f64>;
pub type Trajectory = trajectory::SegmentedTrajectory<f64>;
pub type Envelope = worst::WorstEnvelope<f64>;
pub type Region = region::RegionGrid<f64>;
