//! Closed-loop experiments: scenario files, reference generation, the
//! simulation loop, parameter sweeps and log output.

mod ablation;
mod io;
mod reference;
mod run;
mod scenario;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::ecbf::EcbfError;
use crate::hull::HullError;
use crate::linearize::LinearizeError;
use crate::mpc::MpcError;

pub use ablation::{run_ablation, AblationRow, Sweep};
pub use io::{read_trajectory_csv, trajectory_header, write_linear_model, write_log, write_metrics};
pub use reference::{reference_output, reference_position};
pub use run::{run_closed_loop, INSTABILITY_ATTITUDE_DEG, Metrics, RunStatus, StepRecord, TrajectoryLog};
pub use scenario::{
    MpcOverrides, NoiseConfig, ReferenceConfig, Scenario, UavConfig, VehicleConfig, Waypoint, SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Ecbf(#[from] EcbfError),
}
