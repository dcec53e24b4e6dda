//! Geodesic flow of `H = ½ e^{−2λ}(p² + q²)` and conservation checks for
//! fractional-linear integrals.

mod batch;
mod integral;
mod integrate;

use serde::{Deserialize, Serialize};

pub use batch::{random_state, run_batch, BatchConfig, BatchResult};
pub use integral::{conservation_report, independence_check, write_csv, ConservationReport, FractionalLinearIntegral, IndependenceReport};
pub use integrate::{integrate, IntegratorConfig, IntegratorStats, Method, Sample, Trajectory};

use crate::geometry::GeometryError;
use crate::killing::KillingError;

/// A point of the cotangent bundle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub q: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, p: f64, q: f64) -> PhaseState {
        PhaseState { x, y, p, q }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.p, self.q]
    }

    pub fn from_array(a: [f64; 4]) -> PhaseState {
        PhaseState { x: a[0], y: a[1], p: a[2], q: a[3] }
    }

    /// Same point, momentum reversed.
    pub fn reversed(self) -> PhaseState {
        PhaseState { p: -self.p, q: -self.q, ..self }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Killing(#[from] KillingError),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("initial state ({x}, {y}) is outside the domain")]
    StartOutside { x: f64, y: f64 },
    #[error("t_end must be positive, got {0}")]
    BadHorizon(f64),
    #[error("implicit midpoint iteration failed to converge at t = {t}")]
    NoConvergence { t: f64 },
    #[error("Q vanishes along the whole trajectory")]
    QVanishes,
    #[error("Q vanishes at the evaluation point")]
    QZeroAtPoint,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
