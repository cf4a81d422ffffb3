//! Predictive virtual sensor identification with receding-horizon control.
//!
//! This crate identifies, from logged input/output data, a pair of networks:
//! a state estimator that compresses a window of past inputs and cheap
//! sensor readings into a latent state, and a parallel multi-step predictor
//! that maps that state plus a future input sequence to a future trajectory
//! of an expensive-to-measure output. The identified model then drives a
//! nonlinear model-predictive controller solved by damped Levenberg-
//! Marquardt iterations, using exact network Jacobians.
//!
//! Everything is validated end to end on a simulated 2-DoF direct-drive
//! planar arm: joint encoders and an IMU are the cheap sensors, the tip
//! position (available only during data collection) is the virtual-sensor
//! target, and the controller tracks tip trajectories without measuring
//! the tip at runtime.
//!
//! Start with the runnable programs under `examples/`, one per capability:
//! data collection, training, multi-step evaluation, the ablation grid,
//! the Levenberg-Marquardt solver on a toy problem, and closed-loop star
//! tracking. The `pvsid` binary wraps the same flows as subcommands.
//!
//! All randomness is seeded and all floating point is `f64`; identical
//! seeds give bit-identical logs, models, and reports on one platform.

pub mod config;
pub mod error;
pub mod experiment;
pub mod ident;
pub mod kinematics;
pub mod model_io;
pub mod nmpc;
pub mod nn;
pub mod plant;

pub use error::{Error, Result};

pub(crate) mod csvnum {
    /// Formats a float with 9 significant digits for CSV output.
    pub fn fmt(x: f64) -> String {
        format!("{x:.8e}")
    }
}
