//! Wall-configuration mapping from a stream of 2D poses and depth scan rows.
//!
//! A wall is an infinite line on the ground plane, parameterized by its
//! closest point to the frame origin. Each frame runs three stages:
//!
//! 1. [`detector`] splits a scan row at invalid samples and extracts lines with
//!    sequential RANSAC,
//! 2. [`association`] matches each observation to a known wall by
//!    maximum likelihood with exhaustive search,
//! 3. [`mapper`] refines matched walls with a two-dimensional EKF each and
//!    initializes the rest.
//!
//! [`pipeline`] composes the stages and [`sim`] provides a raycasting
//! environment simulator with exact ground truth.
//!
//! The crate is `no_std` and needs only `alloc`. Time measurement is injected
//! through [`pipeline::Clock`].

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod association;
pub mod detector;
mod error;
pub mod linalg;
pub mod mapper;
pub mod pipeline;
pub mod sensor_model;
pub mod sim;
pub mod types;

pub use crate::error::{Error, Result};
pub use crate::linalg::{Mat2, Vec2};
pub use crate::sensor_model::SensorModel;
pub use crate::types::{
    normalize_angle, Cov2, Landmark, LineMC, Observation, Pose2D, ScanRow, WallParam,
    EPS_DEGENERATE,
};
