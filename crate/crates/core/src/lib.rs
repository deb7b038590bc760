//! Simulation and control suite for a two-finger, five-DoF tactile gripper.
//!
//! The crate is split along the gripper's capabilities:
//!
//! * [`gel`] synthesizes gel-pad tactile frames, extracts contact patches and
//!   provides the ground-truth contact plant.
//! * [`mpc`] is the contact-area MPC grasp controller and its QP solver.
//! * [`rub`] runs the rubbing/singulation maneuver on top of the controller.
//! * [`scoop`] is the quasi-static scooping model for thin cards.
//! * [`card`] is the tactile card exploration and insertion state machine.
//! * [`harness`] loads scenario configs, runs batches and writes reports.

pub mod card;
pub mod error;
pub mod gel;
pub mod harness;
pub mod mpc;
pub mod rub;
pub mod scoop;
pub mod seed;

pub use error::{Error, Result};
