//! Anytime learning for a cat-and-mouse pursuit task.
//!
//! An execution system runs the best strategy published so far in the true
//! environment while a genetic-algorithm learner keeps improving strategies
//! against a simulation model. A monitor watches the environment and tells
//! the learner when its model has gone stale.

pub mod anytime;
pub mod cases;
pub mod config;
pub mod error;
pub mod experiment;
pub mod learner;
pub mod monitor;
pub mod plot;
pub mod punctuated;
pub mod rng;
pub mod strategy;
pub mod summary;
pub mod world;

pub use error::{Error, Result};
