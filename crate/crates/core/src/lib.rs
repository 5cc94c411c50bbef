//! Finite-difference reduction solver for the electrostatic
//! Klein-Gordon-Maxwell system on rectangular boxes.
//!
//! The potential equation is linear in the potential for a fixed matter
//! field, so it is eliminated by one elliptic solve ([`reduction`]) and the
//! matter field is found as a critical point of the reduced functional
//! ([`functional`], [`optimize`]). [`harness`] turns the existence,
//! nonexistence and limit statements for the system into runnable checks,
//! and [`cli`] drives everything from JSON configurations.

pub mod cli;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod field_io;
pub mod functional;
pub mod grid;
pub mod harness;
pub mod optimize;
pub mod reduction;

pub use error::{KgmError, Result};
