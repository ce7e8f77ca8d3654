//! Frequency-domain simulation of coupled microring circuits, delay-bandwidth
//! optimization (actor-critic RL plus classical baselines), and a time-domain
//! all-optical reservoir for packet-header recognition with a ridge readout.

pub mod error;
pub mod netlist;
pub mod optim;
pub mod reservoir;
pub mod seeds;
pub mod spectrum;
pub mod topology;

pub use error::{Error, Result};
