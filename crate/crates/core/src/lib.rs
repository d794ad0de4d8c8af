//! Bistatic OFDM integrated sensing and communication simulator.
//!
//! The library models a full sensing link: CP-OFDM frame synthesis, a
//! multipath Doppler channel with hardware impairments (power amplifier,
//! oscillator phase noise, sampling clock error and jitter, ADC
//! quantization), receiver synchronization, and range-Doppler radar
//! processing with the matching closed-form performance budget.

pub mod budget;
pub mod channel;
pub mod config;
pub mod dsp;
pub mod error;
pub mod frame;
pub mod impairments;
pub mod io;
pub mod ofdm;
pub mod radar;
pub mod rng;
pub mod scenario;
pub mod sync;
pub mod units;

pub use config::SystemConfig;
pub use error::{Error, Result};
