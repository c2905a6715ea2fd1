//! Frequency-support toolkit for grid-forming MMC-HVDC links feeding offshore wind plants.
//!
//! The crate is organized bottom-up:
//! - [`linsys`]: polynomial / transfer-function algebra, stability margins, time responses
//! - [`acpower`]: per-unit bases, AC-link operating points, and the damped power-angle
//!   linearization used for loop shaping
//! - [`plant`]: continuous-time component models (MMC, HVDC line, machine, wind turbine)
//! - [`control`]: the discrete grid-forming controllers (energy synchronization, virtual
//!   resistance, DC-voltage droop coordination, wind-turbine frequency response)
//! - [`tuning`]: closed-form gain design and loop-shaping verification
//! - [`sim`]: fixed-step simulation of the full two-terminal benchmark system
//! - [`config`]: text configuration and gains-file formats
//! - [`acceptance`]: the executable acceptance checklist used by `gfmsim verify`

pub mod acceptance;
pub mod acpower;
pub mod config;
pub mod control;
pub mod error;
pub mod linsys;
pub mod plant;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
