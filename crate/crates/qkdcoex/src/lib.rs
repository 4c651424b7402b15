//! Desk-scale model of a quantum key distribution channel coexisting with
//! classical DWDM traffic on shared fiber, plus the control loop around it:
//!
//! * [`grid`] — frequency grid, channel sets, fiber profiles, validation
//! * [`physics`] — four-wave mixing, Raman scattering, QBER/SKR oracle
//! * [`config`] — layered INI-style configuration with echo
//! * [`dataset`] — labelled training/validation campaign generation and I/O
//! * [`ml`] — five regressors fitted per noise/SKR/QBER target
//! * [`controller`] — threshold decisions and the staged reallocation scenario
//! * [`wire`] — switch-configuration codec and the append-only record log

pub mod config;
pub mod controller;
pub mod dataset;
pub mod grid;
pub mod ml;
pub mod physics;
pub mod wire;
