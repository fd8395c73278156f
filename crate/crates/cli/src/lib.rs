//! Command-line front end for the `slope-newt` solvers.
//!
//! Exit codes: 0 when every solve converged, 1 when one did not, 2 on I/O or
//! flag errors.

pub mod args;
pub mod commands;
pub mod io;
pub mod record;
