//! Command-line planner and file formats on top of [`fsotraj_core`].

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod solver;

pub use solver::ClarabelSolver;
