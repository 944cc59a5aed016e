//! Sparse graphical models of word and time dependence in replicated pitch
//! contours.

pub mod cli;
pub mod covariance;
pub mod data;
pub mod format;
pub mod graphs;
pub mod glasso;
pub mod lasso;
pub mod matrix;
pub mod nodewise;
pub mod simulate;
