//! Energy-minimal scheduling of periodic hard real-time tasksets on
//! homogeneous DVFS-capable multiprocessors.
//!
//! The crate models tasksets with exact rational arithmetic, computes
//! energy-optimal workload plans (a time-indexed LP over discrete speed
//! levels, a dense-grid relaxation for continuous speeds, and three
//! constant-speed baselines), realizes plans as executable per-processor
//! schedules with McNaughton's wrap-around algorithm, and validates the
//! result against the fluid scheduling constraints.

pub mod formulations;
pub mod lpcore;
pub mod optim;
pub mod power;
pub mod rat;
pub mod schedule;
pub mod taskmodel;
pub mod timegrid;

pub use rat::Rat;
