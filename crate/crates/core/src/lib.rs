//! Intermittent-withdrawal deletion privacy: duration distributions, the
//! likelihood-ratio privacy model, parameter tuning, schedules, an adversary
//! simulator, utility evaluation and a reference content store.

pub mod cli;
pub mod distributions;
pub mod privacy;
pub mod schedule;
pub mod sim;
pub mod special;
pub mod store;
pub mod tuning;
pub mod utility;
