//! Experiment front end for dgmorl-core: configuration, seeded runs,
//! demonstration generation, exhaustive oracles and reports.

pub mod config;
pub mod demos;
pub mod oracle;
pub mod report;
pub mod run;
