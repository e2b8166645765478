//! Demonstration-guided multi-objective reinforcement learning on small
//! deterministic MOMDPs.

pub mod curriculum;
pub mod demo;
pub mod envs;
pub mod learner;
pub mod mo;
