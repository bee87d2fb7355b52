//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod energy;
pub mod features;
pub mod ml;
pub mod qnn;
pub mod rfe;
