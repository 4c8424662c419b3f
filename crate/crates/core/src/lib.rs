//! Engine that turns semi-structured UAT test cases into executed GUI action
//! scripts by running operation, parameter-selection and inspection agents
//! against a device.

pub mod case;
pub mod perception;
pub mod rewriting;
pub mod skills;
pub mod environment;
pub mod agents;
pub mod orchestrator;
pub mod harness;
