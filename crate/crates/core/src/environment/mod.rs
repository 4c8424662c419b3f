//! Device backends: observe the GUI and execute skill calls.
//!
//! [`Simulator`] replays a JSON scenario and is the main test surface.
//! [`AdbBackend`] maps skills onto `adb` shell commands for real devices.

mod adb;
mod scenario;
mod simulator;

pub use adb::{escape_input_text, AdbBackend, CommandOutput, CommandRunner, ReplayRunner, SystemRunner};
pub use scenario::{ArgMatcher, LinkDef, PageDef, Scenario, ScenarioError, ScreenSize, SideEffect, TransitionDef, TriggerDef, WidgetDef};
pub use simulator::Simulator;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::SkillCall;
use crate::perception::{GuiState, RgbImage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("device unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub has_screenshot: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub xml: String,
    pub screenshot: Option<RgbImage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExecutionStatus {
    Applied,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecutionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject_reason: Option<String>,
}

impl ExecutionResult {
    pub fn applied() -> Self {
        Self { status: ExecutionStatus::Applied, reject_reason: None }
    }

    pub fn rejected(reason: impl Into<String>) -> Self {
        Self { status: ExecutionStatus::Rejected, reject_reason: Some(reason.into()) }
    }

    pub fn is_applied(&self) -> bool {
        self.status == ExecutionStatus::Applied
    }
}

/// The device the agents act on. One instance belongs to one case session.
pub trait DeviceBackend: Send {
    fn capabilities(&self) -> Capabilities;

    fn observe(&mut self) -> Result<Observation, DeviceError>;

    /// Executes `call`. `state` is the perceived state the call was proposed
    /// against; coordinate-based backends resolve resource ids through it.
    fn execute(&mut self, call: &SkillCall, state: &GuiState) -> Result<ExecutionResult, DeviceError>;

    fn reset(&mut self) -> Result<(), DeviceError>;

    /// Ground-truth page id, when the backend knows it.
    fn current_page(&self) -> Option<String> {
        None
    }

    /// Whether the backend is on a terminal page, when it knows.
    fn is_terminal(&self) -> Option<bool> {
        None
    }
}
