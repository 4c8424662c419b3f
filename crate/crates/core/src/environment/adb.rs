use std::collections::HashMap;
use std::process::Command;

use crate::case::SkillCall;
use crate::perception::{GuiState, Rect, RgbImage};
use crate::skills;

use super::{Capabilities, DeviceBackend, DeviceError, ExecutionResult, Observation};

const DUMP_PATH: &str = "/sdcard/window_dump.xml";
const SWIPE_MILLIS: &str = "300";
const KEYCODE_BACK: &str = "4";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandOutput {
    pub status: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl CommandOutput {
    pub fn ok(stdout: impl Into<Vec<u8>>) -> Self {
        Self { status: 0, stdout: stdout.into(), stderr: String::new() }
    }
}

/// Runs an `adb ...` command line. `args[0]` is always `"adb"`.
pub trait CommandRunner: Send {
    fn run(&mut self, args: &[String]) -> std::io::Result<CommandOutput>;
}

/// Spawns the real `adb` binary, optionally pinned to one device serial.
#[derive(Debug, Clone, Default)]
pub struct SystemRunner {
    pub serial: Option<String>,
}

impl CommandRunner for SystemRunner {
    fn run(&mut self, args: &[String]) -> std::io::Result<CommandOutput> {
        let mut cmd = Command::new(&args[0]);
        if let Some(serial) = &self.serial {
            cmd.arg("-s").arg(serial);
        }
        let out = cmd.args(&args[1..]).output()?;
        Ok(CommandOutput {
            status: out.status.code().unwrap_or(-1),
            stdout: out.stdout,
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        })
    }
}

/// Canned outputs keyed by the space-joined command line. Unknown commands
/// succeed with empty output. Every invocation is recorded.
#[derive(Debug, Clone, Default)]
pub struct ReplayRunner {
    outputs: HashMap<String, CommandOutput>,
    invoked: Vec<String>,
    offline: bool,
}

impl ReplayRunner {
    pub fn new() -> Self {
        Self::default()
    }

    /// A runner whose every command fails as if `adb` were missing.
    pub fn offline() -> Self {
        Self { offline: true, ..Self::default() }
    }

    pub fn with_output(mut self, command: &str, output: CommandOutput) -> Self {
        self.outputs.insert(command.to_string(), output);
        self
    }

    pub fn invoked(&self) -> &[String] {
        &self.invoked
    }
}

impl CommandRunner for ReplayRunner {
    fn run(&mut self, args: &[String]) -> std::io::Result<CommandOutput> {
        let line = args.join(" ");
        self.invoked.push(line.clone());
        if self.offline {
            return Err(std::io::Error::new(std::io::ErrorKind::NotFound, "adb not found"));
        }
        Ok(self.outputs.get(&line).cloned().unwrap_or_default())
    }
}

/// Escapes text for `adb shell input text`.
pub fn escape_input_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            ' ' => out.push_str("%s"),
            '\\' | '"' | '\'' | '`' | '$' | '&' | '|' | ';' | '<' | '>' | '(' | ')' | '*' | '?' | '~'
            | '#' | '!' | '[' | ']' | '{' | '}' | '%' => {
                out.push('\\');
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out
}

/// Real-device backend speaking `adb`.
#[derive(Debug)]
pub struct AdbBackend<R: CommandRunner = SystemRunner> {
    runner: R,
    /// `package/activity` restarted on reset.
    launch_component: Option<String>,
}

impl<R: CommandRunner> AdbBackend<R> {
    pub fn new(runner: R, launch_component: Option<String>) -> Self {
        Self { runner, launch_component }
    }

    pub fn runner(&self) -> &R {
        &self.runner
    }

    fn adb(&mut self, args: &[&str]) -> Result<CommandOutput, DeviceError> {
        let mut full = vec!["adb".to_string()];
        full.extend(args.iter().map(|a| a.to_string()));
        self.runner
            .run(&full)
            .map_err(|e| DeviceError::Unavailable(format!("{}: {e}", full.join(" "))))
    }

    /// Runs an action command; a non-zero exit becomes a rejection.
    fn act(&mut self, args: &[&str]) -> Result<Option<ExecutionResult>, DeviceError> {
        let out = self.adb(args)?;
        if out.status != 0 {
            return Ok(Some(ExecutionResult::rejected(format!(
                "adb exited with {}: {}",
                out.status,
                out.stderr.trim()
            ))));
        }
        Ok(None)
    }

    fn tap(&mut self, r: Rect) -> Result<Option<ExecutionResult>, DeviceError> {
        let (x, y) = r.center();
        self.act(&["shell", "input", "tap", &x.to_string(), &y.to_string()])
    }

    fn swipe(&mut self, area: Rect, direction: &str) -> Result<Option<ExecutionResult>, DeviceError> {
        let (cx, cy) = area.center();
        let (w, h) = (area.width(), area.height());
        // Finger travel over 60% of the area, opposite to the content direction.
        let (x1, y1, x2, y2) = match direction {
            "down" => (cx, area.y1 + h * 4 / 5, cx, area.y1 + h / 5),
            "up" => (cx, area.y1 + h / 5, cx, area.y1 + h * 4 / 5),
            "right" => (area.x1 + w * 4 / 5, cy, area.x1 + w / 5, cy),
            _ => (area.x1 + w / 5, cy, area.x1 + w * 4 / 5, cy),
        };
        let coords = [x1, y1, x2, y2].map(|v| v.to_string());
        self.act(&["shell", "input", "swipe", &coords[0], &coords[1], &coords[2], &coords[3], SWIPE_MILLIS])
    }
}

fn screen_area(state: &GuiState) -> Rect {
    state
        .widgets()
        .iter()
        .map(|w| w.bounds)
        .reduce(|a, b| a.union(&b))
        .filter(|r| !r.is_empty())
        .unwrap_or(Rect::new(0, 0, 1080, 1920))
}

impl<R: CommandRunner> DeviceBackend for AdbBackend<R> {
    fn capabilities(&self) -> Capabilities {
        Capabilities { has_screenshot: true }
    }

    fn observe(&mut self) -> Result<Observation, DeviceError> {
        self.adb(&["shell", "uiautomator", "dump", DUMP_PATH])?;
        let dump = self.adb(&["shell", "cat", DUMP_PATH])?;
        if dump.status != 0 {
            return Err(DeviceError::Unavailable(format!("view dump failed: {}", dump.stderr.trim())));
        }
        let xml = String::from_utf8_lossy(&dump.stdout).into_owned();
        let shot = self.adb(&["exec-out", "screencap", "-p"])?;
        let screenshot = if shot.status == 0 { RgbImage::decode_png(&shot.stdout).ok() } else { None };
        Ok(Observation { xml, screenshot })
    }

    fn execute(&mut self, call: &SkillCall, state: &GuiState) -> Result<ExecutionResult, DeviceError> {
        let target = match call.arg("rid") {
            Some(rid) => match state.find(rid) {
                Some(w) => Some(w.bounds),
                None => return Ok(ExecutionResult::rejected(format!("no widget {rid} on the current page"))),
            },
            None => None,
        };
        let outcome = match call.skill_name.as_str() {
            skills::CLICK => match target {
                Some(r) => self.tap(r)?,
                None => Some(ExecutionResult::rejected("argument mismatch")),
            },
            skills::INPUT_TEXT => match (target, call.arg("text")) {
                (Some(r), Some(text)) => match self.tap(r)? {
                    Some(rejected) => Some(rejected),
                    None => self.act(&["shell", "input", "text", &escape_input_text(text)])?,
                },
                _ => Some(ExecutionResult::rejected("argument mismatch")),
            },
            skills::PRESS_ADB_BACK_KEY => self.act(&["shell", "input", "keyevent", KEYCODE_BACK])?,
            skills::SCROLL => {
                let dir = call.arg("direction").unwrap_or("down");
                self.swipe(screen_area(state), dir)?
            }
            skills::SWIPE_SELECTOR => match target {
                Some(r) => self.swipe(r, call.arg("direction").unwrap_or("down"))?,
                None => Some(ExecutionResult::rejected("argument mismatch")),
            },
            skills::INPUT_BY_NUMERIC_KEYBOARD => {
                let digits = call.arg("digits").unwrap_or_default();
                let mut keys = Vec::new();
                for d in digits.chars() {
                    match state.widgets().iter().find(|w| w.text.chars().eq(std::iter::once(d))) {
                        Some(w) => keys.push(w.bounds),
                        None => return Ok(ExecutionResult::rejected(format!("digit widget missing: {d}"))),
                    }
                }
                let mut outcome = None;
                for k in keys {
                    outcome = self.tap(k)?;
                    if outcome.is_some() {
                        break;
                    }
                }
                outcome
            }
            other => Some(ExecutionResult::rejected(format!("unknown command {other}"))),
        };
        Ok(outcome.unwrap_or_else(ExecutionResult::applied))
    }

    fn reset(&mut self) -> Result<(), DeviceError> {
        if let Some(component) = self.launch_component.clone() {
            let out = self.adb(&["shell", "am", "start", "-S", "-W", "-n", &component])?;
            if out.status != 0 {
                return Err(DeviceError::Unavailable(format!("cannot restart {component}: {}", out.stderr.trim())));
            }
        }
        Ok(())
    }
}
