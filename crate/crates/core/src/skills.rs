//! The skill library: the device operations agents may call.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::case::{ParameterList, SkillCall};
use crate::perception::GuiState;
use crate::rewriting::placeholders;

pub const CLICK: &str = "click";
pub const INPUT_TEXT: &str = "input_text";
pub const INPUT_BY_NUMERIC_KEYBOARD: &str = "input_by_numeric_keyboard";
pub const PRESS_ADB_BACK_KEY: &str = "press_adb_back_key";
pub const SCROLL: &str = "scroll";
pub const SWIPE_SELECTOR: &str = "swipe_selector";

pub const DIRECTIONS: [&str; 4] = ["up", "down", "left", "right"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArgKind {
    ResourceId,
    FreeText,
    Digits,
    Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillArg {
    pub name: String,
    pub kind: ArgKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub name: String,
    pub description: String,
    pub args: Vec<SkillArg>,
}

impl SkillSpec {
    pub fn new(name: &str, description: &str, args: &[(&str, ArgKind)]) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
            args: args
                .iter()
                .map(|(n, k)| SkillArg { name: n.to_string(), kind: *k })
                .collect(),
        }
    }

    pub fn arg_kind(&self, name: &str) -> Option<ArgKind> {
        self.args.iter().find(|a| a.name == name).map(|a| a.kind)
    }

    /// Input skills take their value from the parameter list.
    pub fn is_input(&self) -> bool {
        self.value_arg().is_some()
    }

    /// The argument a selected parameter value is bound to.
    pub fn value_arg(&self) -> Option<&SkillArg> {
        self.args
            .iter()
            .find(|a| matches!(a.kind, ArgKind::FreeText | ArgKind::Digits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillLibrary {
    specs: Vec<SkillSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LibraryError {
    #[error("duplicate skill name {0}")]
    DuplicateSkill(String),
    #[error("skill {skill} declares argument {arg} twice")]
    DuplicateArg { skill: String, arg: String },
}

impl Default for SkillLibrary {
    fn default() -> Self {
        use ArgKind::*;
        Self {
            specs: vec![
                SkillSpec::new(
                    CLICK,
                    "Click a UI element specified by the resource id (rid) of view hierarchy",
                    &[("rid", ResourceId)],
                ),
                SkillSpec::new(
                    INPUT_TEXT,
                    "Input the content string into a text box specified by the resource id of view hierarchy",
                    &[("rid", ResourceId), ("text", FreeText)],
                ),
                SkillSpec::new(
                    INPUT_BY_NUMERIC_KEYBOARD,
                    "Use the numeric keyboard to enter the digits",
                    &[("digits", Digits)],
                ),
                SkillSpec::new(
                    PRESS_ADB_BACK_KEY,
                    "Press back key on Android device, this is different from clicking back button on screen",
                    &[],
                ),
                SkillSpec::new(SCROLL, "Scroll on screen", &[("direction", Direction)]),
                SkillSpec::new(
                    SWIPE_SELECTOR,
                    "Swipe a selector specified by the resource id of view hierarchy",
                    &[("rid", ResourceId), ("direction", Direction)],
                ),
            ],
        }
    }
}

impl SkillLibrary {
    /// Builds a custom library; the default six skills come from [`Default`].
    pub fn new(specs: Vec<SkillSpec>) -> Result<Self, LibraryError> {
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].iter().any(|o| o.name == s.name) {
                return Err(LibraryError::DuplicateSkill(s.name.clone()));
            }
            for (j, a) in s.args.iter().enumerate() {
                if s.args[..j].iter().any(|o| o.name == a.name) {
                    return Err(LibraryError::DuplicateArg {
                        skill: s.name.clone(),
                        arg: a.name.clone(),
                    });
                }
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[SkillSpec] {
        &self.specs
    }

    pub fn get(&self, name: &str) -> Option<&SkillSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn is_input_skill(&self, name: &str) -> bool {
        self.get(name).is_some_and(SkillSpec::is_input)
    }
}

/// Capability text for the operation agent, one command per line.
pub fn render_skill_prompt(library: &SkillLibrary) -> String {
    let mut out = String::from("Exclusively use commands listed below, e.g. command_name. Commands:");
    let n = library.specs.len();
    for (i, spec) in library.specs.iter().enumerate() {
        let args = spec
            .args
            .iter()
            .map(|a| format!("{}: str", a.name))
            .collect::<Vec<_>>()
            .join(", ");
        let end = if i + 1 == n { '.' } else { ';' };
        out.push_str(&format!("\n{}: {}, args: ({args}){end}", spec.name, spec.description));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InvalidReason {
    UnknownSkill(String),
    BadArity(String),
    UnknownResourceId(String),
    BadDirection(String),
    BadDigits(String),
}

impl InvalidReason {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownSkill(_) => "UNKNOWN_SKILL",
            Self::BadArity(_) => "BAD_ARITY",
            Self::UnknownResourceId(_) => "UNKNOWN_RESOURCE_ID",
            Self::BadDirection(_) => "BAD_DIRECTION",
            Self::BadDigits(_) => "BAD_DIGITS",
        }
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = match self {
            Self::UnknownSkill(d)
            | Self::BadArity(d)
            | Self::UnknownResourceId(d)
            | Self::BadDirection(d)
            | Self::BadDigits(d) => d,
        };
        write!(f, "{}: {detail}", self.code())
    }
}

/// Static check of a proposed call against the library and the current state.
///
/// A `${name}` marker in a digits argument is resolved through `params`
/// before the digit check.
pub fn validate_call(
    library: &SkillLibrary,
    call: &SkillCall,
    state: &GuiState,
    params: &ParameterList,
) -> Result<(), InvalidReason> {
    let spec = library.get(&call.skill_name).ok_or_else(|| {
        InvalidReason::UnknownSkill(format!("{} is not a predefined command", call.skill_name))
    })?;
    let arity_ok = call.args.len() == spec.args.len()
        && spec.args.iter().all(|a| call.args.contains_key(&a.name));
    if !arity_ok {
        let expected: Vec<_> = spec.args.iter().map(|a| a.name.as_str()).collect();
        let got: Vec<_> = call.args.keys().map(String::as_str).collect();
        return Err(InvalidReason::BadArity(format!(
            "{} expects ({}) but got ({})",
            spec.name,
            expected.join(", "),
            got.join(", ")
        )));
    }
    for arg in &spec.args {
        let value = &call.args[&arg.name];
        match arg.kind {
            ArgKind::ResourceId => {
                if state.find(value).is_none() {
                    return Err(InvalidReason::UnknownResourceId(format!(
                        "no widget with resource-id {value:?} on the current page"
                    )));
                }
            }
            ArgKind::Direction => {
                if !DIRECTIONS.contains(&value.as_str()) {
                    return Err(InvalidReason::BadDirection(format!(
                        "{value:?} is not one of up, down, left, right"
                    )));
                }
            }
            ArgKind::Digits => {
                let resolved = resolve_markers(value, params);
                let ok = resolved
                    .as_deref()
                    .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
                if !ok {
                    return Err(InvalidReason::BadDigits(format!(
                        "{value:?} is not a non-empty digit string"
                    )));
                }
            }
            ArgKind::FreeText => {}
        }
    }
    Ok(())
}

/// Substitutes every `${name}` in `text`; `None` if a name is not in `params`.
pub fn resolve_markers(text: &str, params: &ParameterList) -> Option<String> {
    let mut out = text.to_string();
    for name in placeholders(text) {
        let value = params.get(&name)?;
        out = out.replace(&format!("${{{name}}}"), value);
    }
    Some(out)
}
