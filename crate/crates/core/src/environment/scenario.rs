//! Scenario files describing a simulated app as pages and transitions.
//!
//! ```json
//! {
//!   "scenario_id": "bind-card",
//!   "screen": { "width": 360, "height": 640 },
//!   "initial_page": "home",
//!   "terminal_pages": ["done"],
//!   "pages": { "home": { "widgets": [ { "class": "android.widget.Button",
//!       "resource_id": "tab_me", "text": "Me", "clickable": true, "bounds": [0, 600, 90, 640] } ] } },
//!   "transitions": [ { "from": "home", "to": "me",
//!       "trigger": { "skill": "click", "args": { "rid": "tab_me" } } } ]
//! }
//! ```
//!
//! Trigger argument matchers are exact strings, `*` for any value, or
//! `${name}` for the value of a case parameter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::case::SkillCall;
use crate::perception::Rect;
use crate::skills::SkillLibrary;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Malformed(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("ambiguous triggers on page {page}: transitions {first} and {second} can match the same call")]
    AmbiguousTrigger { page: String, first: usize, second: usize },
    #[error("trigger references parameter ${{{0}}} which the case does not define")]
    UnknownParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSize {
    pub width: u32,
    pub height: u32,
}

impl Default for ScreenSize {
    fn default() -> Self {
        Self { width: 1080, height: 1920 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDef {
    pub bounds: Rect,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidgetDef {
    #[serde(rename = "class")]
    pub widget_class: String,
    #[serde(default)]
    pub resource_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub content_desc: String,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub scrollable: bool,
    pub bounds: Rect,
    /// Defaults to true for `EditText` classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub editable: Option<bool>,
    /// Values a selector cycles through; `text` is the current one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selector_values: Vec<String>,
    /// Inline hyperlinks; a tap only lands when it hits one of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkDef>,
}

impl WidgetDef {
    pub fn is_editable(&self) -> bool {
        self.editable
            .unwrap_or_else(|| self.widget_class.contains("EditText"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageDef {
    #[serde(default)]
    pub widgets: Vec<WidgetDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArgMatcher {
    Any,
    Exact(String),
    Param(String),
}

impl ArgMatcher {
    pub fn parse(s: &str) -> Self {
        if s == "*" {
            ArgMatcher::Any
        } else if let Some(name) = s.strip_prefix("${").and_then(|r| r.strip_suffix('}')) {
            ArgMatcher::Param(name.to_string())
        } else {
            ArgMatcher::Exact(s.to_string())
        }
    }

    fn may_overlap(&self, other: &ArgMatcher) -> bool {
        use ArgMatcher::*;
        match (self, other) {
            (Any, _) | (_, Any) => true,
            (Exact(a), Exact(b)) => a == b,
            (Param(a), Param(b)) => a == b,
            // decided once parameter values are bound
            (Param(_), Exact(_)) | (Exact(_), Param(_)) => false,
        }
    }

    pub fn matches(&self, value: &str) -> bool {
        match self {
            ArgMatcher::Any => true,
            ArgMatcher::Exact(s) => s == value,
            ArgMatcher::Param(_) => false,
        }
    }
}

impl fmt::Display for ArgMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgMatcher::Any => f.write_str("*"),
            ArgMatcher::Exact(s) => f.write_str(s),
            ArgMatcher::Param(p) => write!(f, "${{{p}}}"),
        }
    }
}

impl Serialize for ArgMatcher {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ArgMatcher {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(ArgMatcher::parse(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerDef {
    pub skill: String,
    #[serde(default)]
    pub args: BTreeMap<String, ArgMatcher>,
}

impl TriggerDef {
    pub fn matches(&self, call: &SkillCall) -> bool {
        self.skill == call.skill_name
            && self.args.len() == call.args.len()
            && self
                .args
                .iter()
                .all(|(k, m)| call.args.get(k).is_some_and(|v| m.matches(v)))
    }

    fn may_overlap(&self, other: &TriggerDef) -> bool {
        self.skill == other.skill
            && self
                .args
                .iter()
                .all(|(k, m)| other.args.get(k).is_none_or(|o| m.may_overlap(o)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SideEffect {
    /// Overwrites a widget's text; `page` defaults to the transition target.
    SetText {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        page: Option<String>,
        rid: String,
        value: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDef {
    pub from: String,
    pub trigger: TriggerDef,
    pub to: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub side_effects: Vec<SideEffect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario_id: String,
    #[serde(default)]
    pub screen: ScreenSize,
    #[serde(default = "default_package")]
    pub package: String,
    pub initial_page: String,
    #[serde(default)]
    pub terminal_pages: BTreeSet<String>,
    pub pages: BTreeMap<String, PageDef>,
    #[serde(default)]
    pub transitions: Vec<TransitionDef>,
}

fn default_package() -> String {
    "com.example.app".into()
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        let s: Scenario =
            serde_json::from_str(json).map_err(|e| ScenarioError::Malformed(e.to_string()))?;
        s.validate(&SkillLibrary::default())?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self, library: &SkillLibrary) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if !self.pages.contains_key(&self.initial_page) {
            return invalid(format!("initial page {} does not exist", self.initial_page));
        }
        for p in &self.terminal_pages {
            if !self.pages.contains_key(p) {
                return invalid(format!("terminal page {p} does not exist"));
            }
        }
        for (id, page) in &self.pages {
            for w in &page.widgets {
                if w.bounds.x1 > w.bounds.x2 || w.bounds.y1 > w.bounds.y2 {
                    return invalid(format!("page {id}: widget {} has inverted bounds", w.resource_id));
                }
                for l in &w.links {
                    if l.bounds.intersection(&w.bounds) != Some(l.bounds) {
                        return invalid(format!(
                            "page {id}: link {:?} lies outside widget {}",
                            l.text, w.resource_id
                        ));
                    }
                }
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            for end in [&t.from, &t.to] {
                if !self.pages.contains_key(end) {
                    return invalid(format!("transition {i} references unknown page {end}"));
                }
            }
            let Some(spec) = library.get(&t.trigger.skill) else {
                return invalid(format!("transition {i} uses unknown skill {}", t.trigger.skill));
            };
            let names: BTreeSet<_> = spec.args.iter().map(|a| a.name.as_str()).collect();
            let given: BTreeSet<_> = t.trigger.args.keys().map(String::as_str).collect();
            if names != given {
                return invalid(format!(
                    "transition {i}: trigger arguments {given:?} do not match {} arguments {names:?}",
                    spec.name
                ));
            }
            for SideEffect::SetText { page, rid, .. } in &t.side_effects {
                let page_id = page.as_ref().unwrap_or(&t.to);
                let ok = self
                    .pages
                    .get(page_id)
                    .is_some_and(|p| p.widgets.iter().any(|w| &w.resource_id == rid));
                if !ok {
                    return invalid(format!("transition {i}: side effect targets unknown widget {page_id}/{rid}"));
                }
            }
        }
        self.check_ambiguity()
    }

    pub(crate) fn check_ambiguity(&self) -> Result<(), ScenarioError> {
        for (i, a) in self.transitions.iter().enumerate() {
            for (j, b) in self.transitions.iter().enumerate().skip(i + 1) {
                if a.from == b.from && a.trigger.may_overlap(&b.trigger) {
                    return Err(ScenarioError::AmbiguousTrigger {
                        page: a.from.clone(),
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(())
    }

    /// Every hyperlink with its text, for configuring a mock recognizer.
    pub fn link_texts(&self) -> Vec<(Rect, String)> {
        self.pages
            .values()
            .flat_map(|p| p.widgets.iter())
            .flat_map(|w| w.links.iter())
            .map(|l| (l.bounds, l.text.clone()))
            .collect()
    }
}
