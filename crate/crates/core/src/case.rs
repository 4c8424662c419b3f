//! Test case domain types and the JSON case file format.
//!
//! A case file looks like:
//!
//! ```json
//! { "case_id": "bind-card", "steps": ["...", "..."], "params": { "bank_name": "ICBC" } }
//! ```
//!
//! `params` keeps file order and duplicate names are rejected at load time.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed case: {0}")]
    Malformed(String),
    #[error("duplicate parameter: {0}")]
    DuplicateParameter(String),
}

/// One step of a test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    /// 1-based step number.
    pub index: usize,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewritten_text: Option<String>,
}

impl Instruction {
    pub fn new(index: usize, raw_text: impl Into<String>) -> Self {
        Self {
            index,
            raw_text: raw_text.into(),
            rewritten_text: None,
        }
    }

    /// The text handed to agents: the rewritten form when present.
    pub fn agent_text(&self) -> &str {
        self.rewritten_text.as_deref().unwrap_or(&self.raw_text)
    }
}

/// Named test values attached to a case. Order is preserved.
///
/// Construction through [`ParameterList::from_entries`] does not reject
/// duplicates so that [`validate_case`] can report them as data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParameterList {
    entries: Vec<(String, String)>,
}

impl ParameterList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    /// Appends an entry, rejecting a name that already exists.
    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<String>) -> Result<(), CaseError> {
        let name = name.into();
        if self.contains(&name) {
            return Err(CaseError::DuplicateParameter(name));
        }
        self.entries.push((name, value.into()));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v.as_str()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    fn duplicate_names(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut dups = Vec::new();
        for (name, _) in &self.entries {
            if !seen.insert(name.as_str()) && !dups.contains(name) {
                dups.push(name.clone());
            }
        }
        dups
    }
}

impl Serialize for ParameterList {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ParameterList {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ParamVisitor;

        impl<'de> Visitor<'de> for ParamVisitor {
            type Value = ParameterList;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of parameter names to string values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    entries.push((k, v));
                }
                Ok(ParameterList { entries })
            }
        }

        deserializer.deserialize_map(ParamVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub case_id: String,
    pub steps: Vec<Instruction>,
    pub parameters: ParameterList,
}

impl TestCase {
    /// Builds a case from raw step texts, numbering them from 1.
    pub fn new<S: Into<String>>(
        case_id: impl Into<String>,
        steps: impl IntoIterator<Item = S>,
        parameters: ParameterList,
    ) -> Self {
        Self {
            case_id: case_id.into(),
            steps: steps
                .into_iter()
                .enumerate()
                .map(|(i, s)| Instruction::new(i + 1, s))
                .collect(),
            parameters,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The on-disk representation. Rewritten texts are not part of the file format.
    pub fn to_file(&self) -> CaseFile {
        CaseFile {
            case_id: self.case_id.clone(),
            steps: self.steps.iter().map(|s| s.raw_text.clone()).collect(),
            params: self.parameters.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub case_id: String,
    pub steps: Vec<String>,
    #[serde(default)]
    pub params: ParameterList,
}

impl CaseFile {
    pub fn into_case(self) -> Result<TestCase, CaseError> {
        if self.case_id.trim().is_empty() {
            return Err(CaseError::Malformed("case_id is empty".into()));
        }
        if self.steps.is_empty() {
            return Err(CaseError::Malformed("steps list is empty".into()));
        }
        if let Some(pos) = self.steps.iter().position(|s| s.trim().is_empty()) {
            return Err(CaseError::Malformed(format!("step {} has empty text", pos + 1)));
        }
        if self.params.names().any(|n| n.is_empty()) {
            return Err(CaseError::Malformed("parameter with empty name".into()));
        }
        if let Some(dup) = self.params.duplicate_names().into_iter().next() {
            return Err(CaseError::DuplicateParameter(dup));
        }
        Ok(TestCase::new(self.case_id, self.steps, self.params))
    }
}

pub fn parse_test_case(json: &str) -> Result<TestCase, CaseError> {
    let file: CaseFile =
        serde_json::from_str(json).map_err(|e| CaseError::Malformed(e.to_string()))?;
    file.into_case()
}

pub fn load_test_case(path: impl AsRef<Path>) -> Result<TestCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_test_case(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Violation {
    EmptyCaseId,
    EmptySteps,
    NoncontiguousSteps { position: usize, found: usize },
    EmptyRawText { step: usize },
    EmptyRewrittenText { step: usize },
    EmptyParameterName,
    DuplicateParameter { name: String },
}

/// Checks every case and instruction invariant; an empty result means the case is well formed.
pub fn validate_case(case: &TestCase) -> Vec<Violation> {
    let mut out = Vec::new();
    if case.case_id.trim().is_empty() {
        out.push(Violation::EmptyCaseId);
    }
    if case.steps.is_empty() {
        out.push(Violation::EmptySteps);
    }
    for (pos, step) in case.steps.iter().enumerate() {
        if step.index != pos + 1 {
            out.push(Violation::NoncontiguousSteps {
                position: pos + 1,
                found: step.index,
            });
        }
        if step.raw_text.trim().is_empty() {
            out.push(Violation::EmptyRawText { step: step.index });
        }
        if matches!(&step.rewritten_text, Some(t) if t.trim().is_empty()) {
            out.push(Violation::EmptyRewrittenText { step: step.index });
        }
    }
    if case.parameters.names().any(str::is_empty) {
        out.push(Violation::EmptyParameterName);
    }
    for name in case.parameters.duplicate_names() {
        out.push(Violation::DuplicateParameter { name });
    }
    out
}

/// A proposed or executed skill invocation, e.g. `click(rid="btn_ok")`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillCall {
    pub skill_name: String,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub rationale: String,
}

impl SkillCall {
    pub fn new<K, V>(skill_name: impl Into<String>, args: impl IntoIterator<Item = (K, V)>) -> Self
    where
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            skill_name: skill_name.into(),
            args: args.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            rationale: String::new(),
        }
    }

    pub fn arg(&self, name: &str) -> Option<&str> {
        self.args.get(name).map(String::as_str)
    }
}

impl fmt::Display for SkillCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.skill_name)?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v:?}")?;
        }
        f.write_str(")")
    }
}
