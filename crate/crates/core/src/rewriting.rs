//! Rewrites templated step text into the short instruction agents act on.
//!
//! Raw steps follow `System requests User to <P1>, and System validates the
//! result feedback from User is <P2>.` The first phrase is page context, the
//! second is the expected user action. Rules loaded from a JSON file turn the
//! second phrase into the final instruction; when no rule fires the phrase is
//! used verbatim.
//!
//! Rule file format:
//!
//! ```json
//! [{ "rule_id": "bank", "priority": 10,
//!    "match": { "phrase2": "selecting bank", "requires_params": ["bank_name"] },
//!    "output": "Select ${bank_name}" }]
//! ```
//!
//! `phrase1`/`phrase2` patterns are regular expressions anchored at both ends.
//! Rules are tried by descending priority; equal priorities keep file order.
//! `${name}` markers in the output are left in place for the agents.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use crate::case::{ParameterList, TestCase};

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("cannot read rule file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed rule file: {0}")]
    Malformed(String),
    #[error("invalid rule {rule_id}: {reason}")]
    InvalidRule { rule_id: String, reason: String },
    #[error("rule {rule_id} references parameter ${{{param}}} which the case does not define")]
    RuleTemplate { rule_id: String, param: String },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<RewriteError>,
    },
}

fn template_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*System requests User to\s+(.+?),\s*and System validates the result feedback from User is\s+(.+?)\.?\s*$",
        )
        .expect("template pattern")
    })
}

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\{([^}]*)\}").expect("placeholder pattern"))
}

/// Names referenced as `${name}` in `text`, in order of appearance.
pub fn placeholders(text: &str) -> Vec<String> {
    placeholder_regex()
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .collect()
}

/// Splits a templated step into its two phrases, or `None` for free-form text.
pub fn match_template(raw_text: &str) -> Option<(String, String)> {
    let caps = template_regex().captures(raw_text)?;
    let (p1, p2) = (caps[1].trim(), caps[2].trim());
    (!p1.is_empty() && !p2.is_empty()).then(|| (p1.to_string(), p2.to_string()))
}

#[derive(Debug, Clone)]
pub struct RewriteRule {
    pub rule_id: String,
    pub priority: i64,
    phrase1: Option<Regex>,
    phrase2: Option<Regex>,
    pub requires_params: Vec<String>,
    pub output: String,
}

fn anchored(rule_id: &str, pattern: &str) -> Result<Regex, RewriteError> {
    Regex::new(&format!("^(?:{pattern})$")).map_err(|e| RewriteError::InvalidRule {
        rule_id: rule_id.to_string(),
        reason: e.to_string(),
    })
}

impl RewriteRule {
    pub fn new(
        rule_id: impl Into<String>,
        priority: i64,
        phrase1: Option<&str>,
        phrase2: Option<&str>,
        requires_params: Vec<String>,
        output: impl Into<String>,
    ) -> Result<Self, RewriteError> {
        let rule_id = rule_id.into();
        let output = output.into();
        let invalid = |reason: String| RewriteError::InvalidRule {
            rule_id: rule_id.clone(),
            reason,
        };
        if rule_id.is_empty() {
            return Err(invalid("empty rule_id".into()));
        }
        if output.trim().is_empty() {
            return Err(invalid("empty output template".into()));
        }
        for name in placeholders(&output) {
            if !requires_params.contains(&name) {
                return Err(invalid(format!(
                    "output references ${{{name}}} which is not listed in requires_params"
                )));
            }
        }
        Ok(Self {
            phrase1: phrase1.map(|p| anchored(&rule_id, p)).transpose()?,
            phrase2: phrase2.map(|p| anchored(&rule_id, p)).transpose()?,
            rule_id,
            priority,
            requires_params,
            output,
        })
    }

    pub fn matches(&self, phrase1: &str, phrase2: &str) -> bool {
        self.phrase1.as_ref().is_none_or(|r| r.is_match(phrase1))
            && self.phrase2.as_ref().is_none_or(|r| r.is_match(phrase2))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFileEntry {
    rule_id: String,
    #[serde(default)]
    priority: i64,
    #[serde(rename = "match", default)]
    matcher: RuleFileMatch,
    output: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFileMatch {
    phrase1: Option<String>,
    phrase2: Option<String>,
    #[serde(default)]
    requires_params: Vec<String>,
}

/// Rules sorted by descending priority; ties keep insertion order.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<RewriteRule>,
}

impl RuleSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(rules: Vec<RewriteRule>) -> Result<Self, RewriteError> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.rule_id.clone()) {
                return Err(RewriteError::InvalidRule {
                    rule_id: r.rule_id.clone(),
                    reason: "duplicate rule_id".into(),
                });
            }
        }
        let mut rules = rules;
        // stable sort keeps file order among equal priorities
        rules.sort_by_key(|r| std::cmp::Reverse(r.priority));
        Ok(Self { rules })
    }

    pub fn from_json(json: &str) -> Result<Self, RewriteError> {
        let entries: Vec<RuleFileEntry> =
            serde_json::from_str(json).map_err(|e| RewriteError::Malformed(e.to_string()))?;
        let rules = entries
            .into_iter()
            .map(|e| {
                RewriteRule::new(
                    e.rule_id,
                    e.priority,
                    e.matcher.phrase1.as_deref(),
                    e.matcher.phrase2.as_deref(),
                    e.matcher.requires_params,
                    e.output,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RewriteError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RewriteError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The starter rules bundled with the crate.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/rules.json")).expect("bundled rules are valid")
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Fires the first matching rule, or returns `phrase2` unchanged.
pub fn apply_rules(
    phrase1: &str,
    phrase2: &str,
    params: &ParameterList,
    rules: &RuleSet,
) -> Result<String, RewriteError> {
    let Some(rule) = rules.rules.iter().find(|r| r.matches(phrase1, phrase2)) else {
        return Ok(phrase2.to_string());
    };
    let referenced = rule
        .requires_params
        .iter()
        .cloned()
        .chain(placeholders(&rule.output));
    for name in referenced {
        if !params.contains(&name) {
            return Err(RewriteError::RuleTemplate {
                rule_id: rule.rule_id.clone(),
                param: name,
            });
        }
    }
    Ok(rule.output.clone())
}

/// Sets `rewritten_text` on every step. Off-template steps pass through as-is.
pub fn rewrite_case(case: &TestCase, rules: &RuleSet) -> Result<TestCase, RewriteError> {
    let mut out = case.clone();
    for step in &mut out.steps {
        let rewritten = match match_template(&step.raw_text) {
            Some((p1, p2)) => apply_rules(&p1, &p2, &case.parameters, rules).map_err(|e| {
                RewriteError::Step {
                    step: step.index,
                    source: Box::new(e),
                }
            })?,
            None => step.raw_text.clone(),
        };
        step.rewritten_text = Some(rewritten);
    }
    Ok(out)
}
