#![allow(dead_code)]

use std::collections::HashMap;

use serde_json::json;
use uat_copilot_core::agents::{TranscriptEntry, TranscriptKey};

/// Builds transcripts with per-(step, agent) attempt counters.
pub struct Transcript {
    case: String,
    counters: HashMap<(usize, &'static str), usize>,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new(case: &str) -> Self {
        Self { case: case.into(), counters: HashMap::new(), entries: Vec::new() }
    }

    fn push(&mut self, step: usize, agent: &'static str, response: String) -> &mut Self {
        let c = self.counters.entry((step, agent)).or_insert(0);
        self.entries.push(TranscriptEntry {
            key: TranscriptKey { case: self.case.clone(), step, agent: agent.into(), attempt: *c },
            response,
        });
        *c += 1;
        self
    }

    pub fn op(&mut self, step: usize, command: &str, args: &[(&str, &str)]) -> &mut Self {
        let args: serde_json::Map<_, _> = args.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let r = json!({"reasoning": format!("{command} is the next action"), "plan": "continue",
            "answer": {"command": command, "args": args, "description": command}});
        self.push(step, "op", r.to_string())
    }

    pub fn op_raw(&mut self, step: usize, raw: &str) -> &mut Self {
        self.push(step, "op", raw.to_string())
    }

    pub fn para(&mut self, step: usize, name: &str) -> &mut Self {
        self.push(step, "para", json!({"reasoning": "matches the step", "answer": name}).to_string())
    }

    pub fn insp(&mut self, step: usize, yes: bool) -> &mut Self {
        let a = if yes { "yes" } else { "no" };
        self.push(step, "insp", json!({"reasoning": "checked the page", "answer": a}).to_string())
    }

    pub fn sum(&mut self, step: usize, text: &str) -> &mut Self {
        self.push(step, "sum", json!({"reasoning": "keep track", "answer": text}).to_string())
    }

    pub fn single(&mut self, step: usize, command: &str, args: &[(&str, &str)], parameter: Option<&str>, goal: bool) -> &mut Self {
        let args: serde_json::Map<_, _> = args.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let r = json!({"reasoning": "all in one", "plan": "continue",
            "answer": {"command": command, "args": args, "description": command,
                       "parameter": parameter, "goal": if goal { "yes" } else { "no" }}});
        self.push(step, "op", r.to_string())
    }
}
