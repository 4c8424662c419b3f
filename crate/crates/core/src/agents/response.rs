use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::{AgentError, AgentKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerPayload {
    Operation {
        command: String,
        args: BTreeMap<String, String>,
        description: String,
    },
    Parameter(String),
    Goal(bool),
    Summary(String),
    /// Single-agent answer: action, parameter and goal judgement at once.
    Combined {
        command: String,
        args: BTreeMap<String, String>,
        description: String,
        parameter: Option<String>,
        goal: bool,
        summary: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentAnswer {
    pub reasoning: String,
    pub plan: Option<String>,
    pub payload: AnswerPayload,
}

/// First JSON object in `raw`, skipping prose and code fences around it.
fn first_object(raw: &str) -> Option<Map<String, Value>> {
    raw.char_indices().filter(|(_, c)| *c == '{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

fn mismatch(msg: impl Into<String>) -> AgentError {
    AgentError::SchemaMismatch(msg.into())
}

fn text_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, AgentError> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s),
        Some(Value::String(_)) => Err(mismatch(format!("\"{key}\" is empty"))),
        Some(_) => Err(mismatch(format!("\"{key}\" must be a string"))),
        None => Err(mismatch(format!("missing \"{key}\""))),
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Command, stringified args, description, and the raw answer object.
type ParsedCall<'a> = (String, BTreeMap<String, String>, String, &'a Map<String, Value>);

fn parse_call(answer: &Value) -> Result<ParsedCall<'_>, AgentError> {
    let obj = answer.as_object().ok_or_else(|| mismatch("answer must be an object with command and args"))?;
    let command = text_field(obj, "command")?.trim().to_string();
    let args = match obj.get("args") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(Value::Object(m)) => m
            .iter()
            .map(|(k, v)| match v {
                Value::Null => Ok((k.clone(), String::new())),
                _ => scalar_text(v)
                    .map(|s| (k.clone(), s))
                    .ok_or_else(|| mismatch(format!("argument \"{k}\" must be a scalar"))),
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(mismatch("\"args\" must be an object")),
    };
    let description = obj.get("description").and_then(Value::as_str).unwrap_or_default().to_string();
    Ok((command, args, description, obj))
}

fn parse_goal(v: Option<&Value>) -> Result<bool, AgentError> {
    match v.and_then(Value::as_str).map(|s| s.trim().to_ascii_lowercase()) {
        Some(s) if s == "yes" => Ok(true),
        Some(s) if s == "no" => Ok(false),
        Some(s) => Err(mismatch(format!("goal answer must be yes or no, got {s:?}"))),
        None => Err(mismatch("goal answer must be the string yes or no")),
    }
}

/// Extracts and validates the JSON answer of an agent of the given kind.
pub fn parse_agent_response(raw: &str, kind: AgentKind) -> Result<AgentAnswer, AgentError> {
    let obj = first_object(raw).ok_or_else(|| AgentError::Unparseable(preview(raw)))?;
    let reasoning = text_field(&obj, "reasoning")?.to_string();
    let plan = match kind {
        AgentKind::Op | AgentKind::Single => Some(text_field(&obj, "plan")?.to_string()),
        _ => obj.get("plan").and_then(Value::as_str).map(str::to_string),
    };
    let answer = obj.get("answer").ok_or_else(|| mismatch("missing \"answer\""))?;
    let payload = match kind {
        AgentKind::Op => {
            let (command, args, description, _) = parse_call(answer)?;
            AnswerPayload::Operation { command, args, description }
        }
        AgentKind::Para => match answer {
            Value::String(s) if !s.trim().is_empty() => AnswerPayload::Parameter(s.trim().to_string()),
            _ => return Err(mismatch("answer must be a parameter name")),
        },
        AgentKind::Insp => AnswerPayload::Goal(parse_goal(Some(answer))?),
        AgentKind::Sum => match answer {
            Value::String(s) => AnswerPayload::Summary(s.clone()),
            _ => return Err(mismatch("answer must be a summary string")),
        },
        AgentKind::Single => {
            let (command, args, description, obj) = parse_call(answer)?;
            let parameter = match obj.get("parameter") {
                None => return Err(mismatch("missing \"parameter\"")),
                Some(Value::Null) => None,
                Some(Value::String(s)) if s.trim().is_empty() => None,
                Some(Value::String(s)) => Some(s.trim().to_string()),
                Some(_) => return Err(mismatch("\"parameter\" must be a name or null")),
            };
            let goal = parse_goal(obj.get("goal"))?;
            let summary = obj.get("summary").and_then(Value::as_str).map(str::to_string);
            AnswerPayload::Combined { command, args, description, parameter, goal, summary }
        }
    };
    Ok(AgentAnswer { reasoning, plan, payload })
}

fn preview(raw: &str) -> String {
    const MAX: usize = 80;
    if raw.chars().count() <= MAX {
        format!("no JSON object in {raw:?}")
    } else {
        let head: String = raw.chars().take(MAX).collect();
        format!("no JSON object in {head:?}...")
    }
}
