mod common;

use common::Transcript;
use uat_copilot_core::agents::{PromptTemplateSet, ScriptedBackend};
use uat_copilot_core::case::{Instruction, ParameterList, TestCase};
use uat_copilot_core::environment::{AdbBackend, DeviceBackend, ReplayRunner, Scenario, Simulator};
use uat_copilot_core::orchestrator::{
    persistent_script, render_script, replay_script, run_case, run_single_agent_case, AbortReason, CaseResult,
    CaseRunner, OrchestratorError, SessionConfig,
};

const SCENARIO: &str = r#"{
  "scenario_id": "add-card",
  "screen": { "width": 360, "height": 640 },
  "initial_page": "form",
  "terminal_pages": ["done"],
  "pages": {
    "form": { "widgets": [
      { "class": "android.widget.TextView", "text": "Add card", "bounds": [0, 0, 360, 40] },
      { "class": "android.widget.EditText", "resource_id": "card_no", "text": "Card number", "clickable": true, "bounds": [10, 60, 350, 100] },
      { "class": "android.widget.Button", "resource_id": "next", "text": "Next", "clickable": true, "bounds": [10, 120, 350, 160] }
    ] },
    "agree": { "widgets": [
      { "class": "android.widget.TextView", "resource_id": "agreement", "text": "I have read and agree to 《Card Service Agreement》", "clickable": true,
        "bounds": [10, 40, 350, 80], "links": [ { "bounds": [200, 50, 330, 66], "text": "《Card Service Agreement》" } ] }
    ] },
    "keyboard": { "widgets": [
      { "class": "android.widget.TextView", "text": "Enter payment password", "bounds": [0, 0, 360, 40] },
      { "class": "android.widget.Button", "text": "1", "clickable": true, "bounds": [0, 400, 120, 460] },
      { "class": "android.widget.Button", "text": "2", "clickable": true, "bounds": [120, 400, 240, 460] },
      { "class": "android.widget.Button", "text": "3", "clickable": true, "bounds": [240, 400, 360, 460] }
    ] },
    "done": { "widgets": [ { "class": "android.widget.TextView", "text": "Card added", "bounds": [0, 0, 360, 40] } ] }
  },
  "transitions": [
    { "from": "form", "to": "agree", "trigger": { "skill": "click", "args": { "rid": "next" } } },
    { "from": "agree", "to": "keyboard", "trigger": { "skill": "click", "args": { "rid": "agreement" } } },
    { "from": "keyboard", "to": "done", "trigger": { "skill": "input_by_numeric_keyboard", "args": { "digits": "${pay_password}" } } }
  ]
}"#;

const STEPS: [&str; 4] = [
    "Input card number",
    "Tap Next",
    "Agree to the card service agreement",
    "Submit payment password (Use numeric keyboard)",
];

fn case() -> TestCase {
    TestCase::new(
        "add-card",
        STEPS,
        ParameterList::from_entries([("card_number", "6222020202"), ("pay_password", "123321")]),
    )
}

fn sim(case: &TestCase) -> Simulator {
    Simulator::new(Scenario::from_json(SCENARIO).unwrap(), &case.parameters).unwrap()
}

/// Aligned transcript; `before` lets a test inject entries ahead of a step's
/// first operation answer.
fn transcript(before: impl Fn(usize, &mut Transcript)) -> Transcript {
    let mut t = Transcript::new("add-card");
    before(1, &mut t);
    t.op(1, "input_text", &[("rid", "card_no"), ("text", "")]).para(1, "card_number").insp(1, true).sum(1, "card number entered");
    before(2, &mut t);
    t.op(2, "click", &[("rid", "next")]).insp(2, true).sum(2, "on the agreement page");
    before(3, &mut t);
    t.op(3, "click", &[("rid", "agreement")]).insp(3, true).sum(3, "agreement accepted");
    before(4, &mut t);
    t.op(4, "input_by_numeric_keyboard", &[("digits", "")]).para(4, "pay_password").sum(4, "password submitted");
    t
}

fn run(t: &Transcript, config: &SessionConfig) -> CaseResult {
    let case = case();
    let backend = ScriptedBackend::new(t.entries.clone());
    run_case(&case, &mut sim(&case), &backend, &PromptTemplateSet::builtin(), config).unwrap()
}

const GOLDEN_SCRIPT: &str = r#"[
  {
    "step": 1,
    "skill": "input_text",
    "args": {
      "rid": "card_no",
      "text": "6222020202"
    },
    "result": "APPLIED"
  },
  {
    "step": 2,
    "skill": "click",
    "args": {
      "rid": "next"
    },
    "result": "APPLIED"
  },
  {
    "step": 3,
    "skill": "click",
    "args": {
      "rid": "agreement"
    },
    "result": "APPLIED"
  },
  {
    "step": 4,
    "skill": "input_by_numeric_keyboard",
    "args": {
      "digits": "123321"
    },
    "result": "APPLIED"
  }
]
"#;

#[test]
fn aligned_transcript_passes_with_golden_script() {
    let result = run(&transcript(|_, _| {}), &SessionConfig::default());
    assert!(result.passed, "{result:#?}");
    assert_eq!(result.passed_steps(), 4);
    assert_eq!(result.first_failed_step, None);
    assert_eq!(render_script(&persistent_script(&result)), GOLDEN_SCRIPT);
    assert_eq!(result.step_traces[3].page_after.as_deref(), Some("done"));

    let actions: Vec<_> = result.actions().collect();
    for pair in actions.windows(2) {
        assert_eq!(pair[0].post_digest, pair[1].pre_digest);
    }
}

#[test]
fn post_digest_matches_fresh_observation() {
    let case = case();
    let mut env = sim(&case);
    let backend = ScriptedBackend::new(transcript(|_, _| {}).entries);
    let runner = CaseRunner::default();
    let result = runner.run(&case, &mut env, &backend).unwrap();
    let obs = env.observe().unwrap();
    let state = runner.perceiver.perceive(&obs.xml, obs.screenshot.as_ref()).unwrap();
    assert_eq!(result.actions().last().unwrap().post_digest, state.digest());
}

#[test]
fn script_replays_on_a_fresh_device() {
    let case = case();
    let script = persistent_script(&run(&transcript(|_, _| {}), &SessionConfig::default()));
    let mut env = sim(&case);
    let results = replay_script(&script, &mut env, &CaseRunner::default().perceiver).unwrap();
    assert!(results.iter().all(|r| r.is_applied()));
    assert_eq!(env.is_terminal(), Some(true));
}

#[test]
fn hyperlink_widget_is_clicked_through_refined_bounds() {
    let case = case();
    let backend = ScriptedBackend::new(transcript(|_, _| {}).entries);
    run_case(&case, &mut sim(&case), &backend, &PromptTemplateSet::builtin(), &SessionConfig::default()).unwrap();
    let step3 = backend.requests().into_iter().find(|r| r.key.step == 3 && r.key.agent == "op").unwrap();
    let observed = step3.messages[1].content.lines().find(|l| l.contains("resource-id=\"agreement\"")).unwrap().to_string();
    let bounds = observed.split("bounds=\"").nth(1).unwrap();
    let rect = uat_copilot_core::perception::Rect::parse_bounds(&bounds[..bounds.find('"').unwrap()]).unwrap();
    assert!(rect.iou(&uat_copilot_core::perception::Rect::new(200, 50, 330, 66)) >= 0.8, "{rect:?}");
}

fn unknown_skill(step: usize, t: &mut Transcript, k: usize, target: usize) {
    if step == target {
        for _ in 0..k {
            t.op(step, "tap", &[("rid", "next")]);
        }
    }
}

#[test]
fn reflection_budget() {
    for k in 1..=3 {
        let result = run(&transcript(|s, t| unknown_skill(s, t, k, 2)), &SessionConfig::default());
        assert!(result.passed, "k = {k}");
        let invalid = &result.step_traces[1].invalid_attempts;
        assert_eq!(invalid.len(), k);
        assert!(invalid.iter().all(|a| a.action_index == 0 && a.code == "UNKNOWN_SKILL"));
    }
    let result = run(&transcript(|s, t| unknown_skill(s, t, 4, 2)), &SessionConfig::default());
    assert!(!result.passed);
    assert_eq!(result.first_failed_step, Some(2));
    assert_eq!(result.abort_reason(), Some(AbortReason::ReflectionBudgetExceeded));
    assert_eq!(result.passed_steps(), 1);
    assert_eq!(result.step_traces.len(), 2);
    assert!(result.actions().all(|a| a.step_index < 2));
    assert_eq!(result.step_traces[1].invalid_attempts.len(), 4);
}

#[test]
fn reflection_prompt_carries_invalid_history() {
    let case = case();
    let backend = ScriptedBackend::new(transcript(|s, t| unknown_skill(s, t, 2, 2)).entries);
    run_case(&case, &mut sim(&case), &backend, &PromptTemplateSet::builtin(), &SessionConfig::default()).unwrap();
    let ops: Vec<_> = backend.requests().into_iter().filter(|r| r.key.step == 2 && r.key.agent == "op").collect();
    assert_eq!(ops.len(), 3);
    assert!(!ops[0].messages[1].content.contains("Invalid Actions"));
    assert!(ops[1].messages[1].content.contains("Invalid Actions:\n1. tap(rid=\"next\") -> UNKNOWN_SKILL"));
    assert!(ops[2].messages[1].content.contains("\n2. tap(rid=\"next\") -> UNKNOWN_SKILL"));
    assert!(ops[2].messages[1].content.contains("Reflection:\n"));
}

#[test]
fn every_invalidity_kind_feeds_reflection() {
    let t = transcript(|s, t| {
        if s == 1 {
            t.op_raw(1, "I would tap somewhere");
            t.op(1, "click", &[("rid", "mock_id_0")]);
            t.op(1, "click", &[("rid", "ghost")]);
        }
    });
    let result = run(&t, &SessionConfig::default());
    assert!(result.passed);
    let codes: Vec<_> = result.step_traces[0].invalid_attempts.iter().map(|a| a.code.as_str()).collect();
    assert_eq!(codes, ["UNPARSEABLE", "REJECTED", "UNKNOWN_RESOURCE_ID"]);
    assert!(result.step_traces[0].invalid_attempts[0].call.is_none());
}

#[test]
fn unknown_parameter_is_invalid() {
    let mut t = Transcript::new("add-card");
    t.op(1, "input_text", &[("rid", "card_no"), ("text", "")]).para(1, "card_numbr");
    t.op(1, "input_text", &[("rid", "card_no"), ("text", "")]).para(1, "card_number").insp(1, false).sum(1, "x");
    let config = SessionConfig { max_actions_per_step: 1, ..SessionConfig::default() };
    let result = run(&t, &config);
    let trace = &result.step_traces[0];
    assert_eq!(trace.invalid_attempts[0].code, "UNKNOWN_PARAMETER");
    assert_eq!(trace.actions.len(), 1);
    assert_eq!(trace.abort_reason, Some(AbortReason::ActionBudgetExceeded));
}

#[test]
fn history_resets_per_action_iteration() {
    let mut t = Transcript::new("add-card");
    for _ in 0..2 {
        t.op(1, "tap", &[]).op(1, "tap", &[]);
        t.op(1, "input_text", &[("rid", "card_no"), ("text", "")]).para(1, "card_number");
    }
    t.insp(1, false).sum(1, "typed once").insp(1, true).sum(1, "typed twice");
    let tail = transcript(|_, _| {});
    t.entries.extend(tail.entries.into_iter().filter(|e| e.key.step > 1));
    let config = SessionConfig { max_reflection_retries: 2, ..SessionConfig::default() };
    let result = run(&t, &config);
    assert!(result.passed, "{result:#?}");
    let groups: Vec<_> = result.step_traces[0].invalid_attempts.iter().map(|a| a.action_index).collect();
    assert_eq!(groups, [0, 0, 1, 1]);
    assert_eq!(result.step_traces[0].actions.len(), 2);
}

#[test]
fn backend_failure_aborts_the_case() {
    let mut t = transcript(|_, _| {});
    t.entries.retain(|e| !(e.key.step == 3 && e.key.agent == "op"));
    let result = run(&t, &SessionConfig::default());
    assert_eq!(result.first_failed_step, Some(3));
    assert_eq!(result.abort_reason(), Some(AbortReason::BackendError));
    assert_eq!(result.passed_steps(), 2);
}

#[test]
fn replay_stable() {
    let t = transcript(|s, t| unknown_skill(s, t, 1, 3));
    assert_eq!(run(&t, &SessionConfig::default()), run(&t, &SessionConfig::default()));
}

#[test]
fn one_step_case_reaching_terminal_page() {
    let mut scenario: serde_json::Value = serde_json::from_str(SCENARIO).unwrap();
    scenario["initial_page"] = "keyboard".into();
    let scenario = Scenario::from_json(&scenario.to_string()).unwrap();
    let case = TestCase::new(
        "pw",
        [STEPS[3]],
        ParameterList::from_entries([("pay_password", "123321")]),
    );
    let mut t = Transcript::new("pw");
    t.op(1, "input_by_numeric_keyboard", &[("digits", "")]).para(1, "pay_password").sum(1, "done");
    let backend = ScriptedBackend::new(t.entries);
    let mut env = Simulator::new(scenario, &case.parameters).unwrap();
    let result = run_case(&case, &mut env, &backend, &PromptTemplateSet::builtin(), &SessionConfig::default()).unwrap();
    assert!(result.passed);
    assert_eq!(result.actions().count(), 1);
    assert!(backend.requests().iter().all(|r| r.key.agent != "insp"));
}

#[test]
fn single_agent_mode() {
    let mut t = Transcript::new("add-card");
    t.single(1, "input_text", &[("rid", "card_no"), ("text", "")], Some("card_number"), true)
        .single(2, "click", &[("rid", "next")], None, true)
        .single(3, "click", &[("rid", "agreement")], None, true)
        .single(4, "input_by_numeric_keyboard", &[("digits", "")], Some("pay_password"), true);
    let case = case();
    let backend = ScriptedBackend::new(t.entries);
    let result = run_single_agent_case(&case, &mut sim(&case), &backend, &PromptTemplateSet::builtin(), &SessionConfig::default()).unwrap();
    assert!(result.passed, "{result:#?}");
    assert_eq!(render_script(&persistent_script(&result)), GOLDEN_SCRIPT);
    assert!(backend.requests().iter().all(|r| r.key.agent == "op"));

    let backend = ScriptedBackend::new(transcript(|_, _| {}).entries);
    let result = run_single_agent_case(&case, &mut sim(&case), &backend, &PromptTemplateSet::builtin(), &SessionConfig::default()).unwrap();
    assert!(!result.passed);
    assert_eq!(result.step_traces[0].invalid_attempts[0].code, "SCHEMA_MISMATCH");
}

#[test]
fn rewritten_text_is_what_agents_see() {
    let mut case = case();
    case.steps[1] = Instruction { rewritten_text: Some("Click the Next button".into()), ..case.steps[1].clone() };
    let backend = ScriptedBackend::new(transcript(|_, _| {}).entries);
    run_case(&case, &mut sim(&case), &backend, &PromptTemplateSet::builtin(), &SessionConfig::default()).unwrap();
    let req = backend.requests().into_iter().find(|r| r.key.step == 2).unwrap();
    assert!(req.messages[1].content.starts_with("Instruction:\nClick the Next button\n"));
}

#[test]
fn device_failure_is_an_error() {
    let case = case();
    let backend = ScriptedBackend::new(Vec::new());
    let mut env = AdbBackend::new(ReplayRunner::offline(), None);
    let err = run_case(&case, &mut env, &backend, &PromptTemplateSet::builtin(), &SessionConfig::default()).unwrap_err();
    assert!(matches!(err, OrchestratorError::Device(_)));
    assert_eq!(err.code(), "DEVICE_UNAVAILABLE");
}
