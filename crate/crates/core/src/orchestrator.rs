//! Runs a test case end to end: per step, propose, bind parameters, validate,
//! reflect on invalid actions, execute, inspect and summarize until the step
//! goal is reached or a budget runs out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    AgentError, AgentSession, InvalidAttempt, Invalidity, LlmBackend, Memory, MemoryEntry, PromptTemplateSet,
    DEFAULT_MEMORY_BUDGET,
};
use crate::case::{SkillCall, TestCase};
use crate::environment::{DeviceBackend, DeviceError, ExecutionResult, ExecutionStatus};
use crate::perception::{GuiState, LinkDetectionConfig, PerceptionError, Perceiver};
use crate::skills::{validate_call, SkillLibrary};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("cannot read device state: {0}")]
    Perception(#[from] PerceptionError),
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("prompt assembly failed: {0}")]
    Prompt(AgentError),
}

impl OrchestratorError {
    pub fn code(&self) -> &'static str {
        match self {
            OrchestratorError::Device(_) => "DEVICE_UNAVAILABLE",
            OrchestratorError::Perception(_) => "PERCEPTION_ERROR",
            OrchestratorError::Config(_) => "CONFIG_ERROR",
            OrchestratorError::Prompt(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    #[default]
    #[serde(alias = "multi")]
    MultiAgent,
    #[serde(alias = "single")]
    SingleAgent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub max_actions_per_step: usize,
    pub max_reflection_retries: usize,
    pub max_total_actions: usize,
    pub mode: Mode,
    /// Character budget of the working-memory summary.
    pub memory_budget: usize,
    /// Include the reflection block when re-proposing after invalid actions.
    pub reflection: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            max_actions_per_step: 20,
            max_reflection_retries: 3,
            max_total_actions: 200,
            mode: Mode::MultiAgent,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            reflection: true,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let budgets = [
            ("max_actions_per_step", self.max_actions_per_step),
            ("max_reflection_retries", self.max_reflection_retries),
            ("max_total_actions", self.max_total_actions),
            ("memory_budget", self.memory_budget),
        ];
        match budgets.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(OrchestratorError::Config(format!("{name} must be at least 1"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AbortReason {
    ReflectionBudgetExceeded,
    ActionBudgetExceeded,
    TotalActionBudgetExceeded,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub step_index: usize,
    pub call: SkillCall,
    pub result: ExecutionResult,
    pub pre_digest: String,
    pub post_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step_index: usize,
    pub instruction: String,
    pub actions: Vec<ActionRecord>,
    /// Invalid history of every action iteration, tagged by action index.
    pub invalid_attempts: Vec<InvalidAttempt>,
    pub goal_accomplished: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<AbortReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_detail: Option<String>,
    /// Simulator page after the step, when the backend knows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_after: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    /// Number of steps in the case.
    pub step_count: usize,
    pub step_traces: Vec<StepTrace>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failed_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Set when the case could not run at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseResult {
    /// A case that failed before its first step, e.g. on a config error.
    pub fn failed(case_id: impl Into<String>, step_count: usize, error: impl Into<String>) -> Self {
        Self {
            case_id: case_id.into(),
            step_count,
            step_traces: Vec::new(),
            passed: false,
            first_failed_step: Some(1),
            warnings: Vec::new(),
            error: Some(error.into()),
        }
    }

    pub fn passed_steps(&self) -> usize {
        self.step_traces.iter().filter(|t| t.goal_accomplished).count()
    }

    pub fn abort_reason(&self) -> Option<AbortReason> {
        self.step_traces.iter().find_map(|t| t.abort_reason)
    }

    /// The full action sequence, all steps in order.
    pub fn actions(&self) -> impl Iterator<Item = &ActionRecord> {
        self.step_traces.iter().flat_map(|t| t.actions.iter())
    }
}

/// One line of a persistent test script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub step: usize,
    pub skill: String,
    pub args: BTreeMap<String, String>,
    pub result: ExecutionStatus,
}

pub fn persistent_script(result: &CaseResult) -> Vec<ScriptEntry> {
    result
        .actions()
        .map(|a| ScriptEntry {
            step: a.step_index,
            skill: a.call.skill_name.clone(),
            args: a.call.args.clone(),
            result: a.result.status,
        })
        .collect()
}

/// Pretty JSON with a trailing newline, the on-disk script format.
pub fn render_script(script: &[ScriptEntry]) -> String {
    serde_json::to_string_pretty(script).expect("script serializes") + "\n"
}

/// Replays a stored script without any agent, perceiving before each call.
pub fn replay_script(
    script: &[ScriptEntry],
    env: &mut dyn DeviceBackend,
    perceiver: &Perceiver,
) -> Result<Vec<ExecutionResult>, OrchestratorError> {
    let mut out = Vec::with_capacity(script.len());
    for entry in script {
        let state = observe(env, perceiver)?;
        let call = SkillCall::new(&entry.skill, entry.args.clone());
        out.push(env.execute(&call, &state)?);
    }
    Ok(out)
}

fn observe(env: &mut dyn DeviceBackend, perceiver: &Perceiver) -> Result<GuiState, OrchestratorError> {
    let obs = env.observe()?;
    Ok(perceiver.perceive(&obs.xml, obs.screenshot.as_ref())?)
}

/// Everything a case session needs apart from the case, device and model.
#[derive(Debug, Clone)]
pub struct CaseRunner {
    pub templates: PromptTemplateSet,
    pub library: SkillLibrary,
    pub perceiver: Perceiver,
    pub config: SessionConfig,
}

impl Default for CaseRunner {
    fn default() -> Self {
        Self::new(PromptTemplateSet::builtin(), SessionConfig::default())
    }
}

/// Outcome of one proposal: usable call, or invalid with the offending call.
enum Proposal {
    Valid { call: SkillCall, result: ExecutionResult, goal: Option<bool>, summary: Option<String> },
    Invalid(Option<SkillCall>, Invalidity),
}

enum StepEnd {
    Done,
    Abort(AbortReason, String),
}

impl CaseRunner {
    pub fn new(templates: PromptTemplateSet, config: SessionConfig) -> Self {
        Self {
            templates,
            library: SkillLibrary::default(),
            perceiver: Perceiver::with_link_refinement(LinkDetectionConfig::default()),
            config,
        }
    }

    /// Runs `case` against `env`, resetting it first. Device and perception
    /// failures are errors; model failures abort the case inside the result.
    pub fn run(
        &self,
        case: &TestCase,
        env: &mut dyn DeviceBackend,
        backend: &dyn LlmBackend,
    ) -> Result<CaseResult, OrchestratorError> {
        self.config.validate()?;
        env.reset()?;
        let mut session = AgentSession::new(&case.case_id, backend, &self.templates, &self.library, &case.parameters)
            .with_memory_budget(self.config.memory_budget)
            .with_reflection(self.config.reflection);
        let mut traces = Vec::new();
        let mut total_actions = 0;
        let mut first_failed_step = None;
        for (pos, step) in case.steps.iter().enumerate() {
            let next = case.steps.get(pos + 1).map(|s| s.agent_text());
            let last = next.is_none();
            let mut trace = StepTrace {
                step_index: step.index,
                instruction: step.agent_text().to_string(),
                actions: Vec::new(),
                invalid_attempts: Vec::new(),
                goal_accomplished: false,
                abort_reason: None,
                abort_detail: None,
                page_after: None,
            };
            let end = self.run_step(&mut session, env, &mut trace, next, last, &mut total_actions)?;
            trace.page_after = env.current_page();
            let aborted = matches!(end, StepEnd::Abort(..));
            if let StepEnd::Abort(reason, detail) = end {
                log::info!("case {} aborted at step {}: {detail}", case.case_id, step.index);
                trace.abort_reason = Some(reason);
                trace.abort_detail = Some(detail);
                first_failed_step = Some(step.index);
            }
            traces.push(trace);
            if aborted {
                break;
            }
        }
        Ok(CaseResult {
            case_id: case.case_id.clone(),
            step_count: case.len(),
            passed: first_failed_step.is_none() && traces.iter().all(|t| t.goal_accomplished),
            step_traces: traces,
            first_failed_step,
            warnings: session.take_warnings(),
            error: None,
        })
    }

    fn run_step(
        &self,
        session: &mut AgentSession<'_>,
        env: &mut dyn DeviceBackend,
        trace: &mut StepTrace,
        next: Option<&str>,
        last: bool,
        total_actions: &mut usize,
    ) -> Result<StepEnd, OrchestratorError> {
        let step = trace.step_index;
        let instruction = trace.instruction.clone();
        let mut memory = Memory::default();
        let mut state = observe(env, &self.perceiver)?;
        loop {
            if trace.actions.len() >= self.config.max_actions_per_step {
                return Ok(StepEnd::Abort(
                    AbortReason::ActionBudgetExceeded,
                    format!("{} actions without reaching the step goal", trace.actions.len()),
                ));
            }
            if *total_actions >= self.config.max_total_actions {
                return Ok(StepEnd::Abort(
                    AbortReason::TotalActionBudgetExceeded,
                    format!("case used {total_actions} actions"),
                ));
            }
            let action_index = trace.actions.len();
            let mut history: Vec<InvalidAttempt> = Vec::new();
            let (call, result, predicted_goal, summary) = loop {
                let proposal = match self.config.mode {
                    Mode::MultiAgent => self.propose_multi(session, env, &instruction, step, &state, &memory, &history),
                    Mode::SingleAgent => {
                        self.propose_single(session, env, &instruction, next, step, &state, &memory, &history)
                    }
                };
                match proposal {
                    Ok(Proposal::Valid { call, result, goal, summary }) => break (call, result, goal, summary),
                    Ok(Proposal::Invalid(call, why)) => {
                        log::debug!("step {step}: invalid action {call:?}: {}", why.detail());
                        history.push(InvalidAttempt::new(action_index, call, &why));
                        if history.len() > self.config.max_reflection_retries {
                            let detail = format!("{} invalid attempts, last: {}", history.len(), history[history.len() - 1]);
                            trace.invalid_attempts.append(&mut history);
                            return Ok(StepEnd::Abort(AbortReason::ReflectionBudgetExceeded, detail));
                        }
                    }
                    Err(StepError::Backend(e)) => {
                        trace.invalid_attempts.append(&mut history);
                        return Ok(StepEnd::Abort(AbortReason::BackendError, e.to_string()));
                    }
                    Err(StepError::Fatal(e)) => return Err(e),
                }
            };
            trace.invalid_attempts.append(&mut history);

            let pre_digest = state.digest();
            state = observe(env, &self.perceiver)?;
            trace.actions.push(ActionRecord {
                step_index: step,
                call: call.clone(),
                result: result.clone(),
                pre_digest,
                post_digest: state.digest(),
            });
            *total_actions += 1;
            let entry = MemoryEntry { call, status: result.status };

            let goal = match predicted_goal {
                Some(g) => {
                    if let Some(s) = summary {
                        memory.summary = s;
                    }
                    memory.recent_actions.push(entry);
                    g
                }
                None => {
                    let calls: Vec<SkillCall> = trace.actions.iter().map(|a| a.call.clone()).collect();
                    let terminal = if last { env.is_terminal() } else { None };
                    let g = match session.inspect_goal(step, &calls, &instruction, next, &state, terminal) {
                        Ok(g) => g,
                        Err(e) => return self.agent_failure(e),
                    };
                    memory = session
                        .summarize_memory(step, &instruction, &memory, entry, &state, g)
                        .map_err(OrchestratorError::Prompt)?;
                    g
                }
            };
            if goal {
                trace.goal_accomplished = true;
                return Ok(StepEnd::Done);
            }
        }
    }

    fn agent_failure(&self, e: AgentError) -> Result<StepEnd, OrchestratorError> {
        match e {
            AgentError::Backend(b) => Ok(StepEnd::Abort(AbortReason::BackendError, b.to_string())),
            other => Err(OrchestratorError::Prompt(other)),
        }
    }

    /// Static validation then execution; a device rejection is an invalid
    /// action like any other.
    fn check_and_execute(
        &self,
        session: &AgentSession<'_>,
        env: &mut dyn DeviceBackend,
        call: SkillCall,
        state: &GuiState,
    ) -> Result<Result<(SkillCall, ExecutionResult), Proposal>, StepError> {
        if let Err(r) = validate_call(&self.library, &call, state, session.params()) {
            return Ok(Err(Proposal::Invalid(Some(call), Invalidity::Static(r))));
        }
        let result = env.execute(&call, state).map_err(|e| StepError::Fatal(e.into()))?;
        if !result.is_applied() {
            let reason = result.reject_reason.clone().unwrap_or_default();
            return Ok(Err(Proposal::Invalid(Some(call), Invalidity::Rejected(reason))));
        }
        Ok(Ok((call, result)))
    }

    fn bind(&self, call: &mut SkillCall, name: &str, session: &AgentSession<'_>) {
        if let (Some(arg), Some(value)) = (
            self.library.get(&call.skill_name).and_then(|s| s.value_arg()),
            session.params().get(name),
        ) {
            call.args.insert(arg.name.clone(), value.to_string());
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn propose_multi(
        &self,
        session: &mut AgentSession<'_>,
        env: &mut dyn DeviceBackend,
        instruction: &str,
        step: usize,
        state: &GuiState,
        memory: &Memory,
        history: &[InvalidAttempt],
    ) -> Result<Proposal, StepError> {
        let mut call = match session.operation_propose(step, instruction, state, memory, history) {
            Ok(c) => c,
            Err(e) => return StepError::classify(None, e),
        };
        if self.library.is_input_skill(&call.skill_name) {
            match session.parameter_select(step, instruction, &call) {
                Ok(name) => self.bind(&mut call, &name, session),
                Err(e) => return StepError::classify(Some(call), e),
            }
        }
        Ok(match self.check_and_execute(session, env, call, state)? {
            Ok((call, result)) => Proposal::Valid { call, result, goal: None, summary: None },
            Err(invalid) => invalid,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn propose_single(
        &self,
        session: &mut AgentSession<'_>,
        env: &mut dyn DeviceBackend,
        instruction: &str,
        next: Option<&str>,
        step: usize,
        state: &GuiState,
        memory: &Memory,
        history: &[InvalidAttempt],
    ) -> Result<Proposal, StepError> {
        let answer = match session.single_propose(step, instruction, next, state, memory, history) {
            Ok(a) => a,
            Err(e) => return StepError::classify(None, e),
        };
        let mut call = answer.call;
        if self.library.is_input_skill(&call.skill_name) {
            match &answer.parameter {
                Some(name) => self.bind(&mut call, name, session),
                None => {
                    let why = AgentError::SchemaMismatch(format!("{} needs a parameter", call.skill_name));
                    return Ok(Proposal::Invalid(Some(call), Invalidity::Answer(why)));
                }
            }
        }
        Ok(match self.check_and_execute(session, env, call, state)? {
            Ok((call, result)) => {
                Proposal::Valid { call, result, goal: Some(answer.goal), summary: answer.summary }
            }
            Err(invalid) => invalid,
        })
    }
}

enum StepError {
    Backend(AgentError),
    Fatal(OrchestratorError),
}

impl StepError {
    fn classify(call: Option<SkillCall>, e: AgentError) -> Result<Proposal, StepError> {
        if e.is_answer_error() {
            Ok(Proposal::Invalid(call, Invalidity::Answer(e)))
        } else if matches!(e, AgentError::Backend(_)) {
            Err(StepError::Backend(e))
        } else {
            Err(StepError::Fatal(OrchestratorError::Prompt(e)))
        }
    }
}

/// Runs `case` with the builtin templates and the given config.
pub fn run_case(
    case: &TestCase,
    env: &mut dyn DeviceBackend,
    backend: &dyn LlmBackend,
    templates: &PromptTemplateSet,
    config: &SessionConfig,
) -> Result<CaseResult, OrchestratorError> {
    CaseRunner::new(templates.clone(), config.clone()).run(case, env, backend)
}

/// Single-agent variant of [`run_case`]: one combined call per action.
pub fn run_single_agent_case(
    case: &TestCase,
    env: &mut dyn DeviceBackend,
    backend: &dyn LlmBackend,
    templates: &PromptTemplateSet,
    config: &SessionConfig,
) -> Result<CaseResult, OrchestratorError> {
    let config = SessionConfig { mode: Mode::SingleAgent, ..config.clone() };
    run_case(case, env, backend, templates, &config)
}
