use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{HttpBackend, PromptTemplateSet, RecordingBackend, ScriptedBackend};
use crate::case::load_test_case;
use crate::environment::{Scenario, Simulator};
use crate::orchestrator::{persistent_script, render_script, CaseResult, CaseRunner, Mode, ScriptEntry, SessionConfig};
use crate::rewriting::{rewrite_case, RuleSet};

use super::metrics::{complete_at_1, pass_at_1, passed_step_count, MetricsError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad suite config: {0}")]
    Config(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Replay each case's transcript file.
    Transcript,
    /// Live chat-completion endpoint from the environment.
    Http { model: String },
    /// Live endpoint, writing each case's exchanges to its transcript path.
    Record { model: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteCase {
    pub case: PathBuf,
    pub scenario: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    /// Simulator page expected after each step, for cross-checking the
    /// inspection agent.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected_pages: Vec<String>,
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub cases: Vec<SuiteCase>,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
    /// Rewrite rules file; the builtin rules when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    /// Template directory; the builtin templates when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_backend() -> BackendConfig {
    BackendConfig::Transcript
}

impl SuiteConfig {
    /// Parses a config; relative paths are resolved against `base`.
    pub fn from_json(json: &str, base: &Path) -> Result<Self, SuiteError> {
        let mut cfg: SuiteConfig = serde_json::from_str(json).map_err(|e| SuiteError::Config(e.to_string()))?;
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for c in &mut cfg.cases {
            abs(&mut c.case);
            abs(&mut c.scenario);
            if let Some(t) = &mut c.transcript {
                abs(t);
            }
        }
        for p in [&mut cfg.rules, &mut cfg.templates, &mut cfg.out].into_iter().flatten() {
            abs(p);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SuiteError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Hash over everything that can change results: the config minus
    /// parallelism and output location, plus every referenced file.
    pub fn fingerprint(&self) -> Result<String, SuiteError> {
        let mut hasher = Sha256::new();
        let mut canonical = self.clone();
        canonical.parallelism = 1;
        canonical.out = None;
        let mut files: Vec<&PathBuf> = Vec::new();
        for c in &self.cases {
            files.extend([&c.case, &c.scenario]);
            files.extend(c.transcript.iter());
        }
        files.extend(self.rules.iter());
        let mut template_files = Vec::new();
        if let Some(dir) = &self.templates {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(io_err(dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            template_files = entries;
        }
        files.extend(template_files.iter());
        // File names and contents count, not where the suite lives.
        for c in &mut canonical.cases {
            strip_dirs(&mut c.case);
            strip_dirs(&mut c.scenario);
            if let Some(t) = &mut c.transcript {
                strip_dirs(t);
            }
        }
        for p in [&mut canonical.rules, &mut canonical.templates].into_iter().flatten() {
            strip_dirs(p);
        }
        hasher.update(serde_json::to_vec(&canonical).expect("config serializes"));
        for f in files {
            if f.exists() {
                hasher.update(std::fs::read(f).map_err(io_err(f))?);
            }
        }
        Ok(hex::encode(hasher.finalize()))
    }
}

fn strip_dirs(p: &mut PathBuf) {
    if let Some(name) = p.file_name() {
        *p = PathBuf::from(name);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageCheck {
    pub step: usize,
    pub expected: String,
    pub actual: Option<String>,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub result: CaseResult,
    pub script: Vec<ScriptEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub page_checks: Vec<PageCheck>,
    /// Steps the inspector accepted although the page did not match.
    pub inspector_false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub config_fingerprint: String,
    pub mode: Mode,
    pub case_count: usize,
    pub passed_cases: usize,
    pub passed_steps: usize,
    pub total_steps: usize,
    pub pass_at_1: f64,
    pub complete_at_1: f64,
    pub inspector_false_positives: usize,
    pub cases: Vec<CaseReport>,
    /// Not part of determinism comparisons.
    pub wall_time_ms: u64,
}

impl SuiteReport {
    /// The report with timing zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> SuiteReport {
        SuiteReport { wall_time_ms: 0, ..self.clone() }
    }

    pub fn results(&self) -> Vec<CaseResult> {
        self.cases.iter().map(|c| c.result.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "Suite: {} cases, mode {}\nPass@1: {:.2}% ({}/{})\nComplete@1: {:.2}% ({}/{})\nInspector false positives: {}\n",
            self.case_count,
            match self.mode {
                Mode::MultiAgent => "multi-agent",
                Mode::SingleAgent => "single-agent",
            },
            self.pass_at_1 * 100.0,
            self.passed_cases,
            self.case_count,
            self.complete_at_1 * 100.0,
            self.passed_steps,
            self.total_steps,
            self.inspector_false_positives,
        );
        for c in &self.cases {
            let r = &c.result;
            let status = if r.passed {
                "passed".to_string()
            } else if let Some(e) = &r.error {
                format!("error: {e}")
            } else {
                let reason = r
                    .abort_reason()
                    .map(|a| serde_json::to_value(a).expect("reason serializes").as_str().unwrap_or("").to_string())
                    .unwrap_or_else(|| "GOAL_NOT_REACHED".into());
                format!("failed at step {} ({reason})", r.first_failed_step.unwrap_or(0))
            };
            out.push_str(&format!(
                "  {}: {status}, {}/{} steps, {} actions\n",
                r.case_id,
                passed_step_count(r),
                r.step_count,
                c.script.len()
            ));
        }
        out.push_str(&format!("Wall time: {} ms\n", self.wall_time_ms));
        out
    }

    /// Writes `report.json`, `report.txt` and one script per case.
    pub fn write(&self, dir: &Path) -> Result<(), SuiteError> {
        let scripts = dir.join("scripts");
        std::fs::create_dir_all(&scripts).map_err(io_err(&scripts))?;
        let write = |path: PathBuf, text: String| std::fs::write(&path, text).map_err(|e| io_err(&path)(e));
        write(dir.join("report.json"), self.to_json())?;
        write(dir.join("report.txt"), self.to_text())?;
        for c in &self.cases {
            write(scripts.join(format!("{}.json", c.result.case_id)), render_script(&c.script))?;
        }
        Ok(())
    }
}

/// Aligns step results with the expected pages of the case.
pub fn cross_check_pages(result: &CaseResult, expected: &[String]) -> (Vec<PageCheck>, usize) {
    let mut checks = Vec::new();
    let mut false_positives = 0;
    for t in &result.step_traces {
        let Some(exp) = expected.get(t.step_index - 1) else { continue };
        let matches = t.page_after.as_deref() == Some(exp.as_str());
        if t.goal_accomplished && !matches {
            false_positives += 1;
        }
        checks.push(PageCheck { step: t.step_index, expected: exp.clone(), actual: t.page_after.clone(), matches });
    }
    (checks, false_positives)
}

enum SharedBackend {
    PerCase,
    Live(Arc<HttpBackend>),
}

fn run_one(entry: &SuiteCase, rules: &RuleSet, runner: &CaseRunner, backend: &SharedBackend, record: bool) -> CaseResult {
    let stem = entry.case.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let case = match load_test_case(&entry.case) {
        Ok(c) => c,
        Err(e) => return CaseResult::failed(stem, 0, e.to_string()),
    };
    let fail = |e: String| CaseResult::failed(&case.case_id, case.len(), e);
    let case = match rewrite_case(&case, rules) {
        Ok(c) => c,
        Err(e) => return fail(format!("RULE_TEMPLATE_ERROR: {e}")),
    };
    let mut env = match Scenario::load(&entry.scenario).and_then(|s| Simulator::new(s, &case.parameters)) {
        Ok(sim) => sim,
        Err(e) => return fail(e.to_string()),
    };
    let outcome = match backend {
        SharedBackend::PerCase => {
            let Some(path) = &entry.transcript else {
                return fail("no transcript configured for this case".into());
            };
            match ScriptedBackend::load(path) {
                Ok(b) => runner.run(&case, &mut env, &b),
                Err(e) => return fail(e.to_string()),
            }
        }
        SharedBackend::Live(http) if record => {
            let rec = RecordingBackend::new(http.as_ref());
            let out = runner.run(&case, &mut env, &rec);
            if let Some(path) = &entry.transcript {
                if let Err(e) = rec.save(path) {
                    log::warn!("cannot save transcript {}: {e}", path.display());
                }
            }
            out
        }
        SharedBackend::Live(http) => runner.run(&case, &mut env, http.as_ref()),
    };
    outcome.unwrap_or_else(|e| fail(format!("{}: {e}", e.code())))
}

/// Runs every case of the suite and scores it. Per-case failures become
/// failed cases; only config problems are errors.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let started = Instant::now();
    if config.cases.is_empty() {
        return Err(SuiteError::Metrics(MetricsError::EmptyResults));
    }
    if config.parallelism == 0 {
        return Err(SuiteError::Config("parallelism must be at least 1".into()));
    }
    config.session.validate().map_err(|e| SuiteError::Config(e.to_string()))?;
    let rules = match &config.rules {
        Some(p) => RuleSet::load(p).map_err(|e| SuiteError::Config(e.to_string()))?,
        None => RuleSet::builtin(),
    };
    let templates = match &config.templates {
        Some(p) => PromptTemplateSet::load_dir(p).map_err(|e| SuiteError::Config(e.to_string()))?,
        None => PromptTemplateSet::builtin(),
    };
    let (backend, record) = match &config.backend {
        BackendConfig::Transcript => (SharedBackend::PerCase, false),
        BackendConfig::Http { model } | BackendConfig::Record { model } => {
            let http = HttpBackend::from_env(model).map_err(|e| SuiteError::Config(e.to_string()))?;
            (SharedBackend::Live(Arc::new(http)), matches!(config.backend, BackendConfig::Record { .. }))
        }
    };
    let runner = CaseRunner::new(templates, config.session.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| SuiteError::Config(e.to_string()))?;
    let results: Vec<CaseResult> =
        pool.install(|| config.cases.par_iter().map(|c| run_one(c, &rules, &runner, &backend, record)).collect());

    let cases: Vec<CaseReport> = results
        .iter()
        .zip(&config.cases)
        .map(|(r, entry)| {
            let (page_checks, fp) = cross_check_pages(r, &entry.expected_pages);
            CaseReport { result: r.clone(), script: persistent_script(r), page_checks, inspector_false_positives: fp }
        })
        .collect();
    let report = SuiteReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_fingerprint: config.fingerprint()?,
        mode: config.session.mode,
        case_count: results.len(),
        passed_cases: results.iter().filter(|r| r.passed).count(),
        passed_steps: results.iter().map(passed_step_count).sum(),
        total_steps: results.iter().map(|r| r.step_count).sum(),
        pass_at_1: pass_at_1(&results)?,
        complete_at_1: complete_at_1(&results)?,
        inspector_false_positives: cases.iter().map(|c| c.inspector_false_positives).sum(),
        cases,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    if let Some(out) = &config.out {
        report.write(out)?;
    }
    Ok(report)
}
