use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use uat_copilot_core::agents::{HttpBackend, LlmBackend, PromptTemplateSet, RecordingBackend, ScriptedBackend};
use uat_copilot_core::case::load_test_case;
use uat_copilot_core::environment::{AdbBackend, SystemRunner};
use uat_copilot_core::harness::{run_suite, BackendConfig, SuiteCase, SuiteConfig, SuiteReport};
use uat_copilot_core::orchestrator::{persistent_script, render_script, CaseRunner, Mode, OrchestratorError, SessionConfig};
use uat_copilot_core::perception::{LinkDetectionConfig, Perceiver, RgbImage};
use uat_copilot_core::rewriting::{rewrite_case, RuleSet};

const EXIT_CONFIG: u8 = 2;
const EXIT_DEVICE: u8 = 3;

#[derive(Parser)]
#[command(name = "uat-copilot", version, about = "Drive UAT test cases through LLM agents against a GUI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Http,
    Transcript,
    Record,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Multi,
    Single,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one test case against the simulator or a device.
    Run {
        #[arg(long)]
        case: PathBuf,
        /// Simulator scenario; omit together with --adb to drive a real device.
        #[arg(long, required_unless_present = "adb", conflicts_with = "adb")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "transcript")]
        backend: BackendKind,
        /// Transcript to replay, or to write when recording.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Model name sent to the chat-completion endpoint.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum, default_value = "multi")]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Drive a device through adb instead of the simulator.
        #[arg(long)]
        adb: bool,
        #[arg(long, requires = "adb")]
        serial: Option<String>,
        /// Activity restarted before the case, e.g. com.example/.Main
        #[arg(long, requires = "adb")]
        launch: Option<String>,
    },
    /// Run a suite config and print the report.
    Suite {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the rewritten steps of a case.
    Rewrite {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Print the agent-visible state of a view hierarchy dump.
    Perceive {
        #[arg(long)]
        xml: PathBuf,
        #[arg(long)]
        image: Option<PathBuf>,
    },
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_CONFIG, error: error.into() }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}

/// The error chain on one line. Library errors already embed their source,
/// so causes that are already part of the message are skipped.
fn describe(error: &anyhow::Error) -> String {
    let mut msg = error.to_string();
    for cause in error.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { case, scenario, rules, templates, backend, transcript, model, mode, out, adb: _, serial, launch } => {
            let session = SessionConfig {
                mode: match mode {
                    ModeArg::Multi => Mode::MultiAgent,
                    ModeArg::Single => Mode::SingleAgent,
                },
                ..SessionConfig::default()
            };
            let backend = backend_config(backend, model)?;
            if backend == BackendConfig::Transcript && transcript.is_none() {
                return Err(config_err(anyhow!("--backend transcript needs --transcript")));
            }
            match scenario {
                Some(scenario) => {
                    let config = SuiteConfig {
                        cases: vec![SuiteCase { case, scenario, transcript, expected_pages: Vec::new() }],
                        backend,
                        rules,
                        templates,
                        session,
                        parallelism: 1,
                        out,
                    };
                    run_and_print(&config)
                }
                None => {
                    let device = AdbBackend::new(SystemRunner { serial }, launch);
                    run_on_device(device, &case, rules.as_deref(), templates.as_deref(), backend, transcript, session, out)
                }
            }
        }
        Command::Suite { config } => {
            let config = SuiteConfig::load(&config).map_err(config_err)?;
            run_and_print(&config)
        }
        Command::Rewrite { case, rules } => {
            let case = load_test_case(&case).map_err(config_err)?;
            let rules = load_rules(rules.as_deref())?;
            let case = rewrite_case(&case, &rules).map_err(config_err)?;
            for step in &case.steps {
                println!("{}. {}", step.index, step.agent_text());
            }
            Ok(())
        }
        Command::Perceive { xml, image } => {
            let text = std::fs::read_to_string(&xml)
                .with_context(|| format!("cannot read {}", xml.display()))
                .map_err(config_err)?;
            let (perceiver, screenshot) = match image {
                Some(path) => {
                    let bytes = std::fs::read(&path)
                        .with_context(|| format!("cannot read {}", path.display()))
                        .map_err(config_err)?;
                    let img = RgbImage::decode_png(&bytes).map_err(|e| config_err(anyhow!("{}: {e}", path.display())))?;
                    (Perceiver::with_link_refinement(LinkDetectionConfig::default()), Some(img))
                }
                None => (Perceiver::text_only(), None),
            };
            let state = perceiver.perceive(&text, screenshot.as_ref()).map_err(config_err)?;
            println!("{}", state.serialized());
            Ok(())
        }
    }
}

fn backend_config(kind: BackendKind, model: Option<String>) -> Result<BackendConfig, Failure> {
    let model = || model.clone().ok_or_else(|| config_err(anyhow!("--model is required for live backends")));
    Ok(match kind {
        BackendKind::Transcript => BackendConfig::Transcript,
        BackendKind::Http => BackendConfig::Http { model: model()? },
        BackendKind::Record => BackendConfig::Record { model: model()? },
    })
}

fn load_rules(path: Option<&Path>) -> Result<RuleSet, Failure> {
    match path {
        Some(p) => RuleSet::load(p).map_err(config_err),
        None => Ok(RuleSet::builtin()),
    }
}

fn run_and_print(config: &SuiteConfig) -> Result<(), Failure> {
    // every suite-level error is a configuration problem; device trouble stays per case
    let report: SuiteReport = run_suite(config).map_err(config_err)?;
    print!("{}", report.to_text());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_on_device(
    mut device: AdbBackend<SystemRunner>,
    case: &Path,
    rules: Option<&Path>,
    templates: Option<&Path>,
    backend: BackendConfig,
    transcript: Option<PathBuf>,
    session: SessionConfig,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let case = load_test_case(case).map_err(config_err)?;
    let case = rewrite_case(&case, &load_rules(rules)?).map_err(config_err)?;
    let templates = match templates {
        Some(dir) => PromptTemplateSet::load_dir(dir).map_err(config_err)?,
        None => PromptTemplateSet::builtin(),
    };
    let runner = CaseRunner::new(templates, session);
    let outcome = match &backend {
        BackendConfig::Transcript => {
            let path = transcript.as_ref().expect("checked by caller");
            let scripted = ScriptedBackend::load(path).map_err(config_err)?;
            runner.run(&case, &mut device, &scripted)
        }
        BackendConfig::Http { model } => {
            let http = HttpBackend::from_env(model).map_err(config_err)?;
            runner.run(&case, &mut device, &http as &dyn LlmBackend)
        }
        BackendConfig::Record { model } => {
            let path = transcript.as_ref().ok_or_else(|| config_err(anyhow!("--backend record needs --transcript")))?;
            let rec = RecordingBackend::new(HttpBackend::from_env(model).map_err(config_err)?);
            let outcome = runner.run(&case, &mut device, &rec);
            rec.save(path).with_context(|| format!("cannot save {}", path.display())).map_err(config_err)?;
            outcome
        }
    };
    let result = outcome.map_err(|e| match e {
        OrchestratorError::Device(_) | OrchestratorError::Perception(_) => Failure { code: EXIT_DEVICE, error: e.into() },
        _ => config_err(e),
    })?;
    let script = render_script(&persistent_script(&result));
    if let Some(dir) = out {
        let write = |name: &str, body: &str| {
            std::fs::create_dir_all(&dir)
                .and_then(|_| std::fs::write(dir.join(name), body))
                .with_context(|| format!("cannot write {}", dir.join(name).display()))
                .map_err(config_err)
        };
        let json = serde_json::to_string_pretty(&result).map_err(config_err)? + "\n";
        write("result.json", &json)?;
        write("script.json", &script)?;
    }
    println!(
        "{}: {} ({}/{} steps)",
        result.case_id,
        if result.passed { "passed" } else { "failed" },
        result.passed_steps(),
        result.step_count
    );
    Ok(())
}
