//! Run configuration: a TOML file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use dockref_core::build::{
    BuildEngine, DockerApi, DockerCli, MeasurementConfig, RecordingEngine, ReplayEngine,
};
use dockref_core::llm::{BackendConfig, EchoBackend, HttpChat, LlmClient, ReplayBackend};
use dockref_core::prompting::{PromptTemplate, DEFAULT_CONTEXT_WINDOW};
use dockref_core::refactoring::{Detector, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Http,
    Replay,
    Echo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    DockerApi,
    DockerCli,
    Replay,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Demonstration corpus (JSON Lines).
    #[arg(long, global = true, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    /// Number of demonstrations in the prompt.
    #[arg(long, global = true)]
    pub shots: Option<usize>,
    /// Completion backend (default http)
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Answer completions from this exchange file (selects the replay backend).
    #[arg(long, global = true, value_name = "FILE")]
    pub replay: Option<PathBuf>,
    /// Append every completion exchange to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub record: Option<PathBuf>,
    /// Fixed completion text for the echo backend.
    #[arg(long, global = true, value_name = "FILE")]
    pub echo_file: Option<PathBuf>,
    /// Directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Prompt template replacing the built-in one
    #[arg(long, global = true, value_name = "FILE")]
    pub template: Option<PathBuf>,
    /// Refactoring taxonomy (JSON) replacing the built-in one
    #[arg(long, global = true, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    /// Model context window used for the prompt budget
    #[arg(long, global = true, value_name = "TOKENS")]
    pub context_window: Option<usize>,
    /// Container engine client (default docker-api)
    #[arg(long, global = true, value_enum)]
    pub engine: Option<EngineKind>,
    /// Serve builds from this record file (selects the replay engine).
    #[arg(long, global = true, value_name = "FILE")]
    pub build_replay: Option<PathBuf>,
    /// Append every measured build to this record file.
    #[arg(long, global = true, value_name = "FILE")]
    pub build_record: Option<PathBuf>,
    /// Engine endpoint, e.g. unix:///var/run/docker.sock.
    #[arg(long, global = true)]
    pub engine_endpoint: Option<String>,
    /// No-cache builds per Dockerfile; duration is their mean
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Count base-image pulls in the first run's duration.
    #[arg(long, global = true)]
    pub include_pull_time: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct BackendSection {
    kind: Option<BackendKind>,
    replay: Option<PathBuf>,
    record: Option<PathBuf>,
    echo_file: Option<PathBuf>,
    #[serde(flatten)]
    settings: BackendConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct EngineSection {
    kind: Option<EngineKind>,
    replay: Option<PathBuf>,
    record: Option<PathBuf>,
    docker_binary: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    corpus: Option<PathBuf>,
    template: Option<PathBuf>,
    taxonomy: Option<PathBuf>,
    shots: Option<usize>,
    context_window: Option<usize>,
    output: Option<PathBuf>,
    backend: BackendSection,
    engine: EngineSection,
    measurement: MeasurementConfig,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_path: Option<PathBuf>,
    pub template_path: Option<PathBuf>,
    pub taxonomy_path: Option<PathBuf>,
    pub shots: usize,
    pub context_window: usize,
    pub output_dir: Option<PathBuf>,
    pub backend_kind: BackendKind,
    pub backend: BackendConfig,
    pub llm_replay: Option<PathBuf>,
    pub llm_record: Option<PathBuf>,
    pub echo_file: Option<PathBuf>,
    pub engine_kind: EngineKind,
    pub build_replay: Option<PathBuf>,
    pub build_record: Option<PathBuf>,
    pub docker_binary: PathBuf,
    pub measurement: MeasurementConfig,
}

/// Relative paths in a config file are taken relative to the file.
fn anchored(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { base.join(p) } else { p })
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                let mut cfg: FileConfig = toml::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new(".")).to_owned();
                cfg.corpus = anchored(&base, cfg.corpus);
                cfg.template = anchored(&base, cfg.template);
                cfg.taxonomy = anchored(&base, cfg.taxonomy);
                cfg.output = anchored(&base, cfg.output);
                cfg.backend.replay = anchored(&base, cfg.backend.replay);
                cfg.backend.record = anchored(&base, cfg.backend.record);
                cfg.backend.echo_file = anchored(&base, cfg.backend.echo_file);
                cfg.engine.replay = anchored(&base, cfg.engine.replay);
                cfg.engine.record = anchored(&base, cfg.engine.record);
                cfg.measurement.log_dir = anchored(&base, cfg.measurement.log_dir);
                cfg
            }
            None => FileConfig::default(),
        };

        let llm_replay = args.replay.clone().or(file.backend.replay);
        let echo_file = args.echo_file.clone().or(file.backend.echo_file);
        let backend_kind = args
            .backend
            .or(llm_replay.as_ref().map(|_| BackendKind::Replay))
            .or(file.backend.kind)
            .unwrap_or(BackendKind::Http);
        let build_replay = args.build_replay.clone().or(file.engine.replay);
        let engine_kind = args
            .engine
            .or(build_replay.as_ref().map(|_| EngineKind::Replay))
            .or(file.engine.kind)
            .unwrap_or(EngineKind::DockerApi);

        let mut measurement = file.measurement;
        if let Some(runs) = args.runs {
            measurement.runs = runs;
        }
        if let Some(ep) = &args.engine_endpoint {
            measurement.engine_endpoint = ep.clone();
        }
        measurement.include_pull_time |= args.include_pull_time;

        let cfg = RunConfig {
            corpus_path: args.corpus.clone().or(file.corpus),
            template_path: args.template.clone().or(file.template),
            taxonomy_path: args.taxonomy.clone().or(file.taxonomy),
            shots: args.shots.or(file.shots).unwrap_or(0),
            context_window: args
                .context_window
                .or(file.context_window)
                .unwrap_or(DEFAULT_CONTEXT_WINDOW),
            output_dir: args.output.clone().or(file.output),
            backend_kind,
            backend: file.backend.settings,
            llm_replay,
            llm_record: args.record.clone().or(file.backend.record),
            echo_file,
            engine_kind,
            build_replay,
            build_record: args.build_record.clone().or(file.engine.record),
            docker_binary: file
                .engine
                .docker_binary
                .unwrap_or_else(|| PathBuf::from("docker")),
            measurement,
        };
        cfg.backend.validate()?;
        Ok(cfg)
    }

    pub fn output_dir(&self) -> Result<&Path> {
        let dir = self
            .output_dir
            .as_deref()
            .context("--output is required for this command")?;
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(dir)
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        match &self.taxonomy_path {
            Some(p) => {
                Taxonomy::load(p).with_context(|| format!("invalid taxonomy {}", p.display()))
            }
            None => Ok(Taxonomy::default()),
        }
    }

    pub fn detector(&self) -> Result<Detector> {
        Ok(Detector::new(&self.taxonomy()?))
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        let taxonomy = self.taxonomy()?;
        match &self.template_path {
            Some(p) => PromptTemplate::load(p, &taxonomy.action_catalog())
                .with_context(|| format!("invalid template {}", p.display())),
            None => Ok(PromptTemplate::with_taxonomy(&taxonomy)),
        }
    }

    pub fn llm_client(&self) -> Result<LlmClient> {
        let backend: Box<dyn dockref_core::llm::Backend> = match self.backend_kind {
            BackendKind::Http => Box::new(HttpChat::new(&self.backend)?),
            BackendKind::Replay => {
                let path = self
                    .llm_replay
                    .as_deref()
                    .context("the replay backend needs --replay FILE")?;
                Box::new(ReplayBackend::load(path)?)
            }
            BackendKind::Echo => {
                let path = self
                    .echo_file
                    .as_deref()
                    .context("the echo backend needs --echo-file FILE")?;
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                Box::new(EchoBackend::new(text))
            }
        };
        let client = LlmClient::new(backend, &self.backend)?;
        Ok(match &self.llm_record {
            Some(path) => client.record_to(path),
            None => client,
        })
    }

    pub fn engine(&self) -> Result<Box<dyn BuildEngine>> {
        let record = self.build_record.as_deref();
        Ok(match (self.engine_kind, record) {
            (EngineKind::Replay, _) => {
                if record.is_some() {
                    bail!("--build-record cannot be combined with the replay engine");
                }
                let path = self
                    .build_replay
                    .as_deref()
                    .context("the replay engine needs --build-replay FILE")?;
                Box::new(
                    ReplayEngine::load(path)
                        .with_context(|| format!("cannot load build records {}", path.display()))?,
                )
            }
            (EngineKind::DockerApi, None) => {
                Box::new(DockerApi::new(&self.measurement.engine_endpoint)?)
            }
            (EngineKind::DockerApi, Some(r)) => Box::new(RecordingEngine::new(
                DockerApi::new(&self.measurement.engine_endpoint)?,
                r,
            )),
            (EngineKind::DockerCli, None) => Box::new(DockerCli::new(&self.docker_binary)),
            (EngineKind::DockerCli, Some(r)) => {
                Box::new(RecordingEngine::new(DockerCli::new(&self.docker_binary), r))
            }
        })
    }
}
