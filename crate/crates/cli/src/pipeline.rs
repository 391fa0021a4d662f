//! Pipeline stages. Each stage reads the artifacts of the previous one from
//! the output directory, so any stage can be rerun on its own.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use actorcause_core::behavior::{read_transitions_csv, write_transitions_csv};
use actorcause_core::causal_graph::export_json;
use actorcause_core::event_log::{
    parse_csv, parse_xes, validate_and_sort, write_csv, ColumnMapping, CsvOptions, LogSummary,
};
use actorcause_core::granger::{asymmetry_ratio, results_table, test_all_pairs, write_results_csv, GrangerTable, SkippedTest};
use actorcause_core::lag_selector::{lag_frequency, LagSelection};
use actorcause_core::stationarity::ensure_stationary;
use actorcause_core::timeseries::{
    align, behavior_series, outcome_series, read_panel, throughput_series, write_panel_csv, write_panel_sidecar,
};
use actorcause_core::{
    build_graph, classify_log, export_dot, generate_log, ActorIndex, BehaviorType, ErrorKind, EventLog, GrangerResult,
    Panel, Role, StationarityReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{hex_digest, InputFormat, PipelineConfig};

pub const SYNTH_LOG: &str = "synth_log.csv";
pub const EVENTS: &str = "events.csv";
pub const LOG_SUMMARY: &str = "log_summary.json";
pub const TRANSITIONS: &str = "transitions.csv";
pub const CLASSIFICATION: &str = "classification.json";
pub const PANEL: &str = "panel.csv";
pub const MASKS: &str = "masks.json";
pub const STATIONARITY: &str = "stationarity.json";
pub const PANEL_STATIONARY: &str = "panel_stationary.csv";
pub const MASKS_STATIONARY: &str = "panel_stationary.json";
pub const LAG_FREQUENCY: &str = "lag_frequency.csv";
pub const LAG_SELECTION: &str = "lag_selection.json";
pub const GRANGER_CSV: &str = "granger_results.csv";
pub const GRANGER_JSON: &str = "granger_results.json";
pub const GRAPH_DOT: &str = "graph.dot";
pub const GRAPH_JSON: &str = "graph.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Synth,
    Ingest,
    Classify,
    Series,
    Adf,
    SelectLags,
    Granger,
    Graph,
    Manifest,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::Series => "series",
            Stage::Adf => "adf",
            Stage::SelectLags => "select-lags",
            Stage::Granger => "granger",
            Stage::Graph => "graph",
            Stage::Manifest => "manifest",
        }
    }

    /// The subcommand that produces this stage's inputs.
    fn previous(self) -> Option<Stage> {
        match self {
            Stage::Classify => Some(Stage::Ingest),
            Stage::Series => Some(Stage::Classify),
            Stage::Adf => Some(Stage::Series),
            Stage::SelectLags => Some(Stage::Adf),
            Stage::Granger => Some(Stage::SelectLags),
            Stage::Graph => Some(Stage::Granger),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
    pub hint: String,
}

impl StageError {
    pub fn new(stage: Stage, kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            message: message.into(),
            hint: default_hint(stage, kind).to_string(),
        }
    }

    fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = hint.into();
        self
    }

    fn core(stage: Stage, e: impl Into<actorcause_core::Error>) -> Self {
        let e = e.into();
        Self::new(stage, e.kind(), e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.kind)
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}\n  hint: {}", self.stage, self.message, self.hint)
    }
}

impl std::error::Error for StageError {}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Parse => 3,
        ErrorKind::InsufficientData => 4,
        ErrorKind::Numeric => 5,
    }
}

fn default_hint(stage: Stage, kind: ErrorKind) -> &'static str {
    match (stage, kind) {
        (Stage::Ingest, ErrorKind::Parse) => {
            "check input.format, input.columns, input.delimiter and input.timestamp_format"
        }
        (Stage::Ingest, ErrorKind::InsufficientData) => "the input log has no events",
        (_, ErrorKind::Parse) => "an artifact is damaged; rerun the stage that wrote it",
        (Stage::Series, ErrorKind::Config) => "an outcome rule names a case attribute the log lacks; add it to input.columns.attributes",
        (Stage::Series, ErrorKind::InsufficientData) => {
            "use a longer log, loosen series.completion, or drop KPIs observed on too few days"
        }
        (Stage::Adf, ErrorKind::InsufficientData) => "the panel is too short for the ADF test; use a longer log",
        (Stage::SelectLags, ErrorKind::InsufficientData) => {
            "lower lasso.max_lag, use a longer log, or lower lasso.lambda_group_grid"
        }
        (Stage::Granger, ErrorKind::InsufficientData) => "the selected lags need a longer panel; lower lasso.max_lag",
        (_, ErrorKind::Numeric) => "inspect stationarity.json for constant or degenerate columns",
        (_, ErrorKind::InsufficientData) => "use a longer or denser log",
        (_, ErrorKind::Config) => "check the config file",
    }
}

/// One written file in the run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub stage: Stage,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub cli_version: String,
    pub core_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub alpha: f64,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub transitions: usize,
    pub skipped_missing_actor: usize,
    pub counts: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrangerReport {
    pub alpha: f64,
    pub lags: Vec<usize>,
    pub results: Vec<GrangerResult>,
    pub skipped: Vec<SkippedTest>,
    /// Absent when no forward test is significant.
    pub asymmetry_ratio: Option<f64>,
    pub table: GrangerTable,
}

pub struct Pipeline {
    config: PipelineConfig,
    config_sha256: String,
    out: PathBuf,
}

type StageResult<T> = Result<T, StageError>;

impl Pipeline {
    pub fn new(config: PipelineConfig, config_sha256: impl Into<String>) -> Self {
        let out = config.output_dir.clone();
        Self {
            config,
            config_sha256: config_sha256.into(),
            out,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, artifact: &str) -> PathBuf {
        self.out.join(artifact)
    }

    fn ensure_out(&self, stage: Stage) -> StageResult<()> {
        fs::create_dir_all(&self.out).map_err(|e| {
            StageError::new(stage, ErrorKind::Config, format!("cannot create '{}': {e}", self.out.display()))
                .with_hint("choose a writable output_dir")
        })
    }

    fn open(&self, stage: Stage, artifact: &str) -> StageResult<BufReader<File>> {
        let path = self.path(artifact);
        File::open(&path).map(BufReader::new).map_err(|e| {
            let err = StageError::new(stage, ErrorKind::Config, format!("cannot read '{}': {e}", path.display()));
            match stage.previous() {
                Some(p) => err.with_hint(format!("run `actorcause {p}` (or `run`) first")),
                None => err,
            }
        })
    }

    fn write(&self, stage: Stage, artifact: &str, body: impl FnOnce(&mut dyn Write) -> Result<(), String>) -> StageResult<()> {
        self.ensure_out(stage)?;
        let path = self.path(artifact);
        let io_err = |e: std::io::Error| {
            StageError::new(stage, ErrorKind::Config, format!("cannot write '{}': {e}", path.display()))
                .with_hint("choose a writable output_dir")
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).map_err(|m| StageError::new(stage, ErrorKind::Numeric, format!("writing {artifact}: {m}")))?;
        w.flush().map_err(io_err)?;
        log::debug!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<S: Serialize>(&self, stage: Stage, artifact: &str, value: &S) -> StageResult<()> {
        self.write(stage, artifact, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| e.to_string())?;
            w.write_all(b"\n").map_err(|e| e.to_string())
        })
    }

    fn read_json<D: serde::de::DeserializeOwned>(&self, stage: Stage, artifact: &str) -> StageResult<D> {
        serde_json::from_reader(self.open(stage, artifact)?)
            .map_err(|e| StageError::new(stage, ErrorKind::Parse, format!("{artifact}: {e}")))
    }

    /// Writes the synthetic log described by `[synth]` to `synth_log.csv`.
    pub fn synth(&self) -> StageResult<PathBuf> {
        let stage = Stage::Synth;
        let cfg = self
            .config
            .synth_config()
            .ok_or_else(|| StageError::new(stage, ErrorKind::Config, "config has no [synth] section"))?;
        let log = generate_log(&cfg).map_err(|e| StageError::core(stage, e))?;
        log::info!("synth: {} events, {} cases", log.len(), cfg.n_cases);
        self.write(stage, SYNTH_LOG, |w| write_csv(&log, w).map_err(|e| e.to_string()))?;
        Ok(self.path(SYNTH_LOG))
    }

    /// Parses the input log and writes it in canonical order to `events.csv`.
    pub fn ingest(&self) -> StageResult<LogSummary> {
        let stage = Stage::Ingest;
        let parsed = match &self.config.input {
            Some(input) => {
                let file = File::open(&input.path).map_err(|e| {
                    StageError::new(stage, ErrorKind::Config, format!("cannot read '{}': {e}", input.path.display()))
                        .with_hint("check input.path")
                })?;
                let reader = BufReader::new(file);
                match input.resolved_format() {
                    InputFormat::Csv => parse_csv(reader, &input.csv_options()),
                    InputFormat::Xes => parse_xes(reader),
                }
            }
            None => return self.ingest_canonical(stage, SYNTH_LOG).and_then(|log| self.finish_ingest(stage, log)),
        }
        .map_err(|e| StageError::core(stage, e))?;
        self.finish_ingest(stage, parsed)
    }

    fn finish_ingest(&self, stage: Stage, parsed: EventLog) -> StageResult<LogSummary> {
        let (log, summary) = validate_and_sort(parsed);
        log::info!(
            "ingest: {} events, {} cases, {} actors ({} events without actor)",
            summary.events,
            summary.cases,
            summary.actors,
            summary.missing_actor
        );
        self.write(stage, EVENTS, |w| write_csv(&log, w).map_err(|e| e.to_string()))?;
        self.write_json(stage, LOG_SUMMARY, &summary)?;
        Ok(summary)
    }

    /// Reads a file in the canonical CSV layout; extra columns are case
    /// attributes.
    fn ingest_canonical(&self, stage: Stage, artifact: &str) -> StageResult<EventLog> {
        let path = self.path(artifact);
        let header = csv_header(&path).map_err(|m| {
            let err = StageError::new(stage, ErrorKind::Config, format!("cannot read '{}': {m}", path.display()));
            match stage.previous() {
                Some(p) => err.with_hint(format!("run `actorcause {p}` (or `run`) first")),
                None => err.with_hint("run `actorcause synth` first"),
            }
        })?;
        let options = CsvOptions {
            mapping: ColumnMapping {
                attributes: header.into_iter().skip(4).collect(),
                ..ColumnMapping::default()
            },
            ..CsvOptions::default()
        };
        let log = parse_csv(self.open(stage, artifact)?, &options).map_err(|e| StageError::core(stage, e))?;
        Ok(validate_and_sort(log).0)
    }

    fn read_events(&self, stage: Stage) -> StageResult<EventLog> {
        self.ingest_canonical(stage, EVENTS)
    }

    /// Classifies every consecutive same-case pair into `transitions.csv`.
    pub fn classify(&self) -> StageResult<ClassificationSummary> {
        let stage = Stage::Classify;
        let log = self.read_events(stage)?;
        let c = classify_log(&log, &ActorIndex::build(&log));
        let summary = ClassificationSummary {
            transitions: c.transitions.len(),
            skipped_missing_actor: c.skipped,
            counts: BehaviorType::ALL.iter().map(|&b| (b.code().to_string(), c.count(b))).collect(),
        };
        log::info!("classify: {} transitions, {} skipped", summary.transitions, summary.skipped_missing_actor);
        self.write(stage, TRANSITIONS, |w| write_transitions_csv(&c.transitions, w).map_err(|e| e.to_string()))?;
        self.write_json(stage, CLASSIFICATION, &summary)?;
        Ok(summary)
    }

    /// Builds behavior and KPI series and aligns them into `panel.csv`.
    pub fn series(&self) -> StageResult<Panel> {
        let stage = Stage::Series;
        let log = self.read_events(stage)?;
        let transitions = read_transitions_csv(self.open(stage, TRANSITIONS)?).map_err(|e| StageError::core(stage, e))?;
        if transitions.is_empty() {
            return Err(StageError::new(stage, ErrorKind::InsufficientData, "no classified transitions"));
        }
        let sc = &self.config.series;
        let mut columns = Vec::new();
        for &g in &sc.granularity {
            columns.extend(behavior_series::<f64>(&transitions, g, sc.top_k).into_iter().map(|s| (s, Role::Behavior)));
        }
        for k in &self.config.kpi {
            let s = match &k.rule {
                Some(rule) => outcome_series(&log, &k.name, rule, &sc.completion),
                None => throughput_series(&log, &sc.completion).map(|mut s| {
                    s.name = k.name.clone();
                    s
                }),
            }
            .map_err(|e| StageError::core(stage, e))?;
            columns.push((s, Role::Kpi));
        }
        let panel = align(columns).map_err(|e| StageError::core(stage, e))?;
        log::info!("series: {} columns over {} days from {}", panel.columns().len(), panel.len(), panel.start_day());
        self.write(stage, PANEL, |w| write_panel_csv(&panel, w).map_err(|e| e.to_string()))?;
        self.write(stage, MASKS, |w| write_panel_sidecar(&panel, w).map_err(|e| e.to_string()))?;
        Ok(panel)
    }

    fn read_panel(&self, stage: Stage, csv: &str, sidecar: &str) -> StageResult<Panel> {
        read_panel(self.open(stage, csv)?, self.open(stage, sidecar)?).map_err(|e| StageError::core(stage, e))
    }

    /// Tests every column for a unit root and differences the failures.
    pub fn adf(&self) -> StageResult<StationarityReport> {
        let stage = Stage::Adf;
        let panel = self.read_panel(stage, PANEL, MASKS)?;
        let (stationary, report) =
            ensure_stationary(&panel, self.config.alpha, self.config.adf.max_lag).map_err(|e| StageError::core(stage, e))?;
        for w in report.warnings() {
            log::warn!("adf: {w}");
        }
        log::info!("adf: differenced {:?}", report.differenced());
        self.write_json(stage, STATIONARITY, &report)?;
        self.write(stage, PANEL_STATIONARY, |w| write_panel_csv(&stationary, w).map_err(|e| e.to_string()))?;
        self.write(stage, MASKS_STATIONARY, |w| write_panel_sidecar(&stationary, w).map_err(|e| e.to_string()))?;
        Ok(report)
    }

    /// Runs the sparse-group-lasso grid and keeps the most frequent lags.
    pub fn select_lags(&self) -> StageResult<LagSelection> {
        let stage = Stage::SelectLags;
        let panel = self.read_panel(stage, PANEL_STATIONARY, MASKS_STATIONARY)?;
        let targets = panel.kpi_names();
        let selection = lag_frequency(&panel, &targets, &self.config.lasso).map_err(|e| StageError::core(stage, e))?;
        log::info!("select-lags: selected {:?}", selection.selected);
        self.write(stage, LAG_FREQUENCY, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["lag", "frequency", "selected"]).map_err(|e| e.to_string())?;
            for (lag, freq) in &selection.frequency {
                let chosen = selection.selected.contains(lag);
                csv.write_record([lag.to_string(), freq.to_string(), chosen.to_string()])
                    .map_err(|e| e.to_string())?;
            }
            csv.flush().map_err(|e| e.to_string())
        })?;
        self.write_json(stage, LAG_SELECTION, &selection)?;
        Ok(selection)
    }

    /// Tests every behavior → KPI pair at the selected lags.
    pub fn granger(&self) -> StageResult<GrangerReport> {
        let stage = Stage::Granger;
        let panel = self.read_panel(stage, PANEL_STATIONARY, MASKS_STATIONARY)?;
        let selection: LagSelection = self.read_json(stage, LAG_SELECTION)?;
        let alpha = self.config.alpha;
        let pairs = test_all_pairs(&panel, &selection.selected, alpha).map_err(|e| StageError::core(stage, e))?;
        for s in &pairs.skipped {
            log::warn!("granger: skipped {} -> {} at lag {}: {}", s.source, s.target, s.lag_order, s.reason);
        }
        if pairs.results.is_empty() {
            return Err(StageError::new(stage, ErrorKind::InsufficientData, "every Granger test was skipped"));
        }
        let report = GrangerReport {
            alpha,
            lags: selection.selected.clone(),
            asymmetry_ratio: asymmetry_ratio(&pairs.results).ok(),
            table: results_table(&pairs.results),
            results: pairs.results,
            skipped: pairs.skipped,
        };
        log::info!(
            "granger: {} tests, {} significant",
            report.results.len(),
            report.results.iter().filter(|r| r.significant).count()
        );
        self.write(stage, GRANGER_CSV, |w| write_results_csv(&report.results, w).map_err(|e| e.to_string()))?;
        self.write_json(stage, GRANGER_JSON, &report)?;
        Ok(report)
    }

    /// Builds the causal graph from the significant results.
    pub fn graph(&self) -> StageResult<actorcause_core::CausalGraph> {
        let stage = Stage::Graph;
        let report: GrangerReport = self.read_json(stage, GRANGER_JSON)?;
        let mut graph = build_graph(&report.results, report.alpha);
        if let Some(k) = self.config.graph.top_edges {
            let top = graph.top_edges(k);
            graph = graph.restricted_to(&top);
        }
        log::info!("graph: {} nodes, {} edges", graph.nodes.len(), graph.edges.len());
        let dot = export_dot(&graph);
        self.write(stage, GRAPH_DOT, |w| w.write_all(dot.as_bytes()).map_err(|e| e.to_string()))?;
        let json = export_json(&graph).map_err(|e| StageError::new(stage, ErrorKind::Numeric, e.to_string()))?;
        self.write(stage, GRAPH_JSON, |w| w.write_all(json.as_bytes()).map_err(|e| e.to_string()))?;
        Ok(graph)
    }

    /// Every stage in order, then `manifest.json`.
    pub fn run(&self) -> StageResult<Manifest> {
        let mut produced: Vec<(Stage, &str)> = Vec::new();
        if self.config.input.is_none() {
            self.synth()?;
            produced.push((Stage::Synth, SYNTH_LOG));
        }
        self.ingest()?;
        produced.extend([(Stage::Ingest, EVENTS), (Stage::Ingest, LOG_SUMMARY)]);
        self.classify()?;
        produced.extend([(Stage::Classify, TRANSITIONS), (Stage::Classify, CLASSIFICATION)]);
        self.series()?;
        produced.extend([(Stage::Series, PANEL), (Stage::Series, MASKS)]);
        self.adf()?;
        produced.extend([
            (Stage::Adf, STATIONARITY),
            (Stage::Adf, PANEL_STATIONARY),
            (Stage::Adf, MASKS_STATIONARY),
        ]);
        self.select_lags()?;
        produced.extend([(Stage::SelectLags, LAG_FREQUENCY), (Stage::SelectLags, LAG_SELECTION)]);
        self.granger()?;
        produced.extend([(Stage::Granger, GRANGER_CSV), (Stage::Granger, GRANGER_JSON)]);
        self.graph()?;
        produced.extend([(Stage::Graph, GRAPH_DOT), (Stage::Graph, GRAPH_JSON)]);

        let artifacts = produced
            .into_iter()
            .map(|(stage, name)| {
                let bytes = fs::read(self.path(name)).map_err(|e| {
                    StageError::new(Stage::Manifest, ErrorKind::Config, format!("cannot read back {name}: {e}"))
                })?;
                Ok(ArtifactRecord {
                    name: name.to_string(),
                    stage,
                    sha256: hex_digest(&bytes),
                    bytes: bytes.len() as u64,
                })
            })
            .collect::<StageResult<Vec<_>>>()?;
        let manifest = Manifest {
            tool: "actorcause".into(),
            cli_version: env!("CARGO_PKG_VERSION").into(),
            core_version: actorcause_core::VERSION.into(),
            seed: self.config.seed,
            config_sha256: self.config_sha256.clone(),
            alpha: self.config.alpha,
            artifacts,
        };
        self.write_json(Stage::Manifest, MANIFEST, &manifest)?;
        Ok(manifest)
    }
}

fn csv_header(path: &Path) -> Result<Vec<String>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = r.headers().map_err(|e| e.to_string())?;
    Ok(header.iter().map(str::to_string).collect())
}

