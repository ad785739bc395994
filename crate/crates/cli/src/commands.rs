//! Subcommand implementations. Each takes its merged config document and
//! returns a JSON summary for stdout.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use vat_core::dataset::{self, DuplicatePolicy, IngestOptions, IngestStats, PairPolicy};
use vat_core::evidence::{build_shift_matrix, Aggregation};
use vat_core::metrics::{tax_report, CorrelationKind, ReportOptions};
use vat_core::robustness::{
    bootstrap_nvat, cross_granularity, rank_agreement, BootstrapOptions, CrossGranularityOptions, MicroAggregation,
    ResampleMode,
};
use vat_core::synthetic::{generate, PlantedSpec};
use vat_core::{Execution, PairedTable, RunManifest, TaxReport, Taxonomy};
use vat_elicit::runner::load_items;
use vat_elicit::{run_elicitation, EndpointConfig, HttpClient, MockConfig, MockServer, RunOptions, SteeringSpec};

use crate::config::{self, read_file};
use crate::error::{CliError, CoreContext};
use crate::figures::{self, FigureKind};
use crate::output::{parameters, InputHash, RunDir};

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_min_support() -> usize {
    30
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_top_k() -> usize {
    10
}

fn default_true() -> bool {
    true
}

fn default_hub() -> f64 {
    0.75
}

fn default_fraction() -> f64 {
    0.8
}

fn default_replicates() -> usize {
    200
}

fn default_ratio() -> f64 {
    0.7
}

fn json_line(v: Value) -> String {
    v.to_string()
}

/// `dir/run.jsonl.gz` -> `dir/run.manifest.json`
pub fn sidecar_manifest(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    let stem = name
        .strip_suffix(".jsonl")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(name);
    path.with_file_name(format!("{stem}.manifest.json"))
}

fn load_taxonomy(path: Option<&Path>, inputs: &mut Vec<InputHash>) -> Result<Taxonomy, CliError> {
    match path {
        None => Ok(Taxonomy::default_schwartz()),
        Some(p) => {
            let bytes = read_file("load_taxonomy", p)?;
            inputs.push(InputHash::new("taxonomy", p, &bytes));
            let doc = String::from_utf8_lossy(&bytes);
            Taxonomy::from_json(&doc).op("load_taxonomy")
        }
    }
}

fn load_manifest(role: &str, path: &Path, inputs: &mut Vec<InputHash>) -> Result<RunManifest, CliError> {
    let bytes = read_file("load_manifest", path)?;
    inputs.push(InputHash::new(role, path, &bytes));
    RunManifest::from_json(&String::from_utf8_lossy(&bytes))
        .map_err(|e| CliError::from_core("load_manifest", e.into()).with_context(path))
}

/// Pre/post runs plus how to read and pair them.
#[derive(Debug, Clone, Deserialize)]
pub struct RunInputs {
    pub pre: PathBuf,
    pub post: PathBuf,
    pub pre_manifest: Option<PathBuf>,
    pub post_manifest: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    #[serde(default)]
    pub pair_policy: PairPolicy,
    #[serde(default)]
    pub duplicates: DuplicatePolicy,
    #[serde(default)]
    pub skip_malformed: bool,
    /// Strict pairing and strict degenerate handling.
    #[serde(default)]
    pub strict: bool,
}

pub const RUN_PATH_KEYS: [&str; 5] = ["pre", "post", "pre_manifest", "post_manifest", "taxonomy"];

pub struct LoadedRuns {
    pub taxonomy: Taxonomy,
    pub paired: PairedTable,
    pub ingest: BTreeMap<String, IngestStats>,
    pub warnings: Vec<String>,
    pub inputs: Vec<InputHash>,
}

impl RunInputs {
    pub fn load(&self) -> Result<LoadedRuns, CliError> {
        let mut inputs = Vec::new();
        let pre_bytes = read_file("ingest_run", &self.pre)?;
        let post_bytes = read_file("ingest_run", &self.post)?;
        inputs.push(InputHash::new("pre", &self.pre, &pre_bytes));
        inputs.push(InputHash::new("post", &self.post, &post_bytes));
        let taxonomy = load_taxonomy(self.taxonomy.as_deref(), &mut inputs)?;
        let pre_m = self.pre_manifest.clone().unwrap_or_else(|| sidecar_manifest(&self.pre));
        let post_m = self.post_manifest.clone().unwrap_or_else(|| sidecar_manifest(&self.post));
        let pre_manifest = load_manifest("pre_manifest", &pre_m, &mut inputs)?;
        let post_manifest = load_manifest("post_manifest", &post_m, &mut inputs)?;
        let mut warnings = pre_manifest.warnings();
        warnings.extend(post_manifest.warnings());

        let opts = IngestOptions {
            duplicates: self.duplicates,
            skip_malformed: self.skip_malformed,
        };
        let mut ingest = BTreeMap::new();
        let mut read = |role: &str, path: &Path, manifest: RunManifest| -> Result<_, CliError> {
            let (table, stats) = dataset::ingest_file(manifest, path, &opts)
                .map_err(|e| CliError::from_core("ingest_run", e.into()).with_context(path))?;
            if !stats.rejected.is_empty() {
                warnings.push(format!("{role}: {} malformed line(s) skipped", stats.rejected.len()));
            }
            if stats.overwritten > 0 {
                warnings.push(format!("{role}: {} duplicate key(s) overwritten", stats.overwritten));
            }
            ingest.insert(role.to_owned(), stats);
            Ok(table)
        };
        let pre = read("pre", &self.pre, pre_manifest)?;
        let post = read("post", &self.post, post_manifest)?;
        let policy = if self.strict { PairPolicy::Strict } else { self.pair_policy };
        let paired = dataset::pair_runs(&pre, &post, policy).op("pair_runs")?;
        warnings.extend(paired.diagnostics.iter().cloned());
        Ok(LoadedRuns {
            taxonomy,
            paired,
            ingest,
            warnings,
            inputs,
        })
    }
}

impl CliError {
    fn with_context(mut self, path: &Path) -> Self {
        let p = path.display().to_string();
        if !self.message.contains(&p) {
            self.message = format!("{p}: {}", self.message);
        }
        self
    }
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Deserialize)]
struct SynthConfig {
    spec: Option<PathBuf>,
    seed: Option<u64>,
    n_scenes: Option<usize>,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
}

pub fn cmd_synth(doc: Map<String, Value>, exec: Execution) -> Result<String, CliError> {
    let cfg: SynthConfig = config::parse(doc.clone())?;
    let mut inputs = Vec::new();
    let mut spec = match &cfg.spec {
        None => PlantedSpec::bundled_fixture(),
        Some(p) => {
            let bytes = read_file("load_spec", p)?;
            inputs.push(InputHash::new("spec", p, &bytes));
            let base = p.parent().unwrap_or(Path::new("."));
            PlantedSpec::from_json(&String::from_utf8_lossy(&bytes), base).op("load_spec")?
        }
    };
    if let Some(s) = cfg.seed {
        spec.params.seed = s;
    }
    if let Some(n) = cfg.n_scenes {
        spec.params.n_scenes = n;
    }
    let runs = generate(&spec, exec).op("generate")?;

    let mut dir = RunDir::create(
        &cfg.out_dir,
        "synth",
        parameters(&doc, &["spec"]),
        inputs,
        Some(spec.params.seed),
    )?;
    for (name, table) in [("pre", &runs.pre), ("post", &runs.post)] {
        let mut buf = Vec::new();
        table.write_jsonl(&mut buf).map_err(|e| CliError::io("write_run", &dir.file(name), &e))?;
        dir.write(&format!("{name}.jsonl"), &buf)?;
        dir.write_json(&format!("{name}.manifest.json"), &table.manifest)?;
    }
    dir.write("taxonomy.json", spec.taxonomy.to_json().as_bytes())?;
    dir.write_json(
        "pipeline.json",
        &json!({
            "pre": "pre.jsonl",
            "post": "post.jsonl",
            "taxonomy": "taxonomy.json",
            "target": spec.params.target,
            "label": spec.params.model,
        }),
    )?;
    let path = dir.finish()?;
    Ok(json_line(json!({
        "command": "synth",
        "out": path,
        "n_scenes": spec.params.n_scenes,
        "records": runs.pre.len(),
        "seed": spec.params.seed,
    })))
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Deserialize)]
struct PipelineConfig {
    #[serde(flatten)]
    runs: RunInputs,
    target: Option<String>,
    label: Option<String>,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default)]
    aggregation: Aggregation,
    #[serde(default = "default_min_support")]
    min_support: usize,
    #[serde(default = "default_epsilon")]
    epsilon_gain: f64,
    #[serde(default)]
    exclude_target: bool,
    #[serde(default)]
    correlation: CorrelationKind,
}

fn coupling_csv(r: &TaxReport) -> String {
    let mut s = String::from("value");
    for v in &r.coupling.values {
        s.push(',');
        s.push_str(v);
    }
    s.push('\n');
    for (v, row) in r.coupling.values.iter().zip(&r.coupling.entries) {
        s.push_str(v);
        for x in row {
            s.push(',');
            s.push_str(&x.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn cmd_pipeline(doc: Map<String, Value>, exec: Execution) -> Result<String, CliError> {
    let cfg: PipelineConfig = config::parse(doc.clone())?;
    let loaded = cfg.runs.load()?;
    let target = match cfg.target.clone().or_else(|| loaded.paired.post.target_value.as_ref().map(|v| v.0.clone())) {
        Some(t) => t,
        None => {
            return Err(CliError::input(
                "cli",
                "pipeline",
                "missing_target",
                "no `target` given and the post manifest has no target_value",
            ))
        }
    };
    let sm = build_shift_matrix(&loaded.paired, &loaded.taxonomy, cfg.aggregation, exec).op("build_shift_matrix")?;
    let opts = ReportOptions {
        min_support: cfg.min_support,
        epsilon_gain: cfg.epsilon_gain,
        exclude_target: cfg.exclude_target,
        strict: cfg.runs.strict,
        kind: cfg.correlation,
    };
    let mut report = tax_report(&sm, &target, &opts, exec).op("tax_report")?;
    report.label = Some(cfg.label.clone().unwrap_or_else(|| loaded.paired.post.run_id.clone()));
    let mut diagnostics = loaded.warnings.clone();
    diagnostics.append(&mut report.diagnostics);
    report.diagnostics = diagnostics;

    let mut dir = RunDir::create(
        &cfg.out_dir,
        "pipeline",
        parameters(&doc, &RUN_PATH_KEYS),
        loaded.inputs.clone(),
        None,
    )?;
    dir.write_json("report.json", &report)?;
    dir.write("coupling.csv", coupling_csv(&report).as_bytes())?;
    let mut buf = Vec::new();
    sm.write_csv(&mut buf).op("write_shifts")?;
    dir.write("shifts.csv", &buf)?;
    let mut buf = Vec::new();
    sm.write_coverage_csv(&mut buf).op("write_shifts")?;
    dir.write("shifts_coverage.csv", &buf)?;
    dir.write_json(
        "pairing.json",
        &json!({
            "pre_run": loaded.paired.pre.run_id,
            "post_run": loaded.paired.post.run_id,
            "paired": loaded.paired.len(),
            "dropped": loaded.paired.dropped_count,
            "ingest": loaded.ingest,
        }),
    )?;
    let path = dir.finish()?;
    Ok(json_line(json!({
        "command": "pipeline",
        "out": path,
        "target": report.target,
        "n_samples": report.n_samples,
        "gain": report.gain,
        "nvat": report.nvat,
        "gini": report.gini,
    })))
}

// ---------------------------------------------------------------- figures

#[derive(Debug, Deserialize)]
struct FiguresConfig {
    reports: Vec<PathBuf>,
    taxonomy: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default = "default_top_k")]
    top_k: usize,
    #[serde(default = "default_true")]
    svg: bool,
    #[serde(default = "default_hub")]
    hub_quantile: f64,
    #[serde(default = "default_hub")]
    hub_persistence: f64,
}

pub const FIGURE_PATH_KEYS: [&str; 2] = ["reports", "taxonomy"];

fn file_tag(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn cmd_figures(doc: Map<String, Value>, _exec: Execution) -> Result<String, CliError> {
    let cfg: FiguresConfig = config::parse(doc.clone())?;
    if cfg.reports.is_empty() {
        return Err(CliError::input("cli", "figures", "config", "`reports` is empty"));
    }
    let mut inputs = Vec::new();
    let taxonomy = load_taxonomy(cfg.taxonomy.as_deref(), &mut inputs)?;
    let mut reports = Vec::new();
    for (i, p) in cfg.reports.iter().enumerate() {
        let bytes = read_file("load_report", p)?;
        inputs.push(InputHash::new(&format!("report{i:02}"), p, &bytes));
        let r: TaxReport = serde_json::from_slice(&bytes).map_err(|e| {
            CliError::input("cli", "load_report", "malformed_report", format!("{}: {e}", p.display()))
        })?;
        reports.push((figures::report_label(&r, i), r));
    }
    let mut dir = RunDir::create(&cfg.out_dir, "figures", parameters(&doc, &FIGURE_PATH_KEYS), inputs, None)?;

    let mut bundles = Vec::new();
    for (i, (label, r)) in reports.iter().enumerate() {
        let tag = format!("{i:02}-{}", file_tag(label));
        bundles.push(figures::bundle(FigureKind::Heatmap, tag.clone(), &figures::heatmap(r, label), cfg.svg));
        bundles.push(figures::bundle(FigureKind::Radar, tag.clone(), &figures::radar(r, label), cfg.svg));
        bundles.push(figures::bundle(FigureKind::Chord, tag, &figures::chord(r, label, cfg.top_k), cfg.svg));
    }
    let refs: Vec<(String, &TaxReport)> = reports.iter().map(|(l, r)| (l.clone(), r)).collect();
    bundles.push(figures::bundle(
        FigureKind::Circumplex,
        "all".into(),
        &figures::circumplex(&refs, &taxonomy),
        cfg.svg,
    ));
    let points: Vec<(String, f64, f64)> = reports.iter().map(|(l, r)| (l.clone(), r.gain, r.nvat)).collect();
    bundles.push(figures::bundle(FigureKind::Pareto, "all".into(), &figures::pareto(&points), cfg.svg));
    let profiles: Vec<_> = reports.iter().map(|(l, r)| r.profile(l.clone())).collect();
    bundles.push(figures::bundle(
        FigureKind::Amplification,
        "all".into(),
        &figures::amplification(&profiles, cfg.hub_quantile, cfg.hub_persistence),
        cfg.svg,
    ));

    let mut files = Vec::new();
    for b in &bundles {
        let stem = format!("figures/{}-{}", b.kind.as_str(), b.name);
        dir.write_json(&format!("{stem}.json"), b)?;
        files.push(format!("{stem}.json"));
        if let Some(svg) = &b.svg {
            dir.write(&format!("{stem}.svg"), svg.as_bytes())?;
            files.push(format!("{stem}.svg"));
        }
    }
    let path = dir.finish()?;
    Ok(json_line(json!({"command": "figures", "out": path, "files": files})))
}

// ---------------------------------------------------------------- robustness

#[derive(Debug, Deserialize)]
struct RobustnessConfig {
    #[serde(flatten)]
    runs: RunInputs,
    seed: Option<u64>,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default = "default_fraction")]
    fraction: f64,
    #[serde(default = "default_replicates")]
    replicates: usize,
    #[serde(default)]
    mode: ResampleMode,
    #[serde(default = "default_min_support")]
    min_support: usize,
    #[serde(default)]
    aggregation: Aggregation,
    #[serde(default)]
    comparison: CorrelationKind,
    #[serde(default)]
    micro_aggregation: MicroAggregation,
}

#[derive(Serialize)]
struct RobustnessOutput<'a> {
    bootstrap: &'a vat_core::robustness::BootstrapResult,
    agreement: &'a vat_core::robustness::AgreementResult,
    cross_granularity: &'a vat_core::robustness::CrossGranularityResult,
    diagnostics: &'a [String],
}

pub fn cmd_robustness(doc: Map<String, Value>, exec: Execution) -> Result<String, CliError> {
    let cfg: RobustnessConfig = config::parse(doc.clone())?;
    let Some(seed) = cfg.seed else {
        return Err(CliError::input(
            "cli",
            "robustness",
            "missing_seed",
            "a `seed` is required so replicates are reproducible",
        ));
    };
    let loaded = cfg.runs.load()?;
    let opts = BootstrapOptions {
        fraction: cfg.fraction,
        replicates: cfg.replicates,
        seed,
        mode: cfg.mode,
        min_support: cfg.min_support,
        aggregation: cfg.aggregation,
    };
    let boot = bootstrap_nvat(&loaded.paired, &loaded.taxonomy, &opts, exec).op("bootstrap_nvat")?;
    let sm = build_shift_matrix(&loaded.paired, &loaded.taxonomy, cfg.aggregation, exec).op("build_shift_matrix")?;
    let agreement = rank_agreement(&sm, cfg.min_support, cfg.comparison, exec).op("rank_agreement")?;
    let cross = cross_granularity(
        &loaded.paired,
        &loaded.taxonomy,
        &CrossGranularityOptions {
            min_support: cfg.min_support,
            aggregation: cfg.micro_aggregation,
            value_aggregation: cfg.aggregation,
        },
        exec,
    )
    .op("cross_granularity")?;

    let mut dir = RunDir::create(
        &cfg.out_dir,
        "robustness",
        parameters(&doc, &RUN_PATH_KEYS),
        loaded.inputs.clone(),
        Some(seed),
    )?;
    dir.write_json(
        "robustness.json",
        &RobustnessOutput {
            bootstrap: &boot,
            agreement: &agreement,
            cross_granularity: &cross,
            diagnostics: &loaded.warnings,
        },
    )?;
    let mut csv = String::from("replicate,nvat\n");
    for (i, v) in boot.replicate_values.iter().enumerate() {
        csv.push_str(&format!("{i},{v}\n"));
    }
    dir.write("replicates.csv", csv.as_bytes())?;
    let path = dir.finish()?;
    Ok(json_line(json!({
        "command": "robustness",
        "out": path,
        "full_nvat": boot.full_nvat,
        "bootstrap_mean": boot.mean,
        "bootstrap_std": boot.std,
        "rank_agreement": agreement.rank_agreement,
        "cross_granularity": cross.rank_correlation,
    })))
}

// ---------------------------------------------------------------- elicit

#[derive(Debug, Deserialize)]
struct ElicitConfig {
    dataset: PathBuf,
    taxonomy: Option<PathBuf>,
    endpoint: Option<EndpointConfig>,
    /// Serve a local deterministic endpoint for this run instead.
    mock: Option<MockConfig>,
    steering: Option<SteeringSpec>,
    manifest: RunManifest,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
}

pub fn cmd_elicit(doc: Map<String, Value>, _exec: Execution) -> Result<String, CliError> {
    let cfg: ElicitConfig = config::parse(doc.clone())?;
    let mut inputs = Vec::new();
    let taxonomy = load_taxonomy(cfg.taxonomy.as_deref(), &mut inputs)?;
    let bytes = read_file("load_dataset", &cfg.dataset)?;
    inputs.push(InputHash::new("dataset", &cfg.dataset, &bytes));
    let items = load_items(&cfg.dataset).map_err(|e| CliError::from_elicit("load_dataset", e).with_context(&cfg.dataset))?;
    if let Some(s) = &cfg.steering {
        s.validate().map_err(|e| CliError::from_elicit("steering", e))?;
    }

    let mut dir = RunDir::create(&cfg.out_dir, "elicit", parameters(&doc, &["dataset", "taxonomy"]), inputs, None)?;
    let checkpoint = dir.file("checkpoint.jsonl");
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::input("cli", "elicit", "runtime", e.to_string()))?;
    let outcome = runtime.block_on(async {
        let server = match &cfg.mock {
            Some(m) => Some(
                MockServer::start_local(m.clone())
                    .await
                    .map_err(|e| CliError::input("elicitation", "mock_server", "io", e.to_string()))?,
            ),
            None => None,
        };
        let endpoint = match (&cfg.endpoint, &server) {
            (Some(e), Some(s)) => EndpointConfig {
                base_url: s.base_url(),
                ..e.clone()
            },
            (Some(e), None) => e.clone(),
            (None, Some(s)) => EndpointConfig::new(s.base_url(), cfg.manifest.model.clone()),
            (None, None) => {
                return Err(CliError::input("cli", "elicit", "config", "either `endpoint` or `mock` is required"))
            }
        };
        let client = HttpClient::new(&endpoint).map_err(|e| CliError::from_elicit("client", e))?;
        let outcome = run_elicitation(
            &items,
            &taxonomy,
            &client,
            &endpoint,
            cfg.steering.as_ref(),
            cfg.manifest.clone(),
            &RunOptions {
                checkpoint: Some(checkpoint.clone()),
            },
        )
        .await
        .map_err(|e| CliError::from_elicit("run_elicitation", e));
        if let Some(s) = server {
            let _ = s.stop().await;
        }
        outcome
    })?;

    let run_id = cfg.manifest.run_id.clone();
    let mut buf = Vec::new();
    outcome
        .table
        .write_jsonl(&mut buf)
        .map_err(|e| CliError::io("write_run", &dir.path, &e))?;
    dir.write(&format!("{run_id}.jsonl"), &buf)?;
    dir.write_json(&format!("{run_id}.manifest.json"), &outcome.table.manifest)?;
    let mut buf = Vec::new();
    outcome
        .write_prompt_log(&mut buf)
        .map_err(|e| CliError::io("write_prompts", &dir.path, &e))?;
    dir.write("prompts.jsonl", &buf)?;
    dir.write_json("elicit.json", &outcome.stats)?;
    let path = dir.finish()?;
    Ok(json_line(json!({
        "command": "elicit",
        "out": path,
        "run_id": run_id,
        "items": outcome.stats.items,
        "completed": outcome.stats.completed,
        "resumed": outcome.stats.resumed,
        "failures": outcome.stats.failures.len(),
    })))
}

/// Serves the deterministic endpoint until the process is killed.
pub fn cmd_mock_server(doc: Map<String, Value>, port: u16) -> Result<String, CliError> {
    let cfg: MockConfig = config::parse(doc)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::input("cli", "mock_server", "runtime", e.to_string()))?;
    runtime.block_on(async {
        let server = MockServer::start(([127, 0, 0, 1], port).into(), cfg)
            .await
            .map_err(|e| CliError::input("elicitation", "mock_server", "io", e.to_string()))?;
        println!("{}", json!({"command": "mock-server", "base_url": server.base_url()}));
        server
            .wait()
            .await
            .map_err(|e| CliError::input("elicitation", "mock_server", "io", e.to_string()))?;
        Ok(json_line(json!({"command": "mock-server", "stopped": true})))
    })
}

// ---------------------------------------------------------------- split

#[derive(Debug, Deserialize)]
struct SplitConfig {
    runs: Vec<PathBuf>,
    manifests: Option<Vec<PathBuf>>,
    seed: Option<u64>,
    #[serde(default = "default_ratio")]
    ratio: f64,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
}

pub fn cmd_split(doc: Map<String, Value>, _exec: Execution) -> Result<String, CliError> {
    let cfg: SplitConfig = config::parse(doc.clone())?;
    let Some(seed) = cfg.seed else {
        return Err(CliError::input("cli", "split", "missing_seed", "a `seed` is required"));
    };
    let manifests = match &cfg.manifests {
        Some(m) if m.len() == cfg.runs.len() => m.clone(),
        Some(_) => {
            return Err(CliError::input(
                "cli",
                "split",
                "config",
                "`manifests` must have one entry per run",
            ))
        }
        None => cfg.runs.iter().map(|r| sidecar_manifest(r)).collect(),
    };
    let mut inputs = Vec::new();
    let mut scenes = BTreeSet::new();
    let mut strata = BTreeMap::new();
    for (i, (run, man)) in cfg.runs.iter().zip(&manifests).enumerate() {
        let manifest = load_manifest(&format!("manifest{i:02}"), man, &mut inputs)?;
        let bytes = read_file("ingest_run", run)?;
        inputs.push(InputHash::new(&format!("run{i:02}"), run, &bytes));
        let (table, _) = dataset::ingest_file(manifest, run, &IngestOptions::default())
            .map_err(|e| CliError::from_core("ingest_run", e.into()).with_context(run))?;
        scenes.extend(table.scene_ids());
        for (s, label) in table.strata() {
            strata.entry(s).or_insert(label);
        }
    }
    let split = dataset::split_scenarios(&scenes, cfg.ratio, &strata, seed).op("split_scenarios")?;
    let mut dir = RunDir::create(
        &cfg.out_dir,
        "split",
        parameters(&doc, &["runs", "manifests"]),
        inputs,
        Some(seed),
    )?;
    dir.write_json(
        "split.json",
        &json!({
            "ratio": cfg.ratio,
            "seed": seed,
            "n_train": split.train.len(),
            "n_test": split.test.len(),
            "train": split.train,
            "test": split.test,
        }),
    )?;
    let path = dir.finish()?;
    Ok(json_line(json!({
        "command": "split",
        "out": path,
        "n_train": split.train.len(),
        "n_test": split.test.len(),
    })))
}
