//! Judgment records, run ingestion, pre/post pairing and scenario splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::{Likert, Polarity};
use crate::taxonomy::{MicroValueId, ValueId};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("read failed: {0}")]
    Stream(#[from] io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: likert {value} outside 1..=5")]
    LikertOutOfRange { line: usize, value: i64 },
    #[error("line {line}: polarity {value} is not +1 or -1")]
    InvalidPolarity { line: usize, value: i64 },
    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { line: usize, key: RecordKey },
    #[error("line {line}: run_id `{found}` does not match manifest `{expected}`")]
    RunIdMismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("pair_runs: key {key} present only in {side} run")]
    Unmatched { key: RecordKey, side: &'static str },
    #[error("pair_runs: polarity differs between pre and post for {key}")]
    PolarityMismatch { key: RecordKey },
    #[error("split_scenarios: no scenes supplied")]
    EmptyInput,
    #[error("split_scenarios: ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
    #[error("split_scenarios: scene `{0}` has no stratum")]
    MissingStratum(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    #[default]
    None,
    PromptSteer,
    Sft,
    Dpo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Reinforce,
    Suppress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Pre,
    Post,
}

/// Describes one run: a model under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub model: String,
    #[serde(default)]
    pub intervention: Intervention,
    #[serde(default)]
    pub shots: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_value: Option<ValueId>,
    #[serde(default)]
    pub direction: Direction,
    pub condition: Condition,
}

impl RunManifest {
    pub fn from_json(doc: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(doc).map_err(|e| DatasetError::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let doc = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&doc)
    }

    /// Soft checks against the reference protocol; never fatal.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.condition == Condition::Pre && (self.intervention != Intervention::None || self.shots != 0) {
            out.push(format!(
                "run {}: pre condition with intervention {:?} and {} shots",
                self.run_id, self.intervention, self.shots
            ));
        }
        if self.intervention == Intervention::PromptSteer && ![0, 2, 4, 8].contains(&self.shots) {
            out.push(format!(
                "run {}: prompt steering with {} shots (reference protocol uses 2, 4, 8)",
                self.run_id, self.shots
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub scene_id: String,
    pub action_id: String,
    pub micro_value: MicroValueId,
}

impl std::fmt::Display for RecordKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.scene_id, self.action_id, self.micro_value)
    }
}

/// One Likert judgment of a (scene, action) against a micro-value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub run_id: String,
    pub scene_id: String,
    pub action_id: String,
    pub micro_value: MicroValueId,
    pub polarity: Polarity,
    pub likert: Likert,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

impl JudgmentRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            scene_id: self.scene_id.clone(),
            action_id: self.action_id.clone(),
            micro_value: self.micro_value.clone(),
        }
    }
}

/// Loosely typed line shape so range errors can name the line.
#[derive(Deserialize)]
struct RawRecord {
    run_id: String,
    scene_id: String,
    action_id: String,
    micro_value: MicroValueId,
    polarity: i64,
    likert: i64,
    #[serde(default)]
    country: Option<String>,
    #[serde(default)]
    topic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub polarity: Polarity,
    pub likert: Likert,
    pub country: Option<String>,
    pub topic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTable {
    pub manifest: RunManifest,
    records: BTreeMap<RecordKey, Judgment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    #[default]
    Strict,
    LastWrite,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub duplicates: DuplicatePolicy,
    /// Count malformed lines as rejected instead of failing.
    pub skip_malformed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines: usize,
    pub records: usize,
    pub blank: usize,
    pub overwritten: usize,
    pub rejected: Vec<(usize, String)>,
}

impl RunTable {
    pub fn new(manifest: RunManifest) -> Self {
        Self {
            manifest,
            records: BTreeMap::new(),
        }
    }

    /// Inserts a record, returning the judgment it replaced, if any.
    pub fn insert(&mut self, record: JudgmentRecord) -> Option<Judgment> {
        let key = record.key();
        self.records.insert(
            key,
            Judgment {
                polarity: record.polarity,
                likert: record.likert,
                country: record.country,
                topic: record.topic,
            },
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &RecordKey) -> Option<&Judgment> {
        self.records.get(key)
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.records.contains_key(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&RecordKey, &Judgment)> {
        self.records.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &RecordKey> {
        self.records.keys()
    }

    /// Records in key order, stamped with this run's id.
    pub fn records(&self) -> impl Iterator<Item = JudgmentRecord> + '_ {
        self.records.iter().map(|(k, j)| JudgmentRecord {
            run_id: self.manifest.run_id.clone(),
            scene_id: k.scene_id.clone(),
            action_id: k.action_id.clone(),
            micro_value: k.micro_value.clone(),
            polarity: j.polarity,
            likert: j.likert,
            country: j.country.clone(),
            topic: j.topic.clone(),
        })
    }

    pub fn scene_ids(&self) -> BTreeSet<String> {
        self.records.keys().map(|k| k.scene_id.clone()).collect()
    }

    /// Stratum label per scene: `country|topic` when every record of the
    /// run carries both fields, otherwise a single stratum `all`.
    pub fn strata(&self) -> BTreeMap<String, String> {
        let full = self
            .records
            .values()
            .all(|j| j.country.is_some() && j.topic.is_some());
        self.records
            .iter()
            .map(|(k, j)| {
                let label = match (full, &j.country, &j.topic) {
                    (true, Some(c), Some(t)) => format!("{c}|{t}"),
                    _ => "all".to_owned(),
                };
                (k.scene_id.clone(), label)
            })
            .collect()
    }

    /// One JSON object per line, in key order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Builds a [`RunTable`] from line-delimited JSON records.
pub fn ingest_run<R: BufRead>(
    manifest: RunManifest,
    reader: R,
    options: &IngestOptions,
) -> Result<(RunTable, IngestStats), DatasetError> {
    let mut table = RunTable::new(manifest);
    let mut stats = IngestStats::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        stats.lines += 1;
        if line.trim().is_empty() {
            stats.blank += 1;
            continue;
        }
        let record = match parse_line(&line, line_no, &table.manifest.run_id) {
            Ok(r) => r,
            Err(e) if options.skip_malformed => {
                stats.rejected.push((line_no, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        if table.contains(&record.key()) && options.duplicates == DuplicatePolicy::Strict {
            return Err(DatasetError::DuplicateKey {
                line: line_no,
                key: record.key(),
            });
        }
        if table.insert(record).is_some() {
            stats.overwritten += 1;
        }
    }
    stats.records = table.len();
    Ok((table, stats))
}

fn parse_line(line: &str, line_no: usize, run_id: &str) -> Result<JudgmentRecord, DatasetError> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    if raw.run_id != run_id {
        return Err(DatasetError::RunIdMismatch {
            line: line_no,
            expected: run_id.to_owned(),
            found: raw.run_id,
        });
    }
    let likert = Likert::new(raw.likert).map_err(|_| DatasetError::LikertOutOfRange {
        line: line_no,
        value: raw.likert,
    })?;
    let polarity = Polarity::from_sign(raw.polarity).map_err(|_| DatasetError::InvalidPolarity {
        line: line_no,
        value: raw.polarity,
    })?;
    Ok(JudgmentRecord {
        run_id: raw.run_id,
        scene_id: raw.scene_id,
        action_id: raw.action_id,
        micro_value: raw.micro_value,
        polarity,
        likert,
        country: raw.country,
        topic: raw.topic,
    })
}

/// Opens a file for line reading, transparently gunzipping when the file
/// starts with the gzip magic bytes.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    };
    let mut file = File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 2];
    let n = read_prefix(&mut file, &mut magic).map_err(io_err)?;
    let file = File::open(path).map_err(io_err)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn read_prefix(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

pub fn ingest_file(
    manifest: RunManifest,
    path: &Path,
    options: &IngestOptions,
) -> Result<(RunTable, IngestStats), DatasetError> {
    let reader = open_input(path)?;
    ingest_run(manifest, reader, options).map_err(|e| match e {
        DatasetError::Stream(source) => DatasetError::Io {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPolicy {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedJudgment {
    pub scene_id: String,
    pub action_id: String,
    pub micro_value: MicroValueId,
    pub polarity: Polarity,
    pub likert_pre: Likert,
    pub likert_post: Likert,
}

/// Pre and post judgments joined on (scene, action, micro-value), sorted by key.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTable {
    pub pre: RunManifest,
    pub post: RunManifest,
    samples: Vec<PairedJudgment>,
    pub dropped_count: usize,
    pub diagnostics: Vec<String>,
}

impl PairedTable {
    pub fn samples(&self) -> &[PairedJudgment] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scene_ids(&self) -> BTreeSet<&str> {
        self.samples.iter().map(|s| s.scene_id.as_str()).collect()
    }

    /// The same table with pre and post exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            pre: self.post.clone(),
            post: self.pre.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| PairedJudgment {
                    likert_pre: s.likert_post,
                    likert_post: s.likert_pre,
                    ..s.clone()
                })
                .collect(),
            dropped_count: self.dropped_count,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Keeps only samples whose scene is in `scenes`.
    pub fn filter_scenes(&self, scenes: &BTreeSet<&str>) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .filter(|s| scenes.contains(s.scene_id.as_str()))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }
}

const DIAGNOSTIC_EXAMPLES: usize = 5;

/// Inner join of two runs. Polarity disagreements are always fatal; unmatched
/// keys are fatal under [`PairPolicy::Strict`] and counted otherwise.
pub fn pair_runs(pre: &RunTable, post: &RunTable, policy: PairPolicy) -> Result<PairedTable, DatasetError> {
    let mut samples = Vec::with_capacity(pre.len().min(post.len()));
    let mut only_pre = Vec::new();
    let mut only_post = Vec::new();

    let mut a = pre.records.iter().peekable();
    let mut b = post.records.iter().peekable();
    loop {
        let side = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (Some((ka, _)), Some((kb, _))) => ka.cmp(kb),
        };
        match side {
            std::cmp::Ordering::Less => {
                let (k, _) = a.next().expect("peeked");
                if policy == PairPolicy::Strict {
                    return Err(DatasetError::Unmatched {
                        key: k.clone(),
                        side: "pre",
                    });
                }
                only_pre.push(k);
            }
            std::cmp::Ordering::Greater => {
                let (k, _) = b.next().expect("peeked");
                if policy == PairPolicy::Strict {
                    return Err(DatasetError::Unmatched {
                        key: k.clone(),
                        side: "post",
                    });
                }
                only_post.push(k);
            }
            std::cmp::Ordering::Equal => {
                let (k, jp) = a.next().expect("peeked");
                let (_, jq) = b.next().expect("peeked");
                if jp.polarity != jq.polarity {
                    return Err(DatasetError::PolarityMismatch { key: k.clone() });
                }
                samples.push(PairedJudgment {
                    scene_id: k.scene_id.clone(),
                    action_id: k.action_id.clone(),
                    micro_value: k.micro_value.clone(),
                    polarity: jp.polarity,
                    likert_pre: jp.likert,
                    likert_post: jq.likert,
                });
            }
        }
    }

    let mut diagnostics = Vec::new();
    for (side, keys) in [("pre", &only_pre), ("post", &only_post)] {
        if keys.is_empty() {
            continue;
        }
        let examples: Vec<String> = keys.iter().take(DIAGNOSTIC_EXAMPLES).map(|k| k.to_string()).collect();
        diagnostics.push(format!(
            "dropped {} key(s) present only in {side} run, e.g. {}",
            keys.len(),
            examples.join(", ")
        ));
    }
    Ok(PairedTable {
        pre: pre.manifest.clone(),
        post: post.manifest.clone(),
        samples,
        dropped_count: only_pre.len() + only_post.len(),
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioSplit {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

/// Stratified scenario-level split.
///
/// The train total is `round(ratio * n)`. Each stratum receives the floor or
/// ceiling of its quota `ratio * n_stratum` (largest remainders win, ties
/// broken by the seeded RNG), then its scenes are shuffled and the first
/// `k` go to train.
pub fn split_scenarios(
    scene_ids: &BTreeSet<String>,
    ratio: f64,
    strata: &BTreeMap<String, String>,
    seed: u64,
) -> Result<ScenarioSplit, DatasetError> {
    if scene_ids.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::InvalidRatio(ratio));
    }
    let mut groups: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
    for s in scene_ids {
        let label = strata.get(s).ok_or_else(|| DatasetError::MissingStratum(s.clone()))?;
        groups.entry(label.as_str()).or_default().push(s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = (ratio * scene_ids.len() as f64).round() as usize;
    let mut quotas: Vec<(usize, f64, u64)> = groups
        .values()
        .map(|g| {
            let q = ratio * g.len() as f64;
            (q.floor() as usize, q - q.floor(), rng.random())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&i, &j| {
        quotas[j]
            .1
            .total_cmp(&quotas[i].1)
            .then(quotas[i].2.cmp(&quotas[j].2))
    });
    for &i in order.iter().take(target.saturating_sub(assigned)) {
        quotas[i].0 += 1;
    }

    let mut split = ScenarioSplit {
        train: BTreeSet::new(),
        test: BTreeSet::new(),
    };
    for (scenes, (k, _, _)) in groups.into_values().zip(quotas) {
        let mut scenes = scenes;
        scenes.shuffle(&mut rng);
        for (i, s) in scenes.into_iter().enumerate() {
            if i < k {
                split.train.insert(s.clone());
            } else {
                split.test.insert(s.clone());
            }
        }
    }
    Ok(split)
}
