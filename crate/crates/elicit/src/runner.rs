//! Drives a dataset through a [`ChatClient`].
//!
//! Up to `max_concurrent` items are in flight. Completed items are appended
//! to the checkpoint by this task alone as they finish; the returned table
//! and prompt log are assembled in dataset order, so completion order never
//! shows in the output.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use futures::stream::{self, StreamExt};
use rand::Rng;
use serde::{Deserialize, Serialize};
use vat_core::dataset::{RecordKey, RunTable};
use vat_core::evidence::{Likert, Polarity};
use vat_core::{JudgmentRecord, MicroValueId, RunManifest, Taxonomy};

use crate::client::{CallError, ChatClient};
use crate::config::{EndpointConfig, SteeringSpec};
use crate::probe::{build_probe, parse_likert, ProbeInput, Prompt, STRICT_SUFFIX};
use crate::ElicitError;

/// One (scene, action, micro-value) to judge, with its texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitItem {
    pub scene_id: String,
    pub action_id: String,
    pub micro_value: MicroValueId,
    pub polarity: Polarity,
    pub scene: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

impl ElicitItem {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            scene_id: self.scene_id.clone(),
            action_id: self.action_id.clone(),
            micro_value: self.micro_value.clone(),
        }
    }
}

pub fn load_items(path: &Path) -> Result<Vec<ElicitItem>, ElicitError> {
    let file = File::open(path).map_err(|source| ElicitError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ElicitError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| ElicitError::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Completed items are appended here; existing entries are not re-queried.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemFailure {
    pub index: usize,
    pub key: RecordKey,
    pub reason: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptLogEntry {
    pub scene_id: String,
    pub action_id: String,
    pub micro_value: MicroValueId,
    pub prompt: String,
    /// `None` for items restored from the checkpoint.
    pub response: Option<String>,
    pub likert: Option<u8>,
    pub attempts: u32,
    pub reasked: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ElicitStats {
    pub items: usize,
    pub resumed: usize,
    pub queried: usize,
    pub completed: usize,
    pub retries: u32,
    pub reasks: usize,
    pub failures: Vec<ItemFailure>,
}

#[derive(Debug, Clone)]
pub struct ElicitOutcome {
    pub table: RunTable,
    pub stats: ElicitStats,
    pub prompts: Vec<PromptLogEntry>,
}

impl ElicitOutcome {
    pub fn write_prompt_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.prompts {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct Answer {
    likert: u8,
    response: String,
    attempts: u32,
    reasked: bool,
}

enum ItemError {
    Fatal(ElicitError),
    Failed { reason: String, attempts: u32 },
}

fn backoff(cfg: &EndpointConfig, retry: u32) -> Duration {
    let full = cfg
        .backoff_base_ms
        .saturating_mul(1u64 << retry.min(20))
        .min(cfg.backoff_max_ms);
    // equal jitter: half fixed, half random
    let jitter = rand::rng().random_range(0.5..=1.0);
    Duration::from_secs_f64(full as f64 * jitter / 1000.0)
}

/// Calls until success, a non-retryable error, or retries run out.
/// Returns the response and the number of attempts made.
async fn call_with_retry<C: ChatClient>(
    client: &C,
    cfg: &EndpointConfig,
    prompt: &str,
) -> Result<(String, u32), (CallError, u32)> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match client.complete(prompt).await {
            Ok(text) => return Ok((text, attempt)),
            Err(e) if e.retryable() && attempt <= cfg.max_retries => {
                tokio::time::sleep(backoff(cfg, attempt - 1)).await;
            }
            Err(e) => return Err((e, attempt)),
        }
    }
}

fn classify(err: CallError, attempts: u32, cfg: &EndpointConfig) -> ItemError {
    match err {
        CallError::Auth(status) => ItemError::Fatal(ElicitError::Auth { status }),
        CallError::Connect(message) => ItemError::Fatal(ElicitError::Unreachable {
            url: cfg.base_url.clone(),
            attempts,
            message,
        }),
        other => ItemError::Failed {
            reason: other.to_string(),
            attempts,
        },
    }
}

async fn elicit_one<C: ChatClient>(client: &C, cfg: &EndpointConfig, prompt: &str) -> Result<Answer, ItemError> {
    let (first, mut attempts) = call_with_retry(client, cfg, prompt)
        .await
        .map_err(|(e, n)| classify(e, n, cfg))?;
    if let Ok(likert) = parse_likert(&first) {
        return Ok(Answer {
            likert,
            response: first,
            attempts,
            reasked: false,
        });
    }
    let strict = format!("{prompt}{STRICT_SUFFIX}");
    let (second, more) = call_with_retry(client, cfg, &strict)
        .await
        .map_err(|(e, n)| classify(e, attempts + n, cfg))?;
    attempts += more;
    match parse_likert(&second) {
        Ok(likert) => Ok(Answer {
            likert,
            response: second,
            attempts,
            reasked: true,
        }),
        Err(e) => Err(ItemError::Failed {
            reason: format!("unparseable after re-ask: {e}"),
            attempts,
        }),
    }
}

fn checkpoint_err(path: &Path, message: impl Into<String>) -> ElicitError {
    ElicitError::Checkpoint {
        path: path.to_owned(),
        message: message.into(),
    }
}

fn read_checkpoint(path: &Path, run_id: &str) -> Result<BTreeMap<RecordKey, Likert>, ElicitError> {
    let mut done = BTreeMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(checkpoint_err(path, e.to_string())),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| checkpoint_err(path, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted write is dropped
        let Ok(rec) = serde_json::from_str::<JudgmentRecord>(&line) else {
            continue;
        };
        if rec.run_id != run_id {
            return Err(checkpoint_err(
                path,
                format!("line {} belongs to run `{}`, not `{run_id}`", i + 1, rec.run_id),
            ));
        }
        done.insert(rec.key(), rec.likert);
    }
    Ok(done)
}

/// Opens for appending, first terminating a torn final line so the next
/// record starts on a fresh line.
fn open_checkpoint(path: &Path) -> Result<File, ElicitError> {
    let err = |e: std::io::Error| checkpoint_err(path, e.to_string());
    let torn = std::fs::read(path).is_ok_and(|b| b.last().is_some_and(|&c| c != b'\n'));
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    if torn {
        f.write_all(b"\n").map_err(err)?;
    }
    Ok(f)
}

fn record(item: &ElicitItem, run_id: &str, likert: Likert) -> JudgmentRecord {
    JudgmentRecord {
        run_id: run_id.to_owned(),
        scene_id: item.scene_id.clone(),
        action_id: item.action_id.clone(),
        micro_value: item.micro_value.clone(),
        polarity: item.polarity,
        likert,
        country: item.country.clone(),
        topic: item.topic.clone(),
    }
}

pub fn prompts_for(
    items: &[ElicitItem],
    taxonomy: &Taxonomy,
    steering: Option<&SteeringSpec>,
) -> Result<Vec<Prompt>, ElicitError> {
    let labels: BTreeMap<&str, &str> = taxonomy
        .micro_values()
        .iter()
        .map(|m| (m.id.as_str(), m.label.as_str()))
        .collect();
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let label = labels.get(item.micro_value.as_str()).ok_or_else(|| ElicitError::Dataset {
                line: i + 1,
                message: format!("unknown micro-value `{}`", item.micro_value),
            })?;
            build_probe(
                &ProbeInput {
                    scene: &item.scene,
                    action: &item.action,
                    micro_label: label,
                    claim: item.claim.as_deref(),
                },
                steering,
            )
        })
        .collect()
}

pub async fn run_elicitation<C: ChatClient>(
    items: &[ElicitItem],
    taxonomy: &Taxonomy,
    client: &C,
    endpoint: &EndpointConfig,
    steering: Option<&SteeringSpec>,
    manifest: RunManifest,
    opts: &RunOptions,
) -> Result<ElicitOutcome, ElicitError> {
    endpoint.validate()?;
    let prompts: Vec<String> = prompts_for(items, taxonomy, steering)?.iter().map(Prompt::text).collect();
    let run_id = manifest.run_id.clone();

    let resumed = match &opts.checkpoint {
        Some(p) => read_checkpoint(p, &run_id)?,
        None => BTreeMap::new(),
    };
    let mut writer = match &opts.checkpoint {
        Some(p) => Some(open_checkpoint(p)?),
        None => None,
    };

    let pending: Vec<usize> = (0..items.len()).filter(|&i| !resumed.contains_key(&items[i].key())).collect();
    let mut stats = ElicitStats {
        items: items.len(),
        resumed: items.len() - pending.len(),
        queried: pending.len(),
        ..Default::default()
    };

    let mut answers: BTreeMap<usize, Answer> = BTreeMap::new();
    let mut results = stream::iter(pending)
        .map(|i| {
            let prompt = &prompts[i];
            async move { (i, elicit_one(client, endpoint, prompt).await) }
        })
        .buffer_unordered(endpoint.max_concurrent);
    while let Some((i, result)) = results.next().await {
        match result {
            Ok(answer) => {
                if let (Some(w), Some(path)) = (writer.as_mut(), opts.checkpoint.as_deref()) {
                    let likert = Likert::new(i64::from(answer.likert)).expect("parsed into range");
                    let line = serde_json::to_string(&record(&items[i], &run_id, likert)).expect("serializable");
                    writeln!(w, "{line}")
                        .and_then(|()| w.flush())
                        .map_err(|e| checkpoint_err(path, e.to_string()))?;
                }
                stats.retries += answer.attempts.saturating_sub(1 + u32::from(answer.reasked));
                stats.reasks += usize::from(answer.reasked);
                answers.insert(i, answer);
            }
            Err(ItemError::Fatal(e)) => return Err(e),
            Err(ItemError::Failed { reason, attempts }) => {
                stats.retries += attempts.saturating_sub(1);
                stats.failures.push(ItemFailure {
                    index: i,
                    key: items[i].key(),
                    reason,
                    attempts,
                });
            }
        }
    }
    drop(results);
    stats.failures.sort_by_key(|f| f.index);

    let mut table = RunTable::new(manifest);
    let mut log = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let key = item.key();
        let mut entry = PromptLogEntry {
            scene_id: item.scene_id.clone(),
            action_id: item.action_id.clone(),
            micro_value: item.micro_value.clone(),
            prompt: prompts[i].clone(),
            response: None,
            likert: None,
            attempts: 0,
            reasked: false,
        };
        if let Some(&likert) = resumed.get(&key) {
            entry.likert = Some(likert.get());
            table.insert(record(item, &run_id, likert));
        } else if let Some(a) = answers.remove(&i) {
            let likert = Likert::new(i64::from(a.likert)).expect("parsed into range");
            entry.likert = Some(a.likert);
            entry.response = Some(a.response);
            entry.attempts = a.attempts;
            entry.reasked = a.reasked;
            table.insert(record(item, &run_id, likert));
        }
        log.push(entry);
    }
    stats.completed = table.len();
    Ok(ElicitOutcome {
        table,
        stats,
        prompts: log,
    })
}
