//! Paired judgment data with planted value-value coupling, plus naive
//! reference implementations used as test oracles.
//!
//! Per sample, a latent shift vector is drawn from a zero-mean Gaussian with
//! the planted correlation structure (scaled by `noise_scale`), the target
//! component is offset by `target_mean_shift`, and each component is
//! quantized to the half-step evidence grid and clamped to [-1, 1]. A pre
//! level is drawn uniformly among the grid levels that keep `pre + shift` on
//! the grid, and both conditions are emitted as Likert records.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Condition, Direction, Intervention, JudgmentRecord, RunManifest, RunTable};
use crate::evidence::{Likert, Polarity};
use crate::exec::Execution;
use crate::taxonomy::{Taxonomy, TaxonomyError, ValueId};

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("malformed spec: {0}")]
    Parse(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("coupling ({u}, {w}) must join two distinct values")]
    SelfCoupling { u: String, w: String },
    #[error("coupling ({u}, {w}) listed more than once")]
    DuplicatePair { u: String, w: String },
    #[error("coupling ({u}, {w}) has r = {r}; need -1 < r < 1")]
    InvalidCorrelation { u: String, w: String, r: f64 },
    #[error("planted correlation matrix is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("noise_scale must be finite and > 0, got {0}")]
    InvalidNoise(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCoupling {
    pub u: ValueId,
    pub w: ValueId,
    pub r: f64,
}

fn default_noise() -> f64 {
    1.0
}
fn default_actions() -> usize {
    1
}
fn default_model() -> String {
    "synthetic".into()
}
fn default_intervention() -> Intervention {
    Intervention::PromptSteer
}
fn default_shots() -> u32 {
    8
}

/// Generator parameters. The taxonomy is supplied separately when loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedParams {
    pub n_scenes: usize,
    #[serde(default)]
    pub coupling: Vec<PlantedCoupling>,
    pub target: ValueId,
    #[serde(default)]
    pub target_mean_shift: f64,
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    pub seed: u64,
    #[serde(default = "default_actions")]
    pub actions_per_scene: usize,
    /// Per-micro-value Gaussian jitter added on top of the value's latent
    /// shift; 0 makes micro-values exact copies of their value.
    #[serde(default)]
    pub micro_noise_scale: f64,
    /// Random +1/-1 polarity per judgment instead of fixed +1.
    #[serde(default)]
    pub mixed_polarity: bool,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_intervention")]
    pub intervention: Intervention,
    #[serde(default = "default_shots")]
    pub shots: u32,
    #[serde(default)]
    pub direction: Direction,
}

pub const FIXTURE_SPEC: &str = include_str!("../data/fixture_spec.json");

#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub taxonomy: Taxonomy,
    pub params: PlantedParams,
}

/// Generator document: the parameters plus an optional `taxonomy` that is either
/// an inline taxonomy object or a path (relative to the document).
#[derive(Deserialize)]
struct SpecDoc {
    #[serde(default)]
    taxonomy: Option<serde_json::Value>,
    #[serde(flatten)]
    params: PlantedParams,
}

impl PlantedSpec {
    pub fn new(taxonomy: Taxonomy, params: PlantedParams) -> Self {
        Self { taxonomy, params }
    }

    /// The bundled 500-scene fixture over the default taxonomy.
    pub fn bundled_fixture() -> Self {
        Self::from_json(FIXTURE_SPEC, Path::new(".")).expect("bundled fixture is valid")
    }

    pub fn from_json(doc: &str, base_dir: &Path) -> Result<Self, SyntheticError> {
        let doc: SpecDoc = serde_json::from_str(doc).map_err(|e| SyntheticError::Parse(e.to_string()))?;
        let taxonomy = match doc.taxonomy {
            None => Taxonomy::default_schwartz(),
            Some(serde_json::Value::String(p)) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| SyntheticError::Parse(format!("{}: {e}", path.display())))?;
                Taxonomy::from_json(&text)?
            }
            Some(inline) => Taxonomy::from_json(&inline.to_string())?,
        };
        Ok(Self {
            taxonomy,
            params: doc.params,
        })
    }

    /// Lower-triangular factor of the planted correlation matrix.
    pub fn correlation_factor(&self) -> Result<Vec<Vec<f64>>, SyntheticError> {
        let p = &self.params;
        if !(p.noise_scale.is_finite() && p.noise_scale > 0.0) {
            return Err(SyntheticError::InvalidNoise(p.noise_scale));
        }
        if !p.target_mean_shift.is_finite() {
            return Err(SyntheticError::NonFinite("target_mean_shift"));
        }
        if !(p.micro_noise_scale.is_finite() && p.micro_noise_scale >= 0.0) {
            return Err(SyntheticError::NonFinite("micro_noise_scale"));
        }
        self.taxonomy.value_index(&p.target)?;
        let n = self.taxonomy.len();
        let mut corr = vec![vec![0.0; n]; n];
        for (i, row) in corr.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut seen = BTreeSet::new();
        for c in &p.coupling {
            let (i, j) = (self.taxonomy.value_index(&c.u)?, self.taxonomy.value_index(&c.w)?);
            let names = || (c.u.0.clone(), c.w.0.clone());
            if i == j {
                let (u, w) = names();
                return Err(SyntheticError::SelfCoupling { u, w });
            }
            if !(c.r > -1.0 && c.r < 1.0) {
                let (u, w) = names();
                return Err(SyntheticError::InvalidCorrelation { u, w, r: c.r });
            }
            if !seen.insert((i.min(j), i.max(j))) {
                let (u, w) = names();
                return Err(SyntheticError::DuplicatePair { u, w });
            }
            corr[i][j] = c.r;
            corr[j][i] = c.r;
        }
        psd_cholesky(&corr).ok_or(SyntheticError::NotPositiveSemidefinite)
    }
}

/// Cholesky factor that tolerates semidefinite matrices (zero pivots with
/// zero remaining column). `None` if the matrix is not PSD.
pub fn psd_cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    const TOL: f64 = 1e-10;
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -TOL {
            return None;
        }
        let pivot = if d > TOL { d.sqrt() } else { 0.0 };
        l[j][j] = pivot;
        for i in j + 1..n {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if pivot == 0.0 {
                if s.abs() > 1e-8 {
                    return None;
                }
            } else {
                l[i][j] = s / pivot;
            }
        }
    }
    Some(l)
}

#[derive(Debug, Clone)]
pub struct GeneratedRuns {
    pub pre: RunTable,
    pub post: RunTable,
    /// Continuous latent shifts per sample (before quantization), columns in
    /// taxonomy value order. Rows follow `(scene, action)` generation order.
    pub latent: Vec<Vec<f64>>,
}

fn manifest(p: &PlantedParams, condition: Condition) -> RunManifest {
    let (suffix, intervention, shots) = match condition {
        Condition::Pre => ("pre", Intervention::None, 0),
        Condition::Post => ("post", p.intervention, p.shots),
    };
    RunManifest {
        run_id: format!("{}-{suffix}", p.model),
        model: p.model.clone(),
        intervention,
        shots,
        target_value: Some(p.target.clone()),
        direction: p.direction,
        condition,
    }
}

pub fn scene_id(i: usize) -> String {
    format!("scene-{i:05}")
}

const COUNTRIES: usize = 12;
const TOPICS: usize = 11;

struct SampleOut {
    latent: Vec<f64>,
    // (micro index, polarity, pre likert, post likert)
    judgments: Vec<(usize, Polarity, Likert, Likert)>,
}

fn quantize(x: f64) -> i8 {
    (2.0 * x).round().clamp(-2.0, 2.0) as i8
}

pub fn generate(spec: &PlantedSpec, exec: Execution) -> Result<GeneratedRuns, SyntheticError> {
    let factor = spec.correlation_factor()?;
    let p = &spec.params;
    let t = &spec.taxonomy;
    let target = t.value_index(&p.target)?;
    let n_values = t.len();
    let micro_parent: Vec<usize> = t
        .micro_values()
        .iter()
        .map(|m| t.parent_index(&m.id).expect("validated taxonomy"))
        .collect();
    let n_samples = p.n_scenes * p.actions_per_scene;

    let samples = exec.map(n_samples, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(s as u64);
        let z: Vec<f64> = (0..n_values).map(|_| rng.sample(StandardNormal)).collect();
        let mut latent: Vec<f64> = factor
            .iter()
            .map(|row| p.noise_scale * row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        latent[target] += p.target_mean_shift;
        let value_shift: Vec<i8> = latent.iter().map(|&x| quantize(x)).collect();

        let judgments = micro_parent
            .iter()
            .enumerate()
            .map(|(mi, &v)| {
                let shift = if p.micro_noise_scale > 0.0 {
                    let jitter: f64 = rng.sample(StandardNormal);
                    quantize(latent[v] + p.micro_noise_scale * jitter)
                } else {
                    value_shift[v]
                };
                let lo = (-2).max(-2 - shift);
                let hi = 2.min(2 - shift);
                let pre = rng.random_range(lo..=hi);
                let post = pre + shift;
                let polarity = if p.mixed_polarity && rng.random_bool(0.5) {
                    Polarity::Violate
                } else {
                    Polarity::Support
                };
                let likert = |h: i8| Likert::new(i64::from(h * polarity.sign() + 3)).expect("on grid");
                (mi, polarity, likert(pre), likert(post))
            })
            .collect();
        SampleOut { latent, judgments }
    });

    let mut pre = RunTable::new(manifest(p, Condition::Pre));
    let mut post = RunTable::new(manifest(p, Condition::Post));
    let mut latent = Vec::with_capacity(n_samples);
    for (s, out) in samples.into_iter().enumerate() {
        let scene = s / p.actions_per_scene;
        let action = format!("a{}", s % p.actions_per_scene);
        let country = format!("C{:02}", scene % COUNTRIES);
        let topic = format!("T{:02}", (scene / COUNTRIES) % TOPICS);
        for (mi, polarity, lp, lq) in out.judgments {
            let base = JudgmentRecord {
                run_id: pre.manifest.run_id.clone(),
                scene_id: scene_id(scene),
                action_id: action.clone(),
                micro_value: t.micro_values()[mi].id.clone(),
                polarity,
                likert: lp,
                country: Some(country.clone()),
                topic: Some(topic.clone()),
            };
            post.insert(JudgmentRecord {
                run_id: post.manifest.run_id.clone(),
                likert: lq,
                ..base.clone()
            });
            pre.insert(base);
        }
        latent.push(out.latent);
    }
    Ok(GeneratedRuns { pre, post, latent })
}

/// Naive reference implementations, written independently of the metric
/// code paths they check.
pub mod oracle {
    /// Spearman via explicit rank construction and the textbook
    /// sum-of-products Pearson formula. 0 for constant input.
    pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), y.len());
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| {
                    let below = v.iter().filter(|b| *b < a).count() as f64;
                    let equal = v.iter().filter(|b| *b == a).count() as f64;
                    below + (equal + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (rank(x), rank(y));
        let n = x.len() as f64;
        let sx: f64 = rx.iter().sum();
        let sy: f64 = ry.iter().sum();
        let sxx: f64 = rx.iter().map(|a| a * a).sum();
        let syy: f64 = ry.iter().map(|a| a * a).sum();
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
        let vx = n * sxx - sx * sx;
        let vy = n * syy - sy * sy;
        if vx == 0.0 || vy == 0.0 {
            return 0.0;
        }
        (n * sxy - sx * sy) / (vx * vy).sqrt()
    }

    /// Kendall tau-b by exhaustive pair classification.
    pub fn oracle_kendall(x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), y.len());
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                if dx == 0.0 && dy == 0.0 {
                    continue;
                } else if dx == 0.0 {
                    tx += 1;
                } else if dy == 0.0 {
                    ty += 1;
                } else if (dx > 0.0) == (dy > 0.0) {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
        if denom == 0.0 {
            return 0.0;
        }
        (c - d) as f64 / denom
    }

    /// Gini by the O(n^2) mean-absolute-difference double sum.
    pub fn oracle_gini(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mu = x.iter().sum::<f64>() / n;
        if mu == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for a in x {
            for b in x {
                total += (a - b).abs();
            }
        }
        total / (2.0 * n * n * mu)
    }
}
