//! Robustness checks for the tax metrics: scene-level bootstrap of nVAT,
//! Spearman-vs-Kendall agreement of VAT profiles, and micro/value
//! cross-granularity consistency.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PairedTable;
use crate::error::Result;
use crate::evidence::{build_micro_shift_matrix, build_shift_matrix, Aggregation, ShiftMatrix};
use crate::exec::Execution;
use crate::metrics::{
    self, check_pair, CorrelationKind, CouplingOptions, MetricsError, RankCorrelation,
};
use crate::stats::Welford;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("replicates must be at least 1")]
    NoReplicates,
    #[error("need at least 2 distinct scenes, got {0}")]
    TooFewScenes(usize),
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm), with exact
/// integer pair counts.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<RankCorrelation, MetricsError> {
    check_pair(x, y)?;
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |t: u64| t * t.saturating_sub(1) / 2;
    let total = pairs(n as u64);
    let (mut x_ties, mut joint_ties) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for k in 1..=n {
        let same_x = k < n && x[idx[k]] == x[idx[k - 1]];
        let same_xy = same_x && y[idx[k]] == y[idx[k - 1]];
        if same_x {
            run_x += 1;
        } else {
            x_ties += pairs(run_x);
            run_x = 1;
        }
        if same_xy {
            run_xy += 1;
        } else {
            joint_ties += pairs(run_xy);
            run_xy = 1;
        }
    }

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);

    let mut y_ties = 0u64;
    let mut run = 1u64;
    for k in 1..=n {
        if k < n && ys[k] == ys[k - 1] {
            run += 1;
        } else {
            y_ties += pairs(run);
            run = 1;
        }
    }

    if total == x_ties || total == y_ties {
        return Ok(RankCorrelation {
            value: 0.0,
            constant_input: true,
        });
    }
    let numerator = total as i64 - x_ties as i64 - y_ties as i64 + joint_ties as i64 - 2 * discordant as i64;
    let denom = ((total - x_ties) as f64 * (total - y_ties) as f64).sqrt();
    Ok(RankCorrelation {
        value: (numerator as f64 / denom).clamp(-1.0, 1.0),
        constant_input: false,
    })
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Scenes drawn without replacement.
    #[default]
    Subsample,
    /// Classical bootstrap: scenes drawn with replacement.
    WithReplacement,
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    pub fraction: f64,
    pub replicates: usize,
    pub seed: u64,
    pub mode: ResampleMode,
    pub min_support: usize,
    pub aggregation: Aggregation,
}

impl BootstrapOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            fraction: 0.8,
            replicates: 200,
            seed,
            mode: ResampleMode::Subsample,
            min_support: 30,
            aggregation: Aggregation::ObservedMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub replicate_values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub fraction: f64,
    pub replicates: usize,
    pub seed: u64,
    pub mode: ResampleMode,
    pub scenes_per_replicate: usize,
    pub full_nvat: f64,
}

fn scenes_drawn(n_scenes: usize, fraction: f64) -> usize {
    // tolerate representation error such as 0.7 * 10 = 7.000000000000001
    ((fraction * n_scenes as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Scene indices (into the sorted scene list) for replicate `replicate`.
/// Randomness depends only on `(seed, replicate)`.
pub fn replicate_scenes(
    n_scenes: usize,
    fraction: f64,
    mode: ResampleMode,
    seed: u64,
    replicate: usize,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    let k = scenes_drawn(n_scenes, fraction).min(n_scenes);
    let mut picked = match mode {
        ResampleMode::Subsample => index::sample(&mut rng, n_scenes, k).into_vec(),
        ResampleMode::WithReplacement => (0..k).map(|_| rng.random_range(0..n_scenes)).collect(),
    };
    picked.sort_unstable();
    picked
}

/// Rows of `sm` grouped by scene, in sorted scene order.
pub fn rows_by_scene(sm: &ShiftMatrix) -> Vec<(String, Vec<usize>)> {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (r, key) in sm.sample_keys().iter().enumerate() {
        map.entry(key.scene_id.as_str()).or_default().push(r);
    }
    map.into_iter().map(|(s, rows)| (s.to_owned(), rows)).collect()
}

/// Scene-level resampling of nVAT. Every sample of a chosen scene moves
/// with it; shift rows depend only on their own sample, so replicates select
/// rows of the full shift matrix.
pub fn bootstrap_nvat(
    paired: &PairedTable,
    taxonomy: &Taxonomy,
    opts: &BootstrapOptions,
    exec: Execution,
) -> Result<BootstrapResult> {
    if !(opts.fraction > 0.0 && opts.fraction <= 1.0) {
        return Err(RobustnessError::InvalidFraction(opts.fraction).into());
    }
    if opts.replicates == 0 {
        return Err(RobustnessError::NoReplicates.into());
    }
    let sm = build_shift_matrix(paired, taxonomy, opts.aggregation, exec)?;
    let scenes = rows_by_scene(&sm);
    if scenes.len() < 2 {
        return Err(RobustnessError::TooFewScenes(scenes.len()).into());
    }
    let coupling = CouplingOptions {
        min_support: opts.min_support,
        ..Default::default()
    };
    let nvat = |m: &ShiftMatrix| {
        metrics::coupling_matrix_with(m, &coupling, Execution::Serial).map(|r| metrics::system_tax(&r))
    };
    let full_nvat = nvat(&sm)?;

    let values = exec.map(opts.replicates, |b| {
        let picked = replicate_scenes(scenes.len(), opts.fraction, opts.mode, opts.seed, b);
        let rows: Vec<usize> = picked.iter().flat_map(|&s| scenes[s].1.iter().copied()).collect();
        nvat(&sm.select_rows(&rows))
    });
    let replicate_values = values.into_iter().collect::<Result<Vec<_>, _>>()?;
    let w: Welford = replicate_values.iter().copied().collect();
    Ok(BootstrapResult {
        mean: w.mean(),
        std: w.std(),
        replicate_values,
        fraction: opts.fraction,
        replicates: opts.replicates,
        seed: opts.seed,
        mode: opts.mode,
        scenes_per_replicate: scenes_drawn(scenes.len(), opts.fraction).min(scenes.len()),
        full_nvat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub values: Vec<String>,
    pub spearman_based_profile: Vec<f64>,
    pub kendall_based_profile: Vec<f64>,
    /// Correlation used to compare the two profiles.
    pub comparison: CorrelationKind,
    pub rank_agreement: f64,
    /// Either profile is constant, so the agreement is undefined (reported 0).
    pub degenerate: bool,
}

fn compare(kind: CorrelationKind, a: &[f64], b: &[f64]) -> Result<RankCorrelation, MetricsError> {
    match kind {
        CorrelationKind::Spearman => metrics::spearman(a, b),
        CorrelationKind::Kendall => kendall(a, b),
    }
}

/// VAT profiles under Spearman- and Kendall-based coupling, and their rank
/// agreement.
pub fn rank_agreement(
    sm: &ShiftMatrix,
    min_support: usize,
    comparison: CorrelationKind,
    exec: Execution,
) -> Result<AgreementResult> {
    if sm.n_columns() < 2 {
        return Err(RobustnessError::TooFewValues(sm.n_columns()).into());
    }
    let profile = |kind| {
        let opts = CouplingOptions {
            min_support,
            kind,
            strict: false,
        };
        metrics::coupling_matrix_with(sm, &opts, exec).map(|r| metrics::vat_profile(&r))
    };
    let rho = profile(CorrelationKind::Spearman)?;
    let tau = profile(CorrelationKind::Kendall)?;
    let agreement = compare(comparison, &rho, &tau)?;
    Ok(AgreementResult {
        values: sm.columns().to_vec(),
        spearman_based_profile: rho,
        kendall_based_profile: tau,
        comparison,
        rank_agreement: agreement.value,
        degenerate: agreement.constant_input,
    })
}

/// How micro-value VATs are combined into a parent-value VAT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicroAggregation {
    #[default]
    Mean,
    Sum,
    Norm,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CrossGranularityOptions {
    pub min_support: usize,
    pub aggregation: MicroAggregation,
    pub value_aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossGranularityResult {
    pub micro_values: Vec<String>,
    pub micro_profile: Vec<f64>,
    /// Values with at least one observed micro-value.
    pub values: Vec<String>,
    pub aggregated_profile: Vec<f64>,
    pub ten_d_profile: Vec<f64>,
    pub aggregation: MicroAggregation,
    pub rank_correlation: f64,
    pub degenerate: bool,
    pub diagnostics: Vec<String>,
}

/// VAT computed over micro-value trajectories, aggregated to parent values,
/// and rank-correlated with the value-level VAT.
pub fn cross_granularity(
    paired: &PairedTable,
    taxonomy: &Taxonomy,
    opts: &CrossGranularityOptions,
    exec: Execution,
) -> Result<CrossGranularityResult> {
    let coupling = CouplingOptions {
        min_support: opts.min_support,
        ..Default::default()
    };
    let micro_sm = build_micro_shift_matrix(paired, taxonomy, exec)?;
    let micro_r = metrics::coupling_matrix_with(&micro_sm, &coupling, exec)?;
    let micro_profile = metrics::vat_profile(&micro_r);
    let observed: Vec<bool> = (0..micro_sm.n_columns())
        .map(|c| (0..micro_sm.n_samples()).any(|r| micro_sm.get(r, c).is_some()))
        .collect();

    let value_sm = build_shift_matrix(paired, taxonomy, opts.value_aggregation, exec)?;
    let value_r = metrics::coupling_matrix_with(&value_sm, &coupling, exec)?;
    let value_profile = metrics::vat_profile(&value_r);

    let mut values = Vec::new();
    let mut aggregated = Vec::new();
    let mut ten_d = Vec::new();
    let mut diagnostics = Vec::new();
    for (vi, v) in taxonomy.values().iter().enumerate() {
        let members: Vec<f64> = taxonomy
            .micro_values_of(&v.id)?
            .iter()
            .map(|m| taxonomy.micro_index(m).expect("member of taxonomy"))
            .filter(|&mi| observed[mi])
            .map(|mi| micro_profile[mi])
            .collect();
        if members.is_empty() {
            diagnostics.push(format!("value `{}` has no observed micro-values; excluded", v.id));
            continue;
        }
        let agg = match opts.aggregation {
            MicroAggregation::Mean => members.iter().sum::<f64>() / members.len() as f64,
            MicroAggregation::Sum => members.iter().sum(),
            MicroAggregation::Norm => members.iter().map(|x| x * x).sum::<f64>().sqrt(),
        };
        values.push(v.id.0.clone());
        aggregated.push(agg);
        ten_d.push(value_profile[vi]);
    }

    let (rank_correlation, degenerate) = if values.len() < 2 {
        diagnostics.push(format!("only {} value(s) observed; correlation undefined", values.len()));
        (0.0, true)
    } else {
        let r = metrics::spearman(&aggregated, &ten_d)?;
        if r.constant_input {
            diagnostics.push("aggregated or value-level profile is constant".into());
        }
        (r.value, r.constant_input)
    };

    Ok(CrossGranularityResult {
        micro_values: micro_sm.columns().to_vec(),
        micro_profile,
        values,
        aggregated_profile: aggregated,
        ten_d_profile: ten_d,
        aggregation: opts.aggregation,
        rank_correlation,
        degenerate,
        diagnostics,
    })
}
