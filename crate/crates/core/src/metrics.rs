//! Gain, gain-normalized deviation, the value-value coupling matrix, value
//! and system tax, centralization, hubs and amplification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::ShiftMatrix;
use crate::exec::Execution;
use crate::robustness;
use crate::stats::{self, Summary};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("column `{0}` has no observed shifts")]
    EmptyColumn(String),
    #[error("unknown value `{0}`")]
    UnknownValue(String),
    #[error("gain {gain} is within epsilon {epsilon} of zero; GND is not computable")]
    GainNotComputable { gain: f64, epsilon: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("non-finite input")]
    NonFinite,
    #[error("profile component {index} is negative ({value})")]
    NegativeComponent { index: usize, value: f64 },
    #[error("no profiles supplied")]
    EmptyProfiles,
    #[error("{name} = {value} outside (0, 1]")]
    InvalidFraction { name: &'static str, value: f64 },
    #[error("profiles disagree on value list: {0}")]
    ProfileMismatch(String),
    #[error("no hubs supplied")]
    NoHubs,
    #[error("every value is a hub; the non-hub group is empty")]
    AllHubs,
    #[error("hub `{0}` is not a profile value")]
    UnknownHub(String),
    #[error("pair ({u}, {w}) has support {support} below minimum {min_support}")]
    LowSupport {
        u: String,
        w: String,
        support: usize,
        min_support: usize,
    },
    #[error("coupling needs at least 2 values, got {0}")]
    TooFewValues(usize),
}

/// A rank correlation estimate. `constant_input` marks the degenerate case
/// where one side has no variation; the estimate is then 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub value: f64,
    pub constant_input: bool,
}

impl RankCorrelation {
    pub(crate) fn constant() -> Self {
        Self {
            value: 0.0,
            constant_input: true,
        }
    }
}

pub(crate) fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooShort(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    Ok(())
}

/// Spearman's rho: Pearson correlation of average-tie ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<RankCorrelation, MetricsError> {
    check_pair(x, y)?;
    Ok(spearman_ranked(&stats::average_ranks(x), &stats::average_ranks(y)))
}

fn spearman_ranked(rx: &[f64], ry: &[f64]) -> RankCorrelation {
    // identical or exactly reversed rankings are reported as exactly +1/-1
    let top = rx.len() as f64 + 1.0;
    let pearson = stats::pearson(rx, ry).map(|r| {
        if rx == ry {
            1.0
        } else if rx.iter().zip(ry).all(|(a, b)| a + b == top) {
            -1.0
        } else {
            r
        }
    });
    match pearson {
        Some(value) => RankCorrelation {
            value,
            constant_input: false,
        },
        None => RankCorrelation::constant(),
    }
}

fn column_index(sm: &ShiftMatrix, id: &str) -> Result<usize, MetricsError> {
    sm.column_index(id)
        .ok_or_else(|| MetricsError::UnknownValue(id.to_owned()))
}

/// Mean of present entries per column.
pub fn column_means(sm: &ShiftMatrix) -> Vec<Option<f64>> {
    (0..sm.n_columns())
        .map(|c| {
            let present: Vec<f64> = sm.column(c).into_iter().flatten().collect();
            stats::mean(&present)
        })
        .collect()
}

/// Realized on-target gain: mean of the target's present shifts.
pub fn gain(sm: &ShiftMatrix, target: &str) -> Result<f64, MetricsError> {
    let c = column_index(sm, target)?;
    let present: Vec<f64> = sm.column(c).into_iter().flatten().collect();
    stats::mean(&present).ok_or_else(|| MetricsError::EmptyColumn(target.to_owned()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GndEntry {
    pub value: String,
    /// `None` when the value has no observed shifts.
    pub deviation: Option<f64>,
}

/// Gain-normalized deviation: mean shift of every value over |Gain(target)|.
/// The target component is exactly `sign(Gain)`.
pub fn gnd(sm: &ShiftMatrix, target: &str, epsilon_gain: f64) -> Result<Vec<GndEntry>, MetricsError> {
    let t = column_index(sm, target)?;
    let g = gain(sm, target)?;
    if g.abs() <= epsilon_gain {
        return Err(MetricsError::GainNotComputable {
            gain: g,
            epsilon: epsilon_gain,
        });
    }
    Ok(column_means(sm)
        .into_iter()
        .enumerate()
        .map(|(c, m)| GndEntry {
            value: sm.columns()[c].clone(),
            deviation: if c == t { Some(g.signum()) } else { m.map(|m| m / g.abs()) },
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    #[default]
    Spearman,
    Kendall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFlag {
    Ok,
    ConstantVector,
    LowSupport,
}

#[derive(Debug, Clone, Copy)]
pub struct CouplingOptions {
    pub min_support: usize,
    pub kind: CorrelationKind,
    /// Fail on low-support pairs instead of zeroing and flagging them.
    pub strict: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            min_support: 30,
            kind: CorrelationKind::Spearman,
            strict: false,
        }
    }
}

/// Symmetric rank-correlation matrix between value shift trajectories, with a
/// zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub values: Vec<String>,
    pub entries: Vec<Vec<f64>>,
    pub support: Vec<Vec<usize>>,
    pub flags: Vec<Vec<PairFlag>>,
}

impl CouplingMatrix {
    /// Builds a matrix from raw entries; used for synthetic checks. The
    /// diagonal is forced to zero and the upper triangle mirrored.
    pub fn from_entries(values: Vec<String>, mut entries: Vec<Vec<f64>>) -> Self {
        let n = values.len();
        assert!(entries.len() == n && entries.iter().all(|r| r.len() == n), "square matrix");
        for i in 0..n {
            entries[i][i] = 0.0;
            for j in 0..i {
                entries[i][j] = entries[j][i];
            }
        }
        Self {
            values,
            entries,
            support: vec![vec![0; n]; n],
            flags: vec![vec![PairFlag::Ok; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize, MetricsError> {
        self.values
            .iter()
            .position(|v| v == id)
            .ok_or_else(|| MetricsError::UnknownValue(id.to_owned()))
    }

    /// Off-diagonal pairs `(i, j)` with `i < j` carrying `flag`.
    pub fn flagged_pairs(&self, flag: PairFlag) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.flags[i][j] == flag)
            .collect()
    }
}

/// Spearman coupling matrix with lenient support handling.
pub fn coupling_matrix(sm: &ShiftMatrix, min_support: usize) -> CouplingMatrix {
    let opts = CouplingOptions {
        min_support,
        ..Default::default()
    };
    coupling_matrix_with(sm, &opts, Execution::Serial).expect("lenient coupling does not fail")
}

struct PreparedColumn {
    values: Vec<Option<f64>>,
    /// Ranks of the full column when every entry is present.
    full_ranks: Option<Vec<f64>>,
}

/// Pairwise-complete correlation over every unordered pair of columns.
pub fn coupling_matrix_with(
    sm: &ShiftMatrix,
    opts: &CouplingOptions,
    exec: Execution,
) -> Result<CouplingMatrix, MetricsError> {
    let n = sm.n_columns();
    let cols: Vec<PreparedColumn> = exec.map(n, |c| {
        let values = sm.column(c);
        let full_ranks = (opts.kind == CorrelationKind::Spearman && values.iter().all(Option::is_some))
            .then(|| stats::average_ranks(&values.iter().flatten().copied().collect::<Vec<_>>()));
        PreparedColumn { values, full_ranks }
    });
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let min_support = opts.min_support.max(2);

    let results = exec.map(pairs.len(), |p| {
        let (i, j) = pairs[p];
        let (a, b) = (&cols[i], &cols[j]);
        if let (Some(ra), Some(rb)) = (&a.full_ranks, &b.full_ranks) {
            if ra.len() < min_support {
                return (0.0, ra.len(), PairFlag::LowSupport);
            }
            let r = spearman_ranked(ra, rb);
            return finish(r, ra.len());
        }
        let (x, y): (Vec<f64>, Vec<f64>) = a
            .values
            .iter()
            .zip(&b.values)
            .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
            .unzip();
        if x.len() < min_support {
            return (0.0, x.len(), PairFlag::LowSupport);
        }
        let r = match opts.kind {
            CorrelationKind::Spearman => spearman(&x, &y),
            CorrelationKind::Kendall => robustness::kendall(&x, &y),
        }
        .expect("finite pairwise-complete input of length >= 2");
        finish(r, x.len())
    });

    let mut out = CouplingMatrix {
        values: sm.columns().to_vec(),
        entries: vec![vec![0.0; n]; n],
        support: vec![vec![0; n]; n],
        flags: vec![vec![PairFlag::Ok; n]; n],
    };
    for c in 0..n {
        out.support[c][c] = cols[c].values.iter().flatten().count();
    }
    for (&(i, j), (value, support, flag)) in pairs.iter().zip(results) {
        if opts.strict && flag == PairFlag::LowSupport {
            return Err(MetricsError::LowSupport {
                u: out.values[i].clone(),
                w: out.values[j].clone(),
                support,
                min_support: opts.min_support,
            });
        }
        out.entries[i][j] = value;
        out.entries[j][i] = value;
        out.support[i][j] = support;
        out.support[j][i] = support;
        out.flags[i][j] = flag;
        out.flags[j][i] = flag;
    }
    Ok(out)
}

fn finish(r: RankCorrelation, support: usize) -> (f64, usize, PairFlag) {
    if r.constant_input {
        (0.0, support, PairFlag::ConstantVector)
    } else {
        (r.value, support, PairFlag::Ok)
    }
}

/// VAT(u): Euclidean norm of row `u` of the coupling matrix.
pub fn value_tax(r: &CouplingMatrix, u: &str) -> Result<f64, MetricsError> {
    let i = r.index_of(u)?;
    Ok(row_norm(&r.entries[i]))
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// VAT for every value, in matrix order.
pub fn vat_profile(r: &CouplingMatrix) -> Vec<f64> {
    r.entries.iter().map(|row| row_norm(row)).collect()
}

/// nVAT: Frobenius norm of the (zero-diagonal) matrix over sqrt(|V|).
pub fn system_tax(r: &CouplingMatrix) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    let sq: f64 = r.entries.iter().flatten().map(|x| x * x).sum();
    sq.sqrt() / (r.len() as f64).sqrt()
}

/// Gini coefficient of a non-negative profile; 0 for an all-zero profile.
///
/// Uses the sorted form `sum_i (2i - n - 1) x_(i) / (n * sum x)`, which equals
/// the mean-absolute-difference definition.
pub fn centralization(profile: &[f64]) -> Result<f64, MetricsError> {
    for (index, &value) in profile.iter().enumerate() {
        if !value.is_finite() {
            return Err(MetricsError::NonFinite);
        }
        if value < 0.0 {
            return Err(MetricsError::NegativeComponent { index, value });
        }
    }
    let total: f64 = profile.iter().sum();
    if profile.is_empty() || total == 0.0 {
        return Ok(0.0);
    }
    let mut v = profile.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    // pair rank i with rank n-1-i so equal components cancel exactly
    let weighted: f64 = (0..v.len() / 2)
        .map(|i| (n - 1.0 - 2.0 * i as f64) * (v[v.len() - 1 - i] - v[i]))
        .sum();
    Ok((weighted / (n * total)).max(0.0))
}

/// A VAT profile from one alignment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledProfile {
    pub label: String,
    pub values: Vec<String>,
    pub vat: Vec<f64>,
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), MetricsError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidFraction { name, value })
    }
}

fn check_profiles(profiles: &[LabeledProfile]) -> Result<&[String], MetricsError> {
    let first = profiles.first().ok_or(MetricsError::EmptyProfiles)?;
    for p in profiles {
        if p.values != first.values || p.vat.len() != p.values.len() {
            return Err(MetricsError::ProfileMismatch(p.label.clone()));
        }
    }
    Ok(&first.values)
}

/// Values whose VAT lies strictly above the per-profile `quantile` in at
/// least a `persistence` fraction of profiles. Sorted by value id.
pub fn identify_hubs(
    profiles: &[LabeledProfile],
    quantile: f64,
    persistence: f64,
) -> Result<Vec<String>, MetricsError> {
    check_fraction("quantile", quantile)?;
    check_fraction("persistence", persistence)?;
    let values = check_profiles(profiles)?;
    let mut above = vec![0usize; values.len()];
    for p in profiles {
        let threshold = stats::quantile(&p.vat, quantile).ok_or(MetricsError::EmptyProfiles)?;
        for (count, &x) in above.iter_mut().zip(&p.vat) {
            if x > threshold {
                *count += 1;
            }
        }
    }
    let mut hubs: Vec<String> = values
        .iter()
        .zip(above)
        .filter(|&(_, k)| k as f64 / profiles.len() as f64 >= persistence)
        .map(|(v, _)| v.clone())
        .collect();
    hubs.sort();
    Ok(hubs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationReport {
    pub hubs: Vec<String>,
    pub configurations: usize,
    pub hub: Summary,
    pub non_hub: Summary,
    /// Mann-Whitney U of the hub group (average ranks for ties).
    pub u_statistic: f64,
    /// n_hub * n_non_hub / 2, the expectation of U under exchangeability.
    pub u_null_midpoint: f64,
    /// U / (n_hub * n_non_hub): probability a hub VAT exceeds a non-hub VAT.
    pub common_language_effect: f64,
}

/// Pools VAT(v) over configurations and compares hubs against non-hubs.
pub fn amplification_report(
    profiles: &[LabeledProfile],
    hubs: &[String],
) -> Result<AmplificationReport, MetricsError> {
    let values = check_profiles(profiles)?;
    if hubs.is_empty() {
        return Err(MetricsError::NoHubs);
    }
    if let Some(h) = hubs.iter().find(|h| !values.contains(h)) {
        return Err(MetricsError::UnknownHub(h.clone()));
    }
    if values.iter().all(|v| hubs.contains(v)) {
        return Err(MetricsError::AllHubs);
    }
    let (mut hub, mut rest) = (Vec::new(), Vec::new());
    for p in profiles {
        for (v, &x) in p.values.iter().zip(&p.vat) {
            if hubs.contains(v) {
                hub.push(x);
            } else {
                rest.push(x);
            }
        }
    }
    let u = mann_whitney_u(&hub, &rest);
    let (n1, n2) = (hub.len() as f64, rest.len() as f64);
    let mut hubs = hubs.to_vec();
    hubs.sort();
    Ok(AmplificationReport {
        hubs,
        configurations: profiles.len(),
        hub: Summary::of(&hub).expect("non-empty"),
        non_hub: Summary::of(&rest).expect("non-empty"),
        u_statistic: u,
        u_null_midpoint: n1 * n2 / 2.0,
        common_language_effect: u / (n1 * n2),
    })
}

/// U for the first sample: rank sum of `a` in the pooled ranking minus
/// n_a (n_a + 1) / 2.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = stats::average_ranks(&pooled);
    let rank_sum: f64 = ranks[..a.len()].iter().sum();
    let n = a.len() as f64;
    rank_sum - n * (n + 1.0) / 2.0
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub min_support: usize,
    pub epsilon_gain: f64,
    /// Drop the target column before building the coupling matrix.
    pub exclude_target: bool,
    /// Turn degenerate results (low support, near-zero gain) into errors.
    pub strict: bool,
    pub kind: CorrelationKind,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            min_support: 30,
            epsilon_gain: 1e-6,
            exclude_target: false,
            strict: false,
            kind: CorrelationKind::Spearman,
        }
    }
}

/// The full metric stack for one pre/post comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub target: String,
    pub n_samples: usize,
    pub gain: f64,
    /// Absent when the gain is within epsilon of zero.
    pub gnd: Option<Vec<GndEntry>>,
    /// VAT(u) aligned with `coupling.values`.
    pub vat_profile: Vec<f64>,
    pub nvat: f64,
    pub gini: f64,
    pub coupling: CouplingMatrix,
    pub diagnostics: Vec<String>,
}

impl TaxReport {
    pub fn vat_of(&self, value: &str) -> Option<f64> {
        let i = self.coupling.values.iter().position(|v| v == value)?;
        Some(self.vat_profile[i])
    }

    pub fn profile(&self, label: impl Into<String>) -> LabeledProfile {
        LabeledProfile {
            label: label.into(),
            values: self.coupling.values.clone(),
            vat: self.vat_profile.clone(),
        }
    }
}

pub fn tax_report(
    sm: &ShiftMatrix,
    target: &str,
    opts: &ReportOptions,
    exec: Execution,
) -> Result<TaxReport, MetricsError> {
    let t = column_index(sm, target)?;
    let gain_value = gain(sm, target)?;
    let mut diagnostics = Vec::new();

    let gnd_value = match gnd(sm, target, opts.epsilon_gain) {
        Ok(g) => Some(g),
        Err(e @ MetricsError::GainNotComputable { .. }) => {
            if opts.strict {
                return Err(e);
            }
            diagnostics.push(e.to_string());
            None
        }
        Err(e) => return Err(e),
    };

    let coupled = if opts.exclude_target {
        sm.without_column(t)
    } else {
        sm.clone()
    };
    if coupled.n_columns() < 2 {
        return Err(MetricsError::TooFewValues(coupled.n_columns()));
    }
    let coupling = coupling_matrix_with(
        &coupled,
        &CouplingOptions {
            min_support: opts.min_support,
            kind: opts.kind,
            strict: opts.strict,
        },
        exec,
    )?;
    for (flag, what) in [
        (PairFlag::ConstantVector, "constant trajectory"),
        (PairFlag::LowSupport, "support below minimum"),
    ] {
        let pairs = coupling.flagged_pairs(flag);
        if !pairs.is_empty() {
            let names: Vec<String> = pairs
                .iter()
                .take(5)
                .map(|&(i, j)| format!("{}~{}", coupling.values[i], coupling.values[j]))
                .collect();
            diagnostics.push(format!(
                "{} pair(s) zeroed ({what}), e.g. {}",
                pairs.len(),
                names.join(", ")
            ));
        }
    }

    let vat = vat_profile(&coupling);
    let nvat = system_tax(&coupling);
    let gini = centralization(&vat)?;
    Ok(TaxReport {
        label: None,
        target: target.to_owned(),
        n_samples: sm.n_samples(),
        gain: gain_value,
        gnd: gnd_value,
        vat_profile: vat,
        nvat,
        gini,
        coupling,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm(cols: &[(&str, Vec<f64>)]) -> ShiftMatrix {
        ShiftMatrix::from_dense(
            cols.iter().map(|c| c.0.to_string()).collect(),
            cols.iter().map(|c| c.1.clone()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn gain_examples() {
        let m = sm(&[("t", vec![1.0, 0.0, -0.5, 0.5]), ("z", vec![0.0; 4])]);
        assert_eq!(gain(&m, "t").unwrap(), 0.25);
        assert_eq!(gain(&m, "z").unwrap(), 0.0);
        assert!(matches!(gain(&m, "q"), Err(MetricsError::UnknownValue(_))));
        let empty = ShiftMatrix::from_columns(vec!["t".into()], vec![vec![None, None]]).unwrap();
        assert!(matches!(gain(&empty, "t"), Err(MetricsError::EmptyColumn(_))));
    }

    #[test]
    fn gnd_examples() {
        let m = sm(&[("t", vec![0.5, 0.5]), ("o", vec![0.25, 0.25])]);
        let g = gnd(&m, "t", 1e-6).unwrap();
        assert_eq!(g[0].deviation, Some(1.0));
        assert_eq!(g[1].deviation, Some(0.5));

        let m = sm(&[("t", vec![-0.5, -0.5]), ("o", vec![0.25, 0.25])]);
        assert_eq!(gnd(&m, "t", 1e-6).unwrap()[0].deviation, Some(-1.0));

        let m = sm(&[("t", vec![0.5, -0.5]), ("o", vec![0.25, 0.25])]);
        assert!(matches!(gnd(&m, "t", 1e-6), Err(MetricsError::GainNotComputable { .. })));
    }

    #[test]
    fn spearman_examples() {
        let s = |x: &[f64], y: &[f64]| spearman(x, y).unwrap().value;
        assert_eq!(s(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(s(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        // ranks (1, 2.5, 2.5, 4) on both sides
        assert!((s(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 3.0, 4.0]) - 1.0).abs() < 1e-15);
        let c = spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(c.constant_input);
        assert_eq!(c.value, 0.0);
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(MetricsError::TooShort(1))));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn coupling_identical_and_periodic() {
        let a = vec![0.5, -0.5, 1.0, 0.0, 0.5, -1.0];
        let m = sm(&[("a", a.clone()), ("b", a)]);
        let r = coupling_matrix(&m, 2);
        assert_eq!(r.entries[0][1], 1.0);
        assert_eq!(r.entries[0][0], 0.0);

        // (+,-,+,-,...) against (+,+,-,-,...): half the sign agreements match.
        let k = 5;
        let x: Vec<f64> = (0..4 * k).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let y: Vec<f64> = (0..4 * k).map(|i| if i % 4 < 2 { 0.5 } else { -0.5 }).collect();
        let r = coupling_matrix(&sm(&[("x", x), ("y", y)]), 2);
        assert_eq!(r.entries[0][1], 0.0);
        assert_eq!(r.flags[0][1], PairFlag::Ok);
    }

    #[test]
    fn coupling_constant_and_low_support() {
        let m = sm(&[("a", vec![0.5; 6]), ("b", vec![0.5; 6]), ("c", vec![0.0; 6])]);
        let r = coupling_matrix(&m, 2);
        assert_eq!(r.flagged_pairs(PairFlag::ConstantVector).len(), 3);
        assert!(r.entries.iter().flatten().all(|&x| x == 0.0));

        let m = ShiftMatrix::from_columns(
            vec!["a".into(), "b".into()],
            vec![
                vec![Some(1.0), Some(0.5), None, Some(0.0)],
                vec![Some(1.0), None, Some(0.5), Some(0.0)],
            ],
        )
        .unwrap();
        let r = coupling_matrix(&m, 3);
        assert_eq!(r.support[0][1], 2);
        assert_eq!(r.flags[0][1], PairFlag::LowSupport);
        let strict = CouplingOptions {
            min_support: 3,
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            coupling_matrix_with(&m, &strict, Execution::Serial),
            Err(MetricsError::LowSupport { support: 2, .. })
        ));
        let r = coupling_matrix(&m, 2);
        assert_eq!(r.entries[0][1], 1.0);
    }

    #[test]
    fn tax_examples() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let r = CouplingMatrix::from_entries(ids.clone(), vec![vec![0.0; 3]; 3]);
        assert_eq!(value_tax(&r, "a").unwrap(), 0.0);
        assert_eq!(system_tax(&r), 0.0);

        let r = CouplingMatrix::from_entries(
            ids.clone(),
            vec![vec![0.0, 0.3, 0.4], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
        );
        assert!((value_tax(&r, "a").unwrap() - 0.5).abs() < 1e-15);
        let r = CouplingMatrix::from_entries(ids, vec![vec![0.0, 0.6, 0.0], vec![0.0; 3], vec![0.0; 3]]);
        assert_eq!(value_tax(&r, "a").unwrap(), 0.6);
        assert!(matches!(value_tax(&r, "zz"), Err(MetricsError::UnknownValue(_))));
    }

    #[test]
    fn gini_examples() {
        assert_eq!(centralization(&[0.3; 10]).unwrap(), 0.0);
        let mut one_hot = vec![0.0; 10];
        one_hot[0] = 1.0;
        assert_eq!(centralization(&one_hot).unwrap(), 0.9);
        assert_eq!(centralization(&[0.0; 10]).unwrap(), 0.0);
        assert!(matches!(
            centralization(&[0.1, -0.2]),
            Err(MetricsError::NegativeComponent { index: 1, .. })
        ));
    }

    fn profile(label: &str, vat: &[f64]) -> LabeledProfile {
        LabeledProfile {
            label: label.into(),
            values: (0..vat.len()).map(|i| format!("v{i}")).collect(),
            vat: vat.to_vec(),
        }
    }

    #[test]
    fn hubs() {
        let p = [profile("one", &[0.1, 0.2, 0.3, 0.9])];
        assert_eq!(identify_hubs(&p, 0.75, 0.75).unwrap(), vec!["v3".to_string()]);

        let hot = [0.1, 0.2, 0.3, 0.9];
        let cold = [0.9, 0.2, 0.3, 0.1];
        let ps = [profile("a", &hot), profile("b", &hot), profile("c", &cold), profile("d", &cold)];
        // v3 is above threshold in 2 of 4 configs
        assert!(!identify_hubs(&ps, 0.75, 0.75).unwrap().contains(&"v3".to_string()));
        assert_eq!(identify_hubs(&ps, 0.75, 0.5).unwrap(), vec!["v0".to_string(), "v3".to_string()]);
        assert!(matches!(identify_hubs(&[], 0.75, 0.75), Err(MetricsError::EmptyProfiles)));
        assert!(identify_hubs(&ps, 0.0, 0.75).is_err());
    }

    #[test]
    fn amplification() {
        let p = [profile("a", &[0.8, 0.9, 0.1, 0.2])];
        let hubs = vec!["v0".to_string(), "v1".to_string()];
        let rep = amplification_report(&p, &hubs).unwrap();
        assert!((rep.hub.mean - 0.85).abs() < 1e-15);
        assert!((rep.non_hub.mean - 0.15).abs() < 1e-15);
        assert_eq!(rep.u_statistic, 4.0);

        let all: Vec<String> = (0..4).map(|i| format!("v{i}")).collect();
        assert!(matches!(amplification_report(&p, &all), Err(MetricsError::AllHubs)));
        assert!(matches!(
            amplification_report(&p, &["zz".to_string()]),
            Err(MetricsError::UnknownHub(_))
        ));
    }

    #[test]
    fn mann_whitney_identical_distributions_hit_midpoint() {
        // Oracle: U counts pairs (a, b) with a > b, plus one half per tie.
        let a = [0.5, 0.7];
        let b = [0.5, 0.7];
        let brute: f64 = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
            .sum();
        assert_eq!(brute, 2.0);
        assert_eq!(mann_whitney_u(&a, &b), brute);
        assert_eq!(mann_whitney_u(&a, &b), 2.0 * 2.0 / 2.0);
    }
}
