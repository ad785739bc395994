//! Likert answers to signed evidence, per-sample value scores, and the
//! post-minus-pre [`ShiftMatrix`].
//!
//! Evidence lives on the half-step grid {-1, -0.5, 0, 0.5, 1}. Internally it is
//! kept as integer half-steps so that sums over micro-values are exact and a
//! shift entry is produced by a single floating-point division.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dataset::{PairedJudgment, PairedTable};
use crate::exec::Execution;
use crate::taxonomy::{MicroValueId, Taxonomy, TaxonomyError, ValueId};

#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("likert response {0} outside 1..=5")]
    LikertOutOfRange(i64),
    #[error("polarity {0} is not +1 or -1")]
    InvalidPolarity(i64),
    #[error("micro-value `{micro}` does not belong to value `{value}`")]
    NotInValue { micro: String, value: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("shift matrix shape mismatch: {0}")]
    Shape(String),
    #[error("shift entry {0} outside [-2, 2]")]
    EntryOutOfRange(f64),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Whether an action supports (+1) or violates (-1) a micro-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Support,
    Violate,
}

impl Polarity {
    pub fn from_sign(sign: i64) -> Result<Self, EvidenceError> {
        match sign {
            1 => Ok(Polarity::Support),
            -1 => Ok(Polarity::Violate),
            other => Err(EvidenceError::InvalidPolarity(other)),
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Polarity::Support => 1,
            Polarity::Violate => -1,
        }
    }
}

impl Serialize for Polarity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign())
    }
}

impl<'de> Deserialize<'de> for Polarity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = i64::deserialize(d)?;
        Polarity::from_sign(raw).map_err(serde::de::Error::custom)
    }
}

/// A validated Likert answer in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Likert(u8);

impl Likert {
    pub fn new(r: i64) -> Result<Self, EvidenceError> {
        if (1..=5).contains(&r) {
            Ok(Likert(r as u8))
        } else {
            Err(EvidenceError::LikertOutOfRange(r))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Inverse of [`likert_to_evidence`].
    pub fn from_evidence(e: Evidence) -> Self {
        Likert((e.half_steps() + 3) as u8)
    }
}

impl<'de> Deserialize<'de> for Likert {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = i64::deserialize(d)?;
        Likert::new(raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Likert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One of the five centered evidence levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Evidence(i8);

impl Evidence {
    pub const LEVELS: [Evidence; 5] = [Evidence(-2), Evidence(-1), Evidence(0), Evidence(1), Evidence(2)];

    pub fn from_half_steps(h: i8) -> Option<Self> {
        (-2..=2).contains(&h).then_some(Evidence(h))
    }

    pub fn half_steps(self) -> i8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    fn signed(self, p: Polarity) -> Self {
        Evidence(self.0 * p.sign())
    }
}

/// phi(r): 1 -> -1, 2 -> -0.5, 3 -> 0, 4 -> 0.5, 5 -> 1.
pub fn likert_to_evidence(r: i64) -> Result<Evidence, EvidenceError> {
    Likert::new(r).map(likert_evidence)
}

pub fn likert_evidence(r: Likert) -> Evidence {
    Evidence(r.0 as i8 - 3)
}

/// sigma * phi(r).
pub fn signed_evidence(polarity: Polarity, r: i64) -> Result<Evidence, EvidenceError> {
    likert_to_evidence(r).map(|e| e.signed(polarity))
}

fn signed(p: Polarity, r: Likert) -> i32 {
    i32::from(likert_evidence(r).signed(p).0)
}

/// How a value score is normalized when only part of U(v) is observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean over the observed micro-values of the value.
    #[default]
    ObservedMean,
    /// Sum divided by |U(v)| regardless of coverage.
    FullDenominator,
}

/// Aggregated value score of one sample under one condition. `None` when no
/// micro-value of `v` was observed.
pub fn value_score(
    judgments: &[(MicroValueId, Polarity, Likert)],
    taxonomy: &Taxonomy,
    v: &ValueId,
    aggregation: Aggregation,
) -> Result<Option<f64>, EvidenceError> {
    let members = taxonomy.micro_values_of(v)?;
    let mut sum = 0i32;
    for (m, p, r) in judgments {
        if !members.contains(m) {
            return Err(EvidenceError::NotInValue {
                micro: m.0.clone(),
                value: v.0.clone(),
            });
        }
        sum += signed(*p, *r);
    }
    if judgments.is_empty() {
        return Ok(None);
    }
    let denom = match aggregation {
        Aggregation::ObservedMean => judgments.len(),
        Aggregation::FullDenominator => members.len(),
    };
    Ok(Some(f64::from(sum) / (2 * denom) as f64))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub scene_id: String,
    pub action_id: String,
}

/// Per-sample, per-column shifts. Columns are values (or micro-values for the
/// cross-granularity path); rows are sorted by sample key.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMatrix {
    sample_keys: Vec<SampleKey>,
    columns: Vec<String>,
    entries: Vec<Option<f64>>,
    coverage: Vec<u32>,
}

impl ShiftMatrix {
    /// Builds a matrix from explicit columns. Row keys are `s0000, s0001, ...`
    /// with a single action each; coverage is 1 wherever an entry exists.
    pub fn from_columns(
        columns: Vec<String>,
        data: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, EvidenceError> {
        if columns.len() != data.len() {
            return Err(EvidenceError::Shape(format!(
                "{} column names for {} columns",
                columns.len(),
                data.len()
            )));
        }
        let n = data.first().map_or(0, Vec::len);
        if data.iter().any(|c| c.len() != n) {
            return Err(EvidenceError::Shape("ragged columns".into()));
        }
        let keys = (0..n)
            .map(|i| SampleKey {
                scene_id: format!("s{i:04}"),
                action_id: "a0".into(),
            })
            .collect();
        let mut entries = Vec::with_capacity(n * columns.len());
        for r in 0..n {
            for col in &data {
                let e = col[r];
                if let Some(x) = e {
                    if !x.is_finite() || x.abs() > 2.0 {
                        return Err(EvidenceError::EntryOutOfRange(x));
                    }
                }
                entries.push(e);
            }
        }
        let coverage = entries.iter().map(|e| u32::from(e.is_some())).collect();
        Ok(Self {
            sample_keys: keys,
            columns,
            entries,
            coverage,
        })
    }

    /// Convenience for fully observed columns.
    pub fn from_dense(columns: Vec<String>, data: Vec<Vec<f64>>) -> Result<Self, EvidenceError> {
        let data = data
            .into_iter()
            .map(|c| c.into_iter().map(Some).collect())
            .collect();
        Self::from_columns(columns, data)
    }

    pub fn sample_keys(&self) -> &[SampleKey] {
        &self.sample_keys
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_samples(&self) -> usize {
        self.sample_keys.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == id)
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.entries[row * self.columns.len() + col]
    }

    pub fn coverage(&self, row: usize, col: usize) -> u32 {
        self.coverage[row * self.columns.len() + col]
    }

    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_samples()).map(|r| self.get(r, col)).collect()
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let w = self.columns.len();
        &self.entries[row * w..(row + 1) * w]
    }

    /// New matrix holding the given rows in the given order (rows may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let w = self.columns.len();
        let mut out = Self {
            sample_keys: Vec::with_capacity(rows.len()),
            columns: self.columns.clone(),
            entries: Vec::with_capacity(rows.len() * w),
            coverage: Vec::with_capacity(rows.len() * w),
        };
        for &r in rows {
            out.sample_keys.push(self.sample_keys[r].clone());
            out.entries.extend_from_slice(&self.entries[r * w..(r + 1) * w]);
            out.coverage.extend_from_slice(&self.coverage[r * w..(r + 1) * w]);
        }
        out
    }

    /// Drops a column, e.g. to exclude the target from the coupling matrix.
    pub fn without_column(&self, col: usize) -> Self {
        let keep: Vec<usize> = (0..self.n_columns()).filter(|&c| c != col).collect();
        let mut out = Self {
            sample_keys: self.sample_keys.clone(),
            columns: keep.iter().map(|&c| self.columns[c].clone()).collect(),
            entries: Vec::with_capacity(self.n_samples() * keep.len()),
            coverage: Vec::with_capacity(self.n_samples() * keep.len()),
        };
        for r in 0..self.n_samples() {
            for &c in &keep {
                out.entries.push(self.get(r, c));
                out.coverage.push(self.coverage(r, c));
            }
        }
        out
    }

    /// Every entry multiplied by `factor`. Intended for invariance checks.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in out.entries.iter_mut().flatten() {
            *e *= factor;
        }
        out
    }

    fn write_grid<W: Write, F>(&self, w: W, cell: F) -> Result<(), EvidenceError>
    where
        F: Fn(usize, usize) -> String,
    {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["scene_id".to_owned(), "action_id".to_owned()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header)?;
        for (r, key) in self.sample_keys.iter().enumerate() {
            let mut rec = vec![key.scene_id.clone(), key.action_id.clone()];
            rec.extend((0..self.n_columns()).map(|c| cell(r, c)));
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// `scene_id,action_id,<columns...>`; absent entries are empty cells.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvidenceError> {
        self.write_grid(w, |r, c| self.get(r, c).map(|x| x.to_string()).unwrap_or_default())
    }

    pub fn write_coverage_csv<W: Write>(&self, w: W) -> Result<(), EvidenceError> {
        self.write_grid(w, |r, c| self.coverage(r, c).to_string())
    }
}

/// delta_s(v) for every sample and value, columns in taxonomy order.
pub fn build_shift_matrix(
    paired: &PairedTable,
    taxonomy: &Taxonomy,
    aggregation: Aggregation,
    exec: Execution,
) -> Result<ShiftMatrix, EvidenceError> {
    let columns: Vec<String> = taxonomy.values().iter().map(|v| v.id.0.clone()).collect();
    let denominators: Vec<usize> = taxonomy
        .values()
        .iter()
        .map(|v| match aggregation {
            Aggregation::ObservedMean => 0,
            Aggregation::FullDenominator => taxonomy.micro_values_of(&v.id).map_or(1, <[_]>::len),
        })
        .collect();
    build_grouped(paired, columns, &denominators, exec, |m| taxonomy.parent_index(m))
}

/// Micro-value granularity: one column per micro-value, entry = e_post - e_pre.
pub fn build_micro_shift_matrix(
    paired: &PairedTable,
    taxonomy: &Taxonomy,
    exec: Execution,
) -> Result<ShiftMatrix, EvidenceError> {
    let columns: Vec<String> = taxonomy.micro_values().iter().map(|m| m.id.0.clone()).collect();
    let denominators = vec![0; columns.len()];
    build_grouped(paired, columns, &denominators, exec, |m| taxonomy.micro_index(m))
}

/// `denominators[c] == 0` means "divide by observed count".
fn build_grouped<F>(
    paired: &PairedTable,
    columns: Vec<String>,
    denominators: &[usize],
    exec: Execution,
    column_of: F,
) -> Result<ShiftMatrix, EvidenceError>
where
    F: Fn(&MicroValueId) -> Result<usize, TaxonomyError> + Sync,
{
    let samples = paired.samples();
    // Samples are sorted by (scene, action, micro-value): rows are contiguous runs.
    let mut bounds = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        if i == samples.len() || !same_sample(&samples[i - 1], &samples[i]) {
            if i > start {
                bounds.push((start, i));
            }
            start = i;
        }
    }

    let width = columns.len();
    let rows = exec.map(bounds.len(), |b| {
        let (lo, hi) = bounds[b];
        let mut pre = vec![0i32; width];
        let mut post = vec![0i32; width];
        let mut count = vec![0u32; width];
        for j in &samples[lo..hi] {
            let c = column_of(&j.micro_value)?;
            pre[c] += signed(j.polarity, j.likert_pre);
            post[c] += signed(j.polarity, j.likert_post);
            count[c] += 1;
        }
        let entries: Vec<Option<f64>> = (0..width)
            .map(|c| {
                (count[c] > 0).then(|| {
                    let denom = if denominators[c] == 0 {
                        count[c] as usize
                    } else {
                        denominators[c]
                    };
                    f64::from(post[c] - pre[c]) / (2 * denom) as f64
                })
            })
            .collect();
        Ok::<_, TaxonomyError>((entries, count))
    });

    let mut out = ShiftMatrix {
        sample_keys: Vec::with_capacity(bounds.len()),
        columns,
        entries: Vec::with_capacity(bounds.len() * width),
        coverage: Vec::with_capacity(bounds.len() * width),
    };
    for (&(lo, _), row) in bounds.iter().zip(rows) {
        let (entries, count) = row?;
        out.sample_keys.push(SampleKey {
            scene_id: samples[lo].scene_id.clone(),
            action_id: samples[lo].action_id.clone(),
        });
        out.entries.extend(entries);
        out.coverage.extend(count);
    }
    Ok(out)
}

fn same_sample(a: &PairedJudgment, b: &PairedJudgment) -> bool {
    a.scene_id == b.scene_id && a.action_id == b.action_id
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_grid() {
        let got: Vec<f64> = (1..=5).map(|r| likert_to_evidence(r).unwrap().value()).collect();
        assert_eq!(got, [-1.0, -0.5, 0.0, 0.5, 1.0]);
        for r in 1..=5 {
            let a = likert_to_evidence(r).unwrap().value();
            let b = likert_to_evidence(6 - r).unwrap().value();
            assert_eq!(a + b, 0.0);
        }
        assert!(likert_to_evidence(0).is_err());
        assert!(likert_to_evidence(6).is_err());
    }

    #[test]
    fn signed_examples() {
        assert_eq!(signed_evidence(Polarity::Support, 5).unwrap().value(), 1.0);
        assert_eq!(signed_evidence(Polarity::Violate, 5).unwrap().value(), -1.0);
        assert_eq!(signed_evidence(Polarity::Violate, 3).unwrap().value(), 0.0);
        assert!(Polarity::from_sign(0).is_err());
    }

    #[test]
    fn likert_inverse() {
        for e in Evidence::LEVELS {
            assert_eq!(likert_evidence(Likert::from_evidence(e)), e);
        }
    }

    fn lk(r: i64) -> Likert {
        Likert::new(r).unwrap()
    }

    #[test]
    fn value_score_means() {
        let t = Taxonomy::default_schwartz();
        let v = ValueId::from("security");
        let m = t.micro_values_of(&v).unwrap().to_vec();
        let s = |js: &[(usize, i64)]| {
            let js: Vec<_> = js.iter().map(|&(i, r)| (m[i].clone(), Polarity::Support, lk(r))).collect();
            value_score(&js, &t, &v, Aggregation::ObservedMean).unwrap()
        };
        assert_eq!(s(&[(0, 5), (1, 4)]), Some(0.75));
        assert_eq!(s(&[(0, 2)]), Some(-0.5));
        assert_eq!(s(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]), Some(0.0));
        assert_eq!(s(&[]), None);

        // security owns 6 micro-values in the default taxonomy
        let js = vec![(m[0].clone(), Polarity::Support, lk(5))];
        let full = value_score(&js, &t, &v, Aggregation::FullDenominator).unwrap();
        assert_eq!(full, Some(1.0 / 6.0));
    }

    #[test]
    fn value_score_rejects_foreign_micro() {
        let t = Taxonomy::default_schwartz();
        let js = vec![(MicroValueId::from("power_01"), Polarity::Support, lk(3))];
        let err = value_score(&js, &t, &"security".into(), Aggregation::ObservedMean).unwrap_err();
        assert!(matches!(err, EvidenceError::NotInValue { .. }));
    }

    #[test]
    fn from_columns_validates() {
        assert!(ShiftMatrix::from_dense(vec!["a".into()], vec![vec![2.5]]).is_err());
        assert!(ShiftMatrix::from_dense(vec!["a".into(), "b".into()], vec![vec![1.0], vec![]]).is_err());
        let m = ShiftMatrix::from_dense(vec!["a".into(), "b".into()], vec![vec![1.0, 0.5], vec![0.0, -1.0]]).unwrap();
        assert_eq!(m.get(1, 1), Some(-1.0));
        assert_eq!(m.column(0), vec![Some(1.0), Some(0.5)]);
    }

    #[test]
    fn csv_export_has_empty_cells_for_absent() {
        let m = ShiftMatrix::from_columns(
            vec!["a".into(), "b".into()],
            vec![vec![Some(0.5), None], vec![Some(-0.25), Some(1.0)]],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "scene_id,action_id,a,b\ns0000,a0,0.5,-0.25\ns0001,a0,,1\n"
        );
        let mut buf = Vec::new();
        m.write_coverage_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scene_id,action_id,a,b\ns0000,a0,1,1\ns0001,a0,0,1\n");
    }
}
