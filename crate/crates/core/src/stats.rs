//! Small descriptive-statistics helpers shared by the metric modules.

use serde::{Deserialize, Serialize};

/// Fractional ranks (1-based); tied values share the average of their ranks.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation; `None` if either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Mean whose result depends only on the multiset of inputs and flips sign
/// exactly when every input does.
pub fn mean(x: &[f64]) -> Option<f64> {
    (!x.is_empty()).then(|| symmetric_sum(x) / x.len() as f64)
}

/// Sum that is independent of input order and odd under negation: inputs
/// are grouped by magnitude, each group contributes `(#pos - #neg) * |x|`,
/// and groups are added in increasing magnitude.
pub fn symmetric_sum(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut total = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mag = v[i].abs();
        let mut net = 0i64;
        while i < v.len() && v[i].abs() == mag {
            net += match v[i] {
                y if y > 0.0 => 1,
                y if y < 0.0 => -1,
                _ => 0,
            };
            i += 1;
        }
        total += net as f64 * mag;
    }
    total
}

/// Linear-interpolation quantile (the R type-7 / numpy default estimator).
pub fn quantile(x: &[f64], q: f64) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, q))
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Running mean and population standard deviation (Welford). A constant
/// stream yields exactly that constant and a standard deviation of zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0).sqrt()
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::default();
        for x in iter {
            w.push(x);
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(x: &[f64]) -> Option<Self> {
        if x.is_empty() {
            return None;
        }
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        let w: Welford = x.iter().copied().collect();
        Some(Self {
            n: v.len(),
            mean: mean(x).expect("non-empty"),
            std: w.std(),
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), [1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 3.0, 3.0]), [2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn symmetric_sum_is_order_free_and_odd() {
        let x = [0.1, -1.0 / 3.0, 0.7, 1.0 / 3.0, 0.1, 1e-17, -0.7, 0.25];
        let mut rev = x;
        rev.reverse();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(symmetric_sum(&x), symmetric_sum(&rev));
        assert_eq!(symmetric_sum(&neg), -symmetric_sum(&x));
        assert_eq!(symmetric_sum(&[]), 0.0);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.75), Some(3.25));
        assert_eq!(quantile(&[7.0], 0.3), Some(7.0));
    }

    #[test]
    fn welford_constant_stream() {
        let w: Welford = std::iter::repeat(0.1234).take(200).collect();
        assert_eq!(w.mean(), 0.1234);
        assert_eq!(w.std(), 0.0);
        let w: Welford = [1.0, 3.0].into_iter().collect();
        assert_eq!(w.std(), 1.0);
    }

    #[test]
    fn pearson_degenerate() {
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(pearson(&[1.0, 2.0], &[2.0, 4.0]), Some(1.0));
    }
}
