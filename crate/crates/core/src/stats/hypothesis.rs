use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::dist::{chi_square_sf, student_t_two_sided};
use super::StatsError;
use crate::scalar::{from_usize, lit, mean, sample_variance, Real};

/// Two equally long samples whose elements are matched by position.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample<T> {
    ids: Vec<String>,
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Real> PairedSample<T> {
    pub fn new(ids: Vec<String>, a: Vec<T>, b: Vec<T>) -> Result<Self, StatsError> {
        if a.len() != b.len() || ids.len() != a.len() {
            return Err(StatsError::LengthMismatch { ids: ids.len(), a: a.len(), b: b.len() });
        }
        if a.len() < 2 {
            return Err(StatsError::TooFewPairs(a.len()));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(StatsError::DuplicateId(id.clone()));
            }
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(Self { ids, a, b })
    }

    /// Builds a sample with positional ids `"0"`, `"1"`, ...
    pub fn from_values(a: Vec<T>, b: Vec<T>) -> Result<Self, StatsError> {
        let ids = (0..a.len()).map(|i| i.to_string()).collect();
        Self::new(ids, a, b)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// The same pairs with the roles of `a` and `b` exchanged.
    pub fn swapped(&self) -> Self {
        Self { ids: self.ids.clone(), a: self.b.clone(), b: self.a.clone() }
    }

    pub fn differences(&self) -> Vec<T> {
        self.a.iter().zip(&self.b).map(|(&x, &y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult<T> {
    pub statistic: T,
    pub p_value: T,
    pub df: T,
    pub effect_size_d: T,
    pub n: usize,
}

/// How Cohen's d is standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSizeMode {
    /// Mean difference over the standard deviation of the differences.
    Paired,
    /// Difference of means over the pooled standard deviation.
    #[default]
    Pooled,
}

/// Two-sided paired t-test, reporting the pooled Cohen's d.
pub fn paired_t<T: Real>(sample: &PairedSample<T>) -> Result<TestResult<T>, StatsError> {
    paired_t_with(sample, EffectSizeMode::default())
}

pub fn paired_t_with<T: Real>(sample: &PairedSample<T>, mode: EffectSizeMode) -> Result<TestResult<T>, StatsError> {
    let diffs = sample.differences();
    let n = diffs.len();
    let sd = sample_variance(&diffs).sqrt();
    if !(sd > T::zero()) {
        return Err(StatsError::DegenerateSample);
    }
    let nf = from_usize::<T>(n);
    let statistic = mean(&diffs) / (sd / nf.sqrt());
    let df = nf - T::one();
    Ok(TestResult {
        statistic,
        p_value: student_t_two_sided(statistic, df),
        df,
        effect_size_d: cohens_d(sample, mode)?,
        n,
    })
}

pub fn cohens_d<T: Real>(sample: &PairedSample<T>, mode: EffectSizeMode) -> Result<T, StatsError> {
    match mode {
        EffectSizeMode::Paired => {
            let diffs = sample.differences();
            let sd = sample_variance(&diffs).sqrt();
            if !(sd > T::zero()) {
                return Err(StatsError::DegenerateSample);
            }
            Ok(mean(&diffs) / sd)
        }
        EffectSizeMode::Pooled => {
            // equal group sizes: ((n-1)s_a^2 + (n-1)s_b^2) / (2n-2) = (s_a^2 + s_b^2) / 2
            let pooled = ((sample_variance(sample.a()) + sample_variance(sample.b())) / lit(2.0)).sqrt();
            if !(pooled > T::zero()) {
                return Err(StatsError::DegenerateSample);
            }
            Ok((mean(sample.a()) - mean(sample.b())) / pooled)
        }
    }
}

/// Mid-ranks (1-based) of `values`, with tied values sharing the average rank.
/// Also returns the tie term `sum(t^3 - t)` over tie groups.
pub(crate) fn mid_ranks<T: Real>(values: &[T]) -> (Vec<T>, T) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut tie_term = T::zero();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = from_usize::<T>(start + 1 + end) / lit(2.0);
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        let t = from_usize::<T>(end - start);
        tie_term = tie_term + t * t * t - t;
        start = end;
    }
    (ranks, tie_term)
}

/// Kruskal–Wallis H test with tie correction; the p-value comes from the
/// chi-square distribution with `k - 1` degrees of freedom.
pub fn kruskal_wallis<T: Real, G: AsRef<[T]>>(groups: &[G]) -> Result<TestResult<T>, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.as_ref().is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<T> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let total = pooled.len();
    if total < 3 {
        return Err(StatsError::TooFewObservations(total));
    }
    if pooled.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (ranks, tie_term) = mid_ranks(&pooled);
    let nf = from_usize::<T>(total);
    let correction = T::one() - tie_term / (nf * nf * nf - nf);
    if !(correction > T::zero()) {
        return Err(StatsError::AllTied);
    }
    let mut offset = 0;
    let mut weighted = T::zero();
    for g in groups {
        let len = g.as_ref().len();
        let rank_sum = ranks[offset..offset + len].iter().fold(T::zero(), |acc, &r| acc + r);
        weighted = weighted + rank_sum * rank_sum / from_usize(len);
        offset += len;
    }
    let h = lit::<T>(12.0) / (nf * (nf + T::one())) * weighted - lit::<T>(3.0) * (nf + T::one());
    let h = (h / correction).max(T::zero());
    let df = from_usize::<T>(groups.len() - 1);
    Ok(TestResult { statistic: h, p_value: chi_square_sf(h, df), df, effect_size_d: T::zero(), n: total })
}

/// Bonferroni adjustment for `m` comparisons: `min(1, p * m)`.
pub fn bonferroni<T: Real>(p_values: &[T], m: usize) -> Result<Vec<T>, StatsError> {
    if m == 0 || m < p_values.len() {
        return Err(StatsError::ComparisonCount { m, len: p_values.len() });
    }
    let mf = from_usize::<T>(m);
    p_values
        .iter()
        .map(|&p| {
            if !(p >= T::zero() && p <= T::one()) {
                Err(StatsError::InvalidProbability(crate::scalar::to_f64(p)))
            } else {
                Ok((p * mf).min(T::one()))
            }
        })
        .collect()
}
