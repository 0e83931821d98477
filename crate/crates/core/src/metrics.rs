//! Group fairness metrics for a binary sensitive attribute, and the
//! error-rate/calibration incompatibility under unequal base rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::map_indexed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("{column} value {value} at row {row} is not 0 or 1")]
    NonBinaryColumn {
        column: &'static str,
        row: usize,
        value: f64,
    },
    #[error("group {0} has no records")]
    EmptyGroup(u8),
    #[error("columns have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("group {0} lacks positive or negative labels")]
    DegenerateLabels(u8),
    #[error("group {0} has no positive predictions")]
    NoPositivePredictions(u8),
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("score {value} at row {row} is outside [0, 1]")]
    ScoreOutOfRange { row: usize, value: f64 },
    #[error("{name} = {value} is outside [0, 1]")]
    RateOutOfRange { name: &'static str, value: f64 },
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("denominator tpr*base + fpr*(1-base) is zero")]
    ZeroDenominator,
}

/// Confusion counts of one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Counts {
    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn base_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fn_, self.n())
    }

    pub fn positive_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.n())
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn fnr(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tp)
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.fn_ + self.tp)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
}

/// Confusion counts for groups 0 and 1. Rates are always derived from the
/// counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupedCounts {
    pub groups: [Counts; 2],
}

impl GroupedCounts {
    pub fn new(group0: Counts, group1: Counts) -> Self {
        GroupedCounts {
            groups: [group0, group1],
        }
    }

    fn nonempty(&self) -> Result<(), MetricError> {
        for g in 0..2 {
            if self.groups[g].n() == 0 {
                return Err(MetricError::EmptyGroup(g as u8));
            }
        }
        Ok(())
    }

    fn rates(
        &self,
        f: impl Fn(&Counts) -> Option<f64>,
        err: impl Fn(u8) -> MetricError,
    ) -> Result<[f64; 2], MetricError> {
        self.nonempty()?;
        let r0 = f(&self.groups[0]).ok_or_else(|| err(0))?;
        let r1 = f(&self.groups[1]).ok_or_else(|| err(1))?;
        Ok([r0, r1])
    }
}

fn binary(column: &'static str, values: &[f64]) -> Result<(), MetricError> {
    for (row, &value) in values.iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(MetricError::NonBinaryColumn {
                column,
                row: row + 1,
                value,
            });
        }
    }
    Ok(())
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Exact confusion counts from binary group, label and prediction columns.
pub fn confusion(
    group: &[f64],
    label: &[f64],
    prediction: &[f64],
) -> Result<GroupedCounts, MetricError> {
    same_len(group, label)?;
    same_len(group, prediction)?;
    binary("group", group)?;
    binary("label", label)?;
    binary("prediction", prediction)?;
    let mut c = GroupedCounts::default();
    for ((&g, &y), &p) in group.iter().zip(label).zip(prediction) {
        let k = &mut c.groups[g as usize];
        match (y == 1.0, p == 1.0) {
            (true, true) => k.tp += 1,
            (false, true) => k.fp += 1,
            (false, false) => k.tn += 1,
            (true, false) => k.fn_ += 1,
        }
    }
    c.nonempty()?;
    Ok(c)
}

/// Thresholds scores strictly (`r > threshold`) and counts.
pub fn confusion_from_scores(
    group: &[f64],
    label: &[f64],
    scores: &[f64],
    threshold: f64,
) -> Result<GroupedCounts, MetricError> {
    let pred: Vec<f64> = scores
        .iter()
        .map(|&r| (r > threshold) as u8 as f64)
        .collect();
    confusion(group, label, &pred)
}

/// Per-group values of a rate and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupGap {
    pub group0: f64,
    pub group1: f64,
    /// `group0 - group1`
    pub signed: f64,
    pub gap: f64,
}

impl GroupGap {
    fn of([a, b]: [f64; 2]) -> Self {
        GroupGap {
            group0: a,
            group1: b,
            signed: a - b,
            gap: (a - b).abs(),
        }
    }
}

/// `|P(Yhat = 1 | A = 0) - P(Yhat = 1 | A = 1)|`.
pub fn demographic_parity(c: &GroupedCounts) -> Result<GroupGap, MetricError> {
    Ok(GroupGap::of(
        c.rates(Counts::positive_rate, MetricError::EmptyGroup)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRateGaps {
    pub fpr: GroupGap,
    pub fnr: GroupGap,
}

pub fn error_rate_parity(c: &GroupedCounts) -> Result<ErrorRateGaps, MetricError> {
    Ok(ErrorRateGaps {
        fpr: GroupGap::of(c.rates(Counts::fpr, MetricError::DegenerateLabels)?),
        fnr: GroupGap::of(c.rates(Counts::fnr, MetricError::DegenerateLabels)?),
    })
}

/// `P(Y = 1 | Yhat = 1, A = g)` per group.
pub fn predictive_parity(c: &GroupedCounts) -> Result<GroupGap, MetricError> {
    Ok(GroupGap::of(
        c.rates(Counts::ppv, MetricError::NoPositivePredictions)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub rates: GroupGap,
}

/// Demographic-parity gap of the thresholded scores at every threshold.
pub fn dp_gap_curve(
    scores0: &[f64],
    scores1: &[f64],
    thresholds: &[f64],
) -> Result<Vec<CurvePoint>, MetricError> {
    if scores0.is_empty() {
        return Err(MetricError::EmptyGroup(0));
    }
    if scores1.is_empty() {
        return Err(MetricError::EmptyGroup(1));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(MetricError::UnsortedThresholds);
    }
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (s0, s1) = (sorted(scores0), sorted(scores1));
    let above =
        |s: &[f64], t: f64| (s.len() - s.partition_point(|&r| r <= t)) as f64 / s.len() as f64;
    Ok(map_indexed(thresholds.len(), |k| {
        let t = thresholds[k];
        CurvePoint {
            threshold: t,
            rates: GroupGap::of([above(&s0, t), above(&s1, t)]),
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: [u64; 2],
    /// Empirical `P(Y = 1 | bin, group)`, absent for empty cells.
    pub rate: [Option<f64>; 2],
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTable {
    pub bins: Vec<CalibrationBin>,
    pub max_gap: Option<f64>,
    /// Bins left out of `max_gap` because a group has no scores there.
    pub excluded: Vec<usize>,
}

/// Equal-width binning of `[0, 1]`; the last bin is closed on the right.
pub fn calibration_check(
    group: &[f64],
    label: &[f64],
    scores: &[f64],
    bins: usize,
) -> Result<CalibrationTable, MetricError> {
    if bins == 0 {
        return Err(MetricError::NoBins);
    }
    same_len(group, label)?;
    same_len(group, scores)?;
    binary("group", group)?;
    binary("label", label)?;
    let mut count = vec![[0u64; 2]; bins];
    let mut pos = vec![[0u64; 2]; bins];
    for (row, ((&g, &y), &r)) in group.iter().zip(label).zip(scores).enumerate() {
        if !(0.0..=1.0).contains(&r) {
            return Err(MetricError::ScoreOutOfRange {
                row: row + 1,
                value: r,
            });
        }
        let b = ((r * bins as f64) as usize).min(bins - 1);
        count[b][g as usize] += 1;
        pos[b][g as usize] += (y == 1.0) as u64;
    }
    let mut table = CalibrationTable {
        bins: Vec::with_capacity(bins),
        max_gap: None,
        excluded: Vec::new(),
    };
    for b in 0..bins {
        let rate = [ratio(pos[b][0], count[b][0]), ratio(pos[b][1], count[b][1])];
        let gap = match rate {
            [Some(a), Some(c)] => Some((a - c).abs()),
            _ => None,
        };
        match gap {
            Some(g) => table.max_gap = Some(table.max_gap.map_or(g, |m: f64| m.max(g))),
            None => table.excluded.push(b),
        }
        table.bins.push(CalibrationBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            count: count[b],
            rate,
            gap,
        });
    }
    Ok(table)
}

fn unit(name: &'static str, value: f64) -> Result<(), MetricError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(MetricError::RateOutOfRange { name, value })
    }
}

/// Positive predictive value implied by a true-positive rate, a
/// false-positive rate and a base rate.
pub fn ppv_from_rates(tpr: f64, fpr: f64, base: f64) -> Result<f64, MetricError> {
    unit("tpr", tpr)?;
    unit("fpr", fpr)?;
    unit("base", base)?;
    let num = tpr * base;
    let den = num + fpr * (1.0 - base);
    if den == 0.0 {
        return Err(MetricError::ZeroDenominator);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub compatible: bool,
    pub ppv: [f64; 2],
}

/// Whether two groups sharing error rates can also share PPV.
pub fn incompatibility_witness(
    tpr: f64,
    fpr: f64,
    base0: f64,
    base1: f64,
) -> Result<Witness, MetricError> {
    let ppv = [
        ppv_from_rates(tpr, fpr, base0)?,
        ppv_from_rates(tpr, fpr, base1)?,
    ];
    Ok(Witness {
        compatible: (ppv[0] - ppv[1]).abs() <= 1e-12,
        ppv,
    })
}
