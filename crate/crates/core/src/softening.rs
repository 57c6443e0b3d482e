//! Label softening: turn quantized per-document reading levels into
//! real-valued per-sentence regression labels.
//!
//! For the set of sentences at one reading level `l`, negate their FKGLs so
//! higher means simpler, rescale that set to `[0, 2]`:
//!
//! ```text
//! f_i  = -fkgl(x_i)
//! f'_i = 2 * (f_i - min f) / (max f - min f)
//! ```
//!
//! then recenter around the level:
//!
//! ```text
//! l'_i = f'_i - mean(f') + l
//! ```
//!
//! The `[0, 2]` scaling gives each level's labels a +-1 spread that overlaps
//! adjacent levels, and subtracting the mean keeps `mean(l') = l` exactly.
//! Extreme FKGL outliers are dropped beforehand: members below the `lo`-th or
//! above the `hi`-th percentile of their group's FKGL distribution are
//! excluded from the output entirely (defaults 1 and 99).
//!
//! Percentiles use the nearest-rank convention: the low threshold is the
//! sorted value at 0-based index `floor(n*lo/100)`, the high threshold the
//! value at `ceil(n*hi/100) - 1`. Members tied with a threshold survive, so a
//! group never empties.

use crate::corpus::SentenceRecord;
use crate::error::{Error, Result};
use crate::readability;

/// One sentence with its raw FKGL, as softening sees it.
#[derive(Debug, Clone)]
pub struct ScoredSentence {
    pub record: SentenceRecord,
    pub raw_fkgl: f64,
}

/// All sentences of one reading level.
#[derive(Debug, Clone)]
pub struct LevelGroup {
    pub level: u8,
    pub members: Vec<ScoredSentence>,
}

/// Softening parameters. `filter = false` skips the percentile exclusion;
/// `global_percentiles = true` computes the thresholds over the whole corpus
/// instead of per level group.
#[derive(Debug, Clone)]
pub struct SoftenOptions {
    pub lo: f64,
    pub hi: f64,
    pub filter: bool,
    pub global_percentiles: bool,
}

impl Default for SoftenOptions {
    fn default() -> Self {
        SoftenOptions {
            lo: 1.0,
            hi: 99.0,
            filter: true,
            global_percentiles: false,
        }
    }
}

/// Round-trip-safe floor/ceil: values a hair away from an integer (float
/// noise in `n * p / 100`) snap to it before truncation.
fn snap(x: f64) -> f64 {
    let rounded = x.round();
    if (x - rounded).abs() < 1e-9 * x.abs().max(1.0) {
        rounded
    } else {
        x
    }
}

/// Nearest-rank percentile thresholds `(low, high)` of `values`.
pub fn percentile_thresholds(values: &[f64], lo: f64, hi: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Invalid("percentiles of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo > hi {
        return Err(Error::Invalid(format!(
            "percentile bounds must satisfy 0 <= lo <= hi <= 100, got ({lo}, {hi})"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let lo_idx = (snap(n as f64 * lo / 100.0).floor() as usize).min(n - 1);
    let hi_idx = (snap(n as f64 * hi / 100.0).ceil() as usize)
        .saturating_sub(1)
        .clamp(lo_idx, n - 1);
    Ok((sorted[lo_idx], sorted[hi_idx]))
}

/// Group records by reading level, computing each sentence's FKGL.
///
/// Returns only non-empty groups, ordered by level.
pub fn group_by_level(records: &[SentenceRecord]) -> Result<Vec<LevelGroup>> {
    let mut groups: Vec<LevelGroup> = Vec::new();
    for record in records {
        let raw_fkgl = readability::fkgl_of(&record.text).map_err(|e| {
            Error::Invalid(format!("doc {:?}: {e}", record.doc_id))
        })?;
        let member = ScoredSentence {
            record: record.clone(),
            raw_fkgl,
        };
        match groups.iter_mut().find(|g| g.level == record.level) {
            Some(group) => group.members.push(member),
            None => groups.push(LevelGroup {
                level: record.level,
                members: vec![member],
            }),
        }
    }
    groups.sort_by_key(|g| g.level);
    Ok(groups)
}

/// Drop group members whose FKGL falls strictly below the `lo`-th or strictly
/// above the `hi`-th percentile of the group. Never empties the group.
pub fn filter_percentiles(group: &LevelGroup, lo: f64, hi: f64) -> Result<LevelGroup> {
    if group.members.is_empty() {
        return Err(Error::Invalid(format!(
            "level {} group is empty",
            group.level
        )));
    }
    let fkgls: Vec<f64> = group.members.iter().map(|m| m.raw_fkgl).collect();
    let (low, high) = percentile_thresholds(&fkgls, lo, hi)?;
    let members: Vec<ScoredSentence> = group
        .members
        .iter()
        .filter(|m| m.raw_fkgl >= low && m.raw_fkgl <= high)
        .cloned()
        .collect();
    debug_assert!(!members.is_empty());
    Ok(LevelGroup {
        level: group.level,
        members,
    })
}

/// Rescaled negative FKGLs `f'` in `[0, 2]`, aligned with `group.members`.
///
/// A degenerate group (all FKGLs equal) maps every member to 1.0, the
/// midpoint, so the recentering step still returns the quantized level.
pub fn rescale_group(group: &LevelGroup) -> Result<Vec<f64>> {
    if group.members.is_empty() {
        return Err(Error::Invalid(format!(
            "level {} group is empty",
            group.level
        )));
    }
    let negated: Vec<f64> = group.members.iter().map(|m| -m.raw_fkgl).collect();
    let min = negated.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = negated.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![1.0; negated.len()]);
    }
    Ok(negated.iter().map(|&f| 2.0 * (f - min) / (max - min)).collect())
}

/// Apply the recentering step to one group, writing `soft_label` (and the raw
/// `fkgl`) onto each member's record.
pub fn soften_group(group: &LevelGroup) -> Result<Vec<SentenceRecord>> {
    let rescaled = rescale_group(group)?;
    let mean = rescaled.iter().sum::<f64>() / rescaled.len() as f64;
    Ok(group
        .members
        .iter()
        .zip(&rescaled)
        .map(|(member, &f_prime)| {
            let mut record = member.record.clone();
            record.soft_label = Some(f_prime - mean + f64::from(group.level));
            record.fkgl = Some(member.raw_fkgl);
            record
        })
        .collect())
}

/// Full softening pass over a corpus: group by level, percentile-filter, and
/// soften. Filtered-out sentences are dropped from the output; surviving
/// records keep their input order.
pub fn soften_corpus(
    records: &[SentenceRecord],
    opts: &SoftenOptions,
) -> Result<Vec<SentenceRecord>> {
    let mut fkgls = Vec::with_capacity(records.len());
    for record in records {
        let value = readability::fkgl_of(&record.text).map_err(|e| {
            Error::Invalid(format!("doc {:?}: {e}", record.doc_id))
        })?;
        fkgls.push(value);
    }

    // per-level member indices, in input order
    let mut level_indices: Vec<(u8, Vec<usize>)> = Vec::new();
    for (i, record) in records.iter().enumerate() {
        match level_indices.iter_mut().find(|(l, _)| *l == record.level) {
            Some((_, idx)) => idx.push(i),
            None => level_indices.push((record.level, vec![i])),
        }
    }
    level_indices.sort_by_key(|(l, _)| *l);

    let global_thresholds = if opts.filter && opts.global_percentiles {
        Some(percentile_thresholds(&fkgls, opts.lo, opts.hi)?)
    } else {
        None
    };

    let mut softened: Vec<(usize, SentenceRecord)> = Vec::with_capacity(records.len());
    for (level, indices) in &level_indices {
        let kept: Vec<usize> = if opts.filter {
            let (low, high) = match global_thresholds {
                Some(t) => t,
                None => {
                    let group_fkgls: Vec<f64> = indices.iter().map(|&i| fkgls[i]).collect();
                    percentile_thresholds(&group_fkgls, opts.lo, opts.hi)?
                }
            };
            indices
                .iter()
                .copied()
                .filter(|&i| fkgls[i] >= low && fkgls[i] <= high)
                .collect()
        } else {
            indices.clone()
        };
        // global thresholds may empty a whole level; that level then
        // contributes nothing to the softened corpus
        if kept.is_empty() {
            continue;
        }

        let group = LevelGroup {
            level: *level,
            members: kept
                .iter()
                .map(|&i| ScoredSentence {
                    record: records[i].clone(),
                    raw_fkgl: fkgls[i],
                })
                .collect(),
        };
        for (record, &i) in soften_group(&group)?.into_iter().zip(&kept) {
            softened.push((i, record));
        }
    }

    softened.sort_by_key(|(i, _)| *i);
    Ok(softened.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn group_with_fkgls(level: u8, fkgls: &[f64]) -> LevelGroup {
        LevelGroup {
            level,
            members: fkgls
                .iter()
                .enumerate()
                .map(|(i, &raw_fkgl)| ScoredSentence {
                    record: SentenceRecord::new(
                        "a",
                        format!("a-l{level}"),
                        level,
                        format!("Sentence {i}."),
                    ),
                    raw_fkgl,
                })
                .collect(),
        }
    }

    #[test]
    fn filter_drops_extreme_percentiles() {
        // brute-force oracle on the arithmetic sequence 1..=100: the bottom
        // and top percentile each hold exactly one member
        let fkgls: Vec<f64> = (1..=100).map(f64::from).collect();
        let group = group_with_fkgls(2, &fkgls);
        let filtered = filter_percentiles(&group, 1.0, 99.0).unwrap();
        let kept: Vec<f64> = filtered.members.iter().map(|m| m.raw_fkgl).collect();
        assert_eq!(kept.len(), 98);
        assert_eq!(kept.first(), Some(&2.0));
        assert_eq!(kept.last(), Some(&99.0));
    }

    #[test]
    fn filter_keeps_degenerate_distribution() {
        let group = group_with_fkgls(1, &[5.0, 5.0, 5.0]);
        let filtered = filter_percentiles(&group, 1.0, 99.0).unwrap();
        assert_eq!(filtered.members.len(), 3);
    }

    #[test]
    fn filter_keeps_singleton() {
        let group = group_with_fkgls(0, &[12.3]);
        let filtered = filter_percentiles(&group, 1.0, 99.0).unwrap();
        assert_eq!(filtered.members.len(), 1);
        assert_eq!(filtered.members[0].raw_fkgl, 12.3);
    }

    #[test]
    fn filter_rejects_empty_group() {
        let group = LevelGroup {
            level: 0,
            members: vec![],
        };
        assert!(filter_percentiles(&group, 1.0, 99.0).is_err());
    }

    #[test]
    fn rescale_direct_arithmetic() {
        // f = -fkgl = {-10, -5, 0}  ->  f' = {0, 1, 2}
        let group = group_with_fkgls(3, &[10.0, 5.0, 0.0]);
        let rescaled = rescale_group(&group).unwrap();
        assert_eq!(rescaled, vec![0.0, 1.0, 2.0]);

        // f = {0, 1}  ->  f' = {0, 2}
        let group = group_with_fkgls(3, &[0.0, -1.0]);
        assert_eq!(rescale_group(&group).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn rescale_degenerate_group_is_all_midpoint() {
        let group = group_with_fkgls(2, &[4.0, 4.0, 4.0]);
        assert_eq!(rescale_group(&group).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn soften_worked_example() {
        // engineered level-3 group: f = {0, 0.5, 1.5, 2} rescales to itself,
        // mean(f') = 1.0, so the f' = 1.5 sentence gets label 3.5
        let group = group_with_fkgls(3, &[0.0, -0.5, -1.5, -2.0]);
        let rescaled = rescale_group(&group).unwrap();
        assert_eq!(rescaled, vec![0.0, 0.5, 1.5, 2.0]);
        let softened = soften_group(&group).unwrap();
        let labels: Vec<f64> = softened.iter().map(|r| r.soft_label.unwrap()).collect();
        assert_abs_diff_eq!(labels[2], 3.5, epsilon = 1e-9);
        assert_eq!(labels, vec![2.0, 2.5, 3.5, 4.0]);
    }

    #[test]
    fn soften_centering_identity() {
        // every f' equals the mean (degenerate group), so labels are the level
        let group = group_with_fkgls(2, &[7.0, 7.0]);
        let softened = soften_group(&group).unwrap();
        for record in softened {
            assert_abs_diff_eq!(record.soft_label.unwrap(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn soften_shifts_rescaled_values_onto_level() {
        // f' = {0, 1, 2} at level 2 -> labels {1, 2, 3}
        let group = group_with_fkgls(2, &[0.0, -1.0, -2.0]);
        let softened = soften_group(&group).unwrap();
        let labels: Vec<f64> = softened.iter().map(|r| r.soft_label.unwrap()).collect();
        assert_eq!(labels, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn soften_corpus_preserves_input_order_and_sets_fkgl() {
        let records = vec![
            SentenceRecord::new("a", "a-l2", 2, "A long elaborate complicated sentence full of encumbering vocabulary."),
            SentenceRecord::new("a", "a-l0", 0, "An even more extraordinarily sophisticated formulation of considerable proportions."),
            SentenceRecord::new("b", "b-l2", 2, "The cat sat."),
            SentenceRecord::new("b", "b-l0", 0, "Dogs run fast."),
        ];
        let softened = soften_corpus(&records, &SoftenOptions::default()).unwrap();
        assert_eq!(softened.len(), 4);
        let docs: Vec<&str> = softened.iter().map(|r| r.doc_id.as_str()).collect();
        assert_eq!(docs, vec!["a-l2", "a-l0", "b-l2", "b-l0"]);
        assert!(softened.iter().all(|r| r.soft_label.is_some() && r.fkgl.is_some()));
    }

    fn arb_group() -> impl Strategy<Value = LevelGroup> {
        (
            0u8..=4,
            proptest::collection::vec(-8.0f64..20.0, 2..40),
        )
            .prop_map(|(level, fkgls)| group_with_fkgls(level, &fkgls))
    }

    proptest! {
        #[test]
        fn rescale_spans_zero_to_two(group in arb_group()) {
            let rescaled = rescale_group(&group).unwrap();
            let min = rescaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = rescaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let fkgls: Vec<f64> = group.members.iter().map(|m| m.raw_fkgl).collect();
            let degenerate = fkgls.iter().all(|&f| f == fkgls[0]);
            if degenerate {
                prop_assert!(rescaled.iter().all(|&f| f == 1.0));
            } else {
                prop_assert!((min - 0.0).abs() < 1e-12);
                prop_assert!((max - 2.0).abs() < 1e-12);
            }
        }

        #[test]
        fn soften_preserves_group_mean(group in arb_group()) {
            let softened = soften_group(&group).unwrap();
            let mean = softened.iter().map(|r| r.soft_label.unwrap()).sum::<f64>()
                / softened.len() as f64;
            prop_assert!((mean - f64::from(group.level)).abs() < 1e-9);
        }

        #[test]
        fn soften_stays_within_two_of_level(group in arb_group()) {
            let level = f64::from(group.level);
            for record in soften_group(&group).unwrap() {
                let label = record.soft_label.unwrap();
                prop_assert!(label >= level - 2.0 - 1e-9 && label <= level + 2.0 + 1e-9);
            }
        }

        #[test]
        fn soften_preserves_neg_fkgl_rank_order(group in arb_group()) {
            let softened = soften_group(&group).unwrap();
            for i in 0..group.members.len() - 1 {
                let (fa, fb) = (group.members[i].raw_fkgl, group.members[i + 1].raw_fkgl);
                let (la, lb) = (
                    softened[i].soft_label.unwrap(),
                    softened[i + 1].soft_label.unwrap(),
                );
                // lower FKGL (simpler) must never get a lower label
                if fa < fb {
                    prop_assert!(la >= lb);
                } else if fa > fb {
                    prop_assert!(la <= lb);
                }
            }
        }

        #[test]
        fn filter_never_empties(group in arb_group(), lo in 0.0f64..10.0, span in 0.0f64..10.0) {
            let hi = (100.0 - span).max(lo);
            let filtered = filter_percentiles(&group, lo, hi).unwrap();
            prop_assert!(!filtered.members.is_empty());
            prop_assert!(filtered.members.len() <= group.members.len());
        }
    }
}
