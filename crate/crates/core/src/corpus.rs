//! Level-annotated sentence corpora: JSONL ingestion and document-grouped
//! train/dev/test splits.
//!
//! One JSONL line per sentence: `{"article_id", "doc_id", "level", "text"}`,
//! plus optional `"soft_label"` and `"fkgl"` on files produced by the
//! softening stage. A *document* is one article at one reading level, so all
//! sentences of a document share that level (0 original .. 4 simplest).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest reading level; levels are `0..=MAX_LEVEL`.
pub const MAX_LEVEL: u8 = 4;

/// One sentence with its article/document identity and reading level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    /// Shared by every rewrite version of one article.
    pub article_id: String,
    /// One article at one reading level.
    pub doc_id: String,
    /// Quantized reading level of the document this sentence came from.
    pub level: u8,
    pub text: String,
    /// Real-valued regression label; absent until softening runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft_label: Option<f64>,
    /// Raw FKGL; written by the softening stage for inspectability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fkgl: Option<f64>,
}

impl SentenceRecord {
    pub fn new(
        article_id: impl Into<String>,
        doc_id: impl Into<String>,
        level: u8,
        text: impl Into<String>,
    ) -> Self {
        SentenceRecord {
            article_id: article_id.into(),
            doc_id: doc_id.into(),
            level,
            text: text.into(),
            soft_label: None,
            fkgl: None,
        }
    }
}

/// Document-grouped partition of a corpus.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<SentenceRecord>,
    pub dev: Vec<SentenceRecord>,
    pub test: Vec<SentenceRecord>,
    pub seed: u64,
}

fn validate(record: &SentenceRecord) -> std::result::Result<(), String> {
    if record.level > MAX_LEVEL {
        return Err(format!(
            "level {} outside 0..={MAX_LEVEL}",
            record.level
        ));
    }
    if record.text.trim().is_empty() {
        return Err("text is empty".to_string());
    }
    Ok(())
}

/// Load a JSONL corpus, validating every record.
///
/// Errors name the offending 1-based line: malformed JSON, a level outside
/// `0..=4`, empty text, or two documents disagreeing about their level.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<SentenceRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut doc_levels: HashMap<String, (u8, usize)> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let record: SentenceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, line_no, e.to_string()))?;
        validate(&record).map_err(|msg| Error::malformed(path, line_no, msg))?;
        match doc_levels.get(&record.doc_id) {
            Some(&(level, first_line)) if level != record.level => {
                return Err(Error::malformed(
                    path,
                    line_no,
                    format!(
                        "doc {:?} has level {} here but level {level} at line {first_line}",
                        record.doc_id, record.level
                    ),
                ));
            }
            Some(_) => {}
            None => {
                doc_levels.insert(record.doc_id.clone(), (record.level, line_no));
            }
        }
        records.push(record);
    }
    Ok(records)
}

/// Write records as JSONL, one record per line, in order.
pub fn write_corpus(path: impl AsRef<Path>, records: &[SentenceRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Invalid(format!("serialize record: {e}")))?;
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Distinct article ids in first-appearance order.
fn article_groups(records: &[SentenceRecord]) -> Vec<&str> {
    let mut seen = HashMap::new();
    let mut groups = Vec::new();
    for record in records {
        if seen.insert(record.article_id.as_str(), ()).is_none() {
            groups.push(record.article_id.as_str());
        }
    }
    groups
}

/// Partition a corpus into train/dev/test by whole article groups.
///
/// Article groups are shuffled with a seeded PRNG, then allocated by ratio:
/// dev and test each get `floor(n * ratio)` groups (at least one, so every
/// split is populated), train gets the rest. Splitting at article granularity
/// keeps all rewrite versions of an article in the same split. Deterministic
/// for a fixed `(records, ratios, seed)` triple.
pub fn split_corpus(
    records: &[SentenceRecord],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit> {
    let (r_train, r_dev, r_test) = ratios;
    if !(r_train > 0.0 && r_dev > 0.0 && r_test > 0.0) {
        return Err(Error::Invalid("split ratios must be positive".into()));
    }
    if ((r_train + r_dev + r_test) - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "split ratios must sum to 1, got {}",
            r_train + r_dev + r_test
        )));
    }

    let mut groups = article_groups(records);
    let n = groups.len();
    if n < 3 {
        return Err(Error::Invalid(format!(
            "need at least 3 article groups to populate all splits, got {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);

    let dev_n = ((n as f64 * r_dev).floor() as usize).max(1);
    let test_n = ((n as f64 * r_test).floor() as usize).max(1);
    let train_n = n
        .checked_sub(dev_n + test_n)
        .filter(|&t| t >= 1)
        .ok_or_else(|| {
            Error::Invalid(format!(
                "ratios leave no training groups (n={n}, dev={dev_n}, test={test_n})"
            ))
        })?;

    let mut assignment: HashMap<&str, usize> = HashMap::new();
    for (i, article) in groups.iter().enumerate() {
        let split = if i < train_n {
            0
        } else if i < train_n + dev_n {
            1
        } else {
            2
        };
        assignment.insert(article, split);
    }

    // records keep their file order within each split
    let mut split = CorpusSplit {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for record in records {
        match assignment[record.article_id.as_str()] {
            0 => split.train.push(record.clone()),
            1 => split.dev.push(record.clone()),
            _ => split.test.push(record.clone()),
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Write as _;

    use proptest::prelude::*;

    fn synthetic(articles: usize, sentences_per_doc: usize) -> Vec<SentenceRecord> {
        let mut records = Vec::new();
        for a in 0..articles {
            for level in 0..=MAX_LEVEL {
                for s in 0..sentences_per_doc {
                    records.push(SentenceRecord::new(
                        format!("a{a:03}"),
                        format!("a{a:03}-l{level}"),
                        level,
                        format!("Sentence {s} of article {a} level {level}."),
                    ));
                }
            }
        }
        records
    }

    #[test]
    fn load_preserves_order_and_levels() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"a-0","level":0,"text":"Zero."}}"#).unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"a-2","level":2,"text":"Two."}}"#).unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"a-4","level":4,"text":"Four."}}"#).unwrap();
        let records = load_corpus(file.path()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(
            records.iter().map(|r| r.level).collect::<Vec<_>>(),
            vec![0, 2, 4]
        );
        assert!(records.iter().all(|r| r.soft_label.is_none()));
    }

    #[test]
    fn load_rejects_out_of_range_level() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"a-0","level":0,"text":"Ok."}}"#).unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"a-7","level":7,"text":"Bad."}}"#).unwrap();
        let err = load_corpus(file.path()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "got: {err}");
        assert!(err.to_string().contains("level 7"), "got: {err}");
    }

    #[test]
    fn load_rejects_malformed_json_with_line_number() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"a-0","level":0,"text":"Ok."}}"#).unwrap();
        writeln!(file, "not json").unwrap();
        let err = load_corpus(file.path()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "got: {err}");
    }

    #[test]
    fn load_rejects_conflicting_doc_levels() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"d","level":1,"text":"One."}}"#).unwrap();
        writeln!(file, r#"{{"article_id":"a","doc_id":"d","level":2,"text":"Two."}}"#).unwrap();
        let err = load_corpus(file.path()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "got: {err}");
    }

    #[test]
    fn synthetic_fixture_counts() {
        let records = synthetic(50, 4);
        assert_eq!(records.len(), 1000);
        let docs: HashSet<_> = records.iter().map(|r| &r.doc_id).collect();
        assert_eq!(docs.len(), 250);
    }

    #[test]
    fn split_hundred_groups_is_90_5_5() {
        let records = synthetic(100, 1);
        let split = split_corpus(&records, (0.9, 0.05, 0.05), 13).unwrap();
        let groups = |records: &[SentenceRecord]| {
            records
                .iter()
                .map(|r| r.article_id.clone())
                .collect::<HashSet<_>>()
                .len()
        };
        assert_eq!(groups(&split.train), 90);
        assert_eq!(groups(&split.dev), 5);
        assert_eq!(groups(&split.test), 5);
    }

    #[test]
    fn split_three_groups_is_1_1_1() {
        let records = synthetic(3, 2);
        let split = split_corpus(&records, (0.9, 0.05, 0.05), 13).unwrap();
        for part in [&split.train, &split.dev, &split.test] {
            let groups: HashSet<_> = part.iter().map(|r| &r.article_id).collect();
            assert_eq!(groups.len(), 1);
        }
    }

    #[test]
    fn split_requires_three_groups() {
        let records = synthetic(2, 2);
        assert!(split_corpus(&records, (0.9, 0.05, 0.05), 13).is_err());
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let records = synthetic(20, 2);
        let a = split_corpus(&records, (0.9, 0.05, 0.05), 7).unwrap();
        let b = split_corpus(&records, (0.9, 0.05, 0.05), 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.dev, b.dev);
        assert_eq!(a.test, b.test);

        // a different seed moves groups around but keeps sizes
        let c = split_corpus(&records, (0.9, 0.05, 0.05), 8).unwrap();
        assert_eq!(c.train.len(), a.train.len());
        assert_eq!(c.dev.len(), a.dev.len());
        assert_eq!(c.test.len(), a.test.len());
        assert!(
            a.dev != c.dev || a.test != c.test,
            "seeds 7 and 8 produced identical assignments"
        );
    }

    #[test]
    fn split_rejects_bad_ratios() {
        let records = synthetic(10, 1);
        assert!(split_corpus(&records, (0.5, 0.2, 0.2), 1).is_err());
        assert!(split_corpus(&records, (1.0, 0.0, 0.0), 1).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_and_keeps_groups_atomic(
            articles in 3usize..40,
            sentences in 1usize..4,
            seed in 0u64..1000,
        ) {
            let records = synthetic(articles, sentences);
            let split = split_corpus(&records, (0.9, 0.05, 0.05), seed).unwrap();

            // partition: no loss, no duplication
            prop_assert_eq!(
                split.train.len() + split.dev.len() + split.test.len(),
                records.len()
            );
            let mut seen = HashSet::new();
            for r in split.train.iter().chain(&split.dev).chain(&split.test) {
                prop_assert!(seen.insert((r.doc_id.clone(), r.text.clone())));
            }

            // group atomicity: each article id lives in exactly one split
            let ids = |part: &[SentenceRecord]| -> HashSet<String> {
                part.iter().map(|r| r.article_id.clone()).collect()
            };
            let (train, dev, test) = (ids(&split.train), ids(&split.dev), ids(&split.test));
            prop_assert!(train.is_disjoint(&dev));
            prop_assert!(train.is_disjoint(&test));
            prop_assert!(dev.is_disjoint(&test));
        }
    }
}
