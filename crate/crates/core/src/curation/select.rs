use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::{DeterministicRng, CURATION_SPLIT_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TagMode {
    #[serde(alias = "and")]
    AND,
    #[serde(alias = "or")]
    OR,
}

/// Selects frames carrying all (`AND`) or any (`OR`) of `tags`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagFilter {
    pub mode: TagMode,
    pub tags: BTreeSet<String>,
}

impl TagFilter {
    pub fn new(mode: TagMode, tags: &[&str]) -> Self {
        Self {
            mode,
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }

    pub fn matches(&self, frame_tags: &BTreeSet<String>) -> bool {
        match self.mode {
            TagMode::AND => self.tags.is_subset(frame_tags),
            TagMode::OR => !self.tags.is_disjoint(frame_tags),
        }
    }
}

/// Indices of frames selected by the union of `filters`, in input order.
/// No filters selects everything.
pub fn filter_by_tags(frame_tags: &[&BTreeSet<String>], filters: &[TagFilter]) -> Vec<usize> {
    (0..frame_tags.len())
        .filter(|&i| filters.is_empty() || filters.iter().any(|f| f.matches(frame_tags[i])))
        .collect()
}

/// Train/test assignment plus optional folds over the training pool.
/// Entries are indices into the split input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub folds: Vec<Vec<usize>>,
}

/// `round(p·n)` with halves rounded up. A small tolerance absorbs binary
/// representation error so that e.g. `0.15 · 10` counts as 1.5.
pub fn test_count(test_percent: f64, n: usize) -> usize {
    ((test_percent * n as f64) + 0.5 + 1e-9).floor() as usize
}

/// Seeded shuffle, then the first `round(p·n)` items go to test and the rest
/// to train; folds take the shuffled training pool round-robin. Index lists
/// are returned sorted.
pub fn split(n: usize, test_percent: f64, kfolds: u32, seed: u64) -> Result<Splits> {
    if !(0.0..1.0).contains(&test_percent) {
        return Err(Error::Config(format!("test_percent {test_percent} outside [0, 1)")));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let n_test = test_count(test_percent, n);
    if n_test >= n {
        return Err(Error::AllTest(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut DeterministicRng::for_stream(seed, CURATION_SPLIT_STREAM));
    let (test, train) = order.split_at(n_test);
    let mut folds = vec![Vec::new(); kfolds as usize];
    for (i, &item) in train.iter().enumerate() {
        if kfolds > 0 {
            folds[i % kfolds as usize].push(item);
        }
    }
    let sorted = |v: &[usize]| {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    };
    Ok(Splits {
        train: sorted(train),
        test: sorted(test),
        folds: folds.iter().map(|f| sorted(f)).collect(),
    })
}

/// Checks the partition laws of `s` over `0..n`.
pub fn check_partition(s: &Splits, n: usize) -> std::result::Result<(), String> {
    let train: HashSet<usize> = s.train.iter().copied().collect();
    let test: HashSet<usize> = s.test.iter().copied().collect();
    if train.len() != s.train.len() || test.len() != s.test.len() {
        return Err("duplicate entries".into());
    }
    if !train.is_disjoint(&test) {
        return Err("train and test overlap".into());
    }
    if train.len() + test.len() != n || train.iter().chain(&test).any(|&i| i >= n) {
        return Err("train ∪ test is not the selection".into());
    }
    if !s.folds.is_empty() {
        let mut seen = HashSet::new();
        for f in &s.folds {
            for i in f {
                if !seen.insert(*i) {
                    return Err("folds overlap".into());
                }
            }
        }
        if seen != train {
            return Err("folds do not cover the training pool".into());
        }
        let sizes: Vec<usize> = s.folds.iter().map(Vec::len).collect();
        if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 {
            return Err(format!("fold sizes {sizes:?} differ by more than one"));
        }
    }
    Ok(())
}
