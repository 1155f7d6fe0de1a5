//! Participant-grouped, greedily stratified fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabelSource, LabeledSample};
use crate::labeling::ExertionZone;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub fold_of: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold(&self, participant_id: &str) -> Option<usize> {
        self.fold_of.get(participant_id).copied()
    }

    /// Participants in fold `f`, sorted.
    pub fn participants(&self, f: usize) -> Vec<&str> {
        self.fold_of
            .iter()
            .filter(|(_, &v)| v == f)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

type Counts = [usize; 3];

fn l1_from_global(counts: &Counts, global: &[f64; 3]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .zip(global)
        .map(|(&c, g)| (c as f64 / total as f64 - g).abs())
        .sum()
}

/// Assign each participant to exactly one of `n_folds` folds.
///
/// Participants are taken largest-first (ties in a seed-shuffled order) and
/// placed in the fold whose zone proportions, after adding them, sit
/// closest in L1 to the global proportions. Ties go to the fold with fewer
/// participants, then the lower index. A fold holds at most
/// `ceil(P / n_folds)` participants, and once the remaining participants
/// only just cover the empty folds they go to empty folds, so no fold ends
/// up empty.
pub fn assign_folds(
    samples: &[LabeledSample],
    n_folds: usize,
    seed: u64,
    source: LabelSource,
) -> Result<FoldAssignment, CorpusError> {
    // first-seen order keeps the result a function of input order
    let mut order: Vec<&str> = Vec::new();
    let mut per: BTreeMap<&str, Counts> = BTreeMap::new();
    for s in samples {
        let counts = per.entry(s.participant_id.as_str()).or_insert_with(|| {
            order.push(s.participant_id.as_str());
            [0; 3]
        });
        if let Some(zone) = s.label(source) {
            counts[zone.index()] += 1;
        }
    }
    if n_folds == 0 || order.len() < n_folds {
        return Err(CorpusError::TooFewParticipants {
            needed: n_folds.max(1),
            found: order.len(),
        });
    }

    let mut global = [0.0; 3];
    let total: usize = per.values().flatten().sum();
    for c in per.values() {
        for z in ExertionZone::ALL {
            global[z.index()] += c[z.index()] as f64;
        }
    }
    if total > 0 {
        global.iter_mut().for_each(|g| *g /= total as f64);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by_key(|p| std::cmp::Reverse(per[p].iter().sum::<usize>()));

    let capacity = order.len().div_ceil(n_folds);
    let mut fold_counts = vec![[0usize; 3]; n_folds];
    let mut fold_sizes = vec![0usize; n_folds];
    let mut fold_of = BTreeMap::new();

    for (placed, pid) in order.iter().enumerate() {
        let remaining = order.len() - placed;
        let empty = fold_sizes.iter().filter(|&&n| n == 0).count();
        let must_fill = remaining <= empty;
        let pc = per[pid];
        let best = (0..n_folds)
            .filter(|&f| fold_sizes[f] < capacity && (!must_fill || fold_sizes[f] == 0))
            .map(|f| {
                let mut c = fold_counts[f];
                for z in 0..3 {
                    c[z] += pc[z];
                }
                (f, l1_from_global(&c, &global))
            })
            .min_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then(fold_sizes[a.0].cmp(&fold_sizes[b.0]))
                    .then(a.0.cmp(&b.0))
            })
            .map(|(f, _)| f)
            .expect("capacity leaves at least one open fold");
        for z in 0..3 {
            fold_counts[best][z] += pc[z];
        }
        fold_sizes[best] += 1;
        fold_of.insert(pid.to_string(), best);
    }

    Ok(FoldAssignment { n_folds, fold_of })
}
