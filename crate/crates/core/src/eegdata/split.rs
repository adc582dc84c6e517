use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Label, Recording};

/// Subject-disjoint train/eval split of recording indices. Subjects are
/// grouped by the label of their first recording and each group is shuffled
/// and divided at `train_fraction`, so class balance carries over.
pub fn subject_split(recordings: &[Recording], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut subjects: BTreeMap<&str, (Label, Vec<usize>)> = BTreeMap::new();
    for (i, r) in recordings.iter().enumerate() {
        subjects.entry(&r.subject_id).or_insert((r.label, Vec::new())).1.push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for label in [Label::Normal, Label::Pathological, Label::Unlabeled] {
        let mut group: Vec<&Vec<usize>> = subjects.values().filter(|(l, _)| *l == label).map(|(_, idx)| idx).collect();
        group.shuffle(&mut rng);
        let n_train = (group.len() as f64 * train_fraction).round() as usize;
        for (j, idx) in group.into_iter().enumerate() {
            if j < n_train { &mut train } else { &mut eval }.extend(idx);
        }
    }
    train.sort_unstable();
    eval.sort_unstable();
    (train, eval)
}
