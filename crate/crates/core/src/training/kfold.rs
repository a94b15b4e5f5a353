//! Seeded k-fold partition of sample indices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A shuffled partition into `k` validation folds of near-equal size.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// `(train indices, validation indices)` for one fold.
    pub fn train_val(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let val = self.folds[fold].clone();
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        (train, val)
    }
}

/// Shuffles `0..n_samples` with a ChaCha stream and deals the indices into
/// `k` folds whose sizes differ by at most one.
pub fn kfold_split(n_samples: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || n_samples < k {
        return Err(Error::InvalidConfig(format!("cannot split {n_samples} samples into {k} folds")));
    }
    let mut indices: Vec<usize> = (0..n_samples).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let base = n_samples / k;
    let extra = n_samples % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(indices[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldPlan { k, seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kdef_sized_split_gives_five_folds_of_980() {
        let plan = kfold_split(4900, 5, 0).unwrap();
        assert_eq!(plan.folds.len(), 5);
        for f in &plan.folds {
            assert_eq!(f.len(), 980);
        }
    }

    #[test]
    fn folds_partition_the_index_set() {
        let plan = kfold_split(103, 5, 9).unwrap();
        let mut all: Vec<usize> = plan.folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        let min = *sizes.iter().min().unwrap();
        let max = *sizes.iter().max().unwrap();
        assert!(max - min <= 1);
    }

    #[test]
    fn same_seed_same_plan() {
        let a = kfold_split(50, 5, 4).unwrap();
        let b = kfold_split(50, 5, 4).unwrap();
        assert_eq!(a.folds, b.folds);
        let c = kfold_split(50, 5, 5).unwrap();
        assert_ne!(a.folds, c.folds);
    }

    #[test]
    fn train_val_are_disjoint_and_complete() {
        let plan = kfold_split(20, 4, 1).unwrap();
        let (train, val) = plan.train_val(2);
        assert_eq!(train.len() + val.len(), 20);
        for v in &val {
            assert!(!train.contains(v));
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(kfold_split(3, 5, 0).is_err());
    }
}
