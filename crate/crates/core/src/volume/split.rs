use serde::{Deserialize, Serialize};

use super::{Result, VolumeError};
use crate::rng::Rng;

/// Train / validation / test partition of volume identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shuffle `ids` with `seed` and cut them 70/15/15: `floor(0.7n)` train,
/// `floor(0.15n)` validation, the remainder test.
pub fn split_dataset(ids: &[String], seed: u64) -> Result<DatasetSplit> {
    let n = ids.len();
    if n < 3 {
        return Err(VolumeError::TooFewVolumes(n));
    }
    let mut order = ids.to_vec();
    Rng::seed_from_u64(seed).shuffle(&mut order);
    let n_train = 7 * n / 10;
    let n_val = 15 * n / 100;
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok(DatasetSplit {
        seed,
        train: order,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("vol_{i:03}")).collect()
    }

    fn sizes(s: &DatasetSplit) -> (usize, usize, usize) {
        (s.train.len(), s.validation.len(), s.test.len())
    }

    #[test]
    fn twenty_ids() {
        assert_eq!(sizes(&split_dataset(&ids(20), 1).unwrap()), (14, 3, 3));
    }

    #[test]
    fn hundred_ids() {
        assert_eq!(sizes(&split_dataset(&ids(100), 1).unwrap()), (70, 15, 15));
    }

    #[test]
    fn forty_ids() {
        assert_eq!(sizes(&split_dataset(&ids(40), 1).unwrap()), (28, 6, 6));
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(split_dataset(&ids(30), 5).unwrap(), split_dataset(&ids(30), 5).unwrap());
        assert_ne!(split_dataset(&ids(30), 5).unwrap(), split_dataset(&ids(30), 6).unwrap());
    }

    #[test]
    fn too_few() {
        assert!(matches!(split_dataset(&ids(2), 0), Err(VolumeError::TooFewVolumes(2))));
    }

    proptest! {
        #[test]
        fn partition_is_exhaustive_and_disjoint(n in 3usize..400, seed in any::<u64>()) {
            let all = ids(n);
            let s = split_dataset(&all, seed).unwrap();
            prop_assert_eq!(s.train.len(), 7 * n / 10);
            prop_assert_eq!(s.validation.len(), 15 * n / 100);
            prop_assert_eq!(s.len(), n);
            let joined: BTreeSet<_> = s.train.iter().chain(&s.validation).chain(&s.test).collect();
            prop_assert_eq!(joined.len(), n);
            prop_assert_eq!(joined, all.iter().collect::<BTreeSet<_>>());
        }
    }
}
