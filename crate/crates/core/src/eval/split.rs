use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG stream reserved for split shuffles, distinct from model streams.
const SPLIT_STREAM: u64 = 1;

/// Train/validation/test fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let all = [train, val, test];
        if all.iter().any(|f| !(f.is_finite() && *f > 0.0)) || (train + val + test - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must be positive and sum to 1, got {train}/{val}/{test}"
            )));
        }
        Ok(Self { train, val, test, seed })
    }

    /// 60% / 20% / 20%.
    pub fn with_seed(seed: u64) -> Self {
        Self { train: 0.6, val: 0.2, test: 0.2, seed }
    }

    /// `(train, val, test)` sizes for `n` items: floors for train and
    /// validation, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error such as 0.6 * 10 < 6.
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let val = floor(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

/// Positions `0..n` partitioned into three disjoint index lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded uniform shuffle of `0..n_labeled`, cut by [`SplitSpec::sizes`].
pub fn make_split(n_labeled: usize, spec: &SplitSpec) -> Result<Split> {
    if n_labeled < 5 {
        return Err(Error::validation(format!("need at least 5 labeled nodes to split, got {n_labeled}")));
    }
    let (train, val, test) = spec.sizes(n_labeled);
    if train == 0 || val == 0 || test == 0 {
        return Err(Error::validation(format!(
            "split of {n_labeled} nodes leaves an empty part ({train}/{val}/{test})"
        )));
    }
    let mut order: Vec<usize> = (0..n_labeled).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(SPLIT_STREAM);
    order.shuffle(&mut rng);
    let test_part = order.split_off(train + val);
    let val_part = order.split_off(train);
    Ok(Split { train: order, val: val_part, test: test_part })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_examples() {
        assert_eq!(SplitSpec::with_seed(3).sizes(10), (6, 2, 2));
        assert_eq!(SplitSpec::default().sizes(144), (86, 28, 30));
        assert_eq!(SplitSpec::default().sizes(112), (67, 22, 23));
        assert_eq!(SplitSpec::default().sizes(5), (3, 1, 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = make_split(50, &SplitSpec::with_seed(2)).unwrap();
        assert_eq!(a, make_split(50, &SplitSpec::with_seed(2)).unwrap());
        assert_ne!(a, make_split(50, &SplitSpec::with_seed(3)).unwrap());
    }

    #[test]
    fn too_few_nodes() {
        assert!(make_split(4, &SplitSpec::default()).is_err());
        assert!(SplitSpec::new(0.5, 0.5, 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn partitions_with_floor_sizes(n in 5usize..=500, seed in 0u64..5) {
            let spec = SplitSpec::with_seed(seed);
            let s = make_split(n, &spec).unwrap();
            let expected_train = (n * 6) / 10;
            let expected_val = (n * 2) / 10;
            prop_assert_eq!(s.train.len(), expected_train);
            prop_assert_eq!(s.val.len(), expected_val);
            prop_assert_eq!(s.test.len(), n - expected_train - expected_val);
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
