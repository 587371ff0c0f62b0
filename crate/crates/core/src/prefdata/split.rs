use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle followed by a cut into test, dev and train (in that order of the
/// shuffled sequence). The three parts are disjoint and together hold every input.
pub fn split_dataset<T: Clone>(items: &[T], seed: u64, test_size: usize, dev_size: usize) -> Result<Split<T>> {
    if test_size + dev_size > items.len() {
        return Err(Error::invalid(format!(
            "split sizes {test_size} + {dev_size} exceed dataset size {}",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        test: pick(&order[..test_size]),
        dev: pick(&order[test_size..test_size + dev_size]),
        train: pick(&order[test_size + dev_size..]),
    })
}
