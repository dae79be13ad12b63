use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sequence-level fold assignment. Fold 0 is the canonical train/val split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Folds {
    n_folds: usize,
    assignment: Vec<usize>,
}

impl Folds {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn fold_of(&self, sequence: usize) -> usize {
        self.assignment[sequence]
    }

    pub fn val_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

fn check(n_sequences: usize, n_folds: usize) -> Result<()> {
    if n_folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_sequences < n_folds {
        return Err(Error::InsufficientData { needed: n_folds, got: n_sequences });
    }
    Ok(())
}

fn deal(indices: &mut [usize], folds: std::ops::Range<usize>, seed: u64, assignment: &mut [usize]) {
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let width = folds.len();
    for (pos, &i) in indices.iter().enumerate() {
        assignment[i] = folds.start + pos % width;
    }
}

/// Shuffles sequences with `seed` and deals them round-robin into folds.
pub fn make_folds(n_sequences: usize, n_folds: usize, seed: u64) -> Result<Folds> {
    check(n_sequences, n_folds)?;
    let mut indices: Vec<usize> = (0..n_sequences).collect();
    let mut assignment = vec![0; n_sequences];
    deal(&mut indices, 0..n_folds, seed, &mut assignment);
    Ok(Folds { n_folds, assignment })
}

/// Fold 0 is exactly `canonical_val`; the remaining sequences are dealt into
/// folds `1..n_folds`.
pub fn make_folds_with_canonical(
    n_sequences: usize,
    canonical_val: &[usize],
    n_folds: usize,
    seed: u64,
) -> Result<Folds> {
    check(n_sequences, n_folds)?;
    let mut is_val = vec![false; n_sequences];
    for &i in canonical_val {
        if i >= n_sequences || std::mem::replace(&mut is_val[i], true) {
            return Err(Error::Config(format!("canonical validation index {i} out of range or repeated")));
        }
    }
    let mut rest: Vec<usize> = (0..n_sequences).filter(|&i| !is_val[i]).collect();
    if canonical_val.is_empty() || rest.len() < n_folds - 1 {
        return Err(Error::InsufficientData { needed: n_folds - 1, got: rest.len() });
    }
    let mut assignment = vec![0; n_sequences];
    deal(&mut rest, 1..n_folds, seed, &mut assignment);
    Ok(Folds { n_folds, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_sequences_six_folds() {
        let folds = make_folds(12, 6, 1).unwrap();
        let mut seen = [0; 12];
        for f in 0..6 {
            let val = folds.val_indices(f);
            assert_eq!(val.len(), 2);
            for i in val {
                seen[i] += 1;
            }
            assert_eq!(folds.train_indices(f).len(), 10);
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(folds, make_folds(12, 6, 1).unwrap());
    }

    #[test]
    fn too_few_sequences() {
        assert!(make_folds(5, 6, 0).is_err());
        assert!(make_folds(5, 1, 0).is_err());
    }

    #[test]
    fn canonical_fold_zero() {
        let folds = make_folds_with_canonical(12, &[3, 7], 6, 4).unwrap();
        assert_eq!(folds.val_indices(0), vec![3, 7]);
        for f in 1..6 {
            assert_eq!(folds.val_indices(f).len(), 2);
        }
        assert!(make_folds_with_canonical(12, &[3, 3], 6, 4).is_err());
    }
}
