use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::{EvalError, Result};

/// Generator for the shuffle of class `label`: ChaCha20 keyed by `seed`, on
/// stream `label`.
pub fn fold_rng(seed: u64, label: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

/// Stratified `k`-fold split.
///
/// For each class in ascending label order, its indices (ascending) are
/// shuffled with [`fold_rng`] and dealt round-robin to the folds, starting
/// where the previous class stopped. Each fold is returned sorted.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(EvalError::InvalidInput(format!("k must be >= 2, got {k}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(EvalError::InvalidInput(format!(
                "class {class} has {} trials, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(&mut fold_rng(seed, class));
        for m in members {
            folds[next].push(m);
            next = (next + 1) % k;
        }
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_division_gives_one_of_each() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let folds = stratified_kfold(&labels, 5, 7).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
    }

    #[test]
    fn same_seed_same_folds() {
        let labels: Vec<usize> = (0..23).map(|i| i % 2).collect();
        assert_eq!(stratified_kfold(&labels, 5, 3).unwrap(), stratified_kfold(&labels, 5, 3).unwrap());
        assert_ne!(stratified_kfold(&labels, 5, 3).unwrap(), stratified_kfold(&labels, 5, 4).unwrap());
    }

    #[test]
    fn too_small_class() {
        assert!(stratified_kfold(&[0, 0, 0, 1, 1, 1, 1, 1], 5, 0).is_err());
        assert!(stratified_kfold(&[0, 1], 1, 0).is_err());
    }
}
