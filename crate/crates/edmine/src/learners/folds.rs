//! Stratified k-fold index assignment.

use rand::prelude::*;

use crate::error::{EdmError, Result};
use crate::seed::rng_from_seed;

/// Partition `0..y.len()` into k folds with per-class counts differing by at
/// most one across folds. Requires every class to have at least k members.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(EdmError::Model(format!("k must be >= 2, got {k}")));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &label) in y.iter().enumerate() {
        by_class[label as usize].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(EdmError::Model(format!(
                "class {class} has {} members, fewer than k = {k}",
                members.len()
            )));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for (i, &idx) in members.iter().enumerate() {
            folds[i % k].push(idx);
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// All indices not in `fold`, ascending.
pub fn complement(fold: &[usize], n: usize) -> Vec<usize> {
    let mut in_fold = vec![false; n];
    for &i in fold {
        in_fold[i] = true;
    }
    (0..n).filter(|&i| !in_fold[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn balanced_twenty_gives_one_of_each_per_fold() {
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let folds = stratified_kfold(&y, 10, 7).unwrap();
        for fold in &folds {
            assert_eq!(fold.len(), 2);
            let ones = fold.iter().filter(|&&i| y[i] == 1).count();
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn folds_partition_all_indices() {
        let y: Vec<u8> = (0..37).map(|i| u8::from(i % 3 == 0)).collect();
        let folds = stratified_kfold(&y, 5, 3).unwrap();
        let mut seen = BTreeSet::new();
        for fold in &folds {
            for &i in fold {
                assert!(seen.insert(i), "index {i} in two folds");
            }
        }
        assert_eq!(seen.len(), 37);
    }

    #[test]
    fn same_seed_same_folds() {
        let y: Vec<u8> = (0..50).map(|i| u8::from(i % 4 == 0)).collect();
        assert_eq!(
            stratified_kfold(&y, 5, 11).unwrap(),
            stratified_kfold(&y, 5, 11).unwrap()
        );
    }

    #[test]
    fn small_class_is_rejected_by_name() {
        let mut y = vec![0u8; 30];
        y[0] = 1;
        y[1] = 1;
        let err = stratified_kfold(&y, 10, 0).unwrap_err().to_string();
        assert!(err.contains("class 1"), "{err}");
    }
}
