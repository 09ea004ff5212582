use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::reductions::murcko_scaffold;

use super::{Dataset, HarnessError};

pub const BIN_COUNT: usize = 10;
pub const FOLD_COUNT: usize = 10;
pub const TEST_FRACTION: f64 = 0.1;

/// Scaffold hold-out plus stratified cross-validation folds over the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub test: Vec<usize>,
    /// Non-test records, ascending.
    pub train: Vec<usize>,
    /// Equal-frequency target bins over `train`.
    pub bins: Vec<Vec<usize>>,
    pub folds: Vec<Vec<usize>>,
}

impl SplitPlan {
    pub fn fold_validation(&self, k: usize) -> &[usize] {
        &self.folds[k]
    }

    pub fn fold_training(&self, k: usize) -> Vec<usize> {
        let val = &self.folds[k];
        self.train.iter().copied().filter(|i| !val.contains(i)).collect()
    }
}

/// Greedy largest-first scaffold hold-out, then round-robin fold assignment
/// within shuffled quantile bins. The fold counter runs on across bins.
pub fn make_split(ds: &Dataset, seed: u64) -> Result<SplitPlan, HarnessError> {
    let n = ds.len();
    if n < BIN_COUNT {
        return Err(HarnessError::TooFewRecords { needed: BIN_COUNT, got: n });
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, g) in ds.graphs.iter().enumerate() {
        groups.entry(murcko_scaffold(g)).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(HarnessError::DegenerateSplit(
            "all records share one scaffold".into(),
        ));
    }
    let mut ordered: Vec<(String, Vec<usize>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let wanted = (TEST_FRACTION * n as f64).ceil() as usize;
    let mut in_test = vec![false; n];
    let mut test = Vec::new();
    for (_, members) in &ordered {
        if test.len() >= wanted {
            break;
        }
        for &i in members {
            in_test[i] = true;
            test.push(i);
        }
    }
    test.sort_unstable();
    let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    if train.len() < BIN_COUNT.max(FOLD_COUNT) {
        return Err(HarnessError::DegenerateSplit(format!(
            "scaffold hold-out leaves {} training records",
            train.len()
        )));
    }

    let mut by_target = train.clone();
    by_target.sort_by(|&a, &b| {
        ds.records[a]
            .target
            .total_cmp(&ds.records[b].target)
            .then(a.cmp(&b))
    });
    let m = by_target.len();
    let bins: Vec<Vec<usize>> = (0..BIN_COUNT)
        .map(|b| {
            let mut bin = by_target[b * m / BIN_COUNT..(b + 1) * m / BIN_COUNT].to_vec();
            bin.sort_unstable();
            bin
        })
        .collect();

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); FOLD_COUNT];
    let mut counter = 0usize;
    for bin in &bins {
        let mut members = bin.clone();
        members.shuffle(&mut rng);
        for i in members {
            folds[counter % FOLD_COUNT].push(i);
            counter += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(SplitPlan {
        seed,
        test,
        train,
        bins,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Record;

    fn dataset(smiles: &[&str], targets: impl Fn(usize) -> f64) -> Dataset {
        Dataset::from_records(
            smiles
                .iter()
                .enumerate()
                .map(|(i, s)| Record {
                    smiles: s.to_string(),
                    target: targets(i),
                    id: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn hundred() -> Dataset {
        // Ten benzene derivatives form the largest scaffold group; ninety more
        // molecules spread over ten smaller groups of nine.
        let mut smiles: Vec<String> = (0..10).map(|i| format!("c1ccccc1{}", "C".repeat(i + 1))).collect();
        let rings = [
            "C1CC1", "C1CCC1", "C1CCCC1", "C1CCCCC1", "C1CCCCCC1", "C1CCCCCCC1", "c1ccncc1", "c1ccoc1",
            "C1CCNCC1", "C1CCOCC1",
        ];
        for ring in rings {
            for k in 0..9 {
                smiles.push(format!("{ring}{}O", "C".repeat(k + 1)));
            }
        }
        let refs: Vec<&str> = smiles.iter().map(String::as_str).collect();
        dataset(&refs, |i| i as f64)
    }

    #[test]
    fn hundred_uniform_targets_give_nine_per_fold() {
        let ds = hundred();
        let plan = make_split(&ds, 7).unwrap();
        assert!(plan.test.len() >= 10);
        assert_eq!(plan.train.len(), 90);
        for fold in &plan.folds {
            assert_eq!(fold.len(), 9);
        }
        for bin in &plan.bins {
            for fold in &plan.folds {
                let c = bin.iter().filter(|i| fold.contains(i)).count();
                assert!(c <= 1);
            }
        }
    }

    #[test]
    fn single_scaffold_is_degenerate() {
        let smiles: Vec<String> = (0..20).map(|i| format!("c1ccccc1{}", "C".repeat(i + 1))).collect();
        let refs: Vec<&str> = smiles.iter().map(String::as_str).collect();
        let ds = dataset(&refs, |i| i as f64);
        assert!(matches!(make_split(&ds, 1), Err(HarnessError::DegenerateSplit(_))));
    }

    #[test]
    fn too_few_records() {
        let ds = dataset(&["C", "CC", "CCC"], |i| i as f64);
        assert!(matches!(
            make_split(&ds, 1),
            Err(HarnessError::TooFewRecords { needed: 10, got: 3 })
        ));
    }

    #[test]
    fn seed_changes_membership_not_balance() {
        let ds = hundred();
        let a = make_split(&ds, 1).unwrap();
        let b = make_split(&ds, 2).unwrap();
        assert_eq!(a.test, b.test);
        assert_ne!(a.folds, b.folds);
        let sizes = |p: &SplitPlan| p.folds.iter().map(Vec::len).collect::<Vec<_>>();
        assert_eq!(sizes(&a), sizes(&b));
    }

    #[test]
    fn no_scaffold_leaks_into_training() {
        let ds = hundred();
        let plan = make_split(&ds, 3).unwrap();
        let key = |i: usize| murcko_scaffold(&ds.graphs[i]);
        for &t in &plan.test {
            assert!(plan.train.iter().all(|&i| key(i) != key(t)));
        }
    }
}
