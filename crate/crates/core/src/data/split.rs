use super::{DataError, Dataset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitStrategy {
    Random,
    /// Balance membership of target-quantile bins across splits (regression only).
    QuantileStratified { q_bins: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    pub strategy: SplitStrategy,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Self {
        Self {
            train,
            val,
            test,
            seed,
            strategy: SplitStrategy::Random,
        }
    }

    pub fn stratified(mut self, q_bins: usize) -> Self {
        self.strategy = SplitStrategy::QuantileStratified { q_bins };
        self
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Resolved train/val/test index sets. Each set is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn make_split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split, DataError> {
    let fr = spec.fractions();
    if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::Split(format!(
            "fractions {fr:?} must lie in [0, 1] and sum to 1"
        )));
    }
    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();

    match spec.strategy {
        SplitStrategy::Random => {
            let all: Vec<usize> = (0..n).collect();
            allocate(all, &fr, &mut rng, &mut parts);
        }
        SplitStrategy::QuantileStratified { q_bins } => {
            if q_bins < 2 {
                return Err(DataError::Split(format!("q_bins must be >= 2, got {q_bins}")));
            }
            if dataset.task().is_classification() {
                return Err(DataError::Split(
                    "quantile stratification is only defined for regression".into(),
                ));
            }
            let active = fr.iter().filter(|&&f| f > 0.0).count();
            for (b, members) in quantile_bins(dataset.targets(), q_bins).into_iter().enumerate() {
                if members.len() < active {
                    log::warn!(
                        "quantile bin {b} has {} rows for {active} splits; assigning randomly",
                        members.len()
                    );
                    for i in members {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut slot = 2;
                        for (s, f) in fr.iter().enumerate() {
                            acc += f;
                            if u < acc {
                                slot = s;
                                break;
                            }
                        }
                        parts[slot].push(i);
                    }
                } else {
                    allocate(members, &fr, &mut rng, &mut parts);
                }
            }
        }
    }

    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok(Split {
        train,
        val,
        test,
        seed: spec.seed,
    })
}

/// Shuffle `members` and cut it into train/val/test by rounded fractions.
fn allocate(
    mut members: Vec<usize>,
    fr: &[f64; 3],
    rng: &mut ChaCha8Rng,
    parts: &mut [Vec<usize>; 3],
) {
    members.shuffle(rng);
    let n = members.len();
    let n_train = ((fr[0] * n as f64).round() as usize).min(n);
    let n_val = ((fr[1] * n as f64).round() as usize).min(n - n_train);
    let n_val = if fr[2] == 0.0 { n - n_train } else { n_val };
    parts[0].extend_from_slice(&members[..n_train]);
    parts[1].extend_from_slice(&members[n_train..n_train + n_val]);
    parts[2].extend_from_slice(&members[n_train + n_val..]);
}

/// Rank-based quantile bins; tied targets share the bin of their lowest rank,
/// so a constant target collapses to a single bin. Members are in ascending
/// row order.
pub(crate) fn quantile_bins(targets: &[f64], q_bins: usize) -> Vec<Vec<usize>> {
    let n = targets.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]).then(a.cmp(&b)));
    let mut bins = vec![Vec::new(); q_bins];
    let mut first_rank = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank == 0 || targets[i] != targets[order[rank - 1]] {
            first_rank = rank;
        }
        bins[first_rank * q_bins / n].push(i);
    }
    bins.retain(|b| !b.is_empty());
    for b in bins.iter_mut() {
        b.sort_unstable();
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Matrix, Task};
    use std::collections::HashSet;

    fn regression(targets: Vec<f64>) -> Dataset {
        let n = targets.len();
        Dataset::new(
            Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap(),
            vec!["x".into()],
            targets,
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn random_eighty_twenty_on_ten_rows() {
        let d = regression((0..10).map(f64::from).collect());
        let s = make_split(&d, &SplitSpec::new(0.8, 0.0, 0.2, 7)).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.test.len(), 2);
        assert!(s.val.is_empty());
        let all: HashSet<_> = s.train.iter().chain(&s.test).collect();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn constant_targets_stratified_equals_random() {
        let d = regression(vec![3.0; 40]);
        let random = make_split(&d, &SplitSpec::new(0.8, 0.0, 0.2, 11)).unwrap();
        let strat = make_split(&d, &SplitSpec::new(0.8, 0.0, 0.2, 11).stratified(5)).unwrap();
        assert_eq!(random, strat);
    }

    #[test]
    fn stratified_uniform_targets_balance_bins() {
        // Brute-force checker: recompute bin membership from sorted target
        // order (20 per bin) and count each bin's train/test members.
        let targets: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
        let d = regression(targets.clone());
        let s = make_split(&d, &SplitSpec::new(0.8, 0.0, 0.2, 3).stratified(5)).unwrap();
        let mut sorted: Vec<usize> = (0..100).collect();
        sorted.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]));
        let train: HashSet<_> = s.train.iter().copied().collect();
        for bin in sorted.chunks(20) {
            let in_train = bin.iter().filter(|i| train.contains(i)).count();
            assert_eq!(in_train, 16);
            assert_eq!(bin.len() - in_train, 4);
        }
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let d = regression(vec![1.0, 2.0]);
        assert!(make_split(&d, &SplitSpec::new(0.5, 0.1, 0.1, 0)).is_err());
    }

    #[test]
    fn small_bins_fall_back_to_random_assignment() {
        let d = regression(vec![1.0, 2.0, 3.0, 4.0]);
        let s = make_split(&d, &SplitSpec::new(0.5, 0.25, 0.25, 5).stratified(4)).unwrap();
        assert_eq!(s.len(), 4);
    }
}
