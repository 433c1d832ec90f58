//! Splitting a dataset across clients, IID or with Dirichlet label skew.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::DataError;

/// Disjoint per-client row index lists into a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignments: Vec<Vec<usize>>,
    /// Dirichlet concentration, `None` for an IID split.
    pub theta: Option<f64>,
}

impl Partition {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn total(&self) -> usize {
        self.assignments.iter().map(Vec::len).sum()
    }

    /// `proportions[k][i]`: fraction of class `k` samples held by client `i`.
    /// Every row sums to one.
    pub fn class_proportions(&self, class_ids: &[usize]) -> Vec<Vec<f64>> {
        let k = class_ids.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0usize; self.n()]; k];
        for (client, rows) in self.assignments.iter().enumerate() {
            for &r in rows {
                counts[class_ids[r]][client] += 1;
            }
        }
        counts
            .into_iter()
            .map(|row| {
                let total = row.iter().sum::<usize>().max(1) as f64;
                row.into_iter().map(|c| c as f64 / total).collect()
            })
            .collect()
    }
}

/// Shuffles the rows and deals them round-robin, so shard sizes differ by at most one.
pub fn iid_partition<R: Rng + ?Sized>(samples: usize, n: usize, rng: &mut R) -> Result<Partition, DataError> {
    if n == 0 || samples < n {
        return Err(DataError::Invalid(format!("cannot split {samples} samples across {n} clients")));
    }
    let mut order: Vec<usize> = (0..samples).collect();
    order.shuffle(rng);
    let mut assignments = vec![Vec::with_capacity(samples / n + 1); n];
    for (pos, row) in order.into_iter().enumerate() {
        assignments[pos % n].push(row);
    }
    Ok(Partition { assignments, theta: None })
}

/// Draws `p ~ Dir(theta * 1_n)` by normalizing independent Gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(n: usize, theta: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(theta, 1.0).expect("theta > 0");
    let mut p: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 && total.is_finite() {
        p.iter_mut().for_each(|v| *v /= total);
    } else {
        // every variate underflowed: all mass on one client
        p.iter_mut().for_each(|v| *v = 0.0);
        p[rng.random_range(0..n)] = 1.0;
    }
    p
}

/// Label-skewed split: for each class a client distribution is drawn from
/// `Dir(theta)` and that class's samples are assigned to clients by
/// independent categorical draws. Clients left empty receive one sample
/// taken from the currently largest client.
pub fn dirichlet_partition<R: Rng + ?Sized>(
    class_ids: &[usize],
    n: usize,
    theta: f64,
    rng: &mut R,
) -> Result<Partition, DataError> {
    if n == 0 {
        return Err(DataError::Invalid("need at least one client".into()));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(DataError::Invalid(format!("Dirichlet concentration must be > 0, got {theta}")));
    }
    if class_ids.len() < n {
        return Err(DataError::Invalid(format!("cannot split {} samples across {n} clients", class_ids.len())));
    }
    if n == 1 {
        return Ok(Partition { assignments: vec![(0..class_ids.len()).collect()], theta: Some(theta) });
    }
    let k = class_ids.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); k];
    for (row, &c) in class_ids.iter().enumerate() {
        by_class[c].push(row);
    }
    let mut assignments = vec![Vec::new(); n];
    for rows in by_class.iter_mut() {
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(rng);
        let p = sample_dirichlet(n, theta, rng);
        let pick = WeightedIndex::new(&p).map_err(|e| DataError::Invalid(e.to_string()))?;
        for &row in rows.iter() {
            assignments[pick.sample(rng)].push(row);
        }
    }
    while let Some(empty) = assignments.iter().position(Vec::is_empty) {
        let largest = (0..n).max_by_key(|&i| (assignments[i].len(), std::cmp::Reverse(i))).expect("n >= 1");
        let moved = assignments[largest].pop().expect("largest client holds >= 2 samples");
        assignments[empty].push(moved);
    }
    for a in assignments.iter_mut() {
        a.sort_unstable();
    }
    Ok(Partition { assignments, theta: Some(theta) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_disjoint_cover(p: &Partition, total: usize) {
        let mut all: Vec<usize> = p.assignments.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..total).collect::<Vec<_>>());
        assert!(p.assignments.iter().all(|a| !a.is_empty()));
    }

    #[test]
    fn near_iid_at_large_concentration() {
        let labels: Vec<usize> = (0..40_000).map(|i| i % 2).collect();
        for seed in 0..10 {
            let p = dirichlet_partition(&labels, 4, 1e6, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            check_disjoint_cover(&p, labels.len());
            for row in p.class_proportions(&labels) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for share in row {
                    assert!((share - 0.25).abs() < 0.02, "seed {seed}: share {share}");
                }
            }
        }
    }

    #[test]
    fn small_concentration_is_skewed() {
        let labels: Vec<usize> = (0..5_000).map(|i| i % 10).collect();
        let skewed = (0..10u64)
            .filter(|s| {
                let p = dirichlet_partition(&labels, 10, 0.1, &mut ChaCha8Rng::seed_from_u64(42 + s)).unwrap();
                check_disjoint_cover(&p, labels.len());
                p.class_proportions(&labels).iter().flatten().any(|&v| v > 0.6)
            })
            .count();
        assert!(skewed > 5, "only {skewed} of 10 draws were skewed");
    }

    #[test]
    fn single_client_owns_everything() {
        let labels = vec![0, 1, 1, 0, 2];
        let p = dirichlet_partition(&labels, 1, 0.5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.assignments, vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn repairs_empty_clients() {
        // one class, extreme skew: most clients would be empty without repair
        let labels = vec![0usize; 30];
        for seed in 0..20 {
            let p = dirichlet_partition(&labels, 8, 0.01, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            check_disjoint_cover(&p, 30);
        }
        assert!(dirichlet_partition(&labels[..3], 8, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn iid_split_is_balanced() {
        let p = iid_partition(103, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        check_disjoint_cover(&p, 103);
        assert!(p.assignments.iter().all(|a| a.len() == 25 || a.len() == 26));
        assert_eq!(p.theta, None);
    }
}
