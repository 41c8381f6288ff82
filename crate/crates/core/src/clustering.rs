//! Correlation-gated gain-difference clustering.
//!
//! Users whose effective channels point the same way can share a ZF beam;
//! among those, pairing a strong with a weak user maximises the NOMA gain.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CVector;

/// Step by which the correlation gate is relaxed when too few pairs qualify.
pub const THRESHOLD_RELAX_STEP: f64 = 0.05;

/// |u_xᴴ u_y| / (‖u_x‖ ‖u_y‖).
pub fn correlation(ux: &CVector, uy: &CVector) -> Result<f64> {
    if ux.len() != uy.len() {
        return Err(Error::dims(ux.len(), uy.len()));
    }
    let (nx, ny) = (ux.norm(), uy.norm());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::invalid("correlation of a zero channel"));
    }
    Ok((ux.dotc(uy).norm() / (nx * ny)).min(1.0))
}

/// Pairwise correlations and channel gains ‖u‖² of a user population.
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    corr: DMatrix<f64>,
    gains: Vec<f64>,
}

impl CorrelationTable {
    pub fn new(effective: &[CVector]) -> Result<Self> {
        let v = effective.len();
        let mut corr = DMatrix::zeros(v, v);
        for x in 0..v {
            corr[(x, x)] = 1.0;
            for y in x + 1..v {
                let c = correlation(&effective[x], &effective[y])?;
                corr[(x, y)] = c;
                corr[(y, x)] = c;
            }
        }
        let gains = effective.iter().map(|u| u.norm_squared()).collect();
        Ok(CorrelationTable { corr, gains })
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    pub fn correlation(&self, x: usize, y: usize) -> f64 {
        self.corr[(x, y)]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// D(x, y) = g_x - g_y for y > x when C(x, y) > Δ, zero elsewhere.
    pub fn difference_matrix(&self, threshold: f64) -> DMatrix<f64> {
        let v = self.num_users();
        let mut d = DMatrix::zeros(v, v);
        for x in 0..v {
            for y in x + 1..v {
                if self.corr[(x, y)] > threshold {
                    d[(x, y)] = self.gains[x] - self.gains[y];
                }
            }
        }
        d
    }
}

pub fn build_difference_matrix(effective: &[CVector], threshold: f64) -> Result<DMatrix<f64>> {
    if effective.len() < 2 {
        return Err(Error::invalid("clustering needs at least two users"));
    }
    Ok(CorrelationTable::new(effective)?.difference_matrix(threshold))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusteringFallback {
    None,
    /// The gate had to be lowered to this value.
    Relaxed(f64),
    /// Even a fully relaxed gate left too few pairs.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    /// User indices per cluster, weakest first.
    pub clusters: Vec<Vec<usize>>,
    /// Users not served this round, ascending.
    pub leftover: Vec<usize>,
    pub fallback: ClusteringFallback,
}

impl ClusterPlan {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn users_per_cluster(&self) -> usize {
        self.clusters.first().map_or(0, Vec::len)
    }

    /// Index of each cluster's strongest user.
    pub fn strongest_users(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| *c.last().expect("empty cluster")).collect()
    }

    pub fn is_gain_sorted(&self, gains: &[f64]) -> bool {
        self.clusters
            .iter()
            .all(|c| c.windows(2).all(|w| gains[w[1]] >= gains[w[0]]))
    }

    /// Checks the partition invariants against a population of `num_users`.
    pub fn validate(&self, num_users: usize, users_per_cluster: usize, num_clusters: usize) -> Result<()> {
        if self.clusters.len() != num_clusters || self.clusters.iter().any(|c| c.len() != users_per_cluster) {
            return Err(Error::invalid("cluster plan has the wrong shape"));
        }
        let mut seen = vec![false; num_users];
        for &u in self.clusters.iter().flatten().chain(&self.leftover) {
            if u >= num_users || seen[u] {
                return Err(Error::invalid(format!("user {u} is duplicated or out of range")));
            }
            seen[u] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("cluster plan drops users"));
        }
        Ok(())
    }

    fn from_clusters(mut clusters: Vec<Vec<usize>>, gains: &[f64], fallback: ClusteringFallback) -> Self {
        let mut used = vec![false; gains.len()];
        for c in &mut clusters {
            sort_by_gain(c, gains);
            for &u in c.iter() {
                used[u] = true;
            }
        }
        let leftover = (0..gains.len()).filter(|&u| !used[u]).collect();
        ClusterPlan {
            clusters,
            leftover,
            fallback,
        }
    }
}

fn sort_by_gain(cluster: &mut [usize], gains: &[f64]) {
    cluster.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));
}

/// Greedy selection on a difference matrix. Returns `None` when fewer than
/// `num_clusters` clusters can be formed under the gate `threshold`.
///
/// Each cluster is seeded with the largest |D| pair (ties go to the lowest
/// index pair); for K > 2 it grows by the free user most correlated with the
/// cluster's strongest member.
pub fn form_clusters(
    d: &DMatrix<f64>,
    table: &CorrelationTable,
    users_per_cluster: usize,
    num_clusters: usize,
    threshold: f64,
) -> Option<Vec<Vec<usize>>> {
    let v = d.nrows();
    let mut free = vec![true; v];
    let mut clusters = Vec::with_capacity(num_clusters);
    for _ in 0..num_clusters {
        if users_per_cluster == 1 {
            // Single-user beams: take the strongest free user.
            let best = (0..v).filter(|&x| free[x]).fold(None, |best: Option<usize>, x| match best {
                Some(b) if table.gains[b] >= table.gains[x] => Some(b),
                _ => Some(x),
            })?;
            free[best] = false;
            clusters.push(vec![best]);
            continue;
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for x in 0..v {
            if !free[x] {
                continue;
            }
            for y in x + 1..v {
                let mag = d[(x, y)].abs();
                if free[y] && mag > 0.0 && best.is_none_or(|(_, _, b)| mag > b) {
                    best = Some((x, y, mag));
                }
            }
        }
        let (x, y, _) = best?;
        free[x] = false;
        free[y] = false;
        let mut cluster = vec![x, y];
        while cluster.len() < users_per_cluster {
            let head = *cluster
                .iter()
                .max_by(|&&a, &&b| table.gains[a].total_cmp(&table.gains[b]))
                .expect("nonempty");
            let mut pick: Option<(usize, f64)> = None;
            for z in (0..v).filter(|&z| free[z]) {
                let c = table.correlation(head, z);
                if c > threshold && pick.is_none_or(|(_, pc)| c > pc) {
                    pick = Some((z, c));
                }
            }
            let (z, _) = pick?;
            free[z] = false;
            cluster.push(z);
        }
        clusters.push(cluster);
    }
    Some(clusters)
}

/// Full clustering with fallback: the gate is lowered in steps of 0.05 until
/// enough clusters form (down to just below zero, where every pair is
/// eligible); after that users are grouped at random.
pub fn cluster_users<R: Rng + ?Sized>(
    effective: &[CVector],
    users_per_cluster: usize,
    num_clusters: usize,
    threshold: f64,
    rng: &mut R,
) -> Result<ClusterPlan> {
    if effective.len() < users_per_cluster * num_clusters {
        return Err(Error::invalid(format!(
            "{} users cannot fill {num_clusters} clusters of {users_per_cluster}",
            effective.len()
        )));
    }
    let table = CorrelationTable::new(effective)?;
    let mut gate = threshold;
    loop {
        let d = table.difference_matrix(gate);
        if let Some(clusters) = form_clusters(&d, &table, users_per_cluster, num_clusters, gate) {
            let fallback = if gate == threshold {
                ClusteringFallback::None
            } else {
                ClusteringFallback::Relaxed(gate)
            };
            return Ok(ClusterPlan::from_clusters(clusters, &table.gains, fallback));
        }
        if gate < 0.0 {
            break;
        }
        gate -= THRESHOLD_RELAX_STEP;
    }
    let mut plan = random_clusters(&table.gains, users_per_cluster, num_clusters, rng);
    plan.fallback = ClusteringFallback::Random;
    Ok(plan)
}

/// Uniformly random grouping, each group sorted by gain.
pub fn random_clusters<R: Rng + ?Sized>(
    gains: &[f64],
    users_per_cluster: usize,
    num_clusters: usize,
    rng: &mut R,
) -> ClusterPlan {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.shuffle(rng);
    let clusters = order[..users_per_cluster * num_clusters]
        .chunks(users_per_cluster)
        .map(<[usize]>::to_vec)
        .collect();
    ClusterPlan::from_clusters(clusters, gains, ClusteringFallback::None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(r, i)| C64::new(r, i)))
    }

    #[test]
    fn correlation_reference_values() {
        let a = cv(&[(1.0, 0.0), (0.0, 1.0)]);
        let b = cv(&[(1.0, 0.0), (1.0, 0.0)]);
        assert!((correlation(&a, &b).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((correlation(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let e1 = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let e2 = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(correlation(&e1, &e2).unwrap(), 0.0);
        assert!(correlation(&e1, &CVector::zeros(2)).is_err());
    }

    #[test]
    fn gate_of_one_blocks_everything() {
        let users = vec![cv(&[(2.0, 0.0)]), cv(&[(1.0, 0.0)]), cv(&[(3.0, 0.0)])];
        let d = build_difference_matrix(&users, 1.0).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn only_parallel_pairs_populated() {
        // Users 0, 1 along e1 and users 2, 3 along e2.
        let users = vec![
            cv(&[(2.0, 0.0), (0.0, 0.0)]),
            cv(&[(1.0, 0.0), (0.0, 0.0)]),
            cv(&[(0.0, 0.0), (0.0, 3.0)]),
            cv(&[(0.0, 0.0), (1.0, 0.0)]),
        ];
        let d = build_difference_matrix(&users, 0.5).unwrap();
        let populated: Vec<(usize, usize)> = (0..4)
            .flat_map(|x| (x + 1..4).map(move |y| (x, y)))
            .filter(|&(x, y)| d[(x, y)] != 0.0)
            .collect();
        assert_eq!(populated, vec![(0, 1), (2, 3)]);
        assert_eq!(d[(0, 1)], 3.0);
        assert_eq!(d[(2, 3)], 8.0);
    }

    #[test]
    fn greedy_pairs_extremes_first() {
        // Gains 4, 3, 2, 1, all parallel.
        let users: Vec<CVector> = [2.0, 3f64.sqrt(), 2f64.sqrt(), 1.0]
            .iter()
            .map(|&a| cv(&[(a, 0.0), (0.0, 0.0)]))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = cluster_users(&users, 2, 2, 0.7, &mut rng).unwrap();
        assert_eq!(plan.clusters, vec![vec![3, 0], vec![2, 1]]);
        assert_eq!(plan.fallback, ClusteringFallback::None);
        assert!(plan.leftover.is_empty());
    }

    #[test]
    fn equal_gains_fall_back_to_random() {
        let users: Vec<CVector> = (0..6).map(|_| cv(&[(1.0, 0.0), (1.0, 0.0)])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = cluster_users(&users, 2, 3, 0.7, &mut rng).unwrap();
        assert_eq!(plan.fallback, ClusteringFallback::Random);
        plan.validate(6, 2, 3).unwrap();
    }

    #[test]
    fn larger_clusters_take_remaining_users_after_relaxing() {
        // Users 0 and 1 are parallel; 2 is orthogonal to both.
        let users = vec![
            cv(&[(3.0, 0.0), (0.0, 0.0)]),
            cv(&[(1.0, 0.0), (0.0, 0.0)]),
            cv(&[(0.0, 0.0), (2.0, 0.0)]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = cluster_users(&users, 3, 1, 0.7, &mut rng).unwrap();
        assert_eq!(plan.clusters, vec![vec![1, 2, 0]]);
        assert!(matches!(plan.fallback, ClusteringFallback::Relaxed(g) if g < 0.0));
    }
}
