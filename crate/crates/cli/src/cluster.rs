//! One-dimensional gap clustering for figure-level summaries: sort the
//! support, split wherever neighbouring traits are more than the gap
//! apart. Matches how clusters separate visually in trait-density plots.

use serde::Serialize;

/// Split threshold in trait units. A gap of exactly the threshold does
/// not split.
pub const CLUSTER_GAP: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    /// Mass-weighted mean trait.
    pub mean: f64,
    /// Total density in the cluster.
    pub mass: f64,
    pub lo: f64,
    pub hi: f64,
    /// Distinct traits in the cluster.
    pub members: usize,
}

/// Cluster weighted atoms `(trait, mass)`. Atoms with zero or negative
/// mass are dropped first; an empty input gives an empty list.
pub fn gap_clusters(atoms: &[(f64, f64)], gap: f64) -> Vec<Cluster> {
    let mut atoms: Vec<(f64, f64)> = atoms.iter().copied().filter(|&(_, m)| m > 0.0).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut clusters = Vec::new();
    let mut start = 0;
    for i in 0..atoms.len() {
        let boundary = i + 1 == atoms.len() || atoms[i + 1].0 - atoms[i].0 > gap;
        if boundary {
            let group = &atoms[start..=i];
            let mass: f64 = group.iter().map(|&(_, m)| m).sum();
            let mean = group.iter().map(|&(x, m)| x * m).sum::<f64>() / mass;
            clusters.push(Cluster {
                mean,
                mass,
                lo: group[0].0,
                hi: group[group.len() - 1].0,
                members: group.len(),
            });
            start = i + 1;
        }
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_well_separated_groups_make_two_clusters() {
        let atoms = [(-0.31, 0.2), (-0.30, 0.3), (0.28, 0.25), (0.30, 0.25)];
        let clusters = gap_clusters(&atoms, CLUSTER_GAP);
        assert_eq!(clusters.len(), 2);
        assert!((clusters[0].mean - (-0.304)).abs() < 1e-12);
        assert!((clusters[0].mass - 0.5).abs() < 1e-12);
        assert_eq!(clusters[1].members, 2);
        assert_eq!(clusters[1].lo, 0.28);
        assert_eq!(clusters[1].hi, 0.30);
    }

    #[test]
    fn a_gap_of_exactly_the_threshold_does_not_split() {
        let clusters = gap_clusters(&[(0.0, 1.0), (0.1, 1.0)], CLUSTER_GAP);
        assert_eq!(clusters.len(), 1);
        let clusters = gap_clusters(&[(0.0, 1.0), (0.1000001, 1.0)], CLUSTER_GAP);
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn unsorted_input_and_zero_mass_atoms_are_handled() {
        let atoms = [(0.5, 0.3), (-0.5, 0.0), (0.45, 0.1), (-0.5, 0.2)];
        let clusters = gap_clusters(&atoms, CLUSTER_GAP);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].members, 1);
        assert_eq!(clusters[0].mean, -0.5);
        assert_eq!(clusters[1].members, 2);
        assert!(gap_clusters(&[], CLUSTER_GAP).is_empty());
    }

    #[test]
    fn a_chain_of_small_gaps_stays_one_cluster() {
        // consecutive gaps all below the threshold even though the ends
        // are far apart
        let atoms: Vec<(f64, f64)> = (0..11).map(|i| (0.09 * i as f64, 1.0)).collect();
        let clusters = gap_clusters(&atoms, CLUSTER_GAP);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members, 11);
        assert!((clusters[0].hi - clusters[0].lo - 0.9).abs() < 1e-12);
    }
}
