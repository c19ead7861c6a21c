use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LinkageTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster per leaf, numbered in order of first appearance.
    pub labels: Vec<usize>,
    pub silhouette_mean: f64,
    /// Set when the silhouette is undefined (k = 1, k = n, or all points coincide);
    /// `silhouette_mean` is then 0.
    pub silhouette_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteRow {
    pub k: usize,
    pub silhouette: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub chosen: usize,
    pub table: Vec<SilhouetteRow>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Leaf labels after replaying the first `n - k` merges.
pub fn cut_labels(tree: &LinkageTree, k: usize) -> Result<Vec<usize>> {
    let n = tree.leaf_count();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let mut parent: Vec<usize> = (0..n + tree.merges.len()).collect();
    for (t, m) in tree.merges.iter().take(n - k).enumerate() {
        parent[m.a] = n + t;
        parent[m.b] = n + t;
    }
    let mut relabel = std::collections::HashMap::new();
    let labels = (0..n)
        .map(|leaf| {
            let root = find(&mut parent, leaf);
            let next = relabel.len();
            *relabel.entry(root).or_insert(next)
        })
        .collect();
    Ok(labels)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette with euclidean distances. Members of singleton clusters
/// score 0, as does any point with `a = b = 0`. Returns `(mean, degenerate)`.
pub fn silhouette<P: AsRef<[f64]> + Sync>(points: &[P], labels: &[usize], k: usize) -> (f64, bool) {
    let n = points.len();
    if k < 2 || k >= n {
        return (0.0, true);
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let scores: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if counts[own] == 1 {
                return Some(0.0);
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += euclidean(points[i].as_ref(), points[j].as_ref());
                }
            }
            let a = sums[own] / (counts[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            // None marks a point with no spread at all
            (m > 0.0).then(|| (b - a) / m)
        })
        .collect();
    if scores.iter().all(Option::is_none) {
        return (0.0, true);
    }
    (scores.iter().map(|s| s.unwrap_or(0.0)).sum::<f64>() / n as f64, false)
}

/// Cuts the tree into exactly `k` clusters and scores the partition.
pub fn cut_tree<P: AsRef<[f64]> + Sync>(tree: &LinkageTree, k: usize, points: &[P]) -> Result<ClusterAssignment> {
    if points.len() != tree.leaf_count() {
        return Err(Error::InvalidArgument("points do not match the tree's leaves".into()));
    }
    let labels = cut_labels(tree, k)?;
    let (silhouette_mean, silhouette_degenerate) = silhouette(points, &labels, k);
    Ok(ClusterAssignment { k, labels, silhouette_mean, silhouette_degenerate })
}

/// Picks the candidate cut with the highest mean silhouette; ties go to the smaller k.
pub fn select_k<P: AsRef<[f64]> + Sync>(tree: &LinkageTree, candidates: &[usize], points: &[P]) -> Result<KSelection> {
    let n = tree.leaf_count();
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::InvalidArgument("no candidate k".into()));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k < 2 || k + 1 > n) {
        return Err(Error::InvalidArgument(format!("candidate k = {bad} outside 2..={}", n.saturating_sub(1))));
    }
    let mut table = Vec::with_capacity(ks.len());
    for &k in &ks {
        let a = cut_tree(tree, k, points)?;
        table.push(SilhouetteRow { k, silhouette: a.silhouette_mean, degenerate: a.silhouette_degenerate });
    }
    let mut chosen: Option<&SilhouetteRow> = None;
    for row in table.iter().filter(|r| !r.degenerate) {
        if chosen.is_none_or(|c| row.silhouette > c.silhouette) {
            chosen = Some(row);
        }
    }
    let chosen = chosen.ok_or(Error::SelectionDegenerate)?.k;
    Ok(KSelection { chosen, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{hcluster, Linkage, Metric};
    use gpdi_testkit::{oracle, synth};

    fn tree(points: &[Vec<f64>]) -> LinkageTree {
        let labels = (0..points.len()).map(|i| i.to_string()).collect();
        hcluster(points, labels, Metric::Euclidean, Linkage::Ward).unwrap()
    }

    #[test]
    fn degenerate_cuts() {
        let mut rng = synth::rng(1);
        let pts = synth::uniform_points(&mut rng, 12, 2);
        let t = tree(&pts);
        let all = cut_tree(&t, 12, &pts).unwrap();
        assert_eq!(all.labels, (0..12).collect::<Vec<_>>());
        assert!(all.silhouette_degenerate);
        assert_eq!(all.silhouette_mean, 0.0);
        let one = cut_tree(&t, 1, &pts).unwrap();
        assert!(one.labels.iter().all(|&l| l == 0));
        assert!(one.silhouette_degenerate);
        assert!(cut_tree(&t, 0, &pts).is_err());
        assert!(cut_tree(&t, 13, &pts).is_err());
    }

    #[test]
    fn separated_blobs_score_high() {
        let mut rng = synth::rng(2);
        let (pts, _) = synth::blobs(&mut rng, 2, 40, 30, 5.0 * 30f64.sqrt());
        let a = cut_tree(&tree(&pts), 2, &pts).unwrap();
        assert!(a.silhouette_mean > 0.8, "{}", a.silhouette_mean);
    }

    #[test]
    fn silhouette_matches_definition() {
        let mut rng = synth::rng(3);
        let (pts, _) = synth::blobs(&mut rng, 3, 15, 4, 4.0);
        let t = tree(&pts);
        for k in 2..8 {
            let a = cut_tree(&t, k, &pts).unwrap();
            assert!((a.silhouette_mean - oracle::silhouette(&pts, &a.labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn cuts_nest() {
        let mut rng = synth::rng(4);
        let pts = synth::uniform_points(&mut rng, 30, 3);
        let t = tree(&pts);
        for k in 1..30 {
            let coarse = cut_labels(&t, k).unwrap();
            let fine = cut_labels(&t, k + 1).unwrap();
            let mut owner = std::collections::HashMap::new();
            for (f, c) in fine.iter().zip(&coarse) {
                assert_eq!(*owner.entry(*f).or_insert(*c), *c);
            }
            assert_eq!(coarse.iter().max().unwrap() + 1, k);
        }
    }

    #[test]
    fn selects_planted_three() {
        let mut rng = synth::rng(5);
        let (pts, _) = synth::blobs(&mut rng, 3, 30, 2, 10.0);
        let s = select_k(&tree(&pts), &[2, 3, 4], &pts).unwrap();
        assert_eq!(s.chosen, 3);
        assert_eq!(s.table.len(), 3);
    }

    #[test]
    fn singleton_candidate() {
        let mut rng = synth::rng(6);
        let pts = synth::uniform_points(&mut rng, 10, 2);
        assert_eq!(select_k(&tree(&pts), &[2], &pts).unwrap().chosen, 2);
        assert!(select_k(&tree(&pts), &[10], &pts).is_err());
        assert!(select_k(&tree(&pts), &[1], &pts).is_err());
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = vec![vec![1.0, 2.0]; 8];
        let s = select_k(&tree(&pts), &[2, 3], &pts);
        assert_eq!(s, Err(Error::SelectionDegenerate));
    }
}
