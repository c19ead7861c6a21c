//! Agglomerative clustering with Lance–Williams distance updates.
//!
//! Leaves carry ids `0..n`; the cluster formed by merge `t` gets id `n + t`.
//! Among equal-height candidates the pair with the lexicographically smallest
//! `(id_a, id_b)` merges first. Each slot caches its nearest neighbour, so a
//! merge only rescans rows whose neighbour disappeared.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Linkage, Metric};
use crate::error::{Error, Result};
use crate::similarity::cosine_slices;

pub const MAX_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageTree {
    pub labels: Vec<String>,
    pub linkage: Linkage,
    pub metric: Metric,
    pub merges: Vec<Merge>,
}

impl LinkageTree {
    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }

    /// Leaves in dendrogram order (left child `a` before right child `b`).
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.leaf_count();
        if n == 1 {
            return vec![0];
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(node) = stack.pop() {
            if node < n {
                order.push(node);
            } else {
                let m = &self.merges[node - n];
                stack.push(m.b);
                stack.push(m.a);
            }
        }
        order
    }
}

/// Condensed upper-triangle storage.
struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn distance_matrix<P: AsRef<[f64]> + Sync>(points: &[P], metric: Metric, squared: bool) -> Result<Condensed> {
    let n = points.len();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let (a, b) = (points[i].as_ref(), points[j].as_ref());
                    match metric {
                        Metric::Euclidean => {
                            let d = euclidean(a, b);
                            Ok(if squared { d * d } else { d })
                        }
                        Metric::CosineDistance => Ok(1.0 - cosine_slices(a, b)?),
                    }
                })
                .collect()
        })
        .collect();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for row in rows {
        d.extend(row?);
    }
    Ok(Condensed { n, d })
}

#[inline]
fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Agglomerates `points` into a full binary tree. Ward requires euclidean.
pub fn hcluster<P: AsRef<[f64]> + Sync>(
    points: &[P],
    labels: Vec<String>,
    metric: Metric,
    linkage: Linkage,
) -> Result<LinkageTree> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument("clustering needs at least 2 points".into()));
    }
    if n > MAX_POINTS {
        return Err(Error::InvalidArgument(format!(
            "{n} points exceed the clustering cap of {MAX_POINTS}; subsample the panel first"
        )));
    }
    if labels.len() != n {
        return Err(Error::InvalidArgument("one label per point required".into()));
    }
    let dim = points[0].as_ref().len();
    if points.iter().any(|p| p.as_ref().len() != dim || p.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("points must share a dimension and be finite".into()));
    }
    if linkage == Linkage::Ward && metric != Metric::Euclidean {
        return Err(Error::MetricLinkageMismatch);
    }
    // ward runs on squared euclidean distances and reports their square roots
    let ward = linkage == Linkage::Ward;
    let mut dist = distance_matrix(points, metric, ward)?;

    let mut active = vec![true; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];

    let better = |d: f64, k: (usize, usize), bd: f64, bk: (usize, usize)| d < bd || (d == bd && k < bk);

    let rescan = |s: usize, dist: &Condensed, active: &[bool], id: &[usize]| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            if t == s || !active[t] {
                continue;
            }
            let d = dist.get(s, t);
            if best.0 == usize::MAX || better(d, key(id[s], id[t]), best.1, key(id[s], id[best.0])) {
                best = (t, d);
            }
        }
        best
    };

    for s in 0..n {
        (nn[s], nn_d[s]) = rescan(s, &dist, &active, &id);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut s = usize::MAX;
        for k in 0..n {
            if !active[k] {
                continue;
            }
            if s == usize::MAX || better(nn_d[k], key(id[k], id[nn[k]]), nn_d[s], key(id[s], id[nn[s]])) {
                s = k;
            }
        }
        let t = nn[s];
        let d_st = nn_d[s];
        let (ns, nt) = (size[s] as f64, size[t] as f64);
        let (ia, ib) = key(id[s], id[t]);
        merges.push(Merge {
            a: ia,
            b: ib,
            height: if ward { d_st.max(0.0).sqrt() } else { d_st },
            size: size[s] + size[t],
        });

        // slot s hosts the merged cluster, slot t retires
        active[t] = false;
        for k in 0..n {
            if !active[k] || k == s {
                continue;
            }
            let (dsk, dtk) = (dist.get(s, k), dist.get(t, k));
            let nk = size[k] as f64;
            let updated = match linkage {
                Linkage::Ward => ((nk + ns) * dsk + (nk + nt) * dtk - nk * d_st) / (nk + ns + nt),
                Linkage::Average => (ns * dsk + nt * dtk) / (ns + nt),
                Linkage::Complete => dsk.max(dtk),
            };
            dist.set(s, k, updated);
        }
        id[s] = n + step;
        size[s] += size[t];

        (nn[s], nn_d[s]) = if step + 2 < n { rescan(s, &dist, &active, &id) } else { (usize::MAX, f64::INFINITY) };
        for k in 0..n {
            if !active[k] || k == s {
                continue;
            }
            if nn[k] == s || nn[k] == t {
                (nn[k], nn_d[k]) = rescan(k, &dist, &active, &id);
            } else {
                let d = dist.get(k, s);
                if better(d, key(id[k], id[s]), nn_d[k], key(id[k], id[nn[k]])) {
                    nn[k] = s;
                    nn_d[k] = d;
                }
            }
        }
    }
    Ok(LinkageTree { labels, linkage, metric, merges })
}
