//! Brute-force reference computations.

use crate::dd::{self, DD};

pub fn mean(values: &[f64]) -> f64 {
    (dd::sum(values.iter().map(|&v| DD::new(v))) / DD::new(values.len() as f64)).to_f64()
}

/// Two-pass population standard deviation in double-double.
pub fn population_sd(values: &[f64]) -> f64 {
    let m = dd::sum(values.iter().map(|&v| DD::new(v))) / DD::new(values.len() as f64);
    let ss = dd::sum(values.iter().map(|&v| {
        let d = DD::new(v) - m;
        d * d
    }));
    (ss / DD::new(values.len() as f64)).sqrt().to_f64()
}

fn dot_dd(x: &[f64], y: &[f64]) -> DD {
    dd::sum(x.iter().zip(y).map(|(&a, &b)| DD::new(a) * DD::new(b)))
}

/// `x.y / (|x| |y|)` evaluated in double-double from the raw vectors.
pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let num = dot_dd(x, y);
    let den = dot_dd(x, x).sqrt() * dot_dd(y, y).sqrt();
    (num / den).to_f64().clamp(-1.0, 1.0)
}

/// Every pairwise cosine (i < j), materialized.
pub fn all_similarities<V: AsRef<[f64]>>(rows: &[V]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            out.push(cosine(rows[i].as_ref(), rows[j].as_ref()));
        }
    }
    out
}

/// Sorted `ln s` for every strictly positive pairwise similarity.
pub fn sorted_ln_positive<V: AsRef<[f64]>>(rows: &[V]) -> Vec<f64> {
    let mut v: Vec<f64> = all_similarities(rows).into_iter().filter(|&s| s > 0.0).map(f64::ln).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn sort_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    median_of_sorted(&v)
}

/// Store-all diversity index: `(positive pair count, median ln s, 1/|median|)`.
pub fn gpdi<V: AsRef<[f64]>>(rows: &[V]) -> (usize, f64, f64) {
    let v = sorted_ln_positive(rows);
    let m = median_of_sorted(&v);
    (v.len(), m, 1.0 / m.abs())
}

/// Histogram of values over `[lo, lo + width*bins)` with a separate underflow count,
/// values at the upper edge folded into the last bin.
pub fn histogram(values: &[f64], lo: f64, width: f64, bins: usize) -> (u64, Vec<u64>) {
    let mut counts = vec![0u64; bins];
    let mut under = 0;
    for &v in values {
        if v < lo {
            under += 1;
            continue;
        }
        let b = ((v - lo) / width).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    (under, counts)
}

/// KS statistic by evaluating both ECDFs at every observed value.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    sa.iter()
        .chain(sb.iter())
        .map(|&t| {
            let ca = sa.partition_point(|&v| v <= t);
            let cb = sb.partition_point(|&v| v <= t);
            (ca as f64 / na - cb as f64 / nb).abs()
        })
        .fold(0.0, f64::max)
}

/// Naive quadratic double loop, for small samples.
pub fn ks_statistic_double_loop(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut best = 0.0f64;
    for &t in a.iter().chain(b) {
        let ca = a.iter().filter(|&&v| v <= t).count();
        let cb = b.iter().filter(|&&v| v <= t).count();
        best = best.max((ca as f64 / na - cb as f64 / nb).abs());
    }
    best
}

/// Kolmogorov survival function via the theta-function dual series
/// `1 - sqrt(2 pi)/x * sum exp(-(2j-1)^2 pi^2 / (8 x^2))`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    let mut s = 0.0;
    for j in 1..=400 {
        let k = (2 * j - 1) as f64;
        s += (-k * k * pi * pi / (8.0 * x * x)).exp();
    }
    (1.0 - (2.0 * pi).sqrt() / x * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Ward,
    Average,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Cosine,
}

fn metric_distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Cosine => 1.0 - cosine(a, b),
    }
}

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points[0].len();
    let mut c = vec![0.0; dim];
    for &m in members {
        for (acc, v) in c.iter_mut().zip(&points[m]) {
            *acc += v;
        }
    }
    c.iter().map(|v| v / members.len() as f64).collect()
}

fn cluster_distance(points: &[Vec<f64>], metric: Metric, linkage: Linkage, a: &[usize], b: &[usize]) -> f64 {
    match linkage {
        Linkage::Complete => a
            .iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| metric_distance(metric, &points[i], &points[j]))
            .fold(f64::NEG_INFINITY, f64::max),
        Linkage::Average => {
            let total: f64 = a
                .iter()
                .flat_map(|&i| b.iter().map(move |&j| (i, j)))
                .map(|(i, j)| metric_distance(metric, &points[i], &points[j]))
                .sum();
            total / (a.len() * b.len()) as f64
        }
        Linkage::Ward => {
            let (na, nb) = (a.len() as f64, b.len() as f64);
            let d = metric_distance(Metric::Euclidean, &centroid(points, a), &centroid(points, b));
            (2.0 * na * nb / (na + nb)).sqrt() * d
        }
    }
}

/// Textbook agglomeration: each step recomputes every inter-cluster distance
/// from member lists. Leaves are ids `0..n`, the merge at step `t` gets id `n + t`.
/// Ties go to the lexicographically smallest `(id_a, id_b)`.
pub fn agglomerate(points: &[Vec<f64>], metric: Metric, linkage: Linkage) -> Vec<(usize, usize, f64, usize)> {
    let n = points.len();
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let d = cluster_distance(points, metric, linkage, &active[x].1, &active[y].1);
                let (ia, ib) = (active[x].0.min(active[y].0), active[x].0.max(active[y].0));
                let better = match best {
                    None => true,
                    Some((bd, ba, bb, _, _)) => d < bd || (d == bd && (ia, ib) < (ba, bb)),
                };
                if better {
                    best = Some((d, ia, ib, x, y));
                }
            }
        }
        let (d, ia, ib, x, y) = best.unwrap();
        let mut members = active[x].1.clone();
        members.extend_from_slice(&active[y].1);
        members.sort_unstable();
        active.remove(y);
        active.remove(x);
        merges.push((ia, ib, d, members.len()));
        active.push((n + step, members));
    }
    merges
}

/// Mean silhouette with euclidean distances, straight from the definition.
/// Singleton clusters contribute 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[labels[j]] += metric_distance(Metric::Euclidean, &points[i], &points[j]);
            counts[labels[j]] += 1;
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

/// Solves a dense system in double-double by Gaussian elimination with partial pivoting.
pub fn solve_dd(mut a: Vec<Vec<DD>>, mut b: Vec<DD>) -> Vec<DD> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().to_f64().partial_cmp(&a[j][col].abs().to_f64()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let t = f * a[col][k];
                a[row][k] = a[row][k] - t;
            }
            let t = f * b[col];
            b[row] = b[row] - t;
        }
    }
    let mut x = vec![DD::ZERO; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s = s - a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

#[derive(Debug, Clone)]
pub struct OlsOracle {
    /// Intercept first.
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
}

/// OLS with intercept through the normal equations `X'X b = X'y` in double-double.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> OlsOracle {
    let n = y.len();
    let p = x[0].len();
    let row = |i: usize| -> Vec<DD> {
        std::iter::once(DD::ONE).chain(x[i].iter().map(|&v| DD::new(v))).collect()
    };
    let rows: Vec<Vec<DD>> = (0..n).map(row).collect();
    let mut xtx = vec![vec![DD::ZERO; p + 1]; p + 1];
    let mut xty = vec![DD::ZERO; p + 1];
    for (r, &yi) in rows.iter().zip(y) {
        for a in 0..=p {
            for b in 0..=p {
                xtx[a][b] = xtx[a][b] + r[a] * r[b];
            }
            xty[a] = xty[a] + r[a] * DD::new(yi);
        }
    }
    let beta = solve_dd(xtx, xty);
    let fitted: Vec<DD> = rows.iter().map(|r| dd::sum(r.iter().zip(&beta).map(|(a, b)| *a * *b))).collect();
    let ybar = dd::sum(y.iter().map(|&v| DD::new(v))) / DD::new(n as f64);
    let sst = dd::sum(y.iter().map(|&v| {
        let d = DD::new(v) - ybar;
        d * d
    }));
    let ssr = dd::sum(y.iter().zip(&fitted).map(|(&v, f)| {
        let d = DD::new(v) - *f;
        d * d
    }));
    let r2 = (DD::ONE - ssr / sst).to_f64();
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0);
    OlsOracle {
        beta: beta.iter().map(|b| b.to_f64()).collect(),
        fitted: fitted.iter().map(|f| f.to_f64()).collect(),
        r2,
        adj_r2,
    }
}

/// VIF for each column through auxiliary normal-equation regressions.
pub fn vif(x: &[Vec<f64>]) -> Vec<f64> {
    let p = x[0].len();
    (0..p)
        .map(|i| {
            let others: Vec<Vec<f64>> = x
                .iter()
                .map(|r| r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect())
                .collect();
            let target: Vec<f64> = x.iter().map(|r| r[i]).collect();
            1.0 / (1.0 - ols(&others, &target).r2)
        })
        .collect()
}

/// Polynomial least squares via the normal equations on `[x, x^2, ...]`.
pub fn poly(x: &[f64], y: &[f64], degree: usize) -> OlsOracle {
    let design: Vec<Vec<f64>> = x.iter().map(|&v| (1..=degree).map(|d| v.powi(d as i32)).collect()).collect();
    ols(&design, y)
}

/// Pearson r in double-double.
pub fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    let n = DD::new(x.len() as f64);
    let mx = dd::sum(x.iter().map(|&v| DD::new(v))) / n;
    let my = dd::sum(y.iter().map(|&v| DD::new(v))) / n;
    let sxy = dd::sum(x.iter().zip(y).map(|(&a, &b)| (DD::new(a) - mx) * (DD::new(b) - my)));
    let sxx = dd::sum(x.iter().map(|&a| (DD::new(a) - mx) * (DD::new(a) - mx)));
    let syy = dd::sum(y.iter().map(|&b| (DD::new(b) - my) * (DD::new(b) - my)));
    (sxy / (sxx * syy).sqrt()).to_f64()
}

/// Two-sided Student-t tail `P(|T| > t)` for integer degrees of freedom,
/// using the closed-form finite trigonometric series.
pub fn student_t_two_sided(t: f64, dof: u32) -> f64 {
    let nu = dof as f64;
    let theta = (t.abs() / nu.sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    let inside = if dof % 2 == 0 {
        let mut term = 1.0;
        let mut acc = 1.0;
        let mut k = 2;
        while k < dof {
            term *= (k - 1) as f64 / k as f64 * c2;
            acc += term;
            k += 2;
        }
        s * acc
    } else if dof == 1 {
        2.0 * theta / std::f64::consts::PI
    } else {
        let mut term = 1.0;
        let mut acc = 1.0;
        let mut k = 3;
        while k < dof {
            term *= (k - 1) as f64 / k as f64 * c2;
            acc += term;
            k += 2;
        }
        2.0 / std::f64::consts::PI * (theta + s * c * acc)
    };
    (1.0 - inside).clamp(0.0, 1.0)
}
