//! Exact and sampled digests of a panel's positive ln-similarities.
//!
//! Exact mode keeps every value when the pair count fits in the pair budget.
//! Above that it never materializes the multiset: one pass fills the
//! histogram, then counting-based selection narrows onto the median's bins
//! (bisecting the value axis with a full recount per step when a bin is
//! too crowded) and collects only the values that can still be the median.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::UnitRows;
use super::sampler::{unrank_pair, CounterRng};
use super::{bin_of, bin_rank, DigestMode, Histogram, SimilarityDigest, HIST_LO, HIST_WIDTH};
use crate::error::{Error, Result};
use crate::ingest::GroupPanel;
use crate::order::{midpoint, select_kth, sort_f64};

pub const DEFAULT_EXACT_CAP: u64 = 200_000_000;
pub const DEFAULT_PAIR_BUDGET: u64 = 5_000_000;
pub const MIN_PAIR_BUDGET: u64 = 10_000;

/// Largest candidate set gathered in memory during counting selection.
const COLLECT_LIMIT: u64 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestConfig {
    pub exact_cap: u64,
    pub pair_budget: u64,
    pub seed: u64,
}

impl Default for DigestConfig {
    fn default() -> Self {
        DigestConfig { exact_cap: DEFAULT_EXACT_CAP, pair_budget: DEFAULT_PAIR_BUDGET, seed: 42 }
    }
}

fn check_panel(panel: &GroupPanel) -> Result<()> {
    if panel.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "group {} needs at least 2 members for pairwise similarity",
            panel.group_code()
        )));
    }
    Ok(())
}

/// Exact when the pair count is within the cap, sampled otherwise.
pub fn digest(panel: &GroupPanel, cfg: &DigestConfig) -> Result<SimilarityDigest> {
    if panel.pair_count() <= cfg.exact_cap {
        pairwise_digest_exact(panel, cfg)
    } else {
        pairwise_digest_sampled(panel, cfg.pair_budget, cfg.seed)
    }
}

/// Visits every unordered pair.
pub fn pairwise_digest_exact(panel: &GroupPanel, cfg: &DigestConfig) -> Result<SimilarityDigest> {
    check_panel(panel)?;
    let total = panel.pair_count();
    if total > cfg.exact_cap {
        return Err(Error::GroupTooLargeForExact {
            group: panel.group_code().to_string(),
            pairs: total,
            cap: cfg.exact_cap,
        });
    }
    let units = UnitRows::new(panel)?;
    if total <= cfg.pair_budget {
        return Ok(store_all(panel, &units, cfg.seed));
    }

    let histogram = units.fold_pairs(
        Histogram::default,
        |h, s| {
            if s > 0.0 {
                h.add(s.ln())
            }
        },
        |mut a, b| {
            a.merge(&b);
            a
        },
    );
    let median_ln = counting_median(&units, &histogram);
    let mut retained = draw_ln(&units, panel.group_code(), cfg.pair_budget, cfg.seed);
    sort_f64(&mut retained);
    Ok(SimilarityDigest {
        group_code: panel.group_code().to_string(),
        n: panel.len(),
        pair_count_total: total,
        pair_count_positive: histogram.total(),
        pairs_drawn: cfg.pair_budget,
        histogram,
        retained,
        retained_complete: false,
        mode: DigestMode::Exact,
        seed: cfg.seed,
        median_ln,
    })
}

/// Draws `pair_budget` pairs uniformly with replacement. Falls back to the
/// exact store when the budget covers every pair.
pub fn pairwise_digest_sampled(panel: &GroupPanel, pair_budget: u64, seed: u64) -> Result<SimilarityDigest> {
    check_panel(panel)?;
    if pair_budget < MIN_PAIR_BUDGET {
        return Err(Error::InvalidArgument(format!("pair budget must be at least {MIN_PAIR_BUDGET}")));
    }
    let units = UnitRows::new(panel)?;
    let total = panel.pair_count();
    if pair_budget >= total {
        return Ok(store_all(panel, &units, seed));
    }
    let mut retained = draw_ln(&units, panel.group_code(), pair_budget, seed);
    sort_f64(&mut retained);
    let mut histogram = Histogram::default();
    retained.iter().for_each(|&v| histogram.add(v));
    Ok(SimilarityDigest {
        group_code: panel.group_code().to_string(),
        n: panel.len(),
        pair_count_total: total,
        pair_count_positive: retained.len() as u64,
        pairs_drawn: pair_budget,
        histogram,
        median_ln: crate::order::median_sorted(&retained),
        retained,
        retained_complete: false,
        mode: DigestMode::Sampled,
        seed,
    })
}

fn store_all(panel: &GroupPanel, units: &UnitRows, seed: u64) -> SimilarityDigest {
    let mut values = units.fold_pairs(
        Vec::new,
        |v, s| {
            if s > 0.0 {
                v.push(s.ln())
            }
        },
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    );
    sort_f64(&mut values);
    let mut histogram = Histogram::default();
    values.iter().for_each(|&v| histogram.add(v));
    SimilarityDigest {
        group_code: panel.group_code().to_string(),
        n: panel.len(),
        pair_count_total: panel.pair_count(),
        pair_count_positive: values.len() as u64,
        pairs_drawn: panel.pair_count(),
        histogram,
        median_ln: crate::order::median_sorted(&values),
        retained: values,
        retained_complete: true,
        mode: DigestMode::Exact,
        seed,
    }
}

/// Positive ln-similarities of `budget` counter-indexed pair draws, in draw order.
fn draw_ln(units: &UnitRows, group: &str, budget: u64, seed: u64) -> Vec<f64> {
    let n = units.len() as u64;
    let total = n * (n - 1) / 2;
    let rng = CounterRng::new(seed, group);
    (0..budget as usize)
        .into_par_iter()
        .with_min_len(4096)
        .filter_map(|k| {
            let (i, j) = unrank_pair(n, rng.below(k as u64, total));
            let s = units.similarity(i, j);
            (s > 0.0).then(|| s.ln())
        })
        .collect()
}

/// Candidate set for selection: values whose bin rank lies in `ranks` and whose
/// value lies in `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct Window {
    rank_lo: usize,
    rank_hi: usize,
    lo: f64,
    hi: f64,
    /// Similarity bounds (slightly widened) that cover the window, so most
    /// pairs are rejected without taking a logarithm.
    s_lo: f64,
    s_hi: f64,
}

impl Window {
    fn new(rank_lo: usize, rank_hi: usize) -> Self {
        let edge = |rank: usize| if rank == 0 { f64::NEG_INFINITY } else { HIST_LO + (rank - 1) as f64 * HIST_WIDTH };
        let s_lo = if rank_lo == 0 { 0.0 } else { edge(rank_lo).exp() * (1.0 - 1e-9) };
        let s_hi = edge(rank_hi + 1).exp() * (1.0 + 1e-9);
        Window { rank_lo, rank_hi, lo: f64::NEG_INFINITY, hi: f64::INFINITY, s_lo, s_hi }
    }

    #[inline]
    fn test(&self, s: f64) -> Option<f64> {
        if s <= 0.0 || s < self.s_lo || s > self.s_hi {
            return None;
        }
        let ln = s.ln();
        let r = bin_rank(bin_of(ln));
        (r >= self.rank_lo && r <= self.rank_hi && ln >= self.lo && ln <= self.hi).then_some(ln)
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    left: u64,
    max_left: f64,
    min_right: f64,
    min_all: f64,
    max_all: f64,
}

impl Split {
    fn empty() -> Self {
        Split {
            left: 0,
            max_left: f64::NEG_INFINITY,
            min_right: f64::INFINITY,
            min_all: f64::INFINITY,
            max_all: f64::NEG_INFINITY,
        }
    }

    fn merge(self, o: Split) -> Split {
        Split {
            left: self.left + o.left,
            max_left: self.max_left.max(o.max_left),
            min_right: self.min_right.min(o.min_right),
            min_all: self.min_all.min(o.min_all),
            max_all: self.max_all.max(o.max_all),
        }
    }
}

/// One full pass: how many window values are `<= pivot`, plus the extremes
/// either side of the pivot.
fn split_pass(units: &UnitRows, w: &Window, pivot: f64) -> Split {
    units.fold_pairs(
        Split::empty,
        |acc, s| {
            if let Some(v) = w.test(s) {
                acc.min_all = acc.min_all.min(v);
                acc.max_all = acc.max_all.max(v);
                if v <= pivot {
                    acc.left += 1;
                    acc.max_left = acc.max_left.max(v);
                } else {
                    acc.min_right = acc.min_right.min(v);
                }
            }
        },
        Split::merge,
    )
}

/// Exact median of the positive ln-similarities, using the histogram as the
/// first counting pass.
fn counting_median(units: &UnitRows, histogram: &Histogram) -> Option<f64> {
    counting_median_limited(units, histogram, COLLECT_LIMIT)
}

fn counting_median_limited(units: &UnitRows, histogram: &Histogram, collect_limit: u64) -> Option<f64> {
    let total = histogram.total();
    if total == 0 {
        return None;
    }
    let (k1, k2) = ((total - 1) / 2, total / 2);
    let ranked: Vec<u64> = histogram.ranked().collect();
    let mut cum = 0u64;
    let (mut rank_lo, mut rank_hi, mut below) = (None, None, 0u64);
    for (r, &c) in ranked.iter().enumerate() {
        if rank_lo.is_none() && k1 < cum + c {
            rank_lo = Some(r);
            below = cum;
        }
        if k2 < cum + c {
            rank_hi = Some(r);
            break;
        }
        cum += c;
    }
    let (rank_lo, rank_hi) = (rank_lo?, rank_hi?);
    let mut window = Window::new(rank_lo, rank_hi);
    let mut count: u64 = ranked[rank_lo..=rank_hi].iter().sum();

    if count > collect_limit {
        let bounds = split_pass(units, &window, f64::INFINITY);
        window.lo = bounds.min_all;
        window.hi = bounds.max_all;
    }
    while count > collect_limit {
        if window.lo == window.hi {
            return Some(window.lo);
        }
        let mut pivot = midpoint(window.lo, window.hi);
        if pivot >= window.hi {
            pivot = window.lo;
        }
        let split = split_pass(units, &window, pivot);
        let (t1, t2) = (k1 - below, k2 - below);
        if t2 < split.left {
            window.hi = split.max_left;
            count = split.left;
        } else if t1 >= split.left {
            window.lo = split.min_right;
            below += split.left;
            count -= split.left;
        } else {
            return Some(midpoint(split.max_left, split.min_right));
        }
    }

    let mut candidates = units.fold_pairs(
        Vec::new,
        |v, s| {
            if let Some(ln) = window.test(s) {
                v.push(ln)
            }
        },
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    );
    debug_assert_eq!(candidates.len() as u64, count);
    let (t1, t2) = ((k1 - below) as usize, (k2 - below) as usize);
    let upper = select_kth(&mut candidates, t2);
    if t1 == t2 {
        return Some(upper);
    }
    let lower = candidates[..t2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(midpoint(lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{FacetVector, FACETS};
    use gpdi_testkit::{oracle, synth};

    fn panel(rows: Vec<[f64; FACETS]>) -> GroupPanel {
        GroupPanel::new("ZZ", rows.into_iter().map(FacetVector::from_array).collect())
    }

    fn counting_cfg() -> DigestConfig {
        // budget below the pair count forces the counting path
        DigestConfig { exact_cap: DEFAULT_EXACT_CAP, pair_budget: MIN_PAIR_BUDGET, seed: 9 }
    }

    #[test]
    fn identical_members() {
        let p = panel(vec![[1.0; FACETS]; 3]);
        let d = pairwise_digest_exact(&p, &DigestConfig::default()).unwrap();
        assert_eq!(d.pair_count_total, 3);
        assert_eq!(d.pair_count_positive, 3);
        assert_eq!(d.retained, vec![0.0, 0.0, 0.0]);
        assert_eq!(d.median_ln, Some(0.0));
    }

    #[test]
    fn non_positive_cosines_filtered() {
        let mut a = [0.0; FACETS];
        a[0] = 1.0;
        let mut b = [0.0; FACETS];
        b[0] = -1.0;
        let mut c = [0.0; FACETS];
        c[1] = 1.0;
        let d = pairwise_digest_exact(&panel(vec![a, b, c]), &DigestConfig::default()).unwrap();
        assert_eq!(d.pair_count_total, 3);
        assert_eq!(d.pair_count_positive, 0);
        assert!(d.retained.is_empty());
        assert_eq!(d.median_ln, None);
        assert_eq!(d.histogram.total(), 0);
    }

    #[test]
    fn store_all_matches_brute_force() {
        let mut rng = synth::rng(200);
        let rows = synth::mixed_panel(&mut rng, 200, 3);
        let want = oracle::sorted_ln_positive(&rows);
        let d = pairwise_digest_exact(&panel(rows), &DigestConfig::default()).unwrap();
        assert!(d.retained_complete);
        assert_eq!(d.pair_count_total, 19_900);
        assert_eq!(d.pair_count_positive as usize, want.len());
        assert_eq!(d.median_ln.unwrap(), oracle::median_of_sorted(&want));
        let (under, counts) = oracle::histogram(&want, HIST_LO, HIST_WIDTH, super::super::HIST_BINS);
        assert_eq!(d.histogram.underflow(), under);
        assert_eq!(d.histogram.counts(), &counts[..]);
    }

    #[test]
    fn counting_path_matches_brute_force() {
        let mut rng = synth::rng(201);
        for n in [200usize, 201, 333] {
            let rows = synth::mixed_panel(&mut rng, n, 2);
            let want = oracle::sorted_ln_positive(&rows);
            let p = panel(rows);
            let all = pairwise_digest_exact(&p, &DigestConfig::default()).unwrap();
            let d = pairwise_digest_exact(&p, &counting_cfg()).unwrap();
            assert!(!d.retained_complete);
            assert_eq!(d.mode, DigestMode::Exact);
            assert_eq!(d.histogram, all.histogram);
            assert_eq!(d.histogram.total() as usize, want.len());
            // same kernel values, so selection must land on the identical order statistics
            assert_eq!(d.median_ln, all.median_ln, "n={n}");
            assert!((d.median_ln.unwrap() - oracle::median_of_sorted(&want)).abs() < 1e-12);
            assert!(d.retained.iter().all(|v| *v <= 0.0));
        }
    }

    #[test]
    fn counting_selection_bisects_crowded_windows() {
        let mut rng = synth::rng(202);
        for (n, profiles) in [(260usize, 1usize), (261, 3)] {
            let p = panel(synth::mixed_panel(&mut rng, n, profiles));
            let all = pairwise_digest_exact(&p, &DigestConfig::default()).unwrap();
            let units = UnitRows::new(&p).unwrap();
            for limit in [1, 7, 100] {
                let m = counting_median_limited(&units, &all.histogram, limit);
                assert_eq!(m, all.median_ln, "n={n} limit={limit}");
            }
        }
    }

    #[test]
    fn counting_selection_on_identical_members() {
        let units = UnitRows::new(&panel(vec![[2.0; FACETS]; 40])).unwrap();
        let mut h = Histogram::default();
        (0..780).for_each(|_| h.add(0.0));
        assert_eq!(counting_median_limited(&units, &h, 1), Some(0.0));
    }

    #[test]
    fn exact_is_member_order_invariant() {
        let mut rng = synth::rng(203);
        let rows = synth::mixed_panel(&mut rng, 150, 3);
        let mut rev = rows.clone();
        rev.reverse();
        let cfg = DigestConfig::default();
        let a = pairwise_digest_exact(&panel(rows), &cfg).unwrap();
        let b = pairwise_digest_exact(&panel(rev), &cfg).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert_eq!(a.median_ln, b.median_ln);
        assert_eq!(a.pair_count_positive, b.pair_count_positive);
    }

    #[test]
    fn exact_cap_enforced() {
        let mut rng = synth::rng(204);
        let p = panel(synth::mixed_panel(&mut rng, 100, 1));
        let cfg = DigestConfig { exact_cap: 4_000, ..DigestConfig::default() };
        assert!(matches!(pairwise_digest_exact(&p, &cfg), Err(Error::GroupTooLargeForExact { pairs: 4950, .. })));
        let auto = digest(&p, &DigestConfig { exact_cap: 4_000, pair_budget: 10_000, seed: 1 }).unwrap();
        // budget covers all pairs, so the sampled route still ends up exact
        assert_eq!(auto.mode, DigestMode::Exact);
    }

    #[test]
    fn budget_covering_all_pairs_is_exact() {
        let mut rng = synth::rng(205);
        let p = panel(synth::mixed_panel(&mut rng, 50, 2));
        let d = pairwise_digest_sampled(&p, 10_000, 3).unwrap();
        assert_eq!(d.mode, DigestMode::Exact);
        assert!(d.retained_complete);
        assert_eq!(d.pairs_drawn, 1225);
    }

    #[test]
    fn sampled_invariants() {
        let mut rng = synth::rng(206);
        let p = panel(synth::mixed_panel(&mut rng, 400, 2));
        let d = pairwise_digest_sampled(&p, 20_000, 77).unwrap();
        assert_eq!(d.mode, DigestMode::Sampled);
        assert_eq!(d.pairs_drawn, 20_000);
        assert_eq!(d.histogram.total(), d.retained.len() as u64);
        assert!(d.pair_count_positive <= 20_000);
        assert!(d.retained.iter().all(|v| v.is_finite() && *v <= 0.0));
        assert!(d.retained.windows(2).all(|w| w[0] <= w[1]));
        let again = pairwise_digest_sampled(&p, 20_000, 77).unwrap();
        assert_eq!(d, again);
        let other = pairwise_digest_sampled(&p, 20_000, 78).unwrap();
        assert_ne!(d.retained, other.retained);
    }

    #[test]
    fn sampled_preconditions() {
        let p = panel(vec![[1.0; FACETS]]);
        assert!(pairwise_digest_sampled(&p, 10_000, 0).is_err());
        let mut rng = synth::rng(207);
        let p = panel(synth::mixed_panel(&mut rng, 10, 1));
        assert!(pairwise_digest_sampled(&p, 9_999, 0).is_err());
    }
}
