//! Order statistics shared across modules.
//!
//! Every median in the engine uses the same convention: for an even count the
//! median is the mean of the two middle order statistics.

use std::cmp::Ordering;

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.total_cmp(b)
}

/// Returns the `k`-th smallest value (0-based), reordering `values` in place.
pub fn select_kth(values: &mut [f64], k: usize) -> f64 {
    assert!(k < values.len(), "order statistic out of range");
    let (_, kth, _) = values.select_nth_unstable_by(k, cmp_f64);
    *kth
}

/// Median with the mean-of-middle-two convention. `None` for an empty slice.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let upper = select_kth(values, n / 2);
    if n % 2 == 1 {
        return Some(upper);
    }
    // after selection every value left of n/2 is <= upper
    let lower = values[..n / 2]
        .iter()
        .copied()
        .max_by(cmp_f64)
        .expect("non-empty lower half");
    Some(midpoint(lower, upper))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut buf = values.to_vec();
    median_in_place(&mut buf)
}

/// Median of an already sorted slice.
pub fn median_sorted(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(midpoint(sorted[n / 2 - 1], sorted[n / 2])),
    }
}

pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    a + (b - a) / 2.0
}

pub(crate) fn sort_f64(values: &mut [f64]) {
    values.sort_unstable_by(cmp_f64);
}
