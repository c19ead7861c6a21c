//! Blocked all-pairs traversal over unit-normalized facet rows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{GroupPanel, FACETS};

use super::MIN_NORM;

const BLOCK: usize = 64;

/// Panel members scaled to unit norm, so each pair costs one dot product.
pub(crate) struct UnitRows {
    rows: Vec<[f64; FACETS]>,
}

#[inline(always)]
pub(crate) fn dot(a: &[f64; FACETS], b: &[f64; FACETS]) -> f64 {
    let mut acc = [0.0f64; 6];
    for c in 0..FACETS / 6 {
        for l in 0..6 {
            acc[l] += a[c * 6 + l] * b[c * 6 + l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + (acc[4] + acc[5])
}

/// Clamps a unit-vector dot product into `[-1, 1]`. Products within a few ulps of 1
/// are normalization rounding on parallel vectors and snap to exactly 1.
#[inline(always)]
fn unit_cosine(d: f64) -> f64 {
    if d >= 1.0 - 4.0 * f64::EPSILON {
        1.0
    } else {
        d.max(-1.0)
    }
}

impl UnitRows {
    pub(crate) fn new(panel: &GroupPanel) -> Result<Self> {
        let rows = panel
            .members()
            .iter()
            .map(|m| {
                let norm = m.norm();
                if norm < MIN_NORM {
                    return Err(Error::ZeroNormVector);
                }
                Ok(m.facets().map(|v| v / norm))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UnitRows { rows })
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub(crate) fn similarity(&self, i: usize, j: usize) -> f64 {
        unit_cosine(dot(&self.rows[i], &self.rows[j]))
    }

    /// Folds every unordered pair's similarity into per-task accumulators,
    /// then reduces them. `visit` must be order-insensitive for the result to be
    /// schedule independent.
    pub(crate) fn fold_pairs<A, I, V, R>(&self, identity: I, visit: V, reduce: R) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        V: Fn(&mut A, f64) + Sync + Send,
        R: Fn(A, A) -> A + Sync + Send,
    {
        let n = self.rows.len();
        let blocks = n.div_ceil(BLOCK);
        (0..blocks)
            .into_par_iter()
            .fold(&identity, |mut acc, bi| {
                let i_end = ((bi + 1) * BLOCK).min(n);
                for bj in bi..blocks {
                    let j_end = ((bj + 1) * BLOCK).min(n);
                    for i in bi * BLOCK..i_end {
                        let a = &self.rows[i];
                        let j_start = if bj == bi { i + 1 } else { bj * BLOCK };
                        for b in &self.rows[j_start..j_end] {
                            visit(&mut acc, unit_cosine(dot(a, b)));
                        }
                    }
                }
                acc
            })
            .reduce(&identity, &reduce)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FacetVector;
    use gpdi_testkit::synth;

    #[test]
    fn visits_each_pair_once() {
        let mut rng = synth::rng(3);
        for n in [2usize, 3, 63, 64, 65, 200] {
            let rows = synth::mixed_panel(&mut rng, n, 2);
            let panel = GroupPanel::new("AA", rows.into_iter().map(FacetVector::from_array).collect());
            let units = UnitRows::new(&panel).unwrap();
            let count = units.fold_pairs(|| 0u64, |c, _| *c += 1, |a, b| a + b);
            assert_eq!(count, (n * (n - 1) / 2) as u64);
        }
    }

    #[test]
    fn dot_matches_naive() {
        let a: [f64; FACETS] = std::array::from_fn(|i| (i as f64).sin());
        let b: [f64; FACETS] = std::array::from_fn(|i| (i as f64 * 0.7).cos());
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-14);
    }
}
