use serde::{Deserialize, Serialize};

use super::{DigestMode, SimilarityDigest};
use crate::error::{Error, Result};

const MIN_ABS_MEDIAN: f64 = 1e-12;
const Z_975: f64 = 1.959_963_984_540_054;

/// Diversity index of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdiResult {
    pub group_code: String,
    pub n: usize,
    pub gpdi: f64,
    pub median_ln: f64,
    pub mode: DigestMode,
    /// Values behind the median: all positive pairs (exact) or positive draws (sampled).
    pub sample_size: u64,
    /// 95% CI half-width of the index, sampled mode only.
    pub ci95_halfwidth: Option<f64>,
    /// 95% CI of the ln-similarity median, sampled mode only.
    pub median_ln_ci95: Option<(f64, f64)>,
    pub seed: u64,
}

/// 1-based ranks bounding a 95% confidence interval for the median of `m`
/// draws, from the normal approximation to Binomial(m, 1/2).
fn median_ci_ranks(m: usize) -> (usize, usize) {
    let half = Z_975 * (m as f64).sqrt() / 2.0;
    let lo = ((m as f64 / 2.0 - half).floor() as usize).max(1);
    let hi = ((m as f64 / 2.0 + half).ceil() as usize + 1).min(m);
    (lo, hi)
}

fn index_of(median: f64) -> f64 {
    1.0 / median.abs()
}

/// `1 / |median(ln s)|` over the positive similarities.
pub fn gpdi(digest: &SimilarityDigest) -> Result<GpdiResult> {
    let median = digest.median_ln.ok_or(Error::EmptyPositiveSet)?;
    if median.abs() < MIN_ABS_MEDIAN {
        return Err(Error::GpdiUndefined);
    }
    let (mut ci95_halfwidth, mut median_ln_ci95) = (None, None);
    if digest.mode == DigestMode::Sampled && !digest.retained.is_empty() {
        let (lo, hi) = median_ci_ranks(digest.retained.len());
        let (m_lo, m_hi) = (digest.retained[lo - 1], digest.retained[hi - 1]);
        median_ln_ci95 = Some((m_lo, m_hi));
        // the index is increasing in the (negative) median and unbounded at 0
        if m_hi.abs() >= MIN_ABS_MEDIAN && m_hi < 0.0 {
            ci95_halfwidth = Some((index_of(m_hi) - index_of(m_lo)) / 2.0);
        }
    }
    Ok(GpdiResult {
        group_code: digest.group_code.clone(),
        n: digest.n,
        gpdi: index_of(median),
        median_ln: median,
        mode: digest.mode,
        sample_size: digest.pair_count_positive,
        ci95_halfwidth,
        median_ln_ci95,
        seed: digest.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{FacetVector, GroupPanel, FACETS};
    use crate::similarity::{pairwise_digest_exact, pairwise_digest_sampled, DigestConfig};
    use gpdi_testkit::{oracle, synth};
    use proptest::prelude::*;

    #[test]
    fn odd_multiset() {
        let d = SimilarityDigest::from_ln_values("AA", vec![-1.0, -2.0, -4.0]).unwrap();
        let r = gpdi(&d).unwrap();
        assert_eq!(r.median_ln, -2.0);
        assert_eq!(r.gpdi, 0.5);
        assert!(r.ci95_halfwidth.is_none());
    }

    #[test]
    fn even_multiset_uses_mean_of_middle() {
        let d = SimilarityDigest::from_ln_values("AA", vec![-1.0, -2.0, -4.0, -8.0]).unwrap();
        assert_eq!(gpdi(&d).unwrap().median_ln, -3.0);
    }

    #[test]
    fn identical_members_undefined() {
        let p = GroupPanel::new("AA", vec![FacetVector::from_array([3.0; FACETS]); 10]);
        let d = pairwise_digest_exact(&p, &DigestConfig::default()).unwrap();
        assert_eq!(gpdi(&d), Err(Error::GpdiUndefined));
    }

    #[test]
    fn empty_positive_set() {
        let d = SimilarityDigest::from_ln_values("AA", vec![]).unwrap();
        assert_eq!(gpdi(&d), Err(Error::EmptyPositiveSet));
    }

    #[test]
    fn matches_sort_and_index_oracle() {
        let mut rng = synth::rng(500);
        let rows = synth::mixed_panel(&mut rng, 500, 3);
        let (_, median, want) = oracle::gpdi(&rows);
        let p = GroupPanel::new("AA", rows.into_iter().map(FacetVector::from_array).collect());
        let r = gpdi(&pairwise_digest_exact(&p, &DigestConfig::default()).unwrap()).unwrap();
        assert!((r.gpdi - want).abs() < 1e-12);
        assert_eq!(r.median_ln, median);
        assert!((r.gpdi * r.median_ln.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_result_has_interval() {
        let mut rng = synth::rng(501);
        let rows = synth::mixed_panel(&mut rng, 600, 3);
        let p = GroupPanel::new("AA", rows.into_iter().map(FacetVector::from_array).collect());
        let r = gpdi(&pairwise_digest_sampled(&p, 50_000, 5).unwrap()).unwrap();
        assert_eq!(r.mode, DigestMode::Sampled);
        let (lo, hi) = r.median_ln_ci95.unwrap();
        assert!(lo <= r.median_ln && r.median_ln <= hi);
        assert!(r.ci95_halfwidth.unwrap() > 0.0);
    }

    #[test]
    fn ci_ranks_bracket_the_middle() {
        for m in [1usize, 2, 10, 10_000, 1_000_001] {
            let (lo, hi) = median_ci_ranks(m);
            assert!(1 <= lo && lo <= hi && hi <= m);
            assert!(lo as f64 <= (m as f64 + 1.0) / 2.0 && hi as f64 >= m as f64 / 2.0);
        }
    }

    proptest! {
        #[test]
        fn index_monotone_in_median(
            base in prop::collection::vec(-10.0f64..-0.01, 1..60),
            shrink in 0.0f64..1.0,
        ) {
            // every value of A is B's value moved toward zero
            let a: Vec<f64> = base.iter().map(|v| v * (1.0 - shrink)).collect();
            let ra = gpdi(&SimilarityDigest::from_ln_values("A", a).unwrap());
            let rb = gpdi(&SimilarityDigest::from_ln_values("B", base).unwrap()).unwrap();
            match ra {
                Ok(ra) => {
                    prop_assert!(ra.median_ln >= rb.median_ln);
                    prop_assert!(ra.gpdi >= rb.gpdi);
                }
                Err(e) => prop_assert_eq!(e, Error::GpdiUndefined),
            }
        }
    }
}
