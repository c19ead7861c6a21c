use serde::{Deserialize, Serialize};

use super::{DigestMode, GpdiResult, Histogram, SimilarityDigest, HIST_LO, HIST_WIDTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramExport {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
}

/// Wire form of a digest, without the retained sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigestExport {
    pub country: String,
    pub n: usize,
    pub pairs_total: u64,
    pub pairs_positive: u64,
    pub pairs_drawn: u64,
    pub mode: DigestMode,
    pub seed: u64,
    pub median_ln: Option<f64>,
    pub gpdi: Option<f64>,
    pub ci95: Option<f64>,
    pub error: Option<String>,
    pub histogram: HistogramExport,
}

impl DigestExport {
    /// `result` is the index outcome for this digest; an error code is embedded
    /// instead of a value when the index is undefined.
    pub fn new(digest: &SimilarityDigest, result: Result<&GpdiResult, &crate::Error>) -> Self {
        let (gpdi, ci95, error) = match result {
            Ok(r) => (Some(r.gpdi), r.ci95_halfwidth, None),
            Err(e) => (None, None, Some(e.code().to_string())),
        };
        DigestExport {
            country: digest.group_code.clone(),
            n: digest.n,
            pairs_total: digest.pair_count_total,
            pairs_positive: digest.pair_count_positive,
            pairs_drawn: digest.pairs_drawn,
            mode: digest.mode,
            seed: digest.seed,
            median_ln: digest.median_ln,
            gpdi,
            ci95,
            error,
            histogram: HistogramExport {
                lo: HIST_LO,
                width: HIST_WIDTH,
                counts: digest.histogram.counts().to_vec(),
                underflow: digest.histogram.underflow(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgelineRow {
    pub country: String,
    pub bin_lo: f64,
    pub density: f64,
}

/// Normalized histogram density per bin, trimmed to the span between the first
/// and last occupied bins. The underflow bin is not part of the ridge.
pub fn ridgeline_rows(digest: &SimilarityDigest) -> Vec<RidgelineRow> {
    let counts = digest.histogram.counts();
    let mass = digest.histogram.total();
    let (Some(first), Some(last)) = (counts.iter().position(|&c| c > 0), counts.iter().rposition(|&c| c > 0)) else {
        return Vec::new();
    };
    (first..=last)
        .map(|b| RidgelineRow {
            country: digest.group_code.clone(),
            bin_lo: Histogram::bin_lo(b),
            density: counts[b] as f64 / (mass as f64 * HIST_WIDTH),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::gpdi;

    #[test]
    fn export_fields() {
        let d = SimilarityDigest::from_ln_values("AA", vec![-1.0, -2.0, -4.0]).unwrap();
        let r = gpdi(&d);
        let e = DigestExport::new(&d, r.as_ref());
        assert_eq!(e.gpdi, Some(0.5));
        assert_eq!(e.histogram.counts.len(), 6000);
        assert_eq!(e.histogram.counts.iter().sum::<u64>(), 3);
        let json = serde_json::to_value(&e).unwrap();
        for key in ["country", "n", "pairs_total", "pairs_positive", "mode", "seed", "median_ln", "gpdi", "ci95", "histogram"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["mode"], "exact");
    }

    #[test]
    fn undefined_index_embeds_code() {
        let d = SimilarityDigest::from_ln_values("AA", vec![0.0, 0.0]).unwrap();
        let r = gpdi(&d);
        let e = DigestExport::new(&d, r.as_ref());
        assert_eq!(e.gpdi, None);
        assert_eq!(e.error.as_deref(), Some("GPDI_UNDEFINED"));
    }

    #[test]
    fn ridgeline_integrates_to_one() {
        let d = SimilarityDigest::from_ln_values("AA", vec![-1.0, -1.001, -2.5, -0.2]).unwrap();
        let rows = ridgeline_rows(&d);
        let area: f64 = rows.iter().map(|r| r.density * HIST_WIDTH).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!((rows[0].bin_lo - -2.5).abs() < 1e-9);
        assert!(ridgeline_rows(&SimilarityDigest::from_ln_values("BB", vec![]).unwrap()).is_empty());
    }
}
