//! Two-sample Kolmogorov–Smirnov comparison with asymptotic p-values.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::sort_f64;
use crate::similarity::sampler::CounterRng;
use crate::similarity::SimilarityDigest;

pub const DEFAULT_KS_CAP: usize = 100_000;
const SERIES_TERMS: usize = 100;
const SERIES_EPS: f64 = 1e-12;
/// Below this argument the alternating series converges slowly; use the dual form.
const DUAL_SERIES_BELOW: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub d: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub p_value: f64,
    pub method: String,
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < DUAL_SERIES_BELOW {
        // P(K <= x) = sqrt(2 pi)/x * sum_j exp(-(2j-1)^2 pi^2 / (8 x^2))
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut sum = 0.0;
        for j in 1..=SERIES_TERMS {
            let k = (2 * j - 1) as f64;
            let term = (-k * k * pi2 / (8.0 * x * x)).exp();
            sum += term;
            if term < SERIES_EPS * sum {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * sum).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=SERIES_TERMS {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += sign * term;
        if term < SERIES_EPS {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("KS samples must be finite".into()));
    }
    if values.len() < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: values.len() });
    }
    let mut v = values.to_vec();
    sort_f64(&mut v);
    Ok(v)
}

/// Largest ECDF gap of two sorted samples, by a merge walk over the pooled values.
fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    Ok(ks_from_sorted(&a, &b))
}

fn ks_from_sorted(a: &[f64], b: &[f64]) -> KsTest {
    let d = ks_statistic_sorted(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let effective = na * nb / (na + nb);
    KsTest {
        d,
        n_a: a.len(),
        n_b: b.len(),
        p_value: kolmogorov_sf(effective.sqrt() * d),
        method: "asymptotic".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsCell {
    pub group_a: String,
    pub group_b: String,
    pub result: Result<KsTest>,
}

/// All pairwise tests over a set of groups, upper triangle in group order.
#[derive(Debug, Clone, PartialEq)]
pub struct KsMatrix {
    pub groups: Vec<String>,
    pub cells: Vec<KsCell>,
    pub per_group_cap: usize,
    pub seed: u64,
}

impl KsMatrix {
    pub fn test_count(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_ok()).count()
    }

    /// Looks up a cell in either orientation.
    pub fn get(&self, a: &str, b: &str) -> Option<&KsCell> {
        self.cells
            .iter()
            .find(|c| (c.group_a == a && c.group_b == b) || (c.group_a == b && c.group_b == a))
    }

    /// Dense `n x n` matrix of `f(test)`, `None` on the diagonal and failed cells.
    pub fn dense(&self, f: impl Fn(&KsTest) -> f64) -> Vec<Vec<Option<f64>>> {
        let n = self.groups.len();
        let mut m = vec![vec![None; n]; n];
        let pos = |g: &str| self.groups.iter().position(|x| x == g).unwrap();
        for c in &self.cells {
            if let Ok(t) = &c.result {
                let (i, j) = (pos(&c.group_a), pos(&c.group_b));
                m[i][j] = Some(f(t));
                m[j][i] = Some(f(t));
            }
        }
        m
    }
}

/// At most `cap` of a digest's retained values, drawn without replacement
/// under a seed keyed on the group code.
pub fn capped_sample(digest: &SimilarityDigest, cap: usize, seed: u64) -> Vec<f64> {
    cap_values(&digest.group_code, &digest.retained, cap, seed)
}

/// At most `cap` of `values`, drawn without replacement under a seed keyed on
/// `group`, returned sorted.
pub fn cap_values(group: &str, values: &[f64], cap: usize, seed: u64) -> Vec<f64> {
    let mut picked = if values.len() <= cap {
        values.to_vec()
    } else {
        let key = CounterRng::new(seed, group).at(0);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        index::sample(&mut rng, values.len(), cap).into_iter().map(|i| values[i]).collect()
    };
    sort_f64(&mut picked);
    picked
}

/// Runs every unordered pair of digests through the two-sample test. Failed
/// cells keep their error and do not abort the matrix.
pub fn ks_matrix(digests: &[SimilarityDigest], per_group_cap: usize, seed: u64) -> Result<KsMatrix> {
    let groups: Vec<(&str, &[f64])> = digests.iter().map(|d| (d.group_code.as_str(), d.retained.as_slice())).collect();
    ks_matrix_from_samples(&groups, per_group_cap, seed)
}

/// As [`ks_matrix`], over named value samples.
pub fn ks_matrix_from_samples(groups: &[(&str, &[f64])], per_group_cap: usize, seed: u64) -> Result<KsMatrix> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("KS matrix needs at least two groups".into()));
    }
    let samples: Vec<Result<Vec<f64>>> = groups
        .par_iter()
        .map(|(g, v)| sorted_finite(&cap_values(g, v, per_group_cap, seed)))
        .collect();
    let pairs: Vec<(usize, usize)> =
        (0..groups.len()).flat_map(|i| (i + 1..groups.len()).map(move |j| (i, j))).collect();
    let cells = pairs
        .par_iter()
        .map(|&(i, j)| {
            let result = match (&samples[i], &samples[j]) {
                (Ok(a), Ok(b)) => Ok(ks_from_sorted(a, b)),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            };
            KsCell { group_a: groups[i].0.to_string(), group_b: groups[j].0.to_string(), result }
        })
        .collect();
    Ok(KsMatrix {
        groups: groups.iter().map(|(g, _)| g.to_string()).collect(),
        cells,
        per_group_cap,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpdi_testkit::{oracle, synth};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let t = ks_two_sample(&a, &a).unwrap();
        assert_eq!(t.d, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn disjoint_supports() {
        let t = ks_two_sample(&[1.0, 2.0, 3.0], &[10.0, 11.0]).unwrap();
        assert_eq!(t.d, 1.0);
        assert!(t.p_value < 0.2);
    }

    #[test]
    fn ties_merge_steps() {
        let t = ks_two_sample(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(t.d, 0.25);
    }

    #[test]
    fn insufficient_sample() {
        assert_eq!(ks_two_sample(&[1.0], &[1.0, 2.0]), Err(Error::InsufficientSample { needed: 2, got: 1 }));
    }

    #[test]
    fn thousand_point_samples_match_double_loop() {
        let mut rng = synth::rng(1000);
        let a: Vec<f64> = (0..1000).map(|_| synth::gauss(&mut rng)).collect();
        let b: Vec<f64> = (0..1000).map(|_| 0.1 + synth::gauss(&mut rng)).collect();
        let t = ks_two_sample(&a, &b).unwrap();
        assert_eq!(t.d, oracle::ks_statistic_double_loop(&a, &b));
        let lambda = (500.0f64).sqrt() * t.d;
        assert!((t.p_value - oracle::kolmogorov_sf(lambda)).abs() < 1e-10);
    }

    #[test]
    fn series_agrees_with_dual_form_everywhere() {
        let mut x = 0.0;
        while x < 6.0 {
            assert!((kolmogorov_sf(x) - oracle::kolmogorov_sf(x)).abs() < 1e-10, "x={x}");
            x += 0.0137;
        }
    }

    #[test]
    fn shifted_groups_order_d() {
        let mut rng = synth::rng(77);
        let shifts = [0.0, 0.1, 0.25, 0.5, 1.0];
        let digests: Vec<SimilarityDigest> = shifts
            .iter()
            .enumerate()
            .map(|(g, s)| {
                // log-normal similarities mapped into ln space: ln s = -exp(N(mu, 0.5))
                let v: Vec<f64> = (0..4000).map(|_| -(s + 0.5 * synth::gauss(&mut rng)).exp()).collect();
                SimilarityDigest::from_ln_values(&format!("G{g}"), v).unwrap()
            })
            .collect();
        let m = ks_matrix(&digests, 2000, 3).unwrap();
        assert_eq!(m.cells.len(), 10);
        let d = |a: usize, b: usize| m.get(&format!("G{a}"), &format!("G{b}")).unwrap().result.as_ref().unwrap().d;
        for far in 2..5 {
            assert!(d(0, far) > d(0, far - 1), "{far}");
        }
        assert!(d(1, 4) > d(1, 3) && d(1, 3) > d(1, 2));
    }

    #[test]
    fn matrix_shape_and_errors() {
        let a = SimilarityDigest::from_ln_values("AA", vec![-1.0, -2.0, -3.0]).unwrap();
        let b = SimilarityDigest::from_ln_values("BB", vec![-1.5, -2.5]).unwrap();
        let c = SimilarityDigest::from_ln_values("CC", vec![-1.5]).unwrap();
        let m = ks_matrix(&[a.clone(), b.clone()], 10, 0).unwrap();
        assert_eq!(m.cells.len(), 1);
        let dense = m.dense(|t| t.d);
        assert_eq!(dense[0][1], dense[1][0]);
        assert_eq!(dense[0][0], None);
        let m = ks_matrix(&[a, b, c], 10, 0).unwrap();
        assert_eq!(m.cells.len(), 3);
        assert_eq!(m.test_count(), 1);
        assert!(matches!(m.get("CC", "AA").unwrap().result, Err(Error::InsufficientSample { .. })));
        assert!(ks_matrix(&[], 10, 0).is_err());
    }

    #[test]
    fn self_resample_is_close() {
        let mut rng = synth::rng(78);
        let v: Vec<f64> = (0..50_000).map(|_| -(0.5 * synth::gauss(&mut rng)).exp()).collect();
        let a = SimilarityDigest::from_ln_values("AA", v.clone()).unwrap();
        let b = SimilarityDigest::from_ln_values("BB", v).unwrap();
        let m = ks_matrix(&[a, b], 5_000, 11).unwrap();
        let t = m.cells[0].result.as_ref().unwrap();
        assert!(t.d < 0.05, "{}", t.d);
    }

    #[test]
    fn capped_sample_deterministic() {
        let v: Vec<f64> = (0..1000).map(|i| -(i as f64) / 100.0).collect();
        let d = SimilarityDigest::from_ln_values("AA", v).unwrap();
        let a = capped_sample(&d, 100, 5);
        assert_eq!(a.len(), 100);
        assert_eq!(a, capped_sample(&d, 100, 5));
        assert_ne!(a, capped_sample(&d, 100, 6));
        assert_eq!(capped_sample(&d, 5000, 5).len(), 1000);
    }

    proptest! {
        #[test]
        fn symmetric_and_transform_invariant(
            a in prop::collection::vec(-5.0f64..5.0, 2..80),
            b in prop::collection::vec(-5.0f64..5.0, 2..80),
            scale in 0.1f64..10.0,
            shift in -3.0f64..3.0,
        ) {
            let ab = ks_two_sample(&a, &b).unwrap();
            let ba = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(ab.d, ba.d);
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert!((0.0..=1.0).contains(&ab.d) && (0.0..=1.0).contains(&ab.p_value));
            let ea: Vec<f64> = a.iter().map(|v| v.exp()).collect();
            let eb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
            prop_assert_eq!(ks_two_sample(&ea, &eb).unwrap().d, ab.d);
            // integer-valued inputs keep the affine map exact, so no ties are created or broken
            let ia: Vec<f64> = a.iter().map(|v| (v * 100.0).round()).collect();
            let ib: Vec<f64> = b.iter().map(|v| (v * 100.0).round()).collect();
            let base = ks_two_sample(&ia, &ib).unwrap().d;
            let fa: Vec<f64> = ia.iter().map(|v| v * scale.round().max(1.0) + shift.round()).collect();
            let fb: Vec<f64> = ib.iter().map(|v| v * scale.round().max(1.0) + shift.round()).collect();
            prop_assert_eq!(ks_two_sample(&fa, &fb).unwrap().d, base);
        }

        #[test]
        fn merge_walk_matches_oracle(seed in 0u64..1000) {
            let mut rng = synth::rng(seed);
            let na = rng.gen_range(2..300);
            let nb = rng.gen_range(2..300);
            let a: Vec<f64> = (0..na).map(|_| (synth::gauss(&mut rng) * 4.0).round()).collect();
            let b: Vec<f64> = (0..nb).map(|_| (synth::gauss(&mut rng) * 4.0).round() + 1.0).collect();
            prop_assert_eq!(ks_two_sample(&a, &b).unwrap().d, oracle::ks_statistic(&a, &b));
        }
    }
}
