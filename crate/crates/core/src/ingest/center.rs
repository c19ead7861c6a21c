use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FacetVector, GroupPanel, FACETS};
use crate::error::{Error, Result};

const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenteringMode {
    None,
    GlobalMean,
    #[default]
    GlobalZscore,
    GroupMean,
}

impl FromStr for CenteringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('_', "-").as_str() {
            "none" => Ok(CenteringMode::None),
            "global-mean" => Ok(CenteringMode::GlobalMean),
            "global-zscore" => Ok(CenteringMode::GlobalZscore),
            "group-mean" => Ok(CenteringMode::GroupMean),
            other => Err(Error::InvalidArgument(format!("unknown centering mode {other:?}"))),
        }
    }
}

impl fmt::Display for CenteringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CenteringMode::None => "none",
            CenteringMode::GlobalMean => "global-mean",
            CenteringMode::GlobalZscore => "global-zscore",
            CenteringMode::GroupMean => "group-mean",
        })
    }
}

/// Statistics a transform used, kept so the run can be reproduced.
/// Scales are population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub mode: CenteringMode,
    pub means: Option<Vec<f64>>,
    pub scales: Option<Vec<f64>>,
    pub group_means: BTreeMap<String, Vec<f64>>,
}

/// Two-pass per-facet mean and population sd over a set of vectors.
fn facet_moments<'a>(vectors: impl Iterator<Item = &'a FacetVector> + Clone) -> ([f64; FACETS], [f64; FACETS]) {
    let mut n = 0usize;
    let mut sum = [0.0; FACETS];
    for v in vectors.clone() {
        n += 1;
        for (s, x) in sum.iter_mut().zip(v.facets()) {
            *s += x;
        }
    }
    let mean = sum.map(|s| s / n as f64);
    let mut ss = [0.0; FACETS];
    for v in vectors {
        for ((acc, x), m) in ss.iter_mut().zip(v.facets()).zip(&mean) {
            let d = x - m;
            *acc += d * d;
        }
    }
    (mean, ss.map(|s| (s / n as f64).sqrt()))
}

fn shift(panel: &GroupPanel, mean: &[f64; FACETS], scale: Option<&[f64; FACETS]>) -> GroupPanel {
    let members = panel
        .members()
        .iter()
        .map(|v| {
            let mut out = [0.0; FACETS];
            for f in 0..FACETS {
                let d = v.facets()[f] - mean[f];
                out[f] = match scale {
                    Some(s) => d / s[f],
                    None => d,
                };
            }
            FacetVector::from_array(out)
        })
        .collect();
    GroupPanel::new(panel.group_code(), members)
}

/// Moves panels into the requested facet space.
///
/// Global modes pool every admitted member; `group-mean` centers each panel
/// on its own facet means.
pub fn center_panels(panels: &[GroupPanel], mode: CenteringMode) -> Result<(Vec<GroupPanel>, TransformRecord)> {
    if panels.is_empty() || panels.iter().all(GroupPanel::is_empty) {
        return Err(Error::InvalidArgument("no panels to center".into()));
    }
    let mut record = TransformRecord { mode, means: None, scales: None, group_means: BTreeMap::new() };
    let all = || panels.iter().flat_map(|p| p.members().iter());
    let out = match mode {
        CenteringMode::None => panels.to_vec(),
        CenteringMode::GlobalMean => {
            let (mean, _) = facet_moments(all());
            record.means = Some(mean.to_vec());
            panels.iter().map(|p| shift(p, &mean, None)).collect()
        }
        CenteringMode::GlobalZscore => {
            let (mean, sd) = facet_moments(all());
            if let Some(facet) = sd.iter().position(|&s| s < MIN_SCALE) {
                return Err(Error::DegenerateFacet { facet: facet + 1 });
            }
            record.means = Some(mean.to_vec());
            record.scales = Some(sd.to_vec());
            panels.iter().map(|p| shift(p, &mean, Some(&sd))).collect()
        }
        CenteringMode::GroupMean => panels
            .iter()
            .map(|p| {
                let (mean, _) = facet_moments(p.members().iter());
                record.group_means.insert(p.group_code().to_string(), mean.to_vec());
                shift(p, &mean, None)
            })
            .collect(),
    };
    Ok((out, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpdi_testkit::{oracle, synth};

    fn panels() -> Vec<GroupPanel> {
        let mut rng = synth::rng(11);
        vec![
            GroupPanel::new("AA", synth::facet_rows(&mut rng, 60, 30.0, 6.0).into_iter().map(FacetVector::from_array).collect()),
            GroupPanel::new("BB", synth::facet_rows(&mut rng, 45, 28.0, 4.0).into_iter().map(FacetVector::from_array).collect()),
        ]
    }

    fn column(panels: &[GroupPanel], f: usize) -> Vec<f64> {
        panels.iter().flat_map(|p| p.members().iter().map(move |m| m.facets()[f])).collect()
    }

    #[test]
    fn none_is_identity() {
        let p = panels();
        let (out, rec) = center_panels(&p, CenteringMode::None).unwrap();
        assert_eq!(out, p);
        assert!(rec.means.is_none());
    }

    #[test]
    fn group_mean_zeroes_each_group() {
        let (out, rec) = center_panels(&panels(), CenteringMode::GroupMean).unwrap();
        for panel in &out {
            for f in 0..FACETS {
                let col: Vec<f64> = panel.members().iter().map(|m| m.facets()[f]).collect();
                assert!(oracle::mean(&col).abs() < 1e-9);
            }
        }
        assert_eq!(rec.group_means.len(), 2);
    }

    #[test]
    fn zscore_matches_two_pass_oracle() {
        let (out, rec) = center_panels(&panels(), CenteringMode::GlobalZscore).unwrap();
        for f in 0..FACETS {
            let col = column(&out, f);
            assert!(oracle::mean(&col).abs() < 1e-9);
            assert!((oracle::population_sd(&col) - 1.0).abs() < 1e-9);
        }
        let raw0 = column(&panels(), 0);
        assert!((rec.means.unwrap()[0] - oracle::mean(&raw0)).abs() < 1e-9);
        assert!((rec.scales.unwrap()[0] - oracle::population_sd(&raw0)).abs() < 1e-9);
    }

    #[test]
    fn zscore_rejects_constant_facet() {
        let p = vec![GroupPanel::new("AA", vec![FacetVector::from_array([3.0; FACETS]); 5])];
        assert_eq!(center_panels(&p, CenteringMode::GlobalZscore).unwrap_err(), Error::DegenerateFacet { facet: 1 });
        assert!(center_panels(&p, CenteringMode::GlobalMean).is_ok());
    }

    #[test]
    fn mode_names() {
        for m in [CenteringMode::None, CenteringMode::GlobalMean, CenteringMode::GlobalZscore, CenteringMode::GroupMean] {
            assert_eq!(m.to_string().parse::<CenteringMode>().unwrap(), m);
        }
        assert_eq!("global_zscore".parse::<CenteringMode>().unwrap(), CenteringMode::GlobalZscore);
    }
}
