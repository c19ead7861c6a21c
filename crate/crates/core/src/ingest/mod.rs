//! Response ingestion: item scoring, group panels and facet-space transforms.

mod center;
mod covariates;
mod records;

pub use center::{center_panels, CenteringMode, TransformRecord};
pub use covariates::{read_covariates, CovariateTable};
pub use records::{read_keying, read_raw_responses, read_scored, ReadOutcome, Reject};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FACETS: usize = 30;
pub const ITEMS: usize = 300;
pub const ITEMS_PER_FACET: usize = 10;
pub const DEFAULT_MIN_GROUP_SIZE: usize = 36;

/// Likert coding of the raw items, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemCoding {
    pub lo: u8,
    pub hi: u8,
}

impl Default for ItemCoding {
    fn default() -> Self {
        ItemCoding { lo: 1, hi: 5 }
    }
}

impl ItemCoding {
    pub fn new(lo: u8, hi: u8) -> Result<Self> {
        if lo >= hi {
            return Err(Error::InvalidArgument(format!("item coding {lo}-{hi} is empty")));
        }
        Ok(ItemCoding { lo, hi })
    }

    pub fn contains(&self, v: u8) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn flip(&self, v: u8) -> u8 {
        self.lo + self.hi - v
    }

    /// Inclusive range of a raw facet score (sum of ten items).
    pub fn facet_range(&self) -> (f64, f64) {
        let k = ITEMS_PER_FACET as f64;
        (k * self.lo as f64, k * self.hi as f64)
    }
}

impl fmt::Display for ItemCoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for ItemCoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("item coding must look like 1-5, got {s:?}"));
        let (lo, hi) = s.trim().split_once('-').ok_or_else(bad)?;
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().parse().map_err(|_| bad())?;
        ItemCoding::new(lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    Other,
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M" | "MALE" | "1" => Ok(Sex::Male),
            "F" | "FEMALE" | "2" => Ok(Sex::Female),
            "O" | "OTHER" | "X" | "3" => Ok(Sex::Other),
            other => Err(Error::InvalidArgument(format!("unknown sex code {other:?}"))),
        }
    }
}

/// Trim, uppercase and check the two-letter pattern.
pub fn normalize_group_code(raw: &str) -> Result<String> {
    let code = raw.trim().to_ascii_uppercase();
    if code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase()) {
        Ok(code)
    } else {
        Err(Error::InvalidArgument(format!("group code {raw:?} is not two letters")))
    }
}

/// One respondent's raw answers.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemResponseRecord {
    pub respondent_id: String,
    pub group_code: String,
    pub age: Option<u16>,
    pub sex: Option<Sex>,
    pub items: Vec<u8>,
}

impl ItemResponseRecord {
    pub fn validate(&self, coding: ItemCoding) -> std::result::Result<(), String> {
        if self.items.len() != ITEMS {
            return Err(format!("expected {ITEMS} items, found {}", self.items.len()));
        }
        if let Some((i, v)) = self.items.iter().enumerate().find(|(_, v)| !coding.contains(**v)) {
            return Err(format!("item {} value {v} outside coding {coding}", i + 1));
        }
        normalize_group_code(&self.group_code).map_err(|e| e.to_string())?;
        Ok(())
    }
}

/// Assignment of each of the 300 items to one facet, with reverse-key flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keying {
    facet_of: Vec<u8>,
    reverse: Vec<bool>,
}

impl Keying {
    /// Builds a keying from `(item, facet, reverse)` triples using 0-based indices.
    pub fn from_entries(entries: &[(usize, usize, bool)]) -> Result<Self> {
        let mut facet_of = vec![u8::MAX; ITEMS];
        let mut reverse = vec![false; ITEMS];
        for &(item, facet, rev) in entries {
            if item >= ITEMS || facet >= FACETS {
                return Err(Error::MalformedKeying(format!(
                    "item {} / facet {} out of range",
                    item + 1,
                    facet + 1
                )));
            }
            if facet_of[item] != u8::MAX {
                return Err(Error::MalformedKeying(format!("item {} keyed twice", item + 1)));
            }
            facet_of[item] = facet as u8;
            reverse[item] = rev;
        }
        if let Some(missing) = facet_of.iter().position(|&f| f == u8::MAX) {
            return Err(Error::MalformedKeying(format!("item {} has no facet", missing + 1)));
        }
        let mut per_facet = [0usize; FACETS];
        for &f in &facet_of {
            per_facet[f as usize] += 1;
        }
        if let Some(f) = per_facet.iter().position(|&c| c != ITEMS_PER_FACET) {
            return Err(Error::MalformedKeying(format!(
                "facet {} has {} items, expected {ITEMS_PER_FACET}",
                f + 1,
                per_facet[f]
            )));
        }
        Ok(Keying { facet_of, reverse })
    }

    /// Item `i` (0-based) belongs to facet `i mod 30`, nothing reverse-keyed.
    /// This is the interleaved layout of the public 300-item inventory files.
    pub fn cyclic() -> Self {
        Keying {
            facet_of: (0..ITEMS).map(|i| (i % FACETS) as u8).collect(),
            reverse: vec![false; ITEMS],
        }
    }

    pub fn facet_of(&self, item: usize) -> usize {
        self.facet_of[item] as usize
    }

    pub fn is_reversed(&self, item: usize) -> bool {
        self.reverse[item]
    }
}

/// Whether a vector lives in raw score space or a centered/standardized space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Raw,
    Transformed,
}

/// Thirty facet scores of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetVector {
    facets: [f64; FACETS],
    space: Space,
}

impl FacetVector {
    /// Raw-space vector; every score must lie within the coding's facet range.
    pub fn raw(facets: [f64; FACETS], coding: ItemCoding) -> Result<Self> {
        let (lo, hi) = coding.facet_range();
        if let Some((i, v)) = facets.iter().enumerate().find(|(_, v)| !(lo..=hi).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "facet {} score {v} outside [{lo}, {hi}]",
                i + 1
            )));
        }
        Ok(FacetVector { facets, space: Space::Raw })
    }

    /// Vector in a derived space, only checked for finiteness.
    pub fn transformed(facets: [f64; FACETS]) -> Result<Self> {
        if facets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite facet value".into()));
        }
        Ok(FacetVector { facets, space: Space::Transformed })
    }

    /// Unvalidated constructor for vectors of arbitrary provenance (synthetic data, tests).
    pub fn from_array(facets: [f64; FACETS]) -> Self {
        FacetVector { facets, space: Space::Transformed }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let facets: [f64; FACETS] = values.try_into().map_err(|_| {
            Error::InvalidArgument(format!("facet vector needs {FACETS} values, got {}", values.len()))
        })?;
        FacetVector::transformed(facets)
    }

    pub fn facets(&self) -> &[f64; FACETS] {
        &self.facets
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn norm(&self) -> f64 {
        self.facets.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Sums item values into facet scores, flipping reverse-keyed items.
pub fn score_items(
    record: &ItemResponseRecord,
    keying: &Keying,
    coding: ItemCoding,
) -> std::result::Result<FacetVector, String> {
    record.validate(coding)?;
    let mut facets = [0.0f64; FACETS];
    for (i, &v) in record.items.iter().enumerate() {
        let v = if keying.is_reversed(i) { coding.flip(v) } else { v };
        facets[keying.facet_of(i)] += v as f64;
    }
    Ok(FacetVector { facets, space: Space::Raw })
}

/// All admitted members of one group, in stable input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPanel {
    group_code: String,
    members: Vec<FacetVector>,
}

impl GroupPanel {
    pub fn new(group_code: impl Into<String>, members: Vec<FacetVector>) -> Self {
        GroupPanel { group_code: group_code.into(), members }
    }

    pub fn group_code(&self) -> &str {
        &self.group_code
    }

    pub fn members(&self) -> &[FacetVector] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `N(N-1)/2`.
    pub fn pair_count(&self) -> u64 {
        let n = self.members.len() as u64;
        n * n.saturating_sub(1) / 2
    }
}

/// A scored row on its way into a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub group_code: String,
    pub vector: FacetVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub country: String,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PanelSet {
    /// Sorted by group code.
    pub panels: Vec<GroupPanel>,
    pub exclusions: Vec<Exclusion>,
}

impl PanelSet {
    pub fn member_count(&self) -> usize {
        self.panels.iter().map(GroupPanel::len).sum()
    }

    pub fn get(&self, code: &str) -> Option<&GroupPanel> {
        self.panels.iter().find(|p| p.group_code == code)
    }
}

/// Groups rows by code and drops groups below `min_group_size`.
pub fn build_panels(rows: impl IntoIterator<Item = PanelRow>, min_group_size: usize) -> PanelSet {
    let mut groups: BTreeMap<String, Vec<FacetVector>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.group_code).or_default().push(row.vector);
    }
    let mut set = PanelSet::default();
    for (code, members) in groups {
        if members.len() >= min_group_size {
            set.panels.push(GroupPanel::new(code, members));
        } else {
            set.exclusions.push(Exclusion {
                country: code,
                n: members.len(),
                reason: format!("fewer than {min_group_size} members"),
            });
        }
    }
    set
}
