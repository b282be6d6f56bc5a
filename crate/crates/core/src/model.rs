//! Study envelopes, global domains, partitions and the binary coverage encoding.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atoms::{self, Kind, OrderKey};
use crate::bitset::BitSet;
use crate::error::{Error, Result};

/// Declaration of one key characteristic as it appears in an envelope file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicDecl {
    pub id: String,
    pub kind: Kind,
    /// Required for ordered characteristics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderKey>,
    /// Allowed atoms. Required for `declared` order; optional elsewhere, in
    /// which case any atom parseable under the order key is accepted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<String>,
    /// Free-text note on the atom resolution, e.g. "calendar month".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<String>,
}

impl CharacteristicDecl {
    pub fn categorical(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: Kind::Categorical,
            order: None,
            atoms: Vec::new(),
            resolution: None,
        }
    }

    pub fn ordered(id: impl Into<String>, order: OrderKey) -> Self {
        Self {
            id: id.into(),
            kind: Kind::Ordered,
            order: Some(order),
            atoms: Vec::new(),
            resolution: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::Schema("characteristic with empty id".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.atoms {
            if !seen.insert(a.as_str()) {
                return Err(Error::Schema(format!(
                    "characteristic `{}` declares atom `{a}` twice",
                    self.id
                )));
            }
        }
        match (self.kind, self.order) {
            (Kind::Ordered, None) => Err(Error::format(format!(
                "ordered characteristic `{}` has no order key",
                self.id
            ))),
            (Kind::Ordered, Some(OrderKey::Declared)) if self.atoms.is_empty() => {
                Err(Error::format(format!(
                    "characteristic `{}` uses declared order but lists no atoms",
                    self.id
                )))
            }
            (Kind::Ordered, Some(order)) if order != OrderKey::Declared => {
                for a in &self.atoms {
                    atoms::parse_atom(order, a, &[])?;
                }
                Ok(())
            }
            (Kind::Categorical, Some(_)) => Err(Error::Schema(format!(
                "categorical characteristic `{}` must not have an order key",
                self.id
            ))),
            _ => Ok(()),
        }
    }

    /// Expands one raw token (atom or `start..end`) into canonical atoms and
    /// checks them against the declared atom list, if any.
    pub fn expand(&self, token: &str) -> Result<Vec<String>> {
        let out = atoms::expand_token(self.kind, self.order, token, &self.atoms)?;
        if !self.atoms.is_empty() && self.order != Some(OrderKey::Declared) {
            for a in &out {
                if !self.atoms.contains(a) {
                    return Err(Error::Schema(format!(
                        "atom `{a}` is not declared for characteristic `{}`",
                        self.id
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Sorts atoms in the characteristic's total order (ordered kinds only).
    fn sort_atoms(&self, atoms: &mut [String]) {
        if let (Kind::Ordered, Some(order)) = (self.kind, self.order) {
            atoms.sort_by(|a, b| atoms::compare_atoms(order, a, b, &self.atoms));
        }
    }
}

/// Set of atoms a study reports for one characteristic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportedRange {
    pub characteristic: String,
    pub atoms: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyExtras {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub arms: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyEnvelope {
    pub study_id: String,
    pub sample_size: u64,
    /// One range per declared characteristic, in declaration order.
    pub ranges: Vec<ReportedRange>,
    #[serde(default)]
    pub extras: StudyExtras,
}

impl StudyEnvelope {
    pub fn range(&self, characteristic: &str) -> Option<&ReportedRange> {
        self.ranges.iter().find(|r| r.characteristic == characteristic)
    }
}

/// A validated set of study envelopes together with their characteristic
/// declarations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub characteristics: Vec<CharacteristicDecl>,
    pub studies: Vec<StudyEnvelope>,
}

impl Synthesis {
    /// Validates and normalizes range order to declaration order.
    pub fn new(
        characteristics: Vec<CharacteristicDecl>,
        mut studies: Vec<StudyEnvelope>,
    ) -> Result<Self> {
        if characteristics.is_empty() {
            return Err(Error::Schema("no characteristics declared".into()));
        }
        let mut ids = HashSet::new();
        for c in &characteristics {
            c.validate()?;
            if !ids.insert(c.id.as_str()) {
                return Err(Error::Schema(format!("characteristic `{}` declared twice", c.id)));
            }
        }
        let mut study_ids = HashSet::new();
        for s in &mut studies {
            if !study_ids.insert(s.study_id.clone()) {
                return Err(Error::Schema(format!("duplicate study_id `{}`", s.study_id)));
            }
            if s.sample_size == 0 {
                return Err(Error::Schema(format!(
                    "study `{}` has sample_size 0; must be at least 1",
                    s.study_id
                )));
            }
            check_characteristic_set(&characteristics, s)?;
            s.ranges.sort_by_key(|r| {
                characteristics
                    .iter()
                    .position(|c| c.id == r.characteristic)
                    .expect("checked above")
            });
            for (decl, range) in characteristics.iter().zip(&s.ranges) {
                if range.atoms.is_empty() {
                    return Err(Error::Schema(format!(
                        "study `{}` reports an empty range for `{}`",
                        s.study_id, decl.id
                    )));
                }
                for a in &range.atoms {
                    let canon = decl.expand(a).map_err(|e| {
                        Error::Schema(format!("study `{}`, `{}`: {e}", s.study_id, decl.id))
                    })?;
                    if canon.len() != 1 || &canon[0] != a {
                        return Err(Error::Schema(format!(
                            "study `{}`, `{}`: `{a}` is not a canonical atom",
                            s.study_id, decl.id
                        )));
                    }
                }
            }
        }
        Ok(Self {
            characteristics,
            studies,
        })
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }
}

fn check_characteristic_set(decls: &[CharacteristicDecl], s: &StudyEnvelope) -> Result<()> {
    let mut seen = HashSet::new();
    for r in &s.ranges {
        if !decls.iter().any(|c| c.id == r.characteristic) {
            return Err(Error::Schema(format!(
                "study `{}` reports undeclared characteristic `{}`",
                s.study_id, r.characteristic
            )));
        }
        if !seen.insert(r.characteristic.as_str()) {
            return Err(Error::Schema(format!(
                "study `{}` reports `{}` twice",
                s.study_id, r.characteristic
            )));
        }
    }
    if let Some(missing) = decls.iter().find(|c| !seen.contains(c.id.as_str())) {
        return Err(Error::Schema(format!(
            "study `{}` is missing characteristic `{}`",
            s.study_id, missing.id
        )));
    }
    Ok(())
}

/// The global union of reported atoms for one characteristic.
#[derive(Clone, Debug, Serialize)]
pub struct CharacteristicDomain {
    pub decl: CharacteristicDecl,
    pub atoms: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl CharacteristicDomain {
    pub fn new(decl: CharacteristicDecl, atoms: Vec<String>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Schema(format!("domain `{}` has no atoms", decl.id)));
        }
        let mut index = HashMap::with_capacity(atoms.len());
        for (i, a) in atoms.iter().enumerate() {
            if index.insert(a.clone(), i).is_some() {
                return Err(Error::Schema(format!(
                    "domain `{}` repeats atom `{a}`",
                    decl.id
                )));
            }
        }
        Ok(Self { decl, atoms, index })
    }

    pub fn id(&self) -> &str {
        &self.decl.id
    }

    pub fn kind(&self) -> Kind {
        self.decl.kind
    }

    pub fn position(&self, atom: &str) -> Option<usize> {
        self.index.get(atom).copied()
    }
}

impl PartialEq for CharacteristicDomain {
    fn eq(&self, other: &Self) -> bool {
        self.decl == other.decl && self.atoms == other.atoms
    }
}

/// Builds the global domain of every characteristic as the union of all
/// studies' reported atoms.
///
/// Ordered domains are sorted by their order key. Categorical atoms appear in
/// order of first appearance across studies (within one study, lexicographic).
pub fn build_global_domains(
    decls: &[CharacteristicDecl],
    studies: &[StudyEnvelope],
) -> Result<Vec<CharacteristicDomain>> {
    for d in decls {
        d.validate()?;
    }
    for s in studies {
        check_characteristic_set(decls, s)?;
    }
    decls
        .iter()
        .map(|decl| {
            let mut seen = HashSet::new();
            let mut atoms = Vec::new();
            for s in studies {
                let range = s.range(&decl.id).expect("checked above");
                for a in &range.atoms {
                    if seen.insert(a.as_str()) {
                        atoms.push(a.clone());
                    }
                }
            }
            decl.sort_atoms(&mut atoms);
            CharacteristicDomain::new(decl.clone(), atoms)
        })
        .collect()
}

/// How to split each global domain into bins.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum PartitionScheme {
    /// One bin per atom.
    #[default]
    Singleton,
    /// Runs of `w` consecutive atoms on ordered domains; categorical domains
    /// stay singleton.
    UniformWidth(usize),
    /// Explicit bins keyed by characteristic id. Each bin is a list of tokens
    /// (atoms or `start..end` intervals). Characteristics without an entry
    /// get singleton bins.
    Explicit(BTreeMap<String, Vec<Vec<String>>>),
}

impl PartitionScheme {
    /// Parses the command-line form: `singleton`, `width=N`.
    /// (`file=PATH` is resolved by the io layer.)
    pub fn parse_inline(s: &str) -> Result<Self> {
        if s == "singleton" {
            return Ok(Self::Singleton);
        }
        if let Some(w) = s.strip_prefix("width=") {
            let w: usize = w
                .parse()
                .map_err(|_| Error::Partition(format!("invalid bin width `{w}`")))?;
            return Ok(Self::UniformWidth(w));
        }
        Err(Error::Partition(format!("unknown partition scheme `{s}`")))
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Singleton => "singleton".into(),
            Self::UniformWidth(w) => format!("width={w}"),
            Self::Explicit(_) => "explicit".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharacteristicPartition {
    pub id: String,
    pub kind: Kind,
    /// Each bin's atoms in domain order.
    pub bins: Vec<Vec<String>>,
    #[serde(skip)]
    bin_of: HashMap<String, usize>,
}

impl CharacteristicPartition {
    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_of(&self, atom: &str) -> Option<usize> {
        self.bin_of.get(atom).copied()
    }

    /// Human-readable bin label, e.g. `2021` or `2021..2023` or `{a, b}`.
    pub fn bin_label(&self, l: usize) -> String {
        let bin = &self.bins[l];
        match (self.kind, bin.len()) {
            (_, 1) => bin[0].clone(),
            (Kind::Ordered, _) => format!("{}..{}", bin[0], bin[bin.len() - 1]),
            (Kind::Categorical, _) => format!("{{{}}}", bin.join(", ")),
        }
    }
}

/// Ordered, disjoint bins covering each characteristic's global domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionFamily {
    pub characteristics: Vec<CharacteristicPartition>,
}

impl PartitionFamily {
    pub fn bin_counts(&self) -> Vec<usize> {
        self.characteristics.iter().map(|c| c.bin_count()).collect()
    }
}

pub fn partition_domains(
    domains: &[CharacteristicDomain],
    scheme: &PartitionScheme,
) -> Result<PartitionFamily> {
    if let PartitionScheme::Explicit(map) = scheme {
        if let Some(unknown) = map.keys().find(|k| !domains.iter().any(|d| d.id() == *k)) {
            return Err(Error::Partition(format!(
                "bin file names unknown characteristic `{unknown}`"
            )));
        }
    }
    let characteristics = domains
        .iter()
        .map(|d| {
            let positions: Vec<Vec<usize>> = match scheme {
                PartitionScheme::Singleton => singleton_bins(d),
                PartitionScheme::UniformWidth(0) => {
                    return Err(Error::Partition("bin width must be at least 1".into()))
                }
                PartitionScheme::UniformWidth(w) => match d.kind() {
                    Kind::Ordered => (0..d.atoms.len())
                        .collect::<Vec<_>>()
                        .chunks(*w)
                        .map(<[usize]>::to_vec)
                        .collect(),
                    Kind::Categorical => singleton_bins(d),
                },
                PartitionScheme::Explicit(map) => match map.get(d.id()) {
                    None => singleton_bins(d),
                    Some(bins) => explicit_bins(d, bins)?,
                },
            };
            let mut bin_of = HashMap::new();
            let bins = positions
                .iter()
                .enumerate()
                .map(|(l, bin)| {
                    bin.iter()
                        .map(|&p| {
                            bin_of.insert(d.atoms[p].clone(), l);
                            d.atoms[p].clone()
                        })
                        .collect()
                })
                .collect();
            Ok(CharacteristicPartition {
                id: d.id().to_string(),
                kind: d.kind(),
                bins,
                bin_of,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PartitionFamily { characteristics })
}

fn singleton_bins(d: &CharacteristicDomain) -> Vec<Vec<usize>> {
    (0..d.atoms.len()).map(|p| vec![p]).collect()
}

fn explicit_bins(d: &CharacteristicDomain, bins: &[Vec<String>]) -> Result<Vec<Vec<usize>>> {
    let mut owner: Vec<Option<usize>> = vec![None; d.atoms.len()];
    let mut out = Vec::with_capacity(bins.len());
    for (b, tokens) in bins.iter().enumerate() {
        let mut positions = BTreeSet::new();
        for t in tokens {
            for atom in d.decl.expand(t).map_err(|e| {
                Error::Partition(format!("`{}` bin {b}: {e}", d.id()))
            })? {
                // Interval tokens may name atoms no study reports; those fall
                // outside the union and are dropped.
                let Some(p) = d.position(&atom) else {
                    if t.contains("..") && d.kind() == Kind::Ordered {
                        continue;
                    }
                    return Err(Error::Partition(format!(
                        "`{}` bin {b} contains `{atom}`, which no study reports",
                        d.id()
                    )));
                };
                if let Some(prev) = owner[p] {
                    if prev != b {
                        return Err(Error::Partition(format!(
                            "`{}` bins {prev} and {b} overlap on `{atom}`",
                            d.id()
                        )));
                    }
                }
                owner[p] = Some(b);
                positions.insert(p);
            }
        }
        if positions.is_empty() {
            return Err(Error::Partition(format!("`{}` bin {b} is empty", d.id())));
        }
        let positions: Vec<usize> = positions.into_iter().collect();
        if d.kind() == Kind::Ordered && positions.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Partition(format!(
                "`{}` bin {b} is not contiguous in the atom order",
                d.id()
            )));
        }
        out.push(positions);
    }
    if let Some(p) = owner.iter().position(Option::is_none) {
        return Err(Error::Partition(format!(
            "`{}` bins do not cover `{}`",
            d.id(),
            d.atoms[p]
        )));
    }
    if d.kind() == Kind::Ordered {
        out.sort_by_key(|bin| bin[0]);
    }
    Ok(out)
}

/// Binary coverage matrix: bit `l` of `coverage[i][k]` is set iff study `i`'s
/// range for characteristic `k` intersects bin `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSynthesis {
    pub study_ids: Vec<String>,
    pub sample_sizes: Vec<u64>,
    pub characteristics: Vec<String>,
    pub bin_counts: Vec<usize>,
    pub coverage: Vec<Vec<BitSet>>,
}

#[derive(Serialize)]
struct EncodedRow<'a> {
    study_id: &'a str,
    sample_size: u64,
    coverage: BTreeMap<&'a str, String>,
}

#[derive(Serialize)]
struct EncodedDoc<'a> {
    characteristics: Vec<(&'a str, usize)>,
    studies: Vec<EncodedRow<'a>>,
}

impl EncodedSynthesis {
    pub fn n_studies(&self) -> usize {
        self.study_ids.len()
    }

    pub fn n_characteristics(&self) -> usize {
        self.characteristics.len()
    }

    pub fn vector(&self, study: usize, characteristic: usize) -> &BitSet {
        &self.coverage[study][characteristic]
    }

    /// Deterministic JSON rendering with coverage vectors as bit strings.
    pub fn to_json(&self) -> String {
        let doc = EncodedDoc {
            characteristics: self
                .characteristics
                .iter()
                .map(String::as_str)
                .zip(self.bin_counts.iter().copied())
                .collect(),
            studies: self
                .study_ids
                .iter()
                .enumerate()
                .map(|(i, id)| EncodedRow {
                    study_id: id,
                    sample_size: self.sample_sizes[i],
                    coverage: self
                        .characteristics
                        .iter()
                        .enumerate()
                        .map(|(k, c)| (c.as_str(), self.coverage[i][k].to_bit_string()))
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }

    /// SHA-256 of [`to_json`](Self::to_json), hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

pub fn encode(studies: &[StudyEnvelope], partition: &PartitionFamily) -> Result<EncodedSynthesis> {
    let mut coverage = Vec::with_capacity(studies.len());
    for s in studies {
        let mut row = Vec::with_capacity(partition.characteristics.len());
        for cp in &partition.characteristics {
            let range = s.range(&cp.id).ok_or_else(|| {
                Error::Schema(format!("study `{}` is missing `{}`", s.study_id, cp.id))
            })?;
            let mut v = BitSet::new(cp.bin_count());
            for a in &range.atoms {
                let l = cp.bin_of(a).ok_or_else(|| {
                    Error::Partition(format!(
                        "study `{}` reports `{a}` for `{}`, outside the partition",
                        s.study_id, cp.id
                    ))
                })?;
                v.insert(l);
            }
            row.push(v);
        }
        coverage.push(row);
    }
    Ok(EncodedSynthesis {
        study_ids: studies.iter().map(|s| s.study_id.clone()).collect(),
        sample_sizes: studies.iter().map(|s| s.sample_size).collect(),
        characteristics: partition.characteristics.iter().map(|c| c.id.clone()).collect(),
        bin_counts: partition.bin_counts(),
        coverage,
    })
}

/// Union of the bins flagged in a coverage vector.
pub fn decode(partition: &PartitionFamily, characteristic: usize, v: &BitSet) -> BTreeSet<String> {
    let cp = &partition.characteristics[characteristic];
    v.iter().flat_map(|l| cp.bins[l].iter().cloned()).collect()
}

/// Convenience: domains, partition and encoding in one step.
pub fn encode_synthesis(
    synthesis: &Synthesis,
    scheme: &PartitionScheme,
) -> Result<(PartitionFamily, EncodedSynthesis)> {
    let domains = build_global_domains(&synthesis.characteristics, &synthesis.studies)?;
    let partition = partition_domains(&domains, scheme)?;
    let encoded = encode(&synthesis.studies, &partition)?;
    Ok((partition, encoded))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn range(c: &str, atoms: &[&str]) -> ReportedRange {
        ReportedRange {
            characteristic: c.into(),
            atoms: atoms.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub(crate) fn study(id: &str, n: u64, ranges: Vec<ReportedRange>) -> StudyEnvelope {
        StudyEnvelope {
            study_id: id.into(),
            sample_size: n,
            ranges,
            extras: StudyExtras::default(),
        }
    }

    /// The four-study example: locations and years per study.
    pub(crate) fn toy4() -> Synthesis {
        let decls = vec![
            CharacteristicDecl::categorical("location"),
            CharacteristicDecl::ordered("time", OrderKey::DateYear),
        ];
        let s = |id, n, loc: &[&str], t: &[&str]| study(id, n, vec![range("location", loc), range("time", t)]);
        Synthesis::new(
            decls,
            vec![
                s("S1", 3, &["area 1", "area 2"], &["2021", "2022"]),
                s("S2", 4, &["area 1", "area 2", "area 3"], &["2022", "2023"]),
                s("S3", 2, &["area 2", "area 3"], &["2022", "2023"]),
                s("S4", 5, &["area 3", "area 4"], &["2023"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn toy_domains() {
        let t = toy4();
        let d = build_global_domains(&t.characteristics, &t.studies).unwrap();
        assert_eq!(d[0].atoms, ["area 1", "area 2", "area 3", "area 4"]);
        assert_eq!(d[1].atoms, ["2021", "2022", "2023"]);
    }

    #[test]
    fn single_study_domain() {
        let decls = vec![CharacteristicDecl::categorical("c")];
        let studies = vec![study("A", 1, vec![range("c", &["a"])])];
        let d = build_global_domains(&decls, &studies).unwrap();
        assert_eq!(d[0].atoms, ["a"]);
    }

    #[test]
    fn toy_singleton_bin_counts() {
        let t = toy4();
        let d = build_global_domains(&t.characteristics, &t.studies).unwrap();
        let p = partition_domains(&d, &PartitionScheme::Singleton).unwrap();
        assert_eq!(p.bin_counts(), [4, 3]);
    }

    #[test]
    fn width_three_merges_years() {
        let t = toy4();
        let d = build_global_domains(&t.characteristics, &t.studies).unwrap();
        let p = partition_domains(&d, &PartitionScheme::UniformWidth(3)).unwrap();
        assert_eq!(p.bin_counts(), [4, 1]);
        assert_eq!(p.characteristics[1].bin_label(0), "2021..2023");
    }

    #[test]
    fn toy_encoding() {
        let (_, e) = encode_synthesis(&toy4(), &PartitionScheme::Singleton).unwrap();
        let loc: Vec<String> = (0..4).map(|i| e.vector(i, 0).to_bit_string()).collect();
        let time: Vec<String> = (0..4).map(|i| e.vector(i, 1).to_bit_string()).collect();
        assert_eq!(loc, ["1100", "1110", "0110", "0011"]);
        assert_eq!(time, ["110", "011", "011", "001"]);
    }

    #[test]
    fn full_range_is_all_ones() {
        let t = toy4();
        let mut studies = t.studies.clone();
        studies[0].ranges[0] = range("location", &["area 1", "area 2", "area 3", "area 4"]);
        let d = build_global_domains(&t.characteristics, &studies).unwrap();
        let p = partition_domains(&d, &PartitionScheme::Singleton).unwrap();
        let e = encode(&studies, &p).unwrap();
        assert_eq!(e.vector(0, 0).count(), 4);
    }

    #[test]
    fn rejects_inconsistent_characteristics() {
        let t = toy4();
        let mut studies = t.studies.clone();
        studies[2].ranges.pop();
        let err = build_global_domains(&t.characteristics, &studies).unwrap_err();
        assert!(err.to_string().contains("S3"), "{err}");
        assert!(Synthesis::new(t.characteristics.clone(), studies).is_err());
    }

    #[test]
    fn rejects_duplicate_ids_and_zero_size() {
        let t = toy4();
        let mut studies = t.studies.clone();
        studies[1].study_id = "S1".into();
        assert!(Synthesis::new(t.characteristics.clone(), studies).is_err());
        let mut studies = t.studies.clone();
        studies[1].sample_size = 0;
        assert!(Synthesis::new(t.characteristics.clone(), studies).is_err());
    }

    #[test]
    fn ordered_without_order_key_is_a_format_error() {
        let mut decl = CharacteristicDecl::categorical("t");
        decl.kind = Kind::Ordered;
        let studies = vec![study("A", 1, vec![range("t", &["1"])])];
        assert!(matches!(
            build_global_domains(&[decl], &studies),
            Err(Error::Format { .. })
        ));
    }

    fn explicit(c: &str, bins: &[&[&str]]) -> PartitionScheme {
        PartitionScheme::Explicit(BTreeMap::from([(
            c.to_string(),
            bins.iter()
                .map(|b| b.iter().map(|s| s.to_string()).collect())
                .collect(),
        )]))
    }

    #[test]
    fn explicit_partition_errors() {
        let t = toy4();
        let d = build_global_domains(&t.characteristics, &t.studies).unwrap();
        let overlap = explicit("time", &[&["2021", "2022"], &["2022", "2023"]]);
        let e = partition_domains(&d, &overlap).unwrap_err().to_string();
        assert!(e.contains("bins 0 and 1 overlap"), "{e}");
        let gap = explicit("time", &[&["2021"], &["2022"]]);
        let e = partition_domains(&d, &gap).unwrap_err().to_string();
        assert!(e.contains("do not cover"), "{e}");
        let holes = explicit("time", &[&["2021", "2023"], &["2022"]]);
        let e = partition_domains(&d, &holes).unwrap_err().to_string();
        assert!(e.contains("bin 0 is not contiguous"), "{e}");
        let ok = explicit("time", &[&["2023"], &["2021..2022"]]);
        let p = partition_domains(&d, &ok).unwrap();
        assert_eq!(p.characteristics[1].bins, vec![vec!["2021", "2022"], vec!["2023"]]);
        // Categorical bins need not be contiguous.
        let cat = explicit("location", &[&["area 1", "area 3"], &["area 2", "area 4"]]);
        assert!(partition_domains(&d, &cat).is_ok());
    }
}
