//! Synthetic individual-level syntheses with known study memberships, and
//! brute-force ground truth computed from them.
//!
//! Everything here is deliberately slow and direct: memberships are plain
//! sets, overlap is set intersection, and the envelope-side reference
//! routines in [`reference`] work on atom sets instead of encoded bits.

use std::collections::{BTreeSet, HashMap};

use num::rational::BigRational;
use num::{BigInt, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{Kind, OrderKey};
use crate::bitset::BitSet;
use crate::bound::pair_deduction;
use crate::error::{Error, Result};
use crate::model::{
    encode_synthesis, CharacteristicDecl, PartitionScheme, ReportedRange, StudyEnvelope,
    StudyExtras, Synthesis,
};
use crate::potential::potential;
use crate::ratio::Fraction;

/// One underlying observation event with its latent value per characteristic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub event_id: u32,
    /// Optional display name, e.g. `c` in the linked four-study example.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub values: Vec<String>,
}

/// A characteristic and its full atom alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentDomain {
    pub decl: CharacteristicDecl,
    pub atoms: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentStudy {
    pub study_id: String,
    /// Event ids, sorted, without duplicates.
    pub members: Vec<u32>,
    pub envelope: StudyEnvelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSynthesis {
    pub domains: Vec<LatentDomain>,
    pub records: Vec<LatentRecord>,
    pub studies: Vec<LatentStudy>,
    /// False when overlap was requested but no attempt produced any.
    #[serde(default = "yes")]
    pub overlap_realized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Recorded values were perturbed before deriving envelopes.
    #[serde(default)]
    pub distorted: bool,
}

fn yes() -> bool {
    true
}

impl SyntheticSynthesis {
    /// Display names of events by record index: the label, or the id.
    pub fn event_names(&self, events: &[u32]) -> Vec<String> {
        events
            .iter()
            .map(|id| {
                self.records
                    .iter()
                    .find(|r| r.event_id == *id)
                    .and_then(|r| r.label.clone())
                    .unwrap_or_else(|| id.to_string())
            })
            .collect()
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::Format {
            message: e.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Checks membership and (for undistorted data) envelope containment.
    pub fn validate(&self) -> Result<()> {
        let index = self.event_index()?;
        let kc = self.domains.len();
        for r in &self.records {
            if r.values.len() != kc {
                return Err(Error::Schema(format!(
                    "event {} has {} values, expected {kc}",
                    r.event_id,
                    r.values.len()
                )));
            }
            for (d, v) in self.domains.iter().zip(&r.values) {
                if !d.atoms.contains(v) {
                    return Err(Error::Schema(format!(
                        "event {} value `{v}` is not in domain `{}`",
                        r.event_id, d.decl.id
                    )));
                }
            }
        }
        for s in &self.studies {
            if s.members.is_empty() {
                return Err(Error::Schema(format!("study `{}` has no members", s.study_id)));
            }
            if s.members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Schema(format!(
                    "study `{}` members must be sorted and unique",
                    s.study_id
                )));
            }
            if s.envelope.sample_size != s.members.len() as u64 {
                return Err(Error::Schema(format!(
                    "study `{}` sample size does not match its membership",
                    s.study_id
                )));
            }
            for m in &s.members {
                let Some(&e) = index.get(m) else {
                    return Err(Error::Schema(format!(
                        "study `{}` includes unknown event {m}",
                        s.study_id
                    )));
                };
                if self.distorted {
                    continue;
                }
                for (k, d) in self.domains.iter().enumerate() {
                    let v = &self.records[e].values[k];
                    let contained = s
                        .envelope
                        .range(&d.decl.id)
                        .is_some_and(|r| r.atoms.contains(v));
                    if !contained {
                        return Err(Error::Schema(format!(
                            "study `{}` envelope for `{}` misses member value `{v}`",
                            s.study_id, d.decl.id
                        )));
                    }
                }
            }
        }
        self.envelope_synthesis().map(|_| ())
    }

    fn event_index(&self) -> Result<HashMap<u32, usize>> {
        let mut index = HashMap::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if index.insert(r.event_id, i).is_some() {
                return Err(Error::Schema(format!("duplicate event id {}", r.event_id)));
            }
        }
        Ok(index)
    }

    /// Membership of each study as a bitset over record positions.
    pub fn memberships(&self) -> Vec<BitSet> {
        let index = self.event_index().expect("validated");
        self.studies
            .iter()
            .map(|s| BitSet::from_indices(self.records.len(), s.members.iter().map(|m| index[m])))
            .collect()
    }

    /// The study-level view an analyst would see.
    pub fn envelope_synthesis(&self) -> Result<Synthesis> {
        Synthesis::new(
            self.domains.iter().map(|d| d.decl.clone()).collect(),
            self.studies.iter().map(|s| s.envelope.clone()).collect(),
        )
    }
}

/// Latent-side overlap summaries of one subset.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapSummary {
    /// Event ids shared by every member.
    pub overlap: Vec<u32>,
    pub union_size: u64,
    /// Overlap set is non-empty.
    pub f1: u8,
    /// Overlap set size.
    pub f2: u64,
    /// Proportion of overlap, |O| / |union|.
    pub f3: Fraction,
    /// |O| over the geometric mean of member sizes.
    pub f4: f64,
}

pub fn union_size(memberships: &[BitSet], subset: &BitSet) -> u64 {
    let Some(first) = subset.first() else { return 0 };
    let mut u = memberships[first].clone();
    for i in subset.iter() {
        u.union_with(&memberships[i]);
    }
    u.count() as u64
}

fn intersection(memberships: &[BitSet], subset: &BitSet) -> BitSet {
    let first = subset.first().expect("non-empty subset");
    let mut o = memberships[first].clone();
    for i in subset.iter() {
        o.intersect_with(&memberships[i]);
    }
    o
}

pub fn true_overlap(synthesis: &SyntheticSynthesis, subset: &BitSet) -> OverlapSummary {
    let memberships = synthesis.memberships();
    let union = union_size(&memberships, subset);
    let k = subset.count();
    if k < 2 {
        return OverlapSummary {
            overlap: Vec::new(),
            union_size: union,
            f1: 0,
            f2: 0,
            f3: Fraction::zero(),
            f4: 0.0,
        };
    }
    let o = intersection(&memberships, subset);
    let f2 = o.count() as u64;
    let log_mean = subset
        .iter()
        .map(|i| (memberships[i].count() as f64).ln())
        .sum::<f64>()
        / k as f64;
    OverlapSummary {
        overlap: o.iter().map(|e| synthesis.records[e].event_id).collect(),
        union_size: union,
        f1: u8::from(f2 > 0),
        f2,
        f3: Fraction::new(f2, union),
        f4: f2 as f64 / log_mean.exp(),
    }
}

/// Largest study count for checks that visit every subset.
pub const MAX_EXHAUSTIVE_STUDIES: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionExclusionReport {
    pub union_size: u64,
    /// Σ over non-empty subsets of (−1)^{|A|+1} |∩A|.
    pub alternating_sum: i128,
    pub terms: usize,
    /// Every intersection term agreed with a per-event recount.
    pub terms_verified: bool,
    /// Σ|S_i| − Σ|S_i ∩ S_j|.
    pub pairwise_bound: i128,
    /// Σ n_i − Σ π/(1+π)·(n_i+n_j) with true pairwise π.
    pub proportion_bound: BigRational,
    /// The capped proxy formula evaluated with true pairwise π.
    pub capped_proxy_with_true_pi: BigRational,
}

impl InclusionExclusionReport {
    pub fn identity_holds(&self) -> bool {
        self.terms_verified && self.alternating_sum == self.union_size as i128
    }

    pub fn bounds_hold(&self) -> bool {
        let u = BigRational::from_integer(BigInt::from(self.union_size));
        self.pairwise_bound <= self.union_size as i128
            && self.proportion_bound <= u
            && self.capped_proxy_with_true_pi <= u
            && self.proportion_bound == BigRational::from_integer(BigInt::from(self.pairwise_bound))
    }
}

pub fn inclusion_exclusion_check(synthesis: &SyntheticSynthesis) -> Result<InclusionExclusionReport> {
    let n = synthesis.n_studies();
    if n > MAX_EXHAUSTIVE_STUDIES {
        return Err(Error::Capacity(format!(
            "inclusion-exclusion check visits 2^n subsets; n = {n} exceeds {MAX_EXHAUSTIVE_STUDIES}"
        )));
    }
    let memberships = synthesis.memberships();
    let all = BitSet::full(n);
    let union = union_size(&memberships, &all);
    let mut alternating_sum = 0i128;
    let mut terms_verified = true;
    for mask in 1u32..(1u32 << n) {
        let subset = BitSet::from_indices(n, (0..n).filter(|i| mask >> i & 1 == 1));
        let term = intersection(&memberships, &subset).count() as i128;
        let recount = (0..synthesis.records.len())
            .filter(|&e| subset.iter().all(|i| memberships[i].contains(e)))
            .count() as i128;
        terms_verified &= term == recount;
        if mask.count_ones() % 2 == 1 {
            alternating_sum += term;
        } else {
            alternating_sum -= term;
        }
    }
    let sizes: Vec<u64> = memberships.iter().map(|m| m.count() as u64).collect();
    let total: i128 = sizes.iter().map(|&s| s as i128).sum();
    let mut pairwise_bound = total;
    let mut proportion_bound = BigRational::from_integer(BigInt::from(total));
    let mut capped = proportion_bound.clone();
    for i in 0..n {
        for j in i + 1..n {
            let inter = memberships[i].intersection_count(&memberships[j]) as u64;
            let uni = memberships[i].union(&memberships[j]).count() as u64;
            pairwise_bound -= inter as i128;
            let pi = BigRational::new(BigInt::from(inter), BigInt::from(uni));
            let share = &pi / (BigRational::from_integer(1.into()) + &pi);
            proportion_bound -= share * BigRational::from_integer(BigInt::from(sizes[i] + sizes[j]));
            capped -= pair_deduction(&pi, sizes[i], sizes[j]).0;
        }
    }
    Ok(InclusionExclusionReport {
        union_size: union,
        alternating_sum,
        terms: (1usize << n) - 1,
        terms_verified,
        pairwise_bound,
        proportion_bound,
        capped_proxy_with_true_pi: capped,
    })
}

/// Knobs for [`generate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub n_studies: usize,
    pub collective_size: usize,
    pub min_study_size: usize,
    pub max_study_size: usize,
    pub domains: Vec<LatentDomain>,
    /// Probability that a study slot reuses an event already in another study.
    pub overlap_intensity: f64,
    /// Fraction of (study, characteristic) envelopes widened past the tight hull.
    pub padding: f64,
    /// Fraction of recorded member values moved to a neighbouring atom before
    /// envelopes are derived. Anything above 0 breaks envelope containment.
    pub distortion: f64,
    pub seed: u64,
}

impl GenerationConfig {
    /// Two characteristics: a 6-region categorical one and 10 calendar years.
    pub fn standard(n_studies: usize, seed: u64) -> Self {
        let mut year = CharacteristicDecl::ordered("year", OrderKey::DateYear);
        year.resolution = Some("calendar year".into());
        Self {
            n_studies,
            collective_size: 200,
            min_study_size: 5,
            max_study_size: 40,
            domains: vec![
                LatentDomain {
                    decl: CharacteristicDecl::categorical("region"),
                    atoms: (1..=6).map(|r| format!("region {r}")).collect(),
                },
                LatentDomain {
                    decl: year,
                    atoms: (2010..2020).map(|y| y.to_string()).collect(),
                },
            ],
            overlap_intensity: 0.3,
            padding: 0.2,
            distortion: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("overlap_intensity", self.overlap_intensity)?;
        prob("padding", self.padding)?;
        prob("distortion", self.distortion)?;
        if self.n_studies == 0 || self.collective_size == 0 {
            return Err(Error::Config("study count and collective size must be positive".into()));
        }
        if self.min_study_size == 0 || self.min_study_size > self.max_study_size {
            return Err(Error::Config(format!(
                "study size range {}..={} is empty or starts at 0",
                self.min_study_size, self.max_study_size
            )));
        }
        if self.max_study_size > self.collective_size {
            return Err(Error::Config(format!(
                "study size {} exceeds collective size {}",
                self.max_study_size, self.collective_size
            )));
        }
        if self.domains.is_empty() {
            return Err(Error::Config("no characteristic domains".into()));
        }
        for d in &self.domains {
            d.decl.validate()?;
            if d.atoms.is_empty() {
                return Err(Error::Config(format!("domain `{}` has no atoms", d.decl.id)));
            }
        }
        Ok(())
    }
}

const GENERATION_ATTEMPTS: usize = 16;

/// Draws a synthetic synthesis. Identical configs (including the seed)
/// produce identical output on every platform: the generator is ChaCha8
/// seeded from `config.seed`, and all draws happen in a fixed order.
pub fn generate(config: &GenerationConfig) -> Result<SyntheticSynthesis> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut last = None;
    for _ in 0..GENERATION_ATTEMPTS {
        let s = generate_once(config, &mut rng)?;
        let wants_overlap = config.overlap_intensity > 0.0 && config.n_studies > 1;
        if !wants_overlap || has_overlapping_pair(&s) {
            return Ok(s);
        }
        last = Some(s);
    }
    let mut s = last.expect("at least one attempt");
    s.overlap_realized = false;
    Ok(s)
}

fn has_overlapping_pair(s: &SyntheticSynthesis) -> bool {
    let m = s.memberships();
    (0..m.len()).any(|i| (i + 1..m.len()).any(|j| !m[i].is_disjoint(&m[j])))
}

fn generate_once(config: &GenerationConfig, rng: &mut ChaCha8Rng) -> Result<SyntheticSynthesis> {
    let kc = config.domains.len();
    let values: Vec<Vec<usize>> = (0..config.collective_size)
        .map(|_| config.domains.iter().map(|d| rng.gen_range(0..d.atoms.len())).collect())
        .collect();
    let mut used = vec![false; config.collective_size];
    let mut studies = Vec::with_capacity(config.n_studies);
    for _ in 0..config.n_studies {
        let mut eligible = Vec::new();
        for _ in 0..8 {
            let windows: Vec<BitSet> = config.domains.iter().map(|d| draw_window(d, rng)).collect();
            eligible = (0..config.collective_size)
                .filter(|&e| (0..kc).all(|k| windows[k].contains(values[e][k])))
                .collect();
            if !eligible.is_empty() {
                break;
            }
        }
        if eligible.is_empty() {
            eligible = (0..config.collective_size).collect();
        }
        eligible.shuffle(rng);
        let target = rng.gen_range(config.min_study_size..=config.max_study_size);
        let mut members: Vec<usize> = Vec::with_capacity(target);
        let mut fresh: Vec<usize> = eligible.iter().copied().filter(|&e| !used[e]).collect();
        let mut shared: Vec<usize> = eligible.iter().copied().filter(|&e| used[e]).collect();
        while members.len() < target {
            let reuse = !shared.is_empty()
                && (fresh.is_empty() || rng.gen_bool(config.overlap_intensity))
                && config.overlap_intensity > 0.0;
            let pick = if reuse {
                shared.swap_remove(rng.gen_range(0..shared.len()))
            } else if let Some(e) = fresh.pop() {
                e
            } else {
                break;
            };
            members.push(pick);
        }
        if members.is_empty() {
            // Window exhausted: fall back to any unused event.
            match (0..config.collective_size).find(|&e| !used[e]) {
                Some(e) => members.push(e),
                None => {
                    return Err(Error::Config(format!(
                        "collective of {} events is too small for {} disjoint studies",
                        config.collective_size, config.n_studies
                    )))
                }
            }
        }
        members.sort_unstable();
        for &m in &members {
            used[m] = true;
        }
        studies.push(members);
    }

    let records: Vec<LatentRecord> = values
        .iter()
        .enumerate()
        .map(|(e, v)| LatentRecord {
            event_id: e as u32,
            label: None,
            values: v
                .iter()
                .zip(&config.domains)
                .map(|(&a, d)| d.atoms[a].clone())
                .collect(),
        })
        .collect();

    let latent_studies = studies
        .into_iter()
        .enumerate()
        .map(|(s, members)| {
            let study_id = format!("S{}", s + 1);
            let ranges = config
                .domains
                .iter()
                .enumerate()
                .map(|(k, d)| {
                    let recorded: BTreeSet<usize> = members
                        .iter()
                        .map(|&e| {
                            let v = values[e][k];
                            if config.distortion > 0.0 && rng.gen_bool(config.distortion) {
                                neighbour(v, d.atoms.len(), rng)
                            } else {
                                v
                            }
                        })
                        .collect();
                    let mut cover = derive_envelope(d, &recorded);
                    if config.padding > 0.0 && rng.gen_bool(config.padding) {
                        pad_envelope(d, &mut cover, rng);
                    }
                    ReportedRange {
                        characteristic: d.decl.id.clone(),
                        atoms: cover.iter().map(|&a| d.atoms[a].clone()).collect(),
                    }
                })
                .collect();
            LatentStudy {
                envelope: StudyEnvelope {
                    study_id: study_id.clone(),
                    sample_size: members.len() as u64,
                    ranges,
                    extras: StudyExtras::default(),
                },
                study_id,
                members: members.iter().map(|&m| m as u32).collect(),
            }
        })
        .collect();

    Ok(SyntheticSynthesis {
        domains: config.domains.clone(),
        records,
        studies: latent_studies,
        overlap_realized: true,
        seed: Some(config.seed),
        distorted: config.distortion > 0.0,
    })
}

fn draw_window(d: &LatentDomain, rng: &mut ChaCha8Rng) -> BitSet {
    let m = d.atoms.len();
    match d.decl.kind {
        Kind::Ordered => {
            let len = rng.gen_range(1..=m);
            let start = rng.gen_range(0..=m - len);
            BitSet::from_indices(m, start..start + len)
        }
        Kind::Categorical => {
            let mut w = BitSet::from_indices(m, (0..m).filter(|_| rng.gen_bool(0.5)));
            if w.is_empty() {
                w.insert(rng.gen_range(0..m));
            }
            w
        }
    }
}

fn neighbour(v: usize, m: usize, rng: &mut ChaCha8Rng) -> usize {
    if m == 1 {
        v
    } else if v == 0 {
        1
    } else if v == m - 1 || rng.gen_bool(0.5) {
        v - 1
    } else {
        v + 1
    }
}

/// Tightest envelope: the hull on ordered domains, the value set otherwise.
fn derive_envelope(d: &LatentDomain, recorded: &BTreeSet<usize>) -> BTreeSet<usize> {
    match d.decl.kind {
        Kind::Ordered => {
            let lo = *recorded.first().expect("non-empty study");
            let hi = *recorded.last().expect("non-empty study");
            (lo..=hi).collect()
        }
        Kind::Categorical => recorded.clone(),
    }
}

fn pad_envelope(d: &LatentDomain, cover: &mut BTreeSet<usize>, rng: &mut ChaCha8Rng) {
    let m = d.atoms.len();
    match d.decl.kind {
        Kind::Ordered => {
            let lo = *cover.first().expect("non-empty");
            let hi = *cover.last().expect("non-empty");
            let grow_low = lo > 0 && (hi + 1 >= m || rng.gen_bool(0.5));
            if grow_low {
                cover.insert(lo - 1);
            } else if hi + 1 < m {
                cover.insert(hi + 1);
            }
        }
        Kind::Categorical => {
            let outside: Vec<usize> = (0..m).filter(|a| !cover.contains(a)).collect();
            if let Some(&a) = outside.choose(rng) {
                cover.insert(a);
            }
        }
    }
}

/// Result of comparing envelope-side potentials to true overlap on every
/// subset of one synthesis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InstanceCheck {
    pub subsets: u64,
    /// Potential 0 while the true overlap set is non-empty.
    pub violations: Vec<Vec<usize>>,
    /// Potential > 0 while the true overlap is empty.
    pub false_alarms: u64,
    /// Potential below the true proportion of overlap.
    pub non_bound_events: u64,
}

pub fn check_instance(
    synthesis: &SyntheticSynthesis,
    scheme: &PartitionScheme,
    max_subset_size: Option<usize>,
) -> Result<InstanceCheck> {
    let n = synthesis.n_studies();
    if n > MAX_EXHAUSTIVE_STUDIES {
        return Err(Error::Capacity(format!(
            "soundness check visits 2^n subsets; n = {n} exceeds {MAX_EXHAUSTIVE_STUDIES}"
        )));
    }
    let (_, encoded) = encode_synthesis(&synthesis.envelope_synthesis()?, scheme)?;
    let memberships = synthesis.memberships();
    let cap = max_subset_size.unwrap_or(n);
    let mut out = InstanceCheck::default();
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size < 2 || size > cap {
            continue;
        }
        let subset = BitSet::from_indices(n, (0..n).filter(|i| mask >> i & 1 == 1));
        out.subsets += 1;
        let est = potential(&encoded, &subset).overall;
        let o = intersection(&memberships, &subset).count() as u64;
        let pi = Fraction::new(o, union_size(&memberships, &subset));
        if est.is_zero() && o > 0 {
            out.violations.push(subset.iter().collect());
        }
        if !est.is_zero() && o == 0 {
            out.false_alarms += 1;
        }
        if est < pi {
            out.non_bound_events += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: GenerationConfig,
    pub instances: usize,
    pub max_subset_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub seed: u64,
    pub subset: Vec<usize>,
    /// Replayable fixture of the offending instance.
    pub fixture: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub instances: usize,
    pub subsets_checked: u64,
    pub violations: Vec<Violation>,
    pub false_alarms: u64,
    pub non_bound_events: u64,
    /// Instances where requested overlap never materialized.
    pub overlap_not_realized: usize,
}

impl SweepReport {
    pub fn false_alarm_rate(&self) -> f64 {
        self.false_alarms as f64 / self.subsets_checked.max(1) as f64
    }

    pub fn non_bound_rate(&self) -> f64 {
        self.non_bound_events as f64 / self.subsets_checked.max(1) as f64
    }
}

/// Checks exclusion soundness over `instances` seeds starting at
/// `base.seed`. Seeds run in parallel; the report is assembled in seed order.
pub fn soundness_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.base.validate()?;
    let per_seed: Vec<(u64, SyntheticSynthesis, InstanceCheck)> = (0..config.instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.base.clone();
            cfg.seed = config.base.seed.wrapping_add(i);
            let s = generate(&cfg)?;
            let check = check_instance(&s, &PartitionScheme::Singleton, config.max_subset_size)?;
            Ok((cfg.seed, s, check))
        })
        .collect::<Result<_>>()?;
    let mut report = SweepReport {
        instances: config.instances,
        ..Default::default()
    };
    for (seed, synthesis, check) in per_seed {
        report.subsets_checked += check.subsets;
        report.false_alarms += check.false_alarms;
        report.non_bound_events += check.non_bound_events;
        report.overlap_not_realized += usize::from(!synthesis.overlap_realized);
        for subset in check.violations {
            report.violations.push(Violation {
                seed,
                subset,
                fixture: synthesis.to_json(),
            });
        }
    }
    Ok(report)
}

/// The four-study linked example: nine events (a..i) with location and year,
/// and study envelopes derived from them.
pub fn four_study_example() -> SyntheticSynthesis {
    let events = [
        ("a", "area 1", "2021"),
        ("b", "area 2", "2022"),
        ("c", "area 2", "2022"),
        ("d", "area 3", "2023"),
        ("e", "area 1", "2023"),
        ("f", "area 3", "2023"),
        ("g", "area 3", "2023"),
        ("h", "area 4", "2023"),
        ("i", "area 4", "2023"),
    ];
    let members: [&[&str]; 4] = [
        &["a", "b", "c"],
        &["c", "d", "e", "f"],
        &["b", "f"],
        &["d", "f", "g", "h", "i"],
    ];
    let envelopes: [(&[&str], &[&str]); 4] = [
        (&["area 1", "area 2"], &["2021", "2022"]),
        (&["area 1", "area 2", "area 3"], &["2022", "2023"]),
        (&["area 2", "area 3"], &["2022", "2023"]),
        (&["area 3", "area 4"], &["2023"]),
    ];
    let id_of = |label: &str| events.iter().position(|e| e.0 == label).unwrap() as u32;
    let mut year = CharacteristicDecl::ordered("time", OrderKey::DateYear);
    year.resolution = Some("calendar year".into());
    let atoms = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    SyntheticSynthesis {
        domains: vec![
            LatentDomain {
                decl: CharacteristicDecl::categorical("location"),
                atoms: (1..=4).map(|a| format!("area {a}")).collect(),
            },
            LatentDomain {
                decl: year,
                atoms: vec!["2021".into(), "2022".into(), "2023".into()],
            },
        ],
        records: events
            .iter()
            .enumerate()
            .map(|(i, (label, loc, y))| LatentRecord {
                event_id: i as u32,
                label: Some(label.to_string()),
                values: vec![loc.to_string(), y.to_string()],
            })
            .collect(),
        studies: members
            .iter()
            .zip(envelopes)
            .enumerate()
            .map(|(s, (m, (loc, y)))| {
                let mut ids: Vec<u32> = m.iter().map(|l| id_of(l)).collect();
                ids.sort_unstable();
                LatentStudy {
                    study_id: format!("S{}", s + 1),
                    envelope: StudyEnvelope {
                        study_id: format!("S{}", s + 1),
                        sample_size: ids.len() as u64,
                        ranges: vec![
                            ReportedRange {
                                characteristic: "location".into(),
                                atoms: atoms(loc),
                            },
                            ReportedRange {
                                characteristic: "time".into(),
                                atoms: atoms(y),
                            },
                        ],
                        extras: StudyExtras::default(),
                    },
                    members: ids,
                }
            })
            .collect(),
        overlap_realized: true,
        seed: None,
        distorted: false,
    }
}

/// Envelope-side reference routines that bypass the bit encoding: they work
/// directly on reported atom sets and partition bins. Intended as test
/// oracles for the fast paths.
pub mod reference {
    use super::*;
    use crate::model::PartitionFamily;

    /// Potential of `members` by looping over bins and testing each study's
    /// reported atoms against the bin.
    pub fn bin_loop_potential(
        synthesis: &Synthesis,
        partition: &PartitionFamily,
        members: &[usize],
    ) -> Fraction {
        if members.len() < 2 {
            return Fraction::zero();
        }
        partition
            .characteristics
            .iter()
            .map(|cp| {
                let hits = |i: usize, bin: &Vec<String>| {
                    let range = synthesis.studies[i].range(&cp.id).expect("validated");
                    bin.iter().any(|a| range.atoms.contains(a))
                };
                let shared = cp.bins.iter().filter(|b| members.iter().all(|&i| hits(i, b))).count();
                let covered = cp.bins.iter().filter(|b| members.iter().any(|&i| hits(i, b))).count();
                Fraction::new(shared as u64, covered as u64)
            })
            .min()
            .expect("at least one characteristic")
    }

    pub fn members_of(mask: u32, n: usize) -> Vec<usize> {
        (0..n).filter(|i| mask >> i & 1 == 1).collect()
    }

    /// Potential of every subset, indexed by bit mask.
    pub fn all_potentials(synthesis: &Synthesis, partition: &PartitionFamily) -> Vec<Fraction> {
        let n = synthesis.n_studies();
        assert!(n <= MAX_EXHAUSTIVE_STUDIES);
        (0u32..1 << n)
            .map(|mask| bin_loop_potential(synthesis, partition, &members_of(mask, n)))
            .collect()
    }

    /// `(members, potential)` for every subset above `threshold`, sorted by
    /// decreasing potential, size, then members.
    pub fn exhaustive_ranking(potentials: &[Fraction], n: usize, threshold: Fraction) -> Vec<(Vec<usize>, Fraction)> {
        let mut out: Vec<(Vec<usize>, Fraction)> = potentials
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > threshold)
            .map(|(mask, p)| (members_of(mask as u32, n), *p))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.len().cmp(&b.0.len())).then(a.0.cmp(&b.0)));
        out
    }

    /// The three-step filter over all subsets: zero-potential sets, then
    /// those whose every subset is zero, then the maximal ones.
    pub fn literal_filter(potentials: &[Fraction], n: usize) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
        let full = (1u32 << n) - 1;
        let b0: Vec<u32> = (0..=full).filter(|&m| potentials[m as usize].is_zero()).collect();
        let in_b0 = |m: u32| potentials[m as usize].is_zero();
        let b1: Vec<u32> = b0
            .iter()
            .copied()
            .filter(|&m| {
                let mut sub = m;
                loop {
                    if !in_b0(sub) {
                        return false;
                    }
                    if sub == 0 {
                        return true;
                    }
                    sub = (sub - 1) & m;
                }
            })
            .collect();
        let b1_set: std::collections::HashSet<u32> = b1.iter().copied().collect();
        let b2 = b1
            .iter()
            .copied()
            .filter(|&m| (0..n).all(|i| m >> i & 1 == 1 || !b1_set.contains(&(m | 1 << i))))
            .collect();
        (b0, b1, b2)
    }

    /// Max pooled size over every overlap-free (B1) set, by full scan.
    pub fn best_pooled_size(b1: &[u32], sizes: &[u64]) -> u64 {
        b1.iter()
            .map(|&m| members_of(m, sizes.len()).iter().map(|&i| sizes[i]).sum())
            .max()
            .unwrap_or(0)
    }
}

/// f1..f4 for every subset of a small synthesis, keyed by member list.
/// Overlap summaries of every subset, ordered by size and then members.
pub fn overlap_table(synthesis: &SyntheticSynthesis) -> Vec<(Vec<usize>, OverlapSummary)> {
    let n = synthesis.n_studies();
    let mut subsets: Vec<Vec<usize>> = (0u32..1 << n)
        .map(|mask| reference::members_of(mask, n))
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
        .into_iter()
        .map(|members| {
            let s = true_overlap(synthesis, &BitSet::from_indices(n, members.iter().copied()));
            (members, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, m: &[usize]) -> BitSet {
        BitSet::from_indices(n, m.iter().copied())
    }

    #[test]
    fn four_study_fixture_is_valid() {
        let s = four_study_example();
        s.validate().unwrap();
        let t = crate::model::tests::toy4();
        assert_eq!(s.envelope_synthesis().unwrap().studies, t.studies);
    }

    #[test]
    fn first_pair_overlap() {
        let s = four_study_example();
        let o = true_overlap(&s, &set(4, &[0, 1]));
        assert_eq!(o.overlap, [2]); // event c
        assert_eq!(o.f3, Fraction::new(1, 6));
        assert!((o.f4 - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-12);
        let o = true_overlap(&s, &set(4, &[1, 2, 3]));
        assert_eq!(o.overlap, [5]); // event f
        assert_eq!(o.f3, Fraction::new(1, 8));
        assert!((o.f4 - 1.0 / 40f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn union_and_identity() {
        let s = four_study_example();
        let r = inclusion_exclusion_check(&s).unwrap();
        assert_eq!(r.union_size, 9);
        assert!(r.identity_holds());
        assert!(r.bounds_hold());
        assert_eq!(r.terms, 15);
    }

    #[test]
    fn disjoint_generation() {
        let mut cfg = GenerationConfig::standard(6, 7);
        cfg.overlap_intensity = 0.0;
        let s = generate(&cfg).unwrap();
        s.validate().unwrap();
        let m = s.memberships();
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(m[i].is_disjoint(&m[j]));
            }
        }
        let r = inclusion_exclusion_check(&s).unwrap();
        assert_eq!(r.union_size, s.studies.iter().map(|x| x.members.len() as u64).sum::<u64>());
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = GenerationConfig::standard(8, 42);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate(&GenerationConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.to_json(), c.to_json());
        assert!(a.overlap_realized);
    }

    #[test]
    fn infeasible_config() {
        let mut cfg = GenerationConfig::standard(3, 1);
        cfg.max_study_size = cfg.collective_size + 1;
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        cfg.max_study_size = 10;
        cfg.overlap_intensity = 1.5;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn fixture_round_trip_and_rejects_broken_membership() {
        let s = four_study_example();
        let back = SyntheticSynthesis::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let mut bad = s.clone();
        bad.studies[0].members.push(99);
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.studies[3].envelope.ranges[1].atoms.remove("2023");
        bad.studies[3].envelope.ranges[1].atoms.insert("2022".into());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn toy_instance_is_sound() {
        let c = check_instance(&four_study_example(), &PartitionScheme::Singleton, None).unwrap();
        assert_eq!(c.subsets, 11);
        assert!(c.violations.is_empty());
        // {S1,S2,S3}: potential 1/3 but no shared event.
        assert_eq!(c.false_alarms, 1);
        // {S2,S4}: 1/4 < 2/7.
        assert_eq!(c.non_bound_events, 1);
    }
}
