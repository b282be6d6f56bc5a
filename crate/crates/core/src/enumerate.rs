//! Enumeration of study combinations by overlap potential, the overlap-free
//! family of maximal combinations, and selection among them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::bitset::BitSet;
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::model::{EncodedSynthesis, StudyEnvelope};
use crate::potential::CombinationReport;
use crate::ratio::Fraction;

/// Largest study count accepted by enumeration and clique search.
pub const MAX_STUDIES: usize = 4096;

const BUDGET_CHECK_INTERVAL: u64 = 1 << 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumerationConfig {
    /// Only combinations with potential strictly above this are reported.
    pub min_potential: Fraction,
    pub top_k: Option<usize>,
    pub max_subset_size: Option<usize>,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self {
            min_potential: Fraction::zero(),
            top_k: None,
            max_subset_size: None,
        }
    }
}

impl EnumerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == Some(0) {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.min_potential > Fraction::from_integer(1) {
            return Err(Error::Config("min_potential must lie in [0, 1]".into()));
        }
        if matches!(self.max_subset_size, Some(m) if m < 2) {
            return Err(Error::Config("max_subset_size must be at least 2".into()));
        }
        Ok(())
    }
}

/// Ranking used everywhere combinations are listed: decreasing potential,
/// then increasing size, then lexicographic member order.
pub fn rank_cmp(a: &CombinationReport, b: &CombinationReport) -> Ordering {
    b.overall
        .cmp(&a.overall)
        .then_with(|| a.size().cmp(&b.size()))
        .then_with(|| a.subset.cmp_lex(&b.subset))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    pub reports: Vec<CombinationReport>,
    /// More combinations qualified than `top_k` allowed.
    pub truncated: bool,
}

struct Ranked(CombinationReport);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        rank_cmp(&self.0, &other.0).is_eq()
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // Worse ranks compare greater, so the heap top is the current k-th best.
    fn cmp(&self, other: &Self) -> Ordering {
        rank_cmp(&self.0, &other.0)
    }
}

struct Collector {
    heap: BinaryHeap<Ranked>,
    all: Vec<CombinationReport>,
    top_k: Option<usize>,
    truncated: bool,
}

impl Collector {
    fn new(top_k: Option<usize>) -> Self {
        Self {
            heap: BinaryHeap::new(),
            all: Vec::new(),
            top_k,
            truncated: false,
        }
    }

    /// True if no descendant of a node with this value and size can enter the
    /// kept set. Descendants have potential <= `value` and size > `size`.
    fn dominated(&self, value: Fraction, size: usize) -> bool {
        let Some(k) = self.top_k else { return false };
        if self.heap.len() < k {
            return false;
        }
        let worst = &self.heap.peek().expect("full heap").0;
        value < worst.overall || (value == worst.overall && size + 1 > worst.size())
    }

    fn push(&mut self, report: CombinationReport) {
        match self.top_k {
            None => self.all.push(report),
            Some(k) => {
                if self.heap.len() < k {
                    self.heap.push(Ranked(report));
                } else {
                    self.truncated = true;
                    let worst = self.heap.peek().expect("full heap");
                    if rank_cmp(&report, &worst.0).is_lt() {
                        self.heap.pop();
                        self.heap.push(Ranked(report));
                    }
                }
            }
        }
    }

    fn finish(self) -> (Vec<CombinationReport>, bool) {
        match self.top_k {
            None => (self.all, false),
            Some(_) => (
                self.heap.into_iter().map(|r| r.0).collect(),
                self.truncated,
            ),
        }
    }
}

struct Search<'a> {
    encoded: &'a EncodedSynthesis,
    config: &'a EnumerationConfig,
    budget: &'a Budget,
    max_size: usize,
    nodes: u64,
    out: Collector,
}

impl Search<'_> {
    /// Extends `members` (whose running AND/OR vectors are given) with every
    /// study after `last`.
    fn extend(
        &mut self,
        members: &mut BitSet,
        last: usize,
        ands: &[BitSet],
        ors: &[BitSet],
        pooled: u64,
    ) -> Result<()> {
        let size = members.count() + 1;
        if size > self.max_size {
            return Ok(());
        }
        let kc = self.encoded.n_characteristics();
        for j in last + 1..self.encoded.n_studies() {
            self.nodes += 1;
            if self.nodes.is_multiple_of(BUDGET_CHECK_INTERVAL) {
                self.budget.check("potential enumeration")?;
            }
            let mut new_ands = Vec::with_capacity(kc);
            let mut new_ors = Vec::with_capacity(kc);
            let mut excluded = false;
            for k in 0..kc {
                let v = self.encoded.vector(j, k);
                let a = ands[k].intersection(v);
                if a.is_empty() {
                    excluded = true;
                    break;
                }
                new_ands.push(a);
                new_ors.push(ors[k].union(v));
            }
            // A characteristic with no shared bin excludes this set and all
            // of its supersets.
            if excluded {
                continue;
            }
            let per_characteristic: Vec<Fraction> = new_ands
                .iter()
                .zip(&new_ors)
                .map(|(a, o)| Fraction::new(a.count() as u64, o.count() as u64))
                .collect();
            let overall = *per_characteristic.iter().min().expect("k >= 1");
            // Potential never increases as the set grows.
            if overall <= self.config.min_potential {
                continue;
            }
            members.insert(j);
            let pooled = pooled + self.encoded.sample_sizes[j];
            self.out.push(CombinationReport {
                subset: members.clone(),
                per_characteristic,
                overall,
                pooled_size_naive: pooled,
            });
            if !self.out.dominated(overall, size) {
                self.extend(members, j, &new_ands, &new_ors, pooled)?;
            }
            members.remove(j);
        }
        Ok(())
    }
}

/// Lists every combination of two or more studies whose potential exceeds
/// `config.min_potential`, in [`rank_cmp`] order.
///
/// Runs a depth-first subset extension that carries the running AND/OR
/// vectors and abandons a branch as soon as its potential drops to the
/// threshold. Root branches run on the current rayon pool; the result does
/// not depend on the number of threads.
pub fn enumerate_potentials(
    encoded: &EncodedSynthesis,
    config: &EnumerationConfig,
    budget: &Budget,
) -> Result<Enumeration> {
    config.validate()?;
    let n = encoded.n_studies();
    if n < 2 {
        return Err(Error::TooFewStudies { needed: 2, got: n });
    }
    if n > MAX_STUDIES {
        return Err(Error::Capacity(format!(
            "{n} studies exceeds the limit of {MAX_STUDIES}"
        )));
    }
    let max_size = config.max_subset_size.unwrap_or(n);
    let branches: Vec<(Vec<CombinationReport>, bool)> = (0..n)
        .into_par_iter()
        .map(|root| {
            let mut search = Search {
                encoded,
                config,
                budget,
                max_size,
                nodes: 0,
                out: Collector::new(config.top_k),
            };
            let mut members = BitSet::from_indices(n, [root]);
            let ands: Vec<BitSet> = encoded.coverage[root].clone();
            search.extend(
                &mut members,
                root,
                &ands,
                &ands,
                encoded.sample_sizes[root],
            )?;
            Ok(search.out.finish())
        })
        .collect::<Result<_>>()?;
    let mut truncated = false;
    let mut reports = Vec::new();
    for (r, t) in branches {
        truncated |= t;
        reports.extend(r);
    }
    reports.sort_by(rank_cmp);
    if let Some(k) = config.top_k {
        if reports.len() > k {
            truncated = true;
            reports.truncate(k);
        }
    }
    Ok(Enumeration { reports, truncated })
}

/// Graph on studies with an edge wherever a pair's potential is zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExclusionGraph {
    adjacency: Vec<BitSet>,
}

impl ExclusionGraph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![BitSet::new(n); n];
        for (i, j) in edges {
            assert_ne!(i, j, "self-loop");
            adjacency[i].insert(j);
            adjacency[j].insert(i);
        }
        Self { adjacency }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(j)
    }

    pub fn neighbors(&self, i: usize) -> &BitSet {
        &self.adjacency[i]
    }

    /// Edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|i| self.adjacency[i].iter().filter(move |&j| j > i).map(move |j| (i, j)))
            .collect()
    }

    pub fn is_clique(&self, set: &BitSet) -> bool {
        set.iter().all(|i| {
            let mut rest = set.clone();
            rest.remove(i);
            rest.is_subset(&self.adjacency[i])
        })
    }
}

pub fn exclusion_graph(encoded: &EncodedSynthesis) -> ExclusionGraph {
    let n = encoded.n_studies();
    let kc = encoded.n_characteristics();
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| {
        (0..kc).any(|k| encoded.vector(i, k).is_disjoint(encoded.vector(j, k)))
    });
    ExclusionGraph::from_edges(n, edges.collect::<Vec<_>>())
}

/// Maximal cliques by Bron–Kerbosch with Tomita pivoting, sorted
/// lexicographically. Isolated vertices come out as singletons.
pub fn maximal_cliques(graph: &ExclusionGraph, budget: &Budget) -> Result<Vec<BitSet>> {
    let n = graph.n();
    if n > MAX_STUDIES {
        return Err(Error::Capacity(format!(
            "{n} studies exceeds the limit of {MAX_STUDIES}"
        )));
    }
    let mut out = Vec::new();
    if n == 0 {
        return Ok(out);
    }
    let mut calls = 0u64;
    bron_kerbosch(
        graph,
        &mut BitSet::new(n),
        BitSet::full(n),
        BitSet::new(n),
        &mut out,
        &mut calls,
        budget,
    )?;
    out.sort_by(|a, b| a.cmp_lex(b));
    Ok(out)
}

fn bron_kerbosch(
    graph: &ExclusionGraph,
    r: &mut BitSet,
    mut p: BitSet,
    mut x: BitSet,
    out: &mut Vec<BitSet>,
    calls: &mut u64,
    budget: &Budget,
) -> Result<()> {
    *calls += 1;
    if calls.is_multiple_of(BUDGET_CHECK_INTERVAL) {
        budget.check("maximal clique enumeration")?;
    }
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return Ok(());
    }
    let pivot = p
        .iter()
        .chain(x.iter())
        .max_by_key(|&u| (p.intersection_count(graph.neighbors(u)), std::cmp::Reverse(u)))
        .expect("p is non-empty");
    let mut candidates = p.clone();
    candidates.difference_with(graph.neighbors(pivot));
    for v in candidates.iter() {
        let nv = graph.neighbors(v);
        r.insert(v);
        bron_kerbosch(graph, r, p.intersection(nv), x.intersection(nv), out, calls, budget)?;
        r.remove(v);
        p.remove(v);
        x.insert(v);
    }
    Ok(())
}

/// The maximal overlap-free combinations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapFreeFamily {
    pub members: Vec<BitSet>,
    pub provenance: String,
}

/// Maximal sets all of whose subsets have zero potential.
///
/// A zero-potential pair forces zero potential on every superset, so a set
/// whose pairs are all excluded has every subset excluded; those sets are the
/// cliques of the exclusion graph, and the maximal ones are found by clique
/// enumeration.
pub fn overlap_free_b2(encoded: &EncodedSynthesis, budget: &Budget) -> Result<OverlapFreeFamily> {
    let graph = exclusion_graph(encoded);
    Ok(OverlapFreeFamily {
        members: maximal_cliques(&graph, budget)?,
        provenance: "maximal cliques of the pairwise exclusion graph; unranked".into(),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Criterion {
    /// Largest sum of member sample sizes.
    #[default]
    PooledSampleSize,
    /// Most studies.
    StudyCount,
    /// Largest sum of 1/se².
    InverseVarianceWeight,
    /// Lexicographic chain: later criteria only break ties of earlier ones.
    Composite(Vec<Criterion>),
}

impl Criterion {
    /// Accepts `pooled-size`, `study-count`, `inverse-variance`, or a
    /// comma-separated chain such as `study-count,pooled-size`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() > 1 {
            return Ok(Criterion::Composite(
                parts.into_iter().map(Self::parse).collect::<Result<_>>()?,
            ));
        }
        match parts[0] {
            "pooled-size" | "max-pooled-sample-size" => Ok(Criterion::PooledSampleSize),
            "study-count" | "max-study-count" => Ok(Criterion::StudyCount),
            "inverse-variance" | "max-total-inverse-variance-weight" => {
                Ok(Criterion::InverseVarianceWeight)
            }
            other => Err(Error::Config(format!("unknown criterion `{other}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Criterion::PooledSampleSize => "pooled-size".into(),
            Criterion::StudyCount => "study-count".into(),
            Criterion::InverseVarianceWeight => "inverse-variance".into(),
            Criterion::Composite(chain) => {
                chain.iter().map(Criterion::name).collect::<Vec<_>>().join(",")
            }
        }
    }

    fn flatten(&self) -> Vec<&Criterion> {
        match self {
            Criterion::Composite(chain) => chain.iter().flat_map(Criterion::flatten).collect(),
            c => vec![c],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Score {
    Count(u64),
    Real(f64),
}

impl Score {
    fn cmp(&self, other: &Score) -> Ordering {
        match (self, other) {
            (Score::Count(a), Score::Count(b)) => a.cmp(b),
            (Score::Real(a), Score::Real(b)) => a.total_cmp(b),
            _ => unreachable!("scores of one criterion share a type"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub subset: BitSet,
    pub criterion: String,
    /// One score per criterion in the chain.
    pub scores: Vec<Score>,
    pub pooled_size: u64,
    /// Every family member scoring equal to the winner (winner included);
    /// the winner is the lexicographically first.
    pub ties: Vec<BitSet>,
}

impl Selection {
    pub fn tied(&self) -> bool {
        self.ties.len() > 1
    }
}

fn score(c: &Criterion, set: &BitSet, studies: &[StudyEnvelope]) -> Score {
    match c {
        Criterion::PooledSampleSize => {
            Score::Count(set.iter().map(|i| studies[i].sample_size).sum())
        }
        Criterion::StudyCount => Score::Count(set.count() as u64),
        Criterion::InverseVarianceWeight => Score::Real(
            set.iter()
                .map(|i| {
                    let se = studies[i].extras.std_error.expect("checked");
                    1.0 / (se * se)
                })
                .sum(),
        ),
        Criterion::Composite(_) => unreachable!("flattened"),
    }
}

/// Picks the best member of `family` under `criterion`. Overlap-free sets add
/// their sample sizes directly.
pub fn select_best(
    family: &OverlapFreeFamily,
    studies: &[StudyEnvelope],
    criterion: &Criterion,
) -> Result<Selection> {
    let chain = criterion.flatten();
    if chain.contains(&&Criterion::InverseVarianceWeight) {
        let missing: Vec<String> = studies
            .iter()
            .filter(|s| !matches!(s.extras.std_error, Some(se) if se.is_finite() && se > 0.0))
            .map(|s| s.study_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::CriterionUnavailable {
                criterion: Criterion::InverseVarianceWeight.name(),
                field: "a positive std_error".into(),
                missing,
            });
        }
    }
    let scored: Vec<(Vec<Score>, &BitSet)> = family
        .members
        .iter()
        .map(|m| (chain.iter().map(|c| score(c, m, studies)).collect(), m))
        .collect();
    let cmp_scores = |a: &[Score], b: &[Score]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    };
    let (best_scores, _) = scored
        .iter()
        .max_by(|a, b| cmp_scores(&a.0, &b.0))
        .ok_or_else(|| Error::Config("empty overlap-free family".into()))?;
    let mut ties: Vec<BitSet> = scored
        .iter()
        .filter(|(s, _)| cmp_scores(s, best_scores).is_eq())
        .map(|(_, m)| (*m).clone())
        .collect();
    ties.sort_by(|a, b| a.cmp_lex(b));
    let subset = ties[0].clone();
    Ok(Selection {
        pooled_size: subset.iter().map(|i| studies[i].sample_size).sum(),
        subset,
        criterion: criterion.name(),
        scores: best_scores.clone(),
        ties,
    })
}
