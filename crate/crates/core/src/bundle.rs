//! The full analysis of one synthesis, and its JSON rendering.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::bitset::BitSet;
use crate::bound::{lower_bound_proxy, BoundReport};
use crate::budget::Budget;
use crate::enumerate::{
    enumerate_potentials, overlap_free_b2, select_best, Criterion, Enumeration,
    EnumerationConfig, OverlapFreeFamily, Selection,
};
use crate::error::{Error, Result};
use crate::io::MissingPolicy;
use crate::model::{encode_synthesis, EncodedSynthesis, PartitionFamily, PartitionScheme, Synthesis};
use crate::potential::{pairwise_matrix, CombinationReport, PairwiseMatrix};
use crate::ratio::{big_fraction_string, decimal, fraction_decimal, fraction_string, to_big};

pub const TOOL_NAME: &str = "overlapix";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Combinations listed in a report when no cap is given.
pub const DEFAULT_REPORT_TOP_K: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub partition: PartitionScheme,
    pub missing: MissingPolicy,
    pub enumeration: EnumerationConfig,
    pub criterion: Criterion,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            partition: PartitionScheme::Singleton,
            missing: MissingPolicy::Error,
            enumeration: EnumerationConfig {
                top_k: Some(DEFAULT_REPORT_TOP_K),
                ..EnumerationConfig::default()
            },
            criterion: Criterion::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn to_value(&self) -> Value {
        let e = &self.enumeration;
        json!({
            "partition": self.partition.describe(),
            "missing": match self.missing {
                MissingPolicy::Error => "error",
                MissingPolicy::FullRange => "full-range",
            },
            "top_k": e.top_k,
            "min_potential": fraction_string(&e.min_potential),
            "max_subset_size": e.max_subset_size,
            "criterion": self.criterion.name(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ResultBundle {
    pub synthesis: Synthesis,
    pub config: AnalysisConfig,
    pub partition: PartitionFamily,
    pub encoded: EncodedSynthesis,
    pub matrix: PairwiseMatrix,
    pub enumeration: Enumeration,
    pub family: OverlapFreeFamily,
    pub selection: Selection,
    pub bound: BoundReport,
    pub warnings: Vec<String>,
}

/// Runs every stage: encoding, pairwise matrix, ranked combinations,
/// overlap-free family and selection, and the bound.
pub fn analyze(synthesis: &Synthesis, config: &AnalysisConfig, budget: &Budget) -> Result<ResultBundle> {
    if synthesis.n_studies() < 2 {
        return Err(Error::TooFewStudies {
            needed: 2,
            got: synthesis.n_studies(),
        });
    }
    config.enumeration.validate()?;
    let (partition, encoded) = encode_synthesis(synthesis, &config.partition)?;
    budget.check("encoding")?;
    let matrix = pairwise_matrix(&encoded);
    budget.check("pairwise matrix")?;
    let enumeration = enumerate_potentials(&encoded, &config.enumeration, budget)?;
    let family = overlap_free_b2(&encoded, budget)?;
    let selection = select_best(&family, &synthesis.studies, &config.criterion)?;
    let bound = lower_bound_proxy(&encoded, &matrix);

    let mut warnings = Vec::new();
    let best_b2 = family
        .members
        .iter()
        .map(|m| m.iter().map(|i| encoded.sample_sizes[i]).sum::<u64>())
        .max()
        .unwrap_or(0);
    if bound.lower_bound_proxy < to_big(crate::Fraction::from_integer(best_b2)) {
        warnings.push(format!(
            "lower-bound proxy {} is below the largest overlap-free pooled size {best_b2}; the proxy adds nothing here",
            decimal(&bound.lower_bound_proxy, 2)
        ));
    }
    if selection.tied() {
        warnings.push(format!(
            "{} overlap-free combinations tie under `{}`; the lexicographically first is selected",
            selection.ties.len(),
            selection.criterion
        ));
    }
    if enumeration.truncated {
        warnings.push(format!(
            "combination list truncated to the top {}",
            config.enumeration.top_k.unwrap_or(0)
        ));
    }
    Ok(ResultBundle {
        synthesis: synthesis.clone(),
        config: config.clone(),
        partition,
        encoded,
        matrix,
        enumeration,
        family,
        selection,
        bound,
        warnings,
    })
}

pub fn members(ids: &[String], set: &BitSet) -> Value {
    json!(set.iter().map(|i| ids[i].as_str()).collect::<Vec<_>>())
}

pub fn combination_value(encoded: &EncodedSynthesis, r: &CombinationReport) -> Value {
    let per: Map<String, Value> = encoded
        .characteristics
        .iter()
        .zip(&r.per_characteristic)
        .map(|(k, f)| (k.clone(), json!(fraction_string(f))))
        .collect();
    json!({
        "members": members(&encoded.study_ids, &r.subset),
        "potential": fraction_string(&r.overall),
        "potential_decimal": fraction_decimal(&r.overall, 4),
        "per_characteristic": per,
        "pooled_size_naive": r.pooled_size_naive,
    })
}

pub fn enumeration_value(encoded: &EncodedSynthesis, e: &Enumeration) -> Value {
    json!({
        "combinations": e.reports.iter().map(|r| combination_value(encoded, r)).collect::<Vec<_>>(),
        "truncated": e.truncated,
    })
}

pub fn matrix_value(m: &PairwiseMatrix) -> Value {
    json!({
        "study_ids": m.study_ids,
        "values": m
            .values
            .iter()
            .map(|row| row.iter().map(fraction_string).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

pub fn family_value(encoded: &EncodedSynthesis, f: &OverlapFreeFamily) -> Value {
    json!({
        "provenance": f.provenance,
        "members": f
            .members
            .iter()
            .map(|m| json!({
                "members": members(&encoded.study_ids, m),
                "pooled_size": m.iter().map(|i| encoded.sample_sizes[i]).sum::<u64>(),
            }))
            .collect::<Vec<_>>(),
    })
}

pub fn selection_value(encoded: &EncodedSynthesis, s: &Selection) -> Value {
    json!({
        "criterion": s.criterion,
        "members": members(&encoded.study_ids, &s.subset),
        "pooled_size": s.pooled_size,
        "scores": s.scores,
        "ties": s.ties.iter().map(|t| members(&encoded.study_ids, t)).collect::<Vec<_>>(),
    })
}

pub fn bound_value(encoded: &EncodedSynthesis, b: &BoundReport) -> Value {
    let ids = &encoded.study_ids;
    json!({
        "naive_total": b.naive_total,
        "pairwise_deductions": b
            .pairwise_deductions
            .iter()
            .map(|d| json!({
                "pair": [ids[d.pair.0], ids[d.pair.1]],
                "potential": fraction_string(&d.potential),
                "deduction": big_fraction_string(&d.deduction),
                "capped": d.capped,
            }))
            .collect::<Vec<_>>(),
        "total_deduction": big_fraction_string(&b.total_deduction()),
        "lower_bound_proxy": big_fraction_string(&b.lower_bound_proxy),
        "lower_bound_proxy_decimal": decimal(&b.lower_bound_proxy, 2),
    })
}

impl ResultBundle {
    /// Echo of the normalized input, as an envelope JSON document.
    pub fn input_value(&self) -> Value {
        serde_json::from_str(&crate::io::to_json(&self.synthesis)).expect("own output parses")
    }

    /// SHA-256 over the normalized input and the analysis configuration.
    pub fn config_hash(&self) -> String {
        let payload = json!({"input": self.input_value(), "config": self.config.to_value()});
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }

    pub fn to_value(&self) -> Value {
        let e = &self.encoded;
        json!({
            "tool": {"name": TOOL_NAME, "version": TOOL_VERSION},
            "config": self.config.to_value(),
            "config_hash": self.config_hash(),
            "input": self.input_value(),
            "partition": {
                "scheme": self.config.partition.describe(),
                "characteristics": self.partition.characteristics,
            },
            "encoding_digest": e.digest(),
            "pairwise": matrix_value(&self.matrix),
            "top_combinations": enumeration_value(e, &self.enumeration),
            "overlap_free": family_value(e, &self.family),
            "selection": selection_value(e, &self.selection),
            "bound": bound_value(e, &self.bound),
            "warnings": self.warnings,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("plain data serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::toy4;

    #[test]
    fn toy_report() {
        let b = analyze(&toy4(), &AnalysisConfig::default(), &Budget::unlimited()).unwrap();
        let v = b.to_value();
        assert_eq!(v["selection"]["members"], json!(["S1", "S4"]));
        assert_eq!(v["selection"]["pooled_size"], json!(8));
        assert_eq!(v["bound"]["lower_bound_proxy"], json!("109/20"));
        assert_eq!(v["bound"]["lower_bound_proxy_decimal"], json!("5.45"));
        assert_eq!(v["top_combinations"]["combinations"].as_array().unwrap().len(), 7);
        assert_eq!(b.warnings.len(), 1, "{:?}", b.warnings);
        assert_eq!(b.to_json(), b.to_json());
    }

    #[test]
    fn echo_reproduces_bundle() {
        let cfg = AnalysisConfig::default();
        let a = analyze(&toy4(), &cfg, &Budget::unlimited()).unwrap();
        let echoed = crate::io::parse_json(&a.input_value().to_string(), MissingPolicy::Error).unwrap();
        let b = analyze(&echoed, &cfg, &Budget::unlimited()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn needs_two_studies() {
        let mut s = toy4();
        s.studies.truncate(1);
        assert!(matches!(
            analyze(&s, &AnalysisConfig::default(), &Budget::unlimited()),
            Err(Error::TooFewStudies { needed: 2, got: 1 })
        ));
    }
}
