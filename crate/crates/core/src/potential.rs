//! Overlap potential of study subsets, computed from binary coverage vectors.
//!
//! For a subset `A` and characteristic `k`, the potential is the number of
//! bins covered by every member divided by the number of bins covered by at
//! least one member. The overall potential is the minimum over
//! characteristics. Subsets with fewer than two members have potential 0.

use num::Zero;

use crate::bitset::BitSet;
use crate::model::EncodedSynthesis;
use crate::ratio::Fraction;

/// Potential of one subset with its per-characteristic breakdown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinationReport {
    pub subset: BitSet,
    pub per_characteristic: Vec<Fraction>,
    pub overall: Fraction,
    /// Plain sum of member sample sizes.
    pub pooled_size_naive: u64,
}

impl CombinationReport {
    pub fn size(&self) -> usize {
        self.subset.count()
    }
}

/// Shared-bin and covered-bin counts of `subset` on characteristic `k`.
pub fn bin_counts(encoded: &EncodedSynthesis, subset: &BitSet, k: usize) -> (u64, u64) {
    let mut members = subset.iter();
    let Some(first) = members.next() else {
        return (0, 0);
    };
    let mut and = encoded.vector(first, k).clone();
    let mut or = and.clone();
    for i in members {
        let v = encoded.vector(i, k);
        and.intersect_with(v);
        or.union_with(v);
    }
    (and.count() as u64, or.count() as u64)
}

pub fn per_characteristic_potential(
    encoded: &EncodedSynthesis,
    subset: &BitSet,
    k: usize,
) -> Fraction {
    if subset.count() < 2 {
        return Fraction::zero();
    }
    let (shared, covered) = bin_counts(encoded, subset, k);
    // Every study covers at least one bin, so `covered >= 1`.
    Fraction::new(shared, covered)
}

pub fn potential(encoded: &EncodedSynthesis, subset: &BitSet) -> CombinationReport {
    assert!(
        encoded.n_characteristics() > 0,
        "potential needs at least one characteristic"
    );
    let per_characteristic: Vec<Fraction> = (0..encoded.n_characteristics())
        .map(|k| per_characteristic_potential(encoded, subset, k))
        .collect();
    let overall = per_characteristic
        .iter()
        .copied()
        .min()
        .expect("non-empty");
    CombinationReport {
        pooled_size_naive: subset.iter().map(|i| encoded.sample_sizes[i]).sum(),
        subset: subset.clone(),
        per_characteristic,
        overall,
    }
}

/// Potential restricted to a subset of characteristics.
pub fn potential_over(
    encoded: &EncodedSynthesis,
    subset: &BitSet,
    characteristics: &[usize],
) -> Fraction {
    characteristics
        .iter()
        .map(|&k| per_characteristic_potential(encoded, subset, k))
        .min()
        .unwrap_or_else(Fraction::zero)
}

pub fn pair(n: usize, i: usize, j: usize) -> BitSet {
    BitSet::from_indices(n, [i, j])
}

/// Symmetric matrix of pairwise potentials; the diagonal is 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairwiseMatrix {
    pub study_ids: Vec<String>,
    pub values: Vec<Vec<Fraction>>,
}

impl PairwiseMatrix {
    pub fn get(&self, i: usize, j: usize) -> Fraction {
        self.values[i][j]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[allow(clippy::needless_range_loop)]
pub fn pairwise_matrix(encoded: &EncodedSynthesis) -> PairwiseMatrix {
    let n = encoded.n_studies();
    let mut values = vec![vec![Fraction::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let p = potential(encoded, &pair(n, i, j)).overall;
            values[i][j] = p;
            values[j][i] = p;
        }
    }
    PairwiseMatrix {
        study_ids: encoded.study_ids.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::toy4;
    use crate::model::{encode_synthesis, PartitionScheme};

    fn toy() -> EncodedSynthesis {
        encode_synthesis(&toy4(), &PartitionScheme::Singleton).unwrap().1
    }

    fn set(members: &[usize]) -> BitSet {
        BitSet::from_indices(4, members.iter().copied())
    }

    #[test]
    fn first_pair_per_characteristic() {
        let e = toy();
        let a = set(&[0, 1]);
        assert_eq!(per_characteristic_potential(&e, &a, 0), Fraction::new(2, 3));
        assert_eq!(per_characteristic_potential(&e, &a, 1), Fraction::new(1, 3));
        assert_eq!(potential(&e, &a).overall, Fraction::new(1, 3));
    }

    #[test]
    fn table_rows() {
        let e = toy();
        assert_eq!(potential(&e, &set(&[1, 3])).overall, Fraction::new(1, 4));
        assert_eq!(potential(&e, &set(&[0, 1, 2])).overall, Fraction::new(1, 3));
        assert_eq!(potential(&e, &set(&[0, 3])).overall, Fraction::zero());
    }

    #[test]
    fn singletons_and_empty_are_zero() {
        let e = toy();
        assert_eq!(potential(&e, &set(&[])).overall, Fraction::zero());
        assert_eq!(potential(&e, &set(&[2])).overall, Fraction::zero());
    }

    #[test]
    fn identical_vectors_give_one() {
        let e = toy();
        // S2 and S3 share the time vector 011.
        assert_eq!(per_characteristic_potential(&e, &set(&[1, 2]), 1), Fraction::new(1, 1));
    }

    #[test]
    fn matrix_is_symmetric_with_zero_diagonal() {
        let m = pairwise_matrix(&toy());
        for i in 0..4 {
            assert!(m.get(i, i).is_zero());
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert_eq!(m.get(1, 2), Fraction::new(2, 3));
    }
}
