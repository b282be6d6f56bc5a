//! Naive pooled sample size and the pairwise lower-bound proxy for the
//! deduplicated pooled sample size.

use num::rational::BigRational;
use num::{BigInt, One, Zero};

use crate::model::EncodedSynthesis;
use crate::potential::PairwiseMatrix;
use crate::ratio::{to_big, Fraction};

#[derive(Clone, Debug, PartialEq)]
pub struct PairDeduction {
    pub pair: (usize, usize),
    pub potential: Fraction,
    pub deduction: BigRational,
    /// The smaller sample size was the binding term.
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub naive_total: u64,
    /// All pairs `i < j` in lexicographic order.
    pub pairwise_deductions: Vec<PairDeduction>,
    /// May be negative on dense instances; never clamped.
    pub lower_bound_proxy: BigRational,
}

impl BoundReport {
    pub fn total_deduction(&self) -> BigRational {
        self.pairwise_deductions
            .iter()
            .fold(BigRational::zero(), |acc, d| acc + &d.deduction)
    }
}

pub fn naive_pooled_size(sample_sizes: &[u64]) -> u64 {
    sample_sizes.iter().sum()
}

/// `min(p / (1 + p) * (n_i + n_j), min(n_i, n_j))` for one pair.
pub fn pair_deduction(p: &BigRational, n_i: u64, n_j: u64) -> (BigRational, bool) {
    let share = p / (BigRational::one() + p);
    let raw = share * BigRational::from_integer(BigInt::from(n_i + n_j));
    let cap = BigRational::from_integer(BigInt::from(n_i.min(n_j)));
    if raw > cap {
        (cap, true)
    } else {
        (raw, false)
    }
}

/// Subtracts from the naive total, for every pair, the pooled pair size
/// scaled by `p/(1+p)` and capped at the smaller study's size, where `p` is
/// the pair's potential. Summation runs over sorted pairs, so the result is
/// reproducible.
pub fn lower_bound_proxy(encoded: &EncodedSynthesis, matrix: &PairwiseMatrix) -> BoundReport {
    let n = encoded.n_studies();
    let sizes = &encoded.sample_sizes;
    let naive_total = naive_pooled_size(sizes);
    let mut pairwise_deductions = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let potential = matrix.get(i, j);
            let (deduction, capped) = pair_deduction(&to_big(potential), sizes[i], sizes[j]);
            pairwise_deductions.push(PairDeduction {
                pair: (i, j),
                potential,
                deduction,
                capped,
            });
        }
    }
    let mut report = BoundReport {
        naive_total,
        pairwise_deductions,
        lower_bound_proxy: BigRational::zero(),
    };
    report.lower_bound_proxy =
        BigRational::from_integer(BigInt::from(naive_total)) - report.total_deduction();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::toy4;
    use crate::model::{encode_synthesis, PartitionScheme};
    use crate::potential::pairwise_matrix;
    use crate::ratio::decimal;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn toy_bound_is_itemized() {
        let (_, e) = encode_synthesis(&toy4(), &PartitionScheme::Singleton).unwrap();
        let b = lower_bound_proxy(&e, &pairwise_matrix(&e));
        assert_eq!(b.naive_total, 14);
        let items: Vec<(BigRational, bool)> = b
            .pairwise_deductions
            .iter()
            .map(|d| (d.deduction.clone(), d.capped))
            .collect();
        assert_eq!(
            items,
            [
                (r(7, 4), false),
                (r(5, 4), false),
                (r(0, 1), false),
                (r(2, 1), true),
                (r(9, 5), false),
                (r(7, 4), false),
            ]
        );
        assert_eq!(b.lower_bound_proxy, r(109, 20));
        assert_eq!(decimal(&b.lower_bound_proxy, 2), "5.45");
    }

    #[test]
    fn zero_potential_means_no_deduction() {
        assert_eq!(pair_deduction(&r(0, 1), 5, 9), (r(0, 1), false));
        assert_eq!(naive_pooled_size(&[7]), 7);
    }

    #[test]
    fn deduction_never_exceeds_smaller_size() {
        // p = 1 gives half the pooled pair size, capped by the smaller study.
        assert_eq!(pair_deduction(&r(1, 1), 2, 10), (r(2, 1), true));
        assert_eq!(pair_deduction(&r(1, 1), 4, 4), (r(4, 1), false));
    }
}
