mod common;

use overlapix::model::{encode_synthesis, CharacteristicDecl, PartitionScheme};
use overlapix::oracle::{generate, LatentDomain};
use overlapix::potential::{potential, potential_over};
use overlapix::BitSet;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn supersets_never_increase_potential(
        n in 3usize..=12, seed in any::<u64>(), regions in 2usize..6, years in 2usize..8,
        intensity in 0.0f64..0.9, padding in 0.0f64..0.6,
        picks in proptest::collection::vec((any::<u32>(), any::<u32>()), 1..20),
    ) {
        let mut c = common::config(n, seed, regions, years, intensity, padding);
        c.domains.push(LatentDomain {
            decl: CharacteristicDecl::categorical("setting"),
            atoms: vec!["clinic".into(), "hospital".into(), "community".into()],
        });
        let s = generate(&c).unwrap();
        let (_, e) = encode_synthesis(&s.envelope_synthesis().unwrap(), &PartitionScheme::Singleton).unwrap();
        let full = (1u32 << n) - 1;
        for (a, extra) in picks {
            let small = a & full;
            if small.count_ones() < 2 {
                continue;
            }
            let large = small | (extra & full);
            let set = |m: u32| BitSet::from_indices(n, (0..n).filter(|i| m >> i & 1 == 1));
            let (ps, pl) = (potential(&e, &set(small)), potential(&e, &set(large)));
            prop_assert!(pl.overall <= ps.overall);
            for k in 0..3 {
                prop_assert!(pl.per_characteristic[k] <= ps.per_characteristic[k]);
            }
            // More characteristics can only lower the potential.
            let a = set(small);
            let one = potential_over(&e, &a, &[0]);
            let two = potential_over(&e, &a, &[0, 1]);
            let three = potential_over(&e, &a, &[0, 1, 2]);
            prop_assert!(two <= one && three <= two);
            prop_assert_eq!(three, ps.overall);
        }
    }
}
