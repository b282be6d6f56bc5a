#![no_main]

use libfuzzer_sys::fuzz_target;
use overlapix::io::{parse_json, MissingPolicy};
use overlapix::model::{encode_synthesis, PartitionScheme};
use overlapix::potential::pairwise_matrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for policy in [MissingPolicy::Error, MissingPolicy::FullRange] {
        let Ok(s) = parse_json(text, policy) else { continue };
        if s.n_studies() == 0 || s.n_studies() > 64 {
            continue;
        }
        if let Ok((_, e)) = encode_synthesis(&s, &PartitionScheme::Singleton) {
            let m = pairwise_matrix(&e);
            for row in &m.values {
                assert!(row.iter().all(|p| *p.numer() <= *p.denom()));
            }
        }
    }
});
