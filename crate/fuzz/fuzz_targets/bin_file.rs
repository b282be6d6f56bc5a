#![no_main]

use libfuzzer_sys::fuzz_target;
use overlapix::io::{parse_bin_file, parse_json, MissingPolicy};
use overlapix::model::encode_synthesis;

const TOY: &str = include_str!("../../fixtures/toy4.json");

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(scheme) = parse_bin_file(text) else { return };
    let s = parse_json(TOY, MissingPolicy::Error).expect("fixture parses");
    if let Ok((family, encoded)) = encode_synthesis(&s, &scheme) {
        // Bins partition each domain: every study covers at least one bin.
        for (k, cp) in family.characteristics.iter().enumerate() {
            assert!(cp.bin_count() > 0);
            for i in 0..encoded.n_studies() {
                assert!(!encoded.vector(i, k).is_empty());
            }
        }
    }
});
