#![no_main]

use libfuzzer_sys::fuzz_target;
use overlapix::io::{parse_csv, parse_json, to_json, MissingPolicy};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for policy in [MissingPolicy::Error, MissingPolicy::FullRange] {
        if let Ok(s) = parse_csv(text, policy) {
            // Whatever parses must survive the JSON round trip unchanged.
            let back = parse_json(&to_json(&s), MissingPolicy::Error).expect("own output parses");
            assert_eq!(s, back);
        }
    }
});
