#![no_main]

use libfuzzer_sys::fuzz_target;
use overlapix::atoms::{expand_token, Kind, OrderKey};

const ORDERS: [OrderKey; 5] = [
    OrderKey::Integer,
    OrderKey::DateYear,
    OrderKey::DateMonth,
    OrderKey::DateDay,
    OrderKey::Declared,
];

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let Ok(token) = std::str::from_utf8(rest) else { return };
    let declared: Vec<String> = ["low", "mid", "high"].iter().map(|s| s.to_string()).collect();
    let (kind, order) = match selector % 6 {
        5 => (Kind::Categorical, None),
        i => (Kind::Ordered, Some(ORDERS[i as usize])),
    };
    if let Ok(atoms) = expand_token(kind, order, token, &declared) {
        assert!(!atoms.is_empty());
        // Expanded atoms are canonical: each re-expands to itself.
        for a in &atoms {
            let again = expand_token(kind, order, a, &declared).expect("canonical atom");
            assert_eq!(again, [a.clone()]);
        }
    }
});
