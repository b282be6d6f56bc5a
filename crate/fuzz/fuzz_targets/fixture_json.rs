#![no_main]

use libfuzzer_sys::fuzz_target;
use overlapix::model::PartitionScheme;
use overlapix::oracle::{check_instance, SyntheticSynthesis};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(s) = SyntheticSynthesis::from_json(text) else { return };
    if s.n_studies() > 8 {
        return;
    }
    // Undistorted fixtures satisfy envelope containment, so no subset may
    // have zero potential and shared members.
    if let Ok(check) = check_instance(&s, &PartitionScheme::Singleton, None) {
        if !s.distorted {
            assert!(check.violations.is_empty());
        }
    }
});
