mod common;

use overlapix::bundle::{analyze, AnalysisConfig};
use overlapix::io::{ingest, parse_json, InputFormat, MissingPolicy};
use overlapix::model::{encode_synthesis, PartitionScheme};
use overlapix::oracle::SyntheticSynthesis;
use overlapix::{Budget, Error};

#[test]
fn toy_fixture_sizes() {
    let s = ingest(common::fixture("toy4.json"), None, MissingPolicy::Error).unwrap();
    let sizes: Vec<u64> = s.studies.iter().map(|x| x.sample_size).collect();
    assert_eq!(sizes, [3, 4, 2, 5]);
}

#[test]
fn csv_and_json_fixtures_agree() {
    let a = ingest(common::fixture("toy4.json"), None, MissingPolicy::Error).unwrap();
    let b = ingest(common::fixture("toy4.csv"), Some(InputFormat::Csv), MissingPolicy::Error).unwrap();
    for scheme in [PartitionScheme::Singleton, PartitionScheme::UniformWidth(2)] {
        let ea = encode_synthesis(&a, &scheme).unwrap().1;
        let eb = encode_synthesis(&b, &scheme).unwrap().1;
        assert_eq!(ea.digest(), eb.digest());
    }
    // Downstream results agree too, apart from the echoed declarations.
    let cfg = AnalysisConfig::default();
    let ra = analyze(&a, &cfg, &Budget::unlimited()).unwrap();
    let rb = analyze(&b, &cfg, &Budget::unlimited()).unwrap();
    assert_eq!(ra.enumeration, rb.enumeration);
    assert_eq!(ra.selection, rb.selection);
    assert_eq!(ra.bound, rb.bound);
}

#[test]
fn latent_fixture_matches_envelope_fixture() {
    let text = std::fs::read_to_string(common::fixture("four_study_latent.json")).unwrap();
    let latent = SyntheticSynthesis::from_json(&text).unwrap();
    let envelopes = ingest(common::fixture("toy4.json"), None, MissingPolicy::Error).unwrap();
    assert_eq!(latent.envelope_synthesis().unwrap().studies, envelopes.studies);
}

#[test]
fn generated_fixture_round_trips() {
    let s = common::instance(8, 99, 4, 6, 0.5, 0.3);
    let back = SyntheticSynthesis::from_json(&s.to_json()).unwrap();
    assert_eq!(s, back);
    let env = s.envelope_synthesis().unwrap();
    let again = parse_json(&overlapix::io::to_json(&env), MissingPolicy::Error).unwrap();
    assert_eq!(env, again);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = ingest(common::fixture("nope.json"), None, MissingPolicy::Error).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(!err.is_validation());
}
