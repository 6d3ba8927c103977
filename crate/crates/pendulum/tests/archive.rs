use pendulum::archive::{export_policy, import_policy, read_policy, write_policy, ArchiveError, ArchiveMetadata};
use pendulum::core::policy::{forward, PolicyParameters};
use pendulum::core::training::TrainingConfig;
use pendulum::core::{seeded_rng, State};
use rand::Rng;
use serde_json::Value;

fn trained_like(seed: u64) -> PolicyParameters {
    let mut rng = seeded_rng(seed);
    let mut p = PolicyParameters::init_with_sigma(64, 3.0, &mut rng).unwrap();
    // awkward values that a decimal printer could easily round wrong
    p.w1[0] = 0.1 + 0.2;
    p.b1[3] = -1.0e-300;
    p.w2[5] = 5e-324;
    p.b2[0] = 123_456_789.123_456_79;
    p
}

fn edit(doc: &str, f: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(doc).unwrap();
    f(&mut v);
    serde_json::to_string(&v).unwrap()
}

#[test]
fn round_trip_is_bit_exact() {
    for seed in 0..5 {
        let p = trained_like(seed);
        let meta = ArchiveMetadata {
            training: Some(TrainingConfig::default()),
            seed: Some(seed),
            trials_used: Some(321),
            created_unix_s: Some(1_700_000_000),
        };
        let doc = export_policy(&p, &meta).unwrap();
        let back = import_policy(&doc).unwrap();
        let bits = |q: &PolicyParameters| q.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.params), bits(&p));
        assert_eq!(back.metadata, meta);
        // and a second export is byte-identical
        assert_eq!(export_policy(&back.params, &back.metadata).unwrap(), doc);
    }
}

#[test]
fn imported_policy_acts_identically() {
    let p = trained_like(9);
    let mut buf = Vec::new();
    write_policy(&mut buf, &p, &ArchiveMetadata::default()).unwrap();
    let q = read_policy(buf.as_slice()).unwrap().params;
    let mut rng = seeded_rng(10);
    for _ in 0..100 {
        let s = State::new(
            rng.random_range(-0.4..0.4),
            rng.random_range(-0.2..0.2),
            rng.random_range(-2.0..2.0),
            rng.random_range(-5.0..5.0),
        );
        let (a, _) = forward(&p, &s);
        let (b, _) = forward(&q, &s);
        assert_eq!(a.mu.to_bits(), b.mu.to_bits());
        assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
    }
}

#[test]
fn layout_is_nested_row_major() {
    let p = trained_like(1);
    let v: Value = serde_json::from_str(&export_policy(&p, &ArchiveMetadata::default()).unwrap()).unwrap();
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["hidden_width"], 64);
    assert_eq!(v["b1"].as_array().unwrap().len(), 64);
    assert_eq!(v["w1"].as_array().unwrap().len(), 64);
    assert_eq!(v["w1"][2][1].as_f64().unwrap(), p.w1[2 * 4 + 1]);
    assert_eq!(v["w2"][1][7].as_f64().unwrap(), p.w2[64 + 7]);
    assert_eq!(v["shapes"]["w2"], serde_json::json!([2, 64]));
}

#[test]
fn short_row_is_a_shape_error() {
    let doc = export_policy(&trained_like(2), &ArchiveMetadata::default()).unwrap();
    let bad = edit(&doc, |v| {
        v["w1"].as_array_mut().unwrap().pop();
    });
    let e = import_policy(&bad).unwrap_err();
    assert!(matches!(e, ArchiveError::ShapeMismatch { field: "w1", .. }), "{e}");
    assert!(e.to_string().contains("w1"));

    let bad = edit(&doc, |v| {
        v["w2"][1].as_array_mut().unwrap().pop();
    });
    assert_eq!(import_policy(&bad).unwrap_err().field(), Some("w2"));

    let bad = edit(&doc, |v| {
        v["b2"].as_array_mut().unwrap().push(0.0.into());
    });
    assert_eq!(import_policy(&bad).unwrap_err().field(), Some("b2"));
}

#[test]
fn unknown_version_is_refused() {
    let doc = export_policy(&trained_like(3), &ArchiveMetadata::default()).unwrap();
    let bad = edit(&doc, |v| v["format_version"] = 999.into());
    assert!(matches!(import_policy(&bad), Err(ArchiveError::UnsupportedVersion(999))));
}

#[test]
fn non_finite_entries_are_refused() {
    let doc = export_policy(&trained_like(4), &ArchiveMetadata::default()).unwrap();
    for bad_value in [Value::Null, "NaN".into(), "-inf".into()] {
        let bad = edit(&doc, |v| v["b1"][5] = bad_value.clone());
        match import_policy(&bad) {
            Err(ArchiveError::NonFinite { field, index }) => {
                assert_eq!(field, "b1");
                assert_eq!(index, "[5]");
            }
            other => panic!("{other:?}"),
        }
    }
    // a bare NaN token is not JSON at all
    let bad = doc.replacen("\"b2\": [", "\"b2\": [NaN, ", 1);
    assert!(matches!(import_policy(&bad), Err(ArchiveError::Malformed(_))));
}

#[test]
fn missing_and_mistyped_fields() {
    let doc = export_policy(&trained_like(5), &ArchiveMetadata::default()).unwrap();
    let bad = edit(&doc, |v| {
        v.as_object_mut().unwrap().remove("b1");
    });
    assert!(matches!(import_policy(&bad), Err(ArchiveError::MissingField("b1"))));
    let bad = edit(&doc, |v| v["w1"] = "weights".into());
    assert_eq!(import_policy(&bad).unwrap_err().field(), Some("w1"));
    assert!(matches!(import_policy("{"), Err(ArchiveError::Malformed(_))));
    // metadata is optional
    let bare = edit(&doc, |v| {
        v.as_object_mut().unwrap().remove("metadata");
    });
    assert_eq!(import_policy(&bare).unwrap().metadata, ArchiveMetadata::default());
}
