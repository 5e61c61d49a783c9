use std::path::Path;

use proptest::prelude::*;
use ugaar::features::{format_feature_table, load_dataset, parse_feature_table, write_dataset};
use ugaar::plot::render_svg;
use ugaar_core::data::{synth_dataset, FeatureTable, Modality, SynthConfig};
use ugaar_core::numkit::DenseMatrix;
use ugaar_core::trainer::EpochRecord;

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        -1e-6f64..1e-6,
        Just(0.0),
        Just(-0.0),
        Just(f64::MAX),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
    ]
}

proptest! {
    #[test]
    fn feature_tables_round_trip_exactly(n in 1usize..8, d in 1usize..6, seed in prop::collection::vec(value(), 48)) {
        let values: Vec<f64> = (0..n * d).map(|i| seed[i % seed.len()]).collect();
        let ids = (0..n).map(|i| format!("item-{i}")).collect();
        let table = FeatureTable::new(Modality::Sheet, ids, DenseMatrix::new(n, d, values).unwrap()).unwrap();
        let text = format_feature_table(&table);
        let back = parse_feature_table(&text, Path::new("mem"), Modality::Sheet).unwrap();
        prop_assert_eq!(back.ids(), table.ids());
        for (a, b) in back.vectors().values().iter().zip(table.vectors().values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn dataset_round_trips_through_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n: 25,
        latent_dim: 2,
        audio_dim: 4,
        sheet_dim: 3,
        lyrics_dim: 2,
        ..SynthConfig::default()
    };
    let data = synth_dataset(&cfg).unwrap();
    let manifest = write_dataset(&data, &dir.path().join("nested")).unwrap();
    assert_eq!(load_dataset(&manifest).unwrap(), data);
}

#[test]
fn manifest_paths_resolve_against_the_manifest_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n: 5,
        latent_dim: 1,
        audio_dim: 2,
        sheet_dim: 2,
        lyrics_dim: 1,
        ..SynthConfig::default()
    };
    let manifest = write_dataset(&synth_dataset(&cfg).unwrap(), &dir.path().join("d")).unwrap();
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("\"audio.txt\""));
    let loaded = load_dataset(&manifest).unwrap();
    assert_eq!(loaded.len(), 5);
}

#[test]
fn ragged_and_mismatched_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("a.txt"), "2 2\nx 1 2\ny 3 4\n").unwrap();
    std::fs::write(p.join("s.txt"), "2 1\nx 1\nz 2\n").unwrap();
    std::fs::write(p.join("l.txt"), "2 1\nx 1\ny 2 3\n").unwrap();
    std::fs::write(
        p.join("m.json"),
        r#"{"audio":"a.txt","sheet":"s.txt","lyrics":"l.txt"}"#,
    )
    .unwrap();
    let err = load_dataset(&p.join("m.json")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("l.txt:3"), "{err}");

    std::fs::write(p.join("l.txt"), "2 1\nx 1\ny 2\n").unwrap();
    let err = load_dataset(&p.join("m.json")).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");

    std::fs::write(
        p.join("m.json"),
        r#"{"audio":"a.txt","sheet":"s.txt","lyrics":"l.txt","extra":1}"#,
    )
    .unwrap();
    assert_eq!(load_dataset(&p.join("m.json")).unwrap_err().exit_code(), 2);
}

fn record(epoch: usize, medr: Option<Vec<f64>>) -> EpochRecord {
    EpochRecord {
        epoch,
        d_loss: 1.4 - 0.01 * epoch as f64,
        g_loss: -0.7,
        kl_loss: 0.3 / epoch as f64,
        validation_medr: medr,
        d_output_min: Some(0.5),
        d_output_max: Some(0.9),
        phi_min: Some(0.0),
    }
}

#[test]
fn svg_is_well_formed_xml() {
    let one = render_svg(&[record(1, Some(vec![3.0; 6]))]).unwrap();
    let many: Vec<EpochRecord> = (1..=30)
        .map(|e| record(e, (e % 10 == 0).then(|| vec![e as f64; 6])))
        .collect();
    for svg in [one, render_svg(&many).unwrap()] {
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let texts: String = doc.descendants().filter_map(|n| n.text()).collect();
        for label in ["D loss", "G loss", "KL loss", "audio-to-lyrics", "sheet music-to-audio"] {
            assert!(texts.contains(label), "missing {label}");
        }
    }
    assert_eq!(render_svg(&[]).unwrap_err().exit_code(), 2);
}
