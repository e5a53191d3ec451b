//! The checked-in fixture levels ingest cleanly and produce the corpora
//! the rest of the test suite assumes.

use std::collections::BTreeSet;
use std::path::PathBuf;

use levelblend::corpus::{build_corpus, load_levels_from_dir, Sidecar};
use levelblend::{Corpus, DirectionalLabel, GameConfig, GameId, IngestOptions};

fn fixture_dir(game: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(game)
}

fn ingest(game: GameId, augment: bool, sidecar: Option<Sidecar>) -> Corpus {
    let config = GameConfig::builtin(game);
    let levels = load_levels_from_dir(&fixture_dir(game.name()), &config).unwrap();
    build_corpus(&levels, &config, &IngestOptions { augment, sidecar }).unwrap()
}

#[test]
fn zelda_fixture_covers_all_sixteen_labels() {
    let corpus = ingest(GameId::Zelda, false, None);
    // 16 rooms per dungeon for two dungeons, 16 of 18 slots in the third
    assert_eq!(corpus.len(), 48);
    assert_eq!(corpus.in_labels().len(), 16);
    assert_eq!(corpus.segment_rows, 11);
    assert_eq!(corpus.segment_cols, 16);

    let augmented = ingest(GameId::Zelda, true, None);
    assert!(augmented.len() >= corpus.len());
    assert_eq!(augmented.in_labels().len(), 16);
}

#[test]
fn metroid_fixture_labels_match_design() {
    let corpus = ingest(GameId::Metroid, false, None);
    assert_eq!(corpus.len(), 24);
    let expected: BTreeSet<DirectionalLabel> = [
        DirectionalLabel::new(false, false, true, true),
        DirectionalLabel::new(true, true, false, false),
        DirectionalLabel::new(true, true, true, true),
        DirectionalLabel::new(false, false, false, true),
        DirectionalLabel::new(false, false, true, false),
        DirectionalLabel::new(false, true, true, true),
    ]
    .into_iter()
    .collect();
    assert_eq!(corpus.in_labels(), expected);
}

#[test]
fn metroid_sidecar_overrides_heuristic_label() {
    let sidecar =
        Sidecar::from_file(&fixture_dir("metroid").join("zone1.labels")).unwrap();
    let corpus = ingest(GameId::Metroid, false, Some(sidecar));
    let seg = corpus
        .segments
        .iter()
        .find(|s| s.provenance.level == "zone1" && s.provenance.row == 0 && s.provenance.col == 0)
        .unwrap();
    assert_eq!(seg.label, DirectionalLabel::new(true, false, true, true));
    // a label class the heuristic never produces on these fixtures
    assert!(corpus.in_labels().contains(&seg.label));
}

#[test]
fn megaman_fixture_includes_sealed_chamber() {
    let corpus = ingest(GameId::MegaMan, false, None);
    assert_eq!(corpus.len(), 24);
    assert!(corpus.in_labels().contains(&DirectionalLabel::CLOSED));
    assert_eq!(corpus.segment_rows, 15);
}

#[test]
fn loderunner_fixture_yields_four_quadrants_per_level() {
    let corpus = ingest(GameId::LodeRunner, false, None);
    assert_eq!(corpus.len(), 24);
    let labels = corpus.in_labels();
    assert_eq!(labels.len(), 4);
    // quadrant labels point at the neighboring quadrants
    assert!(labels.contains(&DirectionalLabel::new(false, true, false, true)));
    assert!(labels.contains(&DirectionalLabel::new(false, true, true, false)));
    assert!(labels.contains(&DirectionalLabel::new(true, false, false, true)));
    assert!(labels.contains(&DirectionalLabel::new(true, false, true, false)));
}

#[test]
fn corpora_round_trip_through_text() {
    for game in GameId::ALL {
        let corpus = ingest(game, false, None);
        let text = levelblend::corpus::corpus_to_string(&corpus);
        let parsed = levelblend::corpus::corpus_from_str(&text).unwrap();
        assert_eq!(parsed, corpus, "{game:?} corpus round trip");
    }
}
