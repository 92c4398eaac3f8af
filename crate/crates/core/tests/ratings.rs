use newsky_core::ratings::{
    load_ratings, Orientation, OrientationSource, RatingFiles, RatingTableBuilder, RatingsHandle, Reliability,
};
use std::path::{Path, PathBuf};

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn threshold_is_inclusive_at_sixty() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(dir.path(), "scores.csv", "domain,score\na.com,59.999\nb.com,60.0\nc.com,60.001\nd.com,\n");
    let table = load_ratings(&RatingFiles { scores, ..Default::default() }).unwrap();
    let got: Vec<Reliability> = ["a.com", "b.com", "c.com", "d.com"].iter().map(|d| table.reliability(d)).collect();
    assert_eq!(got, vec![Reliability::Unreliable, Reliability::Reliable, Reliability::Reliable, Reliability::Unrated]);
}

#[test]
fn mbfc_wins_under_every_load_order() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(dir.path(), "scores.csv", "domain,score\nshared.com,80\nas.com,70\nng.com,40\n");
    let files = [
        (OrientationSource::Mbfc, write(dir.path(), "mbfc.csv", "domain,orientation\nshared.com,Left-Center\n")),
        (
            OrientationSource::AllSides,
            write(dir.path(), "allsides.csv", "domain,orientation\nshared.com,Right\nas.com,Center\n"),
        ),
        (
            OrientationSource::NewsGuardTier,
            write(dir.path(), "newsguard.csv", "domain,orientation\nshared.com,Far Right\nas.com,Left\nng.com,Right\n"),
        ),
    ];
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for order in orders {
        let mut builder = RatingTableBuilder::new().scores(&scores).unwrap();
        for i in order {
            builder = builder.orientations(files[i].0, &files[i].1).unwrap();
        }
        let table = builder.build();
        let shared = table.classify("shared.com");
        assert_eq!(
            (shared.orientation, shared.orientation_source),
            (Orientation::LeanLeft, OrientationSource::Mbfc),
            "{order:?}"
        );
        assert_eq!(table.classify("as.com").orientation_source, OrientationSource::AllSides);
        assert_eq!(table.classify("ng.com").orientation, Orientation::Right);
    }
}

#[test]
fn subdomains_fall_back_to_the_rated_domain() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(dir.path(), "scores.csv", "domain,score\nexample.com,75\nnews.other.org,30\n");
    let table = load_ratings(&RatingFiles { scores, ..Default::default() }).unwrap();
    assert_eq!(table.reliability("live.example.com"), Reliability::Reliable);
    // rating keys are reduced to the registrable domain too
    assert_eq!(table.reliability("other.org"), Reliability::Unreliable);
    assert_eq!(table.reliability("unrelated.org"), Reliability::Unrated);
}

#[test]
fn bad_headers_are_rejected_and_bad_rows_warned() {
    let dir = tempfile::tempdir().unwrap();
    let wrong = write(dir.path(), "wrong.csv", "site,rating\na.com,10\n");
    assert!(load_ratings(&RatingFiles { scores: wrong, ..Default::default() }).is_err());

    let scores = write(dir.path(), "scores.csv", "domain,score\na.com,10\na.com,90\n");
    let mbfc = write(dir.path(), "mbfc.csv", "domain,orientation\na.com,sideways\n");
    let table = load_ratings(&RatingFiles { scores, mbfc: Some(mbfc), ..Default::default() }).unwrap();
    assert_eq!(table.warnings().len(), 2);
    assert_eq!(table.classify("a.com").orientation, Orientation::Unknown);
}

#[test]
fn reload_swaps_the_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(dir.path(), "scores.csv", "domain,score\na.com,10\n");
    let files = RatingFiles { scores: scores.clone(), ..Default::default() };
    let handle = RatingsHandle::new(load_ratings(&files).unwrap());
    let before = handle.snapshot();
    write(dir.path(), "scores.csv", "domain,score\na.com,90\n");
    handle.reload(&files).unwrap();
    assert_eq!(before.reliability("a.com"), Reliability::Unreliable);
    assert_eq!(handle.snapshot().reliability("a.com"), Reliability::Reliable);

    // a broken file keeps the last good snapshot
    write(dir.path(), "scores.csv", "nonsense\n");
    assert!(handle.reload(&files).is_err());
    assert_eq!(handle.snapshot().reliability("a.com"), Reliability::Reliable);
}
