use std::fs;
use std::path::Path;

use rumor_core::pheme::{load_canonical, parse_pheme_dir, save_canonical, stats, Dataset, Label};
use serde_json::json;

fn tweet(dir: &Path, id: u64, text: &str, created_at: &str, user: u64) {
    fs::create_dir_all(dir).unwrap();
    let v = json!({ "id": id, "id_str": id.to_string(), "text": text, "created_at": created_at, "user": { "id_str": user.to_string() } });
    fs::write(dir.join(format!("{id}.json")), v.to_string()).unwrap();
}

/// Two topics, three events, one broken reply and one event without a source.
fn fixture(root: &Path) {
    let ev = root.join("ferguson/rumours/100");
    tweet(&ev.join("source-tweet"), 100, "Police shot a man #ferguson", "Sat Aug 09 22:00:00 +0000 2014", 1);
    tweet(&ev.join("reactions"), 102, "@a is this confirmed?", "Sat Aug 09 22:05:00 +0000 2014", 2);
    tweet(&ev.join("reactions"), 101, "source please http://t.co/x", "Sat Aug 09 22:01:00 +0000 2014", 3);
    fs::write(ev.join("reactions/103.json"), "{ not json").unwrap();

    let ev = root.join("ferguson/non-rumours/200");
    tweet(&ev.join("source-tweet"), 200, "Protest downtown tonight", "Sun Aug 10 10:00:00 +0000 2014", 4);

    let ev = root.join("sydneysiege/non-rumours/300");
    tweet(&ev.join("source-tweet"), 300, "Cafe closed", "Mon Dec 15 01:00:00 +0000 2014", 1);
    tweet(&ev.join("reactions"), 301, "stay safe", "Mon Dec 15 01:02:00 +0000 2014", 5);

    fs::create_dir_all(root.join("sydneysiege/rumours/400/reactions")).unwrap();
    fs::create_dir_all(root.join("sydneysiege/annotations")).unwrap();
}

#[test]
fn parses_a_thread_tree() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let report = parse_pheme_dir(dir.path()).unwrap();

    let ids: Vec<&str> = report.events.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ["100", "200", "300"]);
    let first = &report.events[0];
    assert_eq!((first.topic.as_str(), first.label), ("ferguson", Label::Rumor));
    let posts: Vec<&str> = first.posts.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(posts, ["100", "101", "102"], "source first, replies by time");
    assert!(first.posts[0].is_source && !first.posts[1].is_source);
    assert_eq!(report.events[2].label, Label::Nonrumor);

    assert_eq!(report.rejects.len(), 1);
    assert!(report.rejects[0].path.ends_with("400"));
    assert_eq!(report.skipped_files.len(), 1);
    assert!(report.skipped_files[0].path.ends_with("103.json"));
    assert_eq!(report.users, Some(5));
}

#[test]
fn statistics_and_canonical_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let dataset = Dataset::new(parse_pheme_dir(dir.path()).unwrap().events);
    let s = stats(&dataset).unwrap();
    assert_eq!((s.events, s.posts, s.rumor, s.nonrumor, s.max_posts_per_event), (3, 6, 1, 2, 3));
    assert!((s.avg_posts_per_event - 2.0).abs() < 1e-12);

    let path = dir.path().join("out/events.jsonl");
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    save_canonical(&dataset, &path).unwrap();
    assert_eq!(load_canonical(&path).unwrap(), dataset);
}

#[test]
fn missing_root_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = parse_pheme_dir(&dir.path().join("absent")).unwrap_err();
    assert_eq!(err.kind(), "missing_root");
}
