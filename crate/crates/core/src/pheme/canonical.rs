//! Canonical JSONL interchange: one event object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pheme::{Dataset, Event};

/// Lines longer than this are rejected.
pub const MAX_LINE_BYTES: usize = 1 << 20;

pub fn write_canonical<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    for event in &dataset.events {
        serde_json::to_writer(&mut w, event)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_canonical(dataset: &Dataset, path: &Path) -> Result<()> {
    write_canonical(dataset, BufWriter::new(File::create(path)?))
}

/// Parses canonical JSONL. `origin` names the source in error messages.
pub fn read_canonical<R: Read>(r: R, origin: &str) -> Result<Dataset> {
    let mut reader = BufReader::new(r);
    let mut events = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    let schema = |line: usize, message: String| Error::Schema {
        path: origin.to_string(),
        line,
        message,
    };
    loop {
        buf.clear();
        let n = (&mut reader)
            .take(MAX_LINE_BYTES as u64 + 2)
            .read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let content = buf.strip_suffix(b"\n").unwrap_or(&buf);
        let content = content.strip_suffix(b"\r").unwrap_or(content);
        if content.len() > MAX_LINE_BYTES {
            return Err(schema(line_no, format!("line exceeds {MAX_LINE_BYTES} bytes")));
        }
        if content.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let event: Event =
            serde_json::from_slice(content).map_err(|e| schema(line_no, e.to_string()))?;
        event
            .validate()
            .map_err(|m| schema(line_no, format!("event {}: {m}", event.id)))?;
        events.push(event);
    }
    let mut seen = std::collections::HashSet::new();
    for (i, e) in events.iter().enumerate() {
        if !seen.insert(e.id.as_str()) {
            return Err(schema(i + 1, format!("duplicate event_id {}", e.id)));
        }
    }
    Ok(Dataset::new(events))
}

pub fn load_canonical(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    read_canonical(file, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pheme::{Label, Post};

    fn event(id: &str, n: usize, label: Label) -> Event {
        Event {
            id: id.into(),
            topic: "t".into(),
            label,
            posts: (0..n)
                .map(|i| Post {
                    id: format!("{id}-{i}"),
                    text: format!("post {i}"),
                    time: 100 + i as i64,
                    is_source: i == 0,
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip() {
        let d = Dataset::new(vec![
            event("a", 1, Label::Rumor),
            event("b", 3, Label::Nonrumor),
            event("c", 2, Label::Rumor),
        ]);
        let mut buf = Vec::new();
        write_canonical(&d, &mut buf).unwrap();
        let first = String::from_utf8(buf.clone()).unwrap();
        assert!(first.starts_with(r#"{"event_id":"a","topic":"t","label":"rumor","posts":[{"id":"a-0""#));
        assert_eq!(read_canonical(&buf[..], "mem").unwrap(), d);
    }

    #[test]
    fn missing_label_names_line_and_field() {
        let text = format!(
            "{}\n{}\n",
            serde_json::to_string(&event("a", 1, Label::Rumor)).unwrap(),
            r#"{"event_id":"b","topic":"t","posts":[{"id":"1","text":"x","time":1,"is_source":true}]}"#
        );
        let err = read_canonical(text.as_bytes(), "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("label"), "{msg}");
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(read_canonical(&b""[..], "mem").unwrap().is_empty());
    }

    #[test]
    fn rejects_invariant_violations() {
        let mut e = event("a", 3, Label::Rumor);
        e.posts.swap(0, 1);
        let line = serde_json::to_string(&e).unwrap();
        assert!(matches!(read_canonical(line.as_bytes(), "mem"), Err(Error::Schema { line: 1, .. })));

        let mut e = event("a", 3, Label::Rumor);
        e.posts[1].time = 500;
        let line = serde_json::to_string(&e).unwrap();
        assert!(read_canonical(line.as_bytes(), "mem").is_err());

        let a = serde_json::to_string(&event("a", 1, Label::Rumor)).unwrap();
        let dup = format!("{a}\n{a}\n");
        assert!(read_canonical(dup.as_bytes(), "mem").is_err());
    }

    #[test]
    fn rejects_oversized_line() {
        let mut e = event("a", 1, Label::Rumor);
        e.posts[0].text = "x".repeat(MAX_LINE_BYTES);
        let line = serde_json::to_string(&e).unwrap();
        let err = read_canonical(line.as_bytes(), "mem").unwrap_err();
        assert!(err.to_string().contains("exceeds"));
    }
}
