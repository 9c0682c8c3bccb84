//! Reader for the PHEME thread directory layout:
//! `topic/{rumours,non-rumours}/<event-id>/{source-tweet(s),reactions}/*.json`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::DateTime;
use log::warn;
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pheme::{Event, Label, Post};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParseReport {
    /// Sorted by event id.
    pub events: Vec<Event>,
    /// Event directories that produced no event.
    pub rejects: Vec<Reject>,
    /// Tweet files that could not be read or lacked required fields.
    pub skipped_files: Vec<Reject>,
    /// Distinct author ids seen, when tweets carry them.
    pub users: Option<usize>,
}

fn label_for(dir_name: &str) -> Option<Label> {
    match dir_name {
        "rumours" | "rumors" => Some(Label::Rumor),
        "non-rumours" | "non-rumors" | "nonrumours" | "nonrumors" => Some(Label::Nonrumor),
        _ => None,
    }
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && !hidden(p))
        .collect();
    out.sort();
    Ok(out)
}

fn hidden(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.'))
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let Ok(rd) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut out: Vec<PathBuf> = rd
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && !hidden(p) && p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    out
}

/// Twitter's `created_at` ("Wed Jan 07 11:06:08 +0000 2015"), RFC 3339, or
/// epoch seconds.
fn parse_time(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y")
            .or_else(|_| DateTime::parse_from_rfc3339(s))
            .ok()
            .map(|t| t.timestamp())
            .or_else(|| s.parse().ok()),
        _ => None,
    }
}

struct Tweet {
    post: Post,
    user: Option<String>,
}

fn read_tweet(path: &Path, is_source: bool) -> std::result::Result<Tweet, String> {
    let raw = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let v: Value = serde_json::from_str(&raw).map_err(|e| e.to_string())?;
    let id = match (v.get("id_str"), v.get("id")) {
        (Some(Value::String(s)), _) => s.clone(),
        (_, Some(Value::Number(n))) => n.to_string(),
        (_, Some(Value::String(s))) => s.clone(),
        _ => return Err("missing id".into()),
    };
    let text = v
        .get("full_text")
        .or_else(|| v.get("text"))
        .and_then(Value::as_str)
        .ok_or("missing text")?
        .to_string();
    let time = v
        .get("created_at")
        .and_then(parse_time)
        .ok_or("missing or unparseable created_at")?;
    if time < 0 {
        return Err("timestamp before epoch".into());
    }
    let user = v.get("user").and_then(|u| {
        u.get("id_str")
            .and_then(Value::as_str)
            .map(str::to_string)
            .or_else(|| u.get("id").map(|i| i.to_string()))
    });
    Ok(Tweet {
        post: Post {
            id,
            text,
            time,
            is_source,
        },
        user,
    })
}

struct EventOutcome {
    event: std::result::Result<Event, Reject>,
    skipped: Vec<Reject>,
    users: Vec<String>,
}

fn parse_event_dir(dir: &Path, topic: &str, label: Label) -> EventOutcome {
    let mut skipped = Vec::new();
    let mut users = Vec::new();
    let mut read_all = |sub: &str, is_source: bool| -> Vec<Post> {
        let mut posts = Vec::new();
        for f in json_files(&dir.join(sub)) {
            match read_tweet(&f, is_source) {
                Ok(t) => {
                    users.extend(t.user);
                    posts.push(t.post);
                }
                Err(reason) => {
                    warn!("skipping {}: {reason}", f.display());
                    skipped.push(Reject { path: f, reason });
                }
            }
        }
        posts
    };
    let mut sources = read_all("source-tweets", true);
    sources.extend(read_all("source-tweet", true));
    let mut reactions = read_all("reactions", false);
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let event = if sources.is_empty() {
        Err(Reject {
            path: dir.to_path_buf(),
            reason: "no readable source tweet".into(),
        })
    } else {
        // Prefer the source tweet whose id names the directory.
        let pick = sources.iter().position(|p| p.id == id).unwrap_or(0);
        let source = sources.swap_remove(pick);
        let source_id = source.id.clone();
        reactions.retain(|r| r.id != source_id);
        let mut event = Event {
            id,
            topic: topic.to_string(),
            label,
            posts: std::iter::once(source).chain(reactions).collect(),
        };
        event.sort_replies();
        Ok(event)
    };
    EventOutcome {
        event,
        skipped,
        users,
    }
}

/// Walks a PHEME tree. Malformed tweet files are skipped with a warning;
/// event directories without a source tweet are listed in `rejects`.
pub fn parse_pheme_dir(root: &Path) -> Result<ParseReport> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let mut jobs = Vec::new();
    for topic_dir in subdirs(root)? {
        let topic = topic_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for label_dir in subdirs(&topic_dir)? {
            let name = label_dir.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let Some(label) = label_for(name) else { continue };
            for event_dir in subdirs(&label_dir)? {
                jobs.push((event_dir, topic.clone(), label));
            }
        }
    }
    let outcomes: Vec<EventOutcome> = jobs
        .par_iter()
        .map(|(dir, topic, label)| parse_event_dir(dir, topic, *label))
        .collect();

    let mut report = ParseReport::default();
    let mut users = HashSet::new();
    for o in outcomes {
        report.skipped_files.extend(o.skipped);
        users.extend(o.users);
        match o.event {
            Ok(e) => report.events.push(e),
            Err(r) => {
                warn!("rejecting event {}: {}", r.path.display(), r.reason);
                report.rejects.push(r);
            }
        }
    }
    report.events.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.topic.cmp(&b.topic)));
    report.users = (!users.is_empty()).then_some(users.len());
    Ok(report)
}
