use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Nonrumor,
    Rumor,
}

impl Label {
    /// Class index used by the classifiers: nonrumor = 0, rumor = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Nonrumor => 0,
            Label::Rumor => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Label::Nonrumor),
            1 => Ok(Label::Rumor),
            _ => Err(Error::LabelOutOfRange { label: i, classes: 2 }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nonrumor => "nonrumor",
            Label::Rumor => "rumor",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    /// UTC seconds.
    pub time: i64,
    pub is_source: bool,
}

/// A source post followed by its reactions in time order. Every post
/// carries the event's label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    #[serde(rename = "event_id")]
    pub id: String,
    pub topic: String,
    pub label: Label,
    pub posts: Vec<Post>,
}

/// Orders tweet ids numerically when both are digit strings.
pub(crate) fn cmp_ids(a: &str, b: &str) -> std::cmp::Ordering {
    let numeric = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
    if numeric(a) && numeric(b) {
        a.len().cmp(&b.len()).then_with(|| a.cmp(b))
    } else {
        a.cmp(b)
    }
}

impl Event {
    /// Checks source-first, single-source, time-ordered replies.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let first = self.posts.first().ok_or("event has no posts")?;
        if !first.is_source {
            return Err("posts[0] is not the source post".into());
        }
        if self.posts.iter().filter(|p| p.is_source).count() != 1 {
            return Err("exactly one post must be the source".into());
        }
        if self.posts.iter().any(|p| p.time < 0) {
            return Err("negative timestamp".into());
        }
        for w in self.posts[1..].windows(2) {
            if w[0].time > w[1].time {
                return Err(format!("replies out of time order at post {}", w[1].id));
            }
        }
        Ok(())
    }

    /// Sorts replies by `(time, id)` after the source.
    pub fn sort_replies(&mut self) {
        if self.posts.len() > 1 {
            self.posts[1..].sort_by(|a, b| a.time.cmp(&b.time).then_with(|| cmp_ids(&a.id, &b.id)));
        }
    }

    /// Copy keeping at most `max_posts` posts, earliest first, source kept.
    pub fn truncated(&self, max_posts: usize) -> Event {
        let mut e = self.clone();
        e.posts.truncate(max_posts.max(1));
        e
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub events: Vec<Event>,
}

impl Dataset {
    pub fn new(events: Vec<Event>) -> Self {
        Self { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Valid,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<Event>,
    pub valid: Vec<Event>,
    pub test: Vec<Event>,
}

impl Splits {
    pub fn get(&self, tag: SplitTag) -> &[Event] {
        match tag {
            SplitTag::Train => &self.train,
            SplitTag::Valid => &self.valid,
            SplitTag::Test => &self.test,
        }
    }
}
