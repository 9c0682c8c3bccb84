use serde::Serialize;

use crate::error::{Error, Result};
use crate::pheme::{Dataset, Label};
use crate::text::normalize;

/// Corpus-level counts in the layout of the usual dataset summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub users: Option<usize>,
    pub posts: usize,
    pub events: usize,
    pub avg_words_per_post: f64,
    pub avg_posts_per_event: f64,
    pub max_posts_per_event: usize,
    pub rumor: usize,
    pub nonrumor: usize,
    /// Fraction of events labelled rumor.
    pub balance_degree: f64,
}

/// Published counts for the 2017 PHEME release, printed next to ingested
/// statistics for manual comparison only.
pub const PHEME_2017_EVENTS: usize = 5802;
pub const PHEME_2017_BALANCE: f64 = 0.34;

impl DatasetStats {
    /// Two lines setting event count and balance against the published
    /// 2017 release.
    pub fn reference_comparison(&self) -> String {
        format!(
            "events          {:>6} (published 2017 release: {PHEME_2017_EVENTS})\n\
             balance degree  {:>5.2}% (published 2017 release: {:.2}%)",
            self.events,
            100.0 * self.balance_degree,
            100.0 * PHEME_2017_BALANCE
        )
    }
}

pub fn stats(dataset: &Dataset) -> Result<DatasetStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let events = dataset.len();
    let posts: usize = dataset.events.iter().map(|e| e.posts.len()).sum();
    let words: usize = dataset
        .events
        .iter()
        .flat_map(|e| &e.posts)
        .map(|p| normalize(&p.text).len())
        .sum();
    let rumor = dataset.events.iter().filter(|e| e.label == Label::Rumor).count();
    Ok(DatasetStats {
        users: None,
        posts,
        events,
        avg_words_per_post: if posts == 0 { 0.0 } else { words as f64 / posts as f64 },
        avg_posts_per_event: posts as f64 / events as f64,
        max_posts_per_event: dataset.events.iter().map(|e| e.posts.len()).max().unwrap_or(0),
        rumor,
        nonrumor: events - rumor,
        balance_degree: rumor as f64 / events as f64,
    })
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let users = self.users.map_or_else(|| "n/a".to_string(), |u| u.to_string());
        writeln!(f, "Users           {users}")?;
        writeln!(f, "Posts           {}", self.posts)?;
        writeln!(f, "Events          {}", self.events)?;
        writeln!(f, "Avg words/post  {:.1}", self.avg_words_per_post)?;
        writeln!(f, "Avg posts/event {:.1}", self.avg_posts_per_event)?;
        writeln!(f, "Max posts/event {}", self.max_posts_per_event)?;
        writeln!(f, "Rumor           {}", self.rumor)?;
        writeln!(f, "Nonrumor        {}", self.nonrumor)?;
        write!(f, "Balance degree  {:.2}%", 100.0 * self.balance_degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pheme::{Event, Post};

    fn event(n: usize, label: Label) -> Event {
        Event {
            id: format!("e{n}"),
            topic: "t".into(),
            label,
            posts: (0..n)
                .map(|i| Post { id: i.to_string(), text: "two words".into(), time: 0, is_source: i == 0 })
                .collect(),
        }
    }

    #[test]
    fn arithmetic() {
        let d = Dataset::new(vec![event(3, Label::Rumor), event(5, Label::Nonrumor)]);
        let s = stats(&d).unwrap();
        assert_eq!(s.avg_posts_per_event, 4.0);
        assert_eq!(s.max_posts_per_event, 5);
        assert_eq!(s.posts, 8);
        assert_eq!(s.avg_words_per_post, 2.0);
        assert_eq!(s.rumor + s.nonrumor, s.events);
        assert_eq!(s.balance_degree, 0.5);
    }

    #[test]
    fn all_rumor_balance_is_one() {
        let d = Dataset::new(vec![event(1, Label::Rumor), event(2, Label::Rumor)]);
        assert_eq!(stats(&d).unwrap().balance_degree, 1.0);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(stats(&Dataset::default()), Err(Error::EmptyDataset)));
    }
}
