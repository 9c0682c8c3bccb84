//! Early-detection test slices bucketed by posts per event.

use crate::pheme::Event;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SliceSpec {
    pub name: &'static str,
    pub min_posts: usize,
    pub max_posts: usize,
}

impl SliceSpec {
    /// Post-count range as printed in reports, e.g. `2 – 5`.
    pub fn range_label(&self) -> String {
        format!("{} \u{2013} {}", self.min_posts, self.max_posts)
    }

    pub fn contains(&self, posts: usize) -> bool {
        (self.min_posts..=self.max_posts).contains(&posts)
    }
}

pub const EARLY_SLICES: [SliceSpec; 6] = [
    SliceSpec { name: "Test_5", min_posts: 2, max_posts: 5 },
    SliceSpec { name: "Test_10", min_posts: 6, max_posts: 10 },
    SliceSpec { name: "Test_15", min_posts: 11, max_posts: 15 },
    SliceSpec { name: "Test_20", min_posts: 16, max_posts: 20 },
    SliceSpec { name: "Test_25", min_posts: 21, max_posts: 25 },
    SliceSpec { name: "Test_30", min_posts: 26, max_posts: 30 },
];

/// The slice an event of `posts` posts falls into, if any.
pub fn slice_for(posts: usize) -> Option<&'static SliceSpec> {
    EARLY_SLICES.iter().find(|s| s.contains(posts))
}

/// Buckets events by their full post count, in [`EARLY_SLICES`] order.
/// Events outside 2–30 posts land in no slice; each kept event is truncated
/// to its slice ceiling.
pub fn early_slices(test_events: &[Event]) -> Vec<(SliceSpec, Vec<Event>)> {
    let mut out: Vec<(SliceSpec, Vec<Event>)> =
        EARLY_SLICES.iter().map(|s| (*s, Vec::new())).collect();
    for e in test_events {
        if let Some(pos) = EARLY_SLICES.iter().position(|s| s.contains(e.posts.len())) {
            let ceiling = out[pos].0.max_posts;
            out[pos].1.push(e.truncated(ceiling));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pheme::{Label, Post};

    fn event(n: usize) -> Event {
        Event {
            id: format!("e{n}"),
            topic: "t".into(),
            label: Label::Rumor,
            posts: (0..n)
                .map(|i| Post { id: i.to_string(), text: String::new(), time: i as i64, is_source: i == 0 })
                .collect(),
        }
    }

    #[test]
    fn buckets_match_table() {
        assert_eq!(slice_for(12).unwrap().name, "Test_15");
        assert_eq!(slice_for(30).unwrap().name, "Test_30");
        assert_eq!(slice_for(2).unwrap().name, "Test_5");
        assert!(slice_for(1).is_none());
        assert!(slice_for(31).is_none());
        let labels: Vec<String> = EARLY_SLICES.iter().map(SliceSpec::range_label).collect();
        assert_eq!(labels, ["2 – 5", "6 – 10", "11 – 15", "16 – 20", "21 – 25", "26 – 30"]);
    }

    #[test]
    fn slices_are_disjoint_and_cover_2_to_30() {
        for n in 0..40 {
            let hits = EARLY_SLICES.iter().filter(|s| s.contains(n)).count();
            assert_eq!(hits, usize::from((2..=30).contains(&n)), "n = {n}");
        }
    }

    #[test]
    fn excluded_and_assigned() {
        let evs: Vec<Event> = [1, 3, 12, 30, 31].into_iter().map(event).collect();
        let s = early_slices(&evs);
        let counts: Vec<usize> = s.iter().map(|(_, v)| v.len()).collect();
        assert_eq!(counts, [1, 0, 1, 0, 0, 1]);
        assert!(s.iter().flat_map(|(_, v)| v).all(|e| e.posts[0].is_source));
    }
}
