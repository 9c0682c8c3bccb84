use crate::model::ModelConfig;
use crate::pheme::{Event, Label};
use crate::text::{normalize, TokenSeq, Vocabulary, PAD_ID};

/// An event after normalisation, encoding and reply truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedEvent {
    pub id: String,
    pub label: Label,
    /// Source first, then replies in time order.
    pub posts: Vec<TokenSeq>,
}

impl EncodedEvent {
    /// Normalises and encodes at most `max_posts_per_event` posts.
    pub fn encode(event: &Event, vocab: &Vocabulary, config: &ModelConfig) -> Self {
        Self {
            id: event.id.clone(),
            label: event.label,
            posts: event
                .posts
                .iter()
                .take(config.max_posts_per_event)
                .map(|p| vocab.encode(&normalize(&p.text), config.max_tokens_per_post))
                .collect(),
        }
    }

    /// One single-post event per post, each inheriting the event label.
    pub fn split_posts(&self) -> Vec<EncodedEvent> {
        self.posts
            .iter()
            .enumerate()
            .map(|(i, p)| EncodedEvent {
                id: format!("{}#{i}", self.id),
                label: self.label,
                posts: vec![p.clone()],
            })
            .collect()
    }
}

/// Token ids with token- and post-level masks. Masked entries are padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelInput {
    pub tokens: Vec<Vec<usize>>,
    pub token_mask: Vec<Vec<bool>>,
    pub post_mask: Vec<bool>,
}

impl ModelInput {
    pub fn from_encoded(e: &EncodedEvent) -> Self {
        Self {
            tokens: e.posts.iter().map(|p| p.ids.clone()).collect(),
            token_mask: e.posts.iter().map(|p| vec![true; p.ids.len()]).collect(),
            post_mask: vec![true; e.posts.len()],
        }
    }

    /// Pads every post to `tokens_per_post` tokens and the event to
    /// `posts` posts with PAD ids and false masks. Never shortens.
    pub fn padded(&self, tokens_per_post: usize, posts: usize) -> Self {
        let mut out = self.clone();
        for (toks, mask) in out.tokens.iter_mut().zip(out.token_mask.iter_mut()) {
            while toks.len() < tokens_per_post {
                toks.push(PAD_ID);
                mask.push(false);
            }
        }
        let width = tokens_per_post.max(1);
        while out.tokens.len() < posts {
            out.tokens.push(vec![PAD_ID; width]);
            out.token_mask.push(vec![false; width]);
            out.post_mask.push(false);
        }
        out
    }

    pub fn num_real_posts(&self) -> usize {
        self.post_mask.iter().filter(|&&m| m).count()
    }
}
