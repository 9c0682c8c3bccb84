use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{DEFAULT_MAX_TOKENS, DEFAULT_MAX_VOCAB};

/// Architecture and training variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Hierarchical, event loss only.
    #[serde(rename = "H")]
    H,
    /// Hierarchical with the auxiliary post loss at full weight.
    #[serde(rename = "MH")]
    MH,
    /// Hierarchical with the post-branch step attenuated by β(epoch).
    #[serde(rename = "MHA")]
    MHA,
    /// One BiLSTM over the concatenated tokens of every post.
    #[serde(rename = "FLAT")]
    Flat,
    /// Each post scored as its own single-post event.
    #[serde(rename = "POST_ONLY")]
    PostOnly,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::H, Mode::MH, Mode::MHA, Mode::Flat, Mode::PostOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::H => "H",
            Mode::MH => "MH",
            Mode::MHA => "MHA",
            Mode::Flat => "FLAT",
            Mode::PostOnly => "POST_ONLY",
        }
    }

    /// Whether the post-head loss drives a second optimizer branch.
    pub fn multiloss(self) -> bool {
        matches!(self, Mode::MH | Mode::MHA)
    }

    pub fn hierarchical(self) -> bool {
        self != Mode::Flat
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "H" => Ok(Mode::H),
            "MH" => Ok(Mode::MH),
            "MHA" => Ok(Mode::MHA),
            "FLAT" => Ok(Mode::Flat),
            "POST_ONLY" | "POSTONLY" => Ok(Mode::PostOnly),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Which posts feed the auxiliary post classifier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostHead {
    /// Only the final post in time order.
    #[default]
    Last,
    /// Every post; the post loss is the mean over posts.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub post_layers: usize,
    pub event_layers: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub max_posts_per_event: usize,
    pub max_tokens_per_post: usize,
    pub mode: Mode,
    #[serde(default)]
    pub post_head: PostHead,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: DEFAULT_MAX_VOCAB + 2,
            embed_dim: 128,
            hidden_dim: 256,
            post_layers: 2,
            event_layers: 1,
            dropout_rate: 0.5,
            num_classes: 2,
            max_posts_per_event: 25,
            max_tokens_per_post: DEFAULT_MAX_TOKENS,
            mode: Mode::MHA,
            post_head: PostHead::Last,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("post_layers", self.post_layers),
            ("event_layers", self.event_layers),
            ("max_posts_per_event", self.max_posts_per_event),
            ("max_tokens_per_post", self.max_tokens_per_post),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.vocab_size > DEFAULT_MAX_VOCAB + 2 {
            return Err(Error::Config(format!(
                "vocab_size {} exceeds {}",
                self.vocab_size,
                DEFAULT_MAX_VOCAB + 2
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate {} outside [0, 1)", self.dropout_rate)));
        }
        if self.num_classes != 2 {
            return Err(Error::Config("only binary classification is supported".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.hidden_dim, c.dropout_rate, c.vocab_size), (256, 0.5, 25_002));
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ModelConfig { hidden_dim: 0, ..Default::default() };
        assert!(c.validate().is_err());
        c.hidden_dim = 4;
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
        c.dropout_rate = 0.0;
        c.vocab_size = 30_000;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("XYZ".parse::<Mode>().is_err());
    }
}
