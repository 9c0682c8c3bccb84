use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{forward_event, init_params, Mode, ModelConfig, ModelInput};
use crate::pheme::Label;
use crate::tensor::{grad_check, GradCheckReport, ParamStore};
use crate::text::UNK_ID;

/// Tiny double-precision model and event for a finite-difference check of
/// the whole network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelGradCheck {
    pub mode: Mode,
    pub hidden: usize,
    pub embed: usize,
    pub vocab: usize,
    pub posts: usize,
    pub tokens_per_post: usize,
    pub step: f64,
    pub seed: u64,
    /// When set, every parameter entry is redrawn uniform in `±scale`,
    /// biases included; otherwise the model's own initialisation is used.
    pub param_scale: Option<f64>,
}

impl Default for ModelGradCheck {
    fn default() -> Self {
        Self {
            mode: Mode::MHA,
            hidden: 4,
            embed: 4,
            vocab: 10,
            posts: 2,
            tokens_per_post: 3,
            step: 1e-5,
            seed: 0,
            param_scale: None,
        }
    }
}

impl ModelGradCheck {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: self.vocab,
            embed_dim: self.embed,
            hidden_dim: self.hidden,
            dropout_rate: 0.0,
            max_posts_per_event: self.posts.max(1),
            max_tokens_per_post: self.tokens_per_post.max(1),
            mode: self.mode,
            ..ModelConfig::default()
        }
    }

    /// Seeded event of non-special token ids, labelled rumor.
    pub fn input(&self) -> ModelInput {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        let lo = (UNK_ID + 1).min(self.vocab.saturating_sub(1));
        let tokens: Vec<Vec<usize>> = (0..self.posts)
            .map(|_| (0..self.tokens_per_post).map(|_| rng.gen_range(lo..self.vocab)).collect())
            .collect();
        ModelInput {
            token_mask: tokens.iter().map(|t| vec![true; t.len()]).collect(),
            post_mask: vec![true; tokens.len()],
            tokens,
        }
    }

    pub fn params(&self, config: &ModelConfig) -> Result<ParamStore<f64>> {
        let mut params: ParamStore<f64> = init_params(config, self.seed)?;
        let Some(s) = self.param_scale else {
            return Ok(params);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for i in 0..params.len() {
            for v in params.by_index_mut(i).data_mut() {
                *v = rng.gen_range(-s..=s);
            }
        }
        Ok(params)
    }

    /// Checks `L_event + L_post` (just `L_event` without a post head) over
    /// every parameter entry.
    pub fn run(&self) -> Result<GradCheckReport> {
        self.run_with(|_| {})
    }

    /// [`run`](Self::run) with further adjustments to the model configuration.
    pub fn run_with(&self, adjust: impl FnOnce(&mut ModelConfig)) -> Result<GradCheckReport> {
        let mut config = self.model_config();
        adjust(&mut config);
        let params = self.params(&config)?;
        let input = self.input();
        let objective = |p: &ParamStore<f64>| {
            let mut fr = forward_event(p, &config, &input, None)?;
            let l = fr.losses(Label::Rumor)?;
            let total = match l.post {
                Some(post) => fr.tape.add(l.event, post)?,
                None => l.event,
            };
            let value = fr.tape.scalar(total);
            Ok((value, fr.tape.backward(total)?))
        };
        grad_check(objective, &params, self.step)
    }
}
