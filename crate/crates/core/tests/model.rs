use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumor_core::harness::ModelGradCheck;
use rumor_core::model::{
    classify, embed, encode_post, forward_event, init_params, loss, predict, EncodedEvent, Mode, ModelConfig,
    ModelInput, PostHead, CLF_EVENT_B, CLF_EVENT_W, CLF_POST_B, CLF_POST_W, EMBEDDING,
};
use rumor_core::pheme::Label;
use rumor_core::tensor::{ParamStore, Tape, Tensor};

fn small(mode: Mode) -> ModelConfig {
    ModelConfig {
        vocab_size: 12,
        embed_dim: 3,
        hidden_dim: 2,
        dropout_rate: 0.0,
        max_posts_per_event: 8,
        max_tokens_per_post: 6,
        mode,
        ..ModelConfig::default()
    }
}

fn input(posts: &[&[usize]]) -> ModelInput {
    ModelInput {
        tokens: posts.iter().map(|p| p.to_vec()).collect(),
        token_mask: posts.iter().map(|p| vec![true; p.len()]).collect(),
        post_mask: vec![true; posts.len()],
    }
}

fn random_input(rng: &mut ChaCha8Rng, vocab: usize, max_posts: usize, max_tokens: usize) -> ModelInput {
    let n = rng.gen_range(1..=max_posts);
    let posts: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..rng.gen_range(1..=max_tokens)).map(|_| rng.gen_range(2..vocab)).collect())
        .collect();
    let refs: Vec<&[usize]> = posts.iter().map(Vec::as_slice).collect();
    input(&refs)
}

fn set(p: &mut ParamStore<f64>, name: &str, data: Vec<f64>) {
    let t = p.get_mut(name).unwrap();
    let shape = t.shape().to_vec();
    *t = Tensor::new(shape, data).unwrap();
}

#[test]
fn pad_row_lookup_and_repeated_row_gradient() {
    let c = small(Mode::H);
    let p: ParamStore<f64> = init_params(&c, 1).unwrap();
    let mut tape = Tape::new(&p);
    let xs = embed(&mut tape, &[0]).unwrap();
    assert_eq!(tape.value(xs[0]), p.get(EMBEDDING).unwrap().row(0));

    let mut tape = Tape::new(&p);
    let xs = embed(&mut tape, &[2, 2]).unwrap();
    assert_eq!(tape.value(xs[0]), tape.value(xs[1]));
    let both = tape.add(xs[0], xs[1]).unwrap();
    let s = tape.sum(both);
    let g = tape.backward(s).unwrap().get(EMBEDDING).unwrap();
    for r in 0..c.vocab_size {
        let want = if r == 2 { 2.0 } else { 0.0 };
        assert!(g.row(r).iter().all(|&v| v == want), "row {r}: {:?}", g.row(r));
    }
    assert!(embed(&mut Tape::new(&p), &[]).is_err());
}

#[test]
fn encode_post_is_the_bilstm_over_embedded_tokens() {
    let c = small(Mode::H);
    let p: ParamStore<f64> = init_params(&c, 2).unwrap();
    let mut tape = Tape::new(&p);
    let single = encode_post(&mut tape, &[5], &[true], &c, &mut None).unwrap();
    assert_eq!(tape.shape(single), [2 * c.hidden_dim]);
    let a = encode_post(&mut tape, &[3, 4, 7], &[true; 3], &c, &mut None).unwrap();
    let b = encode_post(&mut tape, &[3, 4, 7], &[true; 3], &c, &mut None).unwrap();
    assert_eq!(tape.value(a), tape.value(b));
}

#[test]
fn identical_posts_give_identical_vectors() {
    let c = small(Mode::MHA);
    let p: ParamStore<f64> = init_params(&c, 3).unwrap();
    let fr = forward_event(&p, &c, &input(&[&[4, 5, 6], &[4, 5, 6]]), None).unwrap();
    assert_eq!(fr.tape.value(fr.post_vectors[0]), fr.tape.value(fr.post_vectors[1]));
}

#[test]
fn event_encoder_is_order_sensitive_and_accepts_one_post() {
    let c = small(Mode::H);
    let p: ParamStore<f64> = init_params(&c, 4).unwrap();
    let one = forward_event(&p, &c, &input(&[&[3, 4]]), None).unwrap();
    assert_eq!(one.event_logit_values().len(), 2);
    let ab = forward_event(&p, &c, &input(&[&[2, 3], &[4, 5], &[6, 7]]), None).unwrap();
    let ba = forward_event(&p, &c, &input(&[&[2, 3], &[6, 7], &[4, 5]]), None).unwrap();
    assert_ne!(ab.tape.value(ab.event_vector), ba.tape.value(ba.event_vector));
}

#[test]
fn classifier_hand_values() {
    let c = small(Mode::H);
    let mut p: ParamStore<f64> = init_params(&c, 5).unwrap();
    set(&mut p, CLF_EVENT_W, vec![0.0; 8]);
    set(&mut p, CLF_EVENT_B, vec![0.0, 0.0]);
    set(&mut p, CLF_POST_W, vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 2.0]);
    set(&mut p, CLF_POST_B, vec![0.25, -0.25]);
    let mut tape = Tape::new(&p);
    let unit = tape.constant(Tensor::vector(vec![0.0, 1.0, 0.0, 0.0]));
    let zero = classify(&mut tape, unit, CLF_EVENT_W, CLF_EVENT_B).unwrap();
    assert_eq!(tape.value(zero), [0.0, 0.0]);
    let hand = classify(&mut tape, unit, CLF_POST_W, CLF_POST_B).unwrap();
    assert_eq!(tape.value(hand), [2.25, 0.25]);

    set(&mut p, CLF_EVENT_B, vec![1.0, -1.0]);
    for posts in [vec![vec![3usize]], vec![vec![2, 9], vec![11, 4, 4]]] {
        let refs: Vec<&[usize]> = posts.iter().map(Vec::as_slice).collect();
        let pred = predict(&p, &c, &input(&refs)).unwrap();
        assert_eq!(pred.label, Label::Nonrumor);
    }
}

#[test]
fn zero_classifier_ties_to_nonrumor_deterministically() {
    let c = small(Mode::MHA);
    let mut p: ParamStore<f64> = init_params(&c, 6).unwrap();
    set(&mut p, CLF_EVENT_W, vec![0.0; 8]);
    let x = input(&[&[2, 3, 4], &[5]]);
    let a = predict(&p, &c, &x).unwrap();
    assert_eq!(a.p_rumor, 0.5);
    assert_eq!(a.label, Label::Nonrumor);
    let p2: ParamStore<f64> = init_params(&c, 6).unwrap();
    assert_eq!(predict(&p2, &c, &x).unwrap(), predict(&p2, &c, &x).unwrap());
}

#[test]
fn loss_hand_values_through_both_heads() {
    let c = small(Mode::MHA);
    let mut p: ParamStore<f64> = init_params(&c, 7).unwrap();
    set(&mut p, CLF_EVENT_W, vec![0.0; 8]);
    set(&mut p, CLF_POST_W, vec![0.0; 8]);
    let x = input(&[&[2, 3], &[4]]);
    let cases = [
        ([-20.0, 20.0], Label::Rumor, 0.0, 1e-15),
        ([0.0, 0.0], Label::Rumor, std::f64::consts::LN_2, 1e-15),
        ([20.0, -20.0], Label::Rumor, 40.0, 1e-12),
    ];
    for (bias, label, want, tol) in cases {
        set(&mut p, CLF_EVENT_B, bias.to_vec());
        set(&mut p, CLF_POST_B, bias.to_vec());
        let mut fr = forward_event(&p, &c, &x, None).unwrap();
        let (le, lp) = loss(&mut fr, label).unwrap();
        let lp = lp.unwrap();
        assert!(le.is_finite() && (le - want).abs() <= tol, "{bias:?}: {le}");
        assert!((lp - want).abs() <= tol, "{bias:?}: {lp}");
    }
}

#[test]
fn single_post_event_feeds_both_heads() {
    let c = small(Mode::MHA);
    let p: ParamStore<f64> = init_params(&c, 8).unwrap();
    let mut fr = forward_event(&p, &c, &input(&[&[3, 4, 5]]), None).unwrap();
    assert_eq!(fr.post_vectors.len(), 1);
    let l = fr.losses(Label::Rumor).unwrap();
    let grads = fr.tape.backward_multi(&[l.event, l.post.unwrap()]).unwrap();
    let post_w = grads[1].get("post.l0.fwd.W_ih").unwrap();
    let event_w = grads[0].get("post.l0.fwd.W_ih").unwrap();
    assert!(post_w.data().iter().any(|&v| v != 0.0));
    assert!(event_w.data().iter().any(|&v| v != 0.0));
}

#[test]
fn flat_mode_reads_the_concatenated_thread() {
    let c = small(Mode::Flat);
    let p: ParamStore<f64> = init_params(&c, 9).unwrap();
    let fr = forward_event(&p, &c, &input(&[&[2, 3], &[4], &[5, 6, 7]]), None).unwrap();
    assert!(fr.post_logits.is_none());
    assert!(fr.post_vectors.is_empty());

    let mut tape = Tape::new(&p);
    let v = encode_post(&mut tape, &[2, 3, 4, 5, 6, 7], &[true; 6], &c, &mut None).unwrap();
    let z = classify(&mut tape, v, CLF_EVENT_W, CLF_EVENT_B).unwrap();
    assert_eq!(fr.event_logit_values(), tape.value(z));
}

#[test]
fn post_only_mode_scores_single_posts() {
    let c = small(Mode::PostOnly);
    let p: ParamStore<f64> = init_params(&c, 10).unwrap();
    assert!(forward_event(&p, &c, &input(&[&[2], &[3]]), None).is_err());
    let event = EncodedEvent {
        id: "e".into(),
        label: Label::Rumor,
        posts: vec![
            rumor_core::text::TokenSeq { ids: vec![2, 3], original_len: 2 },
            rumor_core::text::TokenSeq { ids: vec![4], original_len: 1 },
        ],
    };
    let parts = event.split_posts();
    assert_eq!(parts.len(), 2);
    for part in &parts {
        assert_eq!(part.label, Label::Rumor);
        assert!(forward_event(&p, &c, &ModelInput::from_encoded(part), None).is_ok());
    }
}

#[test]
fn loss_gradients_reach_only_their_branch() {
    let c = small(Mode::MHA);
    let p: ParamStore<f64> = init_params(&c, 11).unwrap();
    let mut fr = forward_event(&p, &c, &input(&[&[2, 3], &[4, 5, 6]]), None).unwrap();
    let l = fr.losses(Label::Nonrumor).unwrap();
    let g = fr.tape.backward_multi(&[l.event, l.post.unwrap()]).unwrap();
    let nonzero = |t: Tensor<f64>| t.data().iter().any(|&v| v != 0.0);
    for name in p.names() {
        let ge = nonzero(g[0].get(name).unwrap());
        let gp = nonzero(g[1].get(name).unwrap());
        if name.starts_with("clf_post.") {
            assert!(!ge && gp, "{name}");
        } else if name.starts_with("event.") || name.starts_with("clf_event.") {
            assert!(ge && !gp, "{name}");
        } else if name.starts_with("post.") || name == EMBEDDING {
            assert!(ge && gp, "{name}");
        }
    }
}

#[test]
fn mean_post_head_averages_per_post_losses() {
    let mut c = small(Mode::MHA);
    c.post_head = PostHead::Mean;
    let mut p: ParamStore<f64> = init_params(&c, 12).unwrap();
    set(&mut p, CLF_POST_W, vec![0.0; 8]);
    set(&mut p, CLF_POST_B, vec![0.0, 0.0]);
    let mut fr = forward_event(&p, &c, &input(&[&[2], &[3], &[4]]), None).unwrap();
    assert_eq!(fr.all_post_logits.len(), 3);
    let (_, lp) = loss(&mut fr, Label::Rumor).unwrap();
    assert!((lp.unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn evaluation_forward_is_bit_identical() {
    let c = small(Mode::MHA);
    let p: ParamStore<f64> = init_params(&c, 13).unwrap();
    let x = random_input(&mut ChaCha8Rng::seed_from_u64(1), c.vocab_size, 5, 4);
    let a = forward_event(&p, &c, &x, None).unwrap();
    let b = forward_event(&p, &c, &x, None).unwrap();
    assert_eq!(a.event_logit_values(), b.event_logit_values());
    assert_eq!(a.post_logit_values(), b.post_logit_values());
}

#[test]
fn padding_leaves_logits_unchanged() {
    let c = ModelConfig {
        vocab_size: 40,
        embed_dim: 8,
        hidden_dim: 6,
        dropout_rate: 0.5,
        ..ModelConfig::default()
    };
    let p: ParamStore<f32> = init_params(&c, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let x = random_input(&mut rng, c.vocab_size, 6, 8);
        let padded = x.padded(12, 9);
        let a = forward_event(&p, &c, &x, None).unwrap();
        let b = forward_event(&p, &c, &padded, None).unwrap();
        for (u, v) in a.event_logit_values().iter().zip(b.event_logit_values()) {
            assert!((u - v).abs() <= 1e-6, "{u} vs {v}");
        }
        for (u, v) in a.post_logit_values().unwrap().iter().zip(b.post_logit_values().unwrap()) {
            assert!((u - v).abs() <= 1e-6, "{u} vs {v}");
        }
    }
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for mode in [Mode::MHA, Mode::Flat] {
        for head in [PostHead::Last, PostHead::Mean] {
            for seed in 0..6 {
                let check = ModelGradCheck {
                    mode,
                    seed,
                    ..ModelGradCheck::default()
                };
                let r = if head == PostHead::Mean {
                    check.run_with(|c| c.post_head = PostHead::Mean)
                } else {
                    check.run()
                }
                .unwrap();
                let above = r.max_rel_error_above(1e-5);
                assert!(above <= 1e-5, "{mode} {head:?} seed {seed}: rel {above:e}");
                assert!(r.max_abs_error <= 1e-9, "{mode} {head:?} seed {seed}: abs {:e}", r.max_abs_error);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_shapes_are_stable(seed in any::<u64>(), mode_ix in 0usize..4) {
        let mode = [Mode::H, Mode::MH, Mode::MHA, Mode::Flat][mode_ix];
        let c = small(mode);
        let p: ParamStore<f32> = init_params(&c, seed).unwrap();
        let x = random_input(&mut ChaCha8Rng::seed_from_u64(seed), c.vocab_size, c.max_posts_per_event, c.max_tokens_per_post);
        let fr = forward_event(&p, &c, &x, None).unwrap();
        prop_assert_eq!(fr.event_logit_values().len(), 2);
        if mode == Mode::Flat {
            prop_assert!(fr.post_vectors.is_empty());
        } else {
            prop_assert_eq!(fr.post_vectors.len(), x.tokens.len());
            prop_assert_eq!(fr.post_logit_values().unwrap().len(), 2);
        }
    }
}
