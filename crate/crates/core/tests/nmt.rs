use ecmt::game::{Agent, AgentConfig};
use ecmt::nmt::{
    reg_penalty, AdapterConfig, ModelConfig, RegKind, RegularizerConfig, Seq2SeqArch, TransferScope,
    TranslationModel,
};
use ecmt::nn::{check_param_grads, Adam, AdamConfig, Graph, ParamStore};
use ecmt::rng::{seeded, RunRng};
use ecmt::textdata::{Padded, EOS, NUM_RESERVED};
use rand::Rng;

fn tiny_config(vocab: usize, adapter: bool) -> ModelConfig {
    ModelConfig {
        embed_dim: 4,
        hidden_dim: 5,
        adapter: adapter.then_some(AdapterConfig { bottleneck: 3, dropout: 0.0 }),
        ..ModelConfig::new(vocab, vocab)
    }
}

fn tiny_agent(vocab: usize, rng: &mut RunRng) -> Agent {
    let cfg = AgentConfig {
        embed_dim: 4,
        hidden_dim: 5,
        ..AgentConfig::new(vocab, 6, 4)
    };
    Agent::new(cfg, rng).unwrap()
}

fn random_sentences(rng: &mut RunRng, n: usize, vocab: usize, max: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=max);
            (0..len).map(|_| rng.random_range(NUM_RESERVED..vocab)).collect()
        })
        .collect()
}

fn padded(rows: &[Vec<usize>]) -> Padded {
    let with_eos: Vec<Vec<usize>> = rows.iter().map(|r| [r.as_slice(), &[EOS]].concat()).collect();
    let refs: Vec<&[usize]> = with_eos.iter().map(Vec::as_slice).collect();
    Padded::new(&refs)
}

fn perturbed(store: &ParamStore<f64>, rng: &mut RunRng, scale: f64) -> ParamStore<f64> {
    let mut s = store.clone();
    for (_, t) in s.iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-scale..scale));
    }
    s
}

#[test]
fn assembly_wires_listener_to_encoder_and_speaker_to_decoder() {
    let mut rng = seeded(1);
    let src = tiny_agent(9, &mut rng);
    let tgt = tiny_agent(9, &mut rng);
    let m = TranslationModel::assemble(&src, &tgt, tiny_config(9, true), &mut rng).unwrap();
    let same = |a: &str, agent: &Agent, b: &str| {
        assert_eq!(m.params.get(a).unwrap().data(), agent.params.get(b).unwrap().data(), "{a}");
    };
    same("encoder.embed.table", &src, "listener.embed.table");
    same("decoder.embed.table", &tgt, "speaker.embed.table");
    for n in m.arch.enc_gru.param_names() {
        same(&n, &src, &n.replace("encoder", "listener"));
    }
    for n in m.arch.dec_gru.param_names() {
        same(&n, &tgt, &n.replace("decoder", "speaker"));
    }
    assert!(m.transferred());
    assert_eq!(m.drift().unwrap(), 0.0);
    assert!(!m.w_star.contains("adapter.down.weight"));
    assert!(m.w_star.names().all(|n| !n.starts_with("image_proj")));

    let rnn = ModelConfig {
        scope: TransferScope::RnnOnly,
        ..tiny_config(9, true)
    };
    let m = TranslationModel::assemble(&src, &tgt, rnn, &mut rng).unwrap();
    assert!(m.w_star.names().all(|n| n.contains(".gru.")));
    assert_eq!(m.w_star.len(), 8);
}

#[test]
fn assembly_rejects_vocabulary_mismatch() {
    let mut rng = seeded(2);
    let src = tiny_agent(9, &mut rng);
    let tgt = tiny_agent(10, &mut rng);
    assert!(TranslationModel::assemble(&src, &tgt, tiny_config(9, true), &mut rng).is_err());
}

#[test]
fn fresh_adapter_is_the_identity() {
    let mut rng = seeded(3);
    let m = TranslationModel::random(tiny_config(11, true), &mut rng).unwrap();
    let plain = Seq2SeqArch::new(tiny_config(11, false)).unwrap();
    let src = padded(&random_sentences(&mut rng, 6, 11, 7));
    let tgt = padded(&random_sentences(&mut rng, 6, 11, 7));
    let run = |arch: &Seq2SeqArch| {
        let mut g = Graph::eval(&m.params);
        let ls = arch.logits(&mut g, &src, &tgt).unwrap();
        ls.iter().flat_map(|&l| g.tape.value(l).to_vec()).collect::<Vec<f32>>()
    };
    assert_eq!(run(&m.arch), run(&plain));
}

#[test]
fn untrained_loss_is_near_uniform() {
    let mut rng = seeded(4);
    let m = TranslationModel::random(ModelConfig::new(64, 64), &mut rng).unwrap();
    let src = padded(&random_sentences(&mut rng, 16, 64, 12));
    let tgt = padded(&random_sentences(&mut rng, 16, 64, 12));
    let mut g = Graph::eval(&m.params);
    let l = m.arch.sequence_loss(&mut g, &src, &tgt).unwrap();
    let loss = f64::from(g.tape.scalar(l));
    let uniform = 64f64.ln();
    assert!((loss - uniform).abs() < 0.05 * uniform, "{loss} vs {uniform}");
}

#[test]
fn sequence_loss_is_mean_token_negative_log_likelihood() {
    let mut rng = seeded(5);
    let arch = Seq2SeqArch::new(tiny_config(8, true)).unwrap();
    let params = perturbed(&arch.init_params::<f64>(&mut rng), &mut rng, 0.5);
    let src = padded(&random_sentences(&mut rng, 5, 8, 6));
    let tgt = padded(&random_sentences(&mut rng, 5, 8, 6));

    let mut g = Graph::eval(&params);
    let logits = arch.logits(&mut g, &src, &tgt).unwrap();
    let (mut nll, mut n) = (0.0, 0);
    for (t, &l) in logits.iter().enumerate() {
        for (r, row) in g.tape.value(l).chunks(8).enumerate() {
            if tgt.is_pad(r, t) {
                continue;
            }
            let z = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            nll += z - row[tgt.ids[r * tgt.width + t]];
            n += 1;
        }
    }
    let mut g = Graph::eval(&params);
    let l = arch.sequence_loss(&mut g, &src, &tgt).unwrap();
    assert!((g.tape.scalar(l) - nll / n as f64).abs() < 1e-12);
}

#[test]
fn pad_extension_leaves_loss_unchanged() {
    let mut rng = seeded(6);
    let m = TranslationModel::random(tiny_config(10, true), &mut rng).unwrap();
    let src = padded(&random_sentences(&mut rng, 4, 10, 5));
    let tgt = padded(&random_sentences(&mut rng, 4, 10, 5));
    let widen = |p: &Padded, extra: usize| {
        let w = p.width + extra;
        let mut ids = vec![0; p.rows() * w];
        for r in 0..p.rows() {
            ids[r * w..r * w + p.width].copy_from_slice(&p.ids[r * p.width..(r + 1) * p.width]);
        }
        Padded {
            ids,
            lengths: p.lengths.clone(),
            width: w,
        }
    };
    let loss = |s: &Padded, t: &Padded| {
        let mut g = Graph::eval(&m.params);
        let l = m.arch.sequence_loss(&mut g, s, t).unwrap();
        f64::from(g.tape.scalar(l))
    };
    let base = loss(&src, &tgt);
    assert!((loss(&widen(&src, 3), &widen(&tgt, 4)) - base).abs() < 1e-6);
}

#[test]
fn loss_with_regularizer_matches_finite_differences() {
    let mut rng = seeded(7);
    let arch = Seq2SeqArch::new(tiny_config(7, true)).unwrap();
    let w_star = arch.init_params::<f64>(&mut rng);
    let params = perturbed(&w_star, &mut rng, 0.3);
    let w_star = w_star.snapshot(|n| n.contains(".gru.") || n.contains(".embed."));
    let reg = RegularizerConfig {
        kind: RegKind::RegA,
        alpha: 0.7,
        lambda: 0.9,
    };
    let src = padded(&random_sentences(&mut rng, 3, 7, 4));
    let tgt = padded(&random_sentences(&mut rng, 3, 7, 4));
    let report = check_param_grads(
        &params,
        |g| {
            let seq = arch.sequence_loss(g, &src, &tgt)?;
            let r = reg_penalty(g, &reg, &w_star, 3)?.expect("penalty active");
            g.tape.add(seq, r)
        },
        1e-5,
        None,
        &mut rng,
    )
    .unwrap();
    assert!(report.max_rel_dev < 1e-4, "{report:?}");
}

#[test]
fn regularizer_gradient_skips_untransferred_tensors() {
    let mut rng = seeded(8);
    let src = tiny_agent(9, &mut rng);
    let tgt = tiny_agent(9, &mut rng);
    let mut m = TranslationModel::assemble(&src, &tgt, tiny_config(9, true), &mut rng).unwrap();
    for (_, t) in m.params.iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += 0.1);
    }
    let mut g = Graph::eval(&m.params);
    let r = reg_penalty(&mut g, &RegularizerConfig::default(), &m.w_star, 0)
        .unwrap()
        .unwrap();
    let grads = g.backward(r).unwrap();
    for (name, grad) in &grads {
        let nonzero = grad.iter().any(|v| *v != 0.0);
        assert_eq!(nonzero, m.w_star.contains(name), "{name}");
    }
    assert!(grads.keys().all(|n| !n.starts_with("adapter")));
}

#[test]
fn huge_penalty_pins_transferred_weights() {
    let mut rng = seeded(9);
    let src = tiny_agent(9, &mut rng);
    let tgt = tiny_agent(9, &mut rng);
    let mut m = TranslationModel::assemble(&src, &tgt, tiny_config(9, true), &mut rng).unwrap();
    let reg = RegularizerConfig {
        kind: RegKind::Na,
        alpha: 1e6,
        lambda: 0.998,
    };
    let s = padded(&random_sentences(&mut rng, 8, 9, 5));
    let t = padded(&random_sentences(&mut rng, 8, 9, 5));
    let mut adam = Adam::new(AdamConfig::default());
    for k in 0..100 {
        let grads = {
            let mut g = Graph::train(&m.params, &mut rng, 0.2);
            let seq = m.arch.sequence_loss(&mut g, &s, &t).unwrap();
            let r = reg_penalty(&mut g, &reg, &m.w_star, k).unwrap().unwrap();
            let total = g.tape.add(seq, r).unwrap();
            g.backward(total).unwrap()
        };
        m.params.accumulate_grads(&grads).unwrap();
        adam.step(&mut m.params).unwrap();
    }
    let mut worst = 0f32;
    for (name, w) in m.w_star.iter() {
        let cur = m.params.get(name).unwrap();
        for (a, b) in cur.data().iter().zip(w.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-2, "max drift {worst}");
}

#[test]
fn width_one_beam_matches_greedy_translation() {
    let mut rng = seeded(10);
    let mut m = TranslationModel::random(tiny_config(12, true), &mut rng).unwrap();
    for (_, t) in m.params.iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v *= 6.0);
    }
    for s in random_sentences(&mut rng, 10, 12, 6) {
        let greedy = m.greedy_translate(std::slice::from_ref(&s), 9).unwrap().pop().unwrap();
        assert_eq!(m.beam_translate(&s, 1, 9).unwrap(), greedy);
        assert!(m.beam_translate(&s, 4, 9).unwrap().len() <= 9);
    }
}
