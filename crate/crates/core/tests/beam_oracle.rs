mod common;

use common::beam::{exhaustive, Bigram};
use ecmt::nmt::{beam_search, greedy, BeamConfig};
use ecmt::rng::seeded;

#[test]
fn wide_beam_finds_exhaustive_optimum() {
    let mut rng = seeded(2024);
    for _ in 0..50 {
        let m = Bigram::random(&mut rng);
        let (oracle, score) = exhaustive(&m, 3);
        let cfg = BeamConfig { width: 64, max_len: 3, eos: 0, banned: vec![] };
        let h = beam_search(&m, &cfg).unwrap();
        assert_eq!(h.tokens, oracle);
        assert!((h.score() - score).abs() < 1e-12);
    }
}

#[test]
fn width_one_matches_greedy_and_is_deterministic() {
    let mut rng = seeded(7);
    for _ in 0..50 {
        let m = Bigram::random(&mut rng);
        let cfg = BeamConfig { width: 1, max_len: 8, eos: 0, banned: vec![] };
        let b = beam_search(&m, &cfg).unwrap();
        assert_eq!(b, greedy(&m, &cfg).unwrap());
        assert_eq!(b, beam_search(&m, &cfg).unwrap());
    }
}

#[test]
fn log_prob_never_increases_along_hypothesis() {
    let mut rng = seeded(8);
    let m = Bigram::random(&mut rng);
    let cfg = BeamConfig { width: 12, max_len: 10, eos: 0, banned: vec![] };
    let h = beam_search(&m, &cfg).unwrap();
    let prefix: Vec<f64> = (1..=h.tokens.len()).map(|n| m.log_prob(&h.tokens[..n])).collect();
    assert!(prefix.windows(2).all(|w| w[1] <= w[0]));
    assert!((prefix.last().unwrap() - h.log_prob).abs() < 1e-12);
}
