use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RunRng;

/// One referential-game instance: a target image and `k` distinct
/// confounders, laid out as a candidate list with the target at
/// `target_position`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameRound {
    pub target: usize,
    pub confounders: Vec<usize>,
    pub target_position: usize,
}

impl GameRound {
    /// Candidates in presentation order (`k + 1` entries).
    pub fn candidates(&self) -> Vec<usize> {
        let mut c = self.confounders.clone();
        c.insert(self.target_position, self.target);
        c
    }

    pub fn k(&self) -> usize {
        self.confounders.len()
    }
}

/// Draws `k` confounders uniformly without replacement from the `n - 1`
/// images other than `target`, and a uniform position for the target.
pub fn sample_confounders(rng: &mut RunRng, n: usize, k: usize, target: usize) -> Result<GameRound> {
    if target >= n || k >= n {
        return Err(Error::invalid(format!(
            "cannot draw {k} confounders for image {target} from {n} images"
        )));
    }
    let confounders = rand::seq::index::sample(rng, n - 1, k)
        .into_iter()
        .map(|j| if j >= target { j + 1 } else { j })
        .collect();
    let target_position = rng.random_range(0..=k);
    Ok(GameRound {
        target,
        confounders,
        target_position,
    })
}

/// A round with a uniformly drawn target.
pub fn sample_round(rng: &mut RunRng, n: usize, k: usize) -> Result<GameRound> {
    if n == 0 {
        return Err(Error::invalid("empty image set"));
    }
    let target = rng.random_range(0..n);
    sample_confounders(rng, n, k, target)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::rng::seeded;

    #[test]
    fn confounders_are_distinct_and_exclude_target() {
        let mut rng = seeded(1);
        for _ in 0..200 {
            let r = sample_round(&mut rng, 40, 31).unwrap();
            let set: HashSet<_> = r.confounders.iter().collect();
            assert_eq!(set.len(), 31);
            assert!(!set.contains(&r.target));
            assert_eq!(r.candidates()[r.target_position], r.target);
            assert_eq!(r.candidates().len(), 32);
        }
    }

    #[test]
    fn zero_confounders() {
        let mut rng = seeded(1);
        let r = sample_round(&mut rng, 1, 0).unwrap();
        assert_eq!(r.candidates(), vec![0]);
        assert!(sample_round(&mut rng, 3, 3).is_err());
    }

    #[test]
    fn confounder_frequency_is_uniform() {
        // Each non-target image appears with probability k / (n - 1) per
        // round; allow 3 binomial standard deviations plus a 1e-6 floor.
        let (n, k, rounds, target) = (50usize, 7usize, 100_000usize, 13usize);
        let mut rng = seeded(2024);
        let mut counts = vec![0usize; n];
        for _ in 0..rounds {
            for c in sample_confounders(&mut rng, n, k, target).unwrap().confounders {
                counts[c] += 1;
            }
        }
        let p = k as f64 / (n - 1) as f64;
        let sigma = (rounds as f64 * p * (1.0 - p)).sqrt();
        assert_eq!(counts[target], 0);
        for (i, &c) in counts.iter().enumerate().filter(|&(i, _)| i != target) {
            let dev = (c as f64 - rounds as f64 * p).abs();
            assert!(dev <= 3.0 * sigma + 1e-6, "image {i}: {c} vs {}", rounds as f64 * p);
        }
    }
}
