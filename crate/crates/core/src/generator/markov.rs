use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DiscriminatorScore;
use crate::error::{Error, Result};
use crate::variant::{TokenCodec, UniqueVariantLog, Variant, EOS, PAD};

/// n-gram model over token ids. The next token is conditioned on the
/// previous `order` tokens, left-padded with PAD at the start of a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    codec: TokenCodec,
    order: usize,
    smoothing: f64,
    /// Sorted by context; counts are indexed by token id.
    table: Vec<(Vec<u32>, Vec<u64>)>,
}

impl MarkovModel {
    pub fn train(log: &UniqueVariantLog, order: usize, smoothing: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Generator("markov order must be at least 1".into()));
        }
        if !(smoothing.is_finite() && smoothing >= 0.0) {
            return Err(Error::Generator(format!(
                "smoothing must be non-negative, got {smoothing}"
            )));
        }
        let codec = TokenCodec::from_log(log)?;
        if order > codec.max_len() {
            return Err(Error::Generator(format!(
                "markov order {order} exceeds the longest variant ({})",
                codec.max_len()
            )));
        }
        let vocab = codec.vocab_size();
        let mut counts: BTreeMap<Vec<u32>, Vec<u64>> = BTreeMap::new();
        for v in log.iter() {
            let mut ctx = vec![PAD; order];
            for tok in codec.encode(v)? {
                counts.entry(ctx.clone()).or_insert_with(|| vec![0; vocab])[tok as usize] += 1;
                if tok == EOS {
                    break;
                }
                ctx.remove(0);
                ctx.push(tok);
            }
        }
        Ok(MarkovModel {
            codec,
            order,
            smoothing,
            table: counts.into_iter().collect(),
        })
    }

    pub fn codec(&self) -> &TokenCodec {
        &self.codec
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn counts(&self, ctx: &[u32]) -> Option<&[u64]> {
        self.table
            .binary_search_by(|(c, _)| c.as_slice().cmp(ctx))
            .ok()
            .map(|i| self.table[i].1.as_slice())
    }

    /// Next-token weights; PAD never receives mass.
    fn weights(&self, ctx: &[u32]) -> Vec<f64> {
        let vocab = self.codec.vocab_size();
        let counts = self.counts(ctx);
        (0..vocab)
            .map(|t| {
                if t == PAD as usize {
                    0.0
                } else {
                    counts.map_or(0, |c| c[t]) as f64 + self.smoothing
                }
            })
            .collect()
    }

    pub fn sample_tokens(&self, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let width = self.codec.width();
        let mut out = Vec::with_capacity(width);
        let mut ctx = vec![PAD; self.order];
        while out.len() < width {
            let w = self.weights(&ctx);
            let total: f64 = w.iter().sum();
            // An unseen context without smoothing: nothing can follow.
            if total <= 0.0 {
                break;
            }
            let mut u = rng.gen::<f64>() * total;
            let mut tok = w.iter().rposition(|&x| x > 0.0).unwrap_or(EOS as usize);
            for (t, &x) in w.iter().enumerate() {
                if u < x {
                    tok = t;
                    break;
                }
                u -= x;
            }
            out.push(tok as u32);
            if tok as u32 == EOS {
                break;
            }
            ctx.remove(0);
            ctx.push(tok as u32);
        }
        out.resize(width, PAD);
        out
    }

    /// The baseline has no discriminator; every variant scores 0.5.
    pub fn discriminator_score(&self, v: &Variant) -> Result<DiscriminatorScore> {
        self.codec.encode(v)?;
        Ok(DiscriminatorScore::new(0.5))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::SeedableRng;

    use super::*;
    use crate::variant;

    fn support(m: &MarkovModel, draws: usize) -> BTreeSet<Option<Variant>> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        (0..draws)
            .map(|_| m.codec.decode(&m.sample_tokens(&mut rng)).into_variant())
            .collect()
    }

    #[test]
    fn order_two_toy_support() {
        let log: UniqueVariantLog = [variant!["a", "b"], variant!["b", "a"]]
            .into_iter()
            .collect();
        let m = MarkovModel::train(&log, 2, 0.0).unwrap();
        let s = support(&m, 2000);
        let expected: BTreeSet<Option<Variant>> = log.iter().cloned().map(Some).collect();
        assert_eq!(s, expected);
    }

    #[test]
    fn full_context_memorizes() {
        let log: UniqueVariantLog = [
            variant!["a", "b", "c"],
            variant!["a", "c", "b"],
            variant!["c", "b"],
            variant!["b", "b", "a"],
        ]
        .into_iter()
        .collect();
        let m = MarkovModel::train(&log, 3, 0.0).unwrap();
        let s: BTreeSet<Variant> = support(&m, 5000).into_iter().flatten().collect();
        assert_eq!(s, log.iter().cloned().collect());
    }

    #[test]
    fn smoothing_enlarges_support() {
        let log: UniqueVariantLog = [variant!["a", "b", "c"], variant!["a", "c", "b"]]
            .into_iter()
            .collect();
        let plain = support(&MarkovModel::train(&log, 1, 0.0).unwrap(), 5000);
        let smooth = support(&MarkovModel::train(&log, 1, 0.5).unwrap(), 5000);
        assert!(plain.is_subset(&smooth));
        assert!(smooth.len() > plain.len());
    }

    #[test]
    fn unsmoothed_samples_use_observed_grams() {
        let log: UniqueVariantLog = [
            variant!["a", "b", "c", "d"],
            variant!["b", "c", "a"],
            variant!["d", "a", "b"],
        ]
        .into_iter()
        .collect();
        for order in 1..=3 {
            let m = MarkovModel::train(&log, order, 0.0).unwrap();
            let grams: BTreeSet<Vec<String>> = log
                .iter()
                .flat_map(|v| {
                    v.events()
                        .windows(order)
                        .map(|w| w.to_vec())
                        .collect::<Vec<_>>()
                })
                .collect();
            for v in support(&m, 2000).into_iter().flatten() {
                for w in v.events().windows(order) {
                    assert!(grams.contains(w), "order {order}: {v:?}");
                }
            }
        }
    }

    #[test]
    fn order_bounds() {
        let log: UniqueVariantLog = [variant!["a", "b"], variant!["b"]].into_iter().collect();
        assert!(MarkovModel::train(&log, 0, 0.0).is_err());
        assert!(MarkovModel::train(&log, 3, 0.0).is_err());
        assert!(MarkovModel::train(&log, 1, -1.0).is_err());
    }
}
