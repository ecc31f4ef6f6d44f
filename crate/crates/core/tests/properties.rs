use proptest::prelude::*;
use vf_core::metrics::evaluate_unique;
use vf_core::split::{observed_count, BiasSetup};
use vf_core::variant::Decoded;
use vf_core::{score, split, SplitSpec, SystemVariantSet, TokenCodec, UniqueVariantLog, Variant};

const LABELS: [&str; 5] = ["a", "b", "c", "d", "e"];

fn variant_strategy(max_len: usize) -> impl Strategy<Value = Variant> {
    prop::collection::vec(0usize..LABELS.len(), 1..=max_len)
        .prop_map(|ids| Variant::new(ids.into_iter().map(|i| LABELS[i])).unwrap())
}

fn log_strategy(min: usize, max: usize) -> impl Strategy<Value = UniqueVariantLog> {
    prop::collection::btree_set(variant_strategy(8), min..max).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #[test]
    fn ratio_split_partitions(log in log_strategy(3, 60), ratio_tenths in 1u32..8, seed in any::<u64>()) {
        let vs = SystemVariantSet::from_variants(log);
        let ratio = ratio_tenths as f64 / 10.0;
        let want = observed_count(vs.len(), ratio).unwrap();
        prop_assume!(want > 0 && want < vs.len());
        let r = split(&vs, &SplitSpec::ratio(ratio, seed), "s").unwrap();
        prop_assert_eq!(r.observed.len(), want);
        prop_assert_eq!(r.observed.len() + r.heldout.len(), vs.len());
        prop_assert!(r.observed.intersection(&r.heldout).is_empty());
        prop_assert_eq!(r.observed.union(&r.heldout), vs.variants.clone());
        prop_assert_eq!(r.observed.max_len(), vs.variants.max_len());
        let again = split(&vs, &SplitSpec::ratio(ratio, seed), "s").unwrap();
        prop_assert_eq!(again.observed, r.observed);
    }

    #[test]
    fn observed_count_is_round_half_up(n in 1usize..5000, ratio_tenths in 1u32..10) {
        let got = observed_count(n, ratio_tenths as f64 / 10.0).unwrap();
        let exact_twice = 2 * n * ratio_tenths as usize;
        prop_assert_eq!(got, (exact_twice + 10) / 20);
    }

    #[test]
    fn bias_splits_order_by_length(log in log_strategy(10, 60), seed in any::<u64>(), which in 0usize..2) {
        let vs = SystemVariantSet::from_variants(log);
        let setup = [BiasSetup::B1, BiasSetup::B2][which];
        let r = split(&vs, &SplitSpec::bias(setup, seed), "s").unwrap();
        let share = observed_count(vs.len(), 0.7).unwrap();
        // The shortest-first setup adds a longest variant on top of its share
        // when none made the cut.
        let added = usize::from(setup == BiasSetup::B1 && r.observed.len() == share + 1);
        prop_assert_eq!(r.observed.len(), share + added);
        prop_assert_eq!(r.observed.len() + r.heldout.len(), vs.len());
        prop_assert!(r.observed.intersection(&r.heldout).is_empty());
        prop_assert_eq!(r.observed.max_len(), vs.variants.max_len());
        let mu = vs.variants.max_len().unwrap();
        let others: Vec<usize> = r.observed.iter().map(Variant::len).filter(|&l| l != mu).collect();
        let out_of_order = match (setup, others.iter().max(), others.iter().min()) {
            (BiasSetup::B1, Some(&longest), _) => r.heldout.iter().filter(|v| v.len() < longest).count(),
            (BiasSetup::B2, _, Some(&shortest)) => r.heldout.iter().filter(|v| v.len() > shortest).count(),
            _ => 0,
        };
        prop_assert!(out_of_order == 0, "{} out of order", out_of_order);
    }

    #[test]
    fn codec_round_trip(log in log_strategy(1, 20)) {
        let codec = TokenCodec::from_log(&log).unwrap();
        for v in log.iter() {
            let tokens = codec.encode(v).unwrap();
            prop_assert_eq!(tokens.len(), codec.width());
            prop_assert!(tokens.iter().all(|&t| (t as usize) < codec.vocab_size()));
            prop_assert_eq!(codec.decode(&tokens), Decoded::Variant(v.clone()));
        }
    }

    #[test]
    fn metrics_invariants(
        system in log_strategy(2, 40),
        extra in log_strategy(0, 10),
        pick in prop::collection::vec(any::<bool>(), 40),
        held in prop::collection::vec(any::<bool>(), 40),
    ) {
        let vs = SystemVariantSet::from_variants(system.clone());
        let mut heldout: UniqueVariantLog = system.iter().zip(&held).filter(|(_, h)| **h).map(|(v, _)| v.clone()).collect();
        if heldout.is_empty() {
            heldout.insert(system.iter().next().unwrap().clone());
        }
        let mut sample: UniqueVariantLog = system.iter().zip(&pick).filter(|(_, p)| **p).map(|(v, _)| v.clone()).collect();
        let base = evaluate_unique(&sample, 100, 0, &vs, &heldout).unwrap();
        prop_assert!((0.0..=1.0).contains(&base.tp) && (0.0..=1.0).contains(&base.tp_u));
        prop_assert!(base.score >= 0.0 && base.score <= std::f64::consts::SQRT_2 + 1e-12);
        prop_assert!((base.score - score(base.tp, base.tp_u).unwrap()).abs() < 1e-15);

        // Variants outside the language change neither tp nor tp_u.
        for v in extra.iter().filter(|v| !system.contains(v)) {
            sample.insert(v.clone());
        }
        let noisy = evaluate_unique(&sample, 100, 0, &vs, &heldout).unwrap();
        prop_assert_eq!((noisy.tp, noisy.tp_u), (base.tp, base.tp_u));

        let full = evaluate_unique(&system, 100, 0, &vs, &heldout).unwrap();
        prop_assert!((full.score - std::f64::consts::SQRT_2).abs() < 1e-12);
        prop_assert!(full.score >= base.score);
    }

    #[test]
    fn score_is_symmetric_and_bounded(tp in 0.0f64..=1.0, tp_u in 0.0f64..=1.0) {
        let s = score(tp, tp_u).unwrap();
        prop_assert_eq!(s, score(tp_u, tp).unwrap());
        prop_assert!((0.0..=std::f64::consts::SQRT_2).contains(&s));
    }
}
