mod common;

use common::arb_instance;
use polybound::flow_bound::{flow_bound, suggest_permutation};
use polybound::oracle::{chain_bound, modular_bound, normal_bound, polymatroid_bound};
use polybound::random::{random_acyclic_instance, rng, GenConfig};
use polybound::classify;
use proptest::prelude::*;

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn bounds_are_ordered((inst, pi) in arb_instance(5, 5, 4).prop_flat_map(|i| { let n = i.n(); (Just(i), arb_perm(n)) })) {
        let modular = modular_bound(&inst).unwrap().bound;
        let normal = normal_bound(&inst).unwrap().bound;
        let poly = polymatroid_bound(&inst).unwrap().bound;
        let chain = chain_bound(&inst, &pi).unwrap();
        let fb = flow_bound(&inst, &pi, false).unwrap();
        prop_assert!(modular <= normal, "{} > {}", modular, normal);
        prop_assert!(normal <= poly, "{} > {}", normal, poly);
        prop_assert!(poly <= fb, "{} > {}", poly, fb);
        prop_assert!(fb <= chain, "{} > {}", fb, chain);
        let multi = flow_bound(&inst, &pi, true).unwrap();
        prop_assert!(poly <= multi && multi <= fb);
    }

    #[test]
    fn suggested_permutation_is_exact_on_simple(inst in arb_instance(5, 5, 1)) {
        let (pi, _) = suggest_permutation(&inst);
        prop_assert_eq!(flow_bound(&inst, &pi, false).unwrap(), polymatroid_bound(&inst).unwrap().bound);
    }

    #[test]
    fn suggested_permutation_is_exact_on_acyclic(seed in any::<u64>(), n in 1usize..=5, k in 1usize..=5) {
        let inst = random_acyclic_instance(&mut rng(seed), &GenConfig::general(n, k));
        prop_assert!(classify(&inst).is_acyclic);
        let (pi, _) = suggest_permutation(&inst);
        let poly = polymatroid_bound(&inst).unwrap().bound;
        prop_assert_eq!(flow_bound(&inst, &pi, false).unwrap(), poly.clone());
        prop_assert_eq!(chain_bound(&inst, &pi).unwrap(), poly);
    }
}
