mod common;

use common::{copy_shape, simple_fd_shape, two_three_shape};
use polybound::oracle::polymatroid_bound_value;
use polybound::random::{random_instance, rng, GenConfig};
use polybound::reductions::{reduce_acyclic_plus_simple, reduce_simple_plus_fd, reduce_two_three, VarOrigin};
use polybound::Instance;
use proptest::prelude::*;

fn instance(seed: u64, n: usize, k: usize) -> Instance {
    random_instance(&mut rng(seed), &GenConfig { cover: true, ..GenConfig::general(n, k) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn copies_preserve_the_bound(seed in any::<u64>(), n in 1usize..=5, k in 1usize..=4) {
        let inst = instance(seed, n, k);
        let t = reduce_acyclic_plus_simple(&inst).unwrap();
        prop_assert_eq!(t.reduced.n(), 2 * n);
        prop_assert!(copy_shape(&t));
        prop_assert!(t.variable_map[..n].iter().enumerate().all(|(v, o)| *o == VarOrigin::CopyX(v)));
        prop_assert_eq!(polymatroid_bound_value(&t.reduced).unwrap(), polymatroid_bound_value(&inst).unwrap());
    }

    #[test]
    fn merging_to_two_three_preserves_the_bound(seed in any::<u64>(), n in 1usize..=4, k in 1usize..=3) {
        let inst = instance(seed, n, k);
        let t = reduce_two_three(&inst).unwrap();
        prop_assume!(t.reduced.n() <= 10);
        prop_assert!(two_three_shape(&t));
        prop_assert!(t.iterations <= 2 * n * inst.k() + inst.k());
        prop_assert_eq!(polymatroid_bound_value(&t.reduced).unwrap(), polymatroid_bound_value(&inst).unwrap());
    }

    #[test]
    fn merging_guards_preserves_the_bound(seed in any::<u64>(), n in 1usize..=6, k in 1usize..=4) {
        let inst = instance(seed, n, k);
        let t = reduce_simple_plus_fd(&inst).unwrap();
        prop_assume!(t.reduced.n() <= 10);
        prop_assert!(simple_fd_shape(&t));
        prop_assert_eq!(polymatroid_bound_value(&t.reduced).unwrap(), polymatroid_bound_value(&inst).unwrap());
    }
}
