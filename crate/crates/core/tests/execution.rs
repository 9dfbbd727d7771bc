//! Every execution strategy returns bit-identical results.

use cde_core::bayes::joint_with;
use cde_core::ci::{enumerate_equivalence_class_with, represented_ci_set_with};
use cde_core::generate::{random_bayes_net, random_dag, rng};
use cde_core::regimes::interventional_joint_with;
use cde_core::scm::{build_spm, spm_joint_enumerated, spm_joint_with};
use cde_core::{AugmentedBayesNet, Execution, RegimeAssignment};

fn all_agree<T: PartialEq + std::fmt::Debug>(f: impl Fn(Execution) -> T) {
    let results: Vec<T> = Execution::available().iter().map(|&e| f(e)).collect();
    for r in &results[1..] {
        assert_eq!(r, &results[0]);
    }
}

#[test]
fn strategies_agree() {
    for seed in 0..6u64 {
        let g = random_dag(&mut rng(seed), 8, 0.3);
        all_agree(|e| represented_ci_set_with(&g, 3, e).unwrap());
        all_agree(|e| enumerate_equivalence_class_with(&g, e).unwrap());

        let bn = random_bayes_net(&mut rng(seed), 7, 3, 0.4);
        all_agree(|e| joint_with(&bn, e).unwrap());
        let abn = AugmentedBayesNet::pearl(bn.clone()).unwrap();
        let ra = RegimeAssignment::all(abn.dag()).swap_remove(seed as usize);
        all_agree(|e| interventional_joint_with(&abn, &ra, e).unwrap());

        let small = random_bayes_net(&mut rng(seed), 4, 3, 0.5);
        let s = build_spm(&small).unwrap();
        let idle = RegimeAssignment::idle(s.dag());
        all_agree(|e| spm_joint_with(&s, &idle, e).unwrap());
        all_agree(|e| spm_joint_enumerated(&s, &idle, e).unwrap());
    }
}
