mod common;

use common::{
    brute_matchings, brute_max_blossom_violation, instance, matching_weight, random_graph,
    random_mixture,
};
use proptest::prelude::*;
use qswitch_core::scheduler::{
    separate_blossom, solve_algorithm1, solve_algorithm2, solve_lp, LpProblem, OddSet,
};
use qswitch_core::EdgeVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        let k = pairs.len();
        (Just(n), proptest::sample::subsequence(pairs, 0..=k))
    })
}

fn degree_ok(g: &qswitch_core::SwitchInstance, x: &[f64]) -> bool {
    (0..g.num_vertices())
        .all(|v| g.incident(v).iter().map(|&e| x[e]).sum::<f64>() <= g.node(v).lambda + 1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn separation_finds_the_most_violated_set((n, pairs) in graph_strategy(7), xs in prop::collection::vec(0.0f64..0.7, 21)) {
        let g = instance(n, &pairs, 1.0);
        let x = &xs[..g.num_edges()];
        let worst = brute_max_blossom_violation(&g, x);
        let found = separate_blossom(&g, &EdgeVector::new(&g, x.to_vec()).unwrap()).unwrap();
        if worst > 1e-9 {
            let v = found.expect("violated set missed");
            prop_assert!((v.amount - worst).abs() < 1e-12);
            let inside: f64 = v.set.induced_edges(g.edges()).iter().map(|&e| x[e]).sum();
            prop_assert!((inside - v.set.rhs() - v.amount).abs() < 1e-12);
            prop_assert!(v.set.vertices().len() % 2 == 1 && v.set.vertices().len() >= 3);
        } else {
            prop_assert!(found.is_none());
        }
    }

    #[test]
    fn unit_caps_give_the_matching_polytope((n, pairs) in graph_strategy(6), ws in prop::collection::vec(0u32..10, 15)) {
        let g = instance(n, &pairs, 1.0);
        let w: Vec<f64> = ws[..g.num_edges()].iter().map(|&v| v as f64).collect();
        let sol = solve_algorithm1(&g, &w).unwrap();
        let best = brute_matchings(&g).iter().map(|m| matching_weight(m, &w)).fold(0.0, f64::max);
        prop_assert!((sol.objective_value - best).abs() < 1e-9, "{} vs {}", sol.objective_value, best);
        prop_assert!(brute_max_blossom_violation(&g, sol.x.values()) <= 1e-9);
        prop_assert!(degree_ok(&g, sol.x.values()));
    }

    #[test]
    fn cutting_planes_match_the_full_formulation(
        (n, pairs) in graph_strategy(6),
        lambda in 0.1f64..1.0,
        ws in prop::collection::vec(0.0f64..5.0, 15),
    ) {
        let g = instance(n, &pairs, lambda);
        let w = &ws[..g.num_edges()];
        let sol = solve_algorithm1(&g, w).unwrap();
        let mut full = LpProblem::from_instance(&g, w).unwrap();
        for mask in 0u32..1 << n {
            let k = mask.count_ones();
            if k >= 3 && k % 2 == 1 {
                let vs = (0..n).filter(|v| mask >> v & 1 == 1).collect();
                full.blossom_cuts.push(OddSet::new(vs, n).unwrap());
            }
        }
        let direct = solve_lp(&full).unwrap();
        prop_assert!((sol.objective_value - direct.objective_value).abs() < 1e-9);
        prop_assert!(degree_ok(&g, sol.x.values()));
        prop_assert!(brute_max_blossom_violation(&g, sol.x.values()) <= 1e-9);
        for w2 in sol.objective_trace.windows(2) {
            prop_assert!(w2[1] <= w2[0] + 1e-9);
        }
    }

    #[test]
    fn scaled_degree_solution_is_in_the_polytope(
        (n, pairs) in graph_strategy(7),
        lambda in 0.0f64..=1.0,
        ws in prop::collection::vec(-1.0f64..5.0, 21),
    ) {
        let g = instance(n, &pairs, lambda);
        let w = &ws[..g.num_edges()];
        let sol = solve_algorithm2(&g, w).unwrap();
        let frac = sol.unscaled.as_ref().unwrap();
        for (a, b) in sol.x.values().iter().zip(frac.values()) {
            prop_assert!((a - 2.0 / 3.0 * b).abs() < 1e-15);
        }
        prop_assert!(brute_max_blossom_violation(&g, sol.x.values()) <= 1e-9);
        prop_assert!(separate_blossom(&g, &sol.x).unwrap().is_none());
        let alg1 = solve_algorithm1(&g, w).unwrap();
        prop_assert!(sol.objective_value <= alg1.objective_value + 1e-9);
        prop_assert!(alg1.objective_value <= frac.dot(w) + 1e-9);
    }
}

#[test]
fn mixtures_of_matchings_are_never_cut() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let n = 3 + trial % 5;
        let g = random_graph(&mut rng, n, 8, 1.0);
        if g.num_edges() == 0 {
            continue;
        }
        let x = random_mixture(&mut rng, &g, 1 + trial % 6);
        assert!(
            separate_blossom(&g, &EdgeVector::new(&g, x.clone()).unwrap())
                .unwrap()
                .is_none(),
            "trial {trial}"
        );
        assert!(brute_max_blossom_violation(&g, &x) <= 1e-9);
    }
}

#[test]
fn two_thirds_scaling_on_odd_cliques() {
    // (2k+1)/3 ≤ k for every k ≥ 1, so the uniform 1/(2k) point scaled by 2/3 survives.
    for k in 1..=3usize {
        let n = 2 * k + 1;
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        let g = instance(n, &pairs, 1.0);
        let x = vec![1.0 / (n - 1) as f64; g.num_edges()];
        assert!(brute_max_blossom_violation(&g, &x) > 0.4);
        let scaled: Vec<f64> = x.iter().map(|v| v * 2.0 / 3.0).collect();
        assert!(separate_blossom(&g, &EdgeVector::new(&g, scaled).unwrap())
            .unwrap()
            .is_none());
    }
}
