#![allow(dead_code)]

use qswitch_core::model::{Matching, NodeParams, SwitchInstance};
use qswitch_core::refchain::ChainSpec;
use rand::Rng;

pub fn name(v: usize) -> String {
    format!("v{v:02}")
}

/// Instance on vertices `v00..` with the given index pairs and uniform physics.
pub fn instance(n: usize, pairs: &[(usize, usize)], lambda: f64) -> SwitchInstance {
    let names: Vec<String> = (0..n).map(name).collect();
    let vs: Vec<&str> = names.iter().map(String::as_str).collect();
    let es: Vec<(&str, &str)> = pairs.iter().map(|&(a, b)| (vs[a], vs[b])).collect();
    SwitchInstance::uniform(
        &vs,
        &es,
        NodeParams {
            lambda,
            mu: 0.05,
            buffer: 5,
        },
        0.1,
    )
    .unwrap()
}

/// Random simple graph with `n` vertices and at most `max_edges` edges.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    n: usize,
    max_edges: usize,
    lambda: f64,
) -> SwitchInstance {
    let mut all: Vec<(usize, usize)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            all.push((a, b));
        }
    }
    let mut pairs = Vec::new();
    for p in all {
        if rng.random::<f64>() < 0.5 {
            pairs.push(p);
        }
    }
    while pairs.len() > max_edges {
        let i = rng.random_range(0..pairs.len());
        pairs.swap_remove(i);
    }
    instance(n, &pairs, lambda)
}

/// Every edge subset that is a matching, by brute force over bitmasks.
pub fn brute_matchings(g: &SwitchInstance) -> Vec<Vec<usize>> {
    let m = g.num_edges();
    (0u64..1 << m)
        .map(|mask| (0..m).filter(|e| mask >> e & 1 == 1).collect::<Vec<_>>())
        .filter(|s| g.is_matching(s).unwrap())
        .collect()
}

/// Random convex combination of matchings of `g` and its marginal vector.
pub fn random_mixture<R: Rng>(rng: &mut R, g: &SwitchInstance, atoms: usize) -> Vec<f64> {
    let all = brute_matchings(g);
    let mut ws: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>()).collect();
    let total: f64 = ws.iter().sum();
    ws.iter_mut().for_each(|w| *w /= total);
    let mut x = vec![0.0; g.num_edges()];
    for w in ws {
        let m = &all[rng.random_range(0..all.len())];
        for &e in m {
            x[e] += w;
        }
    }
    x
}

/// Largest violation of any blossom inequality, or 0 when none is violated.
pub fn brute_max_blossom_violation(g: &SwitchInstance, x: &[f64]) -> f64 {
    let n = g.num_vertices();
    let mut worst = 0.0f64;
    for mask in 0u32..1 << n {
        let k = mask.count_ones() as usize;
        if k < 3 || k.is_multiple_of(2) {
            continue;
        }
        let inside: f64 = g
            .edges()
            .iter()
            .zip(x)
            .filter(|((u, v), _)| mask >> u & 1 == 1 && mask >> v & 1 == 1)
            .map(|(_, &xe)| xe)
            .sum();
        worst = worst.max(inside - ((k - 1) / 2) as f64);
    }
    worst
}

/// Transition matrix by enumerating service, arrival and one decoherence coin per survivor.
pub fn brute_kernel(spec: &ChainSpec) -> Vec<Vec<f64>> {
    let b = spec.buffer as usize;
    let mut p = vec![vec![0.0; b + 1]; b + 1];
    for (i, row) in p.iter_mut().enumerate() {
        for serve in [false, true] {
            let ps = if serve {
                spec.p_serve
            } else {
                1.0 - spec.p_serve
            };
            let n = if serve && i > 0 { i - 1 } else { i };
            for arrive in [false, true] {
                let pa = if arrive {
                    spec.lambda
                } else {
                    1.0 - spec.lambda
                };
                for coins in 0u32..1 << n {
                    let lost = coins.count_ones() as usize;
                    let pc = spec.mu.powi(lost as i32) * (1.0 - spec.mu).powi((n - lost) as i32);
                    let j = (n - lost + usize::from(arrive)).min(b);
                    row[j] += ps * pa * pc;
                }
            }
        }
    }
    p
}

pub fn matching_weight(m: &[usize], w: &[f64]) -> f64 {
    m.iter().map(|&e| w[e]).sum()
}

pub fn as_matching(g: &SwitchInstance, edges: &[usize]) -> Matching {
    Matching::new(g, edges.to_vec()).unwrap()
}
