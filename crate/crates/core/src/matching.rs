//! Exact maximum-weight matching and exhaustive matching enumeration.
//!
//! The matcher is a dynamic program over vertex subsets: for a set `S` with
//! lowest vertex `v`, either `v` stays unmatched or it is matched to a
//! neighbour `u ∈ S`. That is exponential in `|V|` but exact, and at switch
//! sizes (`|V| ≤ 20`) it runs in milliseconds. Only vertices touched by
//! nonnegative-weight edges take part, since negative edges never appear in an
//! optimum.
//!
//! Ties between optimal matchings are broken towards the lexicographically
//! smallest sorted edge-index sequence, the empty matching being smallest.

use thiserror::Error;

use crate::model::{Matching, SwitchInstance};

/// Largest number of active vertices the subset DP accepts.
pub const MAX_DP_VERTICES: usize = 24;

/// Default edge cap for [`enumerate_matchings`].
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchingError {
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("weight on edge {0} is not finite")]
    NonFiniteWeight(usize),
    #[error("{active} active vertices exceed the exact matcher cap of {cap}")]
    TooManyVertices { active: usize, cap: usize },
    #[error("{edges} edges exceed the enumeration cap of {cap}")]
    TooManyEdges { edges: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMatchingResult {
    pub matching: Matching,
    pub weight: f64,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[derive(Clone, Copy)]
struct Cell {
    weight: f64,
    /// Local index of the partner of the lowest vertex, or `NONE`.
    partner: u8,
    empty: bool,
}

const NONE: u8 = u8::MAX;

/// Maximum-weight matching over all matchings of `g`, including the empty one.
pub fn max_weight_matching(
    g: &SwitchInstance,
    weights: &[f64],
) -> Result<WeightedMatchingResult, MatchingError> {
    if weights.len() != g.num_edges() {
        return Err(MatchingError::WeightLength {
            expected: g.num_edges(),
            got: weights.len(),
        });
    }
    if let Some(e) = weights.iter().position(|w| !w.is_finite()) {
        return Err(MatchingError::NonFiniteWeight(e));
    }

    let kept: Vec<usize> = (0..g.num_edges()).filter(|&e| weights[e] >= 0.0).collect();
    let mut local = vec![usize::MAX; g.num_vertices()];
    let mut active = Vec::new();
    for v in 0..g.num_vertices() {
        if kept.iter().any(|&e| {
            let (a, b) = g.edge(e);
            a == v || b == v
        }) {
            local[v] = active.len();
            active.push(v);
        }
    }
    let k = active.len();
    if k > MAX_DP_VERTICES {
        return Err(MatchingError::TooManyVertices {
            active: k,
            cap: MAX_DP_VERTICES,
        });
    }

    // Local adjacency, lower endpoint → (higher endpoint, edge) in increasing order.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
    for &e in &kept {
        let (a, b) = g.edge(e);
        adj[local[a]].push((local[b], e));
    }
    for list in &mut adj {
        list.sort_unstable();
    }

    let size = 1usize << k;
    let mut table = vec![
        Cell {
            weight: 0.0,
            partner: NONE,
            empty: true
        };
        size
    ];
    for mask in 1..size {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << v);
        let skip = table[rest];
        let mut best = Cell {
            weight: skip.weight,
            partner: NONE,
            empty: skip.empty,
        };
        for &(u, e) in &adj[v] {
            if rest & (1 << u) == 0 {
                continue;
            }
            let w = weights[e] + table[rest & !(1 << u)].weight;
            let take = if tied(w, best.weight) {
                // Match candidates come in increasing partner order, so the
                // first tied one is the smallest edge; it only loses to a
                // skip that leaves the suffix empty.
                best.partner == NONE && !best.empty
            } else {
                w > best.weight
            };
            if take {
                best = Cell {
                    weight: w,
                    partner: u as u8,
                    empty: false,
                };
            }
        }
        table[mask] = best;
    }

    let mut edges = Vec::new();
    let mut mask = size - 1;
    while mask != 0 {
        let v = mask.trailing_zeros() as usize;
        let cell = table[mask];
        mask &= !(1 << v);
        if cell.partner != NONE {
            let u = cell.partner as usize;
            let e = adj[v]
                .iter()
                .find(|&&(p, _)| p == u)
                .map(|&(_, e)| e)
                .expect("edge exists");
            edges.push(e);
            mask &= !(1 << u);
        }
    }
    edges.sort_unstable();
    let matching = Matching::from_sorted_unchecked(edges);
    let weight = matching.weight(weights);
    Ok(WeightedMatchingResult { matching, weight })
}

/// Every matching of `g` exactly once, ordered by size then edge sequence.
pub fn enumerate_matchings(g: &SwitchInstance) -> Result<Vec<Matching>, MatchingError> {
    enumerate_matchings_with_cap(g, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_matchings_with_cap(
    g: &SwitchInstance,
    cap: usize,
) -> Result<Vec<Matching>, MatchingError> {
    if g.num_edges() > cap {
        return Err(MatchingError::TooManyEdges {
            edges: g.num_edges(),
            cap,
        });
    }
    fn go(
        g: &SwitchInstance,
        e: usize,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        out: &mut Vec<Matching>,
    ) {
        if e == g.num_edges() {
            out.push(Matching::from_sorted_unchecked(cur.clone()));
            return;
        }
        go(g, e + 1, used, cur, out);
        let (u, v) = g.edge(e);
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            cur.push(e);
            go(g, e + 1, used, cur, out);
            cur.pop();
            used[u] = false;
            used[v] = false;
        }
    }
    let mut out = Vec::new();
    go(
        g,
        0,
        &mut vec![false; g.num_vertices()],
        &mut Vec::new(),
        &mut out,
    );
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.edges().cmp(b.edges())));
    Ok(out)
}
