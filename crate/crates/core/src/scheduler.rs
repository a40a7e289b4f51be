//! Frame-level scheduling LPs.
//!
//! Algorithm I maximizes `Σ w_e x_e` under the per-node caps
//! `Σ_{e∈δ(v)} x_e ≤ λ_v` and the blossom inequalities
//! `Σ_{e∈E(S)} x_e ≤ (|S|−1)/2`, adding the most violated odd set as a cut until
//! none is left. Algorithm II drops the blossom rows and returns two thirds of
//! the degree-capped optimum, which always lies in the matching polytope.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EdgeVector, SwitchInstance};
use crate::simplex::{self, Constraint, LinearProgram, LpError, Sense};

/// A blossom cut is violated when it is exceeded by more than this.
pub const CUT_TOLERANCE: f64 = 1e-9;

/// Default vertex cap for exhaustive odd-set separation.
pub const DEFAULT_SEPARATION_CAP: usize = 20;

const MAX_CUT_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Alg1,
    Alg2,
}

impl Variant {
    /// Scale applied to the LP point, and to `λ` in the reference chain.
    pub fn scale(self) -> f64 {
        match self {
            Variant::Alg1 => 1.0,
            Variant::Alg2 => 2.0 / 3.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Alg1 => "alg1",
            Variant::Alg2 => "alg2",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "alg1" => Ok(Variant::Alg1),
            "2" | "alg2" => Ok(Variant::Alg2),
            other => Err(format!("unknown variant {other:?}, expected 1 or 2")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("weight on edge {0} is not finite")]
    NonFiniteWeight(usize),
    #[error("odd set must have odd size ≥ 3 with distinct in-range vertices, got {0:?}")]
    BadOddSet(Vec<usize>),
    #[error("{n} vertices exceed the odd-set enumeration cap of {cap}")]
    TooManyVertices { n: usize, cap: usize },
    #[error("edge vector has length {got}, expected {expected}")]
    PointLength { expected: usize, got: usize },
    #[error("separation returned the already-present cut {0:?}")]
    RepeatedCut(Vec<usize>),
    #[error("cutting-plane loop exceeded {0} rounds")]
    CutLimit(usize),
}

/// Odd vertex set `S` with `|S| ≥ 3`; its blossom right-hand side is `(|S|−1)/2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OddSet(Vec<usize>);

impl OddSet {
    pub fn new(mut vertices: Vec<usize>, num_vertices: usize) -> Result<Self, ScheduleError> {
        vertices.sort_unstable();
        let distinct = vertices.windows(2).all(|w| w[0] < w[1]);
        let in_range = vertices.iter().all(|&v| v < num_vertices);
        if vertices.len() < 3 || vertices.len().is_multiple_of(2) || !distinct || !in_range {
            return Err(ScheduleError::BadOddSet(vertices));
        }
        Ok(OddSet(vertices))
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn rhs(&self) -> f64 {
        ((self.0.len() - 1) / 2) as f64
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// Edges with both endpoints in the set.
    pub fn induced_edges(&self, edges: &[(usize, usize)]) -> Vec<usize> {
        (0..edges.len())
            .filter(|&e| self.contains(edges[e].0) && self.contains(edges[e].1))
            .collect()
    }
}

/// LP data: objective, per-vertex caps and explicit blossom cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub objective: Vec<f64>,
    pub degree_caps: Vec<f64>,
    pub blossom_cuts: Vec<OddSet>,
}

impl LpProblem {
    /// Degree-capped problem for `g` with caps `λ_v` and no cuts.
    pub fn from_instance(g: &SwitchInstance, weights: &[f64]) -> Result<Self, ScheduleError> {
        check_weights(g, weights)?;
        Ok(LpProblem {
            num_vertices: g.num_vertices(),
            edges: g.edges().to_vec(),
            objective: weights.to_vec(),
            degree_caps: g.nodes().iter().map(|n| n.lambda).collect(),
            blossom_cuts: Vec::new(),
        })
    }

    fn linear_program(&self) -> LinearProgram {
        let m = self.edges.len();
        let mut constraints = Vec::with_capacity(self.num_vertices + self.blossom_cuts.len());
        for v in 0..self.num_vertices {
            let coeffs = self
                .edges
                .iter()
                .map(|&(a, b)| if a == v || b == v { 1.0 } else { 0.0 })
                .collect();
            constraints.push(Constraint::le(coeffs, self.degree_caps[v]));
        }
        for cut in &self.blossom_cuts {
            let mut coeffs = vec![0.0; m];
            for e in cut.induced_edges(&self.edges) {
                coeffs[e] = 1.0;
            }
            constraints.push(Constraint::le(coeffs, cut.rhs()));
        }
        LinearProgram {
            sense: Sense::Maximize,
            objective: self.objective.clone(),
            constraints,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// The point to decompose: `x*` for Algorithm I, `x^app` for Algorithm II.
    pub x: EdgeVector,
    /// `⟨w, x⟩` for the returned point.
    pub objective_value: f64,
    /// Odd sets added by separation, in the order they were added.
    pub active_cuts: Vec<OddSet>,
    /// LP value after each cutting-plane round.
    pub objective_trace: Vec<f64>,
    /// Degree-only optimum before scaling (Algorithm II only).
    pub unscaled: Option<EdgeVector>,
}

fn check_weights(g: &SwitchInstance, weights: &[f64]) -> Result<(), ScheduleError> {
    if weights.len() != g.num_edges() {
        return Err(ScheduleError::WeightLength {
            expected: g.num_edges(),
            got: weights.len(),
        });
    }
    if let Some(e) = weights.iter().position(|w| !w.is_finite()) {
        return Err(ScheduleError::NonFiniteWeight(e));
    }
    Ok(())
}

/// Basic optimal solution of `max ⟨w,x⟩` over the caps and listed cuts.
pub fn solve_lp(prob: &LpProblem) -> Result<LpSolution, ScheduleError> {
    let out = simplex::solve(&prob.linear_program())?;
    Ok(LpSolution {
        x: EdgeVector::from_solver(out.x),
        objective_value: out.value,
        active_cuts: prob.blossom_cuts.clone(),
        objective_trace: vec![out.value],
        unscaled: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlossomViolation {
    pub set: OddSet,
    /// `Σ_{e∈E(S)} x_e − (|S|−1)/2`.
    pub amount: f64,
}

/// Most violated blossom inequality, by enumeration of every odd vertex set.
pub fn separate_blossom(
    g: &SwitchInstance,
    x: &EdgeVector,
) -> Result<Option<BlossomViolation>, ScheduleError> {
    separate_blossom_with_cap(
        g.num_vertices(),
        g.edges(),
        x.values(),
        DEFAULT_SEPARATION_CAP,
    )
}

pub fn separate_blossom_with_cap(
    n: usize,
    edges: &[(usize, usize)],
    x: &[f64],
    cap: usize,
) -> Result<Option<BlossomViolation>, ScheduleError> {
    if n > cap {
        return Err(ScheduleError::TooManyVertices { n, cap });
    }
    if x.len() != edges.len() {
        return Err(ScheduleError::PointLength {
            expected: edges.len(),
            got: x.len(),
        });
    }
    if n < 3 {
        return Ok(None);
    }
    let mut w = vec![0.0; n * n];
    for (&(a, b), &xe) in edges.iter().zip(x) {
        w[a * n + b] += xe;
        w[b * n + a] += xe;
    }
    // inside[S] = Σ_{e ∈ E(S)} x_e, built by adding the lowest vertex last.
    let size = 1usize << n;
    let mut inside = vec![0.0f64; size];
    let mut best: Option<(usize, f64)> = None;
    for mask in 1..size {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << v);
        let mut s = inside[rest];
        let mut bits = rest;
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            s += w[v * n + u];
            bits &= bits - 1;
        }
        inside[mask] = s;
        let k = mask.count_ones() as usize;
        if k >= 3 && k % 2 == 1 {
            let amount = s - ((k - 1) / 2) as f64;
            if amount > CUT_TOLERANCE && best.is_none_or(|(_, a)| amount > a + 1e-12) {
                best = Some((mask, amount));
            }
        }
    }
    Ok(best.map(|(mask, amount)| {
        let vertices = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        BlossomViolation {
            set: OddSet(vertices),
            amount,
        }
    }))
}

/// Cutting-plane solve of the blossom-constrained scheduling LP.
pub fn solve_algorithm1(g: &SwitchInstance, weights: &[f64]) -> Result<LpSolution, ScheduleError> {
    let mut prob = LpProblem::from_instance(g, weights)?;
    let mut trace = Vec::new();
    for _ in 0..MAX_CUT_ROUNDS {
        let sol = solve_lp(&prob)?;
        trace.push(sol.objective_value);
        match separate_blossom(g, &sol.x)? {
            None => {
                return Ok(LpSolution {
                    objective_trace: trace,
                    ..sol
                });
            }
            Some(v) => {
                if prob.blossom_cuts.contains(&v.set) {
                    return Err(ScheduleError::RepeatedCut(v.set.0));
                }
                prob.blossom_cuts.push(v.set);
            }
        }
    }
    Err(ScheduleError::CutLimit(MAX_CUT_ROUNDS))
}

/// Degree-only solve followed by the 2/3 scaling.
pub fn solve_algorithm2(g: &SwitchInstance, weights: &[f64]) -> Result<LpSolution, ScheduleError> {
    let prob = LpProblem::from_instance(g, weights)?;
    let frac = solve_lp(&prob)?;
    let x = frac.x.scaled(Variant::Alg2.scale());
    let objective_value = x.dot(weights);
    Ok(LpSolution {
        x,
        objective_value,
        active_cuts: Vec::new(),
        objective_trace: frac.objective_trace,
        unscaled: Some(frac.x),
    })
}

pub fn solve_variant(
    variant: Variant,
    g: &SwitchInstance,
    weights: &[f64],
) -> Result<LpSolution, ScheduleError> {
    match variant {
        Variant::Alg1 => solve_algorithm1(g, weights),
        Variant::Alg2 => solve_algorithm2(g, weights),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeParams;

    fn graph(vs: &[&str], es: &[(&str, &str)], lambda: f64) -> SwitchInstance {
        SwitchInstance::uniform(
            vs,
            es,
            NodeParams {
                lambda,
                mu: 0.1,
                buffer: 5,
            },
            0.1,
        )
        .unwrap()
    }

    fn triangle(lambda: f64) -> SwitchInstance {
        graph(
            &["a", "b", "c"],
            &[("a", "b"), ("b", "c"), ("c", "a")],
            lambda,
        )
    }

    #[test]
    fn single_edge_min_cap_binds() {
        let mut raw = graph(&["u", "v"], &[("u", "v")], 1.0).to_raw();
        raw.node_params.get_mut("u").unwrap().lambda = 0.4;
        raw.node_params.get_mut("v").unwrap().lambda = 0.7;
        let g = crate::validate_instance(&raw).unwrap();
        let sol = solve_lp(&LpProblem::from_instance(&g, &[1.0]).unwrap()).unwrap();
        assert!((sol.x.values()[0] - 0.4).abs() < 1e-12);
        assert!((sol.objective_value - 0.4).abs() < 1e-12);
        let app = solve_algorithm2(&g, &[1.0]).unwrap();
        assert!((app.x.values()[0] - 0.4 * 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn star_center_cap_binds() {
        let mut raw = graph(
            &["c", "l1", "l2", "l3"],
            &[("c", "l1"), ("c", "l2"), ("c", "l3")],
            1.0,
        )
        .to_raw();
        raw.node_params.get_mut("c").unwrap().lambda = 0.6;
        let g = crate::validate_instance(&raw).unwrap();
        let sol = solve_lp(&LpProblem::from_instance(&g, &[1.0; 3]).unwrap()).unwrap();
        let total: f64 = sol.x.values().iter().sum();
        assert!((total - 0.6).abs() < 1e-12);
        assert!((sol.objective_value - 0.6).abs() < 1e-12);
    }

    #[test]
    fn triangle_degree_lp_is_half_integral() {
        let g = triangle(1.0);
        let sol = solve_lp(&LpProblem::from_instance(&g, &[1.0; 3]).unwrap()).unwrap();
        assert!((sol.objective_value - 1.5).abs() < 1e-12);
        for &v in sol.x.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_separation() {
        let g = triangle(1.0);
        let half = EdgeVector::new(&g, vec![0.5; 3]).unwrap();
        let v = separate_blossom(&g, &half).unwrap().unwrap();
        assert_eq!(v.set.vertices(), &[0, 1, 2]);
        assert!((v.amount - 0.5).abs() < 1e-12);
        let third = EdgeVector::new(&g, vec![1.0 / 3.0; 3]).unwrap();
        assert!(separate_blossom(&g, &third).unwrap().is_none());
    }

    #[test]
    fn algorithm1_cuts_the_triangle() {
        let g = triangle(1.0);
        let sol = solve_algorithm1(&g, &[1.0; 3]).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
        assert_eq!(sol.active_cuts.len(), 1);
        assert_eq!(sol.objective_trace.len(), 2);
        assert!(sol.objective_trace[1] <= sol.objective_trace[0]);
    }

    #[test]
    fn algorithm1_path_needs_no_cuts() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")], 1.0);
        let sol = solve_algorithm1(&g, &[1.0; 2]).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
        assert!(sol.active_cuts.is_empty());
    }

    #[test]
    fn zero_caps_give_zero() {
        let g = triangle(0.0);
        let sol = solve_algorithm1(&g, &[1.0; 3]).unwrap();
        assert_eq!(sol.objective_value, 0.0);
        assert!(sol.x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn algorithm2_triangle() {
        let g = triangle(1.0);
        let sol = solve_algorithm2(&g, &[1.0; 3]).unwrap();
        for (&f, &a) in sol
            .unscaled
            .as_ref()
            .unwrap()
            .values()
            .iter()
            .zip(sol.x.values())
        {
            assert!((f - 0.5).abs() < 1e-12);
            assert!((a - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(separate_blossom(&g, &sol.x).unwrap().is_none());
    }

    #[test]
    fn odd_set_validation() {
        assert!(OddSet::new(vec![0, 1], 5).is_err());
        assert!(OddSet::new(vec![0, 1, 1], 5).is_err());
        assert!(OddSet::new(vec![0, 1, 7], 5).is_err());
        assert_eq!(OddSet::new(vec![4, 0, 2, 1, 3], 5).unwrap().rhs(), 2.0);
    }

    #[test]
    fn separation_cap() {
        let x = vec![];
        assert!(matches!(
            separate_blossom_with_cap(21, &[], &x, 20),
            Err(ScheduleError::TooManyVertices { .. })
        ));
    }
}
