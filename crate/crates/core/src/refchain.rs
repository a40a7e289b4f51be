//! Single-node reference chain and the coherence factor.
//!
//! The reference chain tracks one memory with a fixed service-attempt
//! probability. Within a slot: an attempt (prob. `p_serve`) removes one
//! entanglement if any is stored, each survivor decoheres independently with
//! prob. `μ`, then one entanglement arrives with prob. `λ`, truncated at the
//! buffer size. Its stationary nonempty probability `C = 1 − π₀` lower-bounds
//! the availability of the node under the randomized policy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, DenseMatrix};
use crate::model::{EdgeVector, NodeParams, SwitchInstance};
use crate::scheduler::Variant;

/// Required stationarity residual `‖πP − π‖∞`.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Buffer used as a stand-in for the infinite-buffer chain.
pub const DEFAULT_REFERENCE_BUFFER: u32 = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),
    #[error("kernel is reducible: stationary distribution is not unique")]
    Reducible,
    #[error("kernel is not square/row-stochastic: {0}")]
    BadKernel(String),
    #[error("stationary residual {0:.3e} exceeds tolerance")]
    Residual(f64),
    #[error("buffer grid must be nonempty, ascending and ≤ the reference buffer")]
    BadGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub lambda: f64,
    pub mu: f64,
    pub p_serve: f64,
    pub buffer: u32,
}

impl ChainSpec {
    pub fn new(lambda: f64, mu: f64, p_serve: f64, buffer: u32) -> Result<Self, ChainError> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("p_serve", p_serve)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ChainError::InvalidSpec(format!(
                    "{name} = {v} is outside [0, 1]"
                )));
            }
        }
        if buffer < 1 {
            return Err(ChainError::InvalidSpec("buffer must be at least 1".into()));
        }
        Ok(ChainSpec {
            lambda,
            mu,
            p_serve,
            buffer,
        })
    }

    /// Reference chain of a node: `p_serve = λ` for Algorithm I, `⅔λ` for Algorithm II.
    pub fn for_node(node: &NodeParams, variant: Variant) -> Self {
        ChainSpec {
            lambda: node.lambda,
            mu: node.mu,
            p_serve: variant.scale() * node.lambda,
            buffer: node.buffer,
        }
    }

    pub fn with_buffer(self, buffer: u32) -> Self {
        ChainSpec { buffer, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainAnalysis {
    pub spec: ChainSpec,
    pub kernel: DenseMatrix,
    pub stationary: Vec<f64>,
    pub availability: f64,
    pub residual: f64,
}

/// Survivor distributions: `rows[n][k] = P(Binom(n, 1−μ) = k)` for `n ≤ max_n`.
fn survivor_pmfs(max_n: usize, mu: f64) -> Vec<Vec<f64>> {
    let keep = 1.0 - mu;
    let mut rows = vec![vec![1.0]];
    for n in 1..=max_n {
        let prev = &rows[n - 1];
        let mut row = vec![0.0; n + 1];
        for (k, &p) in prev.iter().enumerate() {
            row[k] += p * mu;
            row[k + 1] += p * keep;
        }
        rows.push(row);
    }
    rows
}

/// `(B+1)×(B+1)` transition matrix of the reference chain.
pub fn build_kernel(spec: &ChainSpec) -> DenseMatrix {
    let b = spec.buffer as usize;
    let pmfs = survivor_pmfs(b, spec.mu);
    let mut p = DenseMatrix::zeros(b + 1, b + 1);
    for i in 0..=b {
        for (serve, ps) in [(0usize, 1.0 - spec.p_serve), (1, spec.p_serve)] {
            if ps == 0.0 {
                continue;
            }
            let n = i.saturating_sub(serve);
            for (arrive, pa) in [(0usize, 1.0 - spec.lambda), (1, spec.lambda)] {
                if pa == 0.0 {
                    continue;
                }
                for (k, &pk) in pmfs[n].iter().enumerate() {
                    p.add(i, (k + arrive).min(b), ps * pa * pk);
                }
            }
        }
    }
    p
}

/// Unique stationary distribution by a direct solve of `(Pᵀ − I)π = 0, Σπ = 1`.
pub fn stationary(kernel: &DenseMatrix) -> Result<Vec<f64>, ChainError> {
    let n = kernel.rows();
    if n == 0 || kernel.cols() != n {
        return Err(ChainError::BadKernel(format!(
            "{}x{}",
            kernel.rows(),
            kernel.cols()
        )));
    }
    for i in 0..n {
        let s: f64 = kernel.row(i).iter().sum();
        if (s - 1.0).abs() > 1e-9 || kernel.row(i).iter().any(|v| *v < 0.0) {
            return Err(ChainError::BadKernel(format!("row {i} sums to {s}")));
        }
    }
    let mut a = kernel.transpose();
    for i in 0..n {
        a.add(i, i, -1.0);
    }
    for v in a.row_mut(n - 1) {
        *v = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut pi = linalg::solve(&a, &rhs, 1e-12).ok_or(ChainError::Reducible)?;
    if pi.iter().any(|v| *v < -1e-9) {
        return Err(ChainError::Reducible);
    }
    for v in &mut pi {
        *v = v.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    let r = stationary_residual(kernel, &pi);
    if r > STATIONARY_TOL {
        return Err(ChainError::Residual(r));
    }
    Ok(pi)
}

/// `‖πP − π‖∞`.
pub fn stationary_residual(kernel: &DenseMatrix, pi: &[f64]) -> f64 {
    kernel
        .left_mul(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn analyze(spec: &ChainSpec) -> Result<ChainAnalysis, ChainError> {
    let kernel = build_kernel(spec);
    let pi = stationary(&kernel)?;
    let residual = stationary_residual(&kernel, &pi);
    Ok(ChainAnalysis {
        spec: *spec,
        availability: 1.0 - pi[0],
        stationary: pi,
        kernel,
        residual,
    })
}

/// `C = 1 − π₀`.
pub fn availability(spec: &ChainSpec) -> Result<f64, ChainError> {
    Ok(analyze(spec)?.availability)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub variant: Variant,
    /// Reference availability per vertex, canonical vertex order.
    pub availability: Vec<f64>,
    /// `min_e (C_u + C_v − 1)^+`.
    pub gamma: f64,
    /// `min_e C_u C_v`, reported alongside for comparison.
    pub gamma_product: f64,
    /// Whether the positive part clipped the minimizing edge.
    pub clipped: bool,
    /// `scale · gamma`: the guaranteed fraction of the capacity region.
    pub guarantee: f64,
    pub bottleneck_edge: Option<usize>,
}

/// Coherence factor of `g` under `variant`. Instances without edges report 1.
pub fn coherence_factor(
    g: &SwitchInstance,
    variant: Variant,
) -> Result<CoherenceReport, ChainError> {
    let mut cache: BTreeMap<(u64, u64, u32), f64> = BTreeMap::new();
    let mut availability = Vec::with_capacity(g.num_vertices());
    for node in g.nodes() {
        let key = (node.lambda.to_bits(), node.mu.to_bits(), node.buffer);
        let c = match cache.get(&key) {
            Some(&c) => c,
            None => {
                let c = self::availability(&ChainSpec::for_node(node, variant))?;
                cache.insert(key, c);
                c
            }
        };
        availability.push(c);
    }
    let mut gamma_raw = f64::INFINITY;
    let mut gamma_product = 1.0f64;
    let mut bottleneck = None;
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let s = availability[u] + availability[v] - 1.0;
        if s < gamma_raw {
            gamma_raw = s;
            bottleneck = Some(e);
        }
        gamma_product = gamma_product.min(availability[u] * availability[v]);
    }
    let (gamma, clipped) = if bottleneck.is_none() {
        (1.0, false)
    } else if gamma_raw <= 0.0 {
        (0.0, true)
    } else {
        (gamma_raw, false)
    };
    Ok(CoherenceReport {
        variant,
        availability,
        gamma,
        gamma_product,
        clipped,
        guarantee: variant.scale() * gamma,
        bottleneck_edge: bottleneck,
    })
}

/// `(2C − 1)^+`, the single-node form of the coherence factor.
pub fn single_node_gamma(c: f64) -> f64 {
    (2.0 * c - 1.0).max(0.0)
}

/// Demand `Γ/(1+ε) · x` that the policy is guaranteed to stabilize, for `x` in the LP polytope.
///
/// Uses the coherence factor of `variant` without its scale, so the point `x` should come from
/// the same variant's LP.
pub fn guaranteed_rates(
    g: &SwitchInstance,
    variant: Variant,
    x: &EdgeVector,
    epsilon: f64,
) -> Result<Vec<f64>, ChainError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(ChainError::InvalidSpec(format!(
            "epsilon = {epsilon} must be finite and ≥ 0"
        )));
    }
    let gamma = coherence_factor(g, variant)?.gamma;
    Ok(x.values()
        .iter()
        .map(|v| gamma / (1.0 + epsilon) * v)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub buffer: u32,
    pub availability: f64,
    /// `C^{B_ref} − C^B`.
    pub gap: f64,
}

/// Least-squares line through `(B, ln gap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceProfile {
    pub reference_buffer: u32,
    pub reference_availability: f64,
    pub rows: Vec<GapRow>,
    /// Fit over rows with a positive gap; `None` with fewer than two such rows.
    pub fit: Option<LogLinearFit>,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LogLinearFit> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LogLinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
    })
}

/// Availability and gap to the reference buffer over `b_grid`.
pub fn convergence_profile(
    spec: &ChainSpec,
    b_grid: &[u32],
    reference_buffer: u32,
) -> Result<ConvergenceProfile, ChainError> {
    let sorted = b_grid.windows(2).all(|w| w[0] < w[1]);
    if b_grid.is_empty() || !sorted || b_grid[b_grid.len() - 1] > reference_buffer || b_grid[0] < 1
    {
        return Err(ChainError::BadGrid);
    }
    let reference = availability(&spec.with_buffer(reference_buffer))?;
    let rows = b_grid
        .iter()
        .map(|&b| {
            let c = availability(&spec.with_buffer(b))?;
            Ok(GapRow {
                buffer: b,
                availability: c,
                gap: (reference - c).max(0.0),
            })
        })
        .collect::<Result<Vec<_>, ChainError>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.gap > 0.0)
        .map(|r| (r.buffer as f64, r.gap.ln()))
        .unzip();
    Ok(ConvergenceProfile {
        reference_buffer,
        reference_availability: reference,
        fit: least_squares(&xs, &ys),
        rows,
    })
}
