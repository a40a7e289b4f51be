//! Decomposition of a matching-polytope point into a lottery over matchings.
//!
//! Column generation on the master problem
//! `Σ_M p_M 1_M = x, Σ_M p_M = 1, p ≥ 0`: the restricted master over the
//! current column set is solved as a phase-one LP (minimize the artificial
//! mass), its equality duals `(y, z)` price a new column through the exact
//! max-weight matching oracle, and the loop stops once no matching has
//! `y·1_M + z > 0`. A positive residual at that point proves `x` lies outside
//! the matching polytope.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{self, MatchingError};
use crate::model::{self, EdgeVector, Matching, ModelError, SwitchInstance};
use crate::simplex::{self, Constraint, LinearProgram, LpError, Sense};

const FEASIBILITY_TOL: f64 = 1e-10;
const PRICING_TOL: f64 = 1e-10;
const PRUNE_BELOW: f64 = 1e-12;
const RECONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompositionError {
    #[error("infeasible master at termination (residual {residual:.3e}): point is outside the matching polytope")]
    InfeasibleMaster { residual: f64 },
    #[error("iteration cap exceeded: {limit} columns")]
    ColumnLimit { limit: usize },
    #[error("reconstruction error {0:.3e} exceeds tolerance")]
    Reconstruction(f64),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("mixture probabilities must be finite, nonnegative and sum to 1 (sum {0})")]
    BadProbabilities(f64),
}

/// Probability distribution over matchings.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMixture {
    atoms: Vec<(f64, Matching)>,
}

impl MatchingMixture {
    pub fn new(atoms: Vec<(f64, Matching)>) -> Result<Self, DecompositionError> {
        let sum: f64 = atoms.iter().map(|a| a.0).sum();
        if atoms.is_empty()
            || atoms.iter().any(|a| !(a.0.is_finite() && a.0 >= 0.0))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(DecompositionError::BadProbabilities(sum));
        }
        Ok(MatchingMixture { atoms })
    }

    pub fn point_mass(m: Matching) -> Self {
        MatchingMixture {
            atoms: vec![(1.0, m)],
        }
    }

    pub fn atoms(&self) -> &[(f64, Matching)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Σ_j p_j 1_{M_j}`.
    pub fn marginals(&self, num_edges: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_edges];
        for (p, m) in &self.atoms {
            for &e in m.edges() {
                x[e] += p;
            }
        }
        x
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).sum()
    }

    pub fn to_json(&self, g: &SwitchInstance) -> MixtureJson {
        MixtureJson {
            atoms: self
                .atoms
                .iter()
                .map(|(p, m)| AtomJson {
                    p: *p,
                    matching: model::matching_to_names(g, m),
                })
                .collect(),
        }
    }

    pub fn from_json(g: &SwitchInstance, json: &MixtureJson) -> Result<Self, DecompositionError> {
        let atoms = json
            .atoms
            .iter()
            .map(|a| Ok((a.p, model::matching_from_names(g, &a.matching)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Self::new(atoms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureJson {
    pub atoms: Vec<AtomJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub p: f64,
    pub matching: Vec<[String; 2]>,
}

/// Mixture plus bookkeeping from the column-generation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub mixture: MatchingMixture,
    /// Size of the final column set, initial columns included.
    pub columns: usize,
    /// Columns added by the pricing oracle.
    pub priced_columns: usize,
    /// `max_e |Σ_j p_j 1_{M_j}(e) − x_e|`.
    pub max_error: f64,
}

/// Default column cap, `10·|E|`.
pub fn default_column_cap(g: &SwitchInstance) -> usize {
    10 * g.num_edges()
}

pub fn decompose(
    g: &SwitchInstance,
    x: &EdgeVector,
) -> Result<MatchingMixture, DecompositionError> {
    decompose_with_cap(g, x, default_column_cap(g)).map(|d| d.mixture)
}

pub fn decompose_with_cap(
    g: &SwitchInstance,
    x: &EdgeVector,
    column_cap: usize,
) -> Result<Decomposition, DecompositionError> {
    let m = g.num_edges();
    let xv = x.values();
    if xv.len() != m {
        return Err(ModelError::LengthMismatch {
            expected: m,
            got: xv.len(),
        }
        .into());
    }
    if m == 0 {
        let mixture = MatchingMixture::point_mass(Matching::empty());
        return Ok(Decomposition {
            mixture,
            columns: 1,
            priced_columns: 0,
            max_error: 0.0,
        });
    }

    let mut columns = vec![Matching::empty()];
    columns.extend(
        (0..m)
            .filter(|&e| xv[e] > 0.0)
            .map(|e| Matching::from_sorted_unchecked(vec![e])),
    );
    let mut priced = 0;

    let probabilities = loop {
        let (p, residual, y, z) = restricted_master(&columns, xv)?;
        if residual <= FEASIBILITY_TOL {
            break p;
        }
        let best = matching::max_weight_matching(g, &y)?;
        if best.weight + z <= PRICING_TOL || columns.contains(&best.matching) {
            return Err(DecompositionError::InfeasibleMaster { residual });
        }
        if columns.len() >= column_cap {
            return Err(DecompositionError::ColumnLimit { limit: column_cap });
        }
        columns.push(best.matching);
        priced += 1;
    };

    let mut atoms: Vec<(f64, Matching)> = probabilities
        .iter()
        .zip(&columns)
        .filter(|(p, _)| **p >= PRUNE_BELOW)
        .map(|(p, c)| (*p, c.clone()))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.0).sum();
    for a in &mut atoms {
        a.0 /= total;
    }
    let mixture = MatchingMixture { atoms };
    let max_error = mixture
        .marginals(m)
        .iter()
        .zip(xv)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if max_error > RECONSTRUCTION_TOL {
        return Err(DecompositionError::Reconstruction(max_error));
    }
    Ok(Decomposition {
        mixture,
        columns: columns.len(),
        priced_columns: priced,
        max_error,
    })
}

/// Phase-one restricted master. Returns `(p, residual, y, z)`.
fn restricted_master(
    columns: &[Matching],
    x: &[f64],
) -> Result<(Vec<f64>, f64, Vec<f64>, f64), LpError> {
    let m = x.len();
    let k = columns.len();
    let nvars = k + m + 1;
    let mut objective = vec![0.0; nvars];
    for c in objective.iter_mut().skip(k) {
        *c = 1.0;
    }
    let mut constraints = Vec::with_capacity(m + 1);
    for (e, &xe) in x.iter().enumerate() {
        let mut row = vec![0.0; nvars];
        for (j, col) in columns.iter().enumerate() {
            if col.contains(e) {
                row[j] = 1.0;
            }
        }
        row[k + e] = 1.0;
        constraints.push(Constraint::eq(row, xe));
    }
    let mut row = vec![1.0; nvars];
    for v in row.iter_mut().skip(k).take(m) {
        *v = 0.0;
    }
    constraints.push(Constraint::eq(row, 1.0));
    let out = simplex::solve(&LinearProgram {
        sense: Sense::Minimize,
        objective,
        constraints,
    })?;
    let p = out.x[..k].iter().map(|v| v.max(0.0)).collect();
    let y = out.duals[..m].to_vec();
    Ok((p, out.value, y, out.duals[m]))
}

/// Draws `M_j` with probability `p_j`, consuming exactly one uniform from `rng`.
pub fn sample_matching<'a, R: Rng + ?Sized>(mix: &'a MatchingMixture, rng: &mut R) -> &'a Matching {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (p, m) in &mix.atoms {
        acc += p;
        if u < acc {
            return m;
        }
    }
    &mix.atoms.last().expect("mixture is nonempty").1
}
