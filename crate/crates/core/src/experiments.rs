//! Parameter sweeps over the reference chain and their CSV output.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::refchain::{self, single_node_gamma, ChainError, ChainSpec, ConvergenceProfile};
use crate::scheduler::Variant;

/// Environment variable selecting the sweep worker count.
pub const WORKERS_ENV: &str = "QSWITCH_WORKERS";

pub const SWEEP_HEADER: [&str; 9] = [
    "lambda",
    "mu_rule",
    "mu",
    "B",
    "variant",
    "C",
    "gamma",
    "guarantee",
    "gamma_product",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("no {variant} row for lambda={lambda}, mu={mu}, B={buffer}")]
    MissingVariant {
        variant: &'static str,
        lambda: f64,
        mu: f64,
        buffer: u32,
    },
    #[error("dataset has no rows")]
    Empty,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuRule {
    /// `μ = f · λ`.
    Fraction(f64),
    Explicit(Vec<f64>),
}

impl MuRule {
    fn values(&self, lambda: f64) -> Vec<f64> {
        match self {
            MuRule::Fraction(f) => vec![f * lambda],
            MuRule::Explicit(list) => list.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MuRule::Fraction(f) => format!("{f}lambda"),
            MuRule::Explicit(_) => "explicit".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub lambda_grid: Vec<f64>,
    pub mu_rules: Vec<MuRule>,
    pub b_grid: Vec<u32>,
    pub variants: Vec<Variant>,
}

impl SweepSpec {
    /// λ ∈ {0.1, …, 0.5}, μ ∈ {0.05λ, 0.1λ}, B ∈ {5, 10, …, 25}, both variants.
    pub fn default_grid() -> Self {
        SweepSpec {
            lambda_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            mu_rules: vec![MuRule::Fraction(0.05), MuRule::Fraction(0.1)],
            b_grid: vec![5, 10, 15, 20, 25],
            variants: vec![Variant::Alg1, Variant::Alg2],
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSpec(m.into()));
        if self.lambda_grid.is_empty()
            || self.mu_rules.is_empty()
            || self.b_grid.is_empty()
            || self.variants.is_empty()
        {
            return bad("every grid must be nonempty");
        }
        if self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return bad("lambda values must lie in [0, 1]");
        }
        for rule in &self.mu_rules {
            match rule {
                MuRule::Fraction(f) if !(0.0..=1.0).contains(f) => {
                    return bad("mu fraction must lie in [0, 1]")
                }
                MuRule::Explicit(list)
                    if list.is_empty() || list.iter().any(|m| !(0.0..=1.0).contains(m)) =>
                {
                    return bad("explicit mu list must be nonempty and within [0, 1]")
                }
                _ => {}
            }
        }
        if self.b_grid.iter().any(|&b| b < 1) {
            return bad("buffer sizes must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mu_rule: String,
    pub mu: f64,
    pub buffer: u32,
    pub variant: Variant,
    pub availability: f64,
    /// `(2C − 1)^+`.
    pub gamma: f64,
    /// `scale · gamma`.
    pub guarantee: f64,
    /// `C²`.
    pub gamma_product: f64,
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`], or rayon's default when unset.
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let n = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0);
    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// One row per (λ, μ-rule, μ, B, variant), in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    spec.validate()?;
    let mut points = Vec::new();
    for &lambda in &spec.lambda_grid {
        for rule in &spec.mu_rules {
            for mu in rule.values(lambda) {
                for &buffer in &spec.b_grid {
                    for &variant in &spec.variants {
                        points.push((lambda, rule.label(), mu, buffer, variant));
                    }
                }
            }
        }
    }
    with_workers(|| {
        points
            .into_par_iter()
            .map(|(lambda, mu_rule, mu, buffer, variant)| {
                let chain = ChainSpec::new(lambda, mu, variant.scale() * lambda, buffer)?;
                let c = refchain::availability(&chain)?;
                let gamma = single_node_gamma(c);
                Ok(SweepRow {
                    lambda,
                    mu_rule,
                    mu,
                    buffer,
                    variant,
                    availability: c,
                    gamma,
                    guarantee: variant.scale() * gamma,
                    gamma_product: c * c,
                })
            })
            .collect()
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), crate::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.mu_rule.clone(),
            r.mu.to_string(),
            r.buffer.to_string(),
            r.variant.label().to_string(),
            r.availability.to_string(),
            r.gamma.to_string(),
            r.guarantee.to_string(),
            r.gamma_product.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub lambda: f64,
    pub mu: f64,
    pub buffer: u32,
    pub alg1_guarantee: f64,
    pub alg2_guarantee: f64,
    /// `Γ(alg1) − ⅔Γ′(alg2)`.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantComparison {
    pub rows: Vec<ComparisonRow>,
    /// Share of grid points where Algorithm I's guarantee is at least Algorithm II's.
    pub alg1_dominance: f64,
    pub strict_dominance: f64,
}

/// Pairs alg1 and alg2 rows over the same (λ, μ, B).
pub fn compare_variants(rows: &[SweepRow]) -> Result<VariantComparison, ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::Empty);
    }
    let key = |r: &SweepRow| (r.lambda.to_bits(), r.mu.to_bits(), r.buffer);
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in rows {
        if !seen.insert(key(r)) {
            continue;
        }
        let find = |v: Variant| {
            rows.iter()
                .find(|s| key(s) == key(r) && s.variant == v)
                .ok_or(ExperimentError::MissingVariant {
                    variant: v.label(),
                    lambda: r.lambda,
                    mu: r.mu,
                    buffer: r.buffer,
                })
        };
        let a1 = find(Variant::Alg1)?.guarantee;
        let a2 = find(Variant::Alg2)?.guarantee;
        out.push(ComparisonRow {
            lambda: r.lambda,
            mu: r.mu,
            buffer: r.buffer,
            alg1_guarantee: a1,
            alg2_guarantee: a2,
            difference: a1 - a2,
        });
    }
    let n = out.len() as f64;
    Ok(VariantComparison {
        alg1_dominance: out.iter().filter(|r| r.difference >= 0.0).count() as f64 / n,
        strict_dominance: out.iter().filter(|r| r.difference > 0.0).count() as f64 / n,
        rows: out,
    })
}

pub fn write_comparison_csv<W: Write>(cmp: &VariantComparison, out: W) -> Result<(), crate::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "lambda",
        "mu",
        "B",
        "alg1_guarantee",
        "alg2_guarantee",
        "difference",
    ])?;
    for r in &cmp.rows {
        w.write_record([
            r.lambda.to_string(),
            r.mu.to_string(),
            r.buffer.to_string(),
            r.alg1_guarantee.to_string(),
            r.alg2_guarantee.to_string(),
            r.difference.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Convergence profiles for every (λ, μ) of a spec, under Algorithm I's reference chain.
pub fn gap_profiles(
    spec: &SweepSpec,
    reference_buffer: u32,
) -> Result<Vec<(f64, String, f64, ConvergenceProfile)>, ExperimentError> {
    spec.validate()?;
    let mut b_grid = spec.b_grid.clone();
    b_grid.sort_unstable();
    b_grid.dedup();
    let mut points = Vec::new();
    for &lambda in &spec.lambda_grid {
        for rule in &spec.mu_rules {
            for mu in rule.values(lambda) {
                points.push((lambda, rule.label(), mu));
            }
        }
    }
    with_workers(|| {
        points
            .into_par_iter()
            .map(|(lambda, label, mu)| {
                let chain = ChainSpec::new(lambda, mu, lambda, 1)?;
                let p = refchain::convergence_profile(&chain, &b_grid, reference_buffer)?;
                Ok((lambda, label, mu, p))
            })
            .collect()
    })
}

pub fn write_gap_csv<W: Write>(
    profiles: &[(f64, String, f64, ConvergenceProfile)],
    out: W,
) -> Result<(), crate::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "lambda", "mu_rule", "mu", "B", "C", "C_ref", "gap", "log_gap",
    ])?;
    for (lambda, label, mu, p) in profiles {
        for row in &p.rows {
            let log_gap = if row.gap > 0.0 {
                row.gap.ln().to_string()
            } else {
                String::new()
            };
            w.write_record([
                lambda.to_string(),
                label.clone(),
                mu.to_string(),
                row.buffer.to_string(),
                row.availability.to_string(),
                p.reference_availability.to_string(),
                row.gap.to_string(),
                log_gap,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Everything that determined a sweep, written beside the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub sweep: SweepSpec,
    pub reference_buffer: u32,
    pub workers: Option<usize>,
    pub crate_version: String,
}

impl ResolvedConfig {
    pub fn new(sweep: SweepSpec, reference_buffer: u32) -> Self {
        ResolvedConfig {
            sweep,
            reference_buffer,
            workers: std::env::var(WORKERS_ENV).ok().and_then(|s| s.parse().ok()),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

impl fmt::Display for VariantComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} grid points, alg1 ≥ alg2 on {:.3}, strictly on {:.3}",
            self.rows.len(),
            self.alg1_dominance,
            self.strict_dominance
        )
    }
}
