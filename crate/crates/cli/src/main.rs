use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qswitch_core::decomposition::{self, MatchingMixture, MixtureJson};
use qswitch_core::experiments::{self, ResolvedConfig, SweepSpec};
use qswitch_core::model::{self, EdgeValue, RawInstance};
use qswitch_core::refchain::{self, DEFAULT_REFERENCE_BUFFER};
use qswitch_core::scheduler::{self, Variant};
use qswitch_core::sim::{self, AdaptiveFrame, Policy, SimConfig};
use qswitch_core::{EdgeVector, SwitchInstance};

#[derive(Parser)]
#[command(
    name = "qswitch",
    version,
    about = "Randomized LP scheduling for quantum switches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

impl From<AlgArg> for Variant {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::One => Variant::Alg1,
            AlgArg::Two => Variant::Alg2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimAlg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Availability and coherence factor over a (lambda, mu, B) grid, as CSV.
    ChainSweep {
        /// Sweep spec JSON; the default grid when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resolved-config JSON written next to the data.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Coherence factor of one instance.
    Gamma {
        #[arg(long)]
        instance: PathBuf,
        /// Variant; both when omitted.
        #[arg(long)]
        alg: Option<AlgArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the scheduling LP for one weight vector.
    LpSolve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        alg: AlgArg,
        /// JSON list of {"edge": [u, v], "value": w}; unlisted edges weigh 1.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose a point of the matching polytope into a lottery over matchings.
    Decompose {
        /// JSON object {"instance": {...}, "x": [{"edge": [u, v], "value": x}, ...]}.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum-weight matching.
    Match {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slot-level simulation of the frame policy.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        /// Frame length T.
        #[arg(long, default_value_t = 100)]
        frame: usize,
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "1")]
        alg: SimAlg,
        /// Mixture JSON for `--alg fixed`.
        #[arg(long, conflicts_with = "x")]
        mixture: Option<PathBuf>,
        /// Edge-value JSON for `--alg fixed`, decomposed once before the run.
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        warmup: u64,
        /// Enables adaptive frames `max(T, ⌈c·ln(1 + ΣR)⌉)` with this `c`.
        #[arg(long)]
        adaptive: Option<f64>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        stats_out: Option<PathBuf>,
    },
    /// Default grid sweep, variant comparison and buffer-gap profiles as CSV files.
    Figures {
        #[arg(long, default_value = "figures")]
        out_dir: PathBuf,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_REFERENCE_BUFFER)]
        reference_buffer: u32,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_instance(path: &Path) -> Result<SwitchInstance> {
    let raw: RawInstance = read_json(path)?;
    model::validate_instance(&raw).with_context(|| format!("validating {}", path.display()))
}

fn load_weights(g: &SwitchInstance, path: Option<&Path>) -> Result<Vec<f64>> {
    match path {
        Some(p) => {
            let values: Vec<EdgeValue> = read_json(p)?;
            Ok(model::edge_values_to_vec(g, &values, 1.0)?)
        }
        None => Ok(vec![1.0; g.num_edges()]),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_spec(path: Option<&Path>) -> Result<SweepSpec> {
    let spec = match path {
        Some(p) => read_json(p)?,
        None => SweepSpec::default_grid(),
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct LpOutput {
    variant: Variant,
    x: Vec<EdgeValue>,
    value: f64,
    cuts: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unscaled_x: Option<Vec<EdgeValue>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecomposeInput {
    instance: RawInstance,
    x: Vec<EdgeValue>,
}

#[derive(Serialize)]
struct DecomposeOutput {
    #[serde(flatten)]
    mixture: MixtureJson,
    columns: usize,
    priced_columns: usize,
    max_error: f64,
}

#[derive(Serialize)]
struct MatchOutput {
    matching: Vec<[String; 2]>,
    weight: f64,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    instance: &'a str,
    frame: usize,
    horizon: u64,
    seed: u64,
    policy: String,
    stats: &'a sim::SimStats,
    drift: Option<sim::DriftReport>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ChainSweep { spec, out, sidecar } => {
            let spec = load_spec(spec.as_deref())?;
            let rows = experiments::run_sweep(&spec)?;
            experiments::write_sweep_csv(&rows, sink(out.as_deref())?)?;
            if let Some(p) = sidecar {
                emit_json(
                    &ResolvedConfig::new(spec, DEFAULT_REFERENCE_BUFFER),
                    Some(&p),
                )?;
            }
        }
        Command::Gamma { instance, alg, out } => {
            let g = load_instance(&instance)?;
            let variants = match alg {
                Some(a) => vec![a.into()],
                None => vec![Variant::Alg1, Variant::Alg2],
            };
            let reports = variants
                .into_iter()
                .map(|v| refchain::coherence_factor(&g, v))
                .collect::<Result<Vec<_>, _>>()?;
            emit_json(&reports, out.as_deref())?;
        }
        Command::LpSolve {
            instance,
            alg,
            weights,
            out,
        } => {
            let g = load_instance(&instance)?;
            let w = load_weights(&g, weights.as_deref())?;
            let variant = Variant::from(alg);
            let sol = scheduler::solve_variant(variant, &g, &w)?;
            let names = |vs: &[usize]| vs.iter().map(|&v| g.vertex_id(v).to_owned()).collect();
            let result = LpOutput {
                variant,
                x: model::vec_to_edge_values(&g, sol.x.values()),
                value: sol.objective_value,
                cuts: sol
                    .active_cuts
                    .iter()
                    .map(|c| names(c.vertices()))
                    .collect(),
                unscaled_x: sol
                    .unscaled
                    .as_ref()
                    .map(|u| model::vec_to_edge_values(&g, u.values())),
            };
            emit_json(&result, out.as_deref())?;
        }
        Command::Decompose { input, out } => {
            let inp: DecomposeInput = read_json(&input)?;
            let g = model::validate_instance(&inp.instance)?;
            let x = EdgeVector::new(&g, model::edge_values_to_vec(&g, &inp.x, 0.0)?)?;
            let d =
                decomposition::decompose_with_cap(&g, &x, decomposition::default_column_cap(&g))?;
            let result = DecomposeOutput {
                mixture: d.mixture.to_json(&g),
                columns: d.columns,
                priced_columns: d.priced_columns,
                max_error: d.max_error,
            };
            emit_json(&result, out.as_deref())?;
        }
        Command::Match {
            instance,
            weights,
            out,
        } => {
            let g = load_instance(&instance)?;
            let w = load_weights(&g, weights.as_deref())?;
            let r = qswitch_core::max_weight_matching(&g, &w)?;
            emit_json(
                &MatchOutput {
                    matching: model::matching_to_names(&g, &r.matching),
                    weight: r.weight,
                },
                out.as_deref(),
            )?;
        }
        Command::Simulate {
            instance,
            frame,
            horizon,
            seed,
            alg,
            mixture,
            x,
            warmup,
            adaptive,
            trace_out,
            stats_out,
        } => {
            let g = load_instance(&instance)?;
            let policy = match alg {
                SimAlg::One => Policy::Lp(Variant::Alg1),
                SimAlg::Two => Policy::Lp(Variant::Alg2),
                SimAlg::Fixed => {
                    let mix = match (mixture, x) {
                        (Some(p), _) => {
                            MatchingMixture::from_json(&g, &read_json::<MixtureJson>(&p)?)?
                        }
                        (None, Some(p)) => {
                            let values: Vec<EdgeValue> = read_json(&p)?;
                            let xv =
                                EdgeVector::new(&g, model::edge_values_to_vec(&g, &values, 0.0)?)?;
                            decomposition::decompose(&g, &xv)?
                        }
                        (None, None) => bail!("--alg fixed needs --mixture or --x"),
                    };
                    Policy::Fixed(mix)
                }
            };
            let policy_label = match &policy {
                Policy::Lp(v) => v.label().to_owned(),
                Policy::Fixed(_) => "fixed".to_owned(),
            };
            let mut cfg = SimConfig::new(g.clone(), policy, frame, horizon, seed);
            cfg.warmup = warmup;
            cfg.adaptive = adaptive.map(|c| AdaptiveFrame {
                min_frame: frame,
                coefficient: c,
            });
            cfg.record_trace = trace_out.is_some();
            let output = sim::run(&cfg)?;
            if let (Some(p), Some(rows)) = (&trace_out, &output.trace) {
                let f = BufWriter::new(
                    File::create(p).with_context(|| format!("creating {}", p.display()))?,
                );
                sim::write_trace_csv(&g, rows, f)?;
            }
            let drift = sim::drift_report(&output.stats).ok();
            let s = &output.stats;
            eprintln!(
                "slots={} served={} arrivals={} mean_total_R={:.3} verdict={}",
                s.slots,
                s.served.iter().sum::<u64>(),
                s.arrivals.iter().sum::<u64>(),
                s.mean_total_r,
                drift
                    .as_ref()
                    .map_or("n/a".to_owned(), |d| format!("{:?}", d.verdict)
                        .to_lowercase()),
            );
            let result = SimulateOutput {
                instance: &instance.to_string_lossy(),
                frame,
                horizon,
                seed,
                policy: policy_label,
                stats: s,
                drift,
            };
            emit_json(&result, stats_out.as_deref())?;
        }
        Command::Figures {
            out_dir,
            spec,
            reference_buffer,
        } => {
            let spec = load_spec(spec.as_deref())?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let create = |name: &str| -> Result<BufWriter<File>> {
                let p = out_dir.join(name);
                Ok(BufWriter::new(
                    File::create(&p).with_context(|| format!("creating {}", p.display()))?,
                ))
            };
            let rows = experiments::run_sweep(&spec)?;
            experiments::write_sweep_csv(&rows, create("sweep.csv")?)?;
            if spec.variants.contains(&Variant::Alg1) && spec.variants.contains(&Variant::Alg2) {
                let cmp = experiments::compare_variants(&rows)?;
                experiments::write_comparison_csv(&cmp, create("comparison.csv")?)?;
                eprintln!("{cmp}");
            }
            let profiles = experiments::gap_profiles(&spec, reference_buffer)?;
            experiments::write_gap_csv(&profiles, create("gap.csv")?)?;
            emit_json(
                &ResolvedConfig::new(spec, reference_buffer),
                Some(&out_dir.join("resolved_config.json")),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
