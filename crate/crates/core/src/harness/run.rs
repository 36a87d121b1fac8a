//! Seeded sweeps over sample sizes and trials.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{DataMode, ExperimentConfig, ExperimentKind, LearnerKind, NoiseKind, SamplerConfig};
use super::report::{aggregate, ExperimentReport, Provenance, ResolvedSettings, TrialRow};
use crate::error::{domain, Error, Result};
use crate::exact::ExactTable;
use crate::graph::TwoHopGraph;
use crate::metrics::{evaluate, structure_score};
use crate::model::RbmModel;
use crate::potential::MrfPotential;
use crate::regression::{
    assemble_partial_potential, assemble_potential, conditional_query, learn_potentials, learn_potentials_exact,
    reconstruct_distribution, AlphatronConfig,
};
use crate::sampling::{
    apply_bitflip, bitflip_distribution, derive_seed, perturb_linf, sample_exact, sample_gibbs_chains, SampleSet,
    RNG_ALGORITHM,
};
use crate::structure::{
    compute_robustness_limits, compute_thresholds, learn_full_structure, LearnThresholds, LearnerConfig,
    StatisticSource,
};
use crate::table::{spin, DistributionTable, DEFAULT_ENUMERATION_LIMIT};

const NOISE_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;
const BITFLIP_STREAM: u64 = 3;
const REGRESSION_STREAM: u64 = 4;

/// `derive_seed([base_seed, M, trial])`, so any cell can be rerun alone.
pub fn trial_seed(base_seed: u64, m: usize, trial: usize) -> u64 {
    derive_seed(&[base_seed, m as u64, trial as u64])
}

/// Runs whichever experiment `cfg.experiment` names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let nodes: Vec<usize> = cfg.partial.nodes.iter().map(|v| v.wrapping_sub(1)).collect();
    run_kind(cfg, cfg.experiment, &nodes)
}

pub fn run_structure_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_kind(cfg, ExperimentKind::Structure, &[])
}

pub fn run_state_learning_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_kind(cfg, ExperimentKind::StateLearning, &[])
}

/// Learns only the partial potentials of `nodes` (0-based) and scores the
/// conditionals they imply.
pub fn run_partial_learning_experiment(cfg: &ExperimentConfig, nodes: &[usize]) -> Result<ExperimentReport> {
    run_kind(cfg, ExperimentKind::PartialLearning, nodes)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    kind: ExperimentKind,
    model: RbmModel,
    truth: TwoHopGraph,
    clean: Option<DistributionTable>,
    clean_exact: Option<ExactTable>,
    settings: ResolvedSettings,
    nodes: Vec<usize>,
}

fn resolve_learner(cfg: &ExperimentConfig, th: Option<&LearnThresholds>) -> Result<LearnerConfig> {
    let spec = cfg.learner;
    let need = |what: &str| {
        Error::Config(format!("learner.{what} is unset and the model has no class thresholds (all couplings zero?)"))
    };
    Ok(match spec.kind {
        LearnerKind::Lc => LearnerConfig::Lc {
            tau: match spec.tau {
                Some(t) => t,
                None => th.ok_or_else(|| need("tau"))?.tau,
            },
            max_set: match spec.max_set {
                Some(s) => s,
                None => th.ok_or_else(|| need("max_set"))?.max_set(),
            },
        },
        LearnerKind::Ferro => LearnerConfig::Ferro {
            eta: match spec.eta {
                Some(e) => e,
                None => th.ok_or_else(|| need("eta"))?.eta,
            },
            k: match spec.k {
                Some(k) => k,
                None => th.ok_or_else(|| need("k"))?.k,
            },
        },
    })
}

fn prepare<'a>(cfg: &'a ExperimentConfig, kind: ExperimentKind, nodes: &[usize]) -> Result<Context<'a>> {
    cfg.validate()?;
    let model = cfg.model.load()?;
    let n = model.n();
    let class = model.validate(0.0, 0.0);
    let th = compute_thresholds(class.alpha, class.beta, class.d2).ok();
    let learner = resolve_learner(cfg, th.as_ref())?;

    let limits = |p: f64| -> Result<_> {
        let th = th.as_ref().ok_or_else(|| Error::Config("noise limits need a model with nonzero couplings".into()))?;
        compute_robustness_limits(th, n, p)
    };
    let noise = cfg.noise;
    let eps_inf = match noise.kind {
        NoiseKind::LinfPerturb => Some(match (noise.eps_inf, noise.eps_inf_fraction_of_limit) {
            (Some(e), _) => e,
            (None, Some(f)) => f * limits(f64::INFINITY)?.eps_p_max_lc,
            (None, None) => unreachable!("validated"),
        }),
        _ => None,
    };
    let rho = match noise.kind {
        NoiseKind::Bitflip => Some(match (noise.rho, noise.rho_fraction_of_limit) {
            (Some(r), _) => r,
            (None, Some(f)) => f * limits(noise.p_norm)?.rho_max_lc,
            (None, None) => unreachable!("validated"),
        }),
        _ => None,
    };

    let mut sorted: Vec<usize> = nodes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if kind == ExperimentKind::PartialLearning {
        if sorted.is_empty() {
            return Err(Error::Config("partial learning needs at least one node".into()));
        }
        if let Some(v) = sorted.iter().find(|&&v| v >= n) {
            return Err(Error::Config(format!("partial node {} outside 1..={n}", v.wrapping_add(1))));
        }
    }

    let needs_table = kind != ExperimentKind::Structure
        || cfg.mode == DataMode::InfiniteSample
        || matches!(cfg.sampler, SamplerConfig::Exact)
        || noise.kind == NoiseKind::LinfPerturb;
    let clean = if needs_table || n <= DEFAULT_ENUMERATION_LIMIT { Some(model.marginal_distribution()?) } else { None };
    let clean_exact = match cfg.mode {
        DataMode::InfiniteSample => Some(ExactTable::from_model(&model)?),
        DataMode::Sampled => None,
    };

    Ok(Context {
        cfg,
        kind,
        truth: model.two_hop(),
        clean,
        clean_exact,
        settings: ResolvedSettings {
            n,
            alpha: class.alpha,
            beta: class.beta,
            d2: class.d2,
            learner,
            symmetrization: cfg.learner.symmetrization,
            eps_inf,
            rho,
            partial_nodes: sorted.iter().map(|v| v + 1).collect(),
        },
        model,
        nodes: sorted,
    })
}

fn config_digest(cfg: &ExperimentConfig) -> Result<String> {
    Ok(format!("{:x}", Sha256::digest(cfg.to_toml_string()?.as_bytes())))
}

fn run_kind(cfg: &ExperimentConfig, kind: ExperimentKind, nodes: &[usize]) -> Result<ExperimentReport> {
    let ctx = prepare(cfg, kind, nodes)?;
    let sizes: Vec<usize> = match cfg.mode {
        DataMode::Sampled => cfg.sample_sizes.clone(),
        DataMode::InfiniteSample => vec![0],
    };
    let cells: Vec<(usize, usize)> =
        sizes.iter().flat_map(|&m| (0..cfg.trials).map(move |t| (m, t))).collect();
    let run_cells = || -> Vec<TrialRow> { cells.par_iter().map(|&(m, t)| run_cell(&ctx, m, t)).collect() };
    let rows = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?
            .install(run_cells)
    } else {
        run_cells()
    };
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        experiment: kind,
        mode: cfg.mode,
        provenance: Provenance {
            config_sha256: config_digest(cfg)?,
            base_seed: cfg.base_seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
        },
        settings: ctx.settings.clone(),
        targets: cfg.targets,
        aggregates: aggregate(&rows),
        rows,
    })
}

fn run_cell(ctx: &Context, m: usize, trial: usize) -> TrialRow {
    let seed = trial_seed(ctx.cfg.base_seed, m, trial);
    let start = Instant::now();
    let mut row = TrialRow::empty(m, trial, seed);
    if let Err(e) = run_trial(ctx, m, seed, &mut row) {
        row = TrialRow { error: Some(e.to_string()), ..TrialRow::empty(m, trial, seed) };
    }
    row.runtime_ms = start.elapsed().as_millis() as u64;
    row
}

/// What a trial learns from: shots, or the exact target distribution.
enum Data {
    Shots(SampleSet),
    Exact(ExactTable),
}

fn run_trial(ctx: &Context, m: usize, seed: u64, row: &mut TrialRow) -> Result<()> {
    let cfg = ctx.cfg;
    let s = ctx.settings.clone();

    // Distribution of the measured outcomes, before and after bit flips.
    let mut base = ctx.clean.clone();
    let mut base_exact = ctx.clean_exact.clone();
    if let Some(eps) = s.eps_inf {
        let noise_seed = derive_seed(&[seed, NOISE_STREAM]);
        match cfg.mode {
            DataMode::Sampled => {
                let clean = ctx.clean.as_ref().expect("table built for linf noise");
                let (t, achieved) = perturb_linf(clean, eps, cfg.noise.p_norm, noise_seed)?;
                row.achieved_linf = Some(achieved.linf);
                base = Some(t);
            }
            DataMode::InfiniteSample => {
                let exact = ctx.clean_exact.as_ref().expect("exact table built in infinite mode");
                let (t, achieved) = exact.perturb_linf(eps, noise_seed)?;
                row.achieved_linf = Some(achieved);
                base = Some(t.to_table()?);
                base_exact = Some(t);
            }
        }
    }
    let target = match (s.rho, &base) {
        (Some(rho), Some(b)) => Some(bitflip_distribution(b, rho)?),
        _ => base.clone(),
    };

    let data = match cfg.mode {
        DataMode::Sampled => {
            let sample_seed = derive_seed(&[seed, SAMPLE_STREAM]);
            let shots = match cfg.sampler {
                SamplerConfig::Exact => sample_exact(base.as_ref().expect("table built for exact sampler"), m, sample_seed)?,
                SamplerConfig::Gibbs { burn_in, thinning, chains } => {
                    sample_gibbs_chains(&ctx.model, m, chains, burn_in, thinning, sample_seed)?
                }
            };
            let shots = match s.rho {
                Some(rho) => apply_bitflip(&shots, rho, derive_seed(&[seed, BITFLIP_STREAM]))?,
                None => shots,
            };
            Data::Shots(shots)
        }
        DataMode::InfiniteSample => Data::Exact(match (s.rho, &target) {
            (Some(_), Some(t)) => ExactTable::from_table(t)?,
            _ => base_exact.expect("exact table built in infinite mode"),
        }),
    };

    let learn_graph = ctx.kind == ExperimentKind::Structure
        || match ctx.kind {
            ExperimentKind::StateLearning => !cfg.state.use_true_structure,
            _ => !cfg.partial.use_true_structure,
        };
    let graph = if learn_graph {
        let source: &dyn StatisticSource = match &data {
            Data::Shots(shots) => shots,
            Data::Exact(t) => t,
        };
        let learned = learn_full_structure(source, &s.learner, s.symmetrization)?.graph;
        let score = structure_score(&learned, &ctx.truth)?;
        row.success = Some(score.exact_match);
        row.precision = Some(score.precision);
        row.recall = Some(score.recall);
        learned
    } else {
        ctx.truth.clone()
    };
    if ctx.kind == ExperimentKind::Structure {
        return Ok(());
    }

    let target = target.ok_or(Error::Capacity { n: s.n, limit: DEFAULT_ENUMERATION_LIMIT })?;
    let nodes: Vec<usize> = match ctx.kind {
        ExperimentKind::PartialLearning => ctx.nodes.clone(),
        _ => (0..s.n).collect(),
    };
    let reg = AlphatronConfig { seed: derive_seed(&[seed, REGRESSION_STREAM, cfg.regression.seed]), ..cfg.regression.clone() };
    let results = match &data {
        Data::Shots(shots) => learn_potentials(shots, &graph, &nodes, &reg)?,
        Data::Exact(_) => learn_potentials_exact(&target, &graph, &nodes, &reg)?,
    };

    if ctx.kind == ExperimentKind::PartialLearning {
        let q = assemble_partial_potential(&results, &graph, &nodes, &cfg.assembly)?;
        let boundary = graph.boundary_of(&nodes);
        row.max_conditional_error =
            Some(max_conditional_error(&q, &nodes, &boundary, &target, cfg.partial.min_boundary_prob)?);
        return Ok(());
    }

    let q = assemble_potential(&results, &graph, &cfg.assembly)?;
    let learned = reconstruct_distribution(&q)?;
    let vs_target = evaluate(&learned, &target, 1.0, None)?;
    row.fidelity = Some(vs_target.fidelity);
    row.overlap = Some(vs_target.overlap);
    row.l1 = Some(vs_target.l1);
    if let Some(clean) = &ctx.clean {
        let vs_clean = evaluate(&learned, clean, 1.0, None)?;
        row.fidelity_clean = Some(vs_clean.fidelity);
        row.l1_clean = Some(vs_clean.l1);
    }
    Ok(())
}

/// Largest `|p_q(x_J | x_B) - p(x_J | x_B)|` over every `x_J` and every
/// boundary assignment `x_B` with `p(x_B) ≥ min_prob`, where `p_q` is the
/// conditional implied by `q` and `p` is `truth`. `nodes` must be sorted.
pub fn max_conditional_error(
    q: &MrfPotential,
    nodes: &[usize],
    boundary: &[usize],
    truth: &DistributionTable,
    min_prob: f64,
) -> Result<f64> {
    let vars: Vec<usize> = nodes.iter().chain(boundary).copied().collect();
    let marg = truth.marginal(&vars)?;
    let inner = 1usize << nodes.len();
    let mut worst: Option<f64> = None;
    for b in 0..1usize << boundary.len() {
        let joint = &marg.probs()[b * inner..(b + 1) * inner];
        let mass: f64 = joint.iter().sum();
        if mass < min_prob || mass == 0.0 {
            continue;
        }
        let assignment: BTreeMap<usize, i8> = boundary.iter().enumerate().map(|(i, &v)| (v, spin(b, i))).collect();
        let cond = conditional_query(q, nodes, &assignment)?;
        let err = cond.table.probs().iter().zip(joint).map(|(a, p)| (a - p / mass).abs()).fold(0.0, f64::max);
        worst = Some(worst.map_or(err, |w: f64| w.max(err)));
    }
    match worst {
        Some(w) => Ok(w),
        None => domain(format!("no boundary assignment has probability at least {min_prob}")),
    }
}
