//! `nnq`: generate models, draw shots, learn structure and potentials,
//! evaluate, and run configured experiments.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use nnq_core::exact::ExactTable;
use nnq_core::generators::{gen_chain_model, random_lc_rbm, RandomRbmSpec};
use nnq_core::harness::{run_experiment, ExperimentConfig};
use nnq_core::metrics::evaluate;
use nnq_core::regression::{assemble_potential, learn_potentials, reconstruct_distribution, AlphatronConfig, AssemblyConfig};
use nnq_core::sampling::{
    bitflip_distribution, perturb_linf, read_samples_file, sample_exact, sample_gibbs_chains, write_samples_binary,
    write_samples_text,
};
use nnq_core::structure::{
    compute_robustness_limits, compute_sample_bounds, compute_thresholds, learn_full_structure, LearnedStructure,
    LearnerConfig, StatisticSource, Symmetrization,
};
use nnq_core::{DistributionTable, MrfPotential, RbmModel, TwoHopGraph};

#[derive(Debug, Parser)]
#[command(name = "nnq", version, about = "Learn RBM-induced magnitude distributions from computational-basis shots")]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Experiment config (TOML); required by `experiment`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a model to model.json.
    GenModel(GenModelArgs),
    /// Draw shots from a model into samples.txt or samples.bin.
    Sample(SampleArgs),
    /// Write a noisy distribution table to table.json.
    Perturb(PerturbArgs),
    /// Learn the two-hop graph into structure.json.
    LearnStructure(LearnStructureArgs),
    /// Learn all partial potentials into potential.json and partials.json.
    LearnParams(LearnParamsArgs),
    /// Compare a learned distribution with the truth.
    Evaluate(EvaluateArgs),
    /// Print learner thresholds, sample bounds and noise limits.
    Thresholds(ThresholdsArgs),
    /// Run the experiment described by --config.
    Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Chain,
    Random,
}

#[derive(Debug, Args)]
struct GenModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Chain)]
    kind: ModelKind,
    #[arg(long)]
    n: usize,
    /// Hidden units (random models).
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Chain coupling.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    j: f64,
    /// Chain visible field.
    #[arg(long, default_value_t = -0.1, allow_negative_numbers = true)]
    h: f64,
    /// Chain hidden field.
    #[arg(long, default_value_t = -0.1, allow_negative_numbers = true)]
    g: f64,
    /// Random models: lower bound on the smallest coupling.
    #[arg(long, default_value_t = 0.2)]
    alpha_min: f64,
    /// Random models: upper bound on the smallest coupling.
    #[arg(long, default_value_t = 1.0)]
    alpha_max: f64,
    /// Random models: largest row or column strength.
    #[arg(long, default_value_t = 3.0)]
    beta: f64,
    #[arg(long)]
    ferromagnetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerKind {
    Exact,
    Gibbs,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, value_enum, default_value_t = SamplerKind::Exact)]
    sampler: SamplerKind,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thinning: usize,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Write the binary format instead of text.
    #[arg(long)]
    binary: bool,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps_inf: f64,
    /// Bit-flip probability applied after the magnitude perturbation.
    #[arg(long)]
    rho: Option<f64>,
    /// Norm of the reported distance; `inf` allowed.
    #[arg(long, default_value = "inf")]
    p_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LearnerArg {
    Lc,
    Ferro,
}

#[derive(Debug, Args)]
struct LearnStructureArgs {
    /// Shots to learn from.
    #[arg(long, conflicts_with = "model")]
    samples: Option<PathBuf>,
    /// Learn from the model's exact distribution instead of shots.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LearnerArg::Lc)]
    learner: LearnerArg,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_set: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Class parameters used for thresholds left unset.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    d2: Option<usize>,
    /// Keep only edges chosen by both endpoints.
    #[arg(long)]
    and: bool,
}

#[derive(Debug, Args)]
struct LearnParamsArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Graph or structure JSON.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    holdout_fraction: f64,
    #[arg(long)]
    order_cap: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Potential, model or table JSON.
    #[arg(long)]
    learned: PathBuf,
    /// Potential, model or table JSON.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "1")]
    p_norm: f64,
    /// Learned graph to score against `--true-graph`.
    #[arg(long, requires = "true_graph")]
    graph: Option<PathBuf>,
    #[arg(long)]
    true_graph: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ThresholdsArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long)]
    d2: usize,
    /// Visible count for sample bounds and noise limits.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    zeta: f64,
    #[arg(long, default_value = "inf")]
    p_norm: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)?)?;
    Ok(path)
}

/// Writes `fields` as one JSON object or a two-line CSV.
fn write_record(dir: &Path, stem: &str, format: Format, fields: &[(&str, String)]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    match format {
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = fields
                .iter()
                .map(|(k, v)| {
                    let value = if v.is_empty() {
                        serde_json::Value::Null
                    } else {
                        serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()))
                    };
                    (k.to_string(), value)
                })
                .collect();
            write_json(dir, &format!("{stem}.json"), &map)
        }
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let header: Vec<&str> = fields.iter().map(|f| f.0).collect();
            let values: Vec<&str> = fields.iter().map(|f| f.1.as_str()).collect();
            fs::write(&path, format!("{}\n{}\n", header.join(","), values.join(",")))?;
            Ok(path)
        }
    }
}

/// A distribution from a potential, model or table file.
fn load_distribution(path: &Path) -> Result<DistributionTable> {
    let value: serde_json::Value = read_json(path)?;
    if let Ok(q) = serde_json::from_value::<MrfPotential>(value.clone()) {
        return Ok(reconstruct_distribution(&q)?);
    }
    if let Ok(model) = serde_json::from_value::<RbmModel>(value.clone()) {
        return Ok(model.marginal_distribution()?);
    }
    serde_json::from_value::<DistributionTable>(value)
        .with_context(|| format!("{} is not a potential, model or table", path.display()))
}

fn load_graph(path: &Path) -> Result<TwoHopGraph> {
    Ok(LearnedStructure::from_json(&fs::read_to_string(path)?)?.graph)
}

fn gen_model(cli: &Cli, a: &GenModelArgs) -> Result<String> {
    let model = match a.kind {
        ModelKind::Chain => gen_chain_model(a.n, a.j, a.h, a.g)?,
        ModelKind::Random => {
            let spec = RandomRbmSpec {
                alpha_range: (a.alpha_min, a.alpha_max),
                beta_max: a.beta,
                ferromagnetic: a.ferromagnetic,
                ..RandomRbmSpec::new(a.n, a.m)
            };
            random_lc_rbm(&spec, &mut ChaCha20Rng::seed_from_u64(cli.seed))?
        }
    };
    let path = write_json(&cli.out, "model.json", &model)?;
    Ok(format!("wrote {} (n={}, m={}, d2={})", path.display(), model.n(), model.m(), model.two_hop().max_degree()))
}

fn sample(cli: &Cli, a: &SampleArgs) -> Result<String> {
    let model: RbmModel = read_json(&a.model)?;
    let shots = match a.sampler {
        SamplerKind::Exact => sample_exact(&model.marginal_distribution()?, a.count, cli.seed)?,
        SamplerKind::Gibbs => sample_gibbs_chains(&model, a.count, a.chains, a.burn_in, a.thinning, cli.seed)?,
    };
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join(if a.binary { "samples.bin" } else { "samples.txt" });
    let w = BufWriter::new(fs::File::create(&path)?);
    if a.binary {
        write_samples_binary(&shots, w)?;
    } else {
        write_samples_text(&shots, w)?;
    }
    Ok(format!("wrote {} ({} shots, n={})", path.display(), shots.count(), shots.n()))
}

fn perturb(cli: &Cli, a: &PerturbArgs) -> Result<String> {
    let model: RbmModel = read_json(&a.model)?;
    let clean = model.marginal_distribution()?;
    let (mut table, achieved) = perturb_linf(&clean, a.eps_inf, a.p_norm, cli.seed)?;
    if let Some(rho) = a.rho {
        table = bitflip_distribution(&table, rho)?;
    }
    let path = write_json(&cli.out, "table.json", &table)?;
    let mut summary = format!("wrote {} (achieved linf={:e}", path.display(), achieved.linf);
    if a.p_norm.is_finite() {
        summary.push_str(&format!(", l{}={:e}", a.p_norm, achieved.lp));
    }
    Ok(summary + ")")
}

fn learn_structure(cli: &Cli, a: &LearnStructureArgs) -> Result<String> {
    let source: Box<dyn StatisticSource> = match (&a.samples, &a.model) {
        (Some(s), None) => Box::new(read_samples_file(s)?),
        (None, Some(m)) => Box::new(ExactTable::from_model(&read_json::<RbmModel>(m)?)?),
        _ => bail!("exactly one of --samples, --model is required"),
    };
    let thresholds = || -> Result<_> {
        match (a.alpha, a.beta, a.d2) {
            (Some(al), Some(be), Some(d2)) => Ok(compute_thresholds(al, be, d2)?),
            _ => bail!("unset thresholds need --alpha, --beta and --d2"),
        }
    };
    let config = match a.learner {
        LearnerArg::Lc => LearnerConfig::Lc {
            tau: match a.tau {
                Some(t) => t,
                None => thresholds()?.tau,
            },
            max_set: match a.max_set {
                Some(s) => s,
                None => a.tau.map_or_else(|| thresholds().map(|t| t.max_set()), |_| Ok(source.num_nodes()))?,
            },
        },
        LearnerArg::Ferro => LearnerConfig::Ferro {
            eta: match a.eta {
                Some(e) => e,
                None => thresholds()?.eta,
            },
            k: match a.k {
                Some(k) => k,
                None => thresholds()?.k,
            },
        },
    };
    let sym = if a.and { Symmetrization::And } else { Symmetrization::Or };
    let learned = learn_full_structure(source.as_ref(), &config, sym)?;
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("structure.json");
    fs::write(&path, learned.to_json()?)?;
    Ok(format!(
        "wrote {} ({} edges, max degree {})",
        path.display(),
        learned.graph.edges().len(),
        learned.graph.max_degree()
    ))
}

fn learn_params(cli: &Cli, a: &LearnParamsArgs) -> Result<String> {
    let shots = read_samples_file(&a.samples)?;
    let graph = load_graph(&a.graph)?;
    let cfg = AlphatronConfig {
        lambda: a.lambda,
        iterations: a.iterations,
        holdout_fraction: a.holdout_fraction,
        feature_order_cap: a.order_cap,
        seed: cli.seed,
    };
    let nodes: Vec<usize> = (0..graph.n()).collect();
    let results = learn_potentials(&shots, &graph, &nodes, &cfg)?;
    let q = assemble_potential(&results, &graph, &AssemblyConfig::default())?;
    write_json(&cli.out, "partials.json", &results)?;
    let path = write_json(&cli.out, "potential.json", &q)?;
    Ok(format!("wrote {} ({} monomials, order {})", path.display(), q.len(), q.order()))
}

fn evaluate_cmd(cli: &Cli, a: &EvaluateArgs) -> Result<String> {
    let learned = load_distribution(&a.learned)?;
    let truth = load_distribution(&a.truth)?;
    let graphs = match (&a.graph, &a.true_graph) {
        (Some(g), Some(t)) => Some((load_graph(g)?, load_graph(t)?)),
        _ => None,
    };
    let report = evaluate(&learned, &truth, a.p_norm, graphs.as_ref().map(|(g, t)| (g, t)))?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    let fields = [
        ("l1", report.l1.to_string()),
        ("lp", report.lp.to_string()),
        ("p_norm", if a.p_norm.is_infinite() { "\"inf\"".into() } else { a.p_norm.to_string() }),
        ("linf", report.linf.to_string()),
        ("fidelity", report.fidelity.to_string()),
        ("overlap", report.overlap.to_string()),
        ("structure_exact_match", opt(report.structure_exact_match.map(|b| b.to_string()))),
        ("edge_precision", opt(report.edge_precision.map(|v| v.to_string()))),
        ("edge_recall", opt(report.edge_recall.map(|v| v.to_string()))),
    ];
    let path = write_record(&cli.out, "evaluation", cli.format, &fields)?;
    Ok(format!("wrote {} (fidelity={:.6}, l1={:.6})", path.display(), report.fidelity, report.l1))
}

fn thresholds(cli: &Cli, a: &ThresholdsArgs) -> Result<String> {
    let th = compute_thresholds(a.alpha, a.beta, a.d2)?;
    let mut fields = vec![
        ("tau", th.tau.to_string()),
        ("delta", th.delta_lc.to_string()),
        ("gamma", th.gamma.to_string()),
        ("eta", th.eta.to_string()),
        ("k", th.k.to_string()),
    ];
    if let Some(n) = a.n {
        let b = compute_sample_bounds(&th, n, a.zeta)?;
        let r = compute_robustness_limits(&th, n, a.p_norm)?;
        fields.extend([
            ("ln_m_lc", b.ln_m_lc.to_string()),
            ("ln_m_frbm", b.ln_m_frbm.to_string()),
            ("ln_m_frbm_robust", b.ln_m_frbm_robust.to_string()),
            ("eps_p_max_lc", r.eps_p_max_lc.to_string()),
            ("rho_max_lc", r.rho_max_lc.to_string()),
            ("eps_p_max_frbm", r.eps_p_max_frbm.to_string()),
            ("rho_max_frbm", r.rho_max_frbm.to_string()),
        ]);
    }
    // Non-finite values are not JSON numbers.
    for f in fields.iter_mut() {
        if f.1.parse::<f64>().is_ok_and(|v| !v.is_finite()) {
            f.1 = format!("\"{}\"", f.1);
        }
    }
    write_record(&cli.out, "thresholds", cli.format, &fields)?;
    Ok(format!("tau={:e} delta={:e} gamma={:e} eta={:e} k={}", th.tau, th.delta_lc, th.gamma, th.eta, th.k))
}

fn experiment(cli: &Cli) -> Result<String> {
    let Some(path) = &cli.config else {
        bail!("experiment needs --config <file>");
    };
    let cfg = ExperimentConfig::from_file(path)?;
    let report = run_experiment(&cfg)?;
    let (json, csv) = report.write_to_dir(&cli.out)?;
    Ok(format!("{} -> {}, {}", report.summary_line(), json.display(), csv.display()))
}

fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::GenModel(a) => gen_model(cli, a),
        Command::Sample(a) => sample(cli, a),
        Command::Perturb(a) => perturb(cli, a),
        Command::LearnStructure(a) => learn_structure(cli, a),
        Command::LearnParams(a) => learn_params(cli, a),
        Command::Evaluate(a) => evaluate_cmd(cli, a),
        Command::Thresholds(a) => thresholds(cli, a),
        Command::Experiment => experiment(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
