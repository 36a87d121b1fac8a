//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Set `NNQ_ACCEPTANCE_GIBBS=1` to add the optional n = 20
//! Gibbs run of criterion 1.

mod common;

use std::time::Instant;

use nnq_core::exact::ExactTable;
use nnq_core::harness::{run_experiment, ExperimentConfig, ModelSource, SamplerConfig};
use nnq_core::regression::{
    assemble_potential, learn_potentials_exact, reconstruct_distribution, AlphatronConfig, AssemblyConfig,
};
use nnq_core::sampling::sample_exact;
use nnq_core::structure::{
    compute_robustness_limits, compute_thresholds, empirical_cond_covariance_avg, empirical_influence,
    exact_cond_covariance_avg, exact_influence, learn_full_structure, LearnerConfig, StatisticSource, Symmetrization,
};
use nnq_core::table::spins_of;
use nnq_core::{DistributionTable, MrfPotential, Result};

use common::{config_path, ensemble_model, ensemble_model_with, subsets_up_to};

const ENSEMBLE: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&config_path(name)).expect("bundled config parses")
}

/// Success rates must rise with M except for at most one inversion.
fn inversions(rates: &[f64]) -> usize {
    rates.windows(2).filter(|w| w[1] < w[0]).count()
}

fn criterion_1() -> Result<Outcome> {
    let cfg = load("chain_structure.toml");
    let report = run_experiment(&cfg)?;
    let rates: Vec<f64> = report.aggregates.iter().map(|a| a.success_rate.unwrap_or(0.0)).collect();
    let at_4000 = report.aggregates.iter().find(|a| a.m == 4000).and_then(|a| a.success_rate).unwrap_or(0.0);
    let inv = inversions(&rates);
    let mut detail = format!("rates {rates:?}, {inv} inversion(s), rate at M=4000 = {at_4000}");
    let mut pass = inv <= 1 && at_4000 >= 0.98;

    if std::env::var("NNQ_ACCEPTANCE_GIBBS").is_ok_and(|v| v == "1") {
        let mut big = cfg.clone();
        big.model = ModelSource::Chain { n: 20, j: 1.0, h: -0.1, g: -0.1 };
        big.sampler = SamplerConfig::Gibbs { burn_in: 2000, thinning: 10, chains: 8 };
        big.sample_sizes = vec![3700];
        big.trials = 20;
        let r = run_experiment(&big)?;
        let rate = r.aggregates[0].success_rate.unwrap_or(0.0);
        detail.push_str(&format!("; n=20 Gibbs rate at M=3700 = {rate}"));
        pass &= rate >= 0.95;
    } else {
        detail.push_str("; n=20 Gibbs run skipped");
    }
    outcome(pass, detail)
}

fn criterion_2() -> Result<Outcome> {
    let mut cfg = load("chain_state.toml");
    cfg.sample_sizes = vec![2000];
    cfg.trials = 20;
    let report = run_experiment(&cfg)?;
    let agg = &report.aggregates[0];
    let mean = agg.mean_fidelity.unwrap_or(0.0);
    outcome(
        mean >= 0.99 && agg.failed_trials == 0,
        format!("mean fidelity {mean:.5} (std {:.5}) over {} trials", agg.std_fidelity.unwrap_or(f64::NAN), agg.trials),
    )
}

fn two_hop_pairs(model: &nnq_core::RbmModel) -> Vec<(usize, usize)> {
    let g = model.two_hop();
    (0..model.n()).flat_map(|u| g.neighbors(u).iter().map(move |&v| (u, v)).collect::<Vec<_>>()).collect()
}

fn criterion_3() -> Result<Outcome> {
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut tightest = f64::INFINITY;
    for i in 0..ENSEMBLE {
        let model = ensemble_model(i);
        let class = model.validate(0.0, 0.0);
        let bound = class.alpha.powi(2) * (-12.0 * class.beta).exp();
        let exact = ExactTable::from_model(&model)?;
        for (u, v) in two_hop_pairs(&model) {
            let others: Vec<usize> = (0..model.n()).filter(|&w| w != u && w != v).collect();
            for s in subsets_up_to(&others, 3) {
                let cov = exact.cond_cov_avg(u, v, &s)?;
                checked += 1;
                tightest = tightest.min(cov / bound);
                if cov < bound {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0 && checked > 0,
        format!("{violations} violations over {checked} (pair, S) cases; smallest cov/bound = {tightest:.3e}"),
    )
}

fn criterion_4() -> Result<Outcome> {
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for i in 0..ENSEMBLE {
        let model = ensemble_model(i);
        let table = model.marginal_distribution()?;
        let g = model.two_hop();
        for u in 0..model.n() {
            let nbhd = g.neighbors(u);
            for v in (0..model.n()).filter(|&v| v != u && !nbhd.contains(&v)) {
                let free: Vec<usize> = (0..model.n()).filter(|&w| w != u && w != v && !nbhd.contains(&w)).collect();
                for extra in subsets_up_to(&free, free.len()) {
                    let mut s: Vec<usize> = nbhd.iter().copied().chain(extra).collect();
                    s.sort_unstable();
                    worst = worst.max(exact_cond_covariance_avg(&table, u, v, &s)?.abs());
                    checked += 1;
                }
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |cov| = {worst:.3e} over {checked} separator cases"))
}

fn criterion_5() -> Result<Outcome> {
    let (mut lc_ok, mut ferro_ok, mut ferro_total) = (0usize, 0usize, 0usize);
    for i in 0..ENSEMBLE {
        let model = ensemble_model(i);
        let class = model.validate(0.0, 0.0);
        let th = compute_thresholds(class.alpha, class.beta, class.d2)?;
        let exact = ExactTable::from_model(&model)?;
        let truth = model.two_hop();
        let lc = LearnerConfig::Lc { tau: th.tau, max_set: th.max_set() };
        if learn_full_structure(&exact, &lc, Symmetrization::Or)?.graph == truth {
            lc_ok += 1;
        }
        if class.is_ferromagnetic {
            ferro_total += 1;
            let ferro = LearnerConfig::Ferro { eta: th.eta, k: th.k };
            if learn_full_structure(&exact, &ferro, Symmetrization::Or)?.graph == truth {
                ferro_ok += 1;
            }
        }
    }
    outcome(
        lc_ok == ENSEMBLE && ferro_ok == ferro_total && ferro_total > 0,
        format!("LC {lc_ok}/{ENSEMBLE}, ferro {ferro_ok}/{ferro_total} exact matches"),
    )
}

fn criterion_6() -> Result<Outcome> {
    let mut ok = 0usize;
    let mut worst_ratio = 0.0f64;
    for i in 0..ENSEMBLE {
        let model = ensemble_model(i);
        let class = model.validate(0.0, 0.0);
        let th = compute_thresholds(class.alpha, class.beta, class.d2)?;
        let limit = compute_robustness_limits(&th, model.n(), f64::INFINITY)?.eps_p_max_lc;
        let exact = ExactTable::from_model(&model)?;
        // Renormalization can push the realized distance past the requested
        // one; shrink the request until the realized distance is admissible.
        let mut eps = limit / 2.0;
        let (noisy, achieved) = loop {
            let (t, a) = exact.perturb_linf(eps, 7000 + i as u64)?;
            if a <= limit {
                break (t, a);
            }
            eps /= 2.0;
        };
        worst_ratio = worst_ratio.max(achieved / limit);
        let lc = LearnerConfig::Lc { tau: th.tau, max_set: th.max_set() };
        if learn_full_structure(&noisy, &lc, Symmetrization::Or)?.graph == model.two_hop() {
            ok += 1;
        }
    }
    outcome(
        ok == ENSEMBLE,
        format!("{ok}/{ENSEMBLE} exact matches; largest achieved L_inf / eps_p_max_lc = {worst_ratio:.3}"),
    )
}

/// `q_I = 2^{-n} Σ_x ln p(x) Π_{i∈I} x_i` by direct summation.
fn brute_force_potential(table: &DistributionTable) -> Result<MrfPotential> {
    let n = table.n();
    let logs: Vec<f64> = table.probs().iter().map(|p| p.ln()).collect();
    let terms = (1..1usize << n).map(|mask| {
        let vars: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        let c = (0..logs.len())
            .map(|k| {
                let x = spins_of(k, n);
                logs[k] * vars.iter().map(|&i| f64::from(x[i])).product::<f64>()
            })
            .sum::<f64>()
            / logs.len() as f64;
        (vars, c)
    });
    MrfPotential::from_terms(n, terms)
}

fn criterion_7() -> Result<Outcome> {
    let (mut tanh_err, mut round_trip_err) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let model = ensemble_model_with(1000 + i, 2 + i % 5);
        let table = model.marginal_distribution()?;
        let n = table.n();
        let q = MrfPotential::induced_from_distribution(&table)?;
        let oracle = brute_force_potential(&table)?;
        let back = oracle.distribution()?;
        for (a, b) in back.probs().iter().zip(table.probs()) {
            round_trip_err = round_trip_err.max((a - b).abs());
        }
        for vars in (1..1usize << n).map(|m| (0..n).filter(|b| m >> b & 1 == 1).collect::<Vec<_>>()) {
            round_trip_err = round_trip_err.max((q.coef(&vars) - oracle.coef(&vars)).abs());
        }
        for u in 0..n {
            let qu = q.partial(u)?;
            for k in 0..table.probs().len() {
                let x = spins_of(k, n);
                let (up, down) = (k | 1 << u, k & !(1 << u));
                let (pu, pd) = (table.probs()[up], table.probs()[down]);
                let mean = (pu - pd) / (pu + pd);
                tanh_err = tanh_err.max((mean - qu.eval(&x)?.tanh()).abs());
            }
        }
    }
    outcome(
        tanh_err <= 1e-8 && round_trip_err <= 1e-8,
        format!("max tanh-identity error {tanh_err:.3e}, max Fourier round-trip error {round_trip_err:.3e}"),
    )
}

fn criterion_8() -> Result<Outcome> {
    let (mut worst_q, mut worst_l1) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let model = ensemble_model_with(2000 + i, 2 + i % 5);
        let table = model.marginal_distribution()?;
        let q = MrfPotential::induced_from_distribution(&table)?;
        let graph = model.two_hop();
        let nodes: Vec<usize> = (0..model.n()).collect();
        let results = learn_potentials_exact(&table, &graph, &nodes, &AlphatronConfig::default())?;
        for r in &results {
            worst_q = worst_q.max(r.partial.coef_distance(&q.partial(r.node())?));
        }
        let learned = reconstruct_distribution(&assemble_potential(&results, &graph, &AssemblyConfig::default())?)?;
        let l1: f64 = learned.probs().iter().zip(table.probs()).map(|(a, b)| (a - b).abs()).sum();
        worst_l1 = worst_l1.max(l1);
    }
    outcome(
        worst_q <= 1e-2 && worst_l1 <= 5e-2,
        format!("max ||q*_u - q_u||_2 = {worst_q:.3e}, max L1 = {worst_l1:.3e}"),
    )
}

fn criterion_9() -> Result<Outcome> {
    let mut cfg = load("partial.toml");
    cfg.sample_sizes = vec![5000];
    cfg.trials = 20;
    let report = run_experiment(&cfg)?;
    let mut errs: Vec<f64> = report.rows.iter().filter_map(|r| r.max_conditional_error).collect();
    errs.sort_by(f64::total_cmp);
    if errs.len() != cfg.trials {
        return outcome(false, format!("{} of {} trials failed", cfg.trials - errs.len(), cfg.trials));
    }
    let median = (errs[(errs.len() - 1) / 2] + errs[errs.len() / 2]) / 2.0;
    let within = errs.iter().filter(|e| **e <= 0.05).count();
    outcome(
        median <= 0.05,
        format!(
            "J = {:?}: median max conditional error {median:.4} over {} trials ({within} trials <= 0.05, worst {:.4})",
            report.settings.partial_nodes,
            errs.len(),
            errs[errs.len() - 1]
        ),
    )
}

fn criterion_10() -> Result<Outcome> {
    let (mut cov_err, mut infl_err, mut cases) = (0.0f64, 0.0f64, 0usize);
    // Influence errors beyond the tolerance, and the worst error in units of
    // its own standard error `sqrt((1 - I²) / (P(X_S = 1) M))`.
    let (mut over, mut worst_z) = (0usize, 0.0f64);
    for i in 0..6 {
        let model = ensemble_model_with(3000 + i, 6);
        let table = model.marginal_distribution()?;
        let shots = sample_exact(&table, 100_000, 40 + i as u64)?;
        let n = table.n();
        for u in 0..n {
            for v in (u + 1)..n {
                let others: Vec<usize> = (0..n).filter(|&w| w != u && w != v).collect();
                for s in subsets_up_to(&others, 2) {
                    let e = empirical_cond_covariance_avg(&shots, u, v, &s)?;
                    cov_err = cov_err.max((e - exact_cond_covariance_avg(&table, u, v, &s)?).abs());
                    cases += 1;
                }
            }
            let others: Vec<usize> = (0..n).filter(|&w| w != u).collect();
            for s in subsets_up_to(&others, 2) {
                let mask = s.iter().fold(0usize, |m, &i| m | 1 << i);
                if table.mass_where(mask, mask) < 0.1 {
                    continue;
                }
                if let Some(e) = empirical_influence(&shots, u, &s)?.value {
                    let exact = exact_influence(&table, u, &s)?;
                    let err = (e - exact).abs();
                    if err > 0.02 {
                        over += 1;
                    }
                    if err > infl_err {
                        let se = ((1.0 - exact * exact) / (table.mass_where(mask, mask) * 1e5)).sqrt();
                        worst_z = err / se;
                    }
                    infl_err = infl_err.max(err);
                    cases += 1;
                }
            }
        }
    }
    outcome(
        cov_err <= 0.02 && infl_err <= 0.02,
        format!(
            "max covariance error {cov_err:.4}, max influence error {infl_err:.4} ({worst_z:.1} standard errors; \
             {over} influence cases above 0.02) over {cases} cases"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("1 structure success vs M (chain n=10)", criterion_1),
        ("2 state fidelity at M=2000 (chain n=10)", criterion_2),
        ("3 covariance lower bound (exact)", criterion_3),
        ("4 separator covariance vanishes", criterion_4),
        ("5 infinite-sample structure recovery", criterion_5),
        ("6 recovery under admissible L_inf noise", criterion_6),
        ("7 tanh identity and Fourier round trip", criterion_7),
        ("8 Alphatron recovery (infinite-sample)", criterion_8),
        ("9 partial learning conditionals (M=5000)", criterion_9),
        ("10 estimator convergence at 1e5 shots", criterion_10),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {name}: {} ({:.1}s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
