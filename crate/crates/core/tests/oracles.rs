//! Library results checked against brute-force reimplementations.

mod common;

use common::{config_path, ensemble_model, ensemble_model_with, subsets_up_to};
use nnq_core::generators::gen_chain_model;
use nnq_core::harness::{run_experiment, ExperimentConfig, ExperimentReport, TrialRow, CSV_COLUMNS};
use nnq_core::metrics::{fidelity, lp_distance};
use nnq_core::regression::{alphatron_fit_weighted, u_link, AlphatronConfig, FeatureMatrix};
use nnq_core::sampling::{bitflip_distribution, sample_exact, sample_gibbs};
use nnq_core::table::spins_of;
use nnq_core::{DistributionTable, MrfPotential, RbmModel};

/// `p(x) ∝ Σ_y exp(hᵀx + gᵀy + xᵀJy)`, summing over hidden units explicitly.
fn brute_marginal(model: &RbmModel) -> Vec<f64> {
    let (n, m) = (model.n(), model.m());
    let weights: Vec<f64> = (0..1usize << n)
        .map(|kx| {
            let x = spins_of(kx, n);
            (0..1usize << m)
                .map(|ky| {
                    let y = spins_of(ky, m);
                    let mut e = 0.0;
                    for i in 0..n {
                        e += model.visible_fields()[i] * f64::from(x[i]);
                        for k in 0..m {
                            e += model.weight(i, k) * f64::from(x[i] * y[k]);
                        }
                    }
                    for k in 0..m {
                        e += model.hidden_fields()[k] * f64::from(y[k]);
                    }
                    e.exp()
                })
                .sum()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

#[test]
fn marginal_matches_hidden_unit_enumeration() {
    for i in 0..25 {
        let model = ensemble_model(i);
        let table = model.marginal_distribution().unwrap();
        for (a, b) in table.probs().iter().zip(brute_marginal(&model)) {
            assert!((a - b).abs() <= 1e-12 * b.max(1e-3), "model {i}: {a} vs {b}");
        }
    }
}

/// `P(x_u = +1 | every other spin)` read off the table.
fn full_conditional(table: &DistributionTable, u: usize, k: usize) -> f64 {
    let plus = table.probs()[k | 1 << u];
    plus / (plus + table.probs()[k & !(1 << u)])
}

#[test]
fn conditional_depends_only_on_two_hop_neighbors() {
    for i in 0..20 {
        let model = ensemble_model(i);
        let table = model.marginal_distribution().unwrap();
        let graph = model.two_hop();
        let n = model.n();
        for u in 0..n {
            let mut nb_mask = 1usize << u;
            for &v in graph.neighbors(u) {
                nb_mask |= 1 << v;
            }
            for k in 0..1usize << n {
                // Same neighborhood configuration, everything else flipped.
                let other = k ^ (!nb_mask & ((1 << n) - 1));
                let (a, b) = (full_conditional(&table, u, k), full_conditional(&table, u, other));
                assert!((a - b).abs() < 1e-12, "model {i} node {u}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn potential_expansion_reproduces_table_and_tanh_identity() {
    for i in 0..30 {
        let model = ensemble_model_with(500 + i, 2 + i % 6);
        let table = model.marginal_distribution().unwrap();
        let q = MrfPotential::induced_from_distribution(&table).unwrap();
        assert!(lp_distance(&q.distribution().unwrap(), &table, 1.0).unwrap() < 1e-12);
        let n = model.n();
        for u in 0..n {
            let qu = q.partial(u).unwrap();
            for k in 0..1usize << n {
                let x = spins_of(k, n);
                let mean = 2.0 * full_conditional(&table, u, k) - 1.0;
                assert!((qu.eval(&x).unwrap().tanh() - mean).abs() < 1e-10);
            }
        }
        // Only sets inside a closed two-hop neighborhood carry weight.
        let graph = model.two_hop();
        for (vars, c) in q.terms() {
            let inside = vars.iter().all(|&a| vars.iter().all(|&b| a == b || graph.contains(a, b)));
            assert!(inside || c.abs() < 1e-10, "model {i}: term {vars:?} = {c}");
        }
    }
}

#[test]
fn bitflip_distribution_matches_channel_sum() {
    let table = ensemble_model(7).marginal_distribution().unwrap();
    let n = table.n();
    for rho in [0.0, 0.03, 0.25, 0.5] {
        let got = bitflip_distribution(&table, rho).unwrap();
        for y in 0..1usize << n {
            let want: f64 = (0..1usize << n)
                .map(|x| {
                    let d = (x ^ y).count_ones() as i32;
                    table.probs()[x] * rho.powi(d) * (1.0 - rho).powi(n as i32 - d)
                })
                .sum();
            assert!((got.probs()[y] - want).abs() < 1e-14);
        }
    }
}

/// Kernel form: `h(x) = u(Σ_j a_j K(x_j, x))` with `K(x, x') = Π(1 + x_i x'_i)`,
/// which is the inner product of the full monomial feature maps.
fn kernel_alphatron(xs: &[Vec<i8>], ys: &[f64], weights: &[f64], lambda: f64, iterations: usize) -> Vec<f64> {
    let k = |a: &[i8], b: &[i8]| a.iter().zip(b).map(|(p, q)| 1.0 + f64::from(p * q)).product::<f64>();
    let gram: Vec<Vec<f64>> = xs.iter().map(|a| xs.iter().map(|b| k(a, b)).collect()).collect();
    let predict = |a: &[f64], i: usize| u_link(a.iter().zip(&gram[i]).map(|(aj, g)| aj * g).sum());
    let loss = |a: &[f64]| (0..xs.len()).map(|i| weights[i] * (ys[i] - predict(a, i)).powi(2)).sum::<f64>();
    let mut a = vec![0.0; xs.len()];
    let (mut best, mut best_loss) = (a.clone(), loss(&a));
    for _ in 0..iterations {
        let r: Vec<f64> = (0..xs.len()).map(|i| lambda * weights[i] * (ys[i] - predict(&a, i))).collect();
        a.iter_mut().zip(r).for_each(|(aj, rj)| *aj += rj);
        let l = loss(&a);
        if l < best_loss {
            best_loss = l;
            best.clone_from(&a);
        }
    }
    (0..xs.len()).map(|i| predict(&best, i)).collect()
}

#[test]
fn primal_alphatron_matches_kernel_form() {
    let table = ensemble_model(3).marginal_distribution().unwrap();
    let samples = sample_exact(&table, 40, 11).unwrap();
    let (n, u) = (samples.n() - 1, samples.n() - 1);
    let xs: Vec<Vec<i8>> = samples.rows().map(|r| r[..n].to_vec()).collect();
    let ys: Vec<f64> = samples.rows().map(|r| f64::from(r[u] + 1) / 2.0).collect();
    let weights = vec![1.0 / xs.len() as f64; xs.len()];
    let phi = |x: &[i8]| -> Vec<f64> {
        (0..1usize << n).map(|m| (0..n).filter(|b| m >> b & 1 == 1).map(|b| f64::from(x[b])).product()).collect()
    };
    let features = FeatureMatrix::new(1 << n, xs.iter().flat_map(|x| phi(x)).collect()).unwrap();
    let cfg = AlphatronConfig { lambda: 0.5, iterations: Some(60), ..AlphatronConfig::default() };
    let fit = alphatron_fit_weighted(&features, &ys, &weights, &cfg).unwrap();
    let kernel = kernel_alphatron(&xs, &ys, &weights, 0.5, 60);
    for (i, x) in xs.iter().enumerate() {
        let primal = u_link(fit.weights.iter().zip(phi(x)).map(|(w, f)| w * f).sum());
        assert!((primal - kernel[i]).abs() < 1e-10, "row {i}: {primal} vs {}", kernel[i]);
    }
}

#[test]
fn gibbs_sampler_targets_the_marginal() {
    let model = gen_chain_model(5, 0.8, -0.1, 0.1).unwrap();
    let table = model.marginal_distribution().unwrap();
    let shots = sample_gibbs(&model, 100_000, 500, 2, 3).unwrap();
    let empirical = shots.empirical_table().unwrap();
    assert!(lp_distance(&empirical, &table, 1.0).unwrap() < 0.03);
    assert!(fidelity(&empirical, &table).unwrap() > 0.999);
}

#[test]
fn empirical_covariance_agrees_with_table_formula() {
    use nnq_core::structure::{empirical_cond_covariance_avg, exact_cond_covariance_avg};
    let table = ensemble_model(12).marginal_distribution().unwrap();
    // The empirical table of a sample is itself a distribution; both
    // estimators must agree on it exactly.
    let samples = sample_exact(&table, 2_000, 5).unwrap();
    let emp_table = samples.empirical_table().unwrap();
    let n = table.n();
    for s in subsets_up_to(&(0..n).collect::<Vec<_>>(), 2) {
        for u in 0..n {
            for v in u + 1..n {
                if s.contains(&u) || s.contains(&v) {
                    continue;
                }
                let a = empirical_cond_covariance_avg(&samples, u, v, &s).unwrap();
                let b = exact_cond_covariance_avg(&emp_table, u, v, &s).unwrap();
                assert!((a - b).abs() < 1e-12, "u={u} v={v} S={s:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn csv_and_json_reports_agree() {
    let mut cfg = ExperimentConfig::from_file(&config_path("chain_state.toml")).unwrap();
    cfg.sample_sizes = vec![300, 600];
    cfg.trials = 3;
    let report = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (json, csv) = report.write_to_dir(dir.path()).unwrap();
    let back = ExperimentReport::from_json(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(back, report);

    let mut reader = csv::Reader::from_path(csv).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_COLUMNS);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), report.rows.len());
    for (rec, row) in records.iter().zip(&report.rows) {
        assert_eq!(rec[0].parse::<usize>().unwrap(), row.m);
        assert_eq!(rec[1].parse::<usize>().unwrap(), row.trial);
        assert_eq!(rec[2].is_empty(), row.success.is_none());
        assert_eq!(rec[3].parse::<f64>().ok(), row.fidelity);
        assert_eq!(rec[4].parse::<f64>().ok(), row.l1);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let mut cfg = ExperimentConfig::from_file(&config_path("chain_structure.toml")).unwrap();
    cfg.sample_sizes = vec![500, 1000];
    cfg.trials = 4;
    let a = run_experiment(&cfg).unwrap();
    assert_eq!(a.digest().unwrap(), run_experiment(&cfg).unwrap().digest().unwrap());
    // The worker count enters the config hash but not the trial results.
    cfg.workers = 1;
    let strip = |r: &ExperimentReport| {
        r.rows.iter().map(|row| TrialRow { runtime_ms: 0, ..row.clone() }).collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&run_experiment(&cfg).unwrap()));
    cfg.base_seed += 1;
    let c = run_experiment(&cfg).unwrap();
    assert_ne!(a.digest().unwrap(), c.digest().unwrap());
}
