use std::collections::HashSet;

use sfsearch::config::ExperimentConfig;
use sfsearch::experiment::{brute_force_oracle, evaluator_for, oracle_map, run_search};
use sfsearch::metrics::{coverage_vs_oracle, proportion, ClassifiedSets};
use sfsearch::risk::ScenarioClass;
use sfsearch::search::{Algorithm, RunStatus};
use sfsearch::sim::Evaluator;

#[test]
fn random_coverage_matches_hypergeometric_mean() {
    let cfg = ExperimentConfig {
        budget: 1000,
        ..ExperimentConfig::default()
    };
    let ev = evaluator_for(&cfg);
    let oracle = brute_force_oracle(&cfg.space, &ev, 1).unwrap();
    let map = oracle_map(&oracle);
    let n_total = cfg.space.cardinality() as f64;
    let k = map.count(ScenarioClass::Crash) as f64;
    let n = cfg.budget as f64;

    let seeds = 200;
    let mut sum = 0.0;
    for seed in 0..seeds {
        let run = run_search(&cfg, Algorithm::Random, seed, &ev).unwrap();
        let sets = ClassifiedSets::from_run(&run);
        sum += coverage_vs_oracle(&sets, &map, ScenarioClass::Crash)
            .unwrap()
            .unwrap();
    }
    let mean = sum / seeds as f64;

    // hits ~ Hypergeometric(N, K, n); coverage = hits / K
    let var_hits = n * (k / n_total) * (1.0 - k / n_total) * (n_total - n) / (n_total - 1.0);
    let sd_mean = var_hits.sqrt() / k / (seeds as f64).sqrt();
    let expected = n / n_total;
    assert!(
        (mean - expected).abs() <= 3.0 * sd_mean,
        "mean {mean} vs {expected} ± {}",
        3.0 * sd_mean
    );
}

#[test]
fn search_results_agree_with_oracle() {
    let cfg = ExperimentConfig {
        budget: 500,
        ..ExperimentConfig::default()
    };
    let ev = evaluator_for(&cfg);
    for algo in Algorithm::ALL {
        let run = run_search(&cfg, algo, 3, &ev).unwrap();
        assert_eq!(run.status, RunStatus::BudgetReached);
        for rec in &run.log {
            let standalone = ev.evaluate(&rec.scenario).unwrap();
            assert_eq!(rec.result, standalone);
        }
        let p = proportion(&ClassifiedSets::from_run(&run)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn adaptive_runs_log_operators_and_temperature() {
    let cfg = ExperimentConfig {
        budget: 300,
        ..ExperimentConfig::default()
    };
    let ev = evaluator_for(&cfg);
    for algo in [Algorithm::AlvnsSa, Algorithm::AlnsSa] {
        let run = run_search(&cfg, algo, 9, &ev).unwrap();
        assert_eq!(run.omega_star.first(), Some(&run.log[0].scenario.index));
        for rec in &run.log[1..] {
            assert!(rec.destroy_op.unwrap() < 8 && rec.repair_op.unwrap() < 2);
            let t = rec.temperature.unwrap();
            assert!(t > cfg.alvns.t_end && t <= cfg.alvns.t_begin);
            assert!(rec.accepted.is_some());
        }
        let accepted: HashSet<usize> = run
            .log
            .iter()
            .filter(|r| r.accepted == Some(true))
            .map(|r| r.scenario.index)
            .collect();
        assert_eq!(accepted, run.omega_star.iter().copied().collect());
        let bank = run.bank.clone().unwrap();
        let uses: u64 = bank.destroy.iter().map(|s| s.uses).sum();
        assert_eq!(uses as usize, run.n_evals() - 1);
        assert!(bank
            .destroy
            .iter()
            .chain(bank.repair.iter())
            .all(|s| s.weight > 0.0));
    }
}

#[test]
fn runs_are_seed_deterministic() {
    let cfg = ExperimentConfig {
        budget: 400,
        ..ExperimentConfig::default()
    };
    let ev = evaluator_for(&cfg);
    for algo in Algorithm::ALL {
        let a = run_search(&cfg, algo, 21, &ev).unwrap();
        let b = run_search(&cfg, algo, 21, &ev).unwrap();
        let c = run_search(&cfg, algo, 22, &ev).unwrap();
        assert_eq!(a.log, b.log, "{algo}");
        assert_ne!(a.archive(), c.archive(), "{algo}");
    }
}
