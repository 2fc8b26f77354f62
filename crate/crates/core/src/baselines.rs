//! Comparison searches: random testing, a generational GA and ALNS-SA (the
//! adaptive search without variable-neighbourhood repair). All of them go
//! through the same archive, so no scenario is ever tested twice.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::alvns::{run_adaptive, select_operator, OperatorBank, OperatorKind, SearchConfig};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SearchRng};
use crate::search::{nearest_untested, Algorithm, Archive, Campaign, RunResult, RunStatus};
use crate::sim::Evaluator;
use crate::space::{ContinuousPoint, Scenario, ScenarioSpace, DIMS};

/// Evaluates `budget` distinct scenarios drawn uniformly without replacement
/// (a seeded partial Fisher-Yates shuffle of all indices).
pub fn run_random<E: Evaluator + ?Sized>(
    budget: usize,
    space: &ScenarioSpace,
    evaluator: &E,
    seed: u64,
) -> Result<RunResult> {
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut indices: Vec<usize> = (0..space.cardinality()).collect();
    let take = budget.min(indices.len());
    let (picked, _) = indices.partial_shuffle(&mut rng, take);
    let order = picked.to_vec();

    let mut campaign = Campaign::new(space, evaluator, budget);
    let mut status = None;
    for idx in order {
        if let Err(e) = campaign.evaluate(idx) {
            status = Some(RunStatus::Failed(e.to_string()));
            break;
        }
    }
    let status = status.unwrap_or_else(|| campaign.final_status());
    Ok(RunResult {
        algorithm: Algorithm::Random,
        seed,
        log: campaign.log,
        omega_star: Vec::new(),
        bank: None,
        status,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    /// Population size M.
    pub population: usize,
    /// Crossover probability P_c.
    pub crossover: f64,
    /// Per-offspring mutation probability P_m.
    pub mutation: f64,
    /// Generation cap T.
    pub generations: usize,
    /// Evaluation budget.
    pub budget: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            crossover: 0.75,
            mutation: 0.05,
            generations: 1500,
            budget: 11_000,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("ga.population must be at least 2".into()));
        }
        for (name, p) in [("crossover", self.crossover), ("mutation", self.mutation)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "ga.{name} must be in [0, 1], got {p}"
                )));
            }
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        Ok(())
    }
}

/// Roulette weights for minimization: `f_max - f + eps`.
pub const GA_FITNESS_EPS: f64 = 1e-6;

pub fn selection_weights(fitness: &[f64]) -> Vec<f64> {
    let f_max = fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    fitness.iter().map(|f| f_max - f + GA_FITNESS_EPS).collect()
}

#[derive(Debug, Clone, Copy)]
struct Individual {
    levels: [usize; DIMS],
    index: usize,
    fitness: f64,
}

/// Generational GA minimizing GTTC_min.
///
/// Each generation pairs every member with a roulette-selected mate; with
/// probability P_c the pair produces two uniform-crossover children, each of
/// which re-samples one random gene with probability P_m. Children that are
/// already tested are replaced by the nearest untested scenario. Parents and
/// children are pooled and the M fittest survive. Stops at the generation cap,
/// the evaluation budget or exhaustion, whichever comes first.
pub fn run_ga<E: Evaluator + ?Sized>(
    config: &GaConfig,
    space: &ScenarioSpace,
    evaluator: &E,
) -> Result<RunResult> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let mut campaign = Campaign::new(space, evaluator, config.budget);
    let counts = space.level_counts();

    let finish = |campaign: Campaign<'_, E>, status| RunResult {
        algorithm: Algorithm::Ga,
        seed: config.seed,
        log: campaign.log,
        omega_star: Vec::new(),
        bank: None,
        status,
    };

    let initial = config
        .population
        .min(space.cardinality())
        .min(config.budget);
    let mut population = Vec::with_capacity(config.population);
    for idx in rand::seq::index::sample(&mut rng, space.cardinality(), initial).into_iter() {
        match campaign.evaluate(idx) {
            Ok(r) => population.push(Individual {
                levels: space.levels_of(idx)?,
                index: idx,
                fitness: r.fitness(),
            }),
            Err(e) => return Ok(finish(campaign, RunStatus::Failed(e.to_string()))),
        }
    }

    let mut generation = 0;
    'generations: while generation < config.generations
        && campaign.budget_left()
        && !campaign.exhausted()
    {
        let fitness: Vec<f64> = population.iter().map(|p| p.fitness).collect();
        let weights = selection_weights(&fitness);
        let mut children: Vec<[usize; DIMS]> = Vec::new();
        for parent in &population {
            let mate = &population[crate::alvns::roulette(&weights, &mut rng)?];
            if rng.random::<f64>() < config.crossover {
                let (mut c1, mut c2) = (parent.levels, mate.levels);
                for g in 0..DIMS {
                    if rng.random::<bool>() {
                        std::mem::swap(&mut c1[g], &mut c2[g]);
                    }
                }
                for child in [&mut c1, &mut c2] {
                    if rng.random::<f64>() < config.mutation {
                        let gene = rng.random_range(0..DIMS);
                        child[gene] = rng.random_range(0..counts[gene]);
                    }
                }
                children.push(c1);
                children.push(c2);
            }
        }

        let mut pool = population.clone();
        for child in children {
            if !campaign.budget_left() {
                break;
            }
            let mut idx = space.index_of_levels(child);
            if campaign.archive.contains(idx) {
                let u = child.map(|k| k as f64);
                match nearest_untested(space, &campaign.archive, &u) {
                    Some(i) => idx = i,
                    None => break 'generations,
                }
            }
            match campaign.evaluate(idx) {
                Ok(r) => pool.push(Individual {
                    levels: space.levels_of(idx)?,
                    index: idx,
                    fitness: r.fitness(),
                }),
                Err(e) => return Ok(finish(campaign, RunStatus::Failed(e.to_string()))),
            }
        }
        pool.sort_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.index.cmp(&b.index)));
        pool.truncate(config.population);
        population = pool;
        generation += 1;
    }

    let status = campaign.final_status();
    Ok(finish(campaign, status))
}

/// ALNS repair without neighbourhood growth.
///
/// R1+ rounds the destroyed point to the nearest node and, if that node is
/// tested, takes the untested node nearest to it. R2+ picks uniformly among
/// untested nodes in the one-step box around the point, falling back to R1+
/// when that box is used up.
pub fn direct_repair(
    point: &ContinuousPoint,
    space: &ScenarioSpace,
    archive: &Archive,
    bank: &OperatorBank,
    rng: &mut SearchRng,
) -> Result<Option<(Scenario, usize)>> {
    if archive.is_full() {
        return Ok(None);
    }
    let op = select_operator(bank, OperatorKind::Repair, rng)?;
    let nearest = |p: &ContinuousPoint| -> Option<usize> {
        let node = space.round_to_grid(p);
        if !archive.contains(node.index) {
            return Some(node.index);
        }
        let u = space.to_level_coords(&node.point());
        nearest_untested(space, archive, &u)
    };
    let picked = if op == 0 {
        nearest(point)
    } else {
        let open: Vec<usize> = space
            .neighborhood(&space.clamp(point), 1)
            .into_iter()
            .filter(|i| !archive.contains(*i))
            .collect();
        if open.is_empty() {
            nearest(point)
        } else {
            Some(open[rng.random_range(0..open.len())])
        }
    };
    match picked {
        Some(idx) => Ok(Some((space.scenario(idx)?, op))),
        None => Ok(None),
    }
}

pub fn run_alns_sa<E: Evaluator + ?Sized>(
    config: &SearchConfig,
    space: &ScenarioSpace,
    evaluator: &E,
) -> Result<RunResult> {
    run_adaptive(Algorithm::AlnsSa, config, space, evaluator, direct_repair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alvns::init_bank;
    use crate::space::ParamSpec;
    use std::collections::HashSet;

    fn grid(levels: [usize; 4]) -> ScenarioSpace {
        ScenarioSpace::new(std::array::from_fn(|i| {
            ParamSpec::new(format!("p{i}"), 0.0, (levels[i] - 1) as f64, 1.0).unwrap()
        }))
        .unwrap()
    }

    /// Fitness is the flat index; index 0 scores GTTC 0.
    struct IndexEvaluator;

    impl Evaluator for IndexEvaluator {
        fn evaluate(&self, s: &Scenario) -> Result<crate::sim::EvaluationResult> {
            let g = s.index as f64 * 0.1;
            Ok(crate::sim::EvaluationResult {
                scenario_index: s.index,
                gttc_min: g,
                class: crate::risk::classify(g)?,
                crash: g == 0.0,
                n_steps: 1,
                seed: 0,
            })
        }
    }

    #[test]
    fn random_exhausts_grid() {
        let space = grid([3, 3, 2, 2]);
        let run = run_random(space.cardinality(), &space, &IndexEvaluator, 4).unwrap();
        let mut a = run.archive();
        a.sort_unstable();
        assert_eq!(a, (0..space.cardinality()).collect::<Vec<_>>());
        assert_eq!(run.status, RunStatus::BudgetReached);
    }

    #[test]
    fn random_is_deterministic_and_distinct() {
        let space = ScenarioSpace::default();
        let a = run_random(500, &space, &IndexEvaluator, 8)
            .unwrap()
            .archive();
        let b = run_random(500, &space, &IndexEvaluator, 8)
            .unwrap()
            .archive();
        assert_eq!(a, b);
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 500);
        let c = run_random(500, &space, &IndexEvaluator, 9)
            .unwrap()
            .archive();
        assert_ne!(a, c);
    }

    #[test]
    fn random_inclusion_is_uniform() {
        let space = grid([3, 2, 2, 2]);
        let n = space.cardinality();
        let budget = 6;
        let seeds = 200;
        let mut counts = vec![0usize; n];
        for seed in 0..seeds {
            for idx in run_random(budget, &space, &IndexEvaluator, seed)
                .unwrap()
                .archive()
            {
                counts[idx] += 1;
            }
        }
        // each index is included with probability budget / n
        let p = budget as f64 / n as f64;
        let mean = seeds as f64 * p;
        let sigma = (seeds as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!(
                (c as f64 - mean).abs() < 3.0 * sigma,
                "{c} vs {mean} ± {sigma}"
            );
        }
    }

    #[test]
    fn ga_without_variation_stops_after_initial_population() {
        let space = grid([5, 5, 4, 4]);
        let cfg = GaConfig {
            population: 20,
            crossover: 0.0,
            mutation: 0.0,
            generations: 50,
            budget: 300,
            seed: 1,
        };
        let run = run_ga(&cfg, &space, &IndexEvaluator).unwrap();
        assert_eq!(run.n_evals(), 20);
        assert_eq!(run.status, RunStatus::GenerationCap);
    }

    #[test]
    fn ga_tiny_grid_exhausts() {
        let space = grid([2, 1, 1, 1]);
        let cfg = GaConfig {
            population: 2,
            budget: 10,
            ..GaConfig::default()
        };
        let run = run_ga(&cfg, &space, &IndexEvaluator).unwrap();
        assert_eq!(run.n_evals(), 2);
        assert_eq!(run.status, RunStatus::SpaceExhausted);
    }

    #[test]
    fn ga_respects_budget_and_never_retests() {
        let space = grid([6, 6, 5, 5]);
        let cfg = GaConfig {
            population: 10,
            budget: 400,
            ..GaConfig::default()
        };
        let run = run_ga(&cfg, &space, &IndexEvaluator).unwrap();
        assert_eq!(run.n_evals(), 400);
        let archive = run.archive();
        assert_eq!(archive.iter().collect::<HashSet<_>>().len(), 400);
        // the GA should find the optimum at index 0 long before the budget ends
        assert_eq!(run.best().unwrap().scenario.index, 0);
    }

    #[test]
    fn ga_selection_frequencies_follow_transform() {
        let fitness = [0.0, 0.5, 1.0, 2.5];
        let weights = selection_weights(&fitness);
        let total: f64 = weights.iter().sum();
        let mut rng = rng_from_seed(17);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[crate::alvns::roulette(&weights, &mut rng).unwrap()] += 1;
        }
        for k in 0..4 {
            let p = weights[k] / total;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (counts[k] as f64 - n as f64 * p).abs() <= 3.0 * sigma + 1.0,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn direct_repair_rounds_onto_untested_node() {
        let space = ScenarioSpace::default();
        let archive = Archive::new(space.cardinality());
        let mut bank = init_bank();
        bank.repair[1].weight = 0.0;
        let mut rng = rng_from_seed(3);
        let s = space.scenario(1234).unwrap();
        let (got, op) = direct_repair(&s.point(), &space, &archive, &bank, &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!((got.index, op), (1234, 0));
    }

    #[test]
    fn direct_repair_random_pick_stays_in_box() {
        let space = ScenarioSpace::default();
        let mut archive = Archive::new(space.cardinality());
        let mut bank = init_bank();
        bank.repair[0].weight = 0.0;
        let s = space.scenario_from_levels([4, 4, 4, 4]);
        archive.insert(s.index);
        let mut rng = rng_from_seed(5);
        let boxed = space.neighborhood(&s.point(), 1);
        for _ in 0..50 {
            let (got, op) = direct_repair(&s.point(), &space, &archive, &bank, &mut rng)
                .unwrap()
                .unwrap();
            assert_eq!(op, 1);
            assert!(boxed.contains(&got.index) && got.index != s.index);
        }
    }

    #[test]
    fn alns_toy_grid_exhaustion() {
        let space = grid([3, 3, 2, 2]);
        let cfg = SearchConfig {
            budget: 100,
            seed: 2,
            ..SearchConfig::default()
        };
        let run = run_alns_sa(&cfg, &space, &IndexEvaluator).unwrap();
        assert_eq!(run.n_evals(), space.cardinality());
        assert_eq!(run.status, RunStatus::SpaceExhausted);
        let a = run_alns_sa(&cfg, &space, &IndexEvaluator).unwrap();
        assert_eq!(a.log, run.log);
    }
}
