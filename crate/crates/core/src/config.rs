//! Experiment configuration, read from TOML.
//!
//! Every section and key is optional; anything left out takes its default.
//!
//! ```toml
//! [experiment]
//! seeds = [0, 1, 2, 3, 4]
//! budget = 11000
//! algorithms = ["alvns-sa", "alns-sa", "ga", "random"]
//! workers = 0        # 0: one per available core
//! noise_seed = 0     # run seed for simulation noise, shared by all runs
//!
//! [space.v_e]
//! start = 9.0
//! end = 16.5
//! step = 0.5
//! # likewise [space.v_o], [space.d], [space.a]
//!
//! [sim]     # dt, t_max, sigma, open_gap_exit
//! [ego]     # reaction_time, max_brake, ttc_trigger, min_gap_trigger
//! [alvns]   # t_begin, t_end, alpha, rho, rejection_threshold (also used by alns-sa)
//! [ga]      # population, crossover, mutation, generations
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::alvns::SearchConfig;
use crate::baselines::GaConfig;
use crate::error::{Error, Result};
use crate::search::Algorithm;
use crate::sim::{EgoControllerConfig, SimConfig};
use crate::space::{ParamSpec, ScenarioSpace, DIMS};

pub const AXES: [&str; DIMS] = ["v_e", "v_o", "d", "a"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub algorithms: Vec<Algorithm>,
    /// Oracle worker threads; 0 means one per available core.
    pub workers: usize,
    pub noise_seed: u64,
    pub space: ScenarioSpace,
    pub sim: SimConfig,
    pub ego: EgoControllerConfig,
    pub alvns: AlvnsSection,
    pub ga: GaSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0, 1, 2, 3, 4],
            budget: 11_000,
            algorithms: Algorithm::ALL.to_vec(),
            workers: 0,
            noise_seed: 0,
            space: ScenarioSpace::default(),
            sim: SimConfig::default(),
            ego: EgoControllerConfig::default(),
            alvns: AlvnsSection::default(),
            ga: GaSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlvnsSection {
    pub t_begin: f64,
    pub t_end: f64,
    pub alpha: f64,
    pub rho: f64,
    pub rejection_threshold: usize,
}

impl Default for AlvnsSection {
    fn default() -> Self {
        let d = SearchConfig::default();
        AlvnsSection {
            t_begin: d.t_begin,
            t_end: d.t_end,
            alpha: d.alpha,
            rho: d.rho,
            rejection_threshold: d.rejection_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population: usize,
    pub crossover: f64,
    pub mutation: f64,
    pub generations: usize,
}

impl Default for GaSection {
    fn default() -> Self {
        let d = GaConfig::default();
        GaSection {
            population: d.population,
            crossover: d.crossover,
            mutation: d.mutation,
            generations: d.generations,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    space: RawSpace,
    sim: SimConfig,
    ego: EgoControllerConfig,
    alvns: AlvnsSection,
    ga: GaSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExperiment {
    seeds: Option<Vec<u64>>,
    budget: Option<usize>,
    algorithms: Option<Vec<String>>,
    workers: Option<usize>,
    noise_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSpace {
    v_e: Option<RawAxis>,
    v_o: Option<RawAxis>,
    d: Option<RawAxis>,
    a: Option<RawAxis>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    start: f64,
    end: f64,
    step: f64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let defaults = ExperimentConfig::default();

        let algorithms = match raw.experiment.algorithms {
            Some(names) => names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<Vec<Algorithm>>>()?,
            None => defaults.algorithms,
        };

        let fallback = ScenarioSpace::default_specs();
        let given = [raw.space.v_e, raw.space.v_o, raw.space.d, raw.space.a];
        let mut specs: [Option<ParamSpec>; DIMS] = Default::default();
        for (i, axis) in given.into_iter().enumerate() {
            specs[i] = Some(match axis {
                Some(a) => ParamSpec::new(AXES[i], a.start, a.end, a.step)
                    .map_err(|e| Error::Config(format!("space.{}: {e}", AXES[i])))?,
                None => fallback[i].clone(),
            });
        }
        let space = ScenarioSpace::new(specs.map(|s| s.expect("filled above")))?;

        let cfg = ExperimentConfig {
            seeds: raw.experiment.seeds.unwrap_or(defaults.seeds),
            budget: raw.experiment.budget.unwrap_or(defaults.budget),
            algorithms,
            workers: raw.experiment.workers.unwrap_or(defaults.workers),
            noise_seed: raw.experiment.noise_seed.unwrap_or(defaults.noise_seed),
            space,
            sim: raw.sim,
            ego: raw.ego,
            alvns: raw.alvns,
            ga: raw.ga,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("experiment.seeds must not be empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config(
                "experiment.algorithms must not be empty".into(),
            ));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::Config(
                "experiment.algorithms lists an algorithm twice".into(),
            ));
        }
        self.sim.validate()?;
        self.ego.validate()?;
        self.search_config(0).validate()?;
        self.ga_config(0).validate()
    }

    pub fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            budget: self.budget,
            t_begin: self.alvns.t_begin,
            t_end: self.alvns.t_end,
            alpha: self.alvns.alpha,
            rho: self.alvns.rho,
            rejection_threshold: self.alvns.rejection_threshold,
            seed,
        }
    }

    pub fn ga_config(&self, seed: u64) -> GaConfig {
        GaConfig {
            population: self.ga.population,
            crossover: self.ga.crossover,
            mutation: self.ga.mutation,
            generations: self.ga.generations,
            budget: self.budget,
            seed,
        }
    }

    /// Worker count after applying the `SF_WORKERS` override and resolving 0.
    pub fn resolved_workers(&self, cli: Option<usize>) -> Result<usize> {
        let env =
            match std::env::var("SF_WORKERS") {
                Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                    Error::Config(format!("SF_WORKERS must be an integer, got `{v}`"))
                })?),
                Err(_) => None,
            };
        let n = cli.or(env).unwrap_or(self.workers);
        Ok(if n == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            n
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.space.cardinality(), 60_480);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [experiment]
            seeds = [3]
            budget = 50
            algorithms = ["random", "ga"]

            [space.d]
            start = 10.0
            end = 12.0
            step = 1.0

            [sim]
            sigma = 0.0

            [ga]
            population = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.algorithms, vec![Algorithm::Random, Algorithm::Ga]);
        assert_eq!(cfg.space.level_counts(), [16, 21, 3, 9]);
        assert_eq!(cfg.sim.sigma, 0.0);
        assert_eq!(cfg.sim.dt, SimConfig::default().dt);
        assert_eq!(cfg.ga_config(3).population, 10);
        assert_eq!(cfg.ga_config(3).budget, 50);
        assert_eq!(cfg.search_config(3).seed, 3);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "[experiment]\nseeds = []",
            "[experiment]\nalgorithms = []",
            "[experiment]\nalgorithms = [\"sa\"]",
            "[experiment]\nalgorithms = [\"ga\", \"ga\"]",
            "[experiment]\nbudget = 0",
            "[experiment]\nbogus = 1",
            "[space.v_e]\nstart = 0.0\nend = 1.0\nstep = 0.3",
            "[space.v_e]\nstart = 0.0\nend = 1.0",
            "[sim]\ndt = -1.0",
            "[ga]\ncrossover = 2.0",
            "[alvns]\nalpha = 1.5",
            "not toml at all [",
        ] {
            let err = ExperimentConfig::from_toml_str(text);
            assert!(
                matches!(err, Err(Error::Config(_))),
                "{text:?} gave {err:?}"
            );
        }
    }
}
