//! Brute-force oracle, multi-seed comparison runs and the CSV bundle they
//! produce.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::alvns::{run_alvns_sa, OperatorKind};
use crate::baselines::{run_alns_sa, run_ga, run_random};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{coverage, coverage_vs_oracle, median, proportion, ClassifiedSets, OracleMap};
use crate::risk::ScenarioClass;
use crate::search::{fmt_gttc, fmt_param, Algorithm, RunResult, RunStatus};
use crate::sim::{EvaluationResult, Evaluator, SurrogateEvaluator};
use crate::space::ScenarioSpace;

pub const ORACLE_HEADER: &str = "scenario_index,v_e,v_o,d,a,gttc_min,class";
pub const SUMMARY_HEADER: &str = "algorithm,seed,class,P,coverage_union,coverage_oracle,n_evals";
pub const OPERATORS_HEADER: &str = "algorithm,seed,kind,operator,weight,score,uses";
pub const DISTRIBUTION_HEADER: &str = "algorithm,class,median_P,min_P,max_P";

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Simulation(format!("cannot start worker pool: {e}")))
}

/// Evaluates every grid scenario once. The result is indexed by flat index
/// and does not depend on `workers`, since each scenario's noise stream is
/// derived from its index alone.
pub fn brute_force_oracle<E: Evaluator + ?Sized>(
    space: &ScenarioSpace,
    evaluator: &E,
    workers: usize,
) -> Result<Vec<EvaluationResult>> {
    pool(workers)?.install(|| {
        (0..space.cardinality())
            .into_par_iter()
            .map(|i| evaluator.evaluate(&space.scenario(i)?))
            .collect()
    })
}

pub fn oracle_map(results: &[EvaluationResult]) -> OracleMap {
    OracleMap::new(results.iter().map(|r| r.class).collect())
}

pub fn write_oracle_csv<W: Write>(
    space: &ScenarioSpace,
    results: &[EvaluationResult],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{ORACLE_HEADER}")?;
    for r in results {
        let s = space
            .scenario(r.scenario_index)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.index,
            fmt_param(s.v_e),
            fmt_param(s.v_o),
            fmt_param(s.d),
            fmt_param(s.a),
            fmt_gttc(r.gttc_min),
            r.class
        )?;
    }
    Ok(())
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn evaluator_for(config: &ExperimentConfig) -> SurrogateEvaluator {
    SurrogateEvaluator {
        sim: config.sim.clone(),
        ego: config.ego.clone(),
        run_seed: config.noise_seed,
    }
}

/// One search campaign as configured.
pub fn run_search<E: Evaluator + ?Sized>(
    config: &ExperimentConfig,
    algorithm: Algorithm,
    seed: u64,
    evaluator: &E,
) -> Result<RunResult> {
    let space = &config.space;
    match algorithm {
        Algorithm::AlvnsSa => run_alvns_sa(&config.search_config(seed), space, evaluator),
        Algorithm::AlnsSa => run_alns_sa(&config.search_config(seed), space, evaluator),
        Algorithm::Ga => run_ga(&config.ga_config(seed), space, evaluator),
        Algorithm::Random => run_random(config.budget, space, evaluator, seed),
    }
}

pub fn log_file_name(algorithm: Algorithm, seed: u64) -> String {
    format!("log_{algorithm}_seed{seed}.csv")
}

/// Runs, metrics and oracle of one comparison.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Seed-major, then in configured algorithm order.
    pub runs: Vec<RunResult>,
    pub oracle: Vec<EvaluationResult>,
    pub rows: Vec<SummaryRow>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> Vec<String> {
        self.runs
            .iter()
            .filter_map(|r| match &r.status {
                RunStatus::Failed(msg) => Some(format!("{} seed {}: {msg}", r.algorithm, r.seed)),
                _ => None,
            })
            .collect()
    }

    pub fn run(&self, algorithm: Algorithm, seed: u64) -> Option<&RunResult> {
        self.runs
            .iter()
            .find(|r| r.algorithm == algorithm && r.seed == seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub class: ScenarioClass,
    pub proportion: Option<f64>,
    pub coverage_union: Option<f64>,
    pub coverage_oracle: Option<f64>,
    pub n_evals: usize,
}

/// Computes the oracle and every (algorithm, seed) run, without writing files.
pub fn compute_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentOutcome> {
    config.validate()?;
    let evaluator = evaluator_for(config);
    let oracle = brute_force_oracle(&config.space, &evaluator, workers)?;
    let map = oracle_map(&oracle);

    let jobs: Vec<(u64, Algorithm)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.algorithms.iter().map(move |&a| (s, a)))
        .collect();
    let runs = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(seed, algo)| run_search(config, algo, seed, &evaluator))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let seed_runs: Vec<&RunResult> = runs.iter().filter(|r| r.seed == seed).collect();
        let sets: Vec<ClassifiedSets> = seed_runs
            .iter()
            .map(|r| ClassifiedSets::from_run(r))
            .collect();
        for (i, run) in seed_runs.iter().enumerate() {
            let p = proportion(&sets[i]).ok();
            for class in ScenarioClass::ALL {
                rows.push(SummaryRow {
                    algorithm: run.algorithm,
                    seed,
                    class,
                    proportion: p.map(|p| p[class.ordinal()]),
                    coverage_union: coverage(&sets, class, i),
                    coverage_oracle: coverage_vs_oracle(&sets[i], &map, class)?,
                    n_evals: run.n_evals(),
                });
            }
        }
    }
    Ok(ExperimentOutcome { runs, oracle, rows })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.algorithm,
            r.seed,
            r.class,
            fmt_opt(r.proportion),
            fmt_opt(r.coverage_union),
            fmt_opt(r.coverage_oracle),
            r.n_evals
        )?;
    }
    Ok(())
}

pub fn write_operators_csv<W: Write>(runs: &[RunResult], mut w: W) -> io::Result<()> {
    writeln!(w, "{OPERATORS_HEADER}")?;
    for run in runs {
        let Some(bank) = &run.bank else { continue };
        for kind in [OperatorKind::Destroy, OperatorKind::Repair] {
            for (k, s) in bank.stats(kind).iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{:.6},{:.6},{}",
                    run.algorithm,
                    run.seed,
                    kind.as_str(),
                    k + 1,
                    s.weight,
                    s.score,
                    s.uses
                )?;
            }
        }
    }
    Ok(())
}

/// Per algorithm and class: median, min and max proportion over seeds.
pub fn write_distribution_csv<W: Write>(
    algorithms: &[Algorithm],
    rows: &[SummaryRow],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{DISTRIBUTION_HEADER}")?;
    for &algo in algorithms {
        for class in ScenarioClass::ALL {
            let ps: Vec<f64> = rows
                .iter()
                .filter(|r| r.algorithm == algo && r.class == class)
                .filter_map(|r| r.proportion)
                .collect();
            let min = ps.iter().copied().reduce(f64::min);
            let max = ps.iter().copied().reduce(f64::max);
            writeln!(
                w,
                "{algo},{class},{},{},{}",
                fmt_opt(median(&ps)),
                fmt_opt(min),
                fmt_opt(max)
            )?;
        }
    }
    Ok(())
}

/// Runs the full comparison and writes the bundle into `out`:
/// `oracle.csv`, one log per run, `summary.csv`, `operators.csv` and
/// `distribution.csv`. Failed runs keep their partial logs; see
/// [`ExperimentOutcome::failures`].
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &Path,
    workers: usize,
) -> Result<ExperimentOutcome> {
    let outcome = compute_experiment(config, workers)?;
    fs::create_dir_all(out)?;
    write_atomic(&out.join("oracle.csv"), |w| {
        write_oracle_csv(&config.space, &outcome.oracle, w)
    })?;
    for run in &outcome.runs {
        write_atomic(&out.join(log_file_name(run.algorithm, run.seed)), |w| {
            run.write_log_csv(w)
        })?;
    }
    write_atomic(&out.join("summary.csv"), |w| {
        write_summary_csv(&outcome.rows, w)
    })?;
    write_atomic(&out.join("operators.csv"), |w| {
        write_operators_csv(&outcome.runs, w)
    })?;
    write_atomic(&out.join("distribution.csv"), |w| {
        write_distribution_csv(&config.algorithms, &outcome.rows, w)
    })?;
    Ok(outcome)
}

/// Text table of median P, union coverage and oracle coverage per algorithm,
/// read back from a bundle's `summary.csv`.
pub fn report(dir: &Path) -> Result<String> {
    let path = dir.join("summary.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(Error::Io(format!(
            "{} has an unexpected header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    let mut seeds = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Io(format!("malformed summary row `{line}`")));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s == "NA" {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| Error::Io(format!("bad number `{s}`")))
            }
        };
        let algo: Algorithm = f[0].parse()?;
        let seed: u64 = f[1]
            .parse()
            .map_err(|_| Error::Io(format!("bad seed `{}`", f[1])))?;
        let class: ScenarioClass = f[2].parse()?;
        if !seeds.contains(&seed) {
            seeds.push(seed);
        }
        rows.push((algo, class, [num(f[3])?, num(f[4])?, num(f[5])?]));
    }
    let mut algos: Vec<Algorithm> = Vec::new();
    for r in &rows {
        if !algos.contains(&r.0) {
            algos.push(r.0);
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "median over {} seed(s)", seeds.len());
    for (m, title) in ["P", "coverage", "oracle coverage"].into_iter().enumerate() {
        let _ = writeln!(out, "\n{title}");
        let _ = write!(out, "{:<12}", "class");
        for a in &algos {
            let _ = write!(out, "{:>10}", a.as_str());
        }
        out.push('\n');
        for class in ScenarioClass::ALL {
            let _ = write!(out, "{:<12}", class.as_str());
            for a in &algos {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.0 == *a && r.1 == class)
                    .filter_map(|r| r.2[m])
                    .collect();
                let cell = median(&vals)
                    .map(|m| format!("{:.2}%", 100.0 * m))
                    .unwrap_or_else(|| "NA".into());
                let _ = write!(out, "{cell:>10}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamSpec;

    fn toy() -> ExperimentConfig {
        let specs = [
            ParamSpec::new("v_e", 12.0, 13.0, 0.5).unwrap(),
            ParamSpec::new("v_o", 8.0, 9.0, 0.5).unwrap(),
            ParamSpec::new("d", 13.5, 14.5, 1.0).unwrap(),
            ParamSpec::new("a", -0.05, -1.65, 1.6).unwrap(),
        ];
        ExperimentConfig {
            seeds: vec![0, 1],
            budget: 20,
            space: ScenarioSpace::new(specs).unwrap(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn oracle_is_worker_independent() {
        let cfg = toy();
        let ev = evaluator_for(&cfg);
        let one = brute_force_oracle(&cfg.space, &ev, 1).unwrap();
        let four = brute_force_oracle(&cfg.space, &ev, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.len(), 36);
        for (i, r) in one.iter().enumerate() {
            assert_eq!(r.scenario_index, i);
            assert_eq!(*r, ev.evaluate(&cfg.space.scenario(i).unwrap()).unwrap());
        }
    }

    #[test]
    fn summary_rows_and_invariants() {
        let cfg = toy();
        let outcome = compute_experiment(&cfg, 2).unwrap();
        assert_eq!(outcome.rows.len(), 4 * 2 * 5);
        assert!(outcome.failures().is_empty());
        for chunk in outcome.rows.chunks(5) {
            let total: f64 = chunk.iter().map(|r| r.proportion.unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for r in chunk {
                for c in [r.coverage_union, r.coverage_oracle].into_iter().flatten() {
                    assert!((0.0..=1.0).contains(&c));
                }
            }
        }
    }

    #[test]
    fn bundle_files_and_report() {
        let cfg = ExperimentConfig {
            algorithms: vec![Algorithm::Random],
            ..toy()
        };
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&cfg, dir.path(), 1).unwrap();
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + 2 * 5);
        assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER);
        let ops = fs::read_to_string(dir.path().join("operators.csv")).unwrap();
        assert_eq!(ops.trim(), OPERATORS_HEADER);
        assert!(dir
            .path()
            .join(log_file_name(Algorithm::Random, 1))
            .exists());
        let table = report(dir.path()).unwrap();
        assert!(table.contains("random") && table.contains("risk-free"));
        assert!(report(&dir.path().join("missing")).is_err());
    }
}
