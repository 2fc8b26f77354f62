//! Bookkeeping shared by every search algorithm: the tested-scenario archive,
//! the evaluation budget and the per-evaluation log.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::{EvaluationResult, Evaluator};
use crate::space::{Scenario, ScenarioSpace, DIMS};

/// Header of the per-evaluation log CSV.
pub const LOG_HEADER: &str =
    "iter,scenario_index,v_e,v_o,d,a,gttc_min,class,accepted,destroy_op,repair_op,T_c";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    AlvnsSa,
    AlnsSa,
    Ga,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::AlvnsSa,
        Algorithm::AlnsSa,
        Algorithm::Ga,
        Algorithm::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::AlvnsSa => "alvns-sa",
            Algorithm::AlnsSa => "alns-sa",
            Algorithm::Ga => "ga",
            Algorithm::Random => "random",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Algorithm::AlvnsSa | Algorithm::AlnsSa)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Set of already-tested scenario indices.
#[derive(Debug, Clone)]
pub struct Archive {
    tested: Vec<bool>,
    order: Vec<usize>,
}

impl Archive {
    pub fn new(cardinality: usize) -> Self {
        Archive {
            tested: vec![false; cardinality],
            order: Vec::new(),
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.tested[index]
    }

    /// Returns false if the index was already present.
    pub fn insert(&mut self, index: usize) -> bool {
        if self.tested[index] {
            return false;
        }
        self.tested[index] = true;
        self.order.push(index);
        true
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.order.len() == self.tested.len()
    }

    /// Indices in insertion order.
    pub fn indices(&self) -> &[usize] {
        &self.order
    }
}

/// Nearest untested node to a point given in level coordinates, ties broken
/// by the smaller flat index. `None` when the archive is full.
pub fn nearest_untested(
    space: &ScenarioSpace,
    archive: &Archive,
    u: &[f64; DIMS],
) -> Option<usize> {
    if archive.is_full() {
        return None;
    }
    let counts = space.level_counts();
    let u: [f64; DIMS] = std::array::from_fn(|i| u[i].clamp(0.0, (counts[i] - 1) as f64));
    // grow a Chebyshev box until it holds an untested node; the Euclidean
    // nearest is then within twice that radius
    let mut radius = 0usize;
    loop {
        let found = space
            .level_box_around(&u, radius as f64)
            .map(|ranges| {
                let mut any = false;
                space.for_each_in_box(&ranges, |idx, _| any |= !archive.contains(idx));
                any
            })
            .unwrap_or(false);
        if found {
            break;
        }
        radius += 1;
    }
    let ranges = space.level_box_around(&u, 2.0 * radius as f64)?;
    let mut best: Option<(f64, usize)> = None;
    space.for_each_in_box(&ranges, |idx, k| {
        if archive.contains(idx) {
            return;
        }
        let dist = ScenarioSpace::level_distance_sq(&u, &k);
        if best.is_none_or(|(bd, _)| dist < bd) {
            best = Some((dist, idx));
        }
    });
    best.map(|(_, idx)| idx)
}

/// One row of the evaluation log.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub iter: usize,
    pub scenario: Scenario,
    pub result: EvaluationResult,
    pub accepted: Option<bool>,
    /// 0-based destroy operator (R1..R8 are 0..7).
    pub destroy_op: Option<usize>,
    /// 0-based repair operator.
    pub repair_op: Option<usize>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    BudgetReached,
    SpaceExhausted,
    GenerationCap,
    /// The evaluator failed; the run's log is partial.
    Failed(String),
}

impl RunStatus {
    pub fn is_valid(&self) -> bool {
        !matches!(self, RunStatus::Failed(_))
    }
}

/// Everything one search campaign produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub log: Vec<EvalRecord>,
    /// Accepted scenarios, in acceptance order.
    pub omega_star: Vec<usize>,
    pub bank: Option<crate::alvns::OperatorBank>,
    pub status: RunStatus,
}

impl RunResult {
    pub fn n_evals(&self) -> usize {
        self.log.len()
    }

    /// Tested scenario indices in evaluation order.
    pub fn archive(&self) -> Vec<usize> {
        self.log.iter().map(|r| r.scenario.index).collect()
    }

    pub fn best(&self) -> Option<&EvalRecord> {
        self.log.iter().min_by(|a, b| {
            a.result
                .fitness()
                .total_cmp(&b.result.fitness())
                .then(a.scenario.index.cmp(&b.scenario.index))
        })
    }

    pub fn class_counts(&self) -> [usize; 5] {
        let mut counts = [0; 5];
        for r in &self.log {
            counts[r.result.class.ordinal()] += 1;
        }
        counts
    }

    pub fn write_log_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{LOG_HEADER}")?;
        for r in &self.log {
            let s = &r.scenario;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.iter,
                s.index,
                fmt_param(s.v_e),
                fmt_param(s.v_o),
                fmt_param(s.d),
                fmt_param(s.a),
                fmt_gttc(r.result.gttc_min),
                r.result.class,
                opt(r.accepted),
                opt(r.destroy_op.map(|k| k + 1)),
                opt(r.repair_op.map(|k| k + 1)),
                r.temperature.map(|t| format!("{t:.6}")).unwrap_or_default(),
            )?;
        }
        Ok(())
    }
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Parameter values rounded to 1e-9 so grid values print cleanly (`-1.65`).
pub fn fmt_param(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

pub fn fmt_gttc(g: f64) -> String {
    if g.is_finite() {
        format!("{g:.6}")
    } else {
        "inf".to_string()
    }
}

/// Archive, budget and log for one run. Every evaluation goes through here,
/// which is what enforces the no-retest rule.
pub(crate) struct Campaign<'a, E: ?Sized> {
    pub space: &'a ScenarioSpace,
    evaluator: &'a E,
    budget: usize,
    pub archive: Archive,
    pub log: Vec<EvalRecord>,
}

impl<'a, E: Evaluator + ?Sized> Campaign<'a, E> {
    pub fn new(space: &'a ScenarioSpace, evaluator: &'a E, budget: usize) -> Self {
        Campaign {
            space,
            evaluator,
            budget,
            archive: Archive::new(space.cardinality()),
            log: Vec::new(),
        }
    }

    pub fn budget_left(&self) -> bool {
        self.log.len() < self.budget
    }

    pub fn exhausted(&self) -> bool {
        self.archive.is_full()
    }

    /// Evaluates an untested scenario and logs it. Panics on a retest.
    pub fn evaluate(&mut self, index: usize) -> Result<EvaluationResult> {
        assert!(
            !self.archive.contains(index),
            "scenario {index} selected for evaluation but already tested"
        );
        debug_assert!(self.budget_left());
        let scenario = self.space.scenario(index)?;
        let result = self.evaluator.evaluate(&scenario)?;
        self.archive.insert(index);
        self.log.push(EvalRecord {
            iter: self.log.len(),
            scenario,
            result,
            accepted: None,
            destroy_op: None,
            repair_op: None,
            temperature: None,
        });
        Ok(result)
    }

    pub fn last_mut(&mut self) -> &mut EvalRecord {
        self.log
            .last_mut()
            .expect("log is non-empty after an evaluation")
    }

    /// Status once the run loop has ended normally.
    pub fn final_status(&self) -> RunStatus {
        if !self.budget_left() {
            RunStatus::BudgetReached
        } else if self.exhausted() {
            RunStatus::SpaceExhausted
        } else {
            RunStatus::GenerationCap
        }
    }
}
