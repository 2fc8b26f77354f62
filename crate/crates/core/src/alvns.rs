//! Adaptive large neighbourhood search with variable-neighbourhood repair and
//! simulated-annealing acceptance (ALVNS-SA).
//!
//! Each iteration perturbs one parameter of the current scenario (destroy),
//! maps the off-grid point back onto the nearest *untested* grid scenarios by
//! growing box neighbourhoods (repair), evaluates it, and accepts it on
//! improvement or by the Metropolis rule. Operator weights adapt to the risk
//! level of what each operator produced.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SearchRng};
use crate::search::{Algorithm, Archive, Campaign, RunResult, RunStatus};
use crate::sim::{fitness_of, Evaluator};
use crate::space::{ContinuousPoint, Scenario, ScenarioSpace, DIMS};

pub const DESTROY_OPS: usize = 2 * DIMS;
pub const REPAIR_OPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Destroy,
    Repair,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Destroy => "destroy",
            OperatorKind::Repair => "repair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorStats {
    pub weight: f64,
    pub score: f64,
    pub uses: u64,
}

impl OperatorStats {
    fn new(score: f64) -> Self {
        OperatorStats {
            weight: 1.0,
            score,
            uses: 0,
        }
    }

    /// Credits `theta` for one more use and refreshes the weight:
    /// `w <- (1 - rho) w + rho s / u`.
    pub fn record(&mut self, theta: f64, rho: f64) {
        self.uses += 1;
        self.score += theta;
        self.weight = (1.0 - rho) * self.weight + rho * self.score / self.uses as f64;
    }
}

/// Weights, cumulative scores and use counts of the 8 destroy and 2 repair operators.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBank {
    pub destroy: [OperatorStats; DESTROY_OPS],
    pub repair: [OperatorStats; REPAIR_OPS],
}

impl Default for OperatorBank {
    /// R1, R2, R3 and R7 start with score 1.5, the rest with 1; all weights 1.
    fn default() -> Self {
        let boosted = [0, 1, 2, 6];
        OperatorBank {
            destroy: std::array::from_fn(|k| {
                OperatorStats::new(if boosted.contains(&k) { 1.5 } else { 1.0 })
            }),
            repair: [OperatorStats::new(1.0); REPAIR_OPS],
        }
    }
}

impl OperatorBank {
    pub fn stats(&self, kind: OperatorKind) -> &[OperatorStats] {
        match kind {
            OperatorKind::Destroy => &self.destroy,
            OperatorKind::Repair => &self.repair,
        }
    }

    pub fn stats_mut(&mut self, kind: OperatorKind) -> &mut [OperatorStats] {
        match kind {
            OperatorKind::Destroy => &mut self.destroy,
            OperatorKind::Repair => &mut self.repair,
        }
    }
}

pub fn init_bank() -> OperatorBank {
    OperatorBank::default()
}

/// Roulette-wheel draw: one uniform `u` in `[0, sum w)`, first operator whose
/// cumulative weight exceeds it.
pub fn select_operator(
    bank: &OperatorBank,
    kind: OperatorKind,
    rng: &mut SearchRng,
) -> Result<usize> {
    let weights: Vec<f64> = bank.stats(kind).iter().map(|s| s.weight).collect();
    roulette(&weights, rng)
}

pub(crate) fn roulette(weights: &[f64], rng: &mut SearchRng) -> Result<usize> {
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NoSelectableOperator);
    }
    let target = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        cumulative += w;
        last_positive = k;
        if target < cumulative {
            return Ok(k);
        }
    }
    Ok(last_positive)
}

/// Samples the destruction step for one parameter.
///
/// Below the rejection threshold the step is uniform in `[0, 0.1 range]`.
/// Past it, the upper bound follows the risk band of the current scenario:
/// crash 0.1, near-crash 0.2, high-risk 0.3, risk 0.8, risk-free
/// `0.8 - 0.4 it / it_max` (times `range`).
#[allow(clippy::too_many_arguments)]
pub fn sample_xi(
    range: f64,
    crash: bool,
    gttc_min: f64,
    it: usize,
    it_max: usize,
    rejection_count: usize,
    rejection_threshold: usize,
    rng: &mut SearchRng,
) -> f64 {
    let fraction = if rejection_count <= rejection_threshold || crash || gttc_min == 0.0 {
        0.1
    } else if gttc_min <= 0.5 {
        0.2
    } else if gttc_min <= 1.0 {
        0.3
    } else if gttc_min <= 2.0 {
        0.8
    } else {
        let progress = if it_max == 0 {
            1.0
        } else {
            (it as f64 / it_max as f64).min(1.0)
        };
        0.8 - 0.4 * progress
    };
    rng.random::<f64>() * fraction * range
}

/// Applies destroy operator `op` (R1..R8 = 0..7): `op / 2` picks the
/// parameter, even ops subtract `xi` and odd ops add it. The result is
/// clamped to the space.
pub fn destroy(current: &Scenario, op: usize, xi: f64, space: &ScenarioSpace) -> ContinuousPoint {
    assert!(op < DESTROY_OPS, "destroy operator {op} out of range");
    let mut p = current.point();
    let sign = if op.is_multiple_of(2) { -1.0 } else { 1.0 };
    p.0[op / 2] += sign * xi;
    space.clamp(&p)
}

/// Variable-neighbourhood repair.
///
/// Scans boxes `N^j` of half-width `j` steps around the destroyed point for
/// `j = 1..=L`. In the first box holding untested scenarios, the two closest
/// (ties by flat index) are candidates; the repair operator `k` drawn by
/// roulette picks the k-th closest. With a single candidate it is returned
/// whichever operator is drawn. `None` means every scenario has been tested.
pub fn vns_repair(
    point: &ContinuousPoint,
    space: &ScenarioSpace,
    archive: &Archive,
    bank: &OperatorBank,
    rng: &mut SearchRng,
) -> Result<Option<(Scenario, usize)>> {
    if archive.is_full() {
        return Ok(None);
    }
    let u = space.to_level_coords(&space.clamp(point));
    for j in 1..=space.max_radius() {
        let Some(ranges) = space.level_box_around(&u, j as f64) else {
            continue;
        };
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        space.for_each_in_box(&ranges, |idx, k| {
            if !archive.contains(idx) {
                candidates.push((ScenarioSpace::level_distance_sq(&u, &k), idx));
            }
        });
        if candidates.is_empty() {
            continue;
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let op = select_operator(bank, OperatorKind::Repair, rng)?;
        let pick = if candidates.len() >= 2 { op } else { 0 };
        let scenario = space.scenario(candidates[pick].1)?;
        return Ok(Some((scenario, op)));
    }
    unreachable!("the widest box covers the whole grid and the archive is not full")
}

/// Metropolis acceptance: always for `delta <= 0`, else with probability
/// `exp(-delta / temperature)`.
pub fn sa_accept(delta: f64, temperature: f64, rng: &mut SearchRng) -> bool {
    if delta <= 0.0 {
        return true;
    }
    rng.random::<f64>() < (-delta / temperature).exp()
}

/// Reward for the operators used in one iteration.
///
/// | new GTTC_min | improved | not improved, accepted | not improved, rejected |
/// |--------------|----------|------------------------|------------------------|
/// | <= 0.5       | 2.6      | 2.0                    | 1.8                    |
/// | (0.5, 1]     | 2.2      | 1.6                    | 1.4                    |
/// | (1, 2]       | 1.8      | 1.2                    | 1.0                    |
/// | > 2          | 0.2      | 0.1                    | 0                      |
pub fn score_delta(old_gttc_min: f64, new_gttc_min: f64, accepted_by_sa: bool) -> f64 {
    let band = if new_gttc_min <= 0.5 {
        0
    } else if new_gttc_min <= 1.0 {
        1
    } else if new_gttc_min <= 2.0 {
        2
    } else {
        3
    };
    const IMPROVED: [f64; 4] = [2.6, 2.2, 1.8, 0.2];
    const ACCEPTED: [f64; 4] = [2.0, 1.6, 1.2, 0.1];
    const REJECTED: [f64; 4] = [1.8, 1.4, 1.0, 0.0];
    if new_gttc_min < old_gttc_min {
        IMPROVED[band]
    } else if accepted_by_sa {
        ACCEPTED[band]
    } else {
        REJECTED[band]
    }
}

/// Credits `theta` to the destroy and repair operators used this iteration.
pub fn update_bank(
    bank: &mut OperatorBank,
    destroy_op: usize,
    repair_op: usize,
    theta: f64,
    rho: f64,
) {
    bank.destroy[destroy_op].record(theta, rho);
    bank.repair[repair_op].record(theta, rho);
}

/// Parameters shared by ALVNS-SA and ALNS-SA.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Evaluation budget.
    pub budget: usize,
    pub t_begin: f64,
    pub t_end: f64,
    pub alpha: f64,
    pub rho: f64,
    pub rejection_threshold: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 11_000,
            t_begin: 1.0,
            t_end: 0.01,
            alpha: 0.95,
            rho: 0.3,
            rejection_threshold: 5,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if !(self.t_end > 0.0 && self.t_end < self.t_begin) || !self.t_begin.is_finite() {
            return Err(Error::Config(format!(
                "need 0 < t_end < t_begin, got t_begin={} t_end={}",
                self.t_begin, self.t_end
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!(
                "rho must be in (0, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Geometric cooling with a reset to `t_begin` once the temperature drops to `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaState {
    pub t_begin: f64,
    pub t_end: f64,
    pub current: f64,
    pub alpha: f64,
}

impl SaState {
    pub fn new(config: &SearchConfig) -> Self {
        SaState {
            t_begin: config.t_begin,
            t_end: config.t_end,
            current: config.t_begin,
            alpha: config.alpha,
        }
    }

    pub fn cool(&mut self) {
        self.current *= self.alpha;
        if self.current <= self.t_end {
            self.current = self.t_begin;
        }
    }
}

pub(crate) type RepairFn = fn(
    &ContinuousPoint,
    &ScenarioSpace,
    &Archive,
    &OperatorBank,
    &mut SearchRng,
) -> Result<Option<(Scenario, usize)>>;

pub fn run_alvns_sa<E: Evaluator + ?Sized>(
    config: &SearchConfig,
    space: &ScenarioSpace,
    evaluator: &E,
) -> Result<RunResult> {
    run_adaptive(Algorithm::AlvnsSa, config, space, evaluator, vns_repair)
}

/// Destroy / repair / evaluate / accept loop shared by the adaptive searches;
/// only the repair step differs between them.
pub(crate) fn run_adaptive<E: Evaluator + ?Sized>(
    algorithm: Algorithm,
    config: &SearchConfig,
    space: &ScenarioSpace,
    evaluator: &E,
    repair: RepairFn,
) -> Result<RunResult> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let mut campaign = Campaign::new(space, evaluator, config.budget);
    let mut bank = init_bank();
    let mut sa = SaState::new(config);
    let mut omega_star = Vec::new();
    let ranges: [f64; DIMS] = std::array::from_fn(|i| space.params()[i].range());

    let finish = |campaign: Campaign<'_, E>, omega_star, bank, status| RunResult {
        algorithm,
        seed: config.seed,
        log: campaign.log,
        omega_star,
        bank: Some(bank),
        status,
    };

    let start = rng.random_range(0..space.cardinality());
    let mut current = match campaign.evaluate(start) {
        Ok(r) => r,
        Err(e) => {
            return Ok(finish(
                campaign,
                omega_star,
                bank,
                RunStatus::Failed(e.to_string()),
            ))
        }
    };
    campaign.last_mut().accepted = Some(true);
    omega_star.push(start);
    let mut current_scenario = space.scenario(start)?;
    let mut rejections = 0usize;

    while campaign.budget_left() && !campaign.exhausted() {
        let d_op = select_operator(&bank, OperatorKind::Destroy, &mut rng)?;
        let xi = sample_xi(
            ranges[d_op / 2],
            current.crash,
            current.gttc_min,
            campaign.log.len(),
            config.budget,
            rejections,
            config.rejection_threshold,
            &mut rng,
        );
        let point = destroy(&current_scenario, d_op, xi, space);
        let Some((candidate, r_op)) = repair(&point, space, &campaign.archive, &bank, &mut rng)?
        else {
            break;
        };
        let result = match campaign.evaluate(candidate.index) {
            Ok(r) => r,
            Err(e) => {
                return Ok(finish(
                    campaign,
                    omega_star,
                    bank,
                    RunStatus::Failed(e.to_string()),
                ))
            }
        };

        let f_new = result.fitness();
        let f_cur = current.fitness();
        let improved = f_new < f_cur;
        let accepted = improved || sa_accept(f_new - f_cur, sa.current, &mut rng);
        debug_assert!(!improved || accepted);
        let theta = score_delta(fitness_of(current.gttc_min), f_new, accepted);

        let row = campaign.last_mut();
        row.accepted = Some(accepted);
        row.destroy_op = Some(d_op);
        row.repair_op = Some(r_op);
        row.temperature = Some(sa.current);

        if accepted {
            current = result;
            current_scenario = candidate;
            omega_star.push(candidate.index);
            rejections = 0;
        } else {
            rejections += 1;
        }
        sa.cool();
        debug_assert!(sa.current > sa.t_end && sa.current <= sa.t_begin);
        update_bank(&mut bank, d_op, r_op, theta, config.rho);
    }

    let status = campaign.final_status();
    Ok(finish(campaign, omega_star, bank, status))
}
