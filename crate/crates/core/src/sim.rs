//! Counterfactual simulator for the straight-road rear-end scenario.
//!
//! The lead (objective) vehicle starts `d` metres ahead of the ego at speed
//! `v_o` and brakes with a per-step deceleration drawn from `N(a, sigma²)`
//! (clamped to `<= 0`) until it stops. The ego stands in for the controller
//! under test: it cruises at `v_e` until a simple time-to-collision or gap
//! trigger latches a brake command, waits out its reaction time, then brakes
//! at `max_brake` until it stops.
//!
//! Motion is 1-D. Accelerations are held constant over each step and
//! integrated exactly (including a vehicle stopping part-way through a step),
//! so with `sigma = 0` the trajectory reproduces constant-deceleration closed
//! forms up to rounding.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::risk::{self, ScenarioClass};
use crate::rng::{rng_from_seed, scenario_seed};
use crate::space::Scenario;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Horizon, s.
    pub t_max: f64,
    /// Std-dev of the per-step lead deceleration, m/s².
    pub sigma: f64,
    /// Consecutive provably-open steps before the run is cut short; 0 disables.
    pub open_gap_exit: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            t_max: 30.0,
            sigma: 0.1,
            open_gap_exit: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "sim.dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_max >= self.dt) || !self.t_max.is_finite() {
            return Err(Error::Config(format!(
                "sim.t_max must be at least dt, got {}",
                self.t_max
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!(
                "sim.sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Parameters of the stand-in ego controller.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoControllerConfig {
    /// Delay between latching a brake command and braking, s.
    pub reaction_time: f64,
    /// Brake deceleration magnitude, m/s².
    pub max_brake: f64,
    /// Brake when time-to-collision drops below this, s.
    pub ttc_trigger: f64,
    /// Brake when the gap drops below this, m.
    pub min_gap_trigger: f64,
}

impl Default for EgoControllerConfig {
    fn default() -> Self {
        EgoControllerConfig {
            reaction_time: 0.7,
            max_brake: 4.5,
            ttc_trigger: 3.4,
            min_gap_trigger: 6.0,
        }
    }
}

impl EgoControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("reaction_time", self.reaction_time),
            ("max_brake", self.max_brake),
            ("ttc_trigger", self.ttc_trigger),
            ("min_gap_trigger", self.min_gap_trigger),
        ];
        for (name, value) in fields {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "ego.{name} must be non-negative, got {value}"
                )));
            }
        }
        if !(self.max_brake > 0.0) {
            return Err(Error::Config("ego.max_brake must be positive".into()));
        }
        Ok(())
    }
}

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Contact,
    Horizon,
    BothStopped,
    OpenGap,
}

/// Per-step time series of both vehicles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub ego_pos: Vec<f64>,
    pub ego_v: Vec<f64>,
    pub ego_a: Vec<f64>,
    pub obj_pos: Vec<f64>,
    pub obj_v: Vec<f64>,
    pub obj_a: Vec<f64>,
    pub contact: Vec<bool>,
    pub termination: Option<Termination>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn gap(&self, k: usize) -> f64 {
        self.obj_pos[k] - self.ego_pos[k]
    }

    /// Keeps the first `n` steps.
    pub fn truncated(&self, n: usize) -> TrajectoryRecord {
        TrajectoryRecord {
            t: self.t[..n].to_vec(),
            ego_pos: self.ego_pos[..n].to_vec(),
            ego_v: self.ego_v[..n].to_vec(),
            ego_a: self.ego_a[..n].to_vec(),
            obj_pos: self.obj_pos[..n].to_vec(),
            obj_v: self.obj_v[..n].to_vec(),
            obj_a: self.obj_a[..n].to_vec(),
            contact: self.contact[..n].to_vec(),
            termination: None,
        }
    }

    fn push(&mut self, t: f64, ego: &Body, obj: &Body, contact: bool) {
        self.t.push(t);
        self.ego_pos.push(ego.pos);
        self.ego_v.push(ego.v);
        self.ego_a.push(ego.a);
        self.obj_pos.push(obj.pos);
        self.obj_v.push(obj.v);
        self.obj_a.push(obj.a);
        self.contact.push(contact);
    }

    /// Writes the record as CSV: `t,ego_pos,ego_v,ego_a,obj_pos,obj_v,obj_a,contact`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,ego_pos,ego_v,ego_a,obj_pos,obj_v,obj_a,contact")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                self.t[k],
                self.ego_pos[k],
                self.ego_v[k],
                self.ego_a[k],
                self.obj_pos[k],
                self.obj_v[k],
                self.obj_a[k],
                u8::from(self.contact[k])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Body {
    pos: f64,
    v: f64,
    a: f64,
}

impl Body {
    /// Advances by `dt` under constant acceleration `a`, stopping at rest.
    fn advance(&mut self, dt: f64) {
        if self.a < 0.0 && self.v + self.a * dt <= 0.0 {
            self.pos += self.v * self.v / (-2.0 * self.a);
            self.v = 0.0;
        } else {
            self.pos += self.v * dt + 0.5 * self.a * dt * dt;
            self.v += self.a * dt;
        }
    }
}

/// Runs one counterfactual simulation. `seed` drives the lead vehicle's
/// deceleration noise.
pub fn simulate(
    scenario: &Scenario,
    sim: &SimConfig,
    ego_cfg: &EgoControllerConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = rng_from_seed(seed);
    let noise = if sim.sigma > 0.0 {
        Some(
            Normal::new(scenario.a, sim.sigma)
                .map_err(|e| Error::Simulation(format!("noise distribution: {e}")))?,
        )
    } else {
        None
    };
    let draw_decel = |rng: &mut crate::rng::SearchRng| -> f64 {
        match &noise {
            Some(n) => n.sample(rng).min(0.0),
            None => scenario.a.min(0.0),
        }
    };

    // bound on how hard the lead can brake, used by the open-gap exit test
    let decel_bound = -scenario.a.min(0.0) + 3.0 * sim.sigma;

    let mut ego = Body {
        pos: 0.0,
        v: scenario.v_e,
        a: 0.0,
    };
    let mut obj = Body {
        pos: scenario.d,
        v: scenario.v_o,
        a: 0.0,
    };
    let mut brake_latched_at: Option<f64> = None;
    let mut open_steps = 0usize;
    let mut record = TrajectoryRecord::default();
    let capacity = (sim.t_max / sim.dt).ceil() as usize + 1;
    record.t.reserve(capacity);

    let mut step = 0usize;
    loop {
        let t = step as f64 * sim.dt;
        if ![ego.pos, ego.v, obj.pos, obj.v]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::Simulation(format!(
                "non-finite state at t={t} for scenario {scenario}"
            )));
        }

        let gap = obj.pos - ego.pos;
        let contact = gap <= 0.0;

        obj.a = if obj.v > 0.0 {
            draw_decel(&mut rng)
        } else {
            0.0
        };

        if brake_latched_at.is_none() {
            let closing = ego.v - obj.v;
            let ttc_low = closing > 0.0 && gap / closing < ego_cfg.ttc_trigger;
            if ttc_low || gap < ego_cfg.min_gap_trigger {
                brake_latched_at = Some(t);
            }
        }
        ego.a = match brake_latched_at {
            Some(t0) if ego.v > 0.0 && t - t0 >= ego_cfg.reaction_time - TIME_EPS => {
                -ego_cfg.max_brake
            }
            _ => 0.0,
        };

        record.push(t, &ego, &obj, contact);

        if contact {
            record.termination = Some(Termination::Contact);
            break;
        }
        if ego.v == 0.0 && obj.v == 0.0 {
            record.termination = Some(Termination::BothStopped);
            break;
        }
        if t >= sim.t_max - TIME_EPS {
            record.termination = Some(Termination::Horizon);
            break;
        }
        if sim.open_gap_exit > 0 {
            // the lead cannot slow to the ego's speed before the horizon
            let lead_margin = obj.v - ego.v;
            let provably_open = lead_margin >= 0.0
                && (obj.v == 0.0 || lead_margin >= decel_bound * (sim.t_max - t));
            open_steps = if provably_open { open_steps + 1 } else { 0 };
            if open_steps >= sim.open_gap_exit {
                record.termination = Some(Termination::OpenGap);
                break;
            }
        }

        ego.advance(sim.dt);
        obj.advance(sim.dt);
        step += 1;
    }
    Ok(record)
}

/// Outcome of one test of the controller against one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationResult {
    pub scenario_index: usize,
    /// 0 on contact, `f64::INFINITY` when the pair never closes.
    pub gttc_min: f64,
    pub class: ScenarioClass,
    pub crash: bool,
    pub n_steps: usize,
    pub seed: u64,
}

impl EvaluationResult {
    /// Objective value to minimize. The never-closing sentinel maps to a
    /// large finite constant so differences stay finite.
    pub fn fitness(&self) -> f64 {
        fitness_of(self.gttc_min)
    }
}

/// Finite stand-in for an undefined GTTC_min in objective arithmetic.
pub const UNDEFINED_GTTC_FITNESS: f64 = 1e6;

pub fn fitness_of(gttc_min: f64) -> f64 {
    if gttc_min.is_finite() {
        gttc_min
    } else {
        UNDEFINED_GTTC_FITNESS
    }
}

/// simulate + GTTC_min + classify, with the noise seed split off `run_seed`
/// by scenario index.
pub fn evaluate(
    scenario: &Scenario,
    sim: &SimConfig,
    ego_cfg: &EgoControllerConfig,
    run_seed: u64,
) -> Result<EvaluationResult> {
    let seed = scenario_seed(run_seed, scenario.index);
    let record = simulate(scenario, sim, ego_cfg, seed)?;
    let gttc_min = risk::gttc_min(&record)?;
    let class = risk::classify(gttc_min)?;
    Ok(EvaluationResult {
        scenario_index: scenario.index,
        gttc_min,
        class,
        crash: gttc_min == 0.0,
        n_steps: record.len(),
        seed,
    })
}

/// Black-box test oracle for one scenario.
pub trait Evaluator: Sync {
    fn evaluate(&self, scenario: &Scenario) -> Result<EvaluationResult>;
}

/// The kinematic surrogate wired up as an [`Evaluator`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurrogateEvaluator {
    pub sim: SimConfig,
    pub ego: EgoControllerConfig,
    pub run_seed: u64,
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&self, scenario: &Scenario) -> Result<EvaluationResult> {
        evaluate(scenario, &self.sim, &self.ego, self.run_seed)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, scenario: &Scenario) -> Result<EvaluationResult> {
        (**self).evaluate(scenario)
    }
}
