//! Discretized logical-scenario parameter space.
//!
//! A concrete scenario is a grid point `(v_e, v_o, d, a)`: ego speed, lead
//! (objective) speed, initial bumper-to-bumper gap and the lead vehicle's mean
//! deceleration. Each axis is an arithmetic progression from `start` towards
//! `end`; the deceleration axis runs downward (`-0.05, -0.25, ...`), so level 0
//! is the mildest braking.
//!
//! Flat indices are row-major over `(v_e, v_o, d, a)`, i.e. `a` varies fastest.
//!
//! Internally most geometry is done in *level coordinates*: a physical value
//! `x` on axis `i` maps to `(x - start_i) / signed_step_i`. Grid nodes sit on
//! integers, and step-normalized Euclidean distance is plain Euclidean
//! distance in level coordinates.

use std::fmt;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

pub const DIMS: usize = 4;

const GRID_EPS: f64 = 1e-9;

/// One axis of the scenario lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    name: String,
    start: f64,
    end: f64,
    step: f64,
    levels: usize,
}

impl ParamSpec {
    /// `step` is a positive magnitude; the direction is taken from `end - start`.
    /// `start == end` gives a single-level axis.
    pub fn new(name: impl Into<String>, start: f64, end: f64, step: f64) -> Result<Self> {
        let name = name.into();
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::Config(format!(
                "parameter `{name}`: bounds must be finite"
            )));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Config(format!(
                "parameter `{name}`: step must be positive, got {step}"
            )));
        }
        let spans = (end - start).abs() / step;
        let rounded = spans.round();
        if (spans - rounded).abs() > GRID_EPS * rounded.max(1.0) {
            return Err(Error::Config(format!(
                "parameter `{name}`: range {start}..{end} is not a whole number of {step} steps"
            )));
        }
        Ok(ParamSpec {
            name,
            start,
            end,
            step,
            levels: rounded as usize + 1,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    /// Step magnitude (always positive).
    pub fn step(&self) -> f64 {
        self.step
    }

    fn signed_step(&self) -> f64 {
        if self.end < self.start {
            -self.step
        } else {
            self.step
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn min(&self) -> f64 {
        self.start.min(self.end)
    }

    pub fn max(&self) -> f64 {
        self.start.max(self.end)
    }

    /// `max - min`.
    pub fn range(&self) -> f64 {
        (self.end - self.start).abs()
    }

    /// Physical value of level `k`.
    pub fn value(&self, k: usize) -> f64 {
        debug_assert!(k < self.levels);
        if k + 1 == self.levels {
            // land exactly on the configured end point
            self.end
        } else {
            self.start + k as f64 * self.signed_step()
        }
    }

    /// Level coordinate of a physical value (not rounded, not clamped).
    pub fn to_level_coord(&self, x: f64) -> f64 {
        (x - self.start) / self.signed_step()
    }

    pub fn from_level_coord(&self, u: f64) -> f64 {
        self.start + u * self.signed_step()
    }

    /// Exact grid level of `x`, if it lies on the grid.
    pub fn level_of(&self, x: f64) -> Option<usize> {
        let u = self.to_level_coord(x);
        let k = u.round();
        if (u - k).abs() > 1e-6 || k < 0.0 || k as usize >= self.levels {
            None
        } else {
            Some(k as usize)
        }
    }
}

/// A concrete scenario: one node of the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub index: usize,
    /// Ego speed, m/s.
    pub v_e: f64,
    /// Objective (lead) speed, m/s.
    pub v_o: f64,
    /// Initial bumper-to-bumper gap, m.
    pub d: f64,
    /// Mean objective deceleration, m/s² (non-positive).
    pub a: f64,
}

impl Scenario {
    pub fn values(&self) -> [f64; DIMS] {
        [self.v_e, self.v_o, self.d, self.a]
    }

    pub fn point(&self) -> ContinuousPoint {
        ContinuousPoint(self.values())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "#{} (v_e={}, v_o={}, d={}, a={})",
            self.index, self.v_e, self.v_o, self.d, self.a
        )
    }
}

/// An off-grid point in physical units, as produced by a destroy operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousPoint(pub [f64; DIMS]);

impl From<&Scenario> for ContinuousPoint {
    fn from(s: &Scenario) -> Self {
        s.point()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpace {
    params: [ParamSpec; DIMS],
    strides: [usize; DIMS],
    cardinality: usize,
}

impl Default for ScenarioSpace {
    fn default() -> Self {
        Self::new(Self::default_specs()).expect("default specs are valid")
    }
}

impl ScenarioSpace {
    pub fn new(params: [ParamSpec; DIMS]) -> Result<Self> {
        let mut strides = [1usize; DIMS];
        for i in (0..DIMS - 1).rev() {
            strides[i] = strides[i + 1]
                .checked_mul(params[i + 1].levels)
                .ok_or_else(|| Error::Config("scenario space too large".into()))?;
        }
        let cardinality = strides[0]
            .checked_mul(params[0].levels)
            .ok_or_else(|| Error::Config("scenario space too large".into()))?;
        Ok(ScenarioSpace {
            params,
            strides,
            cardinality,
        })
    }

    /// The rear-end logical scenario: 16 x 21 x 20 x 9 = 60,480 nodes.
    pub fn default_specs() -> [ParamSpec; DIMS] {
        [
            ParamSpec::new("v_e", 9.0, 16.5, 0.5).unwrap(),
            ParamSpec::new("v_o", 5.5, 15.5, 0.5).unwrap(),
            ParamSpec::new("d", 13.5, 32.5, 1.0).unwrap(),
            ParamSpec::new("a", -0.05, -1.65, 0.2).unwrap(),
        ]
    }

    /// Same as the default but with the deceleration axis extended to
    /// -1.85 m/s² (10 levels, 67,200 nodes).
    pub fn extended_deceleration_specs() -> [ParamSpec; DIMS] {
        let mut specs = Self::default_specs();
        specs[3] = ParamSpec::new("a", -0.05, -1.85, 0.2).unwrap();
        specs
    }

    pub fn params(&self) -> &[ParamSpec; DIMS] {
        &self.params
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn level_counts(&self) -> [usize; DIMS] {
        std::array::from_fn(|i| self.params[i].levels)
    }

    /// Largest VNS radius needed for a box to cover every axis: `max_i(range_i / step_i)`,
    /// at least 1.
    pub fn max_radius(&self) -> usize {
        self.params
            .iter()
            .map(|p| p.levels - 1)
            .max()
            .unwrap_or(0)
            .max(1)
    }

    pub fn levels_of(&self, index: usize) -> Result<[usize; DIMS]> {
        if index >= self.cardinality {
            return Err(Error::IndexOutOfRange {
                index,
                cardinality: self.cardinality,
            });
        }
        Ok(self.levels_of_unchecked(index))
    }

    pub(crate) fn levels_of_unchecked(&self, index: usize) -> [usize; DIMS] {
        std::array::from_fn(|i| (index / self.strides[i]) % self.params[i].levels)
    }

    pub fn index_of_levels(&self, levels: [usize; DIMS]) -> usize {
        levels
            .iter()
            .zip(self.strides.iter())
            .map(|(k, s)| k * s)
            .sum()
    }

    pub fn scenario(&self, index: usize) -> Result<Scenario> {
        let k = self.levels_of(index)?;
        Ok(self.scenario_from_levels(k))
    }

    pub fn scenario_from_levels(&self, k: [usize; DIMS]) -> Scenario {
        Scenario {
            index: self.index_of_levels(k),
            v_e: self.params[0].value(k[0]),
            v_o: self.params[1].value(k[1]),
            d: self.params[2].value(k[2]),
            a: self.params[3].value(k[3]),
        }
    }

    /// Flat index of a scenario, recomputed from its coordinates.
    pub fn index_of(&self, s: &Scenario) -> Result<usize> {
        let values = s.values();
        let mut k = [0usize; DIMS];
        for i in 0..DIMS {
            k[i] = self.params[i]
                .level_of(values[i])
                .ok_or_else(|| Error::OffGrid {
                    param: self.params[i].name.clone(),
                    value: values[i],
                })?;
        }
        Ok(self.index_of_levels(k))
    }

    pub fn scenarios(&self) -> impl Iterator<Item = Scenario> + '_ {
        (0..self.cardinality).map(|i| self.scenario_from_levels(self.levels_of_unchecked(i)))
    }

    /// Projects each coordinate into `[min_i, max_i]`.
    pub fn clamp(&self, p: &ContinuousPoint) -> ContinuousPoint {
        ContinuousPoint(std::array::from_fn(|i| {
            let spec = &self.params[i];
            p.0[i].clamp(spec.min(), spec.max())
        }))
    }

    pub fn to_level_coords(&self, p: &ContinuousPoint) -> [f64; DIMS] {
        std::array::from_fn(|i| self.params[i].to_level_coord(p.0[i]))
    }

    /// Step-normalized Euclidean distance.
    pub fn distance(&self, x: &ContinuousPoint, y: &ContinuousPoint) -> f64 {
        (0..DIMS)
            .map(|i| {
                let delta = (x.0[i] - y.0[i]) / self.params[i].step;
                delta * delta
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance from a point in level coordinates to a grid node.
    pub(crate) fn level_distance_sq(u: &[f64; DIMS], k: &[usize; DIMS]) -> f64 {
        (0..DIMS)
            .map(|i| {
                let delta = u[i] - k[i] as f64;
                delta * delta
            })
            .sum()
    }

    /// Per-axis level ranges of the box `[p_i - j*step_i, p_i + j*step_i]`
    /// clipped to the grid. `None` when the box misses the grid on some axis.
    pub fn level_box(
        &self,
        p: &ContinuousPoint,
        j: usize,
    ) -> Option<[RangeInclusive<usize>; DIMS]> {
        let u = self.to_level_coords(p);
        self.level_box_around(&u, j as f64)
    }

    pub(crate) fn level_box_around(
        &self,
        u: &[f64; DIMS],
        radius: f64,
    ) -> Option<[RangeInclusive<usize>; DIMS]> {
        let mut out: [RangeInclusive<usize>; DIMS] = std::array::from_fn(|_| 0..=0);
        for i in 0..DIMS {
            let top = (self.params[i].levels - 1) as f64;
            let lo = (u[i] - radius - GRID_EPS).ceil().max(0.0);
            let hi = (u[i] + radius + GRID_EPS).floor().min(top);
            if lo > hi {
                return None;
            }
            out[i] = lo as usize..=hi as usize;
        }
        Some(out)
    }

    /// Flat indices (ascending) of all nodes inside the j-th box around `p`.
    pub fn neighborhood(&self, p: &ContinuousPoint, j: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(ranges) = self.level_box(p, j) {
            self.for_each_in_box(&ranges, |idx, _| out.push(idx));
        }
        out
    }

    /// Visits every node of a level box in ascending flat-index order.
    pub(crate) fn for_each_in_box<F>(&self, ranges: &[RangeInclusive<usize>; DIMS], mut f: F)
    where
        F: FnMut(usize, [usize; DIMS]),
    {
        for k0 in ranges[0].clone() {
            for k1 in ranges[1].clone() {
                for k2 in ranges[2].clone() {
                    for k3 in ranges[3].clone() {
                        let k = [k0, k1, k2, k3];
                        f(self.index_of_levels(k), k);
                    }
                }
            }
        }
    }

    /// Nearest grid node by rounding each (clamped) level coordinate.
    pub fn round_to_grid(&self, p: &ContinuousPoint) -> Scenario {
        let u = self.to_level_coords(&self.clamp(p));
        let k = std::array::from_fn(|i| {
            let top = self.params[i].levels - 1;
            (u[i].round().max(0.0) as usize).min(top)
        });
        self.scenario_from_levels(k)
    }
}
