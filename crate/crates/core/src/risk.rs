//! Generalized time-to-collision (GTTC) and the five-level risk classification.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::TrajectoryRecord;

/// Relative kinematics of the two closest points on a vehicle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub p_i: [f64; 2],
    pub p_j: [f64; 2],
    pub v_i: [f64; 2],
    pub v_j: [f64; 2],
}

impl KinematicState {
    /// Longitudinal state of a follower (`i`) behind a leader (`j`) on a straight road.
    pub fn longitudinal(
        follower_pos: f64,
        follower_v: f64,
        leader_pos: f64,
        leader_v: f64,
    ) -> Self {
        KinematicState {
            p_i: [follower_pos, 0.0],
            p_j: [leader_pos, 0.0],
            v_i: [follower_v, 0.0],
            v_j: [leader_v, 0.0],
        }
    }

    fn dp(&self) -> [f64; 2] {
        [self.p_i[0] - self.p_j[0], self.p_i[1] - self.p_j[1]]
    }
}

/// `D = |p_i - p_j|`.
pub fn relative_distance(state: &KinematicState) -> f64 {
    let [dx, dy] = state.dp();
    (dx * dx + dy * dy).sqrt()
}

/// Range rate `D' = (p_i - p_j)·(v_i - v_j) / D`; negative when closing.
///
/// Errors on coincident points, where the range rate is undefined and the
/// pair is in contact.
pub fn distance_rate(state: &KinematicState) -> Result<f64> {
    let dist = relative_distance(state);
    if dist <= 0.0 {
        return Err(Error::InvalidArgument("vehicles in contact: D = 0".into()));
    }
    let [dx, dy] = state.dp();
    let dvx = state.v_i[0] - state.v_j[0];
    let dvy = state.v_i[1] - state.v_j[1];
    Ok((dx * dvx + dy * dvy) / dist)
}

/// `-D / D'` while closing, `None` when the range is constant or opening.
pub fn gttc(state: &KinematicState) -> Result<Option<f64>> {
    let rate = distance_rate(state)?;
    if rate < 0.0 {
        Ok(Some(-relative_distance(state) / rate))
    } else {
        Ok(None)
    }
}

/// Minimum GTTC over a trajectory.
///
/// Returns 0 when any step is in contact and `f64::INFINITY` when the pair
/// never closes.
pub fn gttc_min(trajectory: &TrajectoryRecord) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    if trajectory.contact.iter().any(|&c| c) {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for k in 0..trajectory.len() {
        let state = KinematicState::longitudinal(
            trajectory.ego_pos[k],
            trajectory.ego_v[k],
            trajectory.obj_pos[k],
            trajectory.obj_v[k],
        );
        // D > 0 on every non-contact step
        if let Some(g) = gttc(&state)? {
            best = best.min(g);
        }
    }
    Ok(best)
}

/// Risk level of a scenario, ordered from most to least dangerous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioClass {
    Crash,
    NearCrash,
    HighRisk,
    Risk,
    RiskFree,
}

impl ScenarioClass {
    pub const ALL: [ScenarioClass; 5] = [
        ScenarioClass::Crash,
        ScenarioClass::NearCrash,
        ScenarioClass::HighRisk,
        ScenarioClass::Risk,
        ScenarioClass::RiskFree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioClass::Crash => "crash",
            ScenarioClass::NearCrash => "near-crash",
            ScenarioClass::HighRisk => "high-risk",
            ScenarioClass::Risk => "risk",
            ScenarioClass::RiskFree => "risk-free",
        }
    }

    /// Position in [`ScenarioClass::ALL`].
    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Crash, near-crash, high-risk or risk.
    pub fn is_safety_critical(self) -> bool {
        self != ScenarioClass::RiskFree
    }
}

impl fmt::Display for ScenarioClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario class `{s}`")))
    }
}

/// Left-open, right-closed bands: 0 | (0, 0.5] | (0.5, 1] | (1, 2] | (2, inf].
pub fn classify(gttc_min: f64) -> Result<ScenarioClass> {
    if gttc_min.is_nan() || gttc_min < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "GTTC_min must be non-negative, got {gttc_min}"
        )));
    }
    Ok(if gttc_min == 0.0 {
        ScenarioClass::Crash
    } else if gttc_min <= 0.5 {
        ScenarioClass::NearCrash
    } else if gttc_min <= 1.0 {
        ScenarioClass::HighRisk
    } else if gttc_min <= 2.0 {
        ScenarioClass::Risk
    } else {
        ScenarioClass::RiskFree
    })
}

/// Speed from video frame differencing: `delta_l / (n / fps)`.
pub fn speed_from_frames(delta_l: f64, n: u32, fps: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "frame count must be at least 1".into(),
        ));
    }
    if !(fps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fps must be positive, got {fps}"
        )));
    }
    if !(delta_l >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be non-negative, got {delta_l}"
        )));
    }
    let frame_interval = 1.0 / fps;
    Ok(delta_l / (n as f64 * frame_interval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(p_i: [f64; 2], p_j: [f64; 2], v_i: [f64; 2], v_j: [f64; 2]) -> KinematicState {
        KinematicState { p_i, p_j, v_i, v_j }
    }

    #[test]
    fn distance_examples() {
        let s = state([1.0, 2.0], [1.0, 2.0], [0.0; 2], [0.0; 2]);
        assert_eq!(relative_distance(&s), 0.0);
        let s = state([0.0, 0.0], [3.0, 4.0], [0.0; 2], [0.0; 2]);
        assert_eq!(relative_distance(&s), 5.0);
    }

    #[test]
    fn rate_and_gttc_hand_case() {
        let s = state([0.0, 0.0], [20.0, 0.0], [10.0, 0.0], [5.0, 0.0]);
        assert_eq!(distance_rate(&s).unwrap(), -5.0);
        assert_eq!(gttc(&s).unwrap(), Some(4.0));
    }

    #[test]
    fn rate_signs() {
        let same = state([0.0, 0.0], [20.0, 0.0], [7.0, 1.0], [7.0, 1.0]);
        assert_eq!(distance_rate(&same).unwrap(), 0.0);
        assert_eq!(gttc(&same).unwrap(), None);
        // head-on but already past each other
        let apart = state([30.0, 0.0], [20.0, 0.0], [10.0, 0.0], [-10.0, 0.0]);
        assert!(distance_rate(&apart).unwrap() > 0.0);
        assert_eq!(gttc(&apart).unwrap(), None);
        let touching = state([1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]);
        assert!(distance_rate(&touching).is_err());
    }

    #[test]
    fn classify_boundaries() {
        let cases = [
            (0.0, ScenarioClass::Crash),
            (1e-12, ScenarioClass::NearCrash),
            (0.5, ScenarioClass::NearCrash),
            (0.5000001, ScenarioClass::HighRisk),
            (1.0, ScenarioClass::HighRisk),
            (1.0000001, ScenarioClass::Risk),
            (2.0, ScenarioClass::Risk),
            (2.0001, ScenarioClass::RiskFree),
            (f64::INFINITY, ScenarioClass::RiskFree),
        ];
        for (g, class) in cases {
            assert_eq!(classify(g).unwrap(), class, "gttc_min = {g}");
        }
        assert!(classify(-0.1).is_err());
        assert!(classify(f64::NAN).is_err());
    }

    #[test]
    fn class_names_round_trip() {
        for c in ScenarioClass::ALL {
            assert_eq!(c.as_str().parse::<ScenarioClass>().unwrap(), c);
        }
        assert!(ScenarioClass::Crash < ScenarioClass::RiskFree);
    }

    #[test]
    fn speed_examples() {
        assert_eq!(speed_from_frames(10.0, 25, 25.0).unwrap(), 10.0);
        assert_eq!(speed_from_frames(0.0, 3, 30.0).unwrap(), 0.0);
        let v = speed_from_frames(7.0, 4, 30.0).unwrap();
        assert!((speed_from_frames(7.0, 4, 60.0).unwrap() - 2.0 * v).abs() < 1e-12);
        assert!(speed_from_frames(1.0, 0, 25.0).is_err());
        assert!(speed_from_frames(1.0, 5, 0.0).is_err());
        assert!(speed_from_frames(-1.0, 5, 25.0).is_err());
    }

    proptest! {
        #[test]
        fn random_pairs_distance_is_hypot(
            a in prop::array::uniform2(-1e3..1e3f64),
            b in prop::array::uniform2(-1e3..1e3f64),
        ) {
            let s = state(a, b, [0.0; 2], [0.0; 2]);
            let expected = (a[0] - b[0]).hypot(a[1] - b[1]);
            prop_assert!((relative_distance(&s) - expected).abs() <= 1e-9 * expected.max(1.0));
        }

        #[test]
        fn gttc_positive_when_defined(
            p in prop::array::uniform4(-50.0..50.0f64),
            v in prop::array::uniform4(-30.0..30.0f64),
        ) {
            let s = state([p[0], p[1]], [p[2], p[3]], [v[0], v[1]], [v[2], v[3]]);
            prop_assume!(relative_distance(&s) > 1e-6);
            if let Some(g) = gttc(&s).unwrap() {
                prop_assert!(g > 0.0);
            }
        }
    }
}
