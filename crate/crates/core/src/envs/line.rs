//! Point forager on the segment `[-1, 1]`.
//!
//! The single continuous output is a velocity, clipped to `±v_max` here (the
//! policy never clips). Reaching within `goal_radius` of the goal counts as
//! a forage event and the goal is immediately redrawn uniformly. Moving
//! costs `move_cost * |velocity|` energy on top of the base depletion.
//!
//! Observation: position, goal, energy / initial energy.

use serde::{Deserialize, Serialize};

use super::{BaseStep, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::Action;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub v_max: f64,
    pub goal_radius: f64,
    pub move_cost: f64,
}

impl LineParams {
    pub(crate) const N_INPUTS: usize = 3;

    pub(crate) fn defaults() -> Vec<(&'static str, f64)> {
        vec![("v_max", 0.1), ("goal_radius", 0.05), ("move_cost", 0.0)]
    }

    pub(crate) fn from_spec(spec: &EnvSpec) -> Result<Self> {
        let p = Self {
            v_max: spec.param("v_max"),
            goal_radius: spec.param("goal_radius"),
            move_cost: spec.param("move_cost"),
        };
        if !(p.v_max > 0.0 && p.v_max <= 2.0) {
            return Err(Error::config("env.v_max", "must lie in (0, 2]"));
        }
        if !(p.goal_radius > 0.0 && p.goal_radius < 1.0) {
            return Err(Error::config("env.goal_radius", "must lie in (0, 1)"));
        }
        if !(p.move_cost >= 0.0 && p.move_cost.is_finite()) {
            return Err(Error::config("env.move_cost", "must be finite and >= 0"));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineState {
    params: LineParams,
    pub position: f64,
    pub goal: f64,
}

impl LineState {
    pub(crate) fn reset(params: LineParams, rng: &mut RngStream) -> Self {
        Self {
            params,
            position: 0.0,
            goal: draw_goal(rng),
        }
    }

    pub fn params(&self) -> &LineParams {
        &self.params
    }

    pub(crate) fn step(&mut self, action: &Action, rng: &mut RngStream) -> BaseStep {
        let raw = match action {
            Action::Continuous(v) => v[0],
            Action::Discrete(_) => unreachable!("checked by env_step"),
        };
        let v = if raw.is_nan() {
            0.0
        } else {
            raw.clamp(-self.params.v_max, self.params.v_max)
        };
        self.position = (self.position + v).clamp(-1.0, 1.0);
        let foraged = (self.position - self.goal).abs() < self.params.goal_radius;
        if foraged {
            self.goal = draw_goal(rng);
        }
        BaseStep {
            died: false,
            foraged,
            extra_cost: self.params.move_cost * v.abs(),
        }
    }

    pub(crate) fn observe(&self, energy_fraction: f64) -> Vec<f64> {
        vec![self.position, self.goal, energy_fraction]
    }
}

fn draw_goal(rng: &mut RngStream) -> f64 {
    2.0 * rng.uniform() - 1.0
}
