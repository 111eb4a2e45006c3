//! Lane-dodging field shared by `DodgeSurvival` and `DodgeForager`.
//!
//! `lanes` columns wrap around (lane 0 and lane `lanes-1` are adjacent).
//! Projectiles appear in row 0 and fall one row per step; the agent sits in
//! the bottom row. At most one projectile occupies a row, so at least
//! `lanes - 2` of the three cells the agent can reach are always free and a
//! dodge always exists. Tokens fall the same way in separate rows of their
//! own and never share a cell with a projectile.
//!
//! Step order: agent moves, rows fall, new row 0 is drawn (projectile coin,
//! projectile lane, then token coin and token lane when tokens are enabled),
//! then the bottom row is checked for a collision or a collected token.
//!
//! Actions: `0` stay, `1` left, `2` right.
//!
//! Observation (agent-centred): normalized lane, then `rows × lanes`
//! projectile occupancy with the agent's lane in the middle column, then the
//! same window for tokens (only when tokens are enabled), then energy
//! fraction (only with a metabolism).

use serde::{Deserialize, Serialize};

use super::{BaseStep, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::Action;
use crate::rng::RngStream;

pub const STAY: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DodgeParams {
    pub lanes: usize,
    pub rows: usize,
    pub spawn_prob: f64,
    pub token_prob: f64,
}

impl DodgeParams {
    pub const DEFAULT_TOKEN_PROB: f64 = 0.1;

    pub(crate) fn defaults(token_prob: f64) -> Vec<(&'static str, f64)> {
        vec![
            ("lanes", 7.0),
            ("rows", 5.0),
            ("spawn_prob", 0.5),
            ("token_prob", token_prob),
        ]
    }

    pub(crate) fn from_spec(spec: &EnvSpec) -> Result<Self> {
        let p = Self {
            lanes: count(spec, "lanes", 3)?,
            rows: count(spec, "rows", 2)?,
            spawn_prob: prob(spec, "spawn_prob")?,
            token_prob: prob(spec, "token_prob")?,
        };
        if p.lanes > u8::MAX as usize {
            return Err(Error::config("env.lanes", "at most 255"));
        }
        Ok(p)
    }

    pub fn tokens_enabled(&self) -> bool {
        self.token_prob > 0.0
    }

    pub(crate) fn n_inputs(&self, metabolism: bool) -> usize {
        let window = self.rows * self.lanes;
        1 + window + if self.tokens_enabled() { window } else { 0 } + usize::from(metabolism)
    }
}

pub(super) fn count(spec: &EnvSpec, key: &str, min: usize) -> Result<usize> {
    let v = spec.param(key);
    if v.fract() != 0.0 || v < min as f64 || !v.is_finite() {
        return Err(Error::config(
            format!("env.{key}"),
            format!("must be an integer >= {min}"),
        ));
    }
    Ok(v as usize)
}

pub(super) fn prob(spec: &EnvSpec, key: &str) -> Result<f64> {
    let v = spec.param(key);
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::config(format!("env.{key}"), "must lie in [0, 1]"));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DodgeState {
    params: DodgeParams,
    agent: usize,
    /// Lane of the projectile in each row, row 0 at the top.
    projectiles: Vec<Option<u8>>,
    tokens: Vec<Option<u8>>,
}

impl DodgeState {
    pub(crate) fn reset(params: DodgeParams, _rng: &mut RngStream) -> Self {
        Self {
            params,
            agent: params.lanes / 2,
            projectiles: vec![None; params.rows],
            tokens: vec![None; params.rows],
        }
    }

    pub fn params(&self) -> &DodgeParams {
        &self.params
    }

    pub fn agent_lane(&self) -> usize {
        self.agent
    }

    pub fn projectiles(&self) -> &[Option<u8>] {
        &self.projectiles
    }

    pub fn tokens(&self) -> &[Option<u8>] {
        &self.tokens
    }

    /// Lane the agent ends up in after `action`.
    pub fn lane_after(&self, action: usize) -> usize {
        let w = self.params.lanes;
        match action {
            LEFT => (self.agent + w - 1) % w,
            RIGHT => (self.agent + 1) % w,
            _ => self.agent,
        }
    }

    /// Whether the projectile about to land would hit the agent in `lane`.
    pub fn lane_threatened(&self, lane: usize) -> bool {
        self.projectiles[self.params.rows - 2] == Some(lane as u8)
    }

    #[cfg(test)]
    pub(crate) fn place_projectile(&mut self, row: usize, lane: usize) {
        self.projectiles[row] = Some(lane as u8);
    }

    pub(crate) fn step(&mut self, action: &Action, rng: &mut RngStream) -> BaseStep {
        let a = match action {
            Action::Discrete(i) => *i,
            Action::Continuous(_) => unreachable!("checked by env_step"),
        };
        self.agent = self.lane_after(a);

        let w = self.params.lanes;
        self.projectiles.rotate_right(1);
        self.projectiles[0] = None;
        self.tokens.rotate_right(1);
        self.tokens[0] = None;

        if rng.uniform() < self.params.spawn_prob {
            self.projectiles[0] = Some(rng.below(w) as u8);
        }
        if self.params.tokens_enabled() && rng.uniform() < self.params.token_prob {
            let lane = match self.projectiles[0] {
                Some(taken) => {
                    let l = rng.below(w - 1) as u8;
                    if l >= taken {
                        l + 1
                    } else {
                        l
                    }
                }
                None => rng.below(w) as u8,
            };
            self.tokens[0] = Some(lane);
        }

        let bottom = self.params.rows - 1;
        let here = Some(self.agent as u8);
        let died = self.projectiles[bottom] == here;
        let foraged = self.tokens[bottom] == here;
        if foraged {
            self.tokens[bottom] = None;
        }
        BaseStep {
            died,
            foraged,
            extra_cost: 0.0,
        }
    }

    pub(crate) fn observe(&self, energy: Option<f64>) -> Vec<f64> {
        let (w, h) = (self.params.lanes, self.params.rows);
        let mut obs = Vec::with_capacity(self.params.n_inputs(energy.is_some()));
        obs.push(if w > 1 { self.agent as f64 / (w - 1) as f64 } else { 0.0 });
        self.push_window(&self.projectiles, &mut obs);
        if self.params.tokens_enabled() {
            self.push_window(&self.tokens, &mut obs);
        }
        if let Some(e) = energy {
            obs.push(e);
        }
        debug_assert_eq!(obs.len(), 1 + h * w * (1 + usize::from(self.params.tokens_enabled())) + usize::from(energy.is_some()));
        obs
    }

    fn push_window(&self, rows: &[Option<u8>], obs: &mut Vec<f64>) {
        let w = self.params.lanes;
        let start = obs.len();
        obs.resize(start + rows.len() * w, 0.0);
        for (r, cell) in rows.iter().enumerate() {
            if let Some(lane) = cell {
                // column of `lane` in a window whose middle column is the agent
                let col = (*lane as usize + w + w / 2 - self.agent) % w;
                obs[start + r * w + col] = 1.0;
            }
        }
    }
}
