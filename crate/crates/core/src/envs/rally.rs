//! Two-paddle rally in the unit square.
//!
//! The organism's paddle slides along the left wall (`x = 0`), a scripted
//! opponent along the right wall. The ball reflects off the top and bottom.
//! The episode ends only when the ball gets past the organism's paddle; when
//! it gets past the opponent it is served again from a random point in the
//! middle of the box toward the organism at the starting speed. Every
//! return by the organism multiplies the ball speed by `speedup` (up to
//! `max_speed`), so rallies get harder the longer they last. The opponent chases the ball only while it
//! approaches and sends it back at a uniformly random vertical speed.
//!
//! Actions: `0` stay, `1` up, `2` down.
//!
//! Observation: ball x, ball y, ball vx and vy relative to the starting
//! speed, paddle y, opponent y. Positions are mapped to `[-1, 1]`.

use serde::{Deserialize, Serialize};

use super::{BaseStep, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::Action;
use crate::rng::RngStream;

pub const STAY: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RallyParams {
    pub ball_speed: f64,
    pub vy_max: f64,
    pub paddle_half: f64,
    pub paddle_speed: f64,
    pub opponent_half: f64,
    pub opponent_speed: f64,
    pub english: f64,
    pub speedup: f64,
    pub max_speed: f64,
}

impl RallyParams {
    pub(crate) const N_INPUTS: usize = 6;

    pub(crate) fn defaults() -> Vec<(&'static str, f64)> {
        vec![
            ("ball_speed", 0.03),
            ("vy_max", 0.03),
            ("paddle_half", 0.2),
            ("paddle_speed", 0.04),
            ("opponent_half", 0.1),
            ("opponent_speed", 0.02),
            ("english", 0.02),
            ("speedup", 1.1),
            ("max_speed", 0.2),
        ]
    }

    pub(crate) fn from_spec(spec: &EnvSpec) -> Result<Self> {
        let p = Self {
            ball_speed: spec.param("ball_speed"),
            vy_max: spec.param("vy_max"),
            paddle_half: spec.param("paddle_half"),
            paddle_speed: spec.param("paddle_speed"),
            opponent_half: spec.param("opponent_half"),
            opponent_speed: spec.param("opponent_speed"),
            english: spec.param("english"),
            speedup: spec.param("speedup"),
            max_speed: spec.param("max_speed"),
        };
        for (k, v) in [
            ("ball_speed", p.ball_speed),
            ("vy_max", p.vy_max),
            ("paddle_half", p.paddle_half),
            ("paddle_speed", p.paddle_speed),
            ("opponent_half", p.opponent_half),
            ("opponent_speed", p.opponent_speed),
            ("max_speed", p.max_speed),
        ] {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::config(format!("env.{k}"), "must lie in (0, 0.5)"));
            }
        }
        if !(p.english >= 0.0 && p.english.is_finite()) {
            return Err(Error::config("env.english", "must be finite and >= 0"));
        }
        if !(p.speedup >= 1.0 && p.speedup.is_finite()) {
            return Err(Error::config("env.speedup", "must be finite and >= 1"));
        }
        if p.max_speed < p.ball_speed {
            return Err(Error::config("env.max_speed", "must be >= ball_speed"));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RallyState {
    params: RallyParams,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub paddle: f64,
    pub opponent: f64,
    /// Number of returns by the organism since the last serve.
    pub returns: u32,
}

impl RallyState {
    pub(crate) fn reset(params: RallyParams, rng: &mut RngStream) -> Self {
        let mut s = Self {
            params,
            x: 0.5,
            y: 0.5,
            vx: 0.0,
            vy: 0.0,
            paddle: 0.5,
            opponent: 0.5,
            returns: 0,
        };
        s.serve(rng);
        s
    }

    pub fn params(&self) -> &RallyParams {
        &self.params
    }

    /// Horizontal speed after `returns` returns.
    pub fn speed(&self) -> f64 {
        let p = &self.params;
        (p.ball_speed * p.speedup.powi(self.returns as i32)).min(p.max_speed)
    }

    fn vy_limit(&self) -> f64 {
        self.params.vy_max * self.speed() / self.params.ball_speed
    }

    // draws: serve distance, height, then vertical speed
    fn serve(&mut self, rng: &mut RngStream) {
        let p = self.params;
        self.returns = 0;
        self.x = 0.3 + 0.4 * rng.uniform();
        self.y = 0.3 + 0.4 * rng.uniform();
        self.vx = -p.ball_speed;
        self.vy = p.vy_max * (rng.uniform() - 0.5);
    }

    pub(crate) fn step(&mut self, action: &Action, rng: &mut RngStream) -> BaseStep {
        let p = self.params;
        let a = match action {
            Action::Discrete(i) => *i,
            Action::Continuous(_) => unreachable!("checked by env_step"),
        };
        let dy = match a {
            UP => p.paddle_speed,
            DOWN => -p.paddle_speed,
            _ => 0.0,
        };
        self.paddle = (self.paddle + dy).clamp(p.paddle_half, 1.0 - p.paddle_half);

        let target = if self.vx > 0.0 { self.y } else { 0.5 };
        self.opponent = (self.opponent + (target - self.opponent).clamp(-p.opponent_speed, p.opponent_speed))
            .clamp(p.opponent_half, 1.0 - p.opponent_half);

        self.x += self.vx;
        self.y += self.vy;
        if self.y < 0.0 {
            self.y = -self.y;
            self.vy = -self.vy;
        } else if self.y > 1.0 {
            self.y = 2.0 - self.y;
            self.vy = -self.vy;
        }

        let mut died = false;
        if self.x <= 0.0 {
            let offset = self.y - self.paddle;
            if offset.abs() <= p.paddle_half {
                self.returns = self.returns.saturating_add(1);
                let limit = self.vy_limit();
                self.x = -self.x;
                self.vx = self.speed();
                self.vy = (self.vy + p.english * offset / p.paddle_half).clamp(-limit, limit);
            } else {
                died = true;
            }
        } else if self.x >= 1.0 {
            if (self.y - self.opponent).abs() <= p.opponent_half {
                self.x = 2.0 - self.x;
                self.vx = -self.speed();
                self.vy = self.vy_limit() * (2.0 * rng.uniform() - 1.0);
            } else {
                self.serve(rng);
            }
        }
        BaseStep {
            died,
            foraged: false,
            extra_cost: 0.0,
        }
    }

    pub(crate) fn observe(&self) -> Vec<f64> {
        let p = &self.params;
        vec![
            2.0 * self.x - 1.0,
            2.0 * self.y - 1.0,
            self.vx / p.ball_speed,
            self.vy / p.vy_max,
            2.0 * self.paddle - 1.0,
            2.0 * self.opponent - 1.0,
        ]
    }
}
