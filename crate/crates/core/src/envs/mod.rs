//! Reward-free environments.
//!
//! An episode reports only an observation, whether the organism died this
//! step, and whether it fulfilled a metabolic goal. There is no reward
//! channel. Every built-in environment shares the same episode wrapper
//! ([`EnvState`]) which owns the step counter, the optional time cap and the
//! optional [`Metabolism`]; the per-environment dynamics live in submodules.

pub mod dodge;
mod line;
mod metabolism;
pub mod rally;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use self::dodge::{DodgeParams, DodgeState};
pub use self::line::{LineParams, LineState};
pub use self::metabolism::{apply_metabolism, Metabolism};
pub use self::rally::{RallyParams, RallyState};

use crate::error::{Error, Result};
use crate::genome::{ActionMode, PolicySpec, DEFAULT_HIDDEN};
use crate::policy::Action;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    DodgeSurvival,
    RallySurvival,
    LineForager,
    DodgeForager,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [
        EnvId::DodgeSurvival,
        EnvId::RallySurvival,
        EnvId::LineForager,
        EnvId::DodgeForager,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvId::DodgeSurvival => "dodge_survival",
            EnvId::RallySurvival => "rally_survival",
            EnvId::LineForager => "line_forager",
            EnvId::DodgeForager => "dodge_forager",
        }
    }

    fn default_time_cap(self) -> Option<u64> {
        match self {
            EnvId::RallySurvival => None,
            _ => Some(2000),
        }
    }

    /// Known parameter keys and their defaults.
    fn param_defaults(self) -> Vec<(&'static str, f64)> {
        let metabolism = Metabolism::default();
        let metabolic = [
            ("initial_energy", metabolism.initial_energy),
            ("depletion", metabolism.depletion),
            ("replenish", metabolism.replenish),
            ("energy_cap", metabolism.energy_cap),
        ];
        match self {
            EnvId::DodgeSurvival => DodgeParams::defaults(0.0),
            EnvId::DodgeForager => {
                let mut v = DodgeParams::defaults(DodgeParams::DEFAULT_TOKEN_PROB);
                v.extend(metabolic);
                v
            }
            EnvId::RallySurvival => RallyParams::defaults(),
            EnvId::LineForager => {
                let mut v = LineParams::defaults();
                v.extend(metabolic);
                v
            }
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::config("env", format!("unknown environment `{s}`")))
    }
}

/// Full description of an environment: identity, interface, cap and
/// resolved parameters (defaults filled in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub env_id: EnvId,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub action_mode: ActionMode,
    pub time_cap: Option<u64>,
    pub env_params: BTreeMap<String, f64>,
}

impl EnvSpec {
    /// Default configuration of a built-in environment.
    pub fn new(env_id: EnvId) -> Self {
        Self::with_params(env_id, env_id.default_time_cap(), &BTreeMap::new())
            .expect("built-in defaults are valid")
    }

    /// Builds a spec from explicit overrides. Keys not known to `env_id` are
    /// rejected.
    pub fn with_params(
        env_id: EnvId,
        time_cap: Option<u64>,
        overrides: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let mut params: BTreeMap<String, f64> = env_id
            .param_defaults()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        for (k, v) in overrides {
            match params.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(Error::config(
                        format!("env.{k}"),
                        format!("unknown parameter for {env_id}"),
                    ))
                }
            }
        }
        if time_cap == Some(0) {
            return Err(Error::config("env.time_cap", "must be at least 1"));
        }
        let mut spec = Self {
            env_id,
            n_inputs: 0,
            n_outputs: 0,
            action_mode: ActionMode::Discrete,
            time_cap,
            env_params: params,
        };
        let (n_inputs, n_outputs, action_mode) = match spec.dynamics()? {
            Dynamics::Dodge(p) => (p.n_inputs(spec.has_metabolism()), 3, ActionMode::Discrete),
            Dynamics::Rally(_) => (RallyParams::N_INPUTS, 3, ActionMode::Discrete),
            Dynamics::Line(_) => (LineParams::N_INPUTS, 1, ActionMode::Continuous),
        };
        spec.n_inputs = n_inputs;
        spec.n_outputs = n_outputs;
        spec.action_mode = action_mode;
        spec.metabolism()?;
        Ok(spec)
    }

    /// Re-derives the interface from `env_id` and `env_params` and checks it
    /// matches the declared one.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Self::with_params(self.env_id, self.time_cap, &self.env_params)?;
        if rebuilt != *self {
            return Err(Error::config(
                "env",
                format!("declared interface does not match {}", self.env_id),
            ));
        }
        Ok(())
    }

    pub fn param(&self, key: &str) -> f64 {
        self.env_params[key]
    }

    fn has_metabolism(&self) -> bool {
        matches!(self.env_id, EnvId::LineForager | EnvId::DodgeForager)
    }

    pub fn metabolism(&self) -> Result<Option<Metabolism>> {
        if !self.has_metabolism() {
            return Ok(None);
        }
        let m = Metabolism::new(
            self.param("initial_energy"),
            self.param("depletion"),
            self.param("replenish"),
            self.param("energy_cap"),
        );
        m.validate()?;
        Ok(Some(m))
    }

    /// Whether the dynamics can ever report `foraged = true`.
    pub fn has_forage_trigger(&self) -> bool {
        match self.env_id {
            EnvId::DodgeSurvival | EnvId::DodgeForager => self.param("token_prob") > 0.0,
            EnvId::LineForager => true,
            EnvId::RallySurvival => false,
        }
    }

    /// Policy shape matching this environment's interface.
    pub fn policy_spec(&self, n_hidden: usize) -> Result<PolicySpec> {
        PolicySpec::new(self.n_inputs, n_hidden, self.n_outputs, self.action_mode)
    }

    pub fn default_policy_spec(&self) -> PolicySpec {
        self.policy_spec(DEFAULT_HIDDEN).expect("environment dims are positive")
    }

    /// Checks that `policy` can drive this environment.
    pub fn check_policy(&self, policy: &PolicySpec) -> Result<()> {
        if policy.n_inputs != self.n_inputs {
            return Err(Error::config(
                "policy.n_inputs",
                format!("{} does not match {} ({})", policy.n_inputs, self.env_id, self.n_inputs),
            ));
        }
        if policy.n_outputs != self.n_outputs {
            return Err(Error::config(
                "policy.n_outputs",
                format!("{} does not match {} ({})", policy.n_outputs, self.env_id, self.n_outputs),
            ));
        }
        if policy.action_mode != self.action_mode {
            return Err(Error::config("policy.action_mode", "does not match environment"));
        }
        Ok(())
    }

    fn dynamics(&self) -> Result<Dynamics> {
        Ok(match self.env_id {
            EnvId::DodgeSurvival | EnvId::DodgeForager => {
                Dynamics::Dodge(DodgeParams::from_spec(self)?)
            }
            EnvId::RallySurvival => Dynamics::Rally(RallyParams::from_spec(self)?),
            EnvId::LineForager => Dynamics::Line(LineParams::from_spec(self)?),
        })
    }
}

/// Wraps a base environment that has both a death-state and a forage trigger
/// with a metabolism, giving a survival-forager.
pub fn make_survival_forager(base: &EnvSpec, m: Metabolism) -> Result<EnvSpec> {
    m.validate()?;
    if base.env_id != EnvId::DodgeSurvival {
        return Err(Error::config(
            "env",
            format!("{} cannot be wrapped as a survival-forager", base.env_id),
        ));
    }
    if !base.has_forage_trigger() {
        return Err(Error::config(
            "env.token_prob",
            "base environment has no forage trigger",
        ));
    }
    let mut params = base.env_params.clone();
    params.insert("initial_energy".into(), m.initial_energy);
    params.insert("depletion".into(), m.depletion);
    params.insert("replenish".into(), m.replenish);
    params.insert("energy_cap".into(), m.energy_cap);
    EnvSpec::with_params(EnvId::DodgeForager, base.time_cap, &params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathCause {
    EnvDeath,
    Starvation,
    TimerExpiry,
}

impl DeathCause {
    pub fn name(self) -> &'static str {
        match self {
            DeathCause::EnvDeath => "env_death",
            DeathCause::Starvation => "starvation",
            DeathCause::TimerExpiry => "timer_expiry",
        }
    }
}

impl FromStr for DeathCause {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "env_death" => Ok(DeathCause::EnvDeath),
            "starvation" => Ok(DeathCause::Starvation),
            "timer_expiry" => Ok(DeathCause::TimerExpiry),
            other => Err(format!("unknown death cause `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub dead: bool,
    pub foraged: bool,
    pub cause: Option<DeathCause>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Dynamics {
    Dodge(DodgeParams),
    Rally(RallyParams),
    Line(LineParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Body {
    Dodge(DodgeState),
    Rally(RallyState),
    Line(LineState),
}

/// Outcome of the environment-specific part of a step.
pub(crate) struct BaseStep {
    pub died: bool,
    pub foraged: bool,
    pub extra_cost: f64,
}

/// One episode: private to a single organism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    body: Body,
    steps: u64,
    dead: bool,
    time_cap: Option<u64>,
    metabolism: Option<Metabolism>,
    n_outputs: usize,
}

impl EnvState {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_dead(&self) -> bool {
        self.dead
    }

    pub fn energy(&self) -> Option<f64> {
        self.metabolism.map(|m| m.energy)
    }

    pub fn metabolism(&self) -> Option<&Metabolism> {
        self.metabolism.as_ref()
    }

    pub fn observe(&self) -> Vec<f64> {
        let energy = self.metabolism.map(|m| m.energy / m.initial_energy);
        match &self.body {
            Body::Dodge(s) => s.observe(energy),
            Body::Rally(s) => s.observe(),
            Body::Line(s) => s.observe(energy.unwrap_or(1.0)),
        }
    }

    /// Environment-specific state, for scripted policies and tests.
    pub fn dodge(&self) -> Option<&DodgeState> {
        match &self.body {
            Body::Dodge(s) => Some(s),
            _ => None,
        }
    }

    pub fn rally(&self) -> Option<&RallyState> {
        match &self.body {
            Body::Rally(s) => Some(s),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<&LineState> {
        match &self.body {
            Body::Line(s) => Some(s),
            _ => None,
        }
    }

    #[cfg(test)]
    pub(crate) fn dodge_mut(&mut self) -> Option<&mut DodgeState> {
        match &mut self.body {
            Body::Dodge(s) => Some(s),
            _ => None,
        }
    }
}

/// Starts a fresh episode.
pub fn env_reset(spec: &EnvSpec, rng: &mut RngStream) -> Result<(EnvState, Vec<f64>)> {
    let body = match spec.dynamics()? {
        Dynamics::Dodge(p) => Body::Dodge(DodgeState::reset(p, rng)),
        Dynamics::Rally(p) => Body::Rally(RallyState::reset(p, rng)),
        Dynamics::Line(p) => Body::Line(LineState::reset(p, rng)),
    };
    let state = EnvState {
        body,
        steps: 0,
        dead: false,
        time_cap: spec.time_cap,
        metabolism: spec.metabolism()?,
        n_outputs: spec.n_outputs,
    };
    let obs = state.observe();
    Ok((state, obs))
}

/// Advances the episode by one timestep.
///
/// Cause precedence when several conditions fire on the same step:
/// environment death, then starvation, then timer expiry.
pub fn env_step(state: &mut EnvState, action: &Action, rng: &mut RngStream) -> Result<StepResult> {
    if state.dead {
        return Err(Error::Contract("step on a dead episode; reset first".into()));
    }
    match (&state.body, action) {
        (Body::Dodge(_) | Body::Rally(_), Action::Discrete(i)) if *i < state.n_outputs => {}
        (Body::Line(_), Action::Continuous(v)) if v.len() == state.n_outputs => {}
        _ => {
            return Err(Error::Contract(format!(
                "action {action:?} does not fit this environment"
            )))
        }
    }
    let base = match &mut state.body {
        Body::Dodge(s) => s.step(action, rng),
        Body::Rally(s) => s.step(action, rng),
        Body::Line(s) => s.step(action, rng),
    };
    state.steps += 1;

    let mut starved = false;
    if let Some(m) = state.metabolism {
        let (next, died) = m.apply_with_cost(base.foraged, base.extra_cost);
        state.metabolism = Some(next);
        starved = died;
    }
    let expired = state.time_cap.is_some_and(|cap| state.steps >= cap);
    let cause = if base.died {
        Some(DeathCause::EnvDeath)
    } else if starved {
        Some(DeathCause::Starvation)
    } else if expired {
        Some(DeathCause::TimerExpiry)
    } else {
        None
    };
    state.dead = cause.is_some();
    Ok(StepResult {
        obs: state.observe(),
        dead: state.dead,
        foraged: base.foraged,
        cause,
    })
}

/// One row of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: u64,
    pub org_id: u64,
    pub action: String,
    pub dead: bool,
    pub foraged: bool,
    /// Energy after the step; empty for environments without a metabolism.
    pub energy: Option<f64>,
}

pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
