//! Driving a single episode with either a genome or a scripted controller.

use crate::envs::{env_reset, env_step, DeathCause, EnvSpec, EnvState, TraceRow};
use crate::error::Result;
use crate::genome::{Genome, PolicySpec};
use crate::policy::{forward_in_place, reset_hidden, select_action, Action, HiddenState};
use crate::rng::RngStream;

/// A genome bound to its network shape plus the recurrent state of one life.
#[derive(Debug, Clone)]
pub struct Controller<'g> {
    genome: &'g Genome,
    spec: PolicySpec,
    hidden: HiddenState,
    scratch: Vec<f64>,
    outputs: Vec<f64>,
}

impl<'g> Controller<'g> {
    pub fn new(genome: &'g Genome, spec: PolicySpec) -> Self {
        Self {
            genome,
            spec,
            hidden: reset_hidden(&spec),
            scratch: Vec::with_capacity(spec.n_hidden),
            outputs: Vec::with_capacity(spec.n_outputs),
        }
    }

    pub fn act(&mut self, obs: &[f64]) -> Action {
        forward_in_place(self.genome, &self.spec, obs, &mut self.hidden, &mut self.scratch, &mut self.outputs);
        select_action(&self.outputs, self.spec.action_mode).expect("n_outputs >= 1")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    /// Steps taken, including the fatal one.
    pub lifespan: u64,
    /// `None` when the episode was cut off by `max_steps` while alive.
    pub cause: Option<DeathCause>,
}

/// Runs one episode from reset until death or `max_steps`. The controller
/// sees the episode state as well as the observation so scripted policies
/// can read ground truth.
pub fn run_episode<P>(
    spec: &EnvSpec,
    rng: &mut RngStream,
    max_steps: Option<u64>,
    mut policy: P,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<EpisodeOutcome>
where
    P: FnMut(&EnvState, &[f64]) -> Action,
{
    let (mut state, mut obs) = env_reset(spec, rng)?;
    loop {
        if max_steps.is_some_and(|m| state.steps() >= m) {
            return Ok(EpisodeOutcome {
                lifespan: state.steps(),
                cause: None,
            });
        }
        let action = policy(&state, &obs);
        let result = env_step(&mut state, &action, rng)?;
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TraceRow {
                tick: state.steps() - 1,
                org_id: 0,
                action: action.label(),
                dead: result.dead,
                foraged: result.foraged,
                energy: state.energy(),
            });
        }
        if result.dead {
            return Ok(EpisodeOutcome {
                lifespan: state.steps(),
                cause: result.cause,
            });
        }
        obs = result.obs;
    }
}

/// Runs `genome` for one episode with a fresh hidden state.
pub fn run_genome_episode(
    genome: &Genome,
    policy_spec: &PolicySpec,
    env_spec: &EnvSpec,
    rng: &mut RngStream,
    max_steps: Option<u64>,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<EpisodeOutcome> {
    env_spec.check_policy(policy_spec)?;
    let mut ctl = Controller::new(genome, *policy_spec);
    run_episode(env_spec, rng, max_steps, |_, obs| ctl.act(obs), trace)
}
