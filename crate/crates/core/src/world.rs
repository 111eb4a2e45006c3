//! The grid of self-replicating organisms.
//!
//! One [`World::tick`] is one pass of the replication loop:
//!
//! 1. if the grid is empty, a fresh random organism is placed in a uniformly
//!    random slot;
//! 2. the slots occupied at this point are listed in ascending order and
//!    shuffled;
//! 3. each listed organism, in that order, takes one step in its own
//!    episode, then flips the reproduction coin; on success a mutated copy
//!    goes into a uniformly chosen free neighbour (nothing happens if there
//!    is none); finally, if the step was fatal, the organism is removed;
//! 4. the tick counter advances.
//!
//! Children never act in the tick they are born in. RNG draws within a tick
//! happen in exactly this order: reseed slot, reseed genome, reseed episode
//! reset; shuffle; then per organism: environment step, reproduction coin,
//! neighbour choice, child mutation, child episode reset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{env_reset, env_step, DeathCause, EnvSpec, EnvState, TraceRow};
use crate::error::{Error, Result};
use crate::genome::{mutate, new_random_genome, Genome, MutationConfig, PolicySpec, DEFAULT_INIT_SCALE};
use crate::policy::{forward_in_place, reset_hidden, select_action, HiddenState};
use crate::rng::{RngState, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Slot 0 and slot `n-1` are neighbours.
    #[default]
    Ring,
    /// Edge slots have a single neighbour.
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub grid_dim: usize,
    pub reproductive_prob: f64,
    pub mutation: MutationConfig,
    pub topology: Topology,
    /// Std-dev of weights for organisms created from scratch.
    pub init_scale: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            grid_dim: 32,
            reproductive_prob: 0.5,
            mutation: MutationConfig::default(),
            topology: Topology::Ring,
            init_scale: DEFAULT_INIT_SCALE,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_dim < 2 {
            return Err(Error::config("world.grid_dim", "must be at least 2"));
        }
        if !(self.reproductive_prob > 0.0 && self.reproductive_prob <= 1.0) {
            return Err(Error::config("world.reproductive_prob", "must lie in (0, 1]"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("world.init_scale", "must be finite and >= 0"));
        }
        self.mutation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Organism {
    pub org_id: u64,
    pub parent_id: Option<u64>,
    pub birth_tick: u64,
    pub genome: Genome,
    pub hidden: HiddenState,
    pub episode: EnvState,
    /// Latest observation from `episode`, the input for the next action.
    pub obs: Vec<f64>,
    /// Timesteps survived so far.
    pub age: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Birth,
    Death,
    Reseed,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Birth => "birth",
            EventKind::Death => "death",
            EventKind::Reseed => "reseed",
        }
    }
}

/// A birth, reseed or death. Births carry `parent_id`; deaths carry
/// `lifespan` (the organism's age when it died) and `cause`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
    pub org_id: u64,
    pub parent_id: Option<u64>,
    pub slot: usize,
    pub lifespan: Option<u64>,
    pub cause: Option<DeathCause>,
}

/// Empty slots adjacent to `idx`, lower offset first. On a ring of two the
/// single neighbour is reported once.
pub fn free_neighbors<T>(slots: &[Option<T>], idx: usize, topology: Topology) -> Vec<usize> {
    let n = slots.len();
    let mut out = Vec::with_capacity(2);
    let (left, right) = match topology {
        Topology::Ring => (Some((idx + n - 1) % n), Some((idx + 1) % n)),
        Topology::Bounded => (idx.checked_sub(1), (idx + 1 < n).then_some(idx + 1)),
    };
    for cand in [left, right].into_iter().flatten() {
        if cand != idx && slots[cand].is_none() && !out.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

pub struct World {
    cfg: WorldConfig,
    env_spec: EnvSpec,
    policy_spec: PolicySpec,
    slots: Vec<Option<Organism>>,
    tick: u64,
    next_id: u64,
    rng: RngStream,
    trace: Option<Vec<TraceRow>>,
    scratch: Vec<f64>,
    outputs: Vec<f64>,
    order: Vec<(usize, u64)>,
}

impl World {
    pub fn new(cfg: WorldConfig, env_spec: EnvSpec, policy_spec: PolicySpec, seed: u64) -> Result<Self> {
        cfg.validate()?;
        env_spec.validate()?;
        policy_spec.validate()?;
        env_spec.check_policy(&policy_spec)?;
        Ok(Self {
            slots: (0..cfg.grid_dim).map(|_| None).collect(),
            cfg,
            env_spec,
            policy_spec,
            tick: 0,
            next_id: 0,
            rng: RngStream::new(seed),
            trace: None,
            scratch: Vec::new(),
            outputs: Vec::new(),
            order: Vec::new(),
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn env_spec(&self) -> &EnvSpec {
        &self.env_spec
    }

    pub fn policy_spec(&self) -> &PolicySpec {
        &self.policy_spec
    }

    /// Index of the next tick to run.
    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn slots(&self) -> &[Option<Organism>] {
        &self.slots
    }

    pub fn population(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Start recording one trace row per organism step.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceRow> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn spawn(&mut self, genome: Genome, parent_id: Option<u64>) -> Result<Organism> {
        let (episode, obs) = env_reset(&self.env_spec, &mut self.rng)?;
        let org = Organism {
            org_id: self.next_id,
            parent_id,
            birth_tick: self.tick,
            genome,
            hidden: reset_hidden(&self.policy_spec),
            episode,
            obs,
            age: 0,
        };
        self.next_id += 1;
        Ok(org)
    }

    /// Runs one tick and returns its events in the order they happened.
    pub fn tick(&mut self) -> Result<Vec<Event>> {
        let mut events = Vec::new();
        let tick = self.tick;

        if self.slots.iter().all(Option::is_none) {
            let slot = self.rng.below(self.slots.len());
            let genome = new_random_genome(&self.policy_spec, self.cfg.init_scale, &mut self.rng);
            let org = self.spawn(genome, None)?;
            events.push(Event {
                tick,
                kind: EventKind::Reseed,
                org_id: org.org_id,
                parent_id: None,
                slot,
                lifespan: None,
                cause: None,
            });
            self.slots[slot] = Some(org);
        }

        let mut order = std::mem::take(&mut self.order);
        order.clear();
        order.extend(
            self.slots
                .iter()
                .enumerate()
                .filter_map(|(i, s)| s.as_ref().map(|o| (i, o.org_id))),
        );
        self.rng.shuffle(&mut order);

        for &(slot, org_id) in &order {
            let (dead, cause) = {
                let org = match self.slots[slot].as_mut() {
                    Some(o) if o.org_id == org_id => o,
                    _ => continue,
                };
                forward_in_place(
                    &org.genome,
                    &self.policy_spec,
                    &org.obs,
                    &mut org.hidden,
                    &mut self.scratch,
                    &mut self.outputs,
                );
                let action = select_action(&self.outputs, self.policy_spec.action_mode)?;
                let result = env_step(&mut org.episode, &action, &mut self.rng)?;
                org.age += 1;
                if let Some(trace) = self.trace.as_mut() {
                    trace.push(TraceRow {
                        tick,
                        org_id,
                        action: action.label(),
                        dead: result.dead,
                        foraged: result.foraged,
                        energy: org.episode.energy(),
                    });
                }
                org.obs = result.obs;
                (result.dead, result.cause)
            };

            if self.rng.uniform() <= self.cfg.reproductive_prob {
                let free = free_neighbors(&self.slots, slot, self.cfg.topology);
                if !free.is_empty() {
                    let target = free[self.rng.below(free.len())];
                    let parent = self.slots[slot].as_ref().expect("parent present");
                    let genome = mutate(&parent.genome, &self.cfg.mutation, &mut self.rng);
                    let child = self.spawn(genome, Some(org_id))?;
                    events.push(Event {
                        tick,
                        kind: EventKind::Birth,
                        org_id: child.org_id,
                        parent_id: Some(org_id),
                        slot: target,
                        lifespan: None,
                        cause: None,
                    });
                    self.slots[target] = Some(child);
                }
            }

            if dead {
                let org = self.slots[slot].take().expect("organism present");
                events.push(Event {
                    tick,
                    kind: EventKind::Death,
                    org_id,
                    parent_id: None,
                    slot,
                    lifespan: Some(org.age),
                    cause,
                });
            }
        }
        self.order = order;
        self.tick += 1;
        Ok(events)
    }

    /// Runs `max_ticks` ticks and returns the concatenated event log.
    pub fn run(&mut self, max_ticks: u64) -> Result<Vec<Event>> {
        if max_ticks == 0 {
            return Err(Error::config("max_ticks", "must be at least 1"));
        }
        let mut log = Vec::new();
        for _ in 0..max_ticks {
            log.extend(self.tick()?);
        }
        Ok(log)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            format_version: Snapshot::FORMAT_VERSION,
            tick: self.tick,
            next_id: self.next_id,
            rng: self.rng.state(),
            world: self.cfg,
            env: self.env_spec.clone(),
            policy: self.policy_spec,
            slots: self.slots.clone(),
        }
    }

    pub fn from_snapshot(snap: Snapshot) -> Result<Self> {
        if snap.format_version != Snapshot::FORMAT_VERSION {
            return Err(Error::config(
                "snapshot.format_version",
                format!("unsupported version {}", snap.format_version),
            ));
        }
        let mut world = World::new(snap.world, snap.env, snap.policy, 0)?;
        if snap.slots.len() != world.slots.len() {
            return Err(Error::config("snapshot.slots", "length differs from grid_dim"));
        }
        world.slots = snap.slots;
        world.tick = snap.tick;
        world.next_id = snap.next_id;
        world.rng = RngStream::from_state(&snap.rng);
        Ok(world)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.snapshot()).map_err(|e| Error::parse(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let snap: Snapshot = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        Self::from_snapshot(snap)
    }
}

/// Resumable world state, stored as a single JSON object.
///
/// Version 1 layout: `format_version` (1), `tick` (next tick to run),
/// `next_id` (next organism id), `rng` (`seed` as 32 bytes, `stream`,
/// `word_pos` of the ChaCha8 generator), `world`, `env`, `policy` (the
/// configurations), and `slots`: one entry per grid slot, `null` when empty,
/// otherwise the organism record (`org_id`, `parent_id`, `birth_tick`,
/// `genome.weights`, `hidden.activations`, `episode`, `obs`, `age`).
/// Floats are written with shortest round-trip formatting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    pub tick: u64,
    pub next_id: u64,
    pub rng: RngState,
    pub world: WorldConfig,
    pub env: EnvSpec,
    pub policy: PolicySpec,
    pub slots: Vec<Option<Organism>>,
}

impl Snapshot {
    pub const FORMAT_VERSION: u32 = 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvId;
    use std::collections::BTreeMap;

    fn occupancy(n: usize, occupied: &[usize]) -> Vec<Option<()>> {
        (0..n).map(|i| occupied.contains(&i).then_some(())).collect()
    }

    /// Dodge field with nothing falling and no cap: nobody ever dies.
    fn immortal_env() -> EnvSpec {
        let mut p = BTreeMap::new();
        p.insert("spawn_prob".to_string(), 0.0);
        EnvSpec::with_params(EnvId::DodgeSurvival, None, &p).unwrap()
    }

    fn world(cfg: WorldConfig, env: EnvSpec, seed: u64) -> World {
        let policy = env.default_policy_spec();
        World::new(cfg, env, policy, seed).unwrap()
    }

    #[test]
    fn free_neighbors_cases() {
        assert_eq!(free_neighbors(&occupancy(8, &[3]), 3, Topology::Ring), vec![2, 4]);
        assert_eq!(free_neighbors(&occupancy(8, &[0]), 0, Topology::Ring), vec![7, 1]);
        assert_eq!(free_neighbors(&occupancy(8, &[0]), 0, Topology::Bounded), vec![1]);
        assert_eq!(free_neighbors(&occupancy(8, &[7]), 7, Topology::Bounded), vec![6]);
        let full: Vec<usize> = (0..8).collect();
        assert!(free_neighbors(&occupancy(8, &full), 4, Topology::Ring).is_empty());
        assert_eq!(free_neighbors(&occupancy(2, &[0]), 0, Topology::Ring), vec![1]);
        assert_eq!(free_neighbors(&occupancy(8, &[3, 4]), 3, Topology::Ring), vec![2]);
    }

    #[test]
    fn init_validation() {
        let env = EnvSpec::new(EnvId::DodgeSurvival);
        let w = world(WorldConfig::default(), env.clone(), 1);
        assert_eq!(w.slots().len(), 32);
        assert_eq!(w.population(), 0);
        assert_eq!(w.current_tick(), 0);

        let bad = WorldConfig {
            grid_dim: 1,
            ..Default::default()
        };
        assert!(World::new(bad, env.clone(), env.default_policy_spec(), 0).is_err());
        let bad = WorldConfig {
            reproductive_prob: 0.0,
            ..Default::default()
        };
        assert!(World::new(bad, env.clone(), env.default_policy_spec(), 0).is_err());

        let wrong_policy = EnvSpec::new(EnvId::RallySurvival).default_policy_spec();
        assert!(matches!(
            World::new(WorldConfig::default(), env, wrong_policy, 0),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn empty_grid_is_reseeded() {
        let mut w = world(WorldConfig::default(), EnvSpec::new(EnvId::DodgeSurvival), 3);
        let events = w.tick().unwrap();
        assert_eq!(events[0].kind, EventKind::Reseed);
        assert!(w.population() >= 1 || events.iter().any(|e| e.kind == EventKind::Death));
    }

    #[test]
    fn certain_reproduction_fills_eight_slots_in_four_ticks() {
        let cfg = WorldConfig {
            grid_dim: 8,
            reproductive_prob: 1.0,
            ..Default::default()
        };
        for seed in 0..10 {
            let mut w = world(cfg, immortal_env(), seed);
            let pops: Vec<usize> = (0..4)
                .map(|_| {
                    w.tick().unwrap();
                    w.population()
                })
                .collect();
            assert_eq!(pops, vec![2, 4, 6, 8]);
        }
    }

    #[test]
    fn dying_organism_still_reproduces_first() {
        // cap of one step: every organism dies the first time it acts
        let env = EnvSpec::with_params(EnvId::DodgeSurvival, Some(1), &BTreeMap::new()).unwrap();
        let cfg = WorldConfig {
            grid_dim: 4,
            reproductive_prob: 1.0,
            ..Default::default()
        };
        let mut w = world(cfg, env, 0);
        let events = w.tick().unwrap();
        let kinds: Vec<EventKind> = events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::Reseed, EventKind::Birth, EventKind::Death]);
        assert_eq!(events[2].lifespan, Some(1));
        assert_eq!(events[2].cause, Some(DeathCause::TimerExpiry));
        assert_eq!(w.population(), 1);
        assert!(w.slots()[events[0].slot].is_none());
    }

    #[test]
    fn zero_scale_children_are_exact_copies() {
        let cfg = WorldConfig {
            grid_dim: 6,
            reproductive_prob: 1.0,
            mutation: MutationConfig {
                scale: 0.0,
                per_weight_prob: 1.0,
            },
            ..Default::default()
        };
        let mut w = world(cfg, immortal_env(), 5);
        w.run(3).unwrap();
        let genomes: Vec<&Genome> = w.slots().iter().flatten().map(|o| &o.genome).collect();
        assert_eq!(genomes.len(), 6);
        assert!(genomes.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn same_seed_same_log() {
        let env = EnvSpec::new(EnvId::DodgeSurvival);
        let a = world(WorldConfig::default(), env.clone(), 77).run(300).unwrap();
        let b = world(WorldConfig::default(), env.clone(), 77).run(300).unwrap();
        let c = world(WorldConfig::default(), env, 78).run(300).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn run_rejects_zero_ticks() {
        let mut w = world(WorldConfig::default(), EnvSpec::new(EnvId::DodgeSurvival), 0);
        assert!(w.run(0).is_err());
    }

    #[test]
    fn snapshot_resume_continues_identically() {
        let env = EnvSpec::new(EnvId::DodgeForager);
        let mut a = world(WorldConfig::default(), env, 12);
        a.run(150).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        a.save_snapshot(&path).unwrap();
        let mut b = World::load_snapshot(&path).unwrap();
        assert_eq!(b.snapshot(), a.snapshot());
        assert_eq!(a.run(200).unwrap(), b.run(200).unwrap());
    }
}
