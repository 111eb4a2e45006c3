//! Experiment configuration files.
//!
//! TOML with one table per concern. Every key is optional except
//! `env.id`; unknown keys anywhere are rejected.
//!
//! ```toml
//! [experiment]
//! method = "self_replicator"   # or "ea", "ga"
//! seeds = [0, 1, 2]
//! budget = 200000              # ticks, or generations for ea / ga
//! window = 100
//!
//! [env]
//! id = "dodge_survival"
//! time_cap = 2000
//! [env.params]
//! spawn_prob = 0.5
//!
//! [policy]
//! n_hidden = 32
//!
//! [world]
//! grid_dim = 32
//! reproductive_prob = 0.5
//!
//! [mutation]
//! scale = 0.001
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{EaConfig, GaConfig};
use crate::envs::{EnvId, EnvSpec};
use crate::error::{Error, Result};
use crate::genome::{MutationConfig, PolicySpec, DEFAULT_HIDDEN};
use crate::world::{Topology, WorldConfig};

/// Default lifespan window for first/final medians and curves.
pub const DEFAULT_WINDOW: usize = 100;
/// Default number of replicate seeds (`0..10`).
pub const DEFAULT_SEED_COUNT: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SelfReplicator,
    Ea,
    Ga,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SelfReplicator, Method::Ga, Method::Ea];

    pub fn name(self) -> &'static str {
        match self {
            Method::SelfReplicator => "self_replicator",
            Method::Ea => "ea",
            Method::Ga => "ga",
        }
    }

    pub fn default_budget(self) -> u64 {
        match self {
            Method::SelfReplicator => 200_000,
            Method::Ea | Method::Ga => 100,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("experiment.method", format!("unknown method `{s}`")))
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub env: EnvSpec,
    pub policy: PolicySpec,
    pub world: WorldConfig,
    pub ea: EaConfig,
    pub ga: GaConfig,
    pub seeds: Vec<u64>,
    /// World ticks for the self-replicator, generations for EA and GA.
    pub budget: u64,
    /// Deaths per window for first/final medians and curves.
    pub window: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `method` on `env_id`.
    pub fn new(method: Method, env_id: EnvId) -> Self {
        let env = EnvSpec::new(env_id);
        Self {
            method,
            policy: env.default_policy_spec(),
            env,
            world: WorldConfig::default(),
            ea: EaConfig::default(),
            ga: GaConfig::default(),
            seeds: (0..DEFAULT_SEED_COUNT).collect(),
            budget: method.default_budget(),
            window: DEFAULT_WINDOW,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "at least one seed is required"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("experiment.seeds", "seeds must be distinct"));
        }
        if self.budget == 0 {
            return Err(Error::config("experiment.budget", "must be at least 1"));
        }
        if self.window == 0 {
            return Err(Error::config("experiment.window", "must be at least 1"));
        }
        self.env.validate()?;
        self.policy.validate()?;
        self.env.check_policy(&self.policy)?;
        match self.method {
            Method::SelfReplicator => self.world.validate()?,
            Method::Ea | Method::Ga => {
                if !(self.world.init_scale >= 0.0 && self.world.init_scale.is_finite()) {
                    return Err(Error::config("world.init_scale", "must be finite and >= 0"));
                }
                if self.env.time_cap.is_none() {
                    return Err(Error::config(
                        "env.time_cap",
                        format!("{} has no time cap; EA and GA need finite lifespans", self.env.env_id),
                    ));
                }
                if self.method == Method::Ea {
                    self.ea.validate()?;
                } else {
                    self.ga.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::config(field_of(&e), e.message()))?;
        let cfg = file.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The complete configuration, defaults included, as TOML that
    /// [`ExperimentConfig::from_toml_str`] reads back unchanged.
    pub fn to_toml(&self) -> String {
        let file = ConfigFile {
            experiment: ExperimentSection {
                method: Some(self.method),
                seeds: Some(self.seeds.clone()),
                budget: Some(self.budget),
                window: Some(self.window),
                out: self.out.clone(),
            },
            env: EnvSection {
                id: self.env.env_id,
                time_cap: self.env.time_cap,
                uncapped: self.env.time_cap.is_none(),
                params: self.env.env_params.clone(),
            },
            policy: PolicySection {
                n_hidden: Some(self.policy.n_hidden),
            },
            world: WorldSection {
                grid_dim: self.world.grid_dim,
                reproductive_prob: self.world.reproductive_prob,
                topology: self.world.topology,
                init_scale: self.world.init_scale,
            },
            mutation: self.world.mutation,
            ea: self.ea,
            ga: self.ga,
        };
        toml::to_string(&file).expect("config serializes")
    }
}

/// Dotted key path of a TOML error, best effort.
fn field_of(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    "config".to_string()
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    method: Option<Method>,
    seeds: Option<Vec<u64>>,
    budget: Option<u64>,
    window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    id: EnvId,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_cap: Option<u64>,
    /// Removes the environment's default cap.
    #[serde(default)]
    uncapped: bool,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicySection {
    n_hidden: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WorldSection {
    grid_dim: usize,
    reproductive_prob: f64,
    topology: Topology,
    init_scale: f64,
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = WorldConfig::default();
        Self {
            grid_dim: w.grid_dim,
            reproductive_prob: w.reproductive_prob,
            topology: w.topology,
            init_scale: w.init_scale,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    experiment: ExperimentSection,
    env: EnvSection,
    #[serde(default)]
    policy: PolicySection,
    #[serde(default)]
    world: WorldSection,
    #[serde(default)]
    mutation: MutationConfig,
    #[serde(default)]
    ea: EaConfig,
    #[serde(default)]
    ga: GaConfig,
}

impl ConfigFile {
    fn resolve(self) -> Result<ExperimentConfig> {
        let method = self.experiment.method.unwrap_or(Method::SelfReplicator);
        let id = self.env.id;
        let time_cap = match (self.env.uncapped, self.env.time_cap) {
            (true, Some(_)) => {
                return Err(Error::config("env.time_cap", "conflicts with env.uncapped = true"));
            }
            (true, None) => None,
            (false, Some(t)) => Some(t),
            (false, None) => EnvSpec::new(id).time_cap,
        };
        let env = EnvSpec::with_params(id, time_cap, &self.env.params)?;
        let policy = env.policy_spec(self.policy.n_hidden.unwrap_or(DEFAULT_HIDDEN))?;
        Ok(ExperimentConfig {
            method,
            env,
            policy,
            world: WorldConfig {
                grid_dim: self.world.grid_dim,
                reproductive_prob: self.world.reproductive_prob,
                mutation: self.mutation,
                topology: self.world.topology,
                init_scale: self.world.init_scale,
            },
            ea: self.ea,
            ga: self.ga,
            seeds: self.experiment.seeds.unwrap_or_else(|| (0..DEFAULT_SEED_COUNT).collect()),
            budget: self.experiment.budget.unwrap_or(method.default_budget()),
            window: self.experiment.window.unwrap_or(DEFAULT_WINDOW),
            out: self.experiment.out,
        })
    }
}

/// Parses a seed list such as `0,1,2`, `0..10` or `3,7..9`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let bad = |part: &str| Error::config("seed-list", format!("cannot parse `{part}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
            if b <= a {
                return Err(bad(part));
            }
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    if out.is_empty() {
        return Err(Error::config("seed-list", "no seeds given"));
    }
    Ok(out)
}
