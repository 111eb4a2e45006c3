//! Helpers shared by the integration targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use evo_replicator::envs::{EnvId, EnvSpec};
use evo_replicator::harness::{run_experiment, ExperimentConfig, Method};
use evo_replicator::baselines::{ea_generation, ga_generation, EaConfig, EaState, Evaluation, GaConfig};
use evo_replicator::policy::{forward, reset_hidden};
use evo_replicator::world::{Event, EventKind, Topology, World, WorldConfig};
use evo_replicator::{mutate, new_random_genome, ActionMode, Genome, MutationConfig, PolicySpec, RngStream};

fn adjacent(a: usize, b: usize, n: usize, topology: Topology) -> bool {
    let d = a.abs_diff(b);
    match topology {
        Topology::Ring => d == 1 || d == n - 1,
        Topology::Bounded => d == 1,
    }
}

/// Checks one tick's events against the grid before and after it. Returns
/// a description of every violated invariant.
pub fn check_tick(
    before: &[Option<(u64, u64)>],
    events: &[Event],
    after: &[Option<(u64, u64)>],
    tick: u64,
    topology: Topology,
    cap: Option<u64>,
) -> Vec<String> {
    let n = before.len();
    let mut bad = Vec::new();
    let mut grid: Vec<Option<u64>> = before.iter().map(|s| s.map(|(id, _)| id)).collect();
    let mut where_is: HashMap<u64, usize> = grid
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|id| (id, i)))
        .collect();
    let ages: HashMap<u64, u64> = before.iter().flatten().copied().collect();
    let empty = grid.iter().all(Option::is_none);
    let mut born = Vec::new();
    let mut died = Vec::new();

    let reseeds = events.iter().filter(|e| e.kind == EventKind::Reseed).count();
    if empty != (reseeds == 1) || reseeds > 1 {
        bad.push(format!("tick {tick}: {reseeds} reseeds on a grid that was empty={empty}"));
    }
    if empty && events.first().map(|e| e.kind) != Some(EventKind::Reseed) {
        bad.push(format!("tick {tick}: reseed is not the first event"));
    }

    for e in events {
        if e.tick != tick {
            bad.push(format!("tick {tick}: event stamped {}", e.tick));
        }
        match e.kind {
            EventKind::Reseed | EventKind::Birth => {
                if grid[e.slot].is_some() {
                    bad.push(format!("tick {tick}: {:?} into occupied slot {}", e.kind, e.slot));
                }
                if e.kind == EventKind::Birth {
                    match e.parent_id.and_then(|p| where_is.get(&p)) {
                        Some(&ps) if adjacent(ps, e.slot, n, topology) => {}
                        Some(&ps) => bad.push(format!("tick {tick}: child at {} not next to parent at {ps}", e.slot)),
                        None => bad.push(format!("tick {tick}: birth from absent parent {:?}", e.parent_id)),
                    }
                    born.push(e.org_id);
                }
                grid[e.slot] = Some(e.org_id);
                where_is.insert(e.org_id, e.slot);
            }
            EventKind::Death => {
                if grid[e.slot] != Some(e.org_id) {
                    bad.push(format!("tick {tick}: death of {} not in slot {}", e.org_id, e.slot));
                }
                if born.contains(&e.org_id) {
                    bad.push(format!("tick {tick}: newborn {} acted", e.org_id));
                }
                let expected = ages.get(&e.org_id).map_or(1, |a| a + 1);
                if e.lifespan != Some(expected) {
                    bad.push(format!("tick {tick}: lifespan {:?}, age gives {expected}", e.lifespan));
                }
                if let (Some(c), Some(l)) = (cap, e.lifespan) {
                    if l > c {
                        bad.push(format!("tick {tick}: lifespan {l} above cap {c}"));
                    }
                }
                grid[e.slot] = None;
                where_is.remove(&e.org_id);
                died.push(e.org_id);
            }
        }
    }

    let now: Vec<Option<u64>> = after.iter().map(|s| s.map(|(id, _)| id)).collect();
    if grid != now {
        bad.push(format!("tick {tick}: grid does not match the event log"));
    }
    let pop = |g: &[Option<(u64, u64)>]| g.iter().flatten().count();
    if pop(after) + died.len() != pop(before) + born.len() + reseeds {
        bad.push(format!("tick {tick}: population bookkeeping off"));
    }
    for &(id, age) in after.iter().flatten() {
        let want = if born.contains(&id) {
            0
        } else {
            ages.get(&id).map_or(1, |a| a + 1)
        };
        if age != want {
            bad.push(format!("tick {tick}: organism {id} has age {age}, expected {want}"));
        }
    }
    bad
}

fn occupancy(w: &World) -> Vec<Option<(u64, u64)>> {
    w.slots().iter().map(|s| s.as_ref().map(|o| (o.org_id, o.age))).collect()
}

/// Runs `total_ticks` ticks spread over randomly drawn worlds and returns
/// every invariant violation found.
pub fn invariant_suite(total_ticks: u64, seed: u64) -> Vec<String> {
    let mut rng = RngStream::new(seed);
    let mut done = 0;
    let mut bad = Vec::new();
    while done < total_ticks {
        let env_id = EnvId::ALL[rng.below(4)];
        let cap = match rng.below(3) {
            0 => Some(1 + rng.below(40) as u64),
            1 => Some(100 + rng.below(400) as u64),
            _ => EnvSpec::new(env_id).time_cap,
        };
        let env = EnvSpec::with_params(env_id, cap, &BTreeMap::new()).unwrap();
        let cfg = WorldConfig {
            grid_dim: 2 + rng.below(30),
            reproductive_prob: 0.05 + 0.95 * rng.uniform(),
            mutation: MutationConfig {
                scale: [0.0, 0.001, 0.1][rng.below(3)],
                per_weight_prob: [1.0, 0.5][rng.below(2)],
            },
            topology: [Topology::Ring, Topology::Bounded][rng.below(2)],
            init_scale: [0.003, 0.1, 1.0][rng.below(3)],
        };
        let policy = env.policy_spec(1 + rng.below(16)).unwrap();
        let mut world = World::new(cfg, env, policy, rng.next_seed()).unwrap();
        let ticks = (50 + rng.below(450) as u64).min(total_ticks - done);
        for _ in 0..ticks {
            let before = occupancy(&world);
            let tick = world.current_tick();
            let events = world.tick().unwrap();
            let after = occupancy(&world);
            bad.extend(check_tick(&before, &events, &after, tick, cfg.topology, cap));
        }
        done += ticks;
    }
    bad
}

/// Small, quick experiment on a short Dodge episode.
pub fn small_config(method: Method, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(method, EnvId::DodgeSurvival);
    cfg.env = EnvSpec::with_params(EnvId::DodgeSurvival, Some(150), &BTreeMap::new()).unwrap();
    cfg.policy = cfg.env.policy_spec(8).unwrap();
    cfg.world.grid_dim = 12;
    cfg.seeds = seeds;
    cfg.budget = match method {
        Method::SelfReplicator => 3000,
        _ => 3,
    };
    cfg.ea.population_size = 8;
    cfg.ga.population_size = 8;
    cfg.ga.elite_size = 2;
    cfg.window = 20;
    cfg
}

fn event_files(dir: &Path, seeds: &[u64]) -> Vec<Vec<u8>> {
    seeds
        .iter()
        .map(|s| std::fs::read(dir.join(format!("events_{s}.csv"))).unwrap())
        .collect()
}

/// Runs `cfg` twice and once with the seed list reversed. Returns whether
/// the reruns were byte-identical and whether the reversed run matched
/// seed by seed.
pub fn determinism(cfg: &ExperimentConfig) -> (bool, bool) {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut files = Vec::new();
    for (i, dir) in dirs.iter().enumerate() {
        let mut c = cfg.clone();
        if i == 2 {
            c.seeds.reverse();
        }
        c.out = Some(dir.path().to_path_buf());
        run_experiment(&c, Some(2)).unwrap();
        files.push(event_files(dir.path(), &cfg.seeds));
    }
    (files[0] == files[1], files[0] == files[2])
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `n` single-weight perturbations from the default mutation operator.
pub fn mutation_deltas(n: usize, seed: u64) -> Vec<f64> {
    let spec = PolicySpec::new(1, 1, 1, ActionMode::Discrete).unwrap();
    let parent = Genome::from_weights(&spec, vec![0.25, -0.5, 0.125, 1.0, -2.0]).unwrap();
    let cfg = MutationConfig::default();
    let mut rng = RngStream::new(seed);
    let mut deltas = Vec::with_capacity(n);
    while deltas.len() < n {
        let child = mutate(&parent, &cfg, &mut rng);
        deltas.extend(child.weights().iter().zip(parent.weights()).map(|(c, p)| c - p));
    }
    deltas.truncate(n);
    deltas
}

/// Textbook evaluation: unpack the genome into explicit matrices and
/// multiply them out.
pub fn matrix_forward(w: &[f64], n_in: usize, n_h: usize, n_out: usize, x: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut it = w.iter().copied();
    let mut take = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
        (0..rows).map(|_| (0..cols).map(|_| it.next().unwrap()).collect()).collect()
    };
    let w_ih = take(n_h, n_in);
    let w_hh = take(n_h, n_h);
    let b_h = take(1, n_h).remove(0);
    let w_ho = take(n_out, n_h);
    let b_o = take(1, n_out).remove(0);
    let h_next: Vec<f64> = (0..n_h)
        .map(|j| {
            let mut z = b_h[j];
            for i in 0..n_in {
                z += w_ih[j][i] * x[i];
            }
            for k in 0..n_h {
                z += w_hh[j][k] * h[k];
            }
            z.tanh()
        })
        .collect();
    let y: Vec<f64> = (0..n_out)
        .map(|o| b_o[o] + (0..n_h).map(|j| w_ho[o][j] * h_next[j]).sum::<f64>())
        .collect();
    (y, h_next)
}

pub fn distance(w: &[f64], target: f64) -> f64 {
    w.iter().map(|x| (x - target).powi(2)).sum::<f64>().sqrt()
}

pub fn quadratic(target: f64) -> impl Fn(&Genome, u64) -> evo_replicator::Result<Evaluation> + Sync {
    move |g: &Genome, _| Ok(Evaluation::score(-distance(g.weights(), target).powi(2)))
}

/// Largest gap between `forward` and [`matrix_forward`] over `instances`
/// random networks with every dimension at most 8, two steps each.
pub fn forward_max_error(instances: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (n_in, n_h, n_out) = (1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(8));
        let spec = PolicySpec::new(n_in, n_h, n_out, ActionMode::Discrete).unwrap();
        let genome = new_random_genome(&spec, 1.0, &mut rng);
        let mut h = reset_hidden(&spec);
        // the second step feeds a non-zero state through the recurrent weights
        for _ in 0..2 {
            let x: Vec<f64> = (0..n_in).map(|_| rng.normal()).collect();
            let (y, next) = forward(&genome, &spec, &x, &h).unwrap();
            let (y_ref, h_ref) = matrix_forward(genome.weights(), n_in, n_h, n_out, &x, h.activations());
            for (a, b) in y.iter().zip(&y_ref).chain(next.activations().iter().zip(&h_ref)) {
                worst = worst.max((a - b).abs());
            }
            h = next;
        }
    }
    worst
}

/// Distance of the ES centre from `0.5·1` after each of 200 generations on
/// `-‖θ - 0.5·1‖²`, starting from zero in `dim` dimensions.
pub fn es_quadratic(dim: usize, seed: u64) -> Vec<f64> {
    let cfg = EaConfig::default();
    let mut state = EaState::new(Genome::from_raw(vec![0.0; dim]), &cfg);
    let mut rng = RngStream::new(seed);
    let mut dists = vec![distance(state.center.weights(), 0.5)];
    for _ in 0..200 {
        ea_generation(&mut state, &cfg, &mut rng, quadratic(0.5)).unwrap();
        dists.push(distance(state.center.weights(), 0.5));
    }
    dists
}

/// Best-of-population distance from `0.5·1` for each of 200 GA generations,
/// preceded by the starting distance.
pub fn ga_quadratic(dim: usize, seed: u64) -> Vec<f64> {
    let cfg = GaConfig::default();
    let mut population = vec![Genome::from_raw(vec![0.0; dim]); cfg.population_size];
    let mut rng = RngStream::new(seed);
    let mut best = vec![distance(&vec![0.0; dim], 0.5)];
    for _ in 0..200 {
        let stats = ga_generation(&mut population, &cfg, &mut rng, quadratic(0.5)).unwrap();
        best.push((-stats.best).sqrt());
    }
    best
}

/// ES: distance strictly lower after every 20-generation stretch.
pub fn es_improves(dists: &[f64]) -> bool {
    dists.windows(21).all(|w| w[20] < w[0])
}

/// GA: best distance never rises and ends below the start.
pub fn ga_improves(best: &[f64]) -> bool {
    best.windows(2).skip(1).all(|w| w[1] <= w[0]) && best.last() < best.first()
}
