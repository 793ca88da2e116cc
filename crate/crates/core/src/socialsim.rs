//! Synthetic social graphs and feed-driven browsing histories.
//!
//! A graph has symmetric friendships with per-user target degrees drawn uniformly from
//! `[degree_min, degree_max]`. Each user posts `posts_per_user` links whose topics follow a
//! per-user preference vector drawn from a symmetric Dirichlet. A user's browsing history is
//! simulated by clicking on feed links: most links come from a random friend's posts, and a
//! `fof_fraction` share comes from the posts of a random friend of a random friend.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::domain::{
    parse_record, read_lines, write_jsonl, BrowsingHistory, Link, SocialGraph, TopicModel,
};
use crate::error::{Error, Result};
use crate::seed::{self, SeedRng};

/// Resampling attempts when a sampled poster has nothing to pull.
const POSTER_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_users: usize,
    pub m: usize,
    pub degree_min: usize,
    pub degree_max: usize,
    pub posts_per_user: usize,
    pub dirichlet_alpha: f64,
    pub fof_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_users: 1200,
            m: 20,
            degree_min: 5,
            degree_max: 50,
            posts_per_user: 20,
            dirichlet_alpha: 0.1,
            fof_fraction: 0.16,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::Config("n_users must be >= 1".into()));
        }
        TopicModel::new(self.m).map_err(|_| Error::Config("m must be >= 1".into()))?;
        if self.degree_min == 0 || self.degree_min > self.degree_max {
            return Err(Error::Config(format!(
                "need 1 <= degree_min <= degree_max, got [{}, {}]",
                self.degree_min, self.degree_max
            )));
        }
        if self.degree_max >= self.n_users {
            return Err(Error::Config(format!(
                "degree_max {} must be below n_users {}",
                self.degree_max, self.n_users
            )));
        }
        if self.posts_per_user == 0 {
            return Err(Error::Config("posts_per_user must be >= 1".into()));
        }
        if !(self.dirichlet_alpha.is_finite() && self.dirichlet_alpha > 0.0) {
            return Err(Error::Config("dirichlet_alpha must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.fof_fraction) {
            return Err(Error::Config("fof_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<TopicModel> {
        TopicModel::new(self.m)
    }
}

pub fn user_name(index: usize) -> String {
    format!("u{index:05}")
}

pub fn generate_graph(cfg: &SimConfig) -> Result<SocialGraph> {
    cfg.validate()?;
    let model = cfg.model()?;
    let n = cfg.n_users;
    let mut rng = seed::rng(seed::derive(cfg.rng_seed, "graph"));

    let targets: Vec<usize> = (0..n)
        .map(|_| rng.random_range(cfg.degree_min..=cfg.degree_max))
        .collect();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let pick =
        |u: usize, adj: &[BTreeSet<usize>], limit: &dyn Fn(usize) -> usize, rng: &mut SeedRng| {
            let open: Vec<usize> = (0..n)
                .filter(|&v| v != u && !adj[u].contains(&v) && adj[v].len() < limit(v))
                .collect();
            open.choose(rng).copied()
        };

    // Match stubs against users that still want edges, then top up anyone left below the
    // minimum using users with spare capacity under degree_max.
    for &u in &order {
        while adj[u].len() < targets[u] {
            let v = pick(u, &adj, &|v| targets[v], &mut rng)
                .or_else(|| pick(u, &adj, &|_| cfg.degree_max, &mut rng));
            let Some(v) = v else { break };
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for &u in &order {
        while adj[u].len() < cfg.degree_min {
            let Some(v) = pick(u, &adj, &|_| cfg.degree_max, &mut rng) else {
                return Err(Error::Config(format!(
                    "cannot give user {u} at least {} friends with degree_max {}",
                    cfg.degree_min, cfg.degree_max
                )));
            };
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }

    let gamma = Gamma::new(cfg.dirichlet_alpha, 1.0)
        .map_err(|e| Error::Config(format!("dirichlet_alpha: {e}")))?;
    let names: Vec<String> = (0..n).map(user_name).collect();
    let mut posts = Vec::with_capacity(n);
    for name in &names {
        let mut weights: Vec<f64> = (0..cfg.m).map(|_| gamma.sample(&mut rng)).collect();
        if weights.iter().sum::<f64>() <= 0.0 {
            // Every gamma draw underflowed; fall back to a point mass.
            let t = rng.random_range(0..cfg.m);
            weights[t] = 1.0;
        }
        let topics = WeightedIndex::new(&weights).expect("positive weights");
        posts.push(
            (0..cfg.posts_per_user)
                .map(|k| Link::new(format!("{name}/p{k:03}"), topics.sample(&mut rng)))
                .collect(),
        );
    }
    SocialGraph::new(model, names, adj, posts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOrigin {
    Friend,
    FriendOfFriend,
}

/// A simulated click and where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedLink {
    pub link: Link,
    pub poster: usize,
    /// The friend of the history owner through whom the link was reached.
    pub via: usize,
    pub origin: LinkOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedHistory {
    pub user: usize,
    pub links: Vec<SimulatedLink>,
}

impl SimulatedHistory {
    pub fn to_history(&self, id: impl Into<String>) -> BrowsingHistory {
        BrowsingHistory::new(id, self.links.iter().map(|s| s.link.clone()).collect())
    }

    pub fn fof_share(&self) -> f64 {
        if self.links.is_empty() {
            return 0.0;
        }
        let fof = self
            .links
            .iter()
            .filter(|s| s.origin == LinkOrigin::FriendOfFriend)
            .count();
        fof as f64 / self.links.len() as f64
    }
}

/// Anything that can produce a browsing history for a graph user.
pub trait HistorySimulator {
    fn simulate(
        &self,
        graph: &SocialGraph,
        user: usize,
        size: usize,
        rng: &mut SeedRng,
    ) -> Result<SimulatedHistory>;
}

/// The friends / friends-of-friends click model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedSimulator {
    pub fof_fraction: f64,
}

impl FeedSimulator {
    pub fn new(fof_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fof_fraction) {
            return Err(Error::Config("fof_fraction must lie in [0, 1]".into()));
        }
        Ok(Self { fof_fraction })
    }
}

impl HistorySimulator for FeedSimulator {
    fn simulate(
        &self,
        graph: &SocialGraph,
        user: usize,
        size: usize,
        rng: &mut SeedRng,
    ) -> Result<SimulatedHistory> {
        simulate_history(graph, user, size, self.fof_fraction, rng)
    }
}

pub fn simulate_history(
    graph: &SocialGraph,
    user: usize,
    size: usize,
    fof_fraction: f64,
    rng: &mut SeedRng,
) -> Result<SimulatedHistory> {
    let friends = graph.friends(user);
    if friends.is_empty() {
        return Err(Error::Simulation(format!(
            "user `{}` has no friends to pull links from",
            graph.name(user)
        )));
    }
    let mut links = Vec::with_capacity(size);
    for _ in 0..size {
        let fof = rng.random_bool(fof_fraction);
        let mut drawn = None;
        for _ in 0..POSTER_RETRIES {
            let via = *friends.choose(rng).expect("non-empty");
            let poster = if fof {
                match graph.friends(via).choose(rng) {
                    Some(&w) => w,
                    None => continue,
                }
            } else {
                via
            };
            if let Some(link) = graph.posts(poster).choose(rng) {
                drawn = Some(SimulatedLink {
                    link: link.clone(),
                    poster,
                    via,
                    origin: if fof {
                        LinkOrigin::FriendOfFriend
                    } else {
                        LinkOrigin::Friend
                    },
                });
                break;
            }
        }
        match drawn {
            Some(s) => links.push(s),
            None => {
                return Err(Error::Simulation(format!(
                    "no posts reachable from `{}` after {POSTER_RETRIES} attempts",
                    graph.name(user)
                )))
            }
        }
    }
    Ok(SimulatedHistory { user, links })
}

/// Answer key for the linkage attack: history id to graph user.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    mapping: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthRecord {
    history_user: String,
    graph_user: String,
}

impl GroundTruth {
    pub fn insert(&mut self, history_user: impl Into<String>, graph_user: impl Into<String>) {
        self.mapping.insert(history_user.into(), graph_user.into());
    }

    pub fn get(&self, history_user: &str) -> Option<&str> {
        self.mapping.get(history_user).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.mapping.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Resolves the graph owner of a history: the mapped user, or the history id itself when it
    /// names a graph user.
    pub fn owner(&self, history_user: &str, graph: &SocialGraph) -> Result<usize> {
        match self.get(history_user) {
            Some(g) => graph.require_user(g),
            None => graph.require_user(history_user),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut truth = Self::default();
        for (no, line) in read_lines(path)? {
            let rec: TruthRecord = parse_record(path, no, &line)?;
            if truth.mapping.contains_key(&rec.history_user) {
                return Err(Error::Validation(format!(
                    "{}:{no}: duplicate history user `{}`",
                    path.display(),
                    rec.history_user
                )));
            }
            truth.insert(rec.history_user, rec.graph_user);
        }
        Ok(truth)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(
            path,
            self.mapping.iter().map(|(h, g)| TruthRecord {
                history_user: h.clone(),
                graph_user: g.clone(),
            }),
        )
    }
}

/// Histories of one requested size, sorted by anonymous id.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySet {
    pub size: usize,
    pub histories: Vec<BrowsingHistory>,
    /// Provenance for each history, aligned with `histories`.
    pub provenance: Vec<SimulatedHistory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: SocialGraph,
    pub sets: Vec<HistorySet>,
    pub truth: GroundTruth,
}

impl Dataset {
    pub fn set(&self, size: usize) -> Option<&HistorySet> {
        self.sets.iter().find(|s| s.size == size)
    }
}

pub fn history_id(size: usize, slot: usize) -> String {
    format!("h{size}-{slot:05}")
}

/// Generates a graph and one history per user for each requested size.
///
/// History ids are anonymous: the slot number comes from a seeded permutation of the users.
pub fn generate_dataset(cfg: &SimConfig, sizes: &[usize]) -> Result<Dataset> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Config(
            "history sizes must be non-empty and positive".into(),
        ));
    }
    let graph = generate_graph(cfg)?;
    let mut truth = GroundTruth::default();
    let mut sets = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let set_seed = seed::derive_indexed(cfg.rng_seed, "histories", size as u64);
        let mut slots: Vec<usize> = (0..graph.len()).collect();
        slots.shuffle(&mut seed::rng(seed::derive(set_seed, "slots")));
        let mut rows = Vec::with_capacity(graph.len());
        for (user, &slot) in slots.iter().enumerate() {
            let mut rng = seed::rng(seed::derive_indexed(set_seed, "user", user as u64));
            let sim = simulate_history(&graph, user, size, cfg.fof_fraction, &mut rng)?;
            let id = history_id(size, slot);
            truth.insert(id.clone(), graph.name(user));
            rows.push((id, sim));
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let (histories, provenance) = rows
            .into_iter()
            .map(|(id, sim)| (sim.to_history(id), sim))
            .unzip();
        sets.push(HistorySet {
            size,
            histories,
            provenance,
        });
    }
    Ok(Dataset { graph, sets, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::entropy;

    fn small(n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_users: n,
            degree_min: 2,
            degree_max: (n - 1).min(8),
            posts_per_user: 5,
            rng_seed: seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn three_users_degree_two_is_a_triangle() {
        let cfg = SimConfig {
            n_users: 3,
            degree_min: 2,
            degree_max: 2,
            ..small(3, 1)
        };
        let g = generate_graph(&cfg).unwrap();
        for u in 0..3 {
            assert_eq!(g.friends(u).len(), 2);
        }
    }

    #[test]
    fn graph_respects_bounds_and_is_deterministic() {
        let cfg = SimConfig {
            n_users: 200,
            rng_seed: 42,
            ..SimConfig::default()
        };
        let a = generate_graph(&cfg).unwrap();
        let b = generate_graph(&cfg).unwrap();
        assert_eq!(a, b);
        for u in 0..a.len() {
            let d = a.friends(u).len();
            assert!((cfg.degree_min..=cfg.degree_max).contains(&d), "degree {d}");
            for &v in a.friends(u) {
                assert!(a.are_friends(v, u));
            }
            assert_eq!(a.posts(u).len(), cfg.posts_per_user);
        }
    }

    #[test]
    fn infeasible_degrees_rejected() {
        let cfg = SimConfig {
            n_users: 5,
            degree_min: 2,
            degree_max: 5,
            ..SimConfig::default()
        };
        assert!(matches!(generate_graph(&cfg), Err(Error::Config(_))));
        let cfg = SimConfig {
            degree_min: 6,
            degree_max: 5,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dirichlet_skew_lowers_post_entropy() {
        let mean_entropy = |alpha: f64| {
            let g = generate_graph(&SimConfig {
                n_users: 200,
                dirichlet_alpha: alpha,
                rng_seed: 3,
                ..SimConfig::default()
            })
            .unwrap();
            let mut total = 0.0;
            for u in 0..g.len() {
                let mut c = [0.0; 20];
                for l in g.posts(u) {
                    c[l.topic] += 1.0;
                }
                let n: f64 = c.iter().sum();
                let p: Vec<f64> = c.iter().map(|x| x / n).collect();
                total += entropy(&p);
            }
            total / g.len() as f64
        };
        assert!(mean_entropy(0.1) < mean_entropy(10.0));
    }

    #[test]
    fn friend_only_histories_come_from_friends() {
        let g = generate_graph(&small(30, 5)).unwrap();
        let mut rng = seed::rng(9);
        let h = simulate_history(&g, 4, 200, 0.0, &mut rng).unwrap();
        assert_eq!(h.links.len(), 200);
        for s in &h.links {
            assert!(g.are_friends(4, s.poster));
            assert!(g.posts(s.poster).contains(&s.link));
        }
    }

    #[test]
    fn provenance_traces_to_friend_or_fof() {
        let g = generate_graph(&small(40, 6)).unwrap();
        let h = simulate_history(&g, 0, 500, 0.5, &mut seed::rng(1)).unwrap();
        for s in &h.links {
            assert!(g.are_friends(0, s.via));
            match s.origin {
                LinkOrigin::Friend => assert_eq!(s.poster, s.via),
                LinkOrigin::FriendOfFriend => assert!(g.are_friends(s.via, s.poster)),
            }
        }
    }

    #[test]
    fn history_is_seeded() {
        let g = generate_graph(&small(20, 2)).unwrap();
        let a = simulate_history(&g, 1, 50, 0.16, &mut seed::rng(77)).unwrap();
        let b = simulate_history(&g, 1, 50, 0.16, &mut seed::rng(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn friendless_user_errors() {
        let m = TopicModel::new(2).unwrap();
        let g = SocialGraph::new(
            m,
            vec!["a".into(), "b".into()],
            vec![BTreeSet::new(), BTreeSet::new()],
            vec![vec![Link::new("x", 0)], vec![]],
        )
        .unwrap();
        assert!(simulate_history(&g, 0, 3, 0.0, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn small_dataset_shape() {
        let cfg = small(10, 11);
        let ds = generate_dataset(&cfg, &[5]).unwrap();
        assert_eq!(ds.sets.len(), 1);
        assert_eq!(ds.sets[0].histories.len(), 10);
        assert!(ds.sets[0].histories.iter().all(|h| h.len() == 5));
        assert_eq!(ds.truth.len(), 10);
        let owners: BTreeSet<_> = ds.truth.iter().map(|(_, g)| g.to_string()).collect();
        assert_eq!(owners.len(), 10);
    }
}
