//! Link selection: turns an [`AdditionPlan`] into concrete decoy links.
//!
//! For every unit update of topic `t`, a user `v` is drawn uniformly from the sampling
//! population (non-friends of the owner for PBooster), a browsing history of size `q` is
//! simulated for `v`, and one of its topic-`t` links is picked uniformly. If the simulated
//! history has no usable topic-`t` link, a fresh `v` is drawn. Usable means the link's author
//! is eligible for the population and the URL has not already been chosen for this owner.
//! After `max_retries` failed draws the selector falls back to a pool of topic-`t` links that
//! `v` could have seen, or errors when the fallback is disabled.

use std::collections::HashSet;
use std::sync::Arc;

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Link, SocialGraph};
use crate::error::{Error, Result};
use crate::seed::{self, SeedRng};
use crate::socialsim::HistorySimulator;
use crate::topicsel::AdditionPlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSelectConfig {
    /// Size of each simulated history.
    pub q: usize,
    /// Draws of `v` per unit update before falling back.
    pub max_retries: usize,
    pub rng_seed: u64,
    /// Draw from the global eligible pool once retries are exhausted.
    pub fallback: bool,
}

impl Default for LinkSelectConfig {
    fn default() -> Self {
        Self {
            q: 20,
            max_retries: 50,
            rng_seed: 0,
            fallback: true,
        }
    }
}

impl LinkSelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("q must be >= 1".into()));
        }
        if self.max_retries == 0 {
            return Err(Error::Config("max_retries must be >= 1".into()));
        }
        Ok(())
    }
}

/// Whose simulated histories decoys are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    /// `v` outside the owner's friend list; links authored by neither the owner nor a friend.
    NonFriends,
    /// `v` among the owner's friends; any link in `v`'s history not authored by the owner.
    Friends,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoyLink {
    pub link: Link,
    /// The sampled user whose simulated history supplied the link (the author on fallback).
    pub source_user: usize,
    pub poster: usize,
    pub fallback: bool,
}

/// Stateful decoy picker for one history owner.
///
/// The selector remembers every URL it has handed out, so repeated calls (one per batch) never
/// return the same decoy twice unless the eligible pool is exhausted.
pub struct LinkSelector<'a> {
    graph: &'a SocialGraph,
    owner: usize,
    population: Population,
    cfg: LinkSelectConfig,
    simulator: &'a dyn HistorySimulator,
    rng: SeedRng,
    candidates: Vec<usize>,
    used: HashSet<Arc<str>>,
    /// `(link, poster, source_user)` triples for the fallback path.
    pool: Option<Vec<(Link, usize, usize)>>,
}

impl<'a> LinkSelector<'a> {
    pub fn new(
        graph: &'a SocialGraph,
        owner: usize,
        population: Population,
        cfg: LinkSelectConfig,
        simulator: &'a dyn HistorySimulator,
    ) -> Result<Self> {
        cfg.validate()?;
        if owner >= graph.len() {
            return Err(Error::UnknownUser(format!("#{owner}")));
        }
        let candidates: Vec<usize> = match population {
            Population::NonFriends => (0..graph.len())
                .filter(|&v| v != owner && !graph.are_friends(owner, v))
                .collect(),
            Population::Friends => graph.friends(owner).to_vec(),
        };
        if candidates.is_empty() {
            return Err(Error::NoCandidates(graph.name(owner).to_string()));
        }
        Ok(Self {
            graph,
            owner,
            population,
            cfg,
            simulator,
            rng: seed::rng(cfg.rng_seed),
            candidates,
            used: HashSet::new(),
            pool: None,
        })
    }

    pub fn population(&self) -> Population {
        self.population
    }

    /// Whether a link authored by `poster` may be used as a decoy for this owner.
    pub fn eligible_author(&self, poster: usize) -> bool {
        match self.population {
            Population::NonFriends => {
                poster != self.owner && !self.graph.are_friends(self.owner, poster)
            }
            Population::Friends => poster != self.owner,
        }
    }

    /// Selects exactly `plan.total()` links, one per unit update, in topic order.
    pub fn select(&mut self, plan: &AdditionPlan) -> Result<Vec<DecoyLink>> {
        let topics: Vec<usize> = plan.unit_updates().collect();
        topics.into_iter().map(|t| self.pick(Some(t))).collect()
    }

    /// Selects `count` links with unconstrained topics.
    pub fn select_any(&mut self, count: usize) -> Result<Vec<DecoyLink>> {
        (0..count).map(|_| self.pick(None)).collect()
    }

    fn pick(&mut self, topic: Option<usize>) -> Result<DecoyLink> {
        for _ in 0..self.cfg.max_retries {
            let v = *self.candidates.choose(&mut self.rng).expect("non-empty");
            let Ok(sim) = self
                .simulator
                .simulate(self.graph, v, self.cfg.q, &mut self.rng)
            else {
                continue;
            };
            let options: Vec<_> = sim
                .links
                .iter()
                .filter(|s| topic.is_none_or(|t| s.link.topic == t))
                .filter(|s| self.eligible_author(s.poster))
                .filter(|s| !self.used.contains(&s.link.url))
                .collect();
            if let Some(s) = options.choose(&mut self.rng) {
                let decoy = DecoyLink {
                    link: s.link.clone(),
                    source_user: v,
                    poster: s.poster,
                    fallback: false,
                };
                self.used.insert(decoy.link.url.clone());
                return Ok(decoy);
            }
        }
        if !self.cfg.fallback {
            return Err(self.exhausted(topic));
        }
        self.pick_from_pool(topic)
    }

    fn pick_from_pool(&mut self, topic: Option<usize>) -> Result<DecoyLink> {
        if self.pool.is_none() {
            let pool = self.build_pool();
            self.pool = Some(pool);
        }
        let pool = self.pool.as_ref().expect("built above");
        let matching: Vec<&(Link, usize, usize)> = pool
            .iter()
            .filter(|(l, _, _)| topic.is_none_or(|t| l.topic == t))
            .collect();
        let fresh: Vec<&(Link, usize, usize)> = matching
            .iter()
            .copied()
            .filter(|(l, _, _)| !self.used.contains(&l.url))
            .collect();
        let choice = if fresh.is_empty() {
            matching.choose(&mut self.rng)
        } else {
            fresh.choose(&mut self.rng)
        };
        let Some((link, poster, source)) = choice.map(|(l, p, s)| (l.clone(), *p, *s)) else {
            return Err(self.exhausted(topic));
        };
        self.used.insert(link.url.clone());
        Ok(DecoyLink {
            link,
            source_user: source,
            poster,
            fallback: true,
        })
    }

    /// Non-friends: every post by an eligible author, attributed to its author.
    /// Friends: posts by friends of each friend `v` (owner excluded), attributed to `v`.
    fn build_pool(&self) -> Vec<(Link, usize, usize)> {
        match self.population {
            Population::NonFriends => self
                .graph
                .link_pool()
                .into_iter()
                .filter(|(_, poster)| self.eligible_author(*poster))
                .map(|(l, p)| (l, p, p))
                .collect(),
            Population::Friends => {
                let mut seen = HashSet::new();
                let mut pool = Vec::new();
                for &v in self.graph.friends(self.owner) {
                    for &w in self.graph.friends(v) {
                        if w == self.owner {
                            continue;
                        }
                        for l in self.graph.posts(w) {
                            if seen.insert(l.url.clone()) {
                                pool.push((l.clone(), w, v));
                            }
                        }
                    }
                }
                pool
            }
        }
    }

    fn exhausted(&self, topic: Option<usize>) -> Error {
        Error::RetriesExhausted {
            user: self.graph.name(self.owner).to_string(),
            topic: topic.unwrap_or(usize::MAX),
            retries: self.cfg.max_retries,
        }
    }
}

/// One-shot non-friend link selection for `user`.
pub fn select_links(
    user: &str,
    plan: &AdditionPlan,
    graph: &SocialGraph,
    cfg: &LinkSelectConfig,
    simulator: &dyn HistorySimulator,
) -> Result<Vec<DecoyLink>> {
    let owner = graph.require_user(user)?;
    if plan.is_empty() {
        return Ok(Vec::new());
    }
    LinkSelector::new(graph, owner, Population::NonFriends, *cfg, simulator)?.select(plan)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::domain::TopicModel;
    use crate::socialsim::{generate_graph, FeedSimulator, SimConfig};

    fn sim() -> FeedSimulator {
        FeedSimulator::new(0.16).unwrap()
    }

    /// `a - b - c - d - e` path plus `e - f`; only b posts topic 2.
    fn fixture() -> SocialGraph {
        let names: Vec<String> = ["a", "b", "c", "d", "e", "f"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)];
        let mut adj = vec![BTreeSet::new(); 6];
        for (x, y) in edges {
            adj[x].insert(y);
            adj[y].insert(x);
        }
        let posts = vec![
            vec![Link::new("a0", 0)],
            vec![Link::new("b0", 2), Link::new("b1", 0)],
            vec![Link::new("c0", 1), Link::new("c1", 1)],
            vec![Link::new("d0", 1), Link::new("d1", 0)],
            vec![Link::new("e0", 1), Link::new("e1", 1), Link::new("e2", 1)],
            vec![Link::new("f0", 0)],
        ];
        SocialGraph::new(TopicModel::new(3).unwrap(), names, adj, posts).unwrap()
    }

    #[test]
    fn empty_plan_selects_nothing() {
        let g = fixture();
        let out = select_links(
            "a",
            &AdditionPlan::zeros(3),
            &g,
            &LinkSelectConfig::default(),
            &sim(),
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn selected_links_match_plan_and_avoid_friends() {
        let g = fixture();
        let plan = AdditionPlan::from_vec(vec![0, 2, 0]);
        let out = select_links("a", &plan, &g, &LinkSelectConfig::default(), &sim()).unwrap();
        assert_eq!(out.len(), 2);
        let a = g.user_index("a").unwrap();
        for d in &out {
            assert_eq!(d.link.topic, 1);
            assert_ne!(d.poster, a);
            assert!(!g.are_friends(a, d.poster));
            assert!(!g.are_friends(a, d.source_user));
        }
        assert_ne!(out[0].link.url, out[1].link.url);
    }

    #[test]
    fn missing_topic_errors_without_fallback() {
        let g = fixture();
        // Topic 2 is posted only by b, a friend of a.
        let cfg = LinkSelectConfig {
            fallback: false,
            max_retries: 10,
            ..LinkSelectConfig::default()
        };
        let err = select_links(
            "a",
            &AdditionPlan::from_vec(vec![0, 0, 1]),
            &g,
            &cfg,
            &sim(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::RetriesExhausted {
                topic: 2,
                retries: 10,
                ..
            }
        ));
        // The fallback pool has no eligible author either.
        let err = select_links(
            "a",
            &AdditionPlan::from_vec(vec![0, 0, 1]),
            &g,
            &LinkSelectConfig::default(),
            &sim(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::RetriesExhausted { .. }));
    }

    #[test]
    fn friends_population_uses_friend_authors() {
        let g = fixture();
        let c = g.user_index("c").unwrap();
        let cfg = LinkSelectConfig::default();
        let s = sim();
        let mut sel = LinkSelector::new(&g, c, Population::Friends, cfg, &s).unwrap();
        let out = sel.select(&AdditionPlan::from_vec(vec![1, 1, 0])).unwrap();
        for d in &out {
            assert!(g.are_friends(c, d.source_user));
            assert_ne!(d.poster, c);
        }
    }

    #[test]
    fn no_candidates_errors() {
        let m = TopicModel::new(1).unwrap();
        let g = SocialGraph::new(
            m,
            vec!["a".into(), "b".into()],
            vec![BTreeSet::from([1]), BTreeSet::from([0])],
            vec![vec![Link::new("x", 0)], vec![Link::new("y", 0)]],
        )
        .unwrap();
        let err = select_links(
            "a",
            &AdditionPlan::from_vec(vec![1]),
            &g,
            &LinkSelectConfig::default(),
            &sim(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoCandidates(_)));
    }

    #[test]
    fn seeded_selection_is_reproducible() {
        let g = generate_graph(&SimConfig {
            n_users: 60,
            degree_min: 3,
            degree_max: 10,
            rng_seed: 8,
            ..SimConfig::default()
        })
        .unwrap();
        let plan = AdditionPlan::from_vec((0..20).map(|t| (t % 3) as u64).collect());
        let cfg = LinkSelectConfig {
            rng_seed: 5,
            ..LinkSelectConfig::default()
        };
        let a = select_links("u00007", &plan, &g, &cfg, &sim()).unwrap();
        let b = select_links("u00007", &plan, &g, &cfg, &sim()).unwrap();
        assert_eq!(a, b);
        let topics: Vec<usize> = a.iter().map(|d| d.link.topic).collect();
        assert_eq!(topics, plan.unit_updates().collect::<Vec<_>>());
        let urls: HashSet<_> = a.iter().map(|d| d.link.url.clone()).collect();
        assert_eq!(urls.len(), a.len());
    }
}
