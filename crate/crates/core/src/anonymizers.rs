//! End-to-end anonymizers: PBooster with incremental batching, and the Random, JustFriends and
//! ISPPolluter baselines.
//!
//! A history of `n` links is revealed in `ceil(n / h)` cumulative batches. After each batch the
//! topic counts of everything revealed so far (original links plus decoys already added) are
//! fed to topic selection, and the resulting plan is materialized by link selection. Original
//! links are never removed.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    count_links, parse_record, read_lines, write_jsonl, BrowsingHistory, Link, SocialGraph,
    TopicFrequencyVector, TopicModel,
};
use crate::error::{Error, Result};
use crate::linksel::{DecoyLink, LinkSelectConfig, LinkSelector, Population};
use crate::metrics::ObjectiveConfig;
use crate::seed;
use crate::socialsim::HistorySimulator;
use crate::topicsel::{greedy_topic_selection, AdditionPlan, GreedyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    None,
    Pbooster,
    Random,
    Justfriends,
    Isppolluter,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::None,
        Method::Pbooster,
        Method::Random,
        Method::Justfriends,
        Method::Isppolluter,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Pbooster => "pbooster",
            Method::Random => "random",
            Method::Justfriends => "justfriends",
            Method::Isppolluter => "isppolluter",
        }
    }

    /// Whether the output depends on lambda.
    pub fn uses_lambda(&self) -> bool {
        matches!(
            self,
            Method::Pbooster | Method::Random | Method::Justfriends
        )
    }

    /// Whether the output depends on the batch size.
    pub fn uses_batches(&self) -> bool {
        self.uses_lambda()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IspConfig {
    pub n_possible_call: u64,
    pub n_calls: u64,
}

impl Default for IspConfig {
    fn default() -> Self {
        Self {
            n_possible_call: 100,
            n_calls: 200,
        }
    }
}

impl IspConfig {
    /// `(n_calls - 1) * n_possible_call`.
    pub fn n_noise(&self) -> Result<u64> {
        if self.n_calls == 0 {
            return Err(Error::Config("n_calls must be >= 1".into()));
        }
        Ok((self.n_calls - 1) * self.n_possible_call)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnonymizerConfig {
    pub method: Method,
    pub lambda: f64,
    pub batch_size_h: usize,
    pub link: LinkSelectConfig,
    pub greedy: GreedyConfig,
    pub isp: IspConfig,
}

impl Default for AnonymizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Pbooster,
            lambda: 10.0,
            batch_size_h: 25,
            link: LinkSelectConfig::default(),
            greedy: GreedyConfig::default(),
            isp: IspConfig::default(),
        }
    }
}

impl AnonymizerConfig {
    pub fn validate(&self) -> Result<()> {
        ObjectiveConfig::new(self.lambda)?;
        if self.batch_size_h == 0 {
            return Err(Error::Config("batch size h must be >= 1".into()));
        }
        self.link.validate()?;
        self.greedy.validate()?;
        if self.method == Method::Isppolluter {
            self.isp.n_noise()?;
        }
        Ok(())
    }
}

/// A decoy with provenance: graph indices of the sampled user and the author.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddedLink {
    pub link: Link,
    pub source_user: usize,
    pub poster: usize,
    pub batch: usize,
    pub fallback: bool,
}

impl AddedLink {
    fn from_decoy(d: DecoyLink, batch: usize) -> Self {
        Self {
            link: d.link,
            source_user: d.source_user,
            poster: d.poster,
            batch,
            fallback: d.fallback,
        }
    }
}

/// Original history plus the decoys added to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatedHistory {
    pub original: BrowsingHistory,
    pub owner: usize,
    pub method: Method,
    pub lambda: f64,
    pub h: usize,
    pub added: Vec<AddedLink>,
    /// Batches whose topic selection hit `max_steps`.
    pub truncated_batches: usize,
}

impl ManipulatedHistory {
    pub fn unchanged(original: BrowsingHistory, owner: usize) -> Self {
        Self {
            original,
            owner,
            method: Method::None,
            lambda: 0.0,
            h: 0,
            added: Vec::new(),
            truncated_batches: 0,
        }
    }

    pub fn user(&self) -> &str {
        &self.original.user
    }

    /// The history an observer sees: original links followed by decoys.
    pub fn combined(&self) -> impl Iterator<Item = &Link> + '_ {
        self.original
            .links
            .iter()
            .chain(self.added.iter().map(|a| &a.link))
    }

    pub fn combined_history(&self) -> BrowsingHistory {
        BrowsingHistory::new(
            self.original.user.clone(),
            self.combined().cloned().collect(),
        )
    }

    pub fn combined_len(&self) -> usize {
        self.original.len() + self.added.len()
    }

    pub fn fallback_count(&self) -> usize {
        self.added.iter().filter(|a| a.fallback).count()
    }
}

fn batch_count(n: usize, h: usize) -> usize {
    n.div_ceil(h)
}

/// Runs the batched topic-selection protocol without choosing links.
///
/// Returns one plan per batch together with the number of truncated greedy runs. The decoys
/// PBooster adds have exactly the planned topics, so these plans are the ones
/// [`anonymize`] materializes.
pub fn plan_batches(
    history: &BrowsingHistory,
    model: &TopicModel,
    lambda: f64,
    h: usize,
    greedy: &GreedyConfig,
) -> Result<(Vec<AdditionPlan>, usize)> {
    if history.is_empty() {
        return Err(Error::Validation(format!(
            "history of `{}` is empty",
            history.user
        )));
    }
    if h == 0 {
        return Err(Error::Config("batch size h must be >= 1".into()));
    }
    let objective = ObjectiveConfig::new(lambda)?;
    let mut decoys = TopicFrequencyVector::zeros(model.m());
    let mut plans = Vec::new();
    let mut truncated = 0;
    for b in 0..batch_count(history.len(), h) {
        let end = ((b + 1) * h).min(history.len());
        let revealed = count_links(&history.links[..end], model)?;
        let current = revealed.plus(decoys.counts());
        let out = greedy_topic_selection(&current, &objective, greedy)?;
        if out.truncated {
            truncated += 1;
        }
        for (t, &a) in out.plan.additions().iter().enumerate() {
            decoys.add(t, a);
        }
        plans.push(out.plan);
    }
    Ok((plans, truncated))
}

/// Anonymizes one history according to `cfg.method`.
///
/// `owner` is the graph index of the history's author. The link-selection seed is taken from
/// `cfg.link.rng_seed`.
pub fn anonymize(
    history: &BrowsingHistory,
    owner: usize,
    graph: &SocialGraph,
    cfg: &AnonymizerConfig,
    simulator: &dyn HistorySimulator,
) -> Result<ManipulatedHistory> {
    cfg.validate()?;
    history.validate(graph.model())?;
    match cfg.method {
        Method::None => Ok(ManipulatedHistory::unchanged(history.clone(), owner)),
        Method::Pbooster => anonymize_batched(
            history,
            owner,
            graph,
            cfg,
            Population::NonFriends,
            simulator,
        ),
        Method::Justfriends => justfriends_baseline(history, owner, graph, cfg, simulator),
        Method::Random => {
            let (plans, _) = plan_batches(
                history,
                graph.model(),
                cfg.lambda,
                cfg.batch_size_h,
                &cfg.greedy,
            )?;
            let counts: Vec<u64> = plans.iter().map(AdditionPlan::total).collect();
            random_baseline(history, owner, graph, &counts, cfg, simulator)
        }
        Method::Isppolluter => {
            let mut rng = seed::rng(cfg.link.rng_seed);
            let pool = graph.link_pool();
            let mut out = isppolluter_baseline(history, owner, &cfg.isp, &pool, &mut rng)?;
            out.lambda = cfg.lambda;
            out.h = cfg.batch_size_h;
            Ok(out)
        }
    }
}

/// PBooster (or JustFriends, with [`Population::Friends`]) with incremental batching.
pub fn anonymize_batched(
    history: &BrowsingHistory,
    owner: usize,
    graph: &SocialGraph,
    cfg: &AnonymizerConfig,
    population: Population,
    simulator: &dyn HistorySimulator,
) -> Result<ManipulatedHistory> {
    let (plans, truncated) = plan_batches(
        history,
        graph.model(),
        cfg.lambda,
        cfg.batch_size_h,
        &cfg.greedy,
    )?;
    let mut added = Vec::new();
    if plans.iter().any(|p| !p.is_empty()) {
        let mut selector = LinkSelector::new(graph, owner, population, cfg.link, simulator)?;
        for (batch, plan) in plans.iter().enumerate() {
            for d in selector.select(plan)? {
                added.push(AddedLink::from_decoy(d, batch));
            }
        }
    }
    Ok(ManipulatedHistory {
        original: history.clone(),
        owner,
        method: match population {
            Population::NonFriends => Method::Pbooster,
            Population::Friends => Method::Justfriends,
        },
        lambda: cfg.lambda,
        h: cfg.batch_size_h,
        added,
        truncated_batches: truncated,
    })
}

pub fn justfriends_baseline(
    history: &BrowsingHistory,
    owner: usize,
    graph: &SocialGraph,
    cfg: &AnonymizerConfig,
    simulator: &dyn HistorySimulator,
) -> Result<ManipulatedHistory> {
    if graph.friends(owner).is_empty() {
        return Err(Error::NoCandidates(graph.name(owner).to_string()));
    }
    anonymize_batched(history, owner, graph, cfg, Population::Friends, simulator)
}

/// Adds `batch_counts[b]` topic-agnostic non-friend links in batch `b`.
///
/// The counts come from PBooster's own topic selection on the same history, so both methods
/// add the same number of links.
pub fn random_baseline(
    history: &BrowsingHistory,
    owner: usize,
    graph: &SocialGraph,
    batch_counts: &[u64],
    cfg: &AnonymizerConfig,
    simulator: &dyn HistorySimulator,
) -> Result<ManipulatedHistory> {
    let mut added = Vec::new();
    if batch_counts.iter().any(|&x| x > 0) {
        let mut selector =
            LinkSelector::new(graph, owner, Population::NonFriends, cfg.link, simulator)?;
        for (batch, &x) in batch_counts.iter().enumerate() {
            for d in selector.select_any(x as usize)? {
                added.push(AddedLink::from_decoy(d, batch));
            }
        }
    }
    Ok(ManipulatedHistory {
        original: history.clone(),
        owner,
        method: Method::Random,
        lambda: cfg.lambda,
        h: cfg.batch_size_h,
        added,
        truncated_batches: 0,
    })
}

/// Adds `(n_calls - 1) * n_possible_call` links drawn uniformly with replacement from `pool`
/// (links paired with their authors).
pub fn isppolluter_baseline(
    history: &BrowsingHistory,
    owner: usize,
    isp: &IspConfig,
    pool: &[(Link, usize)],
    rng: &mut seed::SeedRng,
) -> Result<ManipulatedHistory> {
    let n_noise = isp.n_noise()?;
    if n_noise > 0 && pool.is_empty() {
        return Err(Error::Validation(
            "ISPPolluter needs a non-empty link pool".into(),
        ));
    }
    let added = (0..n_noise)
        .map(|_| {
            let (link, poster) = pool.choose(rng).expect("non-empty");
            AddedLink {
                link: link.clone(),
                source_user: *poster,
                poster: *poster,
                batch: 0,
                fallback: false,
            }
        })
        .collect();
    Ok(ManipulatedHistory {
        original: history.clone(),
        owner,
        method: Method::Isppolluter,
        lambda: 0.0,
        h: 0,
        added,
        truncated_batches: 0,
    })
}

// ---------------------------------------------------------------------------
// JSON Lines output

#[derive(Debug, Serialize, Deserialize)]
struct AddedRecord {
    url: String,
    topic: usize,
    source_user: String,
    batch: usize,
    poster: String,
    #[serde(default)]
    fallback: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManipulatedRecord {
    user: String,
    method: Method,
    lambda: f64,
    h: usize,
    original_links: Vec<Link>,
    added_links: Vec<AddedRecord>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AnyHistoryRecord {
    Manipulated(ManipulatedRecord),
    Plain { user: String, links: Vec<Link> },
}

pub fn save_manipulated(
    path: &Path,
    histories: &[ManipulatedHistory],
    graph: &SocialGraph,
) -> Result<()> {
    write_jsonl(
        path,
        histories.iter().map(|mh| ManipulatedRecord {
            user: mh.user().to_string(),
            method: mh.method,
            lambda: mh.lambda,
            h: mh.h,
            original_links: mh.original.links.clone(),
            added_links: mh
                .added
                .iter()
                .map(|a| AddedRecord {
                    url: a.link.url.to_string(),
                    topic: a.link.topic,
                    source_user: graph.name(a.source_user).to_string(),
                    batch: a.batch,
                    poster: graph.name(a.poster).to_string(),
                    fallback: a.fallback,
                })
                .collect(),
        }),
    )
}

/// Loads either an anonymizer output file or a plain history file (treated as `method = none`).
///
/// `owner_of` maps a history id to its graph owner.
pub fn load_manipulated(
    path: &Path,
    graph: &SocialGraph,
    owner_of: impl Fn(&str) -> Result<usize>,
) -> Result<Vec<ManipulatedHistory>> {
    let model = graph.model();
    let mut out = Vec::new();
    for (no, line) in read_lines(path)? {
        let rec: AnyHistoryRecord = parse_record(path, no, &line)?;
        let located = |e: Error| match e {
            Error::Validation(m) => Error::Validation(format!("{}:{no}: {m}", path.display())),
            other => other,
        };
        let mh = match rec {
            AnyHistoryRecord::Plain { user, links } => {
                let h = BrowsingHistory::new(user, links);
                h.validate(model).map_err(located)?;
                let owner = owner_of(&h.user)?;
                ManipulatedHistory::unchanged(h, owner)
            }
            AnyHistoryRecord::Manipulated(r) => {
                let h = BrowsingHistory::new(r.user, r.original_links);
                h.validate(model).map_err(located)?;
                let owner = owner_of(&h.user)?;
                let mut added = Vec::with_capacity(r.added_links.len());
                for a in r.added_links {
                    let link = Link::new(a.url, a.topic);
                    model.check_link(&link).map_err(located)?;
                    added.push(AddedLink {
                        link,
                        source_user: graph.require_user(&a.source_user)?,
                        poster: graph.require_user(&a.poster)?,
                        batch: a.batch,
                        fallback: a.fallback,
                    });
                }
                ManipulatedHistory {
                    original: h,
                    owner,
                    method: r.method,
                    lambda: r.lambda,
                    h: r.h,
                    added,
                    truncated_batches: 0,
                }
            }
        };
        out.push(mh);
    }
    Ok(out)
}
