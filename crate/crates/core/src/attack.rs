//! Linkage attack: rank every social-graph user by how likely their feed generated a history.
//!
//! A candidate's feed is the set of URLs posted by the candidate's friends. Each history link is
//! modeled as a click drawn from a two-part mixture: with probability `1 - delta` a uniform
//! pick from the candidate's feed, otherwise a uniform pick from the `L` distinct URLs posted
//! anywhere in the graph. The log-likelihood of a history of `n` links of which `k` are in a
//! feed of size `F` is
//!
//! ```text
//! k * ln((1 - delta) / F + delta / L) + (n - k) * ln(delta / L)
//! ```
//!
//! so candidates win by covering many history links with a small feed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::anonymizers::{ManipulatedHistory, Method};
use crate::domain::{Link, SocialGraph};
use crate::error::{Error, Result};
use crate::socialsim::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Weight of the uniform background component.
    pub delta: f64,
    pub top_k: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            top_k: 10,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Links posted by the user's friends, deduplicated by URL and sorted by URL.
pub fn recommendation_set(graph: &SocialGraph, user: &str) -> Result<Vec<Link>> {
    let u = graph.require_user(user)?;
    let mut feed: BTreeMap<&str, &Link> = BTreeMap::new();
    for &f in graph.friends(u) {
        for l in graph.posts(f) {
            feed.entry(&l.url).or_insert(l);
        }
    }
    Ok(feed.into_values().cloned().collect())
}

/// Log-likelihood that `history` was generated by clicking on `feed`.
///
/// `universe` is the number of distinct URLs in the graph.
pub fn score_candidate<'a>(
    history: impl IntoIterator<Item = &'a Link>,
    feed: &HashSet<&str>,
    universe: usize,
    cfg: &AttackConfig,
) -> f64 {
    let background = cfg.delta / universe.max(1) as f64;
    let in_feed = if feed.is_empty() {
        0.0
    } else {
        (1.0 - cfg.delta) / feed.len() as f64
    };
    history
        .into_iter()
        .map(|l| {
            let hit = if feed.contains(&*l.url) { in_feed } else { 0.0 };
            (hit + background).ln()
        })
        .sum()
}

/// Precomputed feeds of every graph user, inverted by URL.
#[derive(Debug, Clone)]
pub struct FeedIndex {
    feed_sizes: Vec<usize>,
    holders: HashMap<Arc<str>, Vec<usize>>,
    universe: usize,
}

impl FeedIndex {
    pub fn new(graph: &SocialGraph) -> Self {
        let mut holders: HashMap<Arc<str>, Vec<usize>> = HashMap::new();
        let mut feed_sizes = Vec::with_capacity(graph.len());
        for c in 0..graph.len() {
            let mut feed: HashSet<&Arc<str>> = HashSet::new();
            for &f in graph.friends(c) {
                for l in graph.posts(f) {
                    feed.insert(&l.url);
                }
            }
            feed_sizes.push(feed.len());
            for url in feed {
                holders.entry(url.clone()).or_default().push(c);
            }
        }
        Self {
            feed_sizes,
            holders,
            universe: graph.link_universe_size(),
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn feed_size(&self, candidate: usize) -> usize {
        self.feed_sizes[candidate]
    }

    /// Number of history links (with multiplicity) inside each candidate's feed.
    pub fn hits<'a>(&self, history: impl IntoIterator<Item = &'a Link>) -> Vec<u64> {
        let mut hits = vec![0u64; self.feed_sizes.len()];
        for l in history {
            if let Some(cs) = self.holders.get(&l.url) {
                for &c in cs {
                    hits[c] += 1;
                }
            }
        }
        hits
    }

    /// Per-candidate score split as `(gain, common)`: the log-likelihood is `gain + common`,
    /// with `common = n * ln(delta / L)` shared by every candidate.
    pub fn scores<'a>(
        &self,
        history: impl IntoIterator<Item = &'a Link>,
        cfg: &AttackConfig,
    ) -> (Vec<f64>, f64) {
        let mut n = 0u64;
        let hits = self.hits(history.into_iter().inspect(|_| n += 1));
        let background = cfg.delta / self.universe.max(1) as f64;
        let ln_bg = background.ln();
        let gains = hits
            .iter()
            .zip(&self.feed_sizes)
            .map(|(&k, &size)| {
                if k == 0 || size == 0 {
                    0.0
                } else {
                    let hit = (1.0 - cfg.delta) / size as f64 + background;
                    k as f64 * (hit.ln() - ln_bg)
                }
            })
            .collect();
        (gains, n as f64 * ln_bg)
    }
}

/// 1-based position of `target` when candidates are sorted by descending score, ties broken by
/// ascending user id.
pub fn rank_of(target: usize, gains: &[f64], graph: &SocialGraph) -> usize {
    let s = gains[target];
    let name = graph.name(target);
    1 + gains
        .iter()
        .enumerate()
        .filter(|&(c, &g)| g > s || (g == s && c != target && graph.name(c) < name))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserAttack {
    pub user: String,
    pub method: Method,
    pub lambda: f64,
    pub h: usize,
    pub history_size: usize,
    pub true_rank: usize,
    pub success_top_k: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub per_user: Vec<UserAttack>,
    pub n_success: usize,
    pub n_total: usize,
    pub top_k: usize,
}

impl AttackReport {
    pub fn from_users(per_user: Vec<UserAttack>, top_k: usize) -> Self {
        let n_success = per_user.iter().filter(|u| u.success_top_k).count();
        Self {
            n_total: per_user.len(),
            per_user,
            n_success,
            top_k,
        }
    }

    /// `100 * n_success / n_total`, or 0 for an empty report.
    pub fn success_rate(&self) -> f64 {
        success_rate(self.n_success, self.n_total)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for u in &self.per_user {
            w.serialize(u)?;
        }
        w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))
    }
}

pub fn success_rate(n_success: usize, n_total: usize) -> f64 {
    if n_total == 0 {
        0.0
    } else {
        100.0 * n_success as f64 / n_total as f64
    }
}

pub fn deanonymize(
    histories: &[ManipulatedHistory],
    graph: &SocialGraph,
    truth: &GroundTruth,
    cfg: &AttackConfig,
) -> Result<AttackReport> {
    let index = FeedIndex::new(graph);
    deanonymize_with(&index, histories, graph, truth, cfg)
}

/// Like [`deanonymize`] with a prebuilt feed index.
pub fn deanonymize_with(
    index: &FeedIndex,
    histories: &[ManipulatedHistory],
    graph: &SocialGraph,
    truth: &GroundTruth,
    cfg: &AttackConfig,
) -> Result<AttackReport> {
    cfg.validate()?;
    let mut per_user = Vec::with_capacity(histories.len());
    for mh in histories {
        let target = truth
            .get(mh.user())
            .ok_or_else(|| Error::Validation(format!("no ground truth for `{}`", mh.user())))?;
        let target = graph.require_user(target)?;
        let (gains, _) = index.scores(mh.combined(), cfg);
        let rank = rank_of(target, &gains, graph);
        per_user.push(UserAttack {
            user: mh.user().to_string(),
            method: mh.method,
            lambda: mh.lambda,
            h: mh.h,
            history_size: mh.original.len(),
            true_rank: rank,
            success_top_k: rank <= cfg.top_k,
        });
    }
    Ok(AttackReport::from_users(per_user, cfg.top_k))
}
