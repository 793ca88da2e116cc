//! Shared data types: topics, links, browsing histories, topic counts and the social graph,
//! plus loading and saving of the JSON Lines file formats.
//!
//! Each link carries one hard topic label. Histories keep visit order and may contain the same
//! URL more than once; every visit counts toward the topic-frequency vector.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The set of learned topics, identified by dense ids `0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicModel {
    m: usize,
}

impl TopicModel {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Validation(
                "topic model needs at least one topic".into(),
            ));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn topic_ids(&self) -> std::ops::Range<usize> {
        0..self.m
    }

    pub fn check_link(&self, link: &Link) -> Result<()> {
        if link.url.is_empty() {
            return Err(Error::Validation("link with empty url".into()));
        }
        if link.topic >= self.m {
            return Err(Error::Validation(format!(
                "link `{}` has topic {} but the model has only {} topics",
                link.url, link.topic, self.m
            )));
        }
        Ok(())
    }
}

/// A visited or posted URL and its topic label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub url: Arc<str>,
    pub topic: usize,
}

impl Link {
    pub fn new(url: impl Into<Arc<str>>, topic: usize) -> Self {
        Self {
            url: url.into(),
            topic,
        }
    }
}

/// Deterministic stand-in for a topic model: hashes the URL into `0..m`.
///
/// Only meant for fixtures; real pipelines ingest precomputed labels.
pub fn hash_topic(url: &str, model: &TopicModel) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in url.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (crate::seed::splitmix64(h) % model.m() as u64) as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowsingHistory {
    pub user: String,
    pub links: Vec<Link>,
}

impl BrowsingHistory {
    pub fn new(user: impl Into<String>, links: Vec<Link>) -> Self {
        Self {
            user: user.into(),
            links,
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn validate(&self, model: &TopicModel) -> Result<()> {
        for link in &self.links {
            model
                .check_link(link)
                .map_err(|e| Error::Validation(format!("history of `{}`: {e}", self.user)))?;
        }
        Ok(())
    }
}

/// Per-topic link counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopicFrequencyVector(Vec<u64>);

impl TopicFrequencyVector {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn add(&mut self, topic: usize, n: u64) {
        self.0[topic] += n;
    }

    /// Componentwise sum with an addition vector of the same length.
    pub fn plus(&self, additions: &[u64]) -> Self {
        debug_assert_eq!(self.0.len(), additions.len());
        Self(self.0.iter().zip(additions).map(|(c, a)| c + a).collect())
    }
}

/// Normalized topic probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution(Vec<f64>);

impl TopicDistribution {
    /// Builds a distribution from raw probabilities, checking non-negativity and unit mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Validation("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Validation(
                "distribution has a negative or non-finite component".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "distribution sums to {sum}, expected 1"
            )));
        }
        Ok(Self(probs))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }
}

pub fn count_topics(history: &BrowsingHistory, model: &TopicModel) -> Result<TopicFrequencyVector> {
    count_links(&history.links, model)
}

pub fn count_links<'a>(
    links: impl IntoIterator<Item = &'a Link>,
    model: &TopicModel,
) -> Result<TopicFrequencyVector> {
    let mut counts = TopicFrequencyVector::zeros(model.m());
    for link in links {
        model.check_link(link)?;
        counts.add(link.topic, 1);
    }
    Ok(counts)
}

pub fn normalize(counts: &TopicFrequencyVector) -> Result<TopicDistribution> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptyDistribution);
    }
    let total = total as f64;
    Ok(TopicDistribution(
        counts.counts().iter().map(|&c| c as f64 / total).collect(),
    ))
}

/// Users, symmetric friendships and the links each user posted.
///
/// Users are addressed by dense indices in insertion order; friend lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    model: TopicModel,
    names: Vec<String>,
    index: HashMap<String, usize>,
    friends: Vec<Vec<usize>>,
    posts: Vec<Vec<Link>>,
}

impl SocialGraph {
    /// Builds a graph from index-based adjacency, validating every invariant.
    pub fn new(
        model: TopicModel,
        names: Vec<String>,
        friends: Vec<BTreeSet<usize>>,
        posts: Vec<Vec<Link>>,
    ) -> Result<Self> {
        let n = names.len();
        if friends.len() != n || posts.len() != n {
            return Err(Error::Validation(
                "graph users, friend lists and posts differ in length".into(),
            ));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Validation(format!("user #{i} has an empty id")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate user `{name}`")));
            }
        }
        for (u, fs) in friends.iter().enumerate() {
            for &v in fs {
                if v >= n {
                    return Err(Error::Validation(format!(
                        "user `{}` lists a friend index {v} outside the graph",
                        names[u]
                    )));
                }
                if v == u {
                    return Err(Error::Validation(format!(
                        "user `{}` lists themself as a friend",
                        names[u]
                    )));
                }
                if !friends[v].contains(&u) {
                    return Err(Error::Validation(format!(
                        "asymmetric friendship: `{}` lists `{}` but not vice versa",
                        names[u], names[v]
                    )));
                }
            }
        }
        for (u, ps) in posts.iter().enumerate() {
            for link in ps {
                model
                    .check_link(link)
                    .map_err(|e| Error::Validation(format!("post of `{}`: {e}", names[u])))?;
            }
        }
        Ok(Self {
            model,
            names,
            index,
            friends: friends
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            posts,
        })
    }

    pub fn model(&self) -> &TopicModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, user: usize) -> &str {
        &self.names[user]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn user_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require_user(&self, name: &str) -> Result<usize> {
        self.user_index(name)
            .ok_or_else(|| Error::UnknownUser(name.to_string()))
    }

    pub fn friends(&self, user: usize) -> &[usize] {
        &self.friends[user]
    }

    pub fn are_friends(&self, a: usize, b: usize) -> bool {
        self.friends[a].binary_search(&b).is_ok()
    }

    pub fn posts(&self, user: usize) -> &[Link] {
        &self.posts[user]
    }

    /// Number of distinct URLs posted anywhere in the graph.
    pub fn link_universe_size(&self) -> usize {
        let mut seen: HashSet<&str> = HashSet::new();
        for ps in &self.posts {
            for l in ps {
                seen.insert(&l.url);
            }
        }
        seen.len()
    }

    /// Every distinct posted link with its first poster, in user then post order.
    pub fn link_pool(&self) -> Vec<(Link, usize)> {
        let mut seen: HashSet<&str> = HashSet::new();
        let mut pool = Vec::new();
        for (u, ps) in self.posts.iter().enumerate() {
            for l in ps {
                if seen.insert(&l.url) {
                    pool.push((l.clone(), u));
                }
            }
        }
        pool
    }
}

// ---------------------------------------------------------------------------
// JSON Lines formats

#[derive(Debug, Serialize, Deserialize)]
struct TopicHeader {
    m: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoryRecord {
    user: String,
    links: Vec<Link>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    user: String,
    friends: Vec<String>,
    posts: Vec<Link>,
}

/// Reads a newline-delimited file, yielding `(line_number, line)` for non-blank lines.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

pub(crate) fn parse_record<T: serde::de::DeserializeOwned>(
    path: &Path,
    line_no: usize,
    line: &str,
) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message: e.to_string(),
    })
}

pub(crate) fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(&r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn located(path: &Path, line: usize, e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("{}:{line}: {msg}", path.display())),
        other => other,
    }
}

/// Loads a topic assignment file: a `{"m": int}` header followed by `{"url","topic"}` records.
pub fn load_topic_assignments(path: &Path) -> Result<(TopicModel, Vec<Link>)> {
    let lines = read_lines(path)?;
    let Some(((first_no, first), rest)) = lines.split_first() else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing {\"m\": int} header".into(),
        });
    };
    let header: TopicHeader = parse_record(path, *first_no, first)?;
    let model = TopicModel::new(header.m).map_err(|e| located(path, *first_no, e))?;
    let mut links = Vec::with_capacity(rest.len());
    for (no, line) in rest {
        let link: Link = parse_record(path, *no, line)?;
        model.check_link(&link).map_err(|e| located(path, *no, e))?;
        links.push(link);
    }
    Ok((model, links))
}

pub fn save_topic_assignments(path: &Path, model: &TopicModel, links: &[Link]) -> Result<()> {
    let header = serde_json::to_value(TopicHeader { m: model.m() }).expect("header");
    let body = links.iter().map(|l| serde_json::to_value(l).expect("link"));
    write_jsonl(path, std::iter::once(header).chain(body))
}

pub fn load_histories(path: &Path, model: &TopicModel) -> Result<Vec<BrowsingHistory>> {
    let mut out = Vec::new();
    for (no, line) in read_lines(path)? {
        let rec: HistoryRecord = parse_record(path, no, &line)?;
        let h = BrowsingHistory::new(rec.user, rec.links);
        h.validate(model).map_err(|e| located(path, no, e))?;
        out.push(h);
    }
    Ok(out)
}

pub fn save_histories(path: &Path, histories: &[BrowsingHistory]) -> Result<()> {
    write_jsonl(
        path,
        histories.iter().map(|h| HistoryRecord {
            user: h.user.clone(),
            links: h.links.clone(),
        }),
    )
}

pub fn load_graph(path: &Path, model: &TopicModel) -> Result<SocialGraph> {
    let mut records = Vec::new();
    for (no, line) in read_lines(path)? {
        let rec: GraphRecord = parse_record(path, no, &line)?;
        records.push((no, rec));
    }
    let mut index = HashMap::new();
    for (i, (no, rec)) in records.iter().enumerate() {
        if index.insert(rec.user.clone(), i).is_some() {
            return Err(Error::Validation(format!(
                "{}:{no}: duplicate user `{}`",
                path.display(),
                rec.user
            )));
        }
    }
    let mut friends = Vec::with_capacity(records.len());
    for (no, rec) in &records {
        let mut set = BTreeSet::new();
        for f in &rec.friends {
            let Some(&j) = index.get(f) else {
                return Err(Error::Validation(format!(
                    "{}:{no}: user `{}` lists unknown friend `{f}`",
                    path.display(),
                    rec.user
                )));
            };
            set.insert(j);
        }
        friends.push(set);
    }
    let (names, posts): (Vec<_>, Vec<_>) =
        records.into_iter().map(|(_, r)| (r.user, r.posts)).unzip();
    SocialGraph::new(*model, names, friends, posts)
}

pub fn save_graph(path: &Path, graph: &SocialGraph) -> Result<()> {
    write_jsonl(
        path,
        (0..graph.len()).map(|u| GraphRecord {
            user: graph.name(u).to_string(),
            friends: graph
                .friends(u)
                .iter()
                .map(|&v| graph.name(v).to_string())
                .collect(),
            posts: graph.posts(u).to_vec(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn links(topics: &[usize]) -> Vec<Link> {
        topics
            .iter()
            .enumerate()
            .map(|(i, &t)| Link::new(format!("l{i}"), t))
            .collect()
    }

    #[test]
    fn count_topics_examples() {
        let m3 = TopicModel::new(3).unwrap();
        let h = BrowsingHistory::new("u", links(&[0, 0, 1]));
        assert_eq!(count_topics(&h, &m3).unwrap().counts(), &[2, 1, 0]);

        let m2 = TopicModel::new(2).unwrap();
        let empty = BrowsingHistory::new("u", vec![]);
        assert_eq!(count_topics(&empty, &m2).unwrap().counts(), &[0, 0]);

        let m20 = TopicModel::new(20).unwrap();
        let h = BrowsingHistory::new("u", links(&[4; 100]));
        let c = count_topics(&h, &m20).unwrap();
        let mut expected = vec![0; 20];
        expected[4] = 100;
        assert_eq!(c.counts(), expected.as_slice());
    }

    #[test]
    fn count_topics_rejects_out_of_range_and_names_link() {
        let m = TopicModel::new(2).unwrap();
        let h = BrowsingHistory::new("u", vec![Link::new("bad-link", 2)]);
        let err = count_topics(&h, &m).unwrap_err().to_string();
        assert!(err.contains("bad-link"), "{err}");
    }

    #[test]
    fn normalize_examples() {
        let p = normalize(&TopicFrequencyVector::from_counts(vec![2, 1, 0])).unwrap();
        assert_eq!(p.probs(), &[2.0 / 3.0, 1.0 / 3.0, 0.0]);
        let p = normalize(&TopicFrequencyVector::from_counts(vec![5, 5, 5, 5])).unwrap();
        assert_eq!(p.probs(), &[0.25; 4]);
        assert!(matches!(
            normalize(&TopicFrequencyVector::from_counts(vec![0, 0])),
            Err(Error::EmptyDistribution)
        ));
    }

    #[test]
    fn topic_model_rejects_zero_topics() {
        assert!(TopicModel::new(0).is_err());
        assert_eq!(TopicModel::new(4).unwrap().topic_ids(), 0..4);
    }

    #[test]
    fn graph_rejects_self_edge_and_asymmetry() {
        let m = TopicModel::new(2).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let self_edge = vec![BTreeSet::from([0]), BTreeSet::new()];
        assert!(SocialGraph::new(m, names.clone(), self_edge, vec![vec![], vec![]]).is_err());
        let asym = vec![BTreeSet::from([1]), BTreeSet::new()];
        assert!(SocialGraph::new(m, names.clone(), asym, vec![vec![], vec![]]).is_err());
        let ok = vec![BTreeSet::from([1]), BTreeSet::from([0])];
        let g = SocialGraph::new(m, names, ok, vec![vec![Link::new("x", 1)], vec![]]).unwrap();
        assert!(g.are_friends(0, 1));
        assert_eq!(g.link_universe_size(), 1);
    }

    #[test]
    fn hash_topic_is_in_range_and_stable() {
        let m = TopicModel::new(7).unwrap();
        for i in 0..100 {
            let url = format!("https://example.org/{i}");
            let t = hash_topic(&url, &m);
            assert!(t < 7);
            assert_eq!(t, hash_topic(&url, &m));
        }
    }
}
