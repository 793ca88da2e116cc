//! Utility evaluation: k-means over users' topic distributions scored by the silhouette
//! coefficient, and per-user privacy / utility-gain pairs.

use std::collections::HashMap;
use std::path::Path;

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anonymizers::{ManipulatedHistory, Method};
use crate::domain::{count_links, normalize, BrowsingHistory, TopicModel};
use crate::error::{Error, Result};
use crate::metrics::{privacy, utility_gain};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub rng_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 5,
            restarts: 10,
            max_iters: 300,
            rng_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config("k must be >= 2".into()));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::Config("restarts and max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares of the final assignment.
    pub inertia: f64,
    /// Inertia after every assignment step of the winning run.
    pub trace: Vec<f64>,
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_seed(points: &[Vec<f64>], k: usize, rng: &mut seed::SeedRng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points.choose(rng).expect("non-empty").clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize) -> Clustering {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iters {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            inertia += d;
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignment) {
            sizes[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
            }
        }
        for j in 0..k {
            if sizes[j] == 0 {
                // Reseed at the point farthest from its own centroid.
                let far = points
                    .iter()
                    .zip(&assignment)
                    .enumerate()
                    .map(|(i, (p, &a))| (i, sq_dist(p, &centroids[a])))
                    .fold((0, f64::NEG_INFINITY), |best, cur| {
                        if cur.1 > best.1 {
                            cur
                        } else {
                            best
                        }
                    })
                    .0;
                centroids[j] = points[far].clone();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &j)| sq_dist(p, &centroids[j]))
        .sum();
    Clustering {
        assignment,
        centroids,
        inertia,
        trace,
    }
}

/// Lloyd's algorithm with k-means++ seeding; keeps the restart with the lowest inertia.
pub fn kmeans(points: &[Vec<f64>], cfg: &EvalConfig) -> Result<Clustering> {
    cfg.validate()?;
    if points.len() < cfg.k {
        return Err(Error::Clustering(format!(
            "{} points cannot form {} clusters",
            points.len(),
            cfg.k
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Clustering("points differ in dimension".into()));
    }
    let mut best: Option<Clustering> = None;
    for r in 0..cfg.restarts {
        let mut rng = seed::rng(seed::derive_indexed(cfg.rng_seed, "kmeans", r as u64));
        let init = plus_plus_seed(points, cfg.k, &mut rng);
        let run = lloyd(points, init, cfg.max_iters);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Mean silhouette coefficient with Euclidean distance.
///
/// Points in singleton clusters contribute 0. Fails when fewer than two clusters are
/// non-empty.
pub fn silhouette(points: &[Vec<f64>], assignment: &[usize]) -> Result<f64> {
    if points.len() != assignment.len() {
        return Err(Error::LengthMismatch {
            left: points.len(),
            right: assignment.len(),
        });
    }
    let k = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Clustering(
            "silhouette needs at least two non-empty clusters".into(),
        ));
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for (i, p) in points.iter().enumerate() {
        let own = assignment[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[assignment[j]] += dist(p, q);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub user: String,
    pub method: Method,
    pub lambda: f64,
    pub h: usize,
    pub history_size: usize,
    pub privacy_original: f64,
    pub privacy: f64,
    pub utility_gain: f64,
}

/// Privacy of each manipulated history and its utility gain `1 - utility_loss` relative to
/// the matching original.
pub fn tradeoff_report(
    originals: &[BrowsingHistory],
    manipulated: &[ManipulatedHistory],
    model: &TopicModel,
) -> Result<Vec<TradeoffRow>> {
    if originals.len() != manipulated.len() {
        return Err(Error::Validation(format!(
            "{} original histories but {} manipulated",
            originals.len(),
            manipulated.len()
        )));
    }
    let by_user: HashMap<&str, &BrowsingHistory> =
        originals.iter().map(|h| (h.user.as_str(), h)).collect();
    manipulated
        .iter()
        .map(|mh| {
            let orig = by_user.get(mh.user()).ok_or_else(|| {
                Error::Validation(format!("no original history for `{}`", mh.user()))
            })?;
            let p = normalize(&count_links(&orig.links, model)?)?;
            let p_hat = normalize(&count_links(mh.combined(), model)?)?;
            Ok(TradeoffRow {
                user: mh.user().to_string(),
                method: mh.method,
                lambda: mh.lambda,
                h: mh.h,
                history_size: orig.len(),
                privacy_original: privacy(&p),
                privacy: privacy(&p_hat),
                utility_gain: utility_gain(&p, &p_hat)?,
            })
        })
        .collect()
}

/// Topic distributions of the combined (observed) histories.
pub fn observed_distributions(
    manipulated: &[ManipulatedHistory],
    model: &TopicModel,
) -> Result<Vec<Vec<f64>>> {
    manipulated
        .iter()
        .map(|mh| {
            Ok(normalize(&count_links(mh.combined(), model)?)?
                .probs()
                .to_vec())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: Method,
    pub lambda: f64,
    pub h: usize,
    pub history_size: usize,
    /// `None` when clustering collapsed into a single non-empty cluster.
    pub silhouette: Option<f64>,
    pub rows: Vec<TradeoffRow>,
}

/// Clusters one method cohort and collects its trade-off rows.
pub fn evaluate_cohort(
    manipulated: &[ManipulatedHistory],
    model: &TopicModel,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let first = manipulated
        .first()
        .ok_or_else(|| Error::Validation("empty cohort".into()))?;
    let points = observed_distributions(manipulated, model)?;
    let clustering = kmeans(&points, cfg)?;
    let silhouette = match silhouette(&points, &clustering.assignment) {
        Ok(s) => Some(s),
        Err(Error::Clustering(_)) => None,
        Err(e) => return Err(e),
    };
    let originals: Vec<BrowsingHistory> =
        manipulated.iter().map(|mh| mh.original.clone()).collect();
    Ok(EvalReport {
        method: first.method,
        lambda: first.lambda,
        h: first.h,
        history_size: first.original.len(),
        silhouette,
        rows: tradeoff_report(&originals, manipulated, model)?,
    })
}

/// Splits histories into cohorts sharing `(method, lambda, h, history_size)`, in order of first
/// appearance.
pub fn group_cohorts(manipulated: Vec<ManipulatedHistory>) -> Vec<Vec<ManipulatedHistory>> {
    let mut keys: HashMap<(Method, u64, usize, usize), usize> = HashMap::new();
    let mut groups: Vec<Vec<ManipulatedHistory>> = Vec::new();
    for mh in manipulated {
        let key = (mh.method, mh.lambda.to_bits(), mh.h, mh.original.len());
        let slot = *keys.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(mh);
    }
    groups
}

#[derive(Serialize)]
struct SilhouetteRecord {
    method: Method,
    lambda: f64,
    h: usize,
    history_size: usize,
    n_users: usize,
    silhouette: Option<f64>,
}

#[derive(Serialize)]
struct ScatterRecord<'a> {
    user: &'a str,
    method: Method,
    lambda: f64,
    h: usize,
    privacy: f64,
    utility_gain: f64,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// One row per cohort; an undefined silhouette is written as an empty field.
pub fn write_silhouette_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in reports {
        w.serialize(SilhouetteRecord {
            method: r.method,
            lambda: r.lambda,
            h: r.h,
            history_size: r.history_size,
            n_users: r.rows.len(),
            silhouette: r.silhouette,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Privacy vs utility gain, one row per history.
pub fn write_scatter_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in reports.iter().flat_map(|r| &r.rows) {
        w.serialize(ScatterRecord {
            user: &row.user,
            method: row.method,
            lambda: row.lambda,
            h: row.h,
            privacy: row.privacy,
            utility_gain: row.utility_gain,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Link;
    use approx::assert_abs_diff_eq;

    fn cfg(k: usize, seed: u64) -> EvalConfig {
        EvalConfig {
            k,
            rng_seed: seed,
            ..EvalConfig::default()
        }
    }

    #[test]
    fn two_far_groups_are_recovered() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![10.0, 10.0],
            vec![0.1, 0.0],
            vec![10.0, 10.1],
        ];
        let c = kmeans(&pts, &cfg(2, 1)).unwrap();
        // Exhaustive check: of the 2^4 labelings, the natural split has minimal inertia.
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..15 {
            let groups: Vec<Vec<&Vec<f64>>> = (0..2)
                .map(|g| {
                    pts.iter()
                        .enumerate()
                        .filter(|(i, _)| (mask >> i & 1) as usize == g)
                        .map(|(_, p)| p)
                        .collect()
                })
                .collect();
            let inertia: f64 = groups
                .iter()
                .map(|g| {
                    let mean: Vec<f64> = (0..2)
                        .map(|d| g.iter().map(|p| p[d]).sum::<f64>() / g.len() as f64)
                        .collect();
                    g.iter().map(|p| sq_dist(p, &mean)).sum::<f64>()
                })
                .sum();
            if inertia < best.0 {
                best = (inertia, mask);
            }
        }
        assert!(best.1 == 0b1010 || best.1 == 0b0101);
        assert_eq!(c.assignment[0], c.assignment[2]);
        assert_eq!(c.assignment[1], c.assignment[3]);
        assert_ne!(c.assignment[0], c.assignment[1]);
        assert_abs_diff_eq!(c.inertia, best.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_points_degenerate() {
        let pts = vec![vec![0.5, 0.5]; 6];
        let c = kmeans(&pts, &cfg(2, 3)).unwrap();
        assert_eq!(c.inertia, 0.0);
        assert!(silhouette(&pts, &c.assignment).is_err());
    }

    #[test]
    fn kmeans_is_seeded_and_inertia_non_increasing() {
        let mut rng = seed::rng(4);
        let pts: Vec<Vec<f64>> = (0..120)
            .map(|i| {
                let centre = (i % 4) as f64 * 3.0;
                vec![centre + rng.random::<f64>(), rng.random::<f64>() - centre]
            })
            .collect();
        let a = kmeans(&pts, &cfg(4, 9)).unwrap();
        let b = kmeans(&pts, &cfg(4, 9)).unwrap();
        assert_eq!(a, b);
        for w in a.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0]; 3];
        assert!(kmeans(&pts, &cfg(5, 0)).is_err());
    }

    #[test]
    fn silhouette_two_tight_clusters() {
        let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let s = silhouette(&pts, &[0, 0, 1, 1]).unwrap();
        // Hand computation: a = 0.1 for every point; b = 10.05, 9.95, 9.95, 10.05.
        let expected = ((10.05 - 0.1) / 10.05 + (9.95 - 0.1) / 9.95) / 2.0;
        assert_abs_diff_eq!(s, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.99, epsilon = 0.005);
        // Relabeling does not matter.
        assert_eq!(silhouette(&pts, &[1, 1, 0, 0]).unwrap(), s);
    }

    #[test]
    fn silhouette_equidistant_point_scores_zero() {
        // Point 1 sits at 1.0: mean distance to its own cluster {0} is 1, to the other {2} is 1.
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let s = silhouette(&pts, &[0, 0, 1]).unwrap();
        // Point 0: a = 1, b = 2 -> 0.5. Point 1: a = 1, b = 1 -> 0. Point 2: singleton -> 0.
        assert_abs_diff_eq!(s, 0.5 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn tradeoff_identity_and_disjoint() {
        let model = TopicModel::new(2).unwrap();
        let h = BrowsingHistory::new("x", vec![Link::new("a", 0), Link::new("b", 0)]);
        let same = ManipulatedHistory::unchanged(h.clone(), 0);
        let rows = tradeoff_report(std::slice::from_ref(&h), &[same], &model).unwrap();
        assert_eq!(rows[0].utility_gain, 1.0);
        assert_eq!(rows[0].privacy, rows[0].privacy_original);

        // Observed history shares no topic with the reference one.
        let disjoint =
            ManipulatedHistory::unchanged(BrowsingHistory::new("x", vec![Link::new("c", 1)]), 0);
        let rows = tradeoff_report(&[h], &[disjoint], &model).unwrap();
        assert_abs_diff_eq!(rows[0].utility_gain, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tradeoff_user_mismatch() {
        let model = TopicModel::new(2).unwrap();
        let h = BrowsingHistory::new("x", vec![Link::new("a", 0)]);
        let other =
            ManipulatedHistory::unchanged(BrowsingHistory::new("y", vec![Link::new("a", 0)]), 0);
        assert!(tradeoff_report(&[h], &[other], &model).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn silhouette_bounded(
                pts in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 6..30),
                seed in 0u64..1000,
            ) {
                let c = kmeans(&pts, &cfg(3, seed)).unwrap();
                if let Ok(s) = silhouette(&pts, &c.assignment) {
                    prop_assert!((-1.0..=1.0).contains(&s));
                }
            }
        }
    }
}
