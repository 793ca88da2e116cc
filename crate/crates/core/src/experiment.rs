//! Experiment grid: simulate, anonymize per (method, lambda, h, size) cell, attack, evaluate.
//!
//! A replicate is one simulated dataset. Inside a replicate every cell is independent and gets
//! its own seeds, derived from the replicate seed and a textual cell key, so results do not
//! depend on scheduling or on which other cells are in the grid. Methods that ignore lambda and
//! h (`none`, `isppolluter`) produce a single cell per size, reported with `lambda = 0` and
//! `h = 0`.
//!
//! [`write_reports`] emits these CSV tables:
//!
//! | file | one row per |
//! |---|---|
//! | `cells.csv` | replicate x cell: success rate, silhouette, mean privacy / utility, decoys |
//! | `summary.csv` | cell, averaged over replicates (success vs lambda, silhouette vs lambda, vs h) |
//! | `attack_users.csv` | replicate x cell x history: rank of the true owner |
//! | `scatter.csv` | replicate x cell x history: privacy and utility gain |
//! | `silhouette.csv` | replicate x cell |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anonymizers::{anonymize, AnonymizerConfig, IspConfig, ManipulatedHistory, Method};
use crate::attack::{deanonymize_with, AttackConfig, FeedIndex, UserAttack};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_cohort, EvalConfig, TradeoffRow};
use crate::linksel::LinkSelectConfig;
use crate::seed;
use crate::socialsim::{generate_dataset, Dataset, FeedSimulator, SimConfig};
use crate::topicsel::GreedyConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every other seed is derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub replicates: usize,
    pub sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub methods: Vec<Method>,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// `rng_seed` is ignored and derived from the master seed.
    pub sim: SimConfig,
    /// `rng_seed` is ignored and derived per history.
    pub link: LinkSelectConfig,
    pub greedy: GreedyConfig,
    pub isp: IspConfig,
    pub attack: AttackConfig,
    /// `rng_seed` is ignored and derived per replicate and history size.
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("results"),
            replicates: 1,
            sizes: vec![30, 50, 100],
            lambdas: vec![0.0, 0.1, 0.5, 1.0, 10.0, 20.0, 50.0, 70.0, 100.0],
            batch_sizes: vec![25],
            methods: Method::ALL.to_vec(),
            jobs: None,
            sim: SimConfig::default(),
            link: LinkSelectConfig::default(),
            greedy: GreedyConfig::default(),
            isp: IspConfig::default(),
            attack: AttackConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if self.lambdas.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::Config(
                "history sizes must be non-empty and positive".into(),
            ));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::Config(
                "batch sizes must be non-empty and positive".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        for &lambda in &self.lambdas {
            crate::metrics::ObjectiveConfig::new(lambda)
                .map_err(|_| Error::Config(format!("invalid lambda {lambda}")))?;
        }
        self.sim.validate()?;
        self.link.validate()?;
        self.greedy.validate()?;
        self.attack.validate()?;
        self.eval.validate()?;
        if self.methods.contains(&Method::Isppolluter) {
            self.isp.n_noise()?;
        }
        Ok(())
    }

    /// Cells in report order: size, method, lambda, h.
    pub fn cells(&self) -> Vec<Cell> {
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        let mut out = Vec::new();
        for &size in &self.sizes {
            for &method in &methods {
                if method.uses_lambda() {
                    for &lambda in &self.lambdas {
                        for &h in &self.batch_sizes {
                            out.push(Cell {
                                method,
                                lambda,
                                h,
                                size,
                            });
                        }
                    }
                } else {
                    out.push(Cell {
                        method,
                        lambda: 0.0,
                        h: 0,
                        size,
                    });
                }
            }
        }
        out
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        seed::derive_indexed(self.seed, "replicate", replicate as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub lambda: f64,
    pub h: usize,
    pub size: usize,
}

impl Cell {
    /// Stable textual key used for seed derivation.
    pub fn key(&self) -> String {
        format!("{}/{}/{}/{}", self.method, self.lambda, self.h, self.size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub replicate: usize,
    pub cell: Cell,
    pub success_rate: f64,
    pub silhouette: Option<f64>,
    pub mean_privacy: f64,
    pub mean_utility_gain: f64,
    pub mean_decoys: f64,
    pub fallback_decoys: usize,
    pub truncated_batches: usize,
    pub attack: Vec<UserAttack>,
    pub tradeoff: Vec<TradeoffRow>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResults {
    /// Replicate-major, then in [`ExperimentConfig::cells`] order.
    pub cells: Vec<CellResult>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs one cell on a prepared dataset.
pub fn run_cell(
    cfg: &ExperimentConfig,
    replicate: usize,
    dataset: &Dataset,
    index: &FeedIndex,
    cell: Cell,
) -> Result<CellResult> {
    let set = dataset
        .set(cell.size)
        .ok_or_else(|| Error::Config(format!("no histories of size {}", cell.size)))?;
    let cell_seed = seed::derive(cfg.replicate_seed(replicate), &cell.key());
    let simulator = FeedSimulator::new(cfg.sim.fof_fraction)?;
    let manipulated: Vec<ManipulatedHistory> = set
        .histories
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            let owner = dataset.truth.owner(&h.user, &dataset.graph)?;
            let acfg = AnonymizerConfig {
                method: cell.method,
                lambda: cell.lambda,
                batch_size_h: cell.h.max(1),
                link: LinkSelectConfig {
                    rng_seed: seed::derive_indexed(cell_seed, "user", i as u64),
                    ..cfg.link
                },
                greedy: cfg.greedy,
                isp: cfg.isp,
            };
            let mut mh = anonymize(h, owner, &dataset.graph, &acfg, &simulator)?;
            mh.lambda = cell.lambda;
            mh.h = cell.h;
            Ok(mh)
        })
        .collect::<Result<_>>()?;

    let report = deanonymize_with(
        index,
        &manipulated,
        &dataset.graph,
        &dataset.truth,
        &cfg.attack,
    )?;
    // Shared by all cells of a size, so identical cohorts cluster identically.
    let eval_cfg = EvalConfig {
        rng_seed: seed::derive_indexed(cfg.replicate_seed(replicate), "eval", cell.size as u64),
        ..cfg.eval
    };
    let eval = evaluate_cohort(&manipulated, dataset.graph.model(), &eval_cfg)?;
    Ok(CellResult {
        replicate,
        cell,
        success_rate: report.success_rate(),
        silhouette: eval.silhouette,
        mean_privacy: mean(eval.rows.iter().map(|r| r.privacy)),
        mean_utility_gain: mean(eval.rows.iter().map(|r| r.utility_gain)),
        mean_decoys: mean(manipulated.iter().map(|m| m.added.len() as f64)),
        fallback_decoys: manipulated
            .iter()
            .map(ManipulatedHistory::fallback_count)
            .sum(),
        truncated_batches: manipulated.iter().map(|m| m.truncated_batches).sum(),
        attack: report.per_user,
        tradeoff: eval.rows,
    })
}

/// Simulates the dataset of one replicate.
pub fn replicate_dataset(cfg: &ExperimentConfig, replicate: usize) -> Result<Dataset> {
    let sim = SimConfig {
        rng_seed: seed::derive(cfg.replicate_seed(replicate), "sim"),
        ..cfg.sim.clone()
    };
    generate_dataset(&sim, &cfg.sizes)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Simulation(format!("thread pool: {e}")))?;
    pool.install(|| {
        let cells = cfg.cells();
        let mut out = Vec::new();
        for r in 0..cfg.replicates {
            let dataset = replicate_dataset(cfg, r)?;
            let index = FeedIndex::new(&dataset.graph);
            let results: Vec<CellResult> = cells
                .par_iter()
                .map(|&c| run_cell(cfg, r, &dataset, &index, c))
                .collect::<Result<_>>()?;
            out.extend(results);
        }
        Ok(ExperimentResults { cells: out })
    })
}

#[derive(Serialize)]
struct CellRow {
    replicate: usize,
    method: Method,
    lambda: f64,
    h: usize,
    history_size: usize,
    n_histories: usize,
    success_rate: f64,
    silhouette: Option<f64>,
    mean_privacy: f64,
    mean_utility_gain: f64,
    mean_decoys: f64,
    fallback_decoys: usize,
    truncated_batches: usize,
}

#[derive(Serialize)]
struct SummaryRow {
    method: Method,
    lambda: f64,
    h: usize,
    history_size: usize,
    replicates: usize,
    success_rate: f64,
    silhouette: Option<f64>,
    mean_privacy: f64,
    mean_utility_gain: f64,
    mean_decoys: f64,
}

#[derive(Serialize)]
struct ReplicateAttackRow<'a> {
    replicate: usize,
    user: &'a str,
    method: Method,
    lambda: f64,
    h: usize,
    history_size: usize,
    true_rank: usize,
    success_top_k: bool,
}

#[derive(Serialize)]
struct ScatterRow<'a> {
    replicate: usize,
    user: &'a str,
    method: Method,
    lambda: f64,
    h: usize,
    history_size: usize,
    privacy: f64,
    utility_gain: f64,
}

#[derive(Serialize)]
struct SilhouetteRow {
    replicate: usize,
    method: Method,
    lambda: f64,
    h: usize,
    history_size: usize,
    silhouette: Option<f64>,
}

/// Cell averages over replicates, keyed in report order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub replicates: usize,
    pub success_rate: f64,
    /// Mean over replicates whose clustering had two or more non-empty clusters.
    pub silhouette: Option<f64>,
    pub mean_privacy: f64,
    pub mean_utility_gain: f64,
    pub mean_decoys: f64,
}

impl ExperimentResults {
    pub fn summary(&self) -> Vec<CellSummary> {
        let mut groups: BTreeMap<String, (usize, Vec<&CellResult>)> = BTreeMap::new();
        for (pos, r) in self.cells.iter().enumerate() {
            groups
                .entry(r.cell.key())
                .or_insert_with(|| (pos, Vec::new()))
                .1
                .push(r);
        }
        let mut rows: Vec<(usize, CellSummary)> = groups
            .into_values()
            .map(|(pos, rs)| {
                let sils: Vec<f64> = rs.iter().filter_map(|r| r.silhouette).collect();
                (
                    pos,
                    CellSummary {
                        cell: rs[0].cell,
                        replicates: rs.len(),
                        success_rate: mean(rs.iter().map(|r| r.success_rate)),
                        silhouette: (!sils.is_empty()).then(|| mean(sils)),
                        mean_privacy: mean(rs.iter().map(|r| r.mean_privacy)),
                        mean_utility_gain: mean(rs.iter().map(|r| r.mean_utility_gain)),
                        mean_decoys: mean(rs.iter().map(|r| r.mean_decoys)),
                    },
                )
            })
            .collect();
        rows.sort_by_key(|(pos, _)| *pos);
        rows.into_iter().map(|(_, s)| s).collect()
    }

    /// Summary row for a cell, if it was run.
    pub fn find(&self, method: Method, lambda: f64, h: usize, size: usize) -> Option<CellSummary> {
        self.summary().into_iter().find(|s| {
            s.cell.method == method
                && s.cell.lambda == lambda
                && s.cell.h == h
                && s.cell.size == size
        })
    }
}

fn writer(dir: &Path, name: &str) -> Result<(PathBuf, csv::Writer<std::fs::File>)> {
    let path = dir.join(name);
    let w = csv::Writer::from_path(&path)?;
    Ok((path, w))
}

fn finish(path: PathBuf, mut w: csv::Writer<std::fs::File>) -> Result<PathBuf> {
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes every report table into `dir` (created if missing) and returns the written paths.
pub fn write_reports(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let (p, mut w) = writer(dir, "cells.csv")?;
    for r in &results.cells {
        w.serialize(CellRow {
            replicate: r.replicate,
            method: r.cell.method,
            lambda: r.cell.lambda,
            h: r.cell.h,
            history_size: r.cell.size,
            n_histories: r.attack.len(),
            success_rate: r.success_rate,
            silhouette: r.silhouette,
            mean_privacy: r.mean_privacy,
            mean_utility_gain: r.mean_utility_gain,
            mean_decoys: r.mean_decoys,
            fallback_decoys: r.fallback_decoys,
            truncated_batches: r.truncated_batches,
        })?;
    }
    written.push(finish(p, w)?);

    let (p, mut w) = writer(dir, "summary.csv")?;
    for s in results.summary() {
        w.serialize(SummaryRow {
            method: s.cell.method,
            lambda: s.cell.lambda,
            h: s.cell.h,
            history_size: s.cell.size,
            replicates: s.replicates,
            success_rate: s.success_rate,
            silhouette: s.silhouette,
            mean_privacy: s.mean_privacy,
            mean_utility_gain: s.mean_utility_gain,
            mean_decoys: s.mean_decoys,
        })?;
    }
    written.push(finish(p, w)?);

    let (p, mut w) = writer(dir, "attack_users.csv")?;
    for r in &results.cells {
        for row in &r.attack {
            w.serialize(ReplicateAttackRow {
                replicate: r.replicate,
                user: &row.user,
                method: row.method,
                lambda: row.lambda,
                h: row.h,
                history_size: row.history_size,
                true_rank: row.true_rank,
                success_top_k: row.success_top_k,
            })?;
        }
    }
    written.push(finish(p, w)?);

    let (p, mut w) = writer(dir, "scatter.csv")?;
    for r in &results.cells {
        for t in &r.tradeoff {
            w.serialize(ScatterRow {
                replicate: r.replicate,
                user: &t.user,
                method: t.method,
                lambda: r.cell.lambda,
                h: r.cell.h,
                history_size: t.history_size,
                privacy: t.privacy,
                utility_gain: t.utility_gain,
            })?;
        }
    }
    written.push(finish(p, w)?);

    let (p, mut w) = writer(dir, "silhouette.csv")?;
    for r in &results.cells {
        w.serialize(SilhouetteRow {
            replicate: r.replicate,
            method: r.cell.method,
            lambda: r.cell.lambda,
            h: r.cell.h,
            history_size: r.cell.size,
            silhouette: r.silhouette,
        })?;
    }
    written.push(finish(p, w)?);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            seed: 3,
            sizes: vec![20],
            lambdas: vec![0.0, 10.0],
            methods: vec![Method::None, Method::Pbooster, Method::Random],
            sim: SimConfig {
                n_users: 40,
                degree_min: 3,
                degree_max: 8,
                ..SimConfig::default()
            },
            eval: EvalConfig {
                k: 3,
                restarts: 2,
                ..EvalConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn empty_lambda_grid_is_a_config_error() {
        let cfg = ExperimentConfig {
            lambdas: vec![],
            ..tiny()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn one_result_per_cell_and_replicate() {
        let cfg = ExperimentConfig {
            replicates: 2,
            ..tiny()
        };
        // none: 1 cell; pbooster, random: 2 lambdas x 1 h each.
        assert_eq!(cfg.cells().len(), 5);
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.cells.len(), 10);
        assert_eq!(res.summary().len(), 5);
        let zero = res.find(Method::Pbooster, 0.0, 25, 20).unwrap();
        assert_eq!(zero.mean_decoys, 0.0);
        let none = res.find(Method::None, 0.0, 0, 20).unwrap();
        assert_eq!(zero.success_rate, none.success_rate);
        assert!(res.cells.iter().all(|c| c.attack.len() == 40));
    }

    #[test]
    fn cell_results_do_not_depend_on_grid_or_jobs() {
        let a = run_experiment(&ExperimentConfig {
            jobs: Some(1),
            ..tiny()
        })
        .unwrap();
        let b = run_experiment(&ExperimentConfig {
            lambdas: vec![10.0],
            methods: vec![Method::Pbooster],
            jobs: Some(3),
            ..tiny()
        })
        .unwrap();
        let pick = |r: &ExperimentResults| {
            r.cells
                .iter()
                .find(|c| c.cell.method == Method::Pbooster && c.cell.lambda == 10.0)
                .cloned()
                .unwrap()
        };
        assert_eq!(pick(&a), pick(&b));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let cfg = ExperimentConfig::from_toml_str(
            "seed = 9\nlambdas = [1.0]\nmethods = [\"pbooster\"]\n[sim]\nn_users = 50\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sim.n_users, 50);
        assert_eq!(cfg.sizes, vec![30, 50, 100]);
        assert!(ExperimentConfig::from_toml_str("sed = 9").is_err());
    }
}
