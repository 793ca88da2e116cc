//! Clusters users by their observed topic distributions with k-means and reports the
//! silhouette coefficient and the privacy / utility trade-off per method.
//!
//! ```text
//! cargo run --release --example cluster_utility
//! ```

use pbooster::anonymizers::{anonymize, AnonymizerConfig, Method};
use pbooster::evaluate::{evaluate_cohort, kmeans, silhouette, EvalConfig};
use pbooster::linksel::LinkSelectConfig;
use pbooster::socialsim::{generate_dataset, FeedSimulator, SimConfig};

fn main() -> pbooster::Result<()> {
    // Two obvious groups first.
    let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
    let c = kmeans(
        &pts,
        &EvalConfig {
            k: 2,
            ..EvalConfig::default()
        },
    )?;
    println!(
        "toy clustering {:?}, silhouette {:.4}",
        c.assignment,
        silhouette(&pts, &c.assignment)?
    );

    let ds = generate_dataset(
        &SimConfig {
            n_users: 200,
            rng_seed: 9,
            ..SimConfig::default()
        },
        &[50],
    )?;
    let sim = FeedSimulator::new(0.16)?;
    let eval = EvalConfig {
        rng_seed: 4,
        ..EvalConfig::default()
    };
    for method in Method::ALL {
        let cohort = ds.sets[0]
            .histories
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let owner = ds.truth.owner(&h.user, &ds.graph)?;
                let cfg = AnonymizerConfig {
                    method,
                    link: LinkSelectConfig {
                        rng_seed: i as u64,
                        ..LinkSelectConfig::default()
                    },
                    ..AnonymizerConfig::default()
                };
                anonymize(h, owner, &ds.graph, &cfg, &sim)
            })
            .collect::<pbooster::Result<Vec<_>>>()?;
        let report = evaluate_cohort(&cohort, ds.graph.model(), &eval)?;
        let n = report.rows.len() as f64;
        println!(
            "{:<12} silhouette {:>7}  mean privacy {:.4}  mean utility gain {:.4}",
            method.as_str(),
            report.silhouette.map_or("-".into(), |s| format!("{s:.4}")),
            report.rows.iter().map(|r| r.privacy).sum::<f64>() / n,
            report.rows.iter().map(|r| r.utility_gain).sum::<f64>() / n,
        );
    }
    Ok(())
}
