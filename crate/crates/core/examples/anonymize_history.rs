//! Runs PBooster and the three baselines on one simulated history and compares privacy,
//! utility and decoy counts.
//!
//! ```text
//! cargo run --example anonymize_history
//! ```

use pbooster::anonymizers::{anonymize, plan_batches, AnonymizerConfig, Method};
use pbooster::domain::{count_links, normalize};
use pbooster::linksel::LinkSelectConfig;
use pbooster::metrics::{privacy, utility_gain};
use pbooster::socialsim::{generate_dataset, FeedSimulator, SimConfig};

fn main() -> pbooster::Result<()> {
    let ds = generate_dataset(
        &SimConfig {
            n_users: 200,
            rng_seed: 5,
            ..SimConfig::default()
        },
        &[50],
    )?;
    let model = ds.graph.model();
    let history = &ds.sets[0].histories[0];
    let owner = ds.truth.owner(&history.user, &ds.graph)?;
    let sim = FeedSimulator::new(0.16)?;
    let p = normalize(&count_links(&history.links, model)?)?;
    println!(
        "history {} ({} links), privacy {:.4}",
        history.user,
        history.len(),
        privacy(&p)
    );

    let (plans, _) = plan_batches(history, model, 10.0, 25, &Default::default())?;
    for (b, plan) in plans.iter().enumerate() {
        println!("  batch {b}: add {:?}", plan.additions());
    }

    for method in Method::ALL {
        let cfg = AnonymizerConfig {
            method,
            lambda: 10.0,
            batch_size_h: 25,
            link: LinkSelectConfig {
                rng_seed: 3,
                ..LinkSelectConfig::default()
            },
            ..AnonymizerConfig::default()
        };
        let out = anonymize(history, owner, &ds.graph, &cfg, &sim)?;
        let p_hat = normalize(&count_links(out.combined(), model)?)?;
        println!(
            "{:<12} decoys {:>6}  privacy {:.4}  utility gain {:.4}",
            method.as_str(),
            out.added.len(),
            privacy(&p_hat),
            utility_gain(&p, &p_hat)?
        );
    }
    Ok(())
}
