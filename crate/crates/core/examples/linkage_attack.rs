//! Ranks every user of a simulated graph as the possible owner of each history, before and
//! after PBooster.
//!
//! ```text
//! cargo run --release --example linkage_attack
//! ```

use pbooster::anonymizers::{anonymize, AnonymizerConfig, ManipulatedHistory};
use pbooster::attack::{deanonymize_with, AttackConfig, FeedIndex};
use pbooster::linksel::LinkSelectConfig;
use pbooster::socialsim::{generate_dataset, FeedSimulator, SimConfig};

fn main() -> pbooster::Result<()> {
    let ds = generate_dataset(
        &SimConfig {
            n_users: 200,
            rng_seed: 2,
            ..SimConfig::default()
        },
        &[50],
    )?;
    let sim = FeedSimulator::new(0.16)?;
    let index = FeedIndex::new(&ds.graph);
    let cfg = AttackConfig::default();

    let mut original = Vec::new();
    let mut boosted = Vec::new();
    for (i, h) in ds.sets[0].histories.iter().enumerate() {
        let owner = ds.truth.owner(&h.user, &ds.graph)?;
        original.push(ManipulatedHistory::unchanged(h.clone(), owner));
        let acfg = AnonymizerConfig {
            link: LinkSelectConfig {
                rng_seed: i as u64,
                ..LinkSelectConfig::default()
            },
            ..AnonymizerConfig::default()
        };
        boosted.push(anonymize(h, owner, &ds.graph, &acfg, &sim)?);
    }

    for (label, set) in [("original", &original), ("pbooster", &boosted)] {
        let report = deanonymize_with(&index, set, &ds.graph, &ds.truth, &cfg)?;
        let mut ranks: Vec<usize> = report.per_user.iter().map(|u| u.true_rank).collect();
        ranks.sort_unstable();
        println!(
            "{label:<9} top-{} success {:6.2}%  median rank {}  worst rank {}",
            cfg.top_k,
            report.success_rate(),
            ranks[ranks.len() / 2],
            ranks[ranks.len() - 1]
        );
    }
    Ok(())
}
