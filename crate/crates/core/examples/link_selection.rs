//! Turns an addition plan into concrete decoy links drawn from non-friends' simulated
//! histories, and shows the friends-only variant for contrast.
//!
//! ```text
//! cargo run --example link_selection
//! ```

use pbooster::linksel::{LinkSelectConfig, LinkSelector, Population};
use pbooster::socialsim::{generate_graph, FeedSimulator, SimConfig};
use pbooster::topicsel::AdditionPlan;

fn main() -> pbooster::Result<()> {
    let graph = generate_graph(&SimConfig {
        n_users: 200,
        rng_seed: 11,
        ..SimConfig::default()
    })?;
    let sim = FeedSimulator::new(0.16)?;
    let owner = graph.require_user("u00042")?;
    let mut plan = vec![0u64; graph.model().m()];
    plan[3] = 2;
    plan[7] = 1;
    plan[15] = 3;
    let plan = AdditionPlan::from_vec(plan);
    let cfg = LinkSelectConfig {
        rng_seed: 1,
        ..LinkSelectConfig::default()
    };

    for population in [Population::NonFriends, Population::Friends] {
        let mut sel = LinkSelector::new(&graph, owner, population, cfg, &sim)?;
        println!("{population:?} decoys for {}:", graph.name(owner));
        for d in sel.select(&plan)? {
            println!(
                "  topic {:>2}  {:<14} from {} (friend: {}), posted by {} (friend: {}){}",
                d.link.topic,
                d.link.url,
                graph.name(d.source_user),
                graph.are_friends(owner, d.source_user),
                graph.name(d.poster),
                graph.are_friends(owner, d.poster),
                if d.fallback { " [fallback]" } else { "" }
            );
        }
    }
    Ok(())
}
