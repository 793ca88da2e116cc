//! Generates a synthetic social graph with feed-derived browsing histories and writes the
//! JSON Lines files the command-line tool consumes.
//!
//! ```text
//! cargo run --example simulate_dataset -- [out_dir]
//! ```

use std::path::PathBuf;

use pbooster::domain::{save_graph, save_histories};
use pbooster::socialsim::{generate_dataset, LinkOrigin, SimConfig};

fn main() -> pbooster::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sim_out".into()));
    let cfg = SimConfig {
        n_users: 300,
        rng_seed: 7,
        ..SimConfig::default()
    };
    let ds = generate_dataset(&cfg, &[30, 50])?;
    let g = &ds.graph;
    let degrees: Vec<usize> = (0..g.len()).map(|u| g.friends(u).len()).collect();
    println!(
        "{} users, degree {}..={}, mean {:.1}, {} distinct posted links",
        g.len(),
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap(),
        degrees.iter().sum::<usize>() as f64 / g.len() as f64,
        g.link_universe_size()
    );
    for set in &ds.sets {
        let links: Vec<_> = set.provenance.iter().flat_map(|p| &p.links).collect();
        let fof = links
            .iter()
            .filter(|l| l.origin == LinkOrigin::FriendOfFriend)
            .count();
        println!(
            "size {}: {} histories, friend-of-friend share {:.3}",
            set.size,
            set.histories.len(),
            fof as f64 / links.len() as f64
        );
    }
    let first = &ds.sets[0].histories[0];
    println!(
        "history {} belongs to {}",
        first.user,
        ds.truth.get(&first.user).unwrap_or("?")
    );

    save_graph(&out.join("graph.jsonl"), g)?;
    for set in &ds.sets {
        save_histories(
            &out.join(format!("histories_{}.jsonl", set.size)),
            &set.histories,
        )?;
    }
    ds.truth.save(&out.join("truth.jsonl"))?;
    println!("wrote {}", out.display());
    Ok(())
}
