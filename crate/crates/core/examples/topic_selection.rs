//! Greedy topic selection compared with exhaustive search on small instances.
//!
//! ```text
//! cargo run --example topic_selection
//! ```

use pbooster::domain::TopicFrequencyVector;
use pbooster::metrics::{ObjectiveConfig, OBJECTIVE_SHIFT};
use pbooster::topicsel::{brute_force_topic_selection, greedy_topic_selection, GreedyConfig, Move};

fn main() -> pbooster::Result<()> {
    let cases: [(&[u64], f64, u64); 4] = [
        (&[2, 0], 1.0, 2),
        (&[10, 0], 10.0, 12),
        (&[5, 1, 0, 2], 3.0, 10),
        (&[6, 2, 1], 0.5, 12),
    ];
    for (counts, lambda, budget) in cases {
        let c = TopicFrequencyVector::from_counts(counts.to_vec());
        let obj = ObjectiveConfig::new(lambda)?;
        let greedy = greedy_topic_selection(
            &c,
            &obj,
            &GreedyConfig {
                max_additions: Some(budget),
                ..GreedyConfig::default()
            },
        )?;
        let best = brute_force_topic_selection(&c, &obj, budget)?;
        let ratio = (greedy.value + OBJECTIVE_SHIFT) / (best.value + OBJECTIVE_SHIFT);
        println!("c = {counts:?}, lambda = {lambda}, budget = {budget}");
        println!(
            "  greedy  {:?}  G = {:.4}  ({} moves: {})",
            greedy.plan.additions(),
            greedy.value,
            greedy.trajectory.len(),
            greedy
                .trajectory
                .iter()
                .map(|(mv, _)| match mv {
                    Move::Add(t) => format!("+{t}"),
                    Move::Remove(t) => format!("-{t}"),
                })
                .collect::<Vec<_>>()
                .join(" ")
        );
        println!(
            "  optimum {:?}  G = {:.4}  ({} plans searched)  shifted ratio {ratio:.4}",
            best.plan.additions(),
            best.value,
            best.evaluated
        );
    }
    Ok(())
}
