//! Privacy and utility metrics on a few hand-made topic distributions.
//!
//! ```text
//! cargo run --example privacy_metrics
//! ```

use pbooster::domain::{normalize, TopicDistribution, TopicFrequencyVector};
use pbooster::metrics::{objective_g, privacy, utility_gain, utility_loss, ObjectiveConfig};

fn main() -> pbooster::Result<()> {
    let m = 4;
    let uniform = TopicDistribution::uniform(m);
    let focused = TopicDistribution::new(vec![1.0, 0.0, 0.0, 0.0])?;
    println!(
        "privacy(uniform over {m}) = {:.6} (ln {m} = {:.6})",
        privacy(&uniform),
        (m as f64).ln()
    );
    println!("privacy(single topic)    = {:.6}", privacy(&focused));

    // A sports-heavy user, before and after adding a few decoys in other topics.
    let c = TopicFrequencyVector::from_counts(vec![12, 3, 1, 0]);
    let c_hat = c.plus(&[0, 2, 3, 4]);
    let p = normalize(&c)?;
    let p_hat = normalize(&c_hat)?;
    println!(
        "\noriginal counts  {:?} -> privacy {:.4}",
        c.counts(),
        privacy(&p)
    );
    println!(
        "with decoys      {:?} -> privacy {:.4}",
        c_hat.counts(),
        privacy(&p_hat)
    );
    println!(
        "utility loss {:.4}, utility gain {:.4}",
        utility_loss(&p, &p_hat)?,
        utility_gain(&p, &p_hat)?
    );

    for lambda in [0.0, 1.0, 10.0] {
        let cfg = ObjectiveConfig::new(lambda)?;
        println!(
            "G at lambda={lambda:>4}: original {:>8.4}, with decoys {:>8.4}",
            objective_g(&c, &c, &cfg)?,
            objective_g(&c, &c_hat, &cfg)?
        );
    }
    Ok(())
}
