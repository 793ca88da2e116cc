//! A desk-scale experiment grid: every method over a small lambda grid, three replicates,
//! with all report tables written as CSV.
//!
//! ```text
//! cargo run --release --example experiment_grid -- [out_dir]
//! ```

use std::path::PathBuf;

use pbooster::experiment::{run_experiment, write_reports, ExperimentConfig};
use pbooster::socialsim::SimConfig;

fn main() -> pbooster::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "experiment_out".into()),
    );
    let cfg = ExperimentConfig {
        seed: 2024,
        replicates: 3,
        sizes: vec![50],
        lambdas: vec![0.0, 1.0, 10.0, 100.0],
        sim: SimConfig {
            n_users: 200,
            ..SimConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let results = run_experiment(&cfg)?;
    println!(
        "{:<12} {:>7} {:>3} {:>9} {:>10} {:>8}",
        "method", "lambda", "h", "success%", "silhouette", "privacy"
    );
    for s in results.summary() {
        println!(
            "{:<12} {:>7} {:>3} {:>9.2} {:>10} {:>8.4}",
            s.cell.method.as_str(),
            s.cell.lambda,
            s.cell.h,
            s.success_rate,
            s.silhouette.map_or("-".into(), |x| format!("{x:.4}")),
            s.mean_privacy
        );
    }
    for p in write_reports(&results, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
