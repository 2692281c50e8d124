//! Equilibrium density against the initial cooperator share and against
//! the population size.
//!
//!     cargo run --release --example sensitivity -- [replicates]

use gridgame::experiments::{sweep_population, sweep_rho0, RunConfig};
use gridgame::lattice::GameParams;
use gridgame::rules::RuleKind;

fn main() -> gridgame::error::Result<()> {
    let replicates = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(10);
    let base = RunConfig::new(60, GameParams::new(1.1, RuleKind::MonteCarlo)?)
        .replicates(replicates)
        .seed(8);

    println!("initial share:");
    for row in sweep_rho0(&base, &[0.2, 0.4, 0.6, 0.8, 0.99])? {
        println!("  rho0 = {:<5} rho = {:.4}", row.rho0, row.stats.rho_mean);
    }
    println!("population:");
    for row in sweep_population(&base, &[10, 20, 30, 40, 60, 80])? {
        println!(
            "  N = {:<6} rho = {:.4}",
            row.population, row.stats.rho_mean
        );
    }
    Ok(())
}
