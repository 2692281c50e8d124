//! Defector blocks invading an all-cooperator lattice under the roulette
//! rule and under unconditional imitation.
//!
//!     cargo run --release --example invasion -- [replicates]

use gridgame::experiments::{invasion_scenario, run_replicates, RunConfig};
use gridgame::lattice::GameParams;
use gridgame::rules::RuleKind;

fn main() -> gridgame::error::Result<()> {
    let replicates = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(10);
    let side = 100;

    println!(
        "{:<5} {:>7} {:>8} {:>8} {:>10}",
        "rule", "block", "share", "rho", "D cores"
    );
    for rule in [RuleKind::MonteCarlo, RuleKind::UnconditionalImitation] {
        for fraction in [0.04, 0.0625, 0.1089] {
            let (pattern, exact) = invasion_scenario(side, fraction)?;
            let config = RunConfig::new(side, GameParams::new(1.1, rule)?)
                .pattern(pattern)
                .replicates(replicates)
                .seed(3);
            let stats = run_replicates(&config)?;
            let w = (exact.sqrt() * side as f64).round();
            println!(
                "{:<5} {:>7} {:>7.2}% {:>8.4} {:>10.1}",
                rule.name(),
                format!("{w}x{w}"),
                100.0 * exact,
                stats.rho_mean,
                stats.defector_core_mean
            );
        }
    }
    Ok(())
}
