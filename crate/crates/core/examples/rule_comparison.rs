//! The four update rules started from identical random lattices.
//!
//!     cargo run --release --example rule_comparison -- [side] [replicates]

use gridgame::experiments::{compare_rules, RunConfig};
use gridgame::lattice::GameParams;
use gridgame::rules::RuleKind;

fn main() -> gridgame::error::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let side = args.next().transpose().ok().flatten().unwrap_or(50);
    let replicates = args.next().transpose().ok().flatten().unwrap_or(10);

    let base = RunConfig::new(side, GameParams::new(1.1, RuleKind::MonteCarlo)?)
        .replicates(replicates)
        .seed(6);
    let rows = compare_rules(&base)?;

    print!("{:>6}", "t");
    for r in &rows {
        print!(" {:>7}", r.rule.name());
    }
    println!();
    for t in [0, 1, 5, 10, 50, 100, 500, 1000, 2000] {
        print!("{t:>6}");
        for r in &rows {
            print!(" {:>7.4}", r.stats.series_mean[t]);
        }
        println!();
    }
    println!();
    for r in &rows {
        println!(
            "{:<6} rho = {:.4} +/- {:.4}",
            r.rule.name(),
            r.stats.rho_mean,
            r.stats.standard_error()
        );
    }
    Ok(())
}
