//! Equilibrium density and average returns across the temptation range,
//! followed by power-law, quadratic and trigonometric fits of rho(b).
//!
//!     cargo run --release --example temptation_sweep -- [side] [replicates]

use gridgame::experiments::{grid, sweep_b, RunConfig};
use gridgame::fitting::{compare_fits, DEFAULT_STARTS};
use gridgame::lattice::GameParams;
use gridgame::output::Table;
use gridgame::rules::RuleKind;

fn main() -> gridgame::error::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let side = args.next().transpose().ok().flatten().unwrap_or(50);
    let replicates = args.next().transpose().ok().flatten().unwrap_or(10);

    let base = RunConfig::new(side, GameParams::new(1.02, RuleKind::MonteCarlo)?)
        .replicates(replicates)
        .seed(5);
    let rows = sweep_b(&base, &grid(1.02, 1.40, 0.02)?)?;
    print!("{}", Table::sweep(&rows).to_csv_string());

    let xs: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.stats.rho_mean).collect();
    println!();
    print!(
        "{}",
        Table::fit_report(&compare_fits(&xs, &ys, DEFAULT_STARTS, 5)).to_csv_string()
    );
    Ok(())
}
