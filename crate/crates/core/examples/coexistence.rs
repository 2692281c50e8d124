//! Cooperators and defectors coexist on the lattice while the well-mixed
//! population loses every cooperator.
//!
//!     cargo run --release --example coexistence -- [side] [replicates]

use gridgame::experiments::RunConfig;
use gridgame::lattice::{GameParams, DEGREE};
use gridgame::meanfield::{mf_integrate, DEFAULT_DT};
use gridgame::rules::RuleKind;

fn main() -> gridgame::error::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let side = args.next().transpose().ok().flatten().unwrap_or(60);
    let replicates = args.next().transpose().ok().flatten().unwrap_or(20);

    let b = 1.1;
    let config = RunConfig::new(side, GameParams::new(b, RuleKind::MonteCarlo)?)
        .rounds(2000, 200)
        .replicates(replicates)
        .seed(1);
    let stats = gridgame::experiments::run_replicates(&config)?;
    let mf = mf_integrate(0.5, b, DEGREE, DEFAULT_DT, 2000.0)?;

    println!("{:>6} {:>8} {:>10}", "t", "lattice", "mean-field");
    for t in [0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000] {
        println!("{t:>6} {:>8.4} {:>10.4}", stats.series_mean[t], mf[t].rho);
    }
    println!(
        "\nequilibrium rho = {:.4} +/- {:.4} over {} replicates of {side}x{side}, drift {:.5}",
        stats.rho_mean,
        stats.standard_error(),
        stats.replicates(),
        stats.trailing_drift()
    );
    Ok(())
}
